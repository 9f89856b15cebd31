"""Assembly of unified instruction documents and corpus persistence.

A document is the fixed assistant preamble plus an input block that lays out
the account's profile slots under their category headers and ends with the
post-summary sentence (meta-summary variant) or a placeholder (metadata
variant).  Corpora are JSON-lines files with a lossless round trip.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import ConfigError
from .ingest import UserRecord
from .profile import PLACEHOLDER, ProfileRendering
from .summary import PostSummary

PREAMBLE = (
    "You are a social media account classification assistant. Please determine "
    "whether the given account is a human or a bot based on the provided "
    "account features."
)

INPUT_LEAD = (
    "Below is structured information about a social media account. Please "
    "determine whether this account is a human or a bot based on this "
    "information."
)

SUMMARY_TAG = "[Multi-Dimensional Summary]"

# 2048 tokens at ~4 chars/token
MAX_DOC_CHARS = 8192

VARIANT_METADATA = "metadata"
VARIANT_META_SUMMARY = "meta-summary"

LABEL_NAMES = {0: "human", 1: "bot"}
LABEL_IDS = {v: k for k, v in LABEL_NAMES.items()}


class DocumentTruncated(UserWarning):
    pass


@dataclass
class InstructionDoc:
    user_id: str
    instruction: str
    input: str
    label: int
    domain_id: Optional[int]


def build_instruction(
    record: UserRecord,
    rendering: ProfileRendering,
    summary: Optional[PostSummary] = None,
    max_chars: int = MAX_DOC_CHARS,
) -> InstructionDoc:
    """Assemble one instruction document from a record and its rendering.

    ``summary=None`` produces the metadata variant; the Posts Events block
    then carries the placeholder, as it also does when the account has no
    history to summarize.
    """
    if summary is not None:
        posts_block = f"Posts Events: {SUMMARY_TAG}: {summary.sentence}"
    else:
        posts_block = f"Posts Events: {PLACEHOLDER}"

    input_text = "\n\n".join(
        (INPUT_LEAD, f"User ID: {record.user_id}", rendering.text, posts_block)
    )

    budget = max_chars - len(PREAMBLE)
    if len(input_text) > budget:
        warnings.warn(
            f"user {record.user_id}: document over {max_chars} chars, tail-truncated",
            DocumentTruncated,
            stacklevel=2,
        )
        input_text = input_text[:budget]

    return InstructionDoc(
        user_id=record.user_id,
        instruction=PREAMBLE,
        input=input_text,
        label=record.label,
        domain_id=record.domain_id,
    )


def doc_text(doc: InstructionDoc) -> str:
    """The full text fed to encoders: instruction then input."""
    return f"{doc.instruction}\n\n{doc.input}"


def doc_to_dict(doc: InstructionDoc) -> dict:
    return {
        "user_id": doc.user_id,
        "instruction": doc.instruction,
        "input": doc.input,
        "label": LABEL_NAMES[doc.label],
        "domain_id": doc.domain_id,
    }


def doc_from_dict(raw: dict) -> InstructionDoc:
    return InstructionDoc(
        user_id=raw["user_id"],
        instruction=raw["instruction"],
        input=raw["input"],
        label=LABEL_IDS[raw["label"]],
        domain_id=None if raw.get("domain_id") is None else int(raw["domain_id"]),
    )


def write_corpus(docs: Iterable[InstructionDoc], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc_to_dict(doc), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_corpus(path) -> list:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                docs.append(doc_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"{path}: malformed document at line {i}: {exc}") from exc
    return docs


def corpus_manifest(records, variant: str, truncated: int = 0) -> dict:
    """Counts per dataset and per domain for the corpus sidecar manifest."""
    by_dataset: dict = {}
    by_domain: dict = {}
    total = 0
    for record in records:
        total += 1
        by_dataset[record.dataset_id] = by_dataset.get(record.dataset_id, 0) + 1
        key = "none" if record.domain_id is None else str(record.domain_id)
        by_domain[key] = by_domain.get(key, 0) + 1
    return {
        "variant": variant,
        "total": total,
        "by_dataset": dict(sorted(by_dataset.items())),
        "by_domain": dict(sorted(by_domain.items())),
        "truncated": truncated,
    }
