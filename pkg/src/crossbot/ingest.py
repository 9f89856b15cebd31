"""Heterogeneous source ingestion into unified user records.

Each source dataset (CSV or JSON-lines) is described by a ``SourceSchema``
mapping its columns onto the global raw profile schema.  Parsed records are
deduplicated across datasets (earliest release kept), class-balanced by
seeded bot downsampling, and tagged with a temporal domain label derived
from the release year.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import BalanceError, ConfigError, DomainLabelError, LabelConflictError
from .profile import RAW_PROFILE_FIELDS

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

HUMAN, BOT = 0, 1

TRAIN_YEAR_MIN, TRAIN_YEAR_MAX = 2015, 2019
N_DOMAINS = 3


@dataclass
class UserRecord:
    """One account in the unified corpus."""

    user_id: str
    dataset_id: str
    release_year: int
    label: int
    domain_id: Optional[int]
    profile: dict = field(default_factory=dict)
    posts: list = field(default_factory=list)
    relations: list = field(default_factory=list)  # [(relation_type, neighbor_id)]


@dataclass
class SourceSchema:
    """How to read one source dataset into UserRecords."""

    dataset_id: str
    release_year: int
    path: str = ""
    format: str = "csv"  # "csv" | "jsonl"
    id_column: str = "id"
    field_map: dict = field(default_factory=dict)  # source column -> raw field id
    label_column: str = ""
    bot_values: tuple = ("bot", "1")
    human_values: tuple = ("human", "0")
    fixed_label: str = ""  # "bot" or "human" for single-class sources
    posts_column: str = ""
    relations_column: str = ""

    def validate(self) -> None:
        unknown = [f for f in self.field_map.values() if f not in RAW_PROFILE_FIELDS]
        if unknown:
            raise ConfigError(
                f"{self.dataset_id}: field_map targets outside the profile schema: {unknown}"
            )
        if self.format not in ("csv", "jsonl"):
            raise ConfigError(f"{self.dataset_id}: unsupported format {self.format!r}")
        if not self.label_column and self.fixed_label not in ("bot", "human"):
            raise ConfigError(
                f"{self.dataset_id}: need either label_column or fixed_label"
            )


@dataclass
class RowDiagnostic:
    line: int
    message: str


@dataclass
class ParseResult:
    records: list
    diagnostics: list

    @property
    def skipped(self) -> int:
        return len(self.diagnostics)


def load_registry(path) -> dict:
    """Read the source registry (TOML) into {dataset_id: SourceSchema}."""
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    sources = doc.get("sources")
    if not isinstance(sources, dict) or not sources:
        raise ConfigError(f"{path}: registry has no [sources.*] tables")
    base = Path(path).parent
    registry = {}
    for dataset_id, entry in sources.items():
        schema = SourceSchema(
            dataset_id=dataset_id,
            release_year=int(entry["release_year"]),
            path=str(base / entry["path"]) if entry.get("path") else "",
            format=entry.get("format", "csv"),
            id_column=entry.get("id_column", "id"),
            field_map=dict(entry.get("field_map", {})),
            label_column=entry.get("label_column", ""),
            bot_values=tuple(str(v).lower() for v in entry.get("bot_values", ("bot", "1"))),
            human_values=tuple(str(v).lower() for v in entry.get("human_values", ("human", "0"))),
            fixed_label=entry.get("fixed_label", ""),
            posts_column=entry.get("posts_column", ""),
            relations_column=entry.get("relations_column", ""),
        )
        schema.validate()
        registry[dataset_id] = schema
    return registry


def resolve_schema(registry: dict, dataset_id: str) -> SourceSchema:
    if dataset_id not in registry:
        raise ConfigError(f"unknown dataset_id {dataset_id!r}; not in the source registry")
    return registry[dataset_id]


def assign_domain(release_year: int) -> int:
    """Temporal domain label: 2015-2017 -> 0, 2018 -> 1, 2019 -> 2."""
    if TRAIN_YEAR_MIN <= release_year <= 2017:
        return 0
    if release_year == 2018:
        return 1
    if release_year == 2019:
        return 2
    raise DomainLabelError(
        f"release year {release_year}: target-period dataset; domain label undefined"
    )


def _read_label(raw, schema: SourceSchema):
    if schema.fixed_label:
        return BOT if schema.fixed_label == "bot" else HUMAN
    if raw is None:
        return None
    value = str(raw).strip().lower()
    if value in schema.bot_values:
        return BOT
    if value in schema.human_values:
        return HUMAN
    return None


def _parse_list_cell(raw, what: str):
    """Parse a JSON-array cell (CSV) or accept a native list (JSON-lines)."""
    if raw is None or raw == "":
        return []
    if isinstance(raw, list):
        return raw
    parsed = json.loads(raw)
    if not isinstance(parsed, list):
        raise ValueError(f"{what} cell is not a list")
    return parsed


def _row_to_record(row: dict, schema: SourceSchema, domain_id: Optional[int]) -> UserRecord:
    raw_id = row.get(schema.id_column)
    user_id = "" if raw_id is None else str(raw_id).strip()
    if not user_id:
        raise ValueError(f"missing user id (column {schema.id_column!r})")

    label = _read_label(row.get(schema.label_column) if schema.label_column else None, schema)
    if label is None:
        raise ValueError(f"unreadable label (column {schema.label_column!r})")

    profile = {}
    for src_col, field_id in schema.field_map.items():
        if src_col in row and row[src_col] is not None:
            profile[field_id] = row[src_col]

    posts = [str(p) for p in _parse_list_cell(row.get(schema.posts_column) if schema.posts_column else None, "posts")]

    relations = []
    raw_rel = row.get(schema.relations_column) if schema.relations_column else None
    for pair in _parse_list_cell(raw_rel, "relations"):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ValueError("relations cell entries must be [relation_type, neighbor_id] pairs")
        relations.append((str(pair[0]), str(pair[1])))

    return UserRecord(
        user_id=user_id,
        dataset_id=schema.dataset_id,
        release_year=schema.release_year,
        label=label,
        domain_id=domain_id,
        profile=profile,
        posts=posts,
        relations=relations,
    )


def _iter_rows(path, schema: SourceSchema):
    """Yield (line_number, row_dict_or_None, error_message)."""
    if schema.format == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for i, row in enumerate(reader, start=2):  # header is line 1
                if None in row:  # more cells than header columns
                    yield i, None, "row has more cells than the header"
                    continue
                yield i, row, ""
    else:
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    yield i, None, f"invalid JSON: {exc.msg}"
                    continue
                if not isinstance(row, dict):
                    yield i, None, "JSON line is not an object"
                    continue
                yield i, row, ""


def parse_source(path, schema: SourceSchema) -> ParseResult:
    """Parse one source file; malformed rows are skipped with diagnostics."""
    schema.validate()
    if TRAIN_YEAR_MIN <= schema.release_year <= TRAIN_YEAR_MAX:
        domain_id = assign_domain(schema.release_year)
    else:
        domain_id = None  # evaluation-period source

    records, diagnostics = [], []
    for line, row, err in _iter_rows(path, schema):
        if err:
            diagnostics.append(RowDiagnostic(line, err))
            continue
        try:
            records.append(_row_to_record(row, schema, domain_id))
        except (ValueError, json.JSONDecodeError) as exc:
            diagnostics.append(RowDiagnostic(line, str(exc)))
    return ParseResult(records=records, diagnostics=diagnostics)


def _sort_key(record: UserRecord):
    return (record.dataset_id, record.user_id)


def dedupe(records: Iterable[UserRecord]) -> list:
    """Keep one record per user_id: the earliest release (ties by dataset_id).

    Raises LabelConflictError when duplicates disagree on the class label;
    output is sorted by (dataset_id, user_id) and the operation is idempotent.
    """
    by_user: dict = {}
    for record in records:
        prev = by_user.get(record.user_id)
        if prev is None:
            by_user[record.user_id] = record
            continue
        if prev.label != record.label:
            raise LabelConflictError(
                f"user {record.user_id!r}: conflicting labels in "
                f"{prev.dataset_id} and {record.dataset_id}"
            )
        if (record.release_year, record.dataset_id) < (prev.release_year, prev.dataset_id):
            by_user[record.user_id] = record
    return sorted(by_user.values(), key=_sort_key)


def balance(records: list, seed: int, slack: int = 2) -> list:
    """Downsample bots to at most (number of humans + slack), seeded.

    All humans are retained.  Removals are apportioned across datasets
    proportionally to each dataset's bot surplus (largest-remainder rounding)
    and drawn uniformly without replacement inside each dataset.
    """
    humans = [r for r in records if r.label == HUMAN]
    bots = [r for r in records if r.label == BOT]
    if not humans:
        raise BalanceError("cannot balance: no majority target")

    target = min(len(bots), len(humans) + slack)
    removals = len(bots) - target
    if removals <= 0:
        return list(records)

    per_dataset_bots: dict = {}
    per_dataset_humans: dict = {}
    for r in bots:
        per_dataset_bots.setdefault(r.dataset_id, []).append(r)
    for r in humans:
        per_dataset_humans[r.dataset_id] = per_dataset_humans.get(r.dataset_id, 0) + 1

    datasets = sorted(per_dataset_bots)
    surplus = {
        d: max(0, len(per_dataset_bots[d]) - per_dataset_humans.get(d, 0))
        for d in datasets
    }
    total_surplus = sum(surplus.values())

    # Largest-remainder apportionment of removals over surplus, capped at the
    # dataset's bot count.
    quotas = {d: removals * surplus[d] / total_surplus for d in datasets}
    alloc = {d: min(int(quotas[d]), len(per_dataset_bots[d])) for d in datasets}
    while sum(alloc.values()) < removals:
        candidates = [d for d in datasets if alloc[d] < len(per_dataset_bots[d])]
        candidates.sort(key=lambda d: (-(quotas[d] - alloc[d]), d))
        alloc[candidates[0]] += 1

    rng = np.random.default_rng(seed)
    removed = set()
    for d in datasets:
        pool = per_dataset_bots[d]
        if alloc[d] == 0:
            continue
        picked = rng.choice(len(pool), size=alloc[d], replace=False)
        removed.update(id(pool[i]) for i in picked)

    return [r for r in records if id(r) not in removed]


def record_to_dict(record: UserRecord) -> dict:
    doc = asdict(record)
    doc["relations"] = [list(pair) for pair in record.relations]
    return doc


def record_from_dict(doc: dict) -> UserRecord:
    return UserRecord(
        user_id=doc["user_id"],
        dataset_id=doc["dataset_id"],
        release_year=int(doc["release_year"]),
        label=int(doc["label"]),
        domain_id=None if doc.get("domain_id") is None else int(doc["domain_id"]),
        profile=dict(doc.get("profile", {})),
        posts=[str(p) for p in doc.get("posts", [])],
        relations=[(str(a), str(b)) for a, b in doc.get("relations", [])],
    )


def write_records(records: Iterable[UserRecord], path) -> int:
    """Serialize records as JSON-lines (one record per line, UTF-8)."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), ensure_ascii=False))
            fh.write("\n")
            n += 1
    return n


def read_records(path) -> list:
    records = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(record_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"{path}: malformed record at line {i}: {exc}") from exc
    return records


def corpus_counts(records: Iterable[UserRecord]) -> dict:
    """Per-dataset / per-domain / per-class tallies for run manifests."""
    counts = {"total": 0, "humans": 0, "bots": 0, "by_dataset": {}, "by_domain": {}}
    for r in records:
        counts["total"] += 1
        counts["humans" if r.label == HUMAN else "bots"] += 1
        counts["by_dataset"][r.dataset_id] = counts["by_dataset"].get(r.dataset_id, 0) + 1
        key = "none" if r.domain_id is None else str(r.domain_id)
        counts["by_domain"][key] = counts["by_domain"].get(key, 0) + 1
    return counts


def log_diagnostics(result: ParseResult, dataset_id: str, stream=None) -> None:
    stream = stream or sys.stderr
    for diag in result.diagnostics:
        payload = {"event": "row_skipped", "dataset": dataset_id, "line": diag.line, "reason": diag.message}
        stream.write(json.dumps(payload, ensure_ascii=False) + "\n")
