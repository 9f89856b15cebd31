"""Five-dimension categorical summaries of a user's posting history.

The summary vocabulary is closed and case-sensitive.  A summary is carried
around both as label lists and as one canonical sentence in a fixed grammar;
``parse_summary_sentence`` and ``render_summary`` are inverses (parse of a
render returns the same labels, render of a parse canonicalizes the text).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence

from .errors import SummaryParseError

DIMENSIONS = ("theme", "sent", "emo", "style", "func")

VOCAB = {
    "theme": (
        "Politics",
        "Business",
        "Entertainment",
        "Lifestyle",
        "Technology",
        "Cryptocurrency",
        "Sports",
        "Culture",
    ),
    "sent": ("Positive", "Neutral", "Negative", "Mixed"),
    "emo": (
        "CalmOrObjective",
        "EmotionalNonHostile",
        "HostileOrAggressive",
        "MixedOrUnclear",
    ),
    "style": ("Casual", "Formal", "MechanicalOrTemplateLike", "Aggressive"),
    "func": (
        "InformationSharing",
        "SelfPromotion",
        "OpinionsOrComplaints",
        "RandomStatementsOrThoughts",
        "MeNow",
        "QuestionsToFollowers",
        "PresenceMaintenance",
        "Anecdote",
    ),
}

DEFAULT_LABELS = {
    "theme": "Lifestyle",
    "sent": "Neutral",
    "emo": "MixedOrUnclear",
    "style": "Casual",
    "func": "RandomStatementsOrThoughts",
}

MAX_LABELS = 3

PROMPT_BUDGET = 8000


def validate_labels(dimension: str, labels: Sequence[str]) -> tuple:
    labels = tuple(labels)
    if not 1 <= len(labels) <= MAX_LABELS:
        raise SummaryParseError(
            f"{dimension}: expected 1-{MAX_LABELS} labels, got {len(labels)}",
            bracket=dimension,
        )
    if len(set(labels)) != len(labels):
        raise SummaryParseError(f"{dimension}: duplicate labels {labels}", bracket=dimension)
    for label in labels:
        if label not in VOCAB[dimension]:
            raise SummaryParseError(
                f"{dimension}: unknown label {label!r}", bracket=dimension
            )
    return labels


@dataclass(frozen=True)
class PostSummary:
    """Ordered label lists for the five dimensions plus the canonical sentence."""

    theme: tuple
    sent: tuple
    emo: tuple
    style: tuple
    func: tuple

    def __post_init__(self):
        for dim in DIMENSIONS:
            object.__setattr__(self, dim, validate_labels(dim, getattr(self, dim)))

    @property
    def sentence(self) -> str:
        return render_summary(self)

    def labels(self, dimension: str) -> tuple:
        return getattr(self, dimension)

    def to_dict(self) -> dict:
        return {dim: list(getattr(self, dim)) for dim in DIMENSIONS}

    @classmethod
    def from_dict(cls, doc: dict) -> "PostSummary":
        return cls(**{dim: tuple(doc[dim]) for dim in DIMENSIONS})


def _join_labels(labels: Sequence[str]) -> str:
    labels = list(labels)
    if len(labels) == 1:
        return labels[0]
    if len(labels) == 2:
        return f"{labels[0]} and {labels[1]}"
    return ", ".join(labels[:-1]) + f", and {labels[-1]}"


def render_summary(summary: PostSummary) -> str:
    """Canonical sentence; multi-label brackets use the prose joiner."""
    return (
        "Regarding content themes, the user's posts mainly revolve around "
        f"{_join_labels(summary.theme)}. The overall sentiment polarity is "
        f"{_join_labels(summary.sent)}, with a dominant emotional tone of "
        f"{_join_labels(summary.emo)}. The text style is {_join_labels(summary.style)}. "
        f"Functionally, the user appears to be engaged in {_join_labels(summary.func)}."
    )


_SENTENCE_RE = re.compile(
    r"Regarding content themes, the user[’']s posts mainly revolve around "
    r"(?P<theme>.+?)\. The overall sentiment (?:polarity|tendency) is "
    r"(?P<sent>.+?), with a dominant emotional tone of (?P<emo>.+?)\. "
    r"The text style is (?P<style>.+?)\. "
    r"Functionally, the user appears to be engaged in (?P<func>.+?)\."
)


def _split_labels(raw: str) -> list:
    # accepted joiners: ",", ", ", " and ", ", and " in any combination
    parts = re.split(r"\s*,\s*and\s+|\s+and\s+|\s*,\s*", raw.strip())
    return [p.strip() for p in parts if p.strip()]


def parse_summary_sentence(text: str) -> PostSummary:
    """Parse the fixed-format summary sentence into label lists.

    Tolerates surrounding whitespace, the "sentiment tendency" wording, and
    both comma-only and prose-style label joiners.  Structural mismatches
    and vocabulary violations raise ``SummaryParseError`` naming the bracket.
    """
    m = _SENTENCE_RE.fullmatch(text.strip())
    if m is None:
        raise SummaryParseError(
            "sentence does not match the summary template", bracket="structure"
        )
    labels = {dim: _split_labels(m.group(dim)) for dim in DIMENSIONS}
    return PostSummary(**{dim: tuple(labels[dim]) for dim in DIMENSIONS})


def load_prompt_template() -> str:
    return resources.files("crossbot.data").joinpath("summary_prompt.txt").read_text("utf-8")


def build_prompt(posts: Sequence[str], budget: int = PROMPT_BUDGET, template: Optional[str] = None) -> str:
    """Instantiate the summarization prompt with the user's post history.

    When the joined history exceeds ``budget`` characters, whole posts are
    dropped oldest-first; if the newest post alone exceeds the budget its
    oldest characters are cut.
    """
    if not posts:
        raise ValueError("no history to summarize")
    template = template or load_prompt_template()

    kept: list = []
    used = 0
    for post in reversed(posts):  # newest first
        cost = len(post) + (1 if kept else 0)
        if used + cost > budget:
            break
        kept.append(post)
        used += cost
    if not kept:  # newest post alone is over budget: keep its tail
        kept = [posts[-1][-budget:]]
    kept.reverse()

    return template.replace("{posts_content}", "\n".join(kept))


# ---------------------------------------------------------------------------
# Deterministic offline summarizer
# ---------------------------------------------------------------------------

_fallback_lexicons = None


def fallback_lexicons() -> dict:
    global _fallback_lexicons
    if _fallback_lexicons is None:
        text = resources.files("crossbot.data").joinpath("fallback_lexicons.json").read_text("utf-8")
        _fallback_lexicons = json.loads(text)
    return _fallback_lexicons


_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)

_TEMPLATE_PREFIX_LEN = 12


def _term_hits(text: str, terms) -> int:
    total = 0
    for term in terms:
        total += len(re.findall(r"(?<!\w)" + re.escape(term.lower()) + r"(?!\w)", text))
    return total


def _top_labels(scores: dict, vocab: Sequence[str], default: str) -> tuple:
    ranked = [
        label
        for label in sorted(scores, key=lambda l: (-scores[l], vocab.index(l)))
        if scores[label] > 0
    ]
    if not ranked:
        return (default,)
    return tuple(ranked[:MAX_LABELS])


def fallback_summarize(posts: Sequence[str], lexicons: Optional[dict] = None) -> PostSummary:
    """Keyword-and-rule stand-in for the remote summarizer.

    Pure function of (posts, lexicon tables): per dimension each label is
    scored by lexicon hits or structural rules, the positive-scoring top 3
    are kept, and a fixed default applies when nothing scores.
    """
    if not posts:
        raise ValueError("no history to summarize")
    lex = lexicons or fallback_lexicons()
    joined = "\n".join(posts).lower()
    posts_low = [p.lower() for p in posts]

    theme_scores = {label: _term_hits(joined, terms) for label, terms in lex["theme"].items()}

    pos = _term_hits(joined, lex["sent_positive"])
    neg = _term_hits(joined, lex["sent_negative"])
    sent_scores = {"Positive": pos, "Negative": neg, "Mixed": min(pos, neg), "Neutral": 0}

    hostile = _term_hits(joined, lex["emo_hostile"])
    emotional = _term_hits(joined, lex["emo_emotional"]) + joined.count("!")
    calm = _term_hits(joined, lex["emo_calm"])
    emo_scores = {
        "CalmOrObjective": calm,
        "EmotionalNonHostile": emotional,
        "HostileOrAggressive": hostile,
        "MixedOrUnclear": 0,
    }

    prefixes = [p[:_TEMPLATE_PREFIX_LEN] for p in posts_low]
    repeated = sum(1 for p in prefixes if prefixes.count(p) > 1) if len(posts) > 1 else 0
    style_scores = {
        "Casual": _term_hits(joined, lex["style_casual"]),
        "Formal": _term_hits(joined, lex["style_formal"]),
        "MechanicalOrTemplateLike": repeated,
        "Aggressive": hostile,
    }

    func_scores = {
        "InformationSharing": sum(1 for p in posts if _URL_RE.search(p)),
        "SelfPromotion": _term_hits(joined, lex["func_self_promotion"]),
        "OpinionsOrComplaints": _term_hits(joined, lex["func_opinions"]),
        "RandomStatementsOrThoughts": 0,
        "MeNow": _term_hits(joined, lex["func_me_now"]),
        "QuestionsToFollowers": sum(1 for p in posts if "?" in p),
        "PresenceMaintenance": _term_hits(joined, lex["func_presence"]),
        "Anecdote": _term_hits(joined, lex["func_anecdote"]),
    }

    return PostSummary(
        theme=_top_labels(theme_scores, VOCAB["theme"], DEFAULT_LABELS["theme"]),
        sent=_top_labels(sent_scores, VOCAB["sent"], DEFAULT_LABELS["sent"]),
        emo=_top_labels(emo_scores, VOCAB["emo"], DEFAULT_LABELS["emo"]),
        style=_top_labels(style_scores, VOCAB["style"], DEFAULT_LABELS["style"]),
        func=_top_labels(func_scores, VOCAB["func"], DEFAULT_LABELS["func"]),
    )
