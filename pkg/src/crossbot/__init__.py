"""Cross-domain social bot detection.

Unifies heterogeneous account datasets into instruction-formatted text and
learns domain-invariant, class-discriminative representations with a jointly
optimized classifier, reversed-gradient domain head, and cross-domain
contrastive head, optionally enhanced by relation-aware message passing.
"""

from .encoding import HashingTextEncoder
from .estimator import DomainInvariantClassifier
from .graph import RelationGraph, RelationGraphClassifier
from .ingest import UserRecord, assign_domain, balance, dedupe, parse_source
from .instruction import InstructionDoc, build_instruction, read_corpus, write_corpus
from .metrics import EvalReport, metrics
from .profile import ProfileRendering, derive_features, render_profile
from .summary import PostSummary, fallback_summarize, parse_summary_sentence, render_summary
from .synthetic import SyntheticSpec, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "DomainInvariantClassifier",
    "EvalReport",
    "HashingTextEncoder",
    "InstructionDoc",
    "PostSummary",
    "ProfileRendering",
    "RelationGraph",
    "RelationGraphClassifier",
    "SyntheticSpec",
    "UserRecord",
    "assign_domain",
    "balance",
    "build_instruction",
    "dedupe",
    "derive_features",
    "fallback_summarize",
    "generate_synthetic",
    "metrics",
    "parse_source",
    "parse_summary_sentence",
    "read_corpus",
    "render_profile",
    "render_summary",
    "write_corpus",
    "__version__",
]
