"""Latent network, loss functions, and hand-derived gradients.

The model maps an encoded vector through a two-layer rectifier MLP into a
latent space shared by three heads: a linear class head, a linear domain
head behind a gradient reversal, and a normalized linear projection for the
cross-domain contrastive objective.  All forward/backward passes are written
out explicitly in numpy; the gradcheck module verifies every gradient
against central finite differences.

Gradient reversal convention: the reversal is the identity in the forward
pass and multiplies the gradient flowing from the domain head into the
encoder by ``-grl_lambda``.  The implementation applies that factor to the
finished encoder-parameter gradients (mathematically identical by linearity
of backpropagation), which makes the reversal bitwise-equal to manually
negating and scaling the plain encoder gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateProjectionError

DEFAULT_HIDDEN = 512
DEFAULT_LATENT = 256
DEFAULT_PROJ = 128
DEFAULT_DOMAINS = 3
N_CLASSES = 2

ENCODER_PARAMS = ("enc_w1", "enc_b1", "enc_w2", "enc_b2")
DOMAIN_PARAMS = ("dom_w", "dom_b")
PROJECTION_PARAMS = ("proj_w", "proj_b")
CLASSIFIER_PARAMS = ("cls_w", "cls_b")


@dataclass
class ModelState:
    """All trainable matrices plus the shape metadata to rebuild them."""

    params: dict
    input_dim: int
    hidden_dim: int
    latent_dim: int
    proj_dim: int
    n_domains: int
    n_classes: int = N_CLASSES
    dtype: str = "float64"

    def copy(self) -> "ModelState":
        return ModelState(
            params={k: v.copy() for k, v in self.params.items()},
            input_dim=self.input_dim,
            hidden_dim=self.hidden_dim,
            latent_dim=self.latent_dim,
            proj_dim=self.proj_dim,
            n_domains=self.n_domains,
            n_classes=self.n_classes,
            dtype=self.dtype,
        )

    def finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.params.values())


def init_state(
    input_dim: int,
    hidden_dim: int = DEFAULT_HIDDEN,
    latent_dim: int = DEFAULT_LATENT,
    proj_dim: int = DEFAULT_PROJ,
    n_domains: int = DEFAULT_DOMAINS,
    n_classes: int = N_CLASSES,
    seed: int = 0,
    dtype: str = "float64",
) -> ModelState:
    rng = np.random.default_rng(seed)
    dt = np.dtype(dtype)

    def dense(n_in, n_out, scale):
        return (rng.standard_normal((n_in, n_out)) * scale).astype(dt)

    params = {
        "enc_w1": dense(input_dim, hidden_dim, np.sqrt(2.0 / input_dim)),
        "enc_b1": np.zeros(hidden_dim, dtype=dt),
        "enc_w2": dense(hidden_dim, latent_dim, np.sqrt(2.0 / hidden_dim)),
        "enc_b2": np.zeros(latent_dim, dtype=dt),
        "dom_w": dense(latent_dim, n_domains, np.sqrt(1.0 / latent_dim)),
        "dom_b": np.zeros(n_domains, dtype=dt),
        "proj_w": dense(latent_dim, proj_dim, np.sqrt(1.0 / latent_dim)),
        "proj_b": np.zeros(proj_dim, dtype=dt),
        "cls_w": dense(latent_dim, n_classes, np.sqrt(1.0 / latent_dim)),
        "cls_b": np.zeros(n_classes, dtype=dt),
    }
    return ModelState(
        params=params,
        input_dim=input_dim,
        hidden_dim=hidden_dim,
        latent_dim=latent_dim,
        proj_dim=proj_dim,
        n_domains=n_domains,
        n_classes=n_classes,
        dtype=dtype,
    )


def zero_grads(state: ModelState) -> dict:
    return {k: np.zeros_like(v) for k, v in state.params.items()}


# ---------------------------------------------------------------------------
# Gradient reversal
# ---------------------------------------------------------------------------

def grl_forward(h: np.ndarray) -> np.ndarray:
    """Identity in the forward pass."""
    return h


def grl_backward(upstream: np.ndarray, grl_lambda: float) -> np.ndarray:
    """Reverse and scale the upstream gradient."""
    if grl_lambda < 0:
        raise ValueError("grl_lambda must be >= 0")
    return -grl_lambda * upstream


def grl_schedule(progress: float, grl_lambda_max: float = 1.0) -> float:
    """Linear ramp of the reversal coefficient over training progress."""
    if not 0.0 <= progress <= 1.0:
        raise ValueError(f"progress must be in [0, 1], got {progress}")
    return grl_lambda_max * progress


# ---------------------------------------------------------------------------
# Shared forward pieces
# ---------------------------------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def latent_forward(state: ModelState, X: np.ndarray):
    """h = W2 relu(W1 x + b1) + b2; returns latent batch and backward cache."""
    p = state.params
    a1 = X @ p["enc_w1"] + p["enc_b1"]
    h1 = np.maximum(a1, 0)
    H = h1 @ p["enc_w2"] + p["enc_b2"]
    return H, (X, a1, h1)


def latent_backward(state: ModelState, cache, dH: np.ndarray) -> dict:
    X, a1, h1 = cache
    p = state.params
    d_h1 = dH @ p["enc_w2"].T
    d_a1 = d_h1 * (a1 > 0)
    return {
        "enc_w1": X.T @ d_a1,
        "enc_b1": d_a1.sum(axis=0),
        "enc_w2": h1.T @ dH,
        "enc_b2": dH.sum(axis=0),
    }


def _softmax_ce(logits: np.ndarray, targets: np.ndarray):
    """Mean cross-entropy and its gradient w.r.t. the logits.

    A vanishing true-class probability yields an infinite value; the trainer
    traps non-finite losses, so no epsilon is folded in here.
    """
    n = logits.shape[0]
    probs = softmax(logits)
    eps_free = probs[np.arange(n), targets]
    with np.errstate(divide="ignore"):
        value = float(-np.mean(np.log(eps_free)))
    dlogits = probs.copy()
    dlogits[np.arange(n), targets] -= 1.0
    dlogits /= n
    return value, dlogits


# ---------------------------------------------------------------------------
# Classification loss
# ---------------------------------------------------------------------------

def classify_logits(state: ModelState, H: np.ndarray) -> np.ndarray:
    p = state.params
    return H @ p["cls_w"] + p["cls_b"]


def loss_cls_value(state: ModelState, X: np.ndarray, y: np.ndarray) -> float:
    H, _ = latent_forward(state, X)
    value, _ = _softmax_ce(classify_logits(state, H), y)
    return value


def loss_cls(state: ModelState, X: np.ndarray, y: np.ndarray):
    """Mean cross-entropy of the class head; returns (value, grads)."""
    H, cache = latent_forward(state, X)
    value, dlogits = _softmax_ce(classify_logits(state, H), y)
    p = state.params
    grads = {
        "cls_w": H.T @ dlogits,
        "cls_b": dlogits.sum(axis=0),
    }
    dH = dlogits @ p["cls_w"].T
    grads.update(latent_backward(state, cache, dH))
    return value, grads


# ---------------------------------------------------------------------------
# Domain-adversarial loss (gradient reversal on the encoder path)
# ---------------------------------------------------------------------------

def domain_logits(state: ModelState, H: np.ndarray) -> np.ndarray:
    p = state.params
    return grl_forward(H) @ p["dom_w"] + p["dom_b"]


def loss_adv_value(state: ModelState, X: np.ndarray, domains: np.ndarray) -> float:
    _check_domains(domains, state.n_domains)
    H, _ = latent_forward(state, X)
    value, _ = _softmax_ce(domain_logits(state, H), domains)
    return value


def _check_domains(domains: np.ndarray, n_domains: int) -> None:
    domains = np.asarray(domains)
    if domains.size and ((domains < 0).any() or (domains >= n_domains).any()):
        raise ValueError(
            "adversarial batch contains records without a valid domain label"
        )


def loss_adv(state: ModelState, X: np.ndarray, domains: np.ndarray, grl_lambda: float):
    """Mean cross-entropy of the domain head with reversed encoder gradients.

    Head gradients are the plain ones; encoder gradients are the plain
    encoder gradients scaled by ``-grl_lambda`` as the final step.
    """
    _check_domains(domains, state.n_domains)
    H, cache = latent_forward(state, X)
    value, dlogits = _softmax_ce(domain_logits(state, H), domains)
    p = state.params
    grads = {
        "dom_w": H.T @ dlogits,
        "dom_b": dlogits.sum(axis=0),
    }
    dH = dlogits @ p["dom_w"].T
    enc_grads = latent_backward(state, cache, dH)
    for name, g in enc_grads.items():
        grads[name] = grl_backward(g, grl_lambda)
    return value, grads


# ---------------------------------------------------------------------------
# Cross-domain contrastive loss
# ---------------------------------------------------------------------------

def contrastive_sets(y: np.ndarray, domains: np.ndarray):
    """Positive/negative candidate masks and the anchor index set.

    Positives share the anchor's class but come from a different domain;
    negatives have the other class; anchors need at least one positive.
    """
    y = np.asarray(y)
    d = np.asarray(domains)
    same_class = y[:, None] == y[None, :]
    diff_domain = d[:, None] != d[None, :]
    not_self = ~np.eye(len(y), dtype=bool)
    pos = same_class & diff_domain & not_self
    neg = ~same_class
    anchors = np.flatnonzero(pos.any(axis=1))
    return pos, neg, anchors


def contrastive_index_sets(y, domains):
    """Same sets as explicit python collections (used by tests and oracles)."""
    pos, neg, anchors = contrastive_sets(np.asarray(y), np.asarray(domains))
    n = len(np.asarray(y))
    return (
        [set(np.flatnonzero(pos[i])) for i in range(n)],
        [set(np.flatnonzero(neg[i])) for i in range(n)],
        set(anchors.tolist()),
    )


def project_unit(state: ModelState, H: np.ndarray):
    """u = g(h)/||g(h)||; raises on a zero-norm projection."""
    p = state.params
    G = H @ p["proj_w"] + p["proj_b"]
    norms = np.linalg.norm(G, axis=1)
    if (norms == 0).any():
        raise DegenerateProjectionError("degenerate projection: zero-norm row")
    U = G / norms[:, None]
    return U, G, norms


def loss_con_value(state: ModelState, X: np.ndarray, y: np.ndarray, domains: np.ndarray, tau: float) -> float:
    value, _ = _con_terms(state, X, y, domains, tau, want_grads=False)
    return value


def _con_terms(state, X, y, domains, tau, want_grads=True):
    if tau <= 0:
        raise ValueError("tau must be > 0")
    H, cache = latent_forward(state, X)
    pos, neg, anchors = contrastive_sets(y, domains)
    dt = H.dtype
    if anchors.size == 0:
        return 0.0, zero_grads(state) if want_grads else None

    U, G, norms = project_unit(state, H)
    S = (U @ U.T) / tau
    cand = pos | neg

    n = len(y)
    dS = np.zeros_like(S)
    total = 0.0
    for i in anchors:
        c = cand[i]
        row = S[i, c]
        m = row.max()
        w = np.exp(row - m)
        z = w.sum()
        lse = m + np.log(z)
        p_idx = pos[i]
        n_pos = int(p_idx.sum())
        total += lse - S[i, p_idx].sum() / n_pos
        if want_grads:
            q = np.zeros(n, dtype=dt)
            q[c] = w / z
            q[p_idx] -= 1.0 / n_pos
            dS[i] = q / anchors.size
    value = float(total / anchors.size)
    if not want_grads:
        return value, None

    dU = ((dS + dS.T) @ U) / tau
    # back through row normalization: dg = (du - (du.u) u) / ||g||
    inner = (dU * U).sum(axis=1, keepdims=True)
    dG = (dU - inner * U) / norms[:, None]

    p = state.params
    grads = zero_grads(state)
    grads["proj_w"] = H.T @ dG
    grads["proj_b"] = dG.sum(axis=0)
    dH = dG @ p["proj_w"].T
    grads.update(latent_backward(state, cache, dH))
    return value, grads


def loss_con(state: ModelState, X: np.ndarray, y: np.ndarray, domains: np.ndarray, tau: float):
    """Cross-domain supervised contrastive loss; zero when no anchor exists."""
    value, grads = _con_terms(state, X, y, domains, tau, want_grads=True)
    if grads is None:
        grads = zero_grads(state)
    return value, grads


# ---------------------------------------------------------------------------
# Joint objective
# ---------------------------------------------------------------------------

@dataclass
class LossBreakdown:
    total: float
    cls: float
    adv: float
    con: float
    grl_lambda: float
    n_anchors: int = 0


def total_loss(
    state: ModelState,
    X: np.ndarray,
    y: np.ndarray,
    domains: Optional[np.ndarray],
    lambda_cls: float = 1.0,
    lambda_adv: float = 0.2,
    lambda_con: float = 0.2,
    grl_lambda: float = 0.0,
    tau: float = 0.1,
):
    """Weighted sum of the three objectives with summed gradients.

    Components with a zero weight are skipped entirely (so a corpus without
    domain labels trains with ``lambda_adv = lambda_con = 0``).
    """
    grads = zero_grads(state)

    v_cls, g_cls = loss_cls(state, X, y)
    for k, g in g_cls.items():
        grads[k] += lambda_cls * g

    v_adv = 0.0
    if lambda_adv != 0.0:
        v_adv, g_adv = loss_adv(state, X, domains, grl_lambda)
        for k, g in g_adv.items():
            grads[k] += lambda_adv * g

    v_con = 0.0
    n_anchors = 0
    if lambda_con != 0.0:
        _, _, anchors = contrastive_sets(y, domains)
        n_anchors = int(anchors.size)
        v_con, g_con = loss_con(state, X, y, domains, tau)
        for k, g in g_con.items():
            grads[k] += lambda_con * g

    value = lambda_cls * v_cls + lambda_adv * v_adv + lambda_con * v_con
    breakdown = LossBreakdown(
        total=float(value),
        cls=v_cls,
        adv=v_adv,
        con=v_con,
        grl_lambda=grl_lambda,
        n_anchors=n_anchors,
    )
    return breakdown, grads


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------

def predict_proba(state: ModelState, X: np.ndarray) -> np.ndarray:
    H, _ = latent_forward(state, X)
    return softmax(classify_logits(state, H))


def infer(state: ModelState, X: np.ndarray):
    """Class predictions and probabilities for encoded inputs."""
    probs = predict_proba(state, X)
    return probs.argmax(axis=1), probs
