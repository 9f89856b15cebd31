"""Central finite-difference verification of every analytic gradient.

The reversal layer makes the encoder gradient of the adversarial term the
gradient of the sign-flipped scalar, so encoder parameter groups are checked
against finite differences of that surrogate; every other group checks
against finite differences of the loss itself.  All checks run at 64-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import network
from .graph import RelationGraph, graph_loss, init_gnn_params
from .network import ENCODER_PARAMS, ModelState

EPSILON = 1e-5
TOLERANCE = 1e-4

CHECK_DIMS = dict(input_dim=12, hidden_dim=10, latent_dim=8, proj_dim=6, n_domains=3)


@dataclass
class CheckResult:
    loss: str
    group: str
    rel_error: float

    @property
    def ok(self) -> bool:
        return self.rel_error < TOLERANCE


def finite_difference(scalar_fn, params: dict, names, eps: float = EPSILON) -> dict:
    """Central differences of ``scalar_fn()`` w.r.t. the named parameter arrays."""
    grads = {}
    for name in names:
        p = params[name]
        g = np.zeros_like(p)
        flat = p.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = scalar_fn()
            flat[i] = orig - eps
            down = scalar_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * eps)
        grads[name] = g
    return grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def _group_errors(loss_name: str, analytic: dict, numeric: dict, groups: dict) -> list:
    results = []
    for group_name, param_names in groups.items():
        a = np.concatenate([analytic[n].ravel() for n in param_names])
        f = np.concatenate([numeric[n].ravel() for n in param_names])
        results.append(CheckResult(loss_name, group_name, relative_error(a, f)))
    return results


def _random_batch(rng, state: ModelState, n: int = 6, require_anchor: bool = True):
    X = rng.standard_normal((n, state.input_dim))
    while True:
        y = rng.integers(0, 2, size=n)
        d = rng.integers(0, state.n_domains, size=n)
        if len(np.unique(y)) < 2:
            continue
        if not require_anchor:
            return X, y, d
        _, _, anchors = network.contrastive_sets(y, d)
        if anchors.size:
            return X, y, d


def check_batch(seed: int, grl_lambda: float = 1.0, tau: float = 0.1,
                lambda_adv: float = 0.2, lambda_con: float = 0.2) -> list:
    """All gradient checks for one random small batch; returns CheckResults."""
    rng = np.random.default_rng(seed)
    state = network.init_state(seed=seed, dtype="float64", **CHECK_DIMS)
    X, y, d = _random_batch(rng, state)
    params = state.params

    head_groups = {
        "classifier": ("cls_w", "cls_b"),
        "domain_head": ("dom_w", "dom_b"),
        "projection": ("proj_w", "proj_b"),
        "encoder": ENCODER_PARAMS,
    }
    results = []

    # classification
    _, g = network.loss_cls(state, X, y)
    fd = finite_difference(
        lambda: network.loss_cls_value(state, X, y),
        params,
        ("cls_w", "cls_b") + ENCODER_PARAMS,
    )
    results += _group_errors(
        "loss_cls", g, fd, {"classifier": head_groups["classifier"], "encoder": ENCODER_PARAMS}
    )

    # adversarial: head vs direct FD, encoder vs -lambda * FD
    _, g = network.loss_adv(state, X, d, grl_lambda)
    fd = finite_difference(
        lambda: network.loss_adv_value(state, X, d),
        params,
        ("dom_w", "dom_b") + ENCODER_PARAMS,
    )
    results += _group_errors("loss_adv", g, fd, {"domain_head": head_groups["domain_head"]})
    flipped = {n: -grl_lambda * fd[n] for n in ENCODER_PARAMS}
    results += _group_errors("loss_adv", g, flipped, {"encoder": ENCODER_PARAMS})

    # contrastive
    _, g = network.loss_con(state, X, y, d, tau)
    fd = finite_difference(
        lambda: network.loss_con_value(state, X, y, d, tau),
        params,
        ("proj_w", "proj_b") + ENCODER_PARAMS,
    )
    results += _group_errors(
        "loss_con", g, fd, {"projection": head_groups["projection"], "encoder": ENCODER_PARAMS}
    )

    # joint objective: heads against the plain forward, encoder against the
    # surrogate with the adversarial term sign-flipped
    _, g = network.total_loss(
        state, X, y, d,
        lambda_adv=lambda_adv, lambda_con=lambda_con,
        grl_lambda=grl_lambda, tau=tau,
    )

    def total_forward():
        return (
            network.loss_cls_value(state, X, y)
            + lambda_adv * network.loss_adv_value(state, X, d)
            + lambda_con * network.loss_con_value(state, X, y, d, tau)
        )

    def encoder_surrogate():
        return (
            network.loss_cls_value(state, X, y)
            + lambda_adv * (-grl_lambda) * network.loss_adv_value(state, X, d)
            + lambda_con * network.loss_con_value(state, X, y, d, tau)
        )

    fd_heads = finite_difference(
        total_forward, params, ("cls_w", "cls_b", "dom_w", "dom_b", "proj_w", "proj_b")
    )
    results += _group_errors(
        "loss_total",
        g,
        fd_heads,
        {
            "classifier": head_groups["classifier"],
            "domain_head": head_groups["domain_head"],
            "projection": head_groups["projection"],
        },
    )
    fd_enc = finite_difference(encoder_surrogate, params, ENCODER_PARAMS)
    results += _group_errors("loss_total", g, fd_enc, {"encoder": ENCODER_PARAMS})
    return results


def check_graph_batch(seed: int, n_nodes: int = 6, dim: int = 5, n_layers: int = 2) -> list:
    """Finite-difference check of the graph loss on a random small graph."""
    rng = np.random.default_rng(seed)
    node_ids = [f"u{i}" for i in range(n_nodes)]
    features = rng.standard_normal((n_nodes, dim))
    relations = ("follows", "mentions")
    edges = []
    for _ in range(n_nodes * 2):
        s, t = rng.integers(0, n_nodes, size=2)
        if s != t:
            edges.append((int(s), relations[int(rng.integers(0, 2))], int(t)))
    graph = RelationGraph(
        node_ids=node_ids,
        features=features,
        relation_types=relations,
        edges=edges,
    )
    labels = rng.integers(0, 2, size=n_nodes)
    params = init_gnn_params(dim, relations, n_layers=n_layers, seed=seed)
    _, grads = graph_loss(graph, labels, params, n_layers=n_layers)
    fd = finite_difference(
        lambda: graph_loss(graph, labels, params, n_layers=n_layers)[0],
        params,
        tuple(params),
    )
    return _group_errors("graph_loss", grads, fd, {"all": tuple(params)})


def run_suite(n_batches: int = 20, base_seed: int = 1000, include_graph: bool = True) -> list:
    """The full verification suite over ``n_batches`` random batches."""
    results = []
    for i in range(n_batches):
        grl_lambda = (0.0, 0.5, 1.0)[i % 3]
        results += check_batch(base_seed + i, grl_lambda=grl_lambda)
    if include_graph:
        for i in range(5):
            results += check_graph_batch(base_seed + 500 + i)
    return results
