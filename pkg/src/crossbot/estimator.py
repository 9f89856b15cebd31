"""Jointly optimized domain-invariant classifier with an sklearn-style API.

``fit`` runs seeded mini-batch optimization of the weighted objective
(classification + reversed domain adversary + cross-domain contrastive),
ramping the reversal coefficient linearly over completed steps, and keeps
the parameters of the epoch with the best validation accuracy.  ``transform``
exposes the latent representations consumed by the probe and graph stages.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from . import network
from .checkpoint import load_arrays, save_arrays
from .errors import TrainingDivergedError
from .metrics import metrics
from .optim import AdamW
from .validation import check_domains, check_labels, check_matrix


class DomainInvariantClassifier(BaseEstimator, ClassifierMixin):
    """Two-layer latent encoder with class, domain, and contrastive heads.

    Parameters mirror the training configuration; ``domains`` passed to
    ``fit`` may be omitted only when both auxiliary weights are zero.
    """

    def __init__(
        self,
        hidden_dim: int = network.DEFAULT_HIDDEN,
        latent_dim: int = network.DEFAULT_LATENT,
        proj_dim: int = network.DEFAULT_PROJ,
        n_domains: int = network.DEFAULT_DOMAINS,
        lambda_cls: float = 1.0,
        lambda_adv: float = 0.2,
        lambda_con: float = 0.2,
        grl_lambda_max: float = 1.0,
        tau: float = 0.1,
        batch_size: int = 8,
        epochs: int = 5,
        learning_rate: float = 1e-4,
        weight_decay: float = 0.01,
        validation_split: float = 0.2,
        seed: int = 42,
        dtype: str = "float32",
    ):
        self.hidden_dim = hidden_dim
        self.latent_dim = latent_dim
        self.proj_dim = proj_dim
        self.n_domains = n_domains
        self.lambda_cls = lambda_cls
        self.lambda_adv = lambda_adv
        self.lambda_con = lambda_con
        self.grl_lambda_max = grl_lambda_max
        self.tau = tau
        self.batch_size = batch_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.validation_split = validation_split
        self.seed = seed
        self.dtype = dtype

    # ------------------------------------------------------------------
    def _needs_domains(self) -> bool:
        return self.lambda_adv != 0.0 or self.lambda_con != 0.0

    def fit(self, X, y, domains=None, validation=None):
        """Train on encoded vectors.

        ``validation`` may be an explicit ``(X_val, y_val)`` pair; otherwise
        a seeded ``validation_split`` fraction of the rows is held out.
        """
        if not 0.0 < self.validation_split < 1.0:
            raise ValueError("validation_split must be in (0, 1)")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")

        X = check_matrix(X, dtype=np.dtype(self.dtype))
        y = check_labels(y, X.shape[0])
        if len(np.unique(y)) < 2:
            raise ValueError("training corpus must contain both classes")
        if domains is None:
            if self._needs_domains():
                raise ValueError(
                    "domain labels are required when lambda_adv or lambda_con is nonzero"
                )
            domains = np.zeros(X.shape[0], dtype=np.int64)
        domains = check_domains(domains, X.shape[0], self.n_domains)
        if self._needs_domains() and (domains < 0).any():
            raise ValueError("training records must carry domain labels")

        rng = np.random.default_rng(self.seed)

        if validation is not None:
            X_val = check_matrix(validation[0], name="X_val", dtype=X.dtype)
            y_val = check_labels(validation[1], X_val.shape[0], name="y_val")
            X_tr, y_tr, d_tr = X, y, domains
        else:
            order = rng.permutation(X.shape[0])
            n_val = max(1, int(round(self.validation_split * X.shape[0])))
            val_idx, tr_idx = order[:n_val], order[n_val:]
            if tr_idx.size == 0:
                raise ValueError("validation split leaves no training rows")
            X_tr, y_tr, d_tr = X[tr_idx], y[tr_idx], domains[tr_idx]
            X_val, y_val = X[val_idx], y[val_idx]

        state = network.init_state(
            input_dim=X.shape[1],
            hidden_dim=self.hidden_dim,
            latent_dim=self.latent_dim,
            proj_dim=self.proj_dim,
            n_domains=self.n_domains,
            seed=self.seed,
            dtype=self.dtype,
        )
        optimizer = AdamW(
            state.params,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
        )

        n_train = X_tr.shape[0]
        steps_per_epoch = math.ceil(n_train / self.batch_size)
        total_steps = self.epochs * steps_per_epoch

        history = []
        best_acc = -1.0
        best_state = None
        best_epoch = -1
        step = 0

        for epoch in range(self.epochs):
            perm = rng.permutation(n_train)
            sums = {"cls": 0.0, "adv": 0.0, "con": 0.0, "total": 0.0}
            grl_lambda = 0.0
            for start in range(0, n_train, self.batch_size):
                idx = perm[start : start + self.batch_size]
                grl_lambda = network.grl_schedule(step / total_steps, self.grl_lambda_max)
                breakdown, grads = network.total_loss(
                    state,
                    X_tr[idx],
                    y_tr[idx],
                    d_tr[idx],
                    lambda_cls=self.lambda_cls,
                    lambda_adv=self.lambda_adv,
                    lambda_con=self.lambda_con,
                    grl_lambda=grl_lambda,
                    tau=self.tau,
                )
                if not np.isfinite(breakdown.total):
                    raise TrainingDivergedError(
                        f"non-finite loss at epoch {epoch} step {step}: "
                        f"cls={breakdown.cls} adv={breakdown.adv} con={breakdown.con}"
                    )
                optimizer.step(state.params, grads)
                if not state.finite():
                    raise TrainingDivergedError(
                        f"non-finite parameters after epoch {epoch} step {step}"
                    )
                for key, value in (
                    ("cls", breakdown.cls),
                    ("adv", breakdown.adv),
                    ("con", breakdown.con),
                    ("total", breakdown.total),
                ):
                    sums[key] += value
                step += 1

            val_pred, _ = network.infer(state, X_val)
            report = metrics(y_val, val_pred)
            history.append(
                {
                    "epoch": epoch,
                    "loss_cls": sums["cls"] / steps_per_epoch,
                    "loss_adv": sums["adv"] / steps_per_epoch,
                    "loss_con": sums["con"] / steps_per_epoch,
                    "loss_total": sums["total"] / steps_per_epoch,
                    "val_acc": report.accuracy,
                    "val_macro_f1": report.macro_f1,
                    "grl_lambda": grl_lambda,
                }
            )
            # ties keep the most recent state: the reversal coefficient ramps
            # up over training, so later states are the more domain-invariant
            if report.accuracy >= best_acc:
                best_acc = report.accuracy
                best_state = state.copy()
                best_epoch = epoch

        self.state_ = best_state if best_state is not None else state
        self.history_ = history
        self.best_epoch_ = best_epoch
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    # ------------------------------------------------------------------
    def _check_fitted(self):
        if not hasattr(self, "state_"):
            raise RuntimeError("estimator is not fitted")

    def _cast(self, X) -> np.ndarray:
        return check_matrix(X, dtype=np.dtype(self.state_.dtype))

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        return network.predict_proba(self.state_, self._cast(X))

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    def transform(self, X) -> np.ndarray:
        """Latent representations (the GNN and the domain probe consume these)."""
        self._check_fitted()
        H, _ = network.latent_forward(self.state_, self._cast(X))
        return H

    # ------------------------------------------------------------------
    def save(self, path) -> None:
        self._check_fitted()
        meta = {
            "kind": "dil-classifier",
            "config": self.get_params(),
            "seed": self.seed,
            "input_dim": self.state_.input_dim,
            "best_epoch": self.best_epoch_,
        }
        save_arrays(path, self.state_.params, meta)

    @classmethod
    def load(cls, path) -> "DomainInvariantClassifier":
        arrays, meta = load_arrays(path)
        est = cls(**meta["config"])
        est.state_ = network.ModelState(
            params=arrays,
            input_dim=meta["input_dim"],
            hidden_dim=est.hidden_dim,
            latent_dim=est.latent_dim,
            proj_dim=est.proj_dim,
            n_domains=est.n_domains,
            dtype=str(arrays["enc_w1"].dtype),
        )
        est.history_ = []
        est.best_epoch_ = meta.get("best_epoch", -1)
        est.classes_ = np.array([0, 1])
        est.n_features_in_ = meta["input_dim"]
        return est
