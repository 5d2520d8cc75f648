"""Trainable classifiers behind black-box fit/predict/score contracts, plus
active query selection and least-squares weight decomposition.

Linear models are trained by minibatch subgradient descent with iterate
averaging (L2) or a proximal shrinkage step (L1); the returned parameters are
the best-objective iterate seen within the epoch budget.  The MLP is a single
rectified hidden layer with a softmax head trained by minibatch SGD.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .core import Example, Instance
from .seeding import rng_for

HINGE = "hinge"
LOGISTIC = "logistic"
L1 = "l1"
L2 = "l2"

CLOSEST_TO_MARGIN = "closest-to-margin"
LEAST_CONFIDENT = "least-confident"
RANDOM = "random"
QUERY_STRATEGIES = (CLOSEST_TO_MARGIN, LEAST_CONFIDENT, RANDOM)


class PoolExhausted(Exception):
    """Query selection on an empty pool; the budget should end."""


@dataclass(frozen=True)
class LinearFitConfig:
    loss: str = HINGE
    regularizer: str = L2
    lam: float = 0.01
    step: float = 0.5
    batch_size: int = 32
    max_epochs: int = 300
    tol: float = 1e-4       # relative objective change that counts as converged
    patience: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.loss not in (HINGE, LOGISTIC):
            raise ValueError(f"unknown loss: {self.loss!r}")
        if self.regularizer not in (L1, L2):
            raise ValueError(f"unknown regularizer: {self.regularizer!r}")
        if self.lam <= 0:
            raise ValueError("lam must be positive")


@dataclass(frozen=True)
class MlpFitConfig:
    hidden: int = 64
    step: float = 0.1
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0


def _soft_threshold(w: np.ndarray, thr: float) -> np.ndarray:
    return np.sign(w) * np.maximum(np.abs(w) - thr, 0.0)


def _binary_objective(X: np.ndarray, y: np.ndarray, w: np.ndarray, b: float,
                      cfg: LinearFitConfig) -> float:
    margins = y * (X @ w + b)
    if cfg.loss == HINGE:
        loss = np.maximum(0.0, 1.0 - margins).mean()
    else:
        loss = np.logaddexp(0.0, -margins).mean()
    if cfg.regularizer == L2:
        reg = 0.5 * cfg.lam * float(w @ w)
    else:
        reg = cfg.lam * (float(np.abs(w).sum()) + abs(b))
    return float(loss + reg)


def _binary_sgd(X: np.ndarray, y: np.ndarray, cfg: LinearFitConfig,
                rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Minibatch subgradient descent on hinge/logistic + L1/L2.

    Keeps a step-weighted running average (L2) or the raw iterate (L1, so
    shrinkage zeros survive) and returns whichever epoch-end candidate
    achieved the lowest full objective.
    """
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    avg_w = np.zeros(d)
    avg_b = 0.0
    t = 0
    best_obj = np.inf
    best = (w.copy(), b)
    stale = 0
    batch = min(cfg.batch_size, n)
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            t += 1
            idx = order[start:start + batch]
            eta = cfg.step / (1.0 + cfg.lam * cfg.step * t)
            Xb, yb = X[idx], y[idx]
            m = yb * (Xb @ w + b)
            if cfg.loss == HINGE:
                viol = m < 1.0
                coef = -yb * viol
            else:
                coef = -yb / (1.0 + np.exp(m))
            g_w = coef @ Xb / len(idx)
            g_b = float(coef.sum() / len(idx))
            if cfg.regularizer == L2:
                w *= 1.0 - eta * cfg.lam
                w -= eta * g_w
                b -= eta * g_b
            else:
                # the intercept is shrunk like any weight: sparsity pressure
                # must also apply to threshold shifts
                w = _soft_threshold(w - eta * g_w, eta * cfg.lam)
                b = float(_soft_threshold(np.array([b - eta * g_b]), eta * cfg.lam)[0])
            # weight-proportional-to-t averaging
            rho = 2.0 / (t + 1.0)
            avg_w += rho * (w - avg_w)
            avg_b += rho * (b - avg_b)
        candidates = [(w, b)]
        if cfg.regularizer == L2:
            candidates.append((avg_w, avg_b))
        prev_best = best_obj
        for cw, cb in candidates:
            obj = _binary_objective(X, y, cw, cb, cfg)
            if obj < best_obj:
                best_obj = obj
                best = (cw.copy(), float(cb))
        if prev_best - best_obj < cfg.tol * max(1.0, abs(prev_best)):
            stale += 1
            if stale >= cfg.patience:
                break
        else:
            stale = 0
    return best


@dataclass
class LinearModel:
    """One-vs-rest linear classifiers; a single weight vector when binary."""

    weights: np.ndarray          # (n_classifiers, d)
    biases: np.ndarray           # (n_classifiers,)
    classes: tuple[int, ...]
    n_classes: int
    config: LinearFitConfig
    degenerate_label: Optional[int] = None

    @property
    def degenerate(self) -> bool:
        return self.degenerate_label is not None

    @property
    def binary(self) -> bool:
        return self.n_classes == 2

    def margins(self, X: np.ndarray) -> np.ndarray:
        """Signed margins, shape (n,) when binary else (n, n_classes)."""
        X = np.atleast_2d(X)
        if self.degenerate:
            sign = 1.0 if self.degenerate_label == 1 else -1.0
            if self.binary:
                return np.full(X.shape[0], sign)
            out = np.full((X.shape[0], self.n_classes), -1.0)
            out[:, self.degenerate_label] = 1.0
            return out
        if X.shape[1] != self.weights.shape[1]:
            raise ValueError(
                f"feature dimension mismatch: got {X.shape[1]}, model has {self.weights.shape[1]}")
        raw = X @ self.weights.T + self.biases
        return raw[:, 0] if self.binary else raw

    def scores(self, X: np.ndarray) -> np.ndarray:
        """Per-class margin vectors (hinge) or a distribution (logistic)."""
        m = self.margins(X)
        if self.binary:
            m = np.column_stack([-m, m])
        if self.config.loss == LOGISTIC:
            if self.binary:
                p = 1.0 / (1.0 + np.exp(-m[:, 1]))
                return np.column_stack([1.0 - p, p])
            p = 1.0 / (1.0 + np.exp(-m))
            return p / p.sum(axis=1, keepdims=True)
        return m

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.degenerate:
            return np.full(np.atleast_2d(X).shape[0], self.degenerate_label, dtype=np.int64)
        return np.argmax(self.scores(X), axis=1)

    def predict_one(self, phi: np.ndarray) -> int:
        return int(self.predict(phi[None, :])[0])

    def score_one(self, phi: np.ndarray) -> np.ndarray:
        return self.scores(phi[None, :])[0]

    @property
    def w(self) -> np.ndarray:
        """Binary weight vector (positive-class hyperplane)."""
        if not self.binary:
            raise ValueError("w is defined for binary models only")
        return self.weights[0]

    @property
    def bias(self) -> float:
        if not self.binary:
            raise ValueError("bias is defined for binary models only")
        return float(self.biases[0])

    def to_dict(self) -> dict:
        return {
            "kind": "linear",
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
            "classes": list(self.classes),
            "n_classes": self.n_classes,
            "config": {
                "loss": self.config.loss, "regularizer": self.config.regularizer,
                "lam": self.config.lam, "step": self.config.step,
                "batch_size": self.config.batch_size, "max_epochs": self.config.max_epochs,
                "tol": self.config.tol, "patience": self.config.patience,
                "seed": self.config.seed,
            },
            "degenerate_label": self.degenerate_label,
        }

    @staticmethod
    def from_dict(d: dict) -> "LinearModel":
        return LinearModel(
            weights=np.asarray(d["weights"], dtype=np.float64),
            biases=np.asarray(d["biases"], dtype=np.float64),
            classes=tuple(d["classes"]),
            n_classes=int(d["n_classes"]),
            config=LinearFitConfig(**d["config"]),
            degenerate_label=d.get("degenerate_label"),
        )


def fit_linear(X: np.ndarray, y: np.ndarray, cfg: LinearFitConfig,
               n_classes: int = 2) -> LinearModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("cannot fit on an empty labeled set")
    present = tuple(sorted(set(int(c) for c in y)))
    if len(present) == 1:
        return LinearModel(weights=np.zeros((1, X.shape[1])), biases=np.zeros(1),
                           classes=present, n_classes=n_classes, config=cfg,
                           degenerate_label=present[0])
    rng = rng_for(cfg.seed, "linear-fit")
    if n_classes == 2:
        w, b = _binary_sgd(X, np.where(y == 1, 1.0, -1.0), cfg, rng)
        return LinearModel(weights=w[None, :], biases=np.array([b]),
                           classes=(0, 1), n_classes=2, config=cfg)
    weights = np.zeros((n_classes, X.shape[1]))
    biases = np.zeros(n_classes)
    for c in range(n_classes):
        w, b = _binary_sgd(X, np.where(y == c, 1.0, -1.0), cfg, rng)
        weights[c] = w
        biases[c] = b
    return LinearModel(weights=weights, biases=biases, classes=tuple(range(n_classes)),
                       n_classes=n_classes, config=cfg)


@dataclass
class MlpModel:
    """One rectified hidden layer with a softmax output head."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    n_classes: int
    config: MlpFitConfig
    degenerate_label: Optional[int] = None

    @property
    def degenerate(self) -> bool:
        return self.degenerate_label is not None

    def _logits(self, X: np.ndarray) -> np.ndarray:
        hidden = np.maximum(0.0, X @ self.W1 + self.b1)
        return hidden @ self.W2 + self.b2

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.degenerate:
            out = np.zeros((X.shape[0], self.n_classes))
            out[:, self.degenerate_label] = 1.0
            return out
        z = self._logits(X)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def margins(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.degenerate:
            out = np.full((X.shape[0], self.n_classes), -1.0)
            out[:, self.degenerate_label] = 1.0
            return out
        return self._logits(X)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.scores(X), axis=1)

    def predict_one(self, phi: np.ndarray) -> int:
        return int(self.predict(phi[None, :])[0])

    def score_one(self, phi: np.ndarray) -> np.ndarray:
        return self.scores(phi[None, :])[0]

    def to_dict(self) -> dict:
        return {
            "kind": "mlp",
            "W1": self.W1.tolist(), "b1": self.b1.tolist(),
            "W2": self.W2.tolist(), "b2": self.b2.tolist(),
            "n_classes": self.n_classes,
            "config": {
                "hidden": self.config.hidden, "step": self.config.step,
                "batch_size": self.config.batch_size, "epochs": self.config.epochs,
                "seed": self.config.seed,
            },
            "degenerate_label": self.degenerate_label,
        }

    @staticmethod
    def from_dict(d: dict) -> "MlpModel":
        return MlpModel(
            W1=np.asarray(d["W1"]), b1=np.asarray(d["b1"]),
            W2=np.asarray(d["W2"]), b2=np.asarray(d["b2"]),
            n_classes=int(d["n_classes"]), config=MlpFitConfig(**d["config"]),
            degenerate_label=d.get("degenerate_label"),
        )


def fit_mlp(X: np.ndarray, y: np.ndarray, cfg: MlpFitConfig, n_classes: int) -> MlpModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("cannot fit on an empty labeled set")
    present = sorted(set(int(c) for c in y))
    if len(present) == 1:
        h = cfg.hidden
        return MlpModel(W1=np.zeros((X.shape[1], h)), b1=np.zeros(h),
                        W2=np.zeros((h, n_classes)), b2=np.zeros(n_classes),
                        n_classes=n_classes, config=cfg, degenerate_label=present[0])
    rng = rng_for(cfg.seed, "mlp-fit")
    n, d = X.shape
    h = cfg.hidden
    W1 = rng.normal(0.0, np.sqrt(2.0 / d), size=(d, h))
    b1 = np.zeros(h)
    W2 = rng.normal(0.0, np.sqrt(2.0 / h), size=(h, n_classes))
    b2 = np.zeros(n_classes)
    onehot = np.eye(n_classes)[y]
    batch = min(cfg.batch_size, n)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            Xb, Yb = X[idx], onehot[idx]
            hid_pre = Xb @ W1 + b1
            hid = np.maximum(0.0, hid_pre)
            logits = hid @ W2 + b2
            logits -= logits.max(axis=1, keepdims=True)
            e = np.exp(logits)
            probs = e / e.sum(axis=1, keepdims=True)
            delta = (probs - Yb) / len(idx)
            gW2 = hid.T @ delta
            gb2 = delta.sum(axis=0)
            dhid = delta @ W2.T
            dhid[hid_pre <= 0.0] = 0.0
            gW1 = Xb.T @ dhid
            gb1 = dhid.sum(axis=0)
            W1 -= cfg.step * gW1
            b1 -= cfg.step * gb1
            W2 -= cfg.step * gW2
            b2 -= cfg.step * gb2
    return MlpModel(W1=W1, b1=b1, W2=W2, b2=b2, n_classes=n_classes, config=cfg)


Model = LinearModel | MlpModel


def fit(labeled: Sequence[Example], task, config) -> Model:
    """Fit the configured model on labeled examples via the task feature map."""
    if not labeled:
        raise ValueError("labeled set is empty")
    X = np.stack([task.model_features(ex.instance) for ex in labeled])
    y = np.array([ex.label for ex in labeled], dtype=np.int64)
    if isinstance(config, MlpFitConfig):
        return fit_mlp(X, y, config, n_classes=task.n_classes)
    return fit_linear(X, y, config, n_classes=task.n_classes)


def predict(model: Model, task, inst: Instance) -> int:
    return model.predict_one(task.model_features(inst))


def score(model: Model, task, inst: Instance) -> np.ndarray:
    return model.score_one(task.model_features(inst))


def select_query(model: Model, unlabeled: Sequence[Instance], strategy: str,
                 seed: int, task) -> Instance:
    """Pick the next query; ties break toward the lowest instance id."""
    if not unlabeled:
        raise PoolExhausted("unlabeled pool is empty")
    if strategy not in QUERY_STRATEGIES:
        raise ValueError(f"unknown query strategy: {strategy!r}")
    if strategy == RANDOM or model.degenerate:
        rng = rng_for(seed, "query-random")
        return unlabeled[int(rng.integers(len(unlabeled)))]
    X = np.stack([task.model_features(inst) for inst in unlabeled])
    if strategy == CLOSEST_TO_MARGIN:
        m = model.margins(X)
        crit = np.abs(m) if m.ndim == 1 else np.abs(m).min(axis=1)
    else:
        crit = model.scores(X).max(axis=1)
    best = min(range(len(unlabeled)), key=lambda i: (crit[i], unlabeled[i].id))
    return unlabeled[best]


def decompose_weights(w: np.ndarray, w0: np.ndarray, w1: np.ndarray
                      ) -> tuple[float, float, float]:
    """Least-squares projection of ``w`` onto span{w0, w1}.

    Returns the two projection coefficients and the residual norm; the
    residual is orthogonal to the basis within 1e-8.
    """
    B = np.column_stack([w0, w1])
    if B.shape[0] != np.asarray(w).shape[0]:
        raise ValueError("weight vectors must share the feature dimension")
    cond = np.linalg.cond(B)
    if cond > 1e8:
        raise ValueError(f"basis is near-collinear (condition number {cond:.3g})")
    coef, *_ = np.linalg.lstsq(B, np.asarray(w, dtype=np.float64), rcond=None)
    residual = w - B @ coef
    return float(coef[0]), float(coef[1]), float(np.linalg.norm(residual))
