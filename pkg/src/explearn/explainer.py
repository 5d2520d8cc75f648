"""Model-agnostic local explanations: sample perturbations of one instance in
the interpretable space, weight them by proximity, and fit a sparse linear
surrogate to the model's scores.

The regression target is the model's score for the predicted class on each
perturbed instance.  Support selection is forward stepwise on the
proximity-weighted residual sum of squares; stability comes from repeating
the whole procedure and keeping the components selected most often.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Explanation, Instance
from .seeding import rng_for


@dataclass(frozen=True)
class LimeConfig:
    samples: int = 5000
    flip_prob: float = 0.5
    kernel_width: float = 0.25
    k: int = 4
    stability_runs: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.samples < 100:
            raise ValueError("need at least 100 perturbation samples")
        if not 0.0 < self.flip_prob < 1.0:
            raise ValueError("flip probability must lie in (0, 1)")
        if self.kernel_width <= 0:
            raise ValueError("kernel width must be positive")
        if self.k < 1:
            raise ValueError("sparsity budget k must be >= 1")
        if self.stability_runs < 1:
            raise ValueError("need at least one stability run")


@dataclass(frozen=True)
class PerturbationSample:
    z: np.ndarray            # binary interpretable sample
    mapped: Instance         # z mapped back to a raw instance
    target_score: float      # model score for the explained class
    proximity: float


def proximity_kernel(dist_normalized: np.ndarray, width: float) -> np.ndarray:
    """exp(-(normalized Hamming distance)^2 / width^2); 1 at zero distance."""
    return np.exp(-(dist_normalized ** 2) / width ** 2)


def _draw_neighborhood(x: Instance, n: int, flip_prob: float, width: float,
                       rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Z, absent, proximity): each present component flips off independently."""
    d = x.d
    present = x.interp.astype(bool)
    flips = np.zeros((n, d), dtype=bool)
    flips[:, present] = rng.random((n, int(present.sum()))) < flip_prob
    Z = np.tile(x.interp, (n, 1))
    Z[flips] = 0
    dist = flips.sum(axis=1) / d
    return Z, flips, proximity_kernel(dist, width)


def _target_scores(task, model, x: Instance, target_label: int,
                   absent: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    feats = task.batch_model_features_without(x, absent, rng=rng)
    return model.scores(feats)[:, target_label]


def sample_neighborhood(task, model, x: Instance, target_label: int,
                        config: LimeConfig, seed: Optional[int] = None
                        ) -> list[PerturbationSample]:
    """Materialized perturbation samples; target scores come from the same
    batched component-clearing path the surrogate fit uses."""
    rng = rng_for(config.seed if seed is None else seed, "lime-sample")
    Z, absent, pi = _draw_neighborhood(x, config.samples, config.flip_prob,
                                       config.kernel_width, rng)
    targets = _target_scores(task, model, x, target_label, absent, rng)
    out = []
    for i in range(config.samples):
        mapped = task.without_components(x, np.flatnonzero(absent[i]))
        out.append(PerturbationSample(z=Z[i], mapped=mapped,
                                      target_score=float(targets[i]),
                                      proximity=float(pi[i])))
    return out


def _count_distinct_rows(Z: np.ndarray, need: int) -> bool:
    seen: set[bytes] = set()
    for row in Z:
        seen.add(row.tobytes())
        if len(seen) >= need:
            return True
    return False


@dataclass
class SurrogateFit:
    support: tuple[int, ...]
    weights: np.ndarray
    intercept: float
    weighted_rss: float
    degenerate: bool = False


def _forward_selection(Z: np.ndarray, y: np.ndarray, pi: np.ndarray, k: int,
                       rng: np.random.Generator) -> SurrogateFit:
    """Greedy support selection on the proximity-weighted RSS, then a weighted
    least-squares refit on the selected support.

    Exact ties between candidates are broken uniformly at random (seeded), so
    a flat target yields chance-level supports rather than a fixed prefix.
    Constant columns can never reduce the RSS and are excluded up front, which
    keeps the weighted Gram small.
    """
    n, d = Z.shape
    varying = np.flatnonzero(Z.min(axis=0) != Z.max(axis=0))
    A = np.column_stack([np.ones(n), Z[:, varying].astype(np.float64)])
    G = A.T @ (A * pi[:, None])   # (v+1, v+1) weighted Gram, v = #varying
    r = A.T @ (pi * y)
    yy = float(pi @ (y * y))
    selected: list[int] = []      # positions into `varying`
    degenerate = False
    for _ in range(min(k, len(varying))):
        best_pos = -1
        best_rss = np.inf
        for pos in rng.permutation(len(varying)):
            if pos in selected:
                continue
            cols = [0] + [s + 1 for s in selected] + [pos + 1]
            Gs = G[np.ix_(cols, cols)]
            try:
                if np.linalg.cond(Gs) > 1e12:
                    continue
                beta = np.linalg.solve(Gs, r[cols])
            except np.linalg.LinAlgError:
                continue
            rss = yy - float(beta @ r[cols])
            if rss < best_rss:
                best_rss = rss
                best_pos = int(pos)
        if best_pos < 0:
            degenerate = True  # no candidate keeps the design well conditioned
            break
        selected.append(best_pos)
    support = tuple(sorted(int(varying[pos]) for pos in selected))
    cols = [0] + [pos + 1 for pos in sorted(selected)]
    Gs = G[np.ix_(cols, cols)]
    beta = np.linalg.solve(Gs, r[cols])
    rss = yy - float(beta @ r[cols])
    return SurrogateFit(support=support, weights=beta[1:], intercept=float(beta[0]),
                        weighted_rss=max(rss, 0.0), degenerate=degenerate)


def fit_sparse_surrogate(samples: Sequence[PerturbationSample] | tuple, k: int,
                         seed: int = 0) -> SurrogateFit:
    """Sparse weighted least squares over perturbation samples.

    Accepts either materialized samples or a (Z, targets, proximity) triple.
    """
    if isinstance(samples, tuple) and len(samples) == 3 and isinstance(samples[0], np.ndarray):
        Z, y, pi = samples
    else:
        Z = np.stack([s.z for s in samples])
        y = np.array([s.target_score for s in samples])
        pi = np.array([s.proximity for s in samples])
    if not _count_distinct_rows(Z, k + 1):
        raise ValueError(f"need at least k+1={k + 1} distinct samples")
    rng = rng_for(seed, "lime-ties")
    return _forward_selection(Z, np.asarray(y, dtype=np.float64),
                              np.asarray(pi, dtype=np.float64), k, rng)


def _wls_on_support(Z: np.ndarray, y: np.ndarray, pi: np.ndarray,
                    support: Sequence[int]) -> tuple[np.ndarray, float, bool]:
    n = Z.shape[0]
    A = np.column_stack([np.ones(n)] + [Z[:, j].astype(np.float64) for j in support])
    Aw = A * pi[:, None]
    G = A.T @ Aw
    r = A.T @ (pi * y)
    degenerate = False
    if np.linalg.cond(G) > 1e12:
        degenerate = True
        beta, *_ = np.linalg.lstsq(G, r, rcond=None)
    else:
        beta = np.linalg.solve(G, r)
    return beta[1:], float(beta[0]), degenerate


def explain(task, model, x: Instance, target_label: int, config: LimeConfig,
            k: Optional[int] = None, seed: Optional[int] = None) -> Explanation:
    """Stabilized explanation: repeat sample+fit, vote on supports, keep the k
    components selected most often (ties by larger mean |weight|), then refit
    the weights on a fresh sample set."""
    k = config.k if k is None else int(k)
    k = min(k, x.d)
    base_seed = config.seed if seed is None else seed
    votes = np.zeros(x.d, dtype=np.int64)
    abs_w_sum = np.zeros(x.d)
    degenerate = False
    for run in range(config.stability_runs):
        rng = rng_for(base_seed, "lime-run", run)
        Z, absent, pi = _draw_neighborhood(x, config.samples, config.flip_prob,
                                           config.kernel_width, rng)
        y = _target_scores(task, model, x, target_label, absent, rng)
        fit = _forward_selection(Z, y, pi, k, rng)
        degenerate = degenerate or fit.degenerate
        for j, w in zip(fit.support, fit.weights):
            votes[j] += 1
            abs_w_sum[j] += abs(w)
    voted = np.flatnonzero(votes)
    mean_abs = np.zeros(x.d)
    mean_abs[voted] = abs_w_sum[voted] / votes[voted]
    ranked = sorted(voted, key=lambda j: (-votes[j], -mean_abs[j], j))
    support = tuple(sorted(ranked[:k]))
    if not support:
        return Explanation(components=(), intercept=0.0, k=max(k, 1),
                           target_label=target_label, degenerate_support=True)
    rng = rng_for(base_seed, "lime-final")
    Z, absent, pi = _draw_neighborhood(x, config.samples, config.flip_prob,
                                       config.kernel_width, rng)
    y = _target_scores(task, model, x, target_label, absent, rng)
    weights, intercept, deg_final = _wls_on_support(Z, y, pi, support)
    components = tuple((int(j), float(w)) for j, w in zip(support, weights) if w != 0.0)
    return Explanation(components=components, intercept=intercept, k=max(k, 1),
                       target_label=target_label,
                       degenerate_support=degenerate or deg_final)
