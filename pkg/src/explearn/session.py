"""The explanatory active-learning loop: fit, select a query, predict,
explain, collect feedback, convert corrections to counterexamples, update the
pools and refit, with a full per-iteration metric record.

The engine is a stepping state machine so the same code path serves both the
simulated annotator and live HTTP sessions; with a fixed seed every derived
random draw is reproducible and histories are byte-identical across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (QUERY_PROVENANCE, CorrectionSet, Example, Explanation,
                   Instance, Pool, explanation_f1)
from .corrections import (CounterexampleStrategy, counterexample_log_record,
                          to_counterexamples_with_sources)
from .explainer import LimeConfig, explain
from .learners import (LinearFitConfig, LinearModel, MlpFitConfig, fit,
                       select_query)
from .oracle import (RIGHT_FOR_RIGHT_REASONS, RIGHT_FOR_WRONG_REASONS,
                     WRONG_PREDICTION, SimulatedAnnotator)
from .seeding import rng_for

RUNNING = "running"
EXHAUSTED = "exhausted"
CONVERGED = "converged"


class StaleIteration(Exception):
    """Feedback carried an iteration token that is no longer current."""


@dataclass(frozen=True)
class MetricRecord:
    t: int
    query_id: int
    case: int
    predictive: float
    expl_f1_query: float
    expl_f1_cum: float
    counterexamples_added: int
    expl_f1_test: Optional[float] = None
    alpha0: Optional[float] = None
    alpha1: Optional[float] = None
    residual_norm: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "query_id": self.query_id,
            "case": self.case,
            "predictive": self.predictive,
            "expl_f1_query": self.expl_f1_query,
            "expl_f1_cum": self.expl_f1_cum,
            "counterexamples_added": self.counterexamples_added,
            "expl_f1_test": self.expl_f1_test,
            "alpha0": self.alpha0,
            "alpha1": self.alpha1,
            "residual_norm": self.residual_norm,
        }

    @staticmethod
    def from_dict(d: dict) -> "MetricRecord":
        return MetricRecord(**{k: d.get(k) for k in (
            "t", "query_id", "case", "predictive", "expl_f1_query", "expl_f1_cum",
            "counterexamples_added", "expl_f1_test", "alpha0", "alpha1",
            "residual_norm")})


@dataclass(frozen=True)
class PendingQuery:
    iteration: int
    instance: Instance
    predicted: int
    explanation: Explanation
    burn_in: bool


@dataclass
class SessionSpec:
    task: object
    train: Sequence[Example]
    test: Sequence[Example]
    learner: LinearFitConfig | MlpFitConfig
    lime: LimeConfig
    query_strategy: str = "closest-to-margin"
    counter_strategy: CounterexampleStrategy = field(default_factory=CounterexampleStrategy)
    budget: int = 100
    burn_in: int = 10
    corrections: bool = True
    test_expl_every: int = 20
    test_expl_subsample: int = 10
    seeds_per_class: int = 2
    seed: int = 0
    converge_enabled: bool = False
    converge_eps: float = 1e-3
    converge_window: int = 25


def binary_f1(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    tp = int(np.sum((y_pred == 1) & (y_true == 1)))
    fp = int(np.sum((y_pred == 1) & (y_true == 0)))
    fn = int(np.sum((y_pred == 0) & (y_true == 1)))
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


def evaluate_explanations_on_test(task, model, test: Sequence[Example],
                                  lime_cfg: LimeConfig, subsample: int,
                                  seed: int) -> Optional[float]:
    """Mean explanation F1 over a seeded fixed-size test subsample; absent
    (None) when the subsample size is zero."""
    if subsample <= 0 or not test:
        return None
    rng = rng_for(seed, "test-expl-pick")
    take = min(subsample, len(test))
    idx = rng.choice(len(test), size=take, replace=False)
    scores = []
    for rank, i in enumerate(idx):
        inst = test[int(i)].instance
        try:
            mask = task.gold_mask(inst)
        except ValueError:
            continue  # no gold-relevant components present in this instance
        phi = task.model_features(inst)
        predicted = model.predict_one(phi)
        expl = explain(task, model, inst, predicted, lime_cfg,
                       k=task.explanation_k(inst),
                       seed=int(rng_for(seed, "test-expl", rank).integers(2**32)))
        scores.append(explanation_f1(expl.component_indices(), mask))
    return float(np.mean(scores)) if scores else None


class SessionEngine:
    """Single-writer state machine over one interactive session."""

    def __init__(self, spec: SessionSpec):
        self.spec = spec
        self.task = spec.task
        rng = rng_for(spec.seed, "init-labeled")
        by_class: dict[int, list[Example]] = {}
        for ex in spec.train:
            by_class.setdefault(ex.label, []).append(ex)
        seeds: list[Example] = []
        seed_ids: set[int] = set()
        for label in sorted(by_class):
            group = by_class[label]
            order = rng.permutation(len(group))
            for i in order[: spec.seeds_per_class]:
                chosen = group[int(i)]
                seeds.append(Example(chosen.instance, chosen.label, provenance="seed"))
                seed_ids.add(chosen.instance.id)
        unlabeled = [ex.instance for ex in spec.train if ex.instance.id not in seed_ids]
        self.pool = Pool(labeled=seeds, unlabeled=unlabeled)
        self.test = list(spec.test)
        self.test_ids = frozenset(ex.instance.id for ex in self.test)
        self._phi_test = (np.stack([self.task.model_features(ex.instance) for ex in self.test])
                          if self.test else np.zeros((0, self.task.feature_dim())))
        self._y_test = np.array([ex.label for ex in self.test], dtype=np.int64)
        self.history: list[MetricRecord] = []
        self.counterexample_log: list[dict] = []
        self._pending: Optional[PendingQuery] = None
        self.model = self._fit(0)
        self.status = RUNNING if spec.budget > 0 and unlabeled else EXHAUSTED

    # -- fitting and metrics -------------------------------------------------

    def _fit(self, iteration: int):
        cfg = replace(self.spec.learner,
                      seed=int(rng_for(self.spec.seed, "fit", iteration).integers(2**32)))
        return fit(self.pool.labeled, self.task, cfg)

    def _predictive(self) -> float:
        if len(self.test) == 0:
            return 0.0
        pred = self.model.predict(self._phi_test)
        if self.task.n_classes == 2:
            return binary_f1(self._y_test, pred)
        return float(np.mean(pred == self._y_test))

    def _query_expl_f1(self, inst: Instance, expl: Explanation) -> float:
        try:
            mask = self.task.gold_mask(inst)
        except ValueError:
            return 0.0
        return explanation_f1(expl.component_indices(), mask)

    def _decomposition(self) -> tuple[Optional[float], Optional[float], Optional[float]]:
        if not (isinstance(self.model, LinearModel) and self.model.binary
                and not self.model.degenerate and hasattr(self.task, "w_star")):
            return None, None, None
        from .learners import decompose_weights
        w0, _ = self.task.w_star(0)
        w1, _ = self.task.w_star(1)
        a0, a1, res = decompose_weights(self.model.w, w0, w1)
        return a0, a1, res

    # -- stepping ----------------------------------------------------------------

    @property
    def t(self) -> int:
        return len(self.history)

    @property
    def done(self) -> bool:
        return self.status != RUNNING

    def current_query(self) -> Optional[PendingQuery]:
        """The query awaiting feedback; idempotent until feedback arrives."""
        if self.done:
            return None
        if self._pending is not None:
            return self._pending
        iteration = self.t + 1
        inst = select_query(self.model, self.pool.unlabeled, self.spec.query_strategy,
                            seed=int(rng_for(self.spec.seed, "query", iteration).integers(2**32)),
                            task=self.task)
        phi = self.task.model_features(inst)
        predicted = self.model.predict_one(phi)
        expl = explain(self.task, self.model, inst, predicted, self.spec.lime,
                       k=self.task.explanation_k(inst),
                       seed=int(rng_for(self.spec.seed, "explain", iteration).integers(2**32)))
        self._pending = PendingQuery(iteration=iteration, instance=inst,
                                     predicted=predicted, explanation=expl,
                                     burn_in=iteration <= self.spec.burn_in)
        return self._pending

    def apply_feedback(self, label: int, flagged: Sequence[int] = (),
                       iteration: Optional[int] = None,
                       source: str = "simulated") -> MetricRecord:
        if self.done:
            raise RuntimeError("session is finished")
        q = self.current_query()
        assert q is not None
        if iteration is not None and iteration != q.iteration:
            raise StaleIteration(
                f"feedback for iteration {iteration}, current is {q.iteration}")
        flagged = tuple(int(j) for j in flagged)
        if q.burn_in and flagged:
            raise ValueError("corrections are not requested during burn-in")
        if label != q.predicted and flagged:
            raise ValueError("a relabeled query takes no explanation correction")
        correction = CorrectionSet.for_explanation(q.explanation, flagged, source=source)
        if label != q.predicted:
            case = WRONG_PREDICTION
        elif flagged:
            case = RIGHT_FOR_WRONG_REASONS
        else:
            case = RIGHT_FOR_RIGHT_REASONS
        counterexamples: list[Example] = []
        if self.spec.corrections and not q.burn_in and correction.indices:
            with_sources = to_counterexamples_with_sources(
                self.task, q.instance, q.predicted, correction,
                self.spec.counter_strategy, labeled=self.pool.labeled,
                test_ids=self.test_ids,
                seed=int(rng_for(self.spec.seed, "counter", q.iteration).integers(2**32)))
            counterexamples = [ex for ex, _ in with_sources]
            for ex, components in with_sources:
                self.counterexample_log.append(counterexample_log_record(
                    q.instance, ex, components, self.spec.counter_strategy))
        already = self.pool.labeled_ids()
        added = [ce for ce in counterexamples if ce.instance.id not in already]
        query_example = Example(q.instance, label, provenance=QUERY_PROVENANCE)
        self.pool = self.pool.with_update(
            add_labeled=[query_example, *counterexamples],
            remove_unlabeled_ids={q.instance.id, *(ce.instance.id for ce in counterexamples)})
        self.model = self._fit(q.iteration)

        predictive = self._predictive()
        inst_f1 = self._query_expl_f1(q.instance, q.explanation)
        cum = ((sum(r.expl_f1_query for r in self.history) + inst_f1)
               / (len(self.history) + 1))
        expl_test = None
        if (self.spec.test_expl_every > 0
                and q.iteration % self.spec.test_expl_every == 0):
            expl_test = evaluate_explanations_on_test(
                self.task, self.model, self.test, self.spec.lime,
                self.spec.test_expl_subsample,
                seed=int(rng_for(self.spec.seed, "test-expl-seed", q.iteration).integers(2**32)))
        a0, a1, res = self._decomposition()
        record = MetricRecord(t=q.iteration, query_id=q.instance.id, case=case,
                              predictive=predictive, expl_f1_query=inst_f1,
                              expl_f1_cum=cum, counterexamples_added=len(added),
                              expl_f1_test=expl_test, alpha0=a0, alpha1=a1,
                              residual_norm=res)
        self.history.append(record)
        self._pending = None
        if q.iteration >= self.spec.budget or not self.pool.unlabeled:
            self.status = EXHAUSTED
        elif self._converged():
            self.status = CONVERGED
        return record

    def _converged(self) -> bool:
        if not self.spec.converge_enabled:
            return False
        w = self.spec.converge_window
        if len(self.history) <= w:
            return False
        series = [r.predictive for r in self.history[-(w + 1):]]
        return all(abs(series[i + 1] - series[i]) <= self.spec.converge_eps
                   for i in range(w))

    # -- driving ---------------------------------------------------------------------

    def run_with_oracle(self, annotator: SimulatedAnnotator) -> list[MetricRecord]:
        while not self.done:
            q = self.current_query()
            if q is None:
                break
            fb = annotator.respond(q.instance, q.predicted, q.explanation,
                                   request_correction=(self.spec.corrections
                                                       and not q.burn_in))
            self.apply_feedback(fb.label, sorted(fb.correction.indices),
                                iteration=q.iteration, source="simulated")
        return self.history


def run_session(spec: SessionSpec, annotator: SimulatedAnnotator):
    """Execute a full simulated session; returns (final model, history)."""
    engine = SessionEngine(spec)
    engine.run_with_oracle(annotator)
    return engine.model, engine.history


# -- cross-validation ---------------------------------------------------------

def kfold_split(n: int, folds: int, seed: int) -> list[np.ndarray]:
    order = rng_for(seed, "kfold").permutation(n)
    return [np.sort(part) for part in np.array_split(order, folds)]


@dataclass
class CrossValResult:
    histories: list[list[MetricRecord]]

    def series(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """(mean, std) per iteration across folds; checkpoints with missing
        values (e.g. test explanation F1 off-cadence) are averaged over the
        folds that have them."""
        length = min(len(h) for h in self.histories)
        means, stds = [], []
        for i in range(length):
            vals = [getattr(h[i], name) for h in self.histories]
            vals = [v for v in vals if v is not None]
            if not vals:
                means.append(np.nan)
                stds.append(np.nan)
            else:
                means.append(float(np.mean(vals)))
                stds.append(float(np.std(vals)))
        return np.array(means), np.array(stds)

    def final(self, name: str) -> np.ndarray:
        return np.array([getattr(h[-1], name) for h in self.histories], dtype=np.float64)


def cross_validate(examples: Sequence[Example],
                   build_spec: Callable[[Sequence[Example], Sequence[Example], int], SessionSpec],
                   folds: int, seed: int,
                   annotator_for: Callable[[int], SimulatedAnnotator],
                   split: Optional[Callable[[int, int, int], list[np.ndarray]]] = None,
                   collect: Optional[Callable[["SessionEngine"], None]] = None,
                   ) -> CrossValResult:
    """One session per fold (fold = held-out test side), seeds derived per fold."""
    if folds < 1:
        raise ValueError("folds must be >= 1")
    examples = list(examples)
    n = len(examples)
    if folds == 1:
        # single session: a seeded 80/20 split
        order = rng_for(seed, "kfold").permutation(n)
        cut = max(1, n // 5)
        parts = [np.sort(order[:cut])]
    else:
        parts = (split or kfold_split)(n, folds, seed)
    histories = []
    for f, test_idx in enumerate(parts):
        test_set = set(int(i) for i in test_idx)
        test = [examples[i] for i in sorted(test_set)]
        train = [examples[i] for i in range(n) if i not in test_set]
        if not test or not train:
            raise ValueError(f"fold {f} leaves an empty train or test side")
        fold_seed = int(rng_for(seed, "fold", f).integers(2**32))
        spec = build_spec(train, test, fold_seed)
        if len(train) < spec.seeds_per_class * spec.task.n_classes:
            raise ValueError(f"fold {f} train side is smaller than the seed set")
        engine = SessionEngine(spec)
        engine.run_with_oracle(annotator_for(fold_seed))
        histories.append(engine.history)
        if collect is not None:
            collect(engine)
    return CrossValResult(histories=histories)
