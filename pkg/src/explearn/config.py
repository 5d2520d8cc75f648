"""Declarative experiment configuration: one JSON document names the dataset,
learner, query strategy, explainer settings and session parameters; the
snapshot plus the seed reproduces a run bit-exactly."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from .corrections import STRATEGY_KINDS, CounterexampleStrategy
from .explainer import LimeConfig
from .learners import QUERY_STRATEGIES, LinearFitConfig, MlpFitConfig
from .oracle import SimulatedAnnotator
from .session import SessionSpec


class ConfigError(ValueError):
    def __init__(self, fieldname: str, message: str):
        self.field = fieldname
        super().__init__(f"{fieldname}: {message}")


def _require(d: dict, fieldname: str, prefix: str) -> Any:
    if fieldname not in d:
        raise ConfigError(f"{prefix}{fieldname}", "missing required field")
    return d[fieldname]


def _get(d: dict, fieldname: str, default: Any) -> Any:
    return d.get(fieldname, default)


def _check(cond: bool, fieldname: str, message: str) -> None:
    if not cond:
        raise ConfigError(fieldname, message)


@dataclass(frozen=True)
class DatasetConfig:
    kind: str
    n: int = 600
    rule: int = 0                    # colors: which rule corrections push toward
    negative_style: str = "flat-top-middle"  # colors negatives: flat-top-middle | uniform
    n_docs: int = 400                # text synthetic
    source: str = "synthetic"        # text: synthetic | directory
    path: Optional[str] = None       # text: corpus directory
    n_train: int = 1200              # decoy
    n_test: int = 800                # decoy
    size: int = 16                   # decoy
    n_classes: int = 4               # decoy
    patch: int = 4                   # decoy
    images_idx: Optional[str] = None  # decoy: external IDX base images
    labels_idx: Optional[str] = None
    k: Optional[int] = None          # override the task's explanation budget


@dataclass(frozen=True)
class SessionConfig:
    budget: int = 100
    burn_in: int = 10
    corrections: bool = True
    strategy: str = "randomize"
    c: int = 3
    test_expl_every: int = 20
    test_expl_subsample: int = 10
    seeds_per_class: int = 2
    oracle_hint: bool = False        # live sessions: embed the simulated answer
    converge_enabled: bool = False
    converge_eps: float = 1e-3
    converge_window: int = 25


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    learner: LinearFitConfig | MlpFitConfig
    lime: LimeConfig
    session: SessionConfig
    query_strategy: str = "closest-to-margin"
    seed: int = 0
    folds: int = 1

    def to_dict(self) -> dict:
        learner = asdict(self.learner)
        learner["kind"] = "mlp" if isinstance(self.learner, MlpFitConfig) else "linear"
        return {
            "dataset": {k: v for k, v in asdict(self.dataset).items() if v is not None},
            "learner": learner,
            "lime": asdict(self.lime),
            "session": asdict(self.session),
            "query_strategy": self.query_strategy,
            "seed": self.seed,
            "folds": self.folds,
        }


DATASET_KINDS = ("colors", "toy-corners", "text", "decoy")


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")

    ds_raw = _require(raw, "dataset", "")
    _check(isinstance(ds_raw, dict), "dataset", "must be an object")
    kind = _require(ds_raw, "kind", "dataset.")
    _check(kind in DATASET_KINDS, "dataset.kind", f"must be one of {DATASET_KINDS}")
    if kind == "colors":
        _check(int(_get(ds_raw, "rule", 0)) in (0, 1), "dataset.rule", "must be 0 or 1")
        _check(_get(ds_raw, "negative_style", "flat-top-middle") in
               ("flat-top-middle", "uniform"), "dataset.negative_style",
               "must be 'flat-top-middle' or 'uniform'")
    if kind == "text":
        source = _get(ds_raw, "source", "synthetic")
        _check(source in ("synthetic", "directory"), "dataset.source",
               "must be 'synthetic' or 'directory'")
        if source == "directory":
            _check(_get(ds_raw, "path", None) is not None, "dataset.path",
                   "directory corpora need a path")
    dataset = DatasetConfig(
        kind=kind,
        n=int(_get(ds_raw, "n", 600)),
        rule=int(_get(ds_raw, "rule", 0)),
        negative_style=_get(ds_raw, "negative_style", "flat-top-middle"),
        n_docs=int(_get(ds_raw, "n_docs", 400)),
        source=_get(ds_raw, "source", "synthetic"),
        path=_get(ds_raw, "path", None),
        n_train=int(_get(ds_raw, "n_train", 1200)),
        n_test=int(_get(ds_raw, "n_test", 800)),
        size=int(_get(ds_raw, "size", 16)),
        n_classes=int(_get(ds_raw, "n_classes", 4)),
        patch=int(_get(ds_raw, "patch", 4)),
        images_idx=_get(ds_raw, "images_idx", None),
        labels_idx=_get(ds_raw, "labels_idx", None),
        k=(int(ds_raw["k"]) if ds_raw.get("k") is not None else None),
    )

    lraw = _require(raw, "learner", "")
    _check(isinstance(lraw, dict), "learner", "must be an object")
    lkind = _require(lraw, "kind", "learner.")
    _check(lkind in ("linear", "mlp"), "learner.kind", "must be 'linear' or 'mlp'")
    try:
        if lkind == "linear":
            learner: LinearFitConfig | MlpFitConfig = LinearFitConfig(
                loss=_get(lraw, "loss", "hinge"),
                regularizer=_get(lraw, "regularizer", "l2"),
                lam=float(_get(lraw, "lam", 0.01)),
                step=float(_get(lraw, "step", 0.5)),
                batch_size=int(_get(lraw, "batch_size", 32)),
                max_epochs=int(_get(lraw, "max_epochs", 300)),
                tol=float(_get(lraw, "tol", 1e-4)),
                patience=int(_get(lraw, "patience", 5)),
            )
        else:
            learner = MlpFitConfig(
                hidden=int(_get(lraw, "hidden", 64)),
                step=float(_get(lraw, "step", 0.1)),
                batch_size=int(_get(lraw, "batch_size", 32)),
                epochs=int(_get(lraw, "epochs", 30)),
            )
    except ValueError as exc:
        raise ConfigError("learner", str(exc)) from exc

    qs = _get(raw, "query_strategy", "closest-to-margin")
    _check(qs in QUERY_STRATEGIES, "query_strategy", f"must be one of {QUERY_STRATEGIES}")

    lime_raw = _get(raw, "lime", {})
    _check(isinstance(lime_raw, dict), "lime", "must be an object")
    try:
        lime = LimeConfig(
            samples=int(_get(lime_raw, "samples", 1000)),
            flip_prob=float(_get(lime_raw, "flip_prob", 0.5)),
            kernel_width=float(_get(lime_raw, "kernel_width", 0.25)),
            k=int(_get(lime_raw, "k", 4)),
            stability_runs=int(_get(lime_raw, "stability_runs", 10)),
        )
    except ValueError as exc:
        raise ConfigError("lime", str(exc)) from exc

    sraw = _get(raw, "session", {})
    _check(isinstance(sraw, dict), "session", "must be an object")
    strategy = _get(sraw, "strategy", "randomize")
    _check(strategy in STRATEGY_KINDS, "session.strategy",
           f"must be one of {STRATEGY_KINDS}")
    session = SessionConfig(
        budget=int(_get(sraw, "budget", 100)),
        burn_in=int(_get(sraw, "burn_in", 10)),
        corrections=bool(_get(sraw, "corrections", True)),
        strategy=strategy,
        c=int(_get(sraw, "c", 3)),
        test_expl_every=int(_get(sraw, "test_expl_every", 20)),
        test_expl_subsample=int(_get(sraw, "test_expl_subsample", 10)),
        seeds_per_class=int(_get(sraw, "seeds_per_class", 2)),
        oracle_hint=bool(_get(sraw, "oracle_hint", False)),
        converge_enabled=bool(_get(sraw, "converge_enabled", False)),
        converge_eps=float(_get(sraw, "converge_eps", 1e-3)),
        converge_window=int(_get(sraw, "converge_window", 25)),
    )
    _check(session.budget >= 0, "session.budget", "must be >= 0")
    _check(session.burn_in >= 0, "session.burn_in", "must be >= 0")
    _check(session.c >= 1, "session.c", "must be >= 1")

    folds = int(_get(raw, "folds", 1))
    _check(folds >= 1, "folds", "must be >= 1")

    return ExperimentConfig(dataset=dataset, learner=learner, lime=lime,
                            session=session, query_strategy=qs,
                            seed=int(_get(raw, "seed", 0)), folds=folds)


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError("<file>", f"no such config file: {p}")
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON in {p}: {exc}")
    return parse_config(raw)


# -- builders -------------------------------------------------------------------

def build_dataset(cfg: ExperimentConfig):
    """(task, examples) for pool tasks; DecoyData for the decoy family."""
    d = cfg.dataset
    if d.kind == "colors":
        from .datasets import ColorsTask
        task = ColorsTask(rule=d.rule, k=d.k, negative_style=d.negative_style)
        return task, task.generate(d.n, seed=cfg.seed)
    if d.kind == "toy-corners":
        from .datasets import ToyCornersTask
        task = ToyCornersTask()
        return task, task.generate(d.n, seed=cfg.seed)
    if d.kind == "text":
        from .datasets import load_text, synthetic_text_task
        data = (synthetic_text_task(n_docs=d.n_docs, seed=cfg.seed)
                if d.source == "synthetic" else load_text(d.path, seed=cfg.seed))
        return data.task, data.examples
    if d.kind == "decoy":
        from .datasets import generate_decoy, quantize_grayscale, read_idx
        base_images = base_labels = None
        if d.images_idx:
            base_images = quantize_grayscale(read_idx(d.images_idx))
            base_labels = read_idx(d.labels_idx)
        data = generate_decoy(d.n_train, d.n_test, seed=cfg.seed, size=d.size,
                              n_classes=d.n_classes, patch=d.patch,
                              base_images=base_images, base_labels=base_labels)
        if d.k is not None:
            data.task.k = d.k
        return data.task, data
    raise ConfigError("dataset.kind", f"unhandled kind {d.kind!r}")


def build_session_spec(cfg: ExperimentConfig, task, train: Sequence,
                       test: Sequence, seed: int) -> SessionSpec:
    s = cfg.session
    return SessionSpec(
        task=task, train=train, test=test, learner=cfg.learner, lime=cfg.lime,
        query_strategy=cfg.query_strategy,
        counter_strategy=CounterexampleStrategy(s.strategy, c=s.c),
        budget=s.budget, burn_in=s.burn_in, corrections=s.corrections,
        test_expl_every=s.test_expl_every,
        test_expl_subsample=s.test_expl_subsample,
        seeds_per_class=s.seeds_per_class, seed=seed,
        converge_enabled=s.converge_enabled, converge_eps=s.converge_eps,
        converge_window=s.converge_window)


def build_annotator(task) -> SimulatedAnnotator:
    return SimulatedAnnotator(task, correction_mode="complete")
