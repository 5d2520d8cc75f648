"""Batch experiment execution: cross-validated sessions with metrics.jsonl,
summary.csv and a reproducibility manifest per run, plus the passive
confounder-removal accuracy table."""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import (ConfigError, ExperimentConfig, build_annotator,
                     build_dataset, build_session_spec)
from .corrections import decoy_patch_randomize
from .datasets.decoy import DecoyData
from .learners import MlpFitConfig, fit_mlp
from .seeding import rng_for
from .session import CrossValResult, SessionEngine, cross_validate

# Published full-scale reference accuracies for the confounded image benchmark
# (10-class, 28x28); kept for qualitative comparison with scaled runs.  The
# input-gradient column is a comparison constant only.
FULL_SCALE_REFERENCE = {
    "train": {"no_corrections": 0.978, "c1": 0.938, "c3": 0.922, "c5": 0.924,
              "input_gradients": 0.898},
    "test": {"no_corrections": 0.482, "c1": 0.821, "c3": 0.851, "c5": 0.858,
             "input_gradients": 0.853},
}


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def input_content_hash(cfg: ExperimentConfig) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":")).encode())
    d = cfg.dataset
    for path in (d.path, d.images_idx, d.labels_idx):
        if path:
            p = Path(path)
            if p.is_dir():
                for f in sorted(p.rglob("*")):
                    if f.is_file():
                        h.update(f.read_bytes())
            elif p.is_file():
                h.update(p.read_bytes())
    return h.hexdigest()


@dataclass
class RunResult:
    run_id: str
    out_dir: Path
    result: CrossValResult
    metrics_path: Path
    summary_path: Path
    manifest_path: Path


def _write_metrics(path: Path, result: CrossValResult) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for fold, history in enumerate(result.histories):
            for record in history:
                row = {"fold": fold, **record.to_dict()}
                fh.write(json.dumps(row, sort_keys=True) + "\n")


def _write_summary(path: Path, result: CrossValResult) -> None:
    fields = ["fold", "iterations", "final_predictive", "final_expl_f1_cum",
              "final_alpha0", "final_alpha1", "final_residual_norm",
              "counterexamples_total"]
    rows = []
    for fold, history in enumerate(result.histories):
        last = history[-1] if history else None
        rows.append({
            "fold": fold,
            "iterations": len(history),
            "final_predictive": last.predictive if last else "",
            "final_expl_f1_cum": last.expl_f1_cum if last else "",
            "final_alpha0": last.alpha0 if last and last.alpha0 is not None else "",
            "final_alpha1": last.alpha1 if last and last.alpha1 is not None else "",
            "final_residual_norm": (last.residual_norm
                                    if last and last.residual_norm is not None else ""),
            "counterexamples_total": sum(r.counterexamples_added for r in history),
        })
    numeric = [k for k in fields if k not in ("fold",)]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
        for stat, fn in (("mean", np.mean), ("std", np.std)):
            agg: dict = {"fold": stat}
            for k in numeric:
                vals = [r[k] for r in rows if r[k] != ""]
                agg[k] = float(fn(vals)) if vals else ""
            writer.writerow(agg)


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path) -> RunResult:
    started = time.time()
    task, data = build_dataset(cfg)
    ce_log: list[dict] = []
    if isinstance(data, DecoyData):
        spec = build_session_spec(cfg, task, data.train, data.confounded_test, cfg.seed)
        engine = SessionEngine(spec)
        engine.run_with_oracle(build_annotator(task))
        result = CrossValResult(histories=[engine.history])
        ce_log = [{"fold": 0, **rec} for rec in engine.counterexample_log]
    else:
        def build(train, test, fold_seed):
            return build_session_spec(cfg, task, train, test, fold_seed)

        engines: list = []
        result = cross_validate(data, build, folds=cfg.folds, seed=cfg.seed,
                                annotator_for=lambda s: build_annotator(task),
                                collect=engines.append)
        for fold, engine in enumerate(engines):
            ce_log.extend({"fold": fold, **rec} for rec in engine.counterexample_log)
    run_id = config_hash(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.jsonl"
    summary_path = out / "summary.csv"
    manifest_path = out / "manifest.json"
    _write_metrics(metrics_path, result)
    _write_summary(summary_path, result)
    ce_path = out / "counterexamples.jsonl"
    with ce_path.open("w", encoding="utf-8") as fh:
        for rec in ce_log:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    manifest = {
        "run_id": run_id,
        "config": cfg.to_dict(),
        "input_hash": input_content_hash(cfg),
        "outputs": {"metrics": str(metrics_path), "summary": str(summary_path),
                    "counterexamples": str(ce_path)},
        "timings": {"started": started, "finished": time.time(),
                    "wall_seconds": time.time() - started},
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True),
                             encoding="utf-8")
    return RunResult(run_id=run_id, out_dir=out, result=result,
                     metrics_path=metrics_path, summary_path=summary_path,
                     manifest_path=manifest_path)


# -- passive confounder table -----------------------------------------------------

def decoy_accuracy_table(cfg: ExperimentConfig, out_dir: Optional[str | Path] = None,
                         c_values: tuple[int, ...] = (1, 3, 5)) -> dict:
    """Train the MLP without corrections and with c patch-randomizing
    counterexamples per training image (full-label passive setting); returns
    train/confounded-test/clean-test accuracy per variant."""
    if cfg.dataset.kind != "decoy":
        raise ConfigError("dataset.kind", "the accuracy table needs a decoy dataset")
    if not isinstance(cfg.learner, MlpFitConfig):
        raise ConfigError("learner.kind", "the accuracy table trains an mlp learner")
    task, data = build_dataset(cfg)
    test_ids = frozenset(ex.instance.id for ex in data.confounded_test)

    def arrays(examples):
        X = np.stack([task.model_features(ex.instance) for ex in examples])
        y = np.array([ex.label for ex in examples], dtype=np.int64)
        return X, y

    X_train, y_train = arrays(data.train)
    X_test, y_test = arrays(data.confounded_test)
    X_clean, y_clean = arrays(data.clean_test)

    table: dict = {"variants": {}, "reference_full_scale": FULL_SCALE_REFERENCE}
    for c in (0, *c_values):
        name = "no_corrections" if c == 0 else f"c{c}"
        if c == 0:
            Xa, ya = X_train, y_train
        else:
            extra = decoy_patch_randomize(task, data.train, c=c,
                                          seed=int(rng_for(cfg.seed, "augment", c).integers(2**32)),
                                          test_ids=test_ids)
            Xe, ye = arrays(extra)
            Xa = np.vstack([X_train, Xe])
            ya = np.concatenate([y_train, ye])
        fit_cfg = MlpFitConfig(hidden=cfg.learner.hidden, step=cfg.learner.step,
                               batch_size=cfg.learner.batch_size,
                               epochs=cfg.learner.epochs,
                               seed=int(rng_for(cfg.seed, "decoy-fit", c).integers(2**32)))
        model = fit_mlp(Xa, ya, fit_cfg, n_classes=task.n_classes)
        table["variants"][name] = {
            "train": float(np.mean(model.predict(X_train) == y_train)),
            "test": float(np.mean(model.predict(X_test) == y_test)),
            "clean_test": float(np.mean(model.predict(X_clean) == y_clean)),
        }

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "decoy_table.json").write_text(json.dumps(table, indent=2, sort_keys=True),
                                              encoding="utf-8")
        with (out / "decoy_table.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            cols = list(table["variants"])
            writer.writerow(["split", *cols])
            for split in ("train", "test", "clean_test"):
                writer.writerow([split] + [table["variants"][c][split] for c in cols])
    return table


def format_decoy_table(table: dict) -> str:
    cols = list(table["variants"])
    header = {"no_corrections": "No corr."}
    names = [header.get(c, f"c={c[1:]}") for c in cols]
    lines = ["          " + "  ".join(f"{n:>9s}" for n in names)]
    for split, label in (("train", "Train"), ("test", "Test")):
        vals = [table["variants"][c][split] for c in cols]
        lines.append(f"{label:<9s} " + "  ".join(f"{v:9.3f}" for v in vals))
    ref = table.get("reference_full_scale")
    if ref:
        lines.append("")
        lines.append("full-scale reference (10-class, 28x28):")
        for split, label in (("train", "Train"), ("test", "Test")):
            vals = [ref[split][c] for c in ("no_corrections", "c1", "c3", "c5")]
            lines.append(f"{label:<9s} " + "  ".join(f"{v:9.3f}" for v in vals)
                         + f"  (IG {ref[split]['input_gradients']:.3f})")
    return "\n".join(lines)
