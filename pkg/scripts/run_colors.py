#!/usr/bin/env python3
"""Colors experiments: corrected and uncorrected arms per rule, plus the L2
replication.  Writes one run directory per arm and prints the comparisons
(final cumulative explanation F1, weight-decomposition coefficients)."""

import argparse
import dataclasses
import json
from pathlib import Path

from explearn.config import load_config
from explearn.runner import run_experiment

CONFIGS = {
    "rule0": "configs/colors-rule0.json",
    "rule1": "configs/colors-rule1.json",
    "l2": "configs/colors-l2.json",
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/colors")
    parser.add_argument("--experiments", nargs="+", default=list(CONFIGS),
                        choices=list(CONFIGS))
    args = parser.parse_args()

    root = Path(__file__).resolve().parent.parent
    for name in args.experiments:
        cfg = load_config(root / CONFIGS[name])
        for corrections in (True, False):
            arm = "corrected" if corrections else "baseline"
            arm_cfg = dataclasses.replace(
                cfg, session=dataclasses.replace(cfg.session, corrections=corrections))
            out = Path(args.out) / name / arm
            result = run_experiment(arm_cfg, out)
            final_f1 = result.result.final("expl_f1_cum")
            line = f"{name}/{arm}: final cum expl-F1 {final_f1.mean():.3f}"
            a0 = result.result.final("alpha0")
            a1 = result.result.final("alpha1")
            if not any(v is None for v in a0):
                line += f", alpha0 {a0.mean():.3f}, alpha1 {a1.mean():.3f}"
            print(line)
            print(f"  -> {result.metrics_path}")


if __name__ == "__main__":
    main()
