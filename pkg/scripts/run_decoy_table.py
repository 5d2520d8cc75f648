#!/usr/bin/env python3
"""Passive confounder experiment: train the MLP on the confounded dataset
with no corrections and with c in {1,3,5} patch-randomizing counterexamples
per training image, and print the accuracy table."""

import argparse
from pathlib import Path

from explearn.config import load_config
from explearn.runner import decoy_accuracy_table, format_decoy_table


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/decoy")
    parser.add_argument("--config", default=None)
    args = parser.parse_args()
    root = Path(__file__).resolve().parent.parent
    cfg = load_config(args.config or root / "configs" / "decoy.json")
    table = decoy_accuracy_table(cfg, out_dir=args.out)
    print(format_decoy_table(table))


if __name__ == "__main__":
    main()
