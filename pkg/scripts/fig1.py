"""Closed-loop step-tracking traces as plot-ready CSV, plus per-plateau errors.

    python scripts/fig1.py [--config configs/example1.toml] [--out results/fig1]

The CSV has one row per step per controller (columns ``method, step, u0,
y_measured0, y_clean0, r0``).
"""

import argparse
from pathlib import Path

from rokdeepc.config import load_config
from rokdeepc.harness import control_run, plateau_errors, write_closed_loop_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/example1.toml")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", default="results/fig1")
    args = ap.parse_args()
    cfg = load_config(args.config).with_seed(args.seed)
    costs, records = control_run(cfg.control_config(), cfg.seed, keep_records=True)
    path = write_closed_loop_csv(list(records.values()), Path(args.out) / "traces.csv")
    for name, rec in records.items():
        errs = plateau_errors(rec.clean[0], rec.reference[0])
        desc = "  ".join(f"r={lvl:g}: closest {c:.1%}, steady {s:.1%}" for lvl, c, s in errs)
        print(f"{name:<22s} cost {costs[name]:9.3f}  {desc}")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
