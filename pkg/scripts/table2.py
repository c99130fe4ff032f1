"""Monte Carlo realized costs of RoKDeePC and certainty-equivalence kernel MPC.

    python scripts/table2.py [--config configs/example1.toml] [--runs 20] [--out results/table2]

Parallel runs are capped by ``ROKDEEPC_THREADS``.
"""

import argparse
from pathlib import Path

from rokdeepc.config import load_config
from rokdeepc.harness import ControlExperiment, monte_carlo, write_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/example1.toml")
    ap.add_argument("--runs", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", default="results/table2")
    args = ap.parse_args()
    cfg = load_config(args.config).with_seed(args.seed)
    exp = ControlExperiment(cfg.montecarlo_config())
    summary = monte_carlo(exp, args.runs or cfg.n_runs, base_seed=cfg.seed)
    write_report(summary, Path(args.out) / "montecarlo")
    stats = summary.statistics()["closed_loop"]
    for meth, st in stats.items():
        print(f"{meth:<24s} {st['mean']:10.3f} +/- {st['std']:8.3f}  (n={st['n']})")
    for kind in ("polynomial", "gaussian", "exponential"):
        a, b = stats.get(f"rokdeepc[{kind}]"), stats.get(f"kernel_mpc[{kind}]")
        if a and b:
            print(f"{kind:<12s} RoKDeePC is {1 - a['mean'] / b['mean']:.1%} below kernel MPC")


if __name__ == "__main__":
    main()
