"""Open-loop prediction comparison (median squared error over 50 chained steps).

    python scripts/table1.py [--config configs/example1.toml] [--seed 0]
"""

import argparse

from rokdeepc.config import load_config
from rokdeepc.harness import open_loop_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/example1.toml")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    cfg = load_config(args.config).with_seed(args.seed)
    stats = open_loop_benchmark(cfg.prediction_config()).statistics()
    conds = list(stats)
    print(f"{'predictor':<22s}" + "".join(f"{c:>14s}" for c in conds))
    for meth in stats[conds[0]]:
        print(f"{meth:<22s}" + "".join(f"{stats[c][meth]['median']:14.4f}" for c in conds))


if __name__ == "__main__":
    main()
