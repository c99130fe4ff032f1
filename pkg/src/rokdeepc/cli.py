"""Command-line front end.

    rokdeepc collect        --config CFG [--seed S] [--out DIR]
    rokdeepc predict-bench  --config CFG [--seed S] [--out DIR]
    rokdeepc control-bench  --config CFG [--seed S] [--out DIR]
    rokdeepc montecarlo     --config CFG [--seed S] [--out DIR] [--runs N]
    rokdeepc verify         [--sabotage NAME]

Exit codes: 0 success, 1 property failure, 2 configuration or I/O error,
3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .harness import (ControlExperiment, _jsonable, config_fingerprint, control_run, monte_carlo,
                      open_loop_benchmark, write_closed_loop_csv, write_report)
from .plant import ExcitationSignal, NoiseModel, collect_data
from .solver import SolverError
from .trajectory import save_csv

EXIT_OK, EXIT_PROPERTY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


class _Console:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, *args):
        if not self.quiet:
            print(*args, flush=True)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_collect(cfg: RunConfig, say) -> int:
    """Excite the plant and write ``data_clean.csv`` / ``data_measured.csv``."""
    from .harness import _child_seeds
    s_exc, s_noise = _child_seeds(cfg.seed, 2)
    plant = cfg.plant.build()
    clean, measured = collect_data(plant, ExcitationSignal(0.0, cfg.excitation_variance, s_exc),
                                   cfg.T, NoiseModel(cfg.noise_variance, s_noise))
    out = _out_dir(cfg)
    for name, traj in (("data_clean.csv", clean), ("data_measured.csv", measured)):
        save_csv(traj, out / name)
        say(f"wrote {out / name} ({traj.T} samples)")
    return EXIT_OK


PREDICT_FIELDS = ("condition", "method", "median", "mean", "std", "n", "failures")


def cmd_predict_bench(cfg: RunConfig, say) -> int:
    """Open-loop prediction errors; one aggregate row per (noise level, method)."""
    summary = open_loop_benchmark(cfg.prediction_config())
    out = _out_dir(cfg)
    write_report(summary, out / "prediction_runs")
    stats = summary.statistics()
    path = out / "prediction.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICT_FIELDS)
        for cond, methods in stats.items():
            for meth, st in methods.items():
                w.writerow([cond, meth, repr(st["median"]), repr(st["mean"]), repr(st["std"]),
                            st["n"], st["failures"]])
                say(f"{cond:>12s}  {meth:<22s} median {st['median']:.4g}")
    say(f"wrote {path}")
    return EXIT_OK


def cmd_control_bench(cfg: RunConfig, say) -> int:
    """Closed-loop runs of every configured controller on one dataset."""
    ccfg = cfg.control_config()
    costs, records = control_run(ccfg, cfg.seed, keep_records=True)
    out = _out_dir(cfg)
    csv_path = write_closed_loop_csv(list(records.values()), out / "control.csv")
    summary = {"fingerprint": config_fingerprint(_jsonable(ccfg)), "seed": cfg.seed,
               "steps": ccfg.steps, "controllers": {}}
    for name, rec in records.items():
        times = np.asarray(rec.solve_times)
        summary["controllers"][name] = {
            "realized_cost": rec.realized, "cost_on": rec.cost_on,
            "mean_solve_time": float(times.mean()) if times.size else 0.0,
            "max_solve_time": float(times.max()) if times.size else 0.0,
            "solve_times": times.tolist(), "iterations": list(map(int, rec.iterations)),
        }
        say(f"{name:<22s} cost {rec.realized:10.4f}  mean solve {1e3 * summary['controllers'][name]['mean_solve_time']:.2f} ms")
    json_path = out / "control_summary.json"
    json_path.write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n")
    say(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_montecarlo(cfg: RunConfig, say, runs: Optional[int] = None) -> int:
    """Repeat the closed-loop experiment over consecutive seeds."""
    mcfg = cfg.montecarlo_config()
    n = runs if runs is not None else cfg.n_runs
    exp = ControlExperiment(mcfg)

    def progress(seed, result):
        vals, err = result
        say(f"seed {seed}: " + (err if vals is None else
                                ", ".join(f"{k}={v:.3f}" for k, v in vals.items())))

    summary = monte_carlo(exp, n, base_seed=cfg.seed, progress=progress)
    paths = write_report(summary, _out_dir(cfg) / "montecarlo")
    for meth, st in summary.statistics()["closed_loop"].items():
        say(f"{meth:<22s} {st['mean']:10.4f} +/- {st['std']:.4f}  (n={st['n']}, failed={st['failures']})")
    say("wrote " + ", ".join(map(str, paths)))
    return EXIT_OK


def cmd_verify(say, sabotage: Optional[str] = None) -> int:
    """Run the property battery; exit 1 naming the first failing property."""
    from .verify import run_all
    results = run_all(sabotage_target=sabotage, report=say)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"property failure: {', '.join(failed)}", file=sys.stderr)
        return EXIT_PROPERTY
    say(f"all {len(results)} properties hold")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="override experiment.seed")
    common.add_argument("--out", metavar="DIR", help="override output.dir")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    parser = argparse.ArgumentParser(prog="rokdeepc", description="Robust kernel data-driven control")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("collect", parents=[common], help="collect an excitation record")
    sub.add_parser("predict-bench", parents=[common], help="open-loop prediction benchmark")
    sub.add_parser("control-bench", parents=[common], help="closed-loop benchmark")
    mc = sub.add_parser("montecarlo", parents=[common], help="Monte Carlo closed-loop study")
    mc.add_argument("--runs", type=int, help="override montecarlo.n_runs")
    ver = sub.add_parser("verify", help="run the property battery")
    ver.add_argument("--sabotage", metavar="NAME", help=argparse.SUPPRESS)
    ver.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    say = _Console(args.quiet)
    try:
        if args.command == "verify":
            return cmd_verify(say, args.sabotage)
        if getattr(args, "runs", None) is not None and args.runs < 2:
            raise ConfigError("--runs", "need at least 2 runs")
        cfg = load_config(args.config).with_seed(args.seed).with_out_dir(args.out)
        if args.command == "collect":
            return cmd_collect(cfg, say)
        if args.command == "predict-bench":
            return cmd_predict_bench(cfg, say)
        if args.command == "control-bench":
            return cmd_control_bench(cfg, say)
        return cmd_montecarlo(cfg, say, args.runs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as exc:  # unknown sabotage target
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
