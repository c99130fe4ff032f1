"""Experiment orchestration: open-loop benchmarks, closed-loop runs, Monte Carlo, reports.

Closed-loop costs follow the stage cost of the controllers,

    sum_t r_u ||u_t||^2 + q_y ||y_t - r_t||^2 + sum_{t>=2} r_delta ||u_t - u_{t-1}||^2,

evaluated on the noise-free plant outputs by default (``cost_on="clean"``).
"""

from __future__ import annotations

import concurrent.futures as cf
import csv
import dataclasses
import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import kernels as kern
from .plant import (ExcitationSignal, LTIPlant, NoiseModel, PolynomialSISOPlant, collect_data,
                    make_reference, simulate)
from .predict import (LiftingDictionary, fit_kernel, fit_koopman_predictor, fit_linear,
                      prediction_error, rollout)
from .solver import (BoxSet, CostSpec, DeePC, GDConfig, KernelMPC, KoopmanMPC, RobustConfig,
                     RoKDeePC, SolverError, lambda_k_threshold)
from .trajectory import InitialWindow, SignalTrajectory, partition


# ----------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class PlantConfig:
    """``kind`` is ``"polynomial"`` (the SISO benchmark) or ``"lti"`` (matrices required)."""

    kind: str = "polynomial"
    A: Optional[tuple] = None
    B: Optional[tuple] = None
    C: Optional[tuple] = None
    D: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("polynomial", "lti"):
            raise ValueError(f"unknown plant kind {self.kind!r}")
        if self.kind == "lti" and any(x is None for x in (self.A, self.B, self.C)):
            raise ValueError("lti plant needs A, B and C")

    def build(self):
        if self.kind == "polynomial":
            return PolynomialSISOPlant()
        return LTIPlant(np.array(self.A), np.array(self.B), np.array(self.C),
                        None if self.D is None else np.array(self.D))


DEFAULT_KERNELS = (kern.Polynomial(), kern.Gaussian(), kern.Exponential())


@dataclass(frozen=True)
class PredictionBenchConfig:
    """Open-loop prediction benchmark settings."""

    plant: PlantConfig = PlantConfig()
    T: int = 600
    T_ini: int = 1
    N: int = 5
    gamma: float = 0.01
    horizon: int = 50
    excitation_variance: float = 0.01
    noise_variances: tuple = (0.0, 1e-3)
    kernels: tuple = DEFAULT_KERNELS
    koopman_centers: int = 10
    koopman_box: float = 1.5
    n_trials: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.horizon % self.N:
            raise ValueError("horizon must be a multiple of N")
        if self.n_trials < 1:
            raise ValueError("n_trials must be positive")


@dataclass(frozen=True)
class ControlBenchConfig:
    """Closed-loop experiment settings.

    ``methods`` may contain ``rokdeepc`` and ``kernel_mpc`` (run once per
    kernel), ``deepc`` and ``koopman_mpc``.
    """

    plant: PlantConfig = PlantConfig()
    T: int = 600
    T_ini: int = 1
    N: int = 5
    k: int = 1
    steps: int = 200
    reference: tuple = ((50, 0.1), (150, 0.05))
    excitation_variance: float = 0.01
    noise_variance: float = 0.0
    kernels: tuple = DEFAULT_KERNELS
    methods: tuple = ("rokdeepc", "kernel_mpc", "deepc", "koopman_mpc")
    cost: CostSpec = CostSpec()
    robust: RobustConfig = RobustConfig()
    gd: GDConfig = GDConfig()
    deepc_lambda_g: float = 1.0
    deepc_lambda_y: float = 1e5
    koopman_centers: int = 10
    koopman_box: float = 1.5
    u_box: Optional[tuple] = None
    cost_on: str = "clean"
    seed: int = 0

    def __post_init__(self):
        if self.cost_on not in ("clean", "measured"):
            raise ValueError("cost_on must be 'clean' or 'measured'")
        if not 1 <= self.k <= self.N:
            raise ValueError("k must lie in [1, N]")
        if self.steps < self.T_ini:
            raise ValueError("steps must be at least T_ini")
        unknown = set(self.methods) - {"rokdeepc", "kernel_mpc", "deepc", "koopman_mpc"}
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")

    def reference_signal(self) -> np.ndarray:
        return make_reference(self.steps, self.reference)


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if isinstance(obj, (kern.Polynomial, kern.Gaussian, kern.Exponential, kern.Hybrid)):
            return kern.to_dict(obj)
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def config_fingerprint(config) -> str:
    """SHA-256 of the canonical JSON form of a config (first 16 hex digits)."""
    text = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _child_seeds(seed: int, n: int) -> list:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


# ----------------------------------------------------------------------------
# summaries


@dataclass
class BenchmarkSummary:
    """Per-run values and their statistics.

    ``runs`` holds one dict per (run, condition, method) with keys ``run``,
    ``seed``, ``condition``, ``method``, ``value`` (NaN when the run failed) and
    ``failed``.
    """

    kind: str
    runs: list
    config: dict
    fingerprint: str
    seeds: list

    def statistics(self) -> dict:
        """``{condition: {method: {mean, std, median, n, failures}}}``; std uses ``ddof=1``."""
        groups = {}
        for row in self.runs:
            groups.setdefault(row["condition"], {}).setdefault(row["method"], []).append(row)
        out = {}
        for cond, methods in groups.items():
            out[cond] = {}
            for meth, rows in methods.items():
                vals = np.array([r["value"] for r in rows if not r["failed"]], dtype=float)
                n = vals.size
                out[cond][meth] = {
                    "mean": float(vals.mean()) if n else float("nan"),
                    "std": float(vals.std(ddof=1)) if n > 1 else 0.0,
                    "median": float(np.median(vals)) if n else float("nan"),
                    "n": int(n),
                    "failures": int(sum(r["failed"] for r in rows)),
                }
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "fingerprint": self.fingerprint, "seeds": list(self.seeds),
                "config": self.config, "statistics": self.statistics(), "runs": self.runs}


CSV_FIELDS = ("run", "seed", "condition", "method", "value", "failed")


def write_report(summary: BenchmarkSummary, path, formats=("csv", "json")) -> list:
    """Write ``<path>.csv`` (one row per run and method) and/or ``<path>.json``.

    Returns:
        The written paths.
    """
    base = Path(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        p = base.with_suffix(".csv")
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_FIELDS)
            for row in summary.runs:
                w.writerow([row["run"], row["seed"], row["condition"], row["method"],
                            repr(float(row["value"])), int(row["failed"])])
        written.append(p)
    if "json" in formats:
        p = base.with_suffix(".json")
        p.write_text(json.dumps(summary.to_dict(), sort_keys=True, indent=1) + "\n")
        written.append(p)
    unknown = set(formats) - {"csv", "json"}
    if unknown:
        raise ValueError(f"unknown report formats {sorted(unknown)}")
    return written


def read_report(path) -> BenchmarkSummary:
    d = json.loads(Path(path).with_suffix(".json").read_text())
    return BenchmarkSummary(d["kind"], d["runs"], d["config"], d["fingerprint"], d["seeds"])


# ----------------------------------------------------------------------------
# open-loop prediction benchmark


def koopman_dictionary(state_dim: int, n_centers: int, box: float, seed: int) -> LiftingDictionary:
    from .plant import make_rng
    return LiftingDictionary.thin_plate(state_dim, n_centers, make_rng(seed), box)


def prediction_trial(cfg: PredictionBenchConfig, seed: int) -> dict:
    """One realization of the prediction benchmark.

    A length-``T`` training record and an independent test record of length
    ``T_ini + horizon`` are generated from the zero state. Predictors are fitted
    on measured (noisy) training outputs and rolled out from the measured test
    window; errors are computed against the noise-free test outputs.

    Returns:
        ``{condition: {method: error}}`` with conditions named ``noise=<var>``.
    """
    s_data, s_test, s_noise, s_koop, s_test_noise = _child_seeds(seed, 5)
    plant = cfg.plant.build()
    exc = ExcitationSignal(0.0, cfg.excitation_variance, s_data)
    clean, _ = collect_data(plant, exc, cfg.T)
    test_clean, _ = collect_data(plant, ExcitationSignal(0.0, cfg.excitation_variance, s_test),
                                 cfg.T_ini + cfg.horizon)
    state_dim = (plant.m + plant.p) * cfg.T_ini
    dictionary = koopman_dictionary(state_dim, cfg.koopman_centers, cfg.koopman_box, s_koop)
    u_test = test_clean.inputs[:, cfg.T_ini:].T.ravel()
    y_true = test_clean.outputs[:, cfg.T_ini:].T.ravel()
    out = {}
    for i, var in enumerate(cfg.noise_variances):
        noise = NoiseModel(var, s_noise + i)
        measured = SignalTrajectory(clean.inputs, clean.outputs + noise.sample(clean.outputs.shape))
        tnoise = NoiseModel(var, s_test_noise + i)
        y_win = test_clean.outputs[:, :cfg.T_ini] + tnoise.sample((plant.p, cfg.T_ini))
        window = InitialWindow.from_history(test_clean.inputs[:, :cfg.T_ini], y_win, cfg.T_ini)
        part = partition(measured, cfg.T_ini, cfg.N)
        preds = {"linear": fit_linear(part),
                 "koopman": fit_koopman_predictor(measured, cfg.T_ini, cfg.N, dictionary)}
        for spec in cfg.kernels:
            preds[f"kernel[{kern.kernel_kind(spec)}]"] = fit_kernel(part, spec, cfg.gamma)
        # a chained rollout may leave the data region and overflow; that trial is
        # then reported as non-finite and counted as a failure
        with np.errstate(over="ignore", invalid="ignore"):
            out[f"noise={var:g}"] = {name: prediction_error(rollout(p, window, u_test), y_true)
                                     for name, p in preds.items()}
    return out


def open_loop_benchmark(cfg: PredictionBenchConfig = PredictionBenchConfig()) -> BenchmarkSummary:
    """Repeat :func:`prediction_trial` ``n_trials`` times; medians are robust to outlier draws.

    Non-finite errors (a diverged rollout) are marked failed and left out of
    the statistics.
    """
    seeds = [cfg.seed + i for i in range(cfg.n_trials)]
    rows = []
    for run, s in enumerate(seeds):
        for cond, vals in prediction_trial(cfg, s).items():
            for meth, v in vals.items():
                rows.append({"run": run, "seed": s, "condition": cond, "method": meth,
                             "value": float(v), "failed": not np.isfinite(v)})
    conf = _jsonable(cfg)
    return BenchmarkSummary("prediction", rows, conf, config_fingerprint(cfg), seeds)


# ----------------------------------------------------------------------------
# closed loop


def realized_cost(inputs, outputs, reference, cost: CostSpec) -> float:
    """Stage cost summed over a recorded run; arrays are (channels, steps)."""
    u = np.atleast_2d(inputs)
    e = np.atleast_2d(outputs) - np.atleast_2d(reference)
    du = np.diff(u, axis=1)
    return float(cost.r_u * np.sum(u * u) + cost.q_y * np.sum(e * e) + cost.r_delta * np.sum(du * du))


@dataclass
class ClosedLoopRecord:
    """Streams of one closed-loop run, all shaped (channels, steps)."""

    method: str
    inputs: np.ndarray
    measured: np.ndarray
    clean: np.ndarray
    reference: np.ndarray
    cost: CostSpec
    cost_on: str = "clean"
    solve_times: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    cycles: list = field(default_factory=list)
    realized: float = float("nan")

    def __post_init__(self):
        shapes = {self.inputs.shape[1], self.measured.shape[1], self.clean.shape[1],
                  self.reference.shape[1]}
        if len(shapes) != 1:
            raise ValueError("closed-loop streams must have equal lengths")
        if np.isnan(self.realized):
            self.realized = self.recompute_cost()

    @property
    def steps(self) -> int:
        return self.inputs.shape[1]

    def recompute_cost(self) -> float:
        y = self.clean if self.cost_on == "clean" else self.measured
        return realized_cost(self.inputs, y, self.reference, self.cost)

    def rows(self):
        """CSV rows ``(method, step, u..., y_measured..., y_clean..., r...)``."""
        for t in range(self.steps):
            yield ([self.method, t] + [repr(float(v)) for v in self.inputs[:, t]]
                   + [repr(float(v)) for v in self.measured[:, t]]
                   + [repr(float(v)) for v in self.clean[:, t]]
                   + [repr(float(v)) for v in self.reference[:, t]])


def _preview(reference: np.ndarray, t: int, N: int) -> np.ndarray:
    idx = np.minimum(np.arange(t, t + N), reference.shape[1] - 1)
    return reference[:, idx].T.ravel()


def closed_loop(controller, plant, reference, total_steps: Optional[int] = None, k: int = 1,
                noise: Optional[NoiseModel] = None, cost: CostSpec = CostSpec(),
                cost_on: str = "clean", lookahead: bool = False, method: str = "") -> ClosedLoopRecord:
    """Receding-horizon simulation.

    The first ``T_ini`` steps apply zero input to fill the initial window. At
    each later cycle the controller sees the latest ``T_ini`` applied inputs and
    measured outputs plus the next ``N`` reference samples (the last sample is
    held past the end), and the first ``k`` inputs of its plan are applied.

    Args:
        lookahead: Also simulate the full ``N``-step plan on a copy of the plant
            and keep it in ``cycles`` (needed by :func:`theorem1_report`).
    """
    ref = np.atleast_2d(np.asarray(reference, dtype=float))
    steps = ref.shape[1] if total_steps is None else int(total_steps)
    if ref.shape[1] < steps:
        raise ValueError("reference shorter than total_steps")
    ref = ref[:, :steps]
    m, p, T_ini, N = controller.m, controller.p, controller.T_ini, controller.N
    if steps < T_ini:
        raise ValueError("total_steps must be at least T_ini")
    noise = noise if noise is not None else NoiseModel(0.0)
    plant.reset()
    if hasattr(controller, "reset"):
        controller.reset()
    U = np.zeros((m, steps))
    Yc = np.zeros((p, steps))
    Ym = np.zeros((p, steps))
    times, iters, cycles = [], [], []

    def apply(t, u):
        U[:, t] = u
        Yc[:, t] = plant.step(u)
        Ym[:, t] = Yc[:, t] + noise.sample(p)

    for t in range(T_ini):
        apply(t, np.zeros(m))
    t = T_ini
    while t < steps:
        window = InitialWindow.from_history(U[:, :t], Ym[:, :t], T_ini)
        r = _preview(ref, t, N)
        t0 = time.perf_counter()
        try:
            res = controller.solve(window, r)
        except SolverError as exc:
            raise type(exc)(f"step {t}: {exc}") from exc
        times.append(time.perf_counter() - t0)
        iters.append(res.iterations)
        plan = res.u_star.reshape(N, m)
        if lookahead:
            twin = plant.copy()
            y_sys = simulate(twin, plan.T).T.ravel()
            entry = {"t": t, "u": res.u_star.copy(), "r": r, "y_sys": y_sys,
                     "diagnostics": dict(res.diagnostics)}
            model = getattr(controller, "model", None)
            if model is not None:
                entry["y_prd"] = model.predict(window, res.u_star)
            cycles.append(entry)
        for j in range(min(k, steps - t)):
            apply(t, plan[j])
            t += 1
    return ClosedLoopRecord(method or getattr(controller, "name", "controller"), U, Ym, Yc, ref,
                            cost, cost_on, times, iters, cycles)


def plateau_errors(y, reference, tail: int = 20) -> list:
    """Relative tracking errors on each nonzero reference plateau of a SISO run.

    Returns:
        ``(level, closest, steady)`` per plateau, where ``closest`` is the
        smallest ``|y - level| / |level|`` reached on the plateau and
        ``steady`` its mean over the last ``tail`` steps.
    """
    y = np.asarray(y, dtype=float).ravel()
    reference = np.asarray(reference, dtype=float).ravel()
    edges = np.flatnonzero(np.diff(reference)) + 1
    out = []
    for a, b in zip(edges, list(edges[1:]) + [reference.size]):
        level = reference[a]
        if level == 0:
            continue
        err = np.abs(y[a:b] - level) / abs(level)
        out.append((float(level), float(err.min()), float(err[-tail:].mean())))
    return out


def write_closed_loop_csv(records, path) -> Path:
    """One row per step per controller."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rec0 = records[0]
    m, p = rec0.inputs.shape[0], rec0.measured.shape[0]
    header = (["method", "step"] + [f"u{i}" for i in range(m)] + [f"y_measured{i}" for i in range(p)]
              + [f"y_clean{i}" for i in range(p)] + [f"r{i}" for i in range(p)])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for rec in records:
            w.writerows(rec.rows())
    return path


@dataclass
class Theorem1Report:
    cycles: int
    beta_e: float
    min_slack: float
    violations: int
    condition_met: int
    lambda_k_threshold: float
    slacks: list

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("slacks")
        return d


def theorem1_report(record: ClosedLoopRecord, model, cost: CostSpec, beta_e: Optional[float] = None,
                    tol: float = 1e-9) -> Theorem1Report:
    """Per-cycle check of ``c_realized <= c_opt + beta_e`` on the ``N``-step plans.

    For each cycle, ``c_realized = l(u*) + ||y_sys - r||_Q`` where ``y_sys`` is the
    plant's response to the whole plan, and ``beta_e`` defaults to the largest
    ``||y_sys - y_prd||_Q`` over the run with ``y_prd`` the kernel prediction.
    ``c_opt`` is replaced by the cone-form cost at ``(u*, g*)`` with the
    recovered parameters. Since the robust optimum can only grow with
    ``lambda_k``, this value is a lower bound on ``c_opt`` at any ``lambda_k``
    satisfying the magnitude condition, so the check is conservative.
    ``model`` supplies ``W`` for the condition ``lambda_k >= ||Q^(1/2) W||``.
    """
    if not record.cycles:
        raise ValueError("record has no lookahead cycles; run closed_loop(..., lookahead=True)")
    R = cost.input_weight(record.inputs.shape[0], len(record.cycles[0]["u"]) // record.inputs.shape[0])
    errs = [cost.q_norm(c["y_sys"] - c["y_prd"]) for c in record.cycles]
    beta = float(max(errs)) if beta_e is None else float(beta_e)
    thr = lambda_k_threshold(model, cost)
    slacks, met = [], 0
    for c in record.cycles:
        d = c["diagnostics"]
        if "socp_cost" not in d:
            raise ValueError(f"cycle at step {c['t']} lacks cone-form diagnostics")
        u = c["u"]
        c_real = float(u @ R @ u) + cost.q_norm(c["y_sys"] - c["r"])
        slacks.append(d["socp_cost"] + beta - c_real)
        met += int(d["lambda_k"] >= thr)
    scale = max(1.0, max(abs(s) for s in slacks))
    violations = int(sum(s < -tol * scale for s in slacks))
    return Theorem1Report(len(slacks), beta, float(min(slacks)), violations, met, thr, slacks)


# ----------------------------------------------------------------------------
# building controllers for an experiment


def method_names(cfg: ControlBenchConfig) -> list:
    names = []
    for meth in cfg.methods:
        if meth in ("rokdeepc", "kernel_mpc"):
            names += [f"{meth}[{kern.kernel_kind(s)}]" for s in cfg.kernels]
        else:
            names.append(meth)
    return names


def build_controllers(cfg: ControlBenchConfig, measured: SignalTrajectory, koop_seed: int) -> dict:
    """Fit every configured controller on one measured dataset."""
    part = partition(measured, cfg.T_ini, cfg.N)
    u_box = None if cfg.u_box is None else BoxSet(*cfg.u_box)
    out = {}
    for meth in cfg.methods:
        if meth in ("rokdeepc", "kernel_mpc"):
            for spec in cfg.kernels:
                model = fit_kernel(part, spec, cfg.robust.gamma)
                name = f"{meth}[{kern.kernel_kind(spec)}]"
                if meth == "rokdeepc":
                    out[name] = RoKDeePC(model, cfg.cost, cfg.robust, cfg.gd, u_box=u_box,
                                         diagnostics=False)
                else:
                    out[name] = KernelMPC(model, cfg.cost, cfg.gd, u_box=u_box)
        elif meth == "deepc":
            out[meth] = DeePC(part, cfg.cost, cfg.deepc_lambda_g, cfg.deepc_lambda_y, u_box=u_box)
        elif meth == "koopman_mpc":
            dim = (measured.m + measured.p) * cfg.T_ini
            dictionary = koopman_dictionary(dim, cfg.koopman_centers, cfg.koopman_box, koop_seed)
            pred = fit_koopman_predictor(measured, cfg.T_ini, cfg.N, dictionary)
            out[meth] = KoopmanMPC(pred, cfg.cost, u_box=u_box)
    return out


def control_run(cfg: ControlBenchConfig, seed: int, keep_records: bool = False):
    """Collect data with ``seed``, fit all controllers and run each closed loop.

    Returns:
        ``{method: realized cost}``, plus the records when ``keep_records``.
    """
    s_data, s_noise, s_loop, s_koop = _child_seeds(seed, 4)
    plant = cfg.plant.build()
    _, measured = collect_data(plant, ExcitationSignal(0.0, cfg.excitation_variance, s_data), cfg.T,
                               NoiseModel(cfg.noise_variance, s_noise))
    controllers = build_controllers(cfg, measured, s_koop)
    ref = cfg.reference_signal()
    costs, records = {}, {}
    for i, (name, ctrl) in enumerate(controllers.items()):
        rec = closed_loop(ctrl, plant, ref, cfg.steps, cfg.k,
                          NoiseModel(cfg.noise_variance, s_loop + i), cfg.cost, cfg.cost_on,
                          method=name)
        costs[name] = rec.realized
        records[name] = rec
    return (costs, records) if keep_records else costs


@dataclass(frozen=True)
class ControlExperiment:
    """Picklable callable ``seed -> {method: realized cost}`` for :func:`monte_carlo`."""

    config: ControlBenchConfig

    def __call__(self, seed: int) -> dict:
        return control_run(self.config, seed)

    def methods(self) -> list:
        return method_names(self.config)


def _worker_count(requested: Optional[int]) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("ROKDEEPC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"ROKDEEPC_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


RUN_ERRORS = (SolverError, np.linalg.LinAlgError, FloatingPointError, OverflowError, ValueError)


def _safe_call(experiment, seed):
    try:
        return experiment(seed), None
    except RUN_ERRORS as exc:
        return None, f"{type(exc).__name__}: {exc}"


def monte_carlo(experiment: Callable, n_runs: int, base_seed: int = 0, workers: Optional[int] = None,
                methods: Optional[list] = None, config=None, condition: str = "closed_loop",
                progress: Optional[Callable] = None) -> BenchmarkSummary:
    """Run ``experiment(seed)`` for seeds ``base_seed .. base_seed + n_runs - 1``.

    Each run regenerates its dataset and noise from its seed. Runs that raise
    one of the numerical/solver errors are recorded as failures and excluded
    from the statistics. Results are ordered by seed whatever the worker count.

    Args:
        workers: Process count; defaults to ``ROKDEEPC_THREADS`` or the CPU count.
        methods: Method names expected from every run (needed to record
            failures); taken from ``experiment.methods()`` when available.
    """
    if n_runs < 2:
        raise ValueError("monte_carlo needs at least two runs")
    seeds = [base_seed + i for i in range(n_runs)]
    assert len(set(seeds)) == len(seeds)
    if methods is None and hasattr(experiment, "methods"):
        methods = experiment.methods()
    n_workers = min(_worker_count(workers), n_runs)
    if n_workers == 1:
        results = []
        for s in seeds:
            results.append(_safe_call(experiment, s))
            if progress:
                progress(s, results[-1])
    else:
        with cf.ProcessPoolExecutor(n_workers) as pool:
            futures = [pool.submit(_safe_call, experiment, s) for s in seeds]
            results = [f.result() for f in futures]
    rows = []
    for run, (s, (vals, err)) in enumerate(zip(seeds, results)):
        names = methods if vals is None else list(vals)
        if names is None:
            raise RuntimeError(f"run with seed {s} failed ({err}) and no method list was given")
        for meth in names:
            failed = vals is None or not np.isfinite(vals.get(meth, np.nan))
            rows.append({"run": run, "seed": s, "condition": condition, "method": meth,
                         "value": float("nan") if vals is None else float(vals[meth]),
                         "failed": bool(failed), **({"error": err} if err else {})})
    conf = _jsonable(config if config is not None else getattr(experiment, "config", {}))
    return BenchmarkSummary("monte_carlo", rows, conf, config_fingerprint(conf), seeds)
