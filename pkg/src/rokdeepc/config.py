"""TOML run configuration.

Every section maps onto a dataclass of the library. Unknown keys, wrong
types and out-of-range values raise :class:`ConfigError` naming the dotted
field path (for example ``robust.lambda_g``). See README.md for the schema.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import kernels as kern
from .harness import ControlBenchConfig, PlantConfig, PredictionBenchConfig
from .solver import CostSpec, GDConfig, RobustConfig


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


REQUIRED_SECTIONS = ("plant", "data")

_NUM = (int, float)


def _check_type(value, kind, path):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, _NUM):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if kind == "floats":
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list of numbers, got {value!r}")
        return tuple(_check_type(v, float, f"{path}[{i}]") for i, v in enumerate(value))
    if kind == "strs":
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list of strings, got {value!r}")
        return tuple(_check_type(v, str, f"{path}[{i}]") for i, v in enumerate(value))
    if kind == "matrix":
        if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
            raise ConfigError(path, "expected a matrix (list of lists)")
        return tuple(_check_type(row, "floats", f"{path}[{i}]") for i, row in enumerate(value))
    raise AssertionError(kind)


def _section(doc: dict, name: str, schema: dict, required: bool = False, parent: str = "") -> dict:
    """Validate ``doc[name]`` against ``{key: type}`` and return the typed values present.

    ``parent`` prefixes error paths for nested tables such as ``kernels.gaussian``.
    """
    if name not in doc:
        if required:
            raise ConfigError(name, "missing required section")
        return {}
    sec = doc[name]
    name = f"{parent}.{name}" if parent else name
    if not isinstance(sec, dict):
        raise ConfigError(name, "expected a table")
    unknown = set(sec) - set(schema)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"{name}.{key}", f"unknown key; allowed: {sorted(schema)}")
    return {k: _check_type(v, schema[k], f"{name}.{k}") for k, v in sec.items()}


def _build(cls, values: dict, path: str):
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def _positive(value, path, strict=True):
    if value is None:
        return
    if (strict and not value > 0) or (not strict and value < 0):
        raise ConfigError(path, f"must be {'positive' if strict else 'nonnegative'}, got {value}")


KERNEL_SCHEMAS = {
    "polynomial": {"offset": float, "degree": int},
    "gaussian": {"two_sigma_sq": float},
    "exponential": {"scale": float},
    "hybrid": {"two_sigma_sq": float, "past_dim": int},
}


@dataclass(frozen=True)
class RunConfig:
    """Everything the CLI needs; ``*_config()`` methods produce harness configs."""

    plant: PlantConfig = PlantConfig()
    T: int = 600
    T_ini: int = 1
    N: int = 5
    excitation_variance: float = 0.01
    noise_variance: float = 0.0  # measurement noise of the `collect` record
    kernels: tuple = (kern.Polynomial(), kern.Gaussian(), kern.Exponential())
    cost: CostSpec = CostSpec()
    robust: RobustConfig = RobustConfig()
    gd: GDConfig = GDConfig()
    deepc: dict = field(default_factory=lambda: {"lambda_g": 1.0, "lambda_y": 1e5})
    koopman: dict = field(default_factory=lambda: {"centers": 10, "box": 1.5})
    prediction: dict = field(default_factory=dict)
    control: dict = field(default_factory=dict)
    montecarlo: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "results"

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        return self if seed is None else dataclasses.replace(self, seed=seed)

    def with_out_dir(self, out: Optional[str]) -> "RunConfig":
        return self if out is None else dataclasses.replace(self, out_dir=out)

    def prediction_config(self) -> PredictionBenchConfig:
        p = self.prediction
        return _build(PredictionBenchConfig, dict(
            plant=self.plant, T=self.T, T_ini=self.T_ini, N=self.N, gamma=self.robust.gamma,
            horizon=p.get("horizon", 50), excitation_variance=self.excitation_variance,
            noise_variances=p.get("noise_variances", (0.0, 1e-3)), kernels=self.kernels,
            koopman_centers=self.koopman["centers"], koopman_box=self.koopman["box"],
            n_trials=p.get("n_trials", 10), seed=self.seed), "prediction")

    def _control(self, section: dict, path: str, **defaults) -> ControlBenchConfig:
        c = {**defaults, **section}
        u_box = c.get("u_box")
        if u_box is not None and len(u_box) != 2:
            raise ConfigError(f"{path}.u_box", "expected [lower, upper]")
        ref = c.get("reference", ((50, 0.1), (150, 0.05)))
        return _build(ControlBenchConfig, dict(
            plant=self.plant, T=self.T, T_ini=self.T_ini, N=self.N, k=c.get("k", 1),
            steps=c.get("steps", 200), reference=tuple((int(t), float(v)) for t, v in ref),
            excitation_variance=self.excitation_variance,
            noise_variance=c.get("noise_variance", 0.0), kernels=self.kernels,
            methods=c.get("methods", ("rokdeepc", "kernel_mpc", "deepc", "koopman_mpc")),
            cost=self.cost, robust=self.robust, gd=self.gd,
            deepc_lambda_g=self.deepc["lambda_g"], deepc_lambda_y=self.deepc["lambda_y"],
            koopman_centers=self.koopman["centers"], koopman_box=self.koopman["box"],
            u_box=None if u_box is None else tuple(u_box), cost_on=c.get("cost_on", "clean"),
            seed=self.seed), path)

    def control_config(self) -> ControlBenchConfig:
        return self._control(self.control, "control")

    def montecarlo_config(self) -> ControlBenchConfig:
        mc = {k: v for k, v in self.montecarlo.items() if k != "n_runs"}
        return self._control(mc, "montecarlo", noise_variance=1.5e-3,
                             methods=("rokdeepc", "kernel_mpc"))

    @property
    def n_runs(self) -> int:
        return self.montecarlo.get("n_runs", 20)


def _reference(value, path):
    if not isinstance(value, list):
        raise ConfigError(path, "expected a list of [step, level] pairs")
    out = []
    for i, pair in enumerate(value):
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ConfigError(f"{path}[{i}]", "expected [step, level]")
        t = _check_type(pair[0], int, f"{path}[{i}][0]")
        v = _check_type(pair[1], float, f"{path}[{i}][1]")
        if out and t <= out[-1][0]:
            raise ConfigError(f"{path}[{i}]", "reference steps must be strictly increasing")
        out.append((t, v))
    return tuple(out)


_CONTROL_SCHEMA = {"steps": int, "k": int, "noise_variance": float, "methods": "strs",
                   "cost_on": str, "u_box": "floats", "reference": "raw"}


def _control_section(doc, name, extra=None):
    schema = dict(_CONTROL_SCHEMA, **(extra or {}))
    raw = doc.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected a table")
    ref = raw.get("reference")
    plain = {k: v for k, v in raw.items() if k != "reference"}
    vals = _section({name: plain}, name, {k: t for k, t in schema.items() if t != "raw"})
    if ref is not None:
        vals["reference"] = _reference(ref, f"{name}.reference")
    _positive(vals.get("noise_variance"), f"{name}.noise_variance", strict=False)
    _positive(vals.get("steps"), f"{name}.steps")
    if "n_runs" in vals and vals["n_runs"] < 2:
        raise ConfigError(f"{name}.n_runs", "need at least 2 runs")
    return vals


def parse_config(doc: dict) -> RunConfig:
    """Validate a parsed TOML document."""
    if not isinstance(doc, dict):
        raise ConfigError("", "configuration must be a table")
    known = {"plant", "data", "excitation", "kernels", "cost", "robust", "gd", "deepc", "koopman",
             "prediction", "control", "montecarlo", "experiment", "output"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(sorted(unknown)[0], f"unknown section; allowed: {sorted(known)}")

    pl = _section(doc, "plant", {"kind": str, "A": "matrix", "B": "matrix", "C": "matrix",
                                 "D": "matrix"}, required=True)
    plant = _build(PlantConfig, pl, "plant")
    try:
        built = plant.build()
    except ValueError as exc:
        raise ConfigError("plant", str(exc)) from None
    data = _section(doc, "data", {"T": int, "T_ini": int, "N": int, "noise_variance": float},
                    required=True)
    _positive(data.get("noise_variance"), "data.noise_variance", strict=False)
    for key in ("T", "T_ini", "N"):
        _positive(data.get(key), f"data.{key}")
    T, T_ini, N = data.get("T", 600), data.get("T_ini", 1), data.get("N", 5)
    if T_ini + N > T:
        raise ConfigError("data.T", f"T={T} is shorter than T_ini + N = {T_ini + N}")
    exc = _section(doc, "excitation", {"variance": float})
    _positive(exc.get("variance"), "excitation.variance")

    kernels = []
    ksec = doc.get("kernels", {"use": ["polynomial", "gaussian", "exponential"]})
    if not isinstance(ksec, dict):
        raise ConfigError("kernels", "expected a table")
    use = _check_type(ksec.get("use", ["polynomial", "gaussian", "exponential"]), "strs", "kernels.use")
    if not use:
        raise ConfigError("kernels.use", "at least one kernel is required")
    for key in ksec:
        if key != "use" and key not in KERNEL_SCHEMAS:
            raise ConfigError(f"kernels.{key}", f"unknown kernel; allowed: {sorted(KERNEL_SCHEMAS)}")
    for name in use:
        if name not in KERNEL_SCHEMAS:
            raise ConfigError("kernels.use", f"unknown kernel {name!r}")
        params = _section(ksec, name, KERNEL_SCHEMAS[name], parent="kernels")
        if name == "hybrid" and "past_dim" not in params:
            params["past_dim"] = (built.m + built.p) * T_ini
        kernels.append(_build(kern.from_dict, {"d": {"kind": name, "parameters": params}},
                              f"kernels.{name}"))

    cost = _build(CostSpec, _section(doc, "cost", {"r_u": float, "r_delta": float, "q_y": float}),
                  "cost")
    robust = _build(RobustConfig, _section(doc, "robust", {
        "lambda_k_prime": float, "lambda_g": float, "gamma": float, "lambda_k": float,
        "rho1": float, "rho2": float, "g_bound": float}), "robust")
    gd = _build(GDConfig, _section(doc, "gd", {
        "alpha": float, "i_max": int, "xi": float, "warm_start": bool, "backtracking": bool}), "gd")
    deepc = {"lambda_g": 1.0, "lambda_y": 1e5, **_section(doc, "deepc", {"lambda_g": float,
                                                                        "lambda_y": float})}
    for key, v in deepc.items():
        _positive(v, f"deepc.{key}")
    koop = {"centers": 10, "box": 1.5, **_section(doc, "koopman", {"centers": int, "box": float})}
    _positive(koop["centers"], "koopman.centers", strict=False)
    _positive(koop["box"], "koopman.box")

    pred = _section(doc, "prediction", {"horizon": int, "noise_variances": "floats", "n_trials": int})
    _positive(pred.get("horizon"), "prediction.horizon")
    _positive(pred.get("n_trials"), "prediction.n_trials")
    if "horizon" in pred and pred["horizon"] % N:
        raise ConfigError("prediction.horizon", f"must be a multiple of N={N}")
    for i, v in enumerate(pred.get("noise_variances", ())):
        _positive(v, f"prediction.noise_variances[{i}]", strict=False)
    control = _control_section(doc, "control")
    mc = _control_section(doc, "montecarlo", {"n_runs": int})
    exp = _section(doc, "experiment", {"seed": int})
    out = _section(doc, "output", {"dir": str})

    cfg = RunConfig(plant=plant, T=T, T_ini=T_ini, N=N,
                    excitation_variance=exc.get("variance", 0.01),
                    noise_variance=data.get("noise_variance", 0.0), kernels=tuple(kernels),
                    cost=cost, robust=robust, gd=gd, deepc=deepc, koopman=koop, prediction=pred,
                    control=control, montecarlo=mc, seed=exp.get("seed", 0),
                    out_dir=out.get("dir", "results"))
    # surface cross-field errors at parse time
    cfg.prediction_config()
    cfg.control_config()
    cfg.montecarlo_config()
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("", f"{path}: invalid TOML: {exc}") from None
    return parse_config(doc)
