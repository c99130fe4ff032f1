import json
from dataclasses import replace

import numpy as np
import pytest

from rokdeepc import kernels as kern
from rokdeepc.harness import (BenchmarkSummary, ClosedLoopRecord, ControlBenchConfig,
                              ControlExperiment, closed_loop, config_fingerprint, control_run,
                              monte_carlo, plateau_errors, read_report, realized_cost, theorem1_report,
                              write_closed_loop_csv, write_report)
from rokdeepc.plant import LTIPlant, NoiseModel, PolynomialSISOPlant
from rokdeepc.solver import CostSpec, GDConfig, RobustConfig, SolveResult


class ZeroController:
    """Always plans zero input; remembers the windows it was shown."""

    name = "zero"

    def __init__(self, m=1, p=1, T_ini=2, N=3):
        self.m, self.p, self.T_ini, self.N = m, p, T_ini, N
        self.seen = []

    def solve(self, window, r, u0=None):
        self.seen.append((window.u_ini.copy(), window.y_ini.copy(), np.asarray(r).copy()))
        return SolveResult(np.zeros(self.m * self.N), None, [0.0], 1)


class ConstantController(ZeroController):
    name = "const"

    def __init__(self, value, **kw):
        super().__init__(**kw)
        self.value = value

    def solve(self, window, r, u0=None):
        super().solve(window, r)
        return SolveResult(np.full(self.m * self.N, self.value), None, [0.0], 1)


def test_realized_cost_hand_value():
    cost = CostSpec(r_u=2.0, r_delta=3.0, q_y=5.0)
    u = np.array([[1.0, 2.0, 0.0]])
    y = np.array([[0.0, 1.0, 1.0]])
    r = np.array([[0.0, 0.0, 2.0]])
    # 2*(1+4+0) + 5*(0+1+1) + 3*(1+4)
    assert realized_cost(u, y, r, cost) == 10.0 + 10.0 + 15.0


def test_zero_problem_has_zero_cost():
    rec = closed_loop(ZeroController(), PolynomialSISOPlant(), np.zeros((1, 30)))
    assert rec.realized == 0.0
    assert rec.inputs.shape == rec.clean.shape == rec.measured.shape == (1, 30)


def test_window_and_preview_follow_history():
    ctrl = ConstantController(0.2, T_ini=2, N=3)
    ref = np.arange(8.0)[None, :]
    rec = closed_loop(ctrl, PolynomialSISOPlant(), ref, k=2)
    # warm-up fills two steps, then cycles start at t = 2, 4, 6
    assert len(ctrl.seen) == 3
    u_ini, y_ini, r = ctrl.seen[1]
    np.testing.assert_array_equal(u_ini, rec.inputs[0, 2:4])
    np.testing.assert_array_equal(y_ini, rec.measured[0, 2:4])
    np.testing.assert_array_equal(r, [4.0, 5.0, 6.0])
    # the last preview holds the final reference value
    np.testing.assert_array_equal(ctrl.seen[2][2], [6.0, 7.0, 7.0])
    np.testing.assert_array_equal(rec.inputs[0], [0, 0, .2, .2, .2, .2, .2, .2])


def test_realized_cost_recomputes_exactly_and_follows_cost_on():
    ref = np.full((1, 25), 0.1)
    for cost_on, stream in (("clean", "clean"), ("measured", "measured")):
        rec = closed_loop(ConstantController(0.3), PolynomialSISOPlant(), ref,
                          noise=NoiseModel(1e-2, 3), cost_on=cost_on)
        assert rec.realized == rec.recompute_cost()
        assert rec.realized == realized_cost(rec.inputs, getattr(rec, stream), rec.reference, rec.cost)
    assert not np.array_equal(rec.measured, rec.clean)


def test_record_rejects_unequal_streams():
    z = np.zeros((1, 4))
    with pytest.raises(ValueError):
        ClosedLoopRecord("x", z, z, np.zeros((1, 5)), z, CostSpec())


def test_closed_loop_argument_checks():
    with pytest.raises(ValueError):
        closed_loop(ZeroController(T_ini=5), PolynomialSISOPlant(), np.zeros((1, 3)))
    with pytest.raises(ValueError):
        closed_loop(ZeroController(), PolynomialSISOPlant(), np.zeros((1, 3)), total_steps=10)


def test_closed_loop_csv_has_one_row_per_step_and_controller(tmp_path):
    ref = np.zeros((1, 12))
    recs = [closed_loop(c, PolynomialSISOPlant(), ref, method=c.name)
            for c in (ZeroController(), ConstantController(0.1))]
    path = write_closed_loop_csv(recs, tmp_path / "cl.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "method,step,u0,y_measured0,y_clean0,r0"
    assert len(lines) == 1 + 2 * 12


def _summary(values, methods=("a", "b")):
    rows = [{"run": i, "seed": 10 + i, "condition": "c", "method": m, "value": v[j], "failed": False}
            for i, v in enumerate(values) for j, m in enumerate(methods)]
    return BenchmarkSummary("test", rows, {"x": 1}, config_fingerprint({"x": 1}),
                            [10 + i for i in range(len(values))])


def test_report_round_trip_and_row_count(tmp_path):
    rng = np.random.default_rng(0)
    summ = _summary(rng.random((7, 2)).tolist())
    csv_path, json_path = write_report(summ, tmp_path / "rep")
    assert len(csv_path.read_text().splitlines()) == 1 + 7 * 2
    back = read_report(json_path)
    assert back.statistics() == summ.statistics()
    assert back.fingerprint == summ.fingerprint and back.seeds == summ.seeds
    stored = json.loads(json_path.read_text())["statistics"]
    assert stored == summ.statistics()
    with pytest.raises(ValueError):
        write_report(summ, tmp_path / "bad", formats=("xml",))


def test_statistics_match_two_pass_computation():
    rng = np.random.default_rng(1)
    vals = 1e3 + rng.standard_normal((20, 2))
    st = _summary(vals.tolist()).statistics()["c"]
    for j, m in enumerate(("a", "b")):
        x = vals[:, j]
        mean = sum(x) / len(x)
        var = sum((xi - mean) ** 2 for xi in x) / (len(x) - 1)
        assert st[m]["mean"] == pytest.approx(mean, rel=1e-12)
        assert st[m]["std"] == pytest.approx(np.sqrt(var), rel=1e-12)
        assert st[m]["n"] == 20


def test_fingerprint_changes_with_any_parameter():
    base = ControlBenchConfig()
    fp = config_fingerprint(base)
    variants = [replace(base, T=601), replace(base, cost=CostSpec(r_u=2.0)),
                replace(base, robust=RobustConfig(lambda_k_prime=1e6)),
                replace(base, kernels=(kern.Gaussian(two_sigma_sq=0.5),)),
                replace(base, reference=((50, 0.1),))]
    fps = {config_fingerprint(v) for v in variants}
    assert fp not in fps and len(fps) == len(variants)
    assert config_fingerprint(replace(base)) == fp


class SeedEcho:
    """Picklable experiment: value = seed, failure on seeds divisible by 3."""

    def __call__(self, seed):
        if seed % 3 == 0:
            raise ValueError("bad seed")
        return {"echo": float(seed), "twice": 2.0 * seed}

    def methods(self):
        return ["echo", "twice"]


def test_monte_carlo_seeds_failures_and_order():
    summ = monte_carlo(SeedEcho(), 7, base_seed=1, workers=1)
    assert summ.seeds == list(range(1, 8))
    st = summ.statistics()["closed_loop"]["echo"]
    assert st["failures"] == 2 and st["n"] == 5
    assert st["mean"] == pytest.approx(np.mean([1, 2, 4, 5, 7]))
    failed = [r for r in summ.runs if r["failed"]]
    assert {r["seed"] for r in failed} == {3, 6} and all("bad seed" in r["error"] for r in failed)
    par = monte_carlo(SeedEcho(), 7, base_seed=1, workers=3)
    assert [(r["seed"], r["method"]) for r in par.runs] == [(r["seed"], r["method"]) for r in summ.runs]
    assert par.statistics() == summ.statistics()


def test_monte_carlo_needs_two_runs():
    with pytest.raises(ValueError):
        monte_carlo(SeedEcho(), 1)


def _fast_config(**kw):
    base = dict(T=300, steps=60, reference=((20, 0.1),), kernels=(kern.Polynomial(),),
                methods=("rokdeepc", "kernel_mpc"),
                robust=RobustConfig(lambda_k_prime=1e6), gd=GDConfig(alpha=1e-4))
    base.update(kw)
    return ControlBenchConfig(**base)


def test_control_run_is_deterministic_and_names_methods():
    cfg = _fast_config()
    a, b = control_run(cfg, 4), control_run(cfg, 4)
    assert a == b
    assert list(a) == ControlExperiment(cfg).methods() == ["rokdeepc[polynomial]", "kernel_mpc[polynomial]"]
    assert control_run(cfg, 5) != a


def test_input_box_respected_in_closed_loop():
    cfg = _fast_config(u_box=(-0.02, 0.02), methods=("rokdeepc", "deepc", "koopman_mpc"))
    _, records = control_run(cfg, 0, keep_records=True)
    for name, rec in records.items():
        assert np.all(np.abs(rec.inputs) <= 0.02 + 1e-9), name
    # the box is tight enough to bind for the robust controller
    assert np.isclose(np.abs(records["rokdeepc[polynomial]"].inputs).max(), 0.02, atol=1e-9)


def test_noiseless_kernel_controllers_have_similar_costs():
    costs = control_run(_fast_config(), 0)
    ratio = costs["kernel_mpc[polynomial]"] / costs["rokdeepc[polynomial]"]
    assert 0.5 < ratio < 2.0


def _theorem1_record(y_sys, r, socp_cost, u=None):
    u = np.zeros(3) if u is None else u
    cycle = {"t": 1, "u": u, "r": r, "y_sys": y_sys, "y_prd": y_sys + 0.01,
             "diagnostics": {"socp_cost": socp_cost, "lambda_k": 1.0}}
    z = np.zeros((1, 4))
    return ClosedLoopRecord("x", z, z, z, z, CostSpec(), cycles=[cycle])


class _W:
    def __init__(self, W):
        self.W = W


def test_theorem1_report_trivial_case_slack_is_beta():
    cost = CostSpec()
    r = np.array([0.1, 0.2, 0.3])
    rec = _theorem1_record(r.copy(), r, socp_cost=0.0)
    rep = theorem1_report(rec, _W(np.zeros((3, 5))), cost)
    assert rep.beta_e == pytest.approx(cost.q_norm(0.01 * np.ones(3)))
    assert rep.min_slack == pytest.approx(rep.beta_e) and rep.violations == 0
    # a larger realized cost than c_opt + beta_e is flagged
    bad = _theorem1_record(r + 1.0, r, socp_cost=0.0)
    assert theorem1_report(bad, _W(np.zeros((3, 5))), cost, beta_e=0.0).violations == 1


def test_theorem1_report_requires_lookahead():
    rec = closed_loop(ZeroController(), PolynomialSISOPlant(), np.zeros((1, 6)))
    with pytest.raises(ValueError):
        theorem1_report(rec, None, CostSpec())


@pytest.mark.slow
def test_zero_noise_monte_carlo_spread_is_small():
    cfg = _fast_config(steps=100, reference=((20, 0.1), (60, 0.05)), methods=("rokdeepc",))
    summ = monte_carlo(ControlExperiment(cfg), 6, workers=None)
    st = summ.statistics()["closed_loop"]["rokdeepc[polynomial]"]
    assert st["failures"] == 0
    assert st["std"] <= 0.1 * st["mean"]


def test_lti_plant_config_runs():
    A, B, C = ((0.5,),), ((1.0,),), ((1.0,),)
    from rokdeepc.harness import PlantConfig
    plant = PlantConfig("lti", A, B, C).build()
    assert isinstance(plant, LTIPlant)
    rec = closed_loop(ConstantController(1.0, T_ini=1, N=2), plant, np.zeros((1, 5)))
    np.testing.assert_allclose(rec.clean[0], [0.0, 0.0, 1.0, 1.5, 1.75])


def test_plateau_errors_by_hand():
    r = np.array([0.0, 0.0, 1.0, 1.0, 1.0, 0.5, 0.5])
    y = np.array([0.0, 0.3, 0.5, 0.9, 1.2, 0.6, 0.55])
    (l1, c1, s1), (l2, c2, s2) = plateau_errors(y, r, tail=2)
    assert (l1, l2) == (1.0, 0.5)
    assert c1 == pytest.approx(0.1) and s1 == pytest.approx(0.15)
    assert c2 == pytest.approx(0.1) and s2 == pytest.approx(0.15)
