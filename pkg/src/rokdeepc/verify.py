"""Property battery run by ``rokdeepc verify``.

Each property draws random instances, checks them against an independent
oracle and returns a :class:`PropertyResult`. Functions under test are looked
up through ``FUNCTIONS`` so that a negative control can swap one of them for
a deliberately broken version (``sabotage``).
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse.linalg as spla

from . import kernels as kern
from .harness import closed_loop, theorem1_report
from .plant import ExcitationSignal, PolynomialSISOPlant, collect_data, make_reference, make_rng, random_lti, simulate
from .predict import fit_kernel, fit_linear
from .solver import (CostSpec, GDConfig, GStepMatrices, RobustConfig, RoKDeePC, equivalent_params,
                     grad_u, kkt_residual_socp, refine_g, solve_g_closed_form, worst_case_verify)
from .solver.rokdeepc import eval_cost_quad
from .trajectory import InitialWindow, SignalTrajectory, partition

FUNCTIONS = {
    "grad_u": grad_u,
    "solve_g_closed_form": solve_g_closed_form,
    "equivalent_params": equivalent_params,
    "kkt_residual_socp": kkt_residual_socp,
    "worst_case_verify": worst_case_verify,
    "fit_linear": fit_linear,
}
# array-valued functions the negative control can perturb
SABOTAGE_TARGETS = ("grad_u", "solve_g_closed_form")


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str


def _sabotaged(fn: Callable) -> Callable:
    def broken(*args, **kwargs):
        out = fn(*args, **kwargs)
        if isinstance(out, np.ndarray):
            return out * (1.0 + 1e-3) + 1e-3
        return out
    return broken


@contextmanager
def sabotage(name: Optional[str]):
    """Temporarily replace ``FUNCTIONS[name]`` by a perturbed version."""
    if name is None:
        yield
        return
    if name not in SABOTAGE_TARGETS:
        raise KeyError(f"unknown sabotage target {name!r}; choose from {list(SABOTAGE_TARGETS)}")
    original = FUNCTIONS[name]
    FUNCTIONS[name] = _sabotaged(original)
    try:
        yield
    finally:
        FUNCTIONS[name] = original


# ----------------------------------------------------------------------------
# random instances


ALL_KERNELS = ("polynomial", "gaussian", "exponential", "hybrid")


def make_kernel(kind: str, T_ini: int, m: int = 1, p: int = 1) -> kern.KernelSpec:
    if kind == "hybrid":
        return kern.Hybrid(past_dim=(m + p) * T_ini)
    return kern.from_dict({"kind": kind})


@dataclass
class Instance:
    model: object
    window: InitialWindow
    u: np.ndarray
    r: np.ndarray
    g: np.ndarray
    cost: CostSpec
    robust: RobustConfig


def random_instance(rng, kind: str = "gaussian", T: int = 40, T_ini: int = 1, N: int = 3,
                    lambda_k_prime: Optional[float] = None, gamma: float = 1e-2) -> Instance:
    """Small problem on data from the polynomial SISO benchmark."""
    plant = PolynomialSISOPlant()
    traj, _ = collect_data(plant, ExcitationSignal(0.0, 0.01, int(rng.integers(1 << 31))), T)
    spec = make_kernel(kind, T_ini)
    model = fit_kernel(partition(traj, T_ini, N), spec, gamma)
    window = InitialWindow(rng.normal(0, 0.1, T_ini), rng.normal(0, 0.1, T_ini))
    lk = lambda_k_prime if lambda_k_prime is not None else 10.0 ** rng.uniform(2, 8)
    robust = RobustConfig(lambda_k_prime=lk, lambda_g=10.0 ** rng.uniform(-1, 1), gamma=gamma)
    cost = CostSpec(r_u=10.0 ** rng.uniform(-1, 1), r_delta=10.0 ** rng.uniform(-1, 2),
                    q_y=10.0 ** rng.uniform(0, 3))
    return Instance(model, window, rng.normal(0, 0.1, N), rng.normal(0, 0.1, N),
                    rng.normal(0, 0.1, model.H_c), cost, robust)


def example1_model(seed: int = 0, kind: str = "gaussian", T: int = 600, noise_variance: float = 0.0):
    from .plant import NoiseModel
    plant = PolynomialSISOPlant()
    _, meas = collect_data(plant, ExcitationSignal(0.0, 0.01, seed), T, NoiseModel(noise_variance, seed + 1))
    return fit_kernel(partition(meas, 1, 5), make_kernel(kind, 1), 1e-2)


# ----------------------------------------------------------------------------
# properties


def check_grad_u(n_instances: int = 100, seed: int = 0, kinds=ALL_KERNELS, tol: float = 1e-5) -> PropertyResult:
    """Analytic ``u``-gradient against central finite differences of ``c_q``."""
    rng = make_rng(seed)
    worst = 0.0
    for kind in kinds:
        for _ in range(n_instances):
            inst = random_instance(rng, kind)
            f = lambda v: eval_cost_quad(v, inst.g, inst.model, inst.cost, inst.robust, inst.window, inst.r)
            ga = FUNCTIONS["grad_u"](inst.u, inst.g, inst.model, inst.cost, inst.robust, inst.window)
            fd = np.zeros_like(inst.u)
            for i in range(inst.u.size):
                h = 1e-6 * max(1.0, abs(inst.u[i]))
                e = np.zeros_like(inst.u)
                e[i] = h
                fd[i] = (f(inst.u + e) - f(inst.u - e)) / (2 * h)
            err = np.linalg.norm(ga - fd) / max(np.linalg.norm(fd), 1e-12)
            worst = max(worst, err)
    return PropertyResult("grad_u", bool(worst <= tol), f"max relative error {worst:.2e} (tol {tol:g})")


def check_g_closed_form(n_instances: int = 50, seed: int = 1, tol: float = 1e-8) -> PropertyResult:
    """Closed-form ``g*`` against LSQR on the stacked least-squares form of ``c_q``."""
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        inst = random_instance(rng, str(rng.choice(ALL_KERNELS)), T=30,
                               lambda_k_prime=10.0 ** rng.uniform(-2, 2))
        m, c, rb = inst.model, inst.cost, inst.robust
        g_cf = FUNCTIONS["solve_g_closed_form"](m, inst.u, inst.window, inst.r, c, rb)
        H = m.H_c
        S = np.vstack([np.sqrt(c.q_y) * m.Y_F, np.sqrt(rb.lambda_g) * np.eye(H),
                       np.sqrt(rb.lambda_k_prime) * m.regularized_gram])
        b = np.concatenate([np.sqrt(c.q_y) * inst.r, np.zeros(H),
                            np.sqrt(rb.lambda_k_prime) * m.kernel_vector(inst.window, inst.u)])
        g_it = spla.lsqr(S, b, atol=1e-16, btol=1e-16, conlim=1e16, iter_lim=50000)[0]
        worst = max(worst, np.linalg.norm(g_cf - g_it) / max(np.linalg.norm(g_it), 1e-300))
    return PropertyResult("g_closed_form", bool(worst <= tol), f"max relative deviation {worst:.2e} (tol {tol:g})")


def check_lemma2(n_instances: int = 100, seed: int = 2, n_samples: int = 200) -> PropertyResult:
    """Sampled perturbations never beat the closed-form worst case; the rank-one one attains it."""
    rng = make_rng(seed)
    min_slack, max_gap = np.inf, 0.0
    for _ in range(n_instances):
        inst = random_instance(rng, str(rng.choice(ALL_KERNELS)), T=13, T_ini=1, N=3)  # 10 columns
        rho1, rho2 = 10.0 ** rng.uniform(-3, 1), 10.0 ** rng.uniform(-3, 1)
        rep = FUNCTIONS["worst_case_verify"](inst.u, inst.g, inst.model, inst.cost, inst.window,
                                             inst.r, rho1, rho2, n_samples, rng)
        min_slack = min(min_slack, rep.min_slack)
        max_gap = max(max_gap, rep.attainment_gap)
    ok = min_slack >= -1e-10 and max_gap <= 1e-9
    return PropertyResult("lemma2_tightness", bool(ok),
                          f"min slack {min_slack:.2e}, max attainment gap {max_gap:.2e}")


def solved_instances(n: int, seed: int = 3, lambda_k_prime: float = 1e8, kind: str = "gaussian"):
    """``n`` full RoKDeePC solves on benchmark data with random windows and references."""
    rng = make_rng(seed)
    model = example1_model(seed, kind)
    cost = CostSpec()
    robust = RobustConfig(lambda_k_prime=lambda_k_prime)
    ctrl = RoKDeePC(model, cost, robust, GDConfig(), diagnostics=False)
    out = []
    for _ in range(n):
        w = InitialWindow(rng.normal(0, 0.05, 1), rng.normal(0, 0.05, 1))
        r = np.full(5, rng.uniform(-0.1, 0.1))
        res = ctrl.solve(w, r)
        out.append((model, w, r, res, cost, robust, ctrl.mats))
    return out


def check_prop1_kkt(n_instances: int = 20, seed: int = 3, tol: float = 1e-6) -> PropertyResult:
    worst = 0.0
    for model, w, r, res, cost, robust, mats in solved_instances(n_instances, seed):
        g = refine_g(res.g_star, res.u_star, model, cost, robust, w, r, mats)
        eq = FUNCTIONS["equivalent_params"](res.u_star, g, model, cost, robust, w, r, rho2=0.0)
        if eq.degenerate:
            return PropertyResult("prop1_kkt", False, f"degenerate parameters: {eq.note}")
        val = FUNCTIONS["kkt_residual_socp"](res.u_star, g, eq.lambda_k, eq.rho1, eq.rho2, model,
                                             cost, w, r, relative=True)
        worst = max(worst, val)
    return PropertyResult("prop1_kkt", bool(worst <= tol), f"max scaled residual {worst:.2e} (tol {tol:g})")


def check_prop1_monotone(n_instances: int = 5, seed: int = 4) -> PropertyResult:
    """Recovered ``lambda_k`` grows with ``lambda_k'``; ``rho1`` grows with ``lambda_g`` (``rho2 = 0``)."""
    rng = make_rng(seed)
    model = example1_model(seed)
    cost = CostSpec()
    failures = []
    for i in range(n_instances):
        w = InitialWindow(rng.normal(0, 0.05, 1), rng.normal(0, 0.05, 1))
        r = np.full(5, rng.uniform(0.02, 0.1))
        u = rng.normal(0, 0.05, 5)
        lks = []
        for lkp in (1e4, 1e6, 1e8):
            rb = RobustConfig(lambda_k_prime=lkp)
            g = refine_g(FUNCTIONS["solve_g_closed_form"](model, u, w, r, cost, rb), u, model, cost, rb, w, r)
            lks.append(FUNCTIONS["equivalent_params"](u, g, model, cost, rb, w, r, rho2=0.0).lambda_k)
        rhos = []
        for lg in (0.1, 1.0, 10.0):
            rb = RobustConfig(lambda_k_prime=1e6, lambda_g=lg)
            g = refine_g(FUNCTIONS["solve_g_closed_form"](model, u, w, r, cost, rb), u, model, cost, rb, w, r)
            rhos.append(FUNCTIONS["equivalent_params"](u, g, model, cost, rb, w, r, rho2=0.0).rho1)
        if not (np.all(np.diff(lks) > 0) and np.all(np.diff(rhos) > 0)):
            failures.append((i, lks, rhos))
    detail = "all increasing" if not failures else f"non-monotone instance {failures[0]}"
    return PropertyResult("prop1_monotonicity", not failures, detail)


def check_fundamental_lemma(n_systems: int = 50, seed: int = 5, tol: float = 1e-8) -> PropertyResult:
    """Linear predictor on noiseless persistently exciting LTI data reproduces fresh trajectories."""
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(n_systems):
        n = int(rng.integers(1, 6))
        m, p = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        plant = random_lti(n, m, p, rng)
        T_ini, N = n, 5
        L = T_ini + N
        T = 3 * ((m + 1) * L + n) + L
        traj, _ = collect_data(plant, ExcitationSignal(0.0, 1.0, int(rng.integers(1 << 31))), T)
        part = partition(traj, T_ini, N)
        model = FUNCTIONS["fit_linear"](part)
        X = np.vstack([part.U_P, part.Y_P, part.U_F])
        fit_res = np.linalg.norm(part.Y_F - model.M @ X) / np.linalg.norm(part.Y_F)
        # fresh trajectory from a random state
        plant.x0 = rng.standard_normal(n)
        plant.reset()
        u = rng.standard_normal((m, L))
        y = simulate(plant, u)
        w = InitialWindow.from_history(u[:, :T_ini], y[:, :T_ini], T_ini)
        y_pred = model.predict(w, u[:, T_ini:].T.ravel())
        y_true = y[:, T_ini:].T.ravel()
        pred_res = np.linalg.norm(y_pred - y_true) / max(np.linalg.norm(y_true), 1e-12)
        worst = max(worst, fit_res, pred_res)
    return PropertyResult("fundamental_lemma", bool(worst <= tol), f"max relative residual {worst:.2e} (tol {tol:g})")


def check_theorem1(seed: int = 6, steps: int = 200, kind: str = "gaussian",
                   lambda_k_prime: float = 1e8, alpha: float = 1e-2):
    """Noiseless benchmark closed loop: ``c_realized <= c_opt + beta_e`` at every cycle."""
    model = example1_model(seed, kind)
    cost = CostSpec()
    ctrl = RoKDeePC(model, cost, RobustConfig(lambda_k_prime=lambda_k_prime), GDConfig(alpha=alpha))
    rec = closed_loop(ctrl, PolynomialSISOPlant(), make_reference(steps, ((50, 0.1), (150, 0.05))),
                      lookahead=True)
    rep = theorem1_report(rec, model, cost)
    return PropertyResult("theorem1_slack", rep.violations == 0,
                          f"{rep.violations} violations in {rep.cycles} cycles, min slack "
                          f"{rep.min_slack:.3g}, beta_e {rep.beta_e:.3g}"), rep


PROPERTIES = {
    "lemma2_tightness": check_lemma2,
    "prop1_kkt": check_prop1_kkt,
    "prop1_monotonicity": check_prop1_monotone,
    "grad_u": check_grad_u,
    "g_closed_form": check_g_closed_form,
    "fundamental_lemma": check_fundamental_lemma,
    "theorem1_slack": lambda: check_theorem1()[0],
}


def run_all(sabotage_target: Optional[str] = None, only=None, report: Callable = print) -> list:
    """Run the battery; returns the list of results (``report`` is called on each)."""
    results = []
    with sabotage(sabotage_target):
        for name, fn in PROPERTIES.items():
            if only and name not in only:
                continue
            res = fn()
            results.append(res)
            if report:
                report(f"{'PASS' if res.passed else 'FAIL'} {res.name}: {res.detail}")
    return results
