"""Robust kernel DeePC via its quadratic reformulation, plus certainty-equivalence kernel MPC.

The decision variables are the future inputs ``u`` (length ``mN``) and the
kernel coefficients ``g`` (length ``H_c``). For fixed ``u`` the quadratic cost

    c_q(u, g) = l(u) + ||Y_F g - r||_Q^2 + lambda_g ||g||^2 + lambda_k' ||V g - k(u)||^2,

with ``V = K + gamma I``, is a ridge problem in ``g`` whose minimizer is
``g* = M_r r + M_k k(u)``. The outer loop is projected gradient descent on
``u``. Backtracking is done on the reduced cost ``u -> c_q(u, g*(u))``: the
``g``-update is part of every trial step, so a line search on ``c_q(., g_old)``
(which is very stiff for large ``lambda_k'``) is never needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .. import kernels as kern
from ..predict import KernelPredictor
from ..trajectory import DimensionError, InitialWindow
from .common import (BoxSet, CostSpec, GDConfig, InfeasibleError, RobustConfig, SolveResult,
                     SolverDivergence, project_box, shift_warm_start)


def _vec(x, n, name):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != n:
        raise DimensionError(f"{name} must have length {n}, got {x.size}")
    return x


def _kernel_terms(model: KernelPredictor, window: InitialWindow, u):
    window.check(model.m, model.p, model.T_ini)
    q = window.regressor(u)
    return kern.kernel_vector_and_jacobian(model.spec, model.centers, q, model.m * model.N)


def eval_cost_quad(u, g, model: KernelPredictor, cost: CostSpec, cfg: RobustConfig,
                   window: InitialWindow, r) -> float:
    """Quadratic-in-``g`` cost ``c_q(u, g)``."""
    nu, ny = model.m * model.N, model.p * model.N
    u, r, g = _vec(u, nu, "u"), _vec(r, ny, "r"), _vec(g, model.H_c, "g")
    k = model.kernel_vector(window, u)
    e = model.Y_F @ g - r
    res = model.regularized_gram @ g - k
    R = cost.input_weight(model.m, model.N)
    return float(u @ R @ u + cost.q_y * e @ e + cfg.lambda_g * g @ g
                 + cfg.lambda_k_prime * res @ res)


def eval_cost_socp(u, g, model: KernelPredictor, cost: CostSpec, lambda_k: float, rho1: float,
                   rho2: float, window: InitialWindow, r) -> float:
    """Second-order-cone form ``c(u, g)`` with the robust regularizer ``h(g)``.

    ``c = l(u) + ||Y_F g - r||_Q + lambda_k rho1 sqrt(||g||^2+1) + rho2 ||g||
    + lambda_k ||V g - k(u)||``.
    """
    nu, ny = model.m * model.N, model.p * model.N
    u, r, g = _vec(u, nu, "u"), _vec(r, ny, "r"), _vec(g, model.H_c, "g")
    k = model.kernel_vector(window, u)
    R = cost.input_weight(model.m, model.N)
    gn = np.linalg.norm(g)
    return float(u @ R @ u + cost.q_norm(model.Y_F @ g - r)
                 + lambda_k * rho1 * np.sqrt(gn * gn + 1.0) + rho2 * gn
                 + lambda_k * np.linalg.norm(model.regularized_gram @ g - k))


@dataclass
class GStepMatrices:
    """``M_r``, ``M_k`` of the closed-form ``g`` update, plus the triangular factor.

    Built from a QR factorization of the stacked least-squares matrix
    ``[sqrt(q_y) Y_F; sqrt(lambda_g) I; sqrt(lambda_k') V]``, which avoids
    squaring the condition number of ``V``.
    """

    M_r: np.ndarray
    M_k: np.ndarray
    R: np.ndarray

    @classmethod
    def build(cls, model: KernelPredictor, q_y: float, cfg: RobustConfig) -> "GStepMatrices":
        H, ny = model.H_c, model.Y_F.shape[0]
        S = np.vstack([np.sqrt(q_y) * model.Y_F,
                       np.sqrt(cfg.lambda_g) * np.eye(H),
                       np.sqrt(cfg.lambda_k_prime) * model.regularized_gram])
        Qf, R = np.linalg.qr(S)
        d = np.abs(np.diag(R))
        # lambda_g > 0 makes S full column rank; this guards against misuse
        assert d.min() > 0, "normal matrix of the g-step is singular"
        M_r = sla.solve_triangular(R, Qf[:ny].T * np.sqrt(q_y))
        M_k = sla.solve_triangular(R, Qf[ny + H:].T * np.sqrt(cfg.lambda_k_prime))
        return cls(M_r, M_k, R)

    def __call__(self, r, k) -> np.ndarray:
        return self.M_r @ r + self.M_k @ k


def solve_g_closed_form(model: KernelPredictor, u, window: InitialWindow, r, cost: CostSpec,
                        cfg: RobustConfig, mats: Optional[GStepMatrices] = None) -> np.ndarray:
    """Unconstrained minimizer of ``c_q(u, .)``."""
    mats = mats if mats is not None else GStepMatrices.build(model, cost.q_y, cfg)
    u = _vec(u, model.m * model.N, "u")
    r = _vec(r, model.p * model.N, "r")
    return mats(r, model.kernel_vector(window, u))


def grad_g_quad(u, g, model: KernelPredictor, cost: CostSpec, cfg: RobustConfig,
                window: InitialWindow, r) -> np.ndarray:
    """Gradient of ``c_q`` with respect to ``g``."""
    k = model.kernel_vector(window, u)
    V = model.regularized_gram
    return (2 * cost.q_y * model.Y_F.T @ (model.Y_F @ g - r) + 2 * cfg.lambda_g * g
            + 2 * cfg.lambda_k_prime * V @ (V @ g - k))


def output_constraint_margin(cfg: RobustConfig, cost: CostSpec, g_unconstrained) -> float:
    """Tightening ``(rho2 / sqrt(q_y)) * B_g`` of the output box used by the polyhedral restriction."""
    rho2 = cfg.rho2 or 0.0
    if rho2 == 0.0:
        return 0.0
    B_g = cfg.g_bound if cfg.g_bound is not None else 2.0 * np.linalg.norm(g_unconstrained)
    return rho2 / np.sqrt(cost.q_y) * B_g


def solve_g_constrained(model: KernelPredictor, u, window: InitialWindow, r, cost: CostSpec,
                        cfg: RobustConfig, y_box: BoxSet,
                        mats: Optional[GStepMatrices] = None) -> np.ndarray:
    """Minimize ``c_q(u, .)`` subject to ``lower + m <= Y_F g <= upper - m``.

    The tightening ``m`` is :func:`output_constraint_margin`. If the closed-form
    minimizer already satisfies the box it is returned unchanged.

    Raises:
        InfeasibleError: The tightened box admits no ``g``.
    """
    import cvxpy as cp

    mats = mats if mats is not None else GStepMatrices.build(model, cost.q_y, cfg)
    u = _vec(u, model.m * model.N, "u")
    r = _vec(r, model.p * model.N, "r")
    k = model.kernel_vector(window, u)
    g_unc = mats(r, k)
    box = y_box.expand(model.p * model.N)
    margin = output_constraint_margin(cfg, cost, g_unc)
    lo, hi = box.lower + margin, box.upper - margin
    if np.any(lo > hi):
        raise InfeasibleError("tightened output box is empty; reduce rho2 or g_bound")
    y_unc = model.Y_F @ g_unc
    if np.all(y_unc >= lo) and np.all(y_unc <= hi):
        return g_unc
    # c_q(u, g) = ||R g - R g_unc||^2 + const, since R^T R is the normal matrix
    g = cp.Variable(model.H_c)
    Rm = mats.R
    obj = cp.Minimize(cp.sum_squares(Rm @ g - Rm @ g_unc))
    cons = []
    fin_lo, fin_hi = np.isfinite(lo), np.isfinite(hi)
    if fin_lo.any():
        cons.append(model.Y_F[fin_lo] @ g >= lo[fin_lo])
    if fin_hi.any():
        cons.append(model.Y_F[fin_hi] @ g <= hi[fin_hi])
    prob = cp.Problem(obj, cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.error.SolverError as exc:
        raise InfeasibleError(f"output-constrained g-step failed: {exc}") from exc
    if prob.status not in ("optimal", "optimal_inaccurate") or g.value is None:
        raise InfeasibleError(f"output-constrained g-step is {prob.status}")
    return np.asarray(g.value, dtype=float)


def grad_u(u, g, model: KernelPredictor, cost: CostSpec, cfg: RobustConfig,
           window: InitialWindow) -> np.ndarray:
    """Gradient of ``c_q`` with respect to ``u`` at fixed ``g``.

    ``2 R u - 2 lambda_k' J_k(u)^T (V g - k(u))``; at ``g = g*(u)`` this is
    also the gradient of the reduced cost (the ``g``-derivative vanishes there).
    """
    u = _vec(u, model.m * model.N, "u")
    g = _vec(g, model.H_c, "g")
    k, J = _kernel_terms(model, window, u)
    R = cost.input_weight(model.m, model.N)
    return 2.0 * R @ u - 2.0 * cfg.lambda_k_prime * J.T @ (model.regularized_gram @ g - k)


class _DescentLoop:
    """Projected gradient on a reduced cost ``f(u)`` with Armijo backtracking.

    ``evaluate(u)`` returns ``(cost, grad, state)``; ``state`` is whatever the
    caller needs afterwards (``g``, the prediction).
    """

    def __init__(self, gd: GDConfig, u_box: Optional[BoxSet]):
        self.gd = gd
        self.u_box = u_box

    def run(self, evaluate, u0):
        gd = self.gd
        u = project_box(u0, self.u_box)
        c, grad, state = evaluate(u)
        if not np.isfinite(c):
            raise SolverDivergence("non-finite cost at the initial point")
        trace = [c]
        it = 0
        while it < gd.i_max:
            it += 1
            a = gd.alpha
            while True:
                un = project_box(u - a * grad, self.u_box)
                cn, gn, sn = evaluate(un)
                if not gd.backtracking:
                    break
                if np.isfinite(cn) and cn <= c + gd.armijo * grad @ (un - u):
                    break
                a *= gd.shrink
                if a < gd.min_step:
                    # no decrease available along this direction: stay put
                    un, cn, gn, sn = u, c, grad, state
                    break
            if not np.isfinite(cn):
                raise SolverDivergence(
                    f"cost became non-finite at iteration {it}; use a smaller step size alpha"
                )
            done = abs(cn - c) < gd.xi
            u, c, grad, state = un, cn, gn, sn
            trace.append(c)
            if done:
                break
        return u, state, trace, it


class RoKDeePC:
    """Robust kernel DeePC controller on a fitted :class:`KernelPredictor`.

    ``M_r`` and ``M_k`` are computed once and reused at every solve.

    Args:
        model: Fitted kernel predictor (noisy data in practice).
        cost: Stage-cost weights.
        robust: Regularization weights; ``robust.gamma`` must match the model's.
        gd: Gradient-descent settings.
        u_box: Optional input box (per channel or per horizon entry).
        y_box: Optional output box, enforced through the ``g``-step.
        pinned: Which cone-form parameter is fixed when reporting equivalent
            parameters, as ``("rho2", value)`` or ``("rho1", value)``.
        diagnostics: Compute the equivalent parameters and stationarity
            residual after every solve.
    """

    name = "rokdeepc"

    def __init__(self, model: KernelPredictor, cost: CostSpec = CostSpec(),
                 robust: RobustConfig = RobustConfig(), gd: GDConfig = GDConfig(),
                 u_box: Optional[BoxSet] = None, y_box: Optional[BoxSet] = None,
                 pinned=("rho2", 0.0), diagnostics: bool = True):
        if abs(robust.gamma - model.gamma) > 1e-15 * max(1.0, model.gamma):
            raise ValueError(f"RobustConfig.gamma={robust.gamma} differs from model gamma={model.gamma}")
        self.model = model
        self.cost = cost
        self.robust = robust
        self.gd = gd
        self.u_box = u_box
        self.y_box = y_box
        self.pinned = pinned
        self.diagnostics = diagnostics
        self.mats = GStepMatrices.build(model, cost.q_y, robust)
        self.R = cost.input_weight(model.m, model.N)
        self._previous = None

    m = property(lambda self: self.model.m)
    p = property(lambda self: self.model.p)
    T_ini = property(lambda self: self.model.T_ini)
    N = property(lambda self: self.model.N)

    def reset(self):
        self._previous = None

    def g_step(self, u, window, r) -> np.ndarray:
        if self.y_box is None:
            return self.mats(r, self.model.kernel_vector(window, u))
        return solve_g_constrained(self.model, u, window, r, self.cost, self.robust,
                                   self.y_box, self.mats)

    def reduced(self, window: InitialWindow, r):
        """Closure ``u -> (c_q(u, g*(u)), grad, g*(u))``."""
        model, lk = self.model, self.robust.lambda_k_prime
        V = model.regularized_gram
        pre = np.concatenate([window.u_ini, window.y_ini])
        nu = model.m * model.N

        def evaluate(u):
            k, J = kern.kernel_vector_and_jacobian(model.spec, model.centers,
                                                   np.concatenate([pre, u]), nu)
            if self.y_box is None:
                g = self.mats(r, k)
            else:
                g = solve_g_constrained(model, u, window, r, self.cost, self.robust,
                                        self.y_box, self.mats)
            e = model.Y_F @ g - r
            res = V @ g - k
            c = u @ self.R @ u + self.cost.q_y * e @ e + self.robust.lambda_g * g @ g + lk * res @ res
            grad = 2.0 * self.R @ u - 2.0 * lk * J.T @ res
            return float(c), grad, g

        return evaluate

    def solve(self, window: InitialWindow, r, u0=None) -> SolveResult:
        model = self.model
        window.check(model.m, model.p, model.T_ini)
        r = _vec(r, model.p * model.N, "reference")
        if u0 is None:
            if self.gd.warm_start and self._previous is not None:
                u0 = shift_warm_start(self._previous, model.m)
            else:
                u0 = np.zeros(model.m * model.N)
        u, g, trace, it = _DescentLoop(self.gd, self.u_box).run(self.reduced(window, r), u0)
        self._previous = u
        result = SolveResult(u, g, trace, it, predicted=model.Y_F @ g)
        if self.diagnostics:
            result.diagnostics.update(self.diagnose(u, g, window, r))
        return result

    def diagnose(self, u, g, window: InitialWindow, r) -> dict:
        """Equivalent cone-form parameters, stationarity residual and cone-form cost at ``(u, g)``.

        Output-constrained solves are not refined or residual-checked, since
        their stationarity involves constraint multipliers.
        """
        from .diagnostics import equivalent_params, kkt_residual_socp, refine_g
        which, value = self.pinned
        if self.y_box is None:
            g = refine_g(g, u, self.model, self.cost, self.robust, window, r, self.mats)
        eq = equivalent_params(u, g, self.model, self.cost, self.robust, window, r,
                               **{which: value})
        out = eq.as_dict()
        if not eq.degenerate:
            if self.y_box is None:
                out["kkt_residual"] = kkt_residual_socp(
                    u, g, eq.lambda_k, eq.rho1, eq.rho2, self.model, self.cost, window, r,
                    relative=True)
            out["socp_cost"] = eval_cost_socp(u, np.asarray(g, dtype=float), self.model, self.cost,
                                              eq.lambda_k, eq.rho1, eq.rho2, window, r)
        return out


def rokdeepc_solve(model: KernelPredictor, window: InitialWindow, r, cost: CostSpec = CostSpec(),
                   robust: RobustConfig = RobustConfig(), gd: GDConfig = GDConfig(),
                   u_box=None, y_box=None, u0=None) -> SolveResult:
    """One-shot convenience wrapper around :class:`RoKDeePC`."""
    return RoKDeePC(model, cost, robust, gd, u_box, y_box).solve(window, r, u0)


class KernelMPC:
    """Certainty-equivalence kernel MPC.

    Uses the kernel predictor as if it were exact: ``y = W k(u)`` with
    ``W = Y_F (K + gamma I)^-1``, and minimizes ``l(u) + ||W k(u) - r||_Q^2`` by
    the same projected-gradient loop. This is the ``lambda_k' -> inf`` limit of
    the quadratic reformulation with ``lambda_g -> 0``; there is no
    robustifying term.
    """

    name = "kernel_mpc"

    def __init__(self, model: KernelPredictor, cost: CostSpec = CostSpec(), gd: GDConfig = GDConfig(),
                 u_box: Optional[BoxSet] = None):
        self.model = model
        self.cost = cost
        self.gd = gd
        self.u_box = u_box
        self.R = cost.input_weight(model.m, model.N)
        self._previous = None

    m = property(lambda self: self.model.m)
    p = property(lambda self: self.model.p)
    T_ini = property(lambda self: self.model.T_ini)
    N = property(lambda self: self.model.N)

    def reset(self):
        self._previous = None

    def solve(self, window: InitialWindow, r, u0=None) -> SolveResult:
        model = self.model
        window.check(model.m, model.p, model.T_ini)
        r = _vec(r, model.p * model.N, "reference")
        pre = np.concatenate([window.u_ini, window.y_ini])
        nu = model.m * model.N
        W, qy = model.W, self.cost.q_y

        def evaluate(u):
            k, J = kern.kernel_vector_and_jacobian(model.spec, model.centers,
                                                   np.concatenate([pre, u]), nu)
            y = W @ k
            e = y - r
            c = u @ self.R @ u + qy * e @ e
            grad = 2.0 * self.R @ u + 2.0 * qy * (W @ J).T @ e
            return float(c), grad, y

        if u0 is None:
            if self.gd.warm_start and self._previous is not None:
                u0 = shift_warm_start(self._previous, model.m)
            else:
                u0 = np.zeros(nu)
        u, y, trace, it = _DescentLoop(self.gd, self.u_box).run(evaluate, u0)
        self._previous = u
        return SolveResult(u, None, trace, it, predicted=y)
