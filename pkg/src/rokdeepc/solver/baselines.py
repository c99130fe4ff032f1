"""Baseline controllers: regularized DeePC and Koopman MPC."""

from __future__ import annotations

from typing import Optional

import numpy as np
import scipy.linalg as sla

from ..predict import KoopmanPredictor
from ..trajectory import DimensionError, HankelPartition, InitialWindow
from .common import BoxSet, CostSpec, InfeasibleError, SolveResult, SolverError


class DeePC:
    """DeePC with quadratic regularization.

    Minimizes ``l(U_F g) + ||Y_F g - r||_Q^2 + lambda_g ||g||^2 + lambda_y ||Y_P g - y_ini||^2``
    subject to ``U_P g = u_ini``. Without boxes this is an equality-constrained
    ridge problem whose KKT matrix is factorized once; with boxes on ``u`` or
    ``y`` the same problem is handed to a QP solver.
    """

    name = "deepc"

    def __init__(self, part: HankelPartition, cost: CostSpec = CostSpec(), lambda_g: float = 1.0,
                 lambda_y: float = 1e5, u_box: Optional[BoxSet] = None,
                 y_box: Optional[BoxSet] = None):
        if lambda_g <= 0 or lambda_y <= 0:
            raise ValueError("lambda_g and lambda_y must be positive")
        self.part = part
        self.cost = cost
        self.lambda_g = lambda_g
        self.lambda_y = lambda_y
        self.u_box = u_box
        self.y_box = y_box
        R = cost.input_weight(part.m, part.N)
        self.R = R
        H = part.H_c
        self.P = (part.U_F.T @ R @ part.U_F + cost.q_y * part.Y_F.T @ part.Y_F
                  + lambda_g * np.eye(H) + lambda_y * part.Y_P.T @ part.Y_P)
        A = part.U_P
        kkt = np.block([[2 * self.P, A.T], [A, np.zeros((A.shape[0], A.shape[0]))]])
        self._lu = sla.lu_factor(kkt)
        self._qp = None

    m = property(lambda self: self.part.m)
    p = property(lambda self: self.part.p)
    T_ini = property(lambda self: self.part.T_ini)
    N = property(lambda self: self.part.N)

    def reset(self):
        pass

    def objective(self, g, window: InitialWindow, r) -> float:
        part = self.part
        u = part.U_F @ g
        e = part.Y_F @ g - r
        s = part.Y_P @ g - window.y_ini
        return float(u @ self.R @ u + self.cost.q_y * e @ e + self.lambda_g * g @ g
                     + self.lambda_y * s @ s)

    def _solve_unconstrained(self, window, r):
        part = self.part
        b = 2 * (self.cost.q_y * part.Y_F.T @ r + self.lambda_y * part.Y_P.T @ window.y_ini)
        sol = sla.lu_solve(self._lu, np.concatenate([b, window.u_ini]))
        g = sol[: part.H_c]
        if not np.all(np.isfinite(g)) or np.linalg.norm(part.U_P @ g - window.u_ini) > 1e-6 * (
                1 + np.linalg.norm(window.u_ini)):
            raise InfeasibleError("U_P g = u_ini has no solution for this data")
        return g

    def _solve_boxed(self, window, r):
        import cvxpy as cp
        part = self.part
        if self._qp is None:
            g = cp.Variable(part.H_c)
            u_ini = cp.Parameter(part.U_P.shape[0])
            y_ini = cp.Parameter(part.Y_P.shape[0])
            ref = cp.Parameter(part.Y_F.shape[0])
            L = np.linalg.cholesky(self.R)
            obj = (cp.sum_squares(L.T @ part.U_F @ g)
                   + self.cost.q_y * cp.sum_squares(part.Y_F @ g - ref)
                   + self.lambda_g * cp.sum_squares(g)
                   + self.lambda_y * cp.sum_squares(part.Y_P @ g - y_ini))
            cons = [part.U_P @ g == u_ini]
            for box, mat in ((self.u_box, part.U_F), (self.y_box, part.Y_F)):
                if box is None:
                    continue
                b = box.expand(mat.shape[0])
                lo, hi = np.isfinite(b.lower), np.isfinite(b.upper)
                if lo.any():
                    cons.append(mat[lo] @ g >= b.lower[lo])
                if hi.any():
                    cons.append(mat[hi] @ g <= b.upper[hi])
            self._qp = (cp.Problem(cp.Minimize(obj), cons), g, u_ini, y_ini, ref)
        prob, g, u_ini, y_ini, ref = self._qp
        u_ini.value, y_ini.value, ref.value = window.u_ini, window.y_ini, r
        try:
            prob.solve(solver=cp.CLARABEL)
        except cp.error.SolverError as exc:
            raise SolverError(f"DeePC QP failed: {exc}") from exc
        if prob.status not in ("optimal", "optimal_inaccurate") or g.value is None:
            raise InfeasibleError(f"DeePC QP is {prob.status}")
        return np.asarray(g.value, dtype=float)

    def solve(self, window: InitialWindow, r, u0=None) -> SolveResult:
        part = self.part
        window.check(part.m, part.p, part.T_ini)
        r = np.asarray(r, dtype=float).ravel()
        if r.size != part.Y_F.shape[0]:
            raise DimensionError(f"reference must have length {part.Y_F.shape[0]}")
        if self.u_box is None and self.y_box is None:
            g = self._solve_unconstrained(window, r)
        else:
            g = self._solve_boxed(window, r)
        return SolveResult(part.U_F @ g, g, [self.objective(g, window, r)], 1,
                           predicted=part.Y_F @ g)


class KoopmanMPC:
    """MPC on the lifted linear model ``y = Phi z0 + Gamma u``.

    Unconstrained problems are solved in closed form; an input box switches to
    projected gradient with step ``1/L``.
    """

    name = "koopman_mpc"

    def __init__(self, predictor: KoopmanPredictor, cost: CostSpec = CostSpec(),
                 u_box: Optional[BoxSet] = None, max_iter: int = 5000, tol: float = 1e-10):
        self.predictor = predictor
        self.cost = cost
        self.u_box = u_box
        self.max_iter = max_iter
        self.tol = tol
        N = predictor.N
        self.Phi, self.Gamma = predictor.condensed(N)
        self.R = cost.input_weight(predictor.m, N)
        self.H = self.R + cost.q_y * self.Gamma.T @ self.Gamma
        self._chol = sla.cho_factor(self.H)
        self.L = 2.0 * float(np.linalg.eigvalsh(self.H)[-1])

    m = property(lambda self: self.predictor.m)
    p = property(lambda self: self.predictor.p)
    T_ini = property(lambda self: self.predictor.T_ini)
    N = property(lambda self: self.predictor.N)

    def reset(self):
        pass

    def objective(self, u, z0, r) -> float:
        e = self.Phi @ z0 + self.Gamma @ u - r
        return float(u @ self.R @ u + self.cost.q_y * e @ e)

    def solve_lifted(self, z0, r) -> SolveResult:
        z0 = np.asarray(z0, dtype=float).ravel()
        r = np.asarray(r, dtype=float).ravel()
        lin = self.cost.q_y * self.Gamma.T @ (r - self.Phi @ z0)
        u = sla.cho_solve(self._chol, lin)
        trace, it = [self.objective(u, z0, r)], 1
        if self.u_box is not None and not self.u_box.contains(u):
            from .common import project_box
            u = project_box(u, self.u_box)
            trace = [self.objective(u, z0, r)]
            for it in range(1, self.max_iter + 1):
                grad = 2.0 * (self.H @ u - lin)
                un = project_box(u - grad / self.L, self.u_box)
                step = np.linalg.norm(un - u)
                u = un
                trace.append(self.objective(u, z0, r))
                if step < self.tol:
                    break
        y = self.Phi @ z0 + self.Gamma @ u
        return SolveResult(u, None, trace, it, predicted=y)

    def solve(self, window: InitialWindow, r, u0=None) -> SolveResult:
        return self.solve_lifted(self.predictor.lifted_state(window), r)
