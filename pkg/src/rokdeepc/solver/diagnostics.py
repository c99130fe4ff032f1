"""Checks that tie the quadratic reformulation back to the robust min-max problem.

* :func:`equivalent_params` recovers the cone-form weights ``(lambda_k, rho1, rho2)``
  for which a quadratic-form minimizer ``g*`` is also a cone-form minimizer.
* :func:`kkt_residual_socp` evaluates the stationarity residual of the
  cone-form cost at ``g`` using explicit subgradient selections.
* :func:`worst_case_verify` samples data perturbations and compares them with
  the closed-form worst case and its rank-one maximizer.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from ..predict import KernelPredictor
from ..trajectory import InitialWindow
from .common import CostSpec, RobustConfig

DEGENERATE_TOL = 1e-12
EXT = np.longdouble


def _precise(model: KernelPredictor):
    """Extended-precision copies of ``V`` and ``Y_F``, cached on the model."""
    cache = model.__dict__.setdefault("_extended", {})
    if not cache:
        cache["V"] = model.regularized_gram.astype(EXT)
        cache["Y_F"] = model.Y_F.astype(EXT)
    return cache["V"], cache["Y_F"]


def refine_g(g, u, model: KernelPredictor, cost: CostSpec, cfg: RobustConfig, window: InitialWindow,
             r, mats=None, steps: int = 2) -> np.ndarray:
    """Polish a quadratic-form minimizer with extended-precision residuals.

    Each step evaluates the ``g``-gradient of ``c_q`` in ``np.longdouble`` and
    applies one Newton correction through the triangular factor of the
    ``g``-step. For large ``lambda_k'`` the gradient is a difference of terms of
    size ``lambda_k' ||V||^2 ||g||``, so double precision alone cannot certify
    stationarity below roughly ``1e-16 * lambda_k' ||V||^2``.

    Returns:
        The refined ``g`` as a ``np.longdouble`` array.
    """
    import scipy.linalg as sla
    from .rokdeepc import GStepMatrices

    mats = mats if mats is not None else GStepMatrices.build(model, cost.q_y, cfg)
    V, Y = _precise(model)
    k = model.kernel_vector(window, np.asarray(u, dtype=float).ravel()).astype(EXT)
    rL = np.asarray(r, dtype=float).ravel().astype(EXT)
    g = np.asarray(g).astype(EXT)
    for _ in range(steps):
        half_grad = (EXT(cost.q_y) * (Y.T @ (Y @ g - rL)) + EXT(cfg.lambda_g) * g
                     + EXT(cfg.lambda_k_prime) * (V.T @ (V @ g - k)))
        d = sla.solve_triangular(mats.R, sla.solve_triangular(mats.R, half_grad.astype(float),
                                                              trans="T"))
        g = g - d.astype(EXT)
    return g


def _norm(v) -> float:
    return float(np.sqrt(np.sum(v * v)))


@dataclass
class EquivalentParams:
    lambda_k: float
    rho1: float
    rho2: float
    exact_fit: bool
    degenerate: bool = False
    note: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def equivalent_params(u, g, model: KernelPredictor, cost: CostSpec, cfg: RobustConfig,
                      window: InitialWindow, r, rho1: Optional[float] = None,
                      rho2: Optional[float] = None) -> EquivalentParams:
    """Cone-form parameters matching a quadratic-form solution ``(u, g)``.

    Exactly one of ``rho1`` / ``rho2`` must be given (the pinned one); the
    other is solved for. When ``||Y_F g - r||_Q <= 1e-12`` the exact-fit branch
    drops the division by the tracking residual.

    A negative or undetermined free parameter is reported through the
    ``degenerate`` flag instead of raising. Residual norms are evaluated in
    extended precision; pass the output of :func:`refine_g` for a certified
    match with :func:`kkt_residual_socp`.
    """
    if (rho1 is None) == (rho2 is None):
        raise ValueError("pin exactly one of rho1 or rho2")
    V, Y = _precise(model)
    g = np.asarray(g).ravel().astype(EXT)
    u = np.asarray(u, dtype=float).ravel()
    r = np.asarray(r, dtype=float).ravel().astype(EXT)
    k = model.kernel_vector(window, u).astype(EXT)
    eQ = float(np.sqrt(cost.q_y)) * _norm(Y @ g - r)
    res = _norm(V @ g - k)
    gn = _norm(g)
    exact = eQ <= DEGENERATE_TOL
    scale = 1.0 if exact else eQ
    lambda_k = cfg.lambda_k_prime * res / scale
    rhs = cfg.lambda_g * gn / scale
    a = lambda_k * gn / np.sqrt(gn * gn + 1.0)
    if rho2 is not None:
        free = rhs - rho2
        if a == 0.0:
            ok = abs(free) <= DEGENERATE_TOL
            return EquivalentParams(lambda_k, 0.0, rho2, exact, degenerate=not ok,
                                    note="rho1 undetermined (g = 0 or lambda_k = 0)")
        rho1_val = free / a
        return EquivalentParams(lambda_k, rho1_val, rho2, exact, degenerate=rho1_val < 0,
                                note="negative rho1" if rho1_val < 0 else "")
    rho2_val = rhs - a * rho1
    return EquivalentParams(lambda_k, rho1, rho2_val, exact, degenerate=rho2_val < 0,
                            note="negative rho2" if rho2_val < 0 else "")


def socp_subgradients(u, g, lambda_k, rho1, rho2, model: KernelPredictor, cost: CostSpec,
                      window: InitialWindow, r):
    """Subgradient pieces ``(y, h, w, z)`` of the cone-form cost in ``g``.

    ``y`` comes from the tracking norm, ``h`` from ``lambda_k rho1 sqrt(||g||^2+1)``,
    ``w`` from ``rho2 ||g||`` and ``z`` from ``lambda_k ||V g - k||``. Zero is
    selected at each nondifferentiable point.
    """
    V, Y = _precise(model)
    g = np.asarray(g).ravel().astype(EXT)
    k = model.kernel_vector(window, np.asarray(u, dtype=float).ravel()).astype(EXT)
    e = Y @ g - np.asarray(r, dtype=float).ravel().astype(EXT)
    eQ = np.sqrt(EXT(cost.q_y) * (e @ e))
    y = EXT(cost.q_y) * (Y.T @ e) / eQ if eQ > DEGENERATE_TOL else np.zeros_like(g)
    gn = np.sqrt(g @ g)
    h = EXT(lambda_k) * EXT(rho1) * g / np.sqrt(gn * gn + 1)
    w = EXT(rho2) * g / gn if gn > 0 else np.zeros_like(g)
    res = V @ g - k
    rn = np.sqrt(res @ res)
    z = EXT(lambda_k) * (V.T @ res) / rn if rn > 0 else np.zeros_like(g)
    return y, h, w, z


def kkt_residual_socp(u, g, lambda_k, rho1, rho2, model: KernelPredictor, cost: CostSpec,
                      window: InitialWindow, r, multiplier_term=None, relative: bool = False) -> float:
    """Norm of the cone-form stationarity residual ``y + h + w + z (+ G^T mu)``.

    Args:
        multiplier_term: Contribution of active constraints, if any.
        relative: Divide by ``1 + ||y|| + ||h|| + ||w|| + ||z||``.
    """
    parts = socp_subgradients(u, g, lambda_k, rho1, rho2, model, cost, window, r)
    total = sum(parts)
    if multiplier_term is not None:
        total = total + np.asarray(multiplier_term).astype(EXT)
    val = _norm(total)
    if relative:
        val /= 1.0 + sum(_norm(p) for p in parts)
    return val


def lambda_k_threshold(model: KernelPredictor, cost: CostSpec) -> float:
    """Smallest ``lambda_k`` with ``lambda_k^2 I >= V^-1 Y_F^T Q Y_F V^-1`` (spectral norm)."""
    return float(np.sqrt(cost.q_y) * np.linalg.norm(model.W, 2))


@dataclass
class WorstCaseReport:
    nominal_k: float
    bound_k: float
    attained_k: float
    max_sampled_k: float
    nominal_y: float
    bound_y: float
    attained_y: float
    max_sampled_y: float
    n_samples: int

    @property
    def min_slack(self) -> float:
        return min(self.bound_k - self.max_sampled_k, self.bound_y - self.max_sampled_y)

    @property
    def attainment_gap(self) -> float:
        return max(abs(self.bound_k - self.attained_k), abs(self.bound_y - self.attained_y))


def _unit(v, rng):
    n = np.linalg.norm(v)
    if n > 0:
        return v / n
    w = rng.standard_normal(v.size)
    return w / np.linalg.norm(w)


def _ball_samples(shape, radius, n, rng, anchor=None):
    """Frobenius-ball samples: random directions at random radii, half near ``anchor``."""
    for i in range(n):
        D = rng.standard_normal(shape)
        if anchor is not None and i % 2:
            D = anchor / max(np.linalg.norm(anchor), 1e-300) + 0.05 * D / np.linalg.norm(D)
        nrm = np.linalg.norm(D)
        t = 1.0 if i % 3 == 0 else rng.uniform()
        yield D * (radius * t / nrm) if nrm > 0 else D


def worst_case_verify(u, g, model: KernelPredictor, cost: CostSpec, window: InitialWindow, r,
                      rho1: float, rho2: float, n_samples: int = 100, rng=None) -> WorstCaseReport:
    """Sample perturbations of the kernel and output data and compare with the closed form.

    Kernel block: ``sup ||(V + D_K) g - (k + D_k)|| = ||V g - k|| + rho1 sqrt(||g||^2+1)``
    over ``||[D_K D_k]||_F <= rho1``, attained by
    ``rho1 * w [g^T, -1] / sqrt(||g||^2+1)`` with ``w`` the unit residual direction.

    Output block: ``sup ||(Y_F + D_Y) g - r||_Q = ||Y_F g - r||_Q + rho2 ||g||`` over
    ``||Q^(1/2) D_Y||_F <= rho2``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    g = np.asarray(g, dtype=float).ravel()
    r = np.asarray(r, dtype=float).ravel()
    k = model.kernel_vector(window, np.asarray(u, dtype=float).ravel())
    V = model.regularized_gram
    gext = np.append(g, -1.0)
    res = V @ g - k
    gn = np.linalg.norm(g)
    nominal_k = float(np.linalg.norm(res))
    bound_k = nominal_k + rho1 * np.sqrt(gn * gn + 1.0)
    omega = _unit(res, rng)
    D_hat = rho1 * np.outer(omega, gext) / np.sqrt(gn * gn + 1.0)
    attained_k = float(np.linalg.norm(res + D_hat @ gext))
    max_k = max(float(np.linalg.norm(res + D @ gext))
                for D in _ball_samples(D_hat.shape, rho1, n_samples, rng, anchor=D_hat))

    sq = np.sqrt(cost.q_y)
    e = model.Y_F @ g - r
    nominal_y = cost.q_norm(e)
    bound_y = nominal_y + rho2 * gn
    omega_y = _unit(sq * e, rng)
    # Q^(1/2) D_Y = rho2 * omega g^T / ||g||
    M_hat = rho2 * np.outer(omega_y, g / gn) if gn > 0 else np.zeros((e.size, g.size))
    attained_y = float(np.linalg.norm(sq * e + M_hat @ g))
    max_y = max(float(np.linalg.norm(sq * e + M @ g))
                for M in _ball_samples(M_hat.shape, rho2, n_samples, rng,
                                       anchor=M_hat if gn > 0 else None))
    return WorstCaseReport(nominal_k, bound_k, attained_k, max_k,
                           nominal_y, bound_y, attained_y, max_y, n_samples)
