"""Configuration dataclasses, errors and small helpers shared by the controllers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class SolverError(RuntimeError):
    """Base class for controller failures."""


class SolverDivergence(SolverError):
    pass


class InfeasibleError(SolverError):
    pass


@dataclass(frozen=True)
class CostSpec:
    """Stage-cost weights.

    ``l(u) = r_u * sum ||u_t||^2 + r_delta * sum_{t>=2} ||u_t - u_{t-1}||^2`` and
    ``Q = q_y * I``. The reference is passed to each solve separately because
    it changes at every receding-horizon step.
    """

    r_u: float = 1.0
    r_delta: float = 100.0
    q_y: float = 1000.0

    def __post_init__(self):
        for name in ("r_u", "r_delta", "q_y"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
        if self.r_u <= 0 or self.q_y <= 0:
            raise ValueError("r_u and q_y must be positive")
        if self.r_delta < 0:
            raise ValueError("r_delta must be nonnegative")

    def input_weight(self, m: int, N: int) -> np.ndarray:
        """Matrix ``R`` with ``l(u) = u^T R u`` for a stacked input of length ``m*N``."""
        D = np.kron(np.diff(np.eye(N), axis=0), np.eye(m))
        return self.r_u * np.eye(m * N) + self.r_delta * D.T @ D

    def q_norm(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(np.sqrt(self.q_y) * np.linalg.norm(v))


@dataclass(frozen=True)
class BoxSet:
    """Elementwise bounds; entries may be infinite."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        lo, hi = np.broadcast_arrays(lo, hi)
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo.copy())
        object.__setattr__(self, "upper", hi.copy())

    def expand(self, n: int) -> "BoxSet":
        """Tile per-channel bounds over a horizon so they cover ``n`` entries."""
        k = self.lower.size
        if k == n:
            return self
        if n % k:
            raise ValueError(f"box of size {k} cannot cover a vector of length {n}")
        return BoxSet(np.tile(self.lower, n // k), np.tile(self.upper, n // k))

    def contains(self, v, tol: float = 0.0) -> bool:
        v = np.asarray(v, dtype=float).ravel()
        b = self.expand(v.size)
        return bool(np.all(v >= b.lower - tol) and np.all(v <= b.upper + tol))


def project_box(u, box: Optional[BoxSet]) -> np.ndarray:
    """Clamp ``u`` elementwise into ``box`` (identity when ``box`` is None)."""
    u = np.asarray(u, dtype=float).ravel()
    if box is None:
        return u.copy()
    b = box.expand(u.size)
    return np.clip(u, b.lower, b.upper)


@dataclass(frozen=True)
class RobustConfig:
    """Regularization weights of the quadratic reformulation.

    Attributes:
        lambda_k_prime: Weight on ``||(K+gamma I) g - k||^2``.
        lambda_g: Ridge weight on ``g``.
        gamma: Gram-matrix regularization.
        lambda_k, rho1, rho2: Optional second-order-cone form parameters; used
            only when evaluating that cost directly.
        g_bound: Bound on ``||g||`` for the conservative output-constraint
            restriction; None means twice the unconstrained solution norm.
    """

    lambda_k_prime: float = 1e8
    lambda_g: float = 1.0
    gamma: float = 1e-2
    lambda_k: Optional[float] = None
    rho1: Optional[float] = None
    rho2: Optional[float] = None
    g_bound: Optional[float] = None

    def __post_init__(self):
        for name in ("lambda_k_prime", "lambda_g", "gamma"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number")
        for name in ("lambda_k", "rho1", "rho2", "g_bound"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive when given")


@dataclass(frozen=True)
class GDConfig:
    """Projected-gradient settings.

    Attributes:
        alpha: Initial step size (the trial step when backtracking).
        i_max: Iteration cap.
        xi: Stop when the cost changes by less than this.
        warm_start: Start from the previous solution shifted by one step.
        backtracking: Halve the step until an Armijo decrease holds.
    """

    alpha: float = 1e-2
    i_max: int = 200
    xi: float = 1e-6
    warm_start: bool = False
    backtracking: bool = True
    armijo: float = 1e-4
    shrink: float = 0.5
    min_step: float = 1e-14

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.xi > 0:
            raise ValueError("xi must be positive")
        if int(self.i_max) != self.i_max or self.i_max < 1:
            raise ValueError("i_max must be a positive integer")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")


@dataclass
class SolveResult:
    """Outcome of one receding-horizon solve.

    ``predicted`` is the model's output prediction for ``u_star``.
    ``diagnostics`` may hold the equivalent second-order-cone parameters, the
    stationarity residual and the cone-form cost.
    """

    u_star: np.ndarray
    g_star: Optional[np.ndarray]
    cost_trace: list
    iterations: int
    predicted: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def cost(self) -> float:
        return self.cost_trace[-1]


def shift_warm_start(u_prev, m: int, k: int = 1) -> np.ndarray:
    """Drop the first ``k`` inputs of ``u_prev`` and repeat its last input."""
    u = np.asarray(u_prev, dtype=float).reshape(-1, m)
    tail = np.repeat(u[-1:], k, axis=0)
    return np.vstack([u[k:], tail]).ravel()
