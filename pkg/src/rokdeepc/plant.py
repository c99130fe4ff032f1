"""Simulated plants, excitation signals and measurement noise."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .trajectory import SignalTrajectory


def make_rng(seed) -> np.random.Generator:
    """Counter-based 64-bit generator (Philox) for reproducible streams."""
    return np.random.Generator(np.random.Philox(seed))


class PolynomialSISOPlant:
    """``y_t = 4 y_{t-1} u_{t-1} - 0.5 y_{t-1} + 2 u_{t-1} u_t + u_t``."""

    m = 1
    p = 1

    def __init__(self, y_prev: float = 0.0, u_prev: float = 0.0):
        self.initial = (float(y_prev), float(u_prev))
        self.reset()

    def reset(self):
        self.y_prev, self.u_prev = self.initial

    def step(self, u) -> np.ndarray:
        ut = float(np.asarray(u, dtype=float).ravel()[0])
        if not np.isfinite(ut):
            raise ValueError(f"non-finite input {ut}")
        yp, up = self.y_prev, self.u_prev
        yt = 4.0 * yp * up - 0.5 * yp + 2.0 * up * ut + ut
        self.y_prev, self.u_prev = yt, ut
        return np.array([yt])

    def copy(self) -> "PolynomialSISOPlant":
        return copy.deepcopy(self)


class LTIPlant:
    """``x+ = A x + B u``, ``y = C x + D u``."""

    def __init__(self, A, B, C, D=None, x0=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        self.C = np.atleast_2d(np.asarray(C, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape[0] != n or self.C.shape[1] != n:
            raise ValueError(
                f"inconsistent shapes A{self.A.shape} B{self.B.shape} C{self.C.shape}"
            )
        self.D = (
            np.zeros((self.C.shape[0], self.B.shape[1]))
            if D is None
            else np.atleast_2d(np.asarray(D, dtype=float))
        )
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise ValueError(f"D must have shape {(self.C.shape[0], self.B.shape[1])}")
        self.x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
        self.reset()

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    @property
    def stable(self) -> bool:
        return self.spectral_radius < 1.0

    def reset(self):
        self.x = self.x0.copy()

    def step(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float).ravel()
        if u.size != self.m:
            raise ValueError(f"expected input of size {self.m}, got {u.size}")
        if not np.all(np.isfinite(u)):
            raise ValueError("non-finite input")
        y = self.C @ self.x + self.D @ u
        self.x = self.A @ self.x + self.B @ u
        return y

    def copy(self) -> "LTIPlant":
        return copy.deepcopy(self)


def random_lti(n: int, m: int, p: int, rng, radius: float = 0.9, feedthrough: bool = True) -> LTIPlant:
    """Random stable LTI plant; generic draws are controllable and observable."""
    A = rng.standard_normal((n, n))
    A *= radius * rng.uniform(0.3, 1.0) / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-12)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    D = rng.standard_normal((p, m)) if feedthrough else np.zeros((p, m))
    return LTIPlant(A, B, C, D)


@dataclass
class ExcitationSignal:
    """White Gaussian excitation with given mean and variance."""

    mean: float = 0.0
    variance: float = 0.01
    seed: int = 0

    def sample(self, T: int, m: int = 1) -> np.ndarray:
        rng = make_rng(self.seed)
        return self.mean + np.sqrt(self.variance) * rng.standard_normal((m, T))


@dataclass
class NoiseModel:
    """Additive white Gaussian measurement noise."""

    variance: float = 0.0
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("noise variance must be nonnegative")
        self._rng = make_rng(self.seed)

    def sample(self, shape) -> np.ndarray:
        if self.variance == 0:
            return np.zeros(shape)
        return np.sqrt(self.variance) * self._rng.standard_normal(shape)


def simulate(plant, inputs) -> np.ndarray:
    """Drive ``plant`` with an (m, T) input array and return the (p, T) outputs."""
    u = np.atleast_2d(np.asarray(inputs, dtype=float))
    return np.column_stack([plant.step(u[:, t]) for t in range(u.shape[1])])


def collect_data(plant, excitation: ExcitationSignal, T: int, noise: NoiseModel | None = None):
    """Excite ``plant`` from its reset state for ``T`` samples.

    Returns:
        (clean, measured) trajectories; inputs are identical in both.
    """
    if T < 1:
        raise ValueError("T must be positive")
    plant.reset()
    u = excitation.sample(T, plant.m)
    y = simulate(plant, u)
    noise = noise if noise is not None else NoiseModel(0.0)
    y_meas = y + noise.sample(y.shape)
    return SignalTrajectory(u, y), SignalTrajectory(u, y_meas)


def load_power(dU: float) -> tuple[float, float]:
    """Static nonlinear load ``(P_Load, Q_Load)`` in per-unit at ``U = 1 + dU``."""
    U = 1.0 + dU
    if U <= 0:
        raise ValueError(f"voltage magnitude must be positive, got {U}")
    P = 0.3 + 0.2 * U**3 + 10.0 * dU**2 + 5.0 * dU
    Q = 0.04 + 8.0 * dU**2 + 2.0 * dU
    return P, Q


def make_reference(steps: int, changes=(), initial: float = 0.0) -> np.ndarray:
    """Piecewise-constant reference.

    Args:
        steps: Number of samples.
        changes: Sequence of ``(t, level)`` pairs with increasing ``t``; the
            signal switches to ``level`` at sample ``t``.
        initial: Level before the first change.
    """
    r = np.full(steps, float(initial))
    last = -1
    for t, level in changes:
        if t <= last:
            raise ValueError("reference breakpoints must be strictly increasing")
        if t < 0:
            raise ValueError("breakpoints must be nonnegative")
        r[int(t):] = level
        last = t
    return r


def step_profile_reference(dt: float = 0.002, duration: float = 0.4,
                           times=(0.1, 0.3), levels=(0.1, 0.05)) -> np.ndarray:
    """Step reference 0 -> 0.1 at 0.1 s -> 0.05 at 0.3 s, sampled every ``dt``."""
    steps = int(round(duration / dt))
    changes = [(int(round(t / dt)), lv) for t, lv in zip(times, levels)]
    return make_reference(steps, changes)
