"""Data-driven multi-step predictors.

Three predictors share the ``predict(window, u) -> y`` interface:

* :class:`LinearPredictor` -- least-squares map ``y = M col(u_ini, y_ini, u)``.
* :class:`KernelPredictor` -- kernel ridge regression ``y = Y_F (K + gamma I)^-1 k(.)``.
* :class:`KoopmanPredictor` -- EDMD model in a lifted state space, linear in ``u``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import kernels as kern
from .trajectory import HankelPartition, InitialWindow, SignalTrajectory, DimensionError


class FactorizationError(np.linalg.LinAlgError):
    pass


def cholesky_with_jitter(V: np.ndarray):
    """Cholesky factor of ``V``; retries once with ``1e-12 * trace / n`` jitter."""
    try:
        return sla.cho_factor(V, lower=True)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * np.trace(V) / V.shape[0]
        try:
            return sla.cho_factor(V + jitter * np.eye(V.shape[0]), lower=True)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(
                "K + gamma*I is not positive definite even after jitter; increase gamma"
            ) from exc


def _check_inputs(window: InitialWindow, u, m, p, T_ini, N):
    window.check(m, p, T_ini)
    u = np.asarray(u, dtype=float).ravel()
    if u.size != m * N:
        raise DimensionError(f"future input must have length m*N={m * N}, got {u.size}")
    return u


@dataclass
class LinearPredictor:
    M: np.ndarray
    m: int
    p: int
    T_ini: int
    N: int

    def predict(self, window: InitialWindow, u) -> np.ndarray:
        u = _check_inputs(window, u, self.m, self.p, self.T_ini, self.N)
        return self.M @ window.regressor(u)

    def to_dict(self) -> dict:
        return {"type": "linear", "M": self.M.tolist(),
                "dims": [self.m, self.p, self.T_ini, self.N]}


def fit_linear(part: HankelPartition) -> LinearPredictor:
    """``M = Y_F pinv(col(U_P, Y_P, U_F))``."""
    X = np.vstack([part.U_P, part.Y_P, part.U_F])
    M = part.Y_F @ np.linalg.pinv(X)
    return LinearPredictor(M, part.m, part.p, part.T_ini, part.N)


@dataclass
class KernelPredictor:
    """Kernel ridge predictor with cached factorization of ``K + gamma I``.

    ``centers`` holds one regressor per row; ``W = Y_F (K + gamma I)^-1``.
    """

    spec: kern.KernelSpec
    centers: np.ndarray
    Y_F: np.ndarray
    gamma: float
    m: int
    p: int
    T_ini: int
    N: int
    K: np.ndarray = field(init=False, repr=False)
    factor: tuple = field(init=False, repr=False)
    W: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        self.K = kern.gram(self.spec, self.centers)
        self.factor = cholesky_with_jitter(self.regularized_gram)
        self.W = sla.cho_solve(self.factor, self.Y_F.T).T

    @property
    def H_c(self) -> int:
        return self.centers.shape[0]

    @property
    def regularized_gram(self) -> np.ndarray:
        return self.K + self.gamma * np.eye(self.H_c)

    def kernel_vector(self, window: InitialWindow, u) -> np.ndarray:
        return kern.kernel_vector(self.spec, self.centers, window.regressor(u))

    def predict(self, window: InitialWindow, u) -> np.ndarray:
        u = _check_inputs(window, u, self.m, self.p, self.T_ini, self.N)
        return self.W @ self.kernel_vector(window, u)

    def to_dict(self) -> dict:
        return {"type": "kernel", "kernel": kern.to_dict(self.spec),
                "centers": self.centers.tolist(), "Y_F": self.Y_F.tolist(),
                "gamma": self.gamma, "dims": [self.m, self.p, self.T_ini, self.N]}


def fit_kernel(part: HankelPartition, spec: kern.KernelSpec, gamma: float) -> KernelPredictor:
    return KernelPredictor(spec, part.regressors, part.Y_F.copy(), gamma,
                           part.m, part.p, part.T_ini, part.N)


@dataclass
class LiftingDictionary:
    """Observables ``psi(x)``: constant, linear, quadratic monomials, thin-plate splines.

    Thin-plate functions are ``r^2 log r`` with ``r = ||x - c||``, taken as 0
    at ``r = 0``.
    """

    state_dim: int
    constant: bool = True
    linear: bool = True
    quadratic: bool = True
    centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float).reshape(-1, self.state_dim) \
            if np.size(self.centers) else np.zeros((0, self.state_dim))

    @classmethod
    def identity(cls, state_dim: int) -> "LiftingDictionary":
        return cls(state_dim, constant=False, linear=True, quadratic=False)

    @classmethod
    def thin_plate(cls, state_dim: int, n_centers: int, rng, box: float = 1.5) -> "LiftingDictionary":
        """Linear + quadratic terms, a constant, and random thin-plate centers in ``[-box, box]^d``."""
        centers = rng.uniform(-box, box, size=(n_centers, state_dim))
        return cls(state_dim, constant=True, linear=True, quadratic=True, centers=centers)

    @property
    def size(self) -> int:
        d = self.state_dim
        return (int(self.constant) + d * int(self.linear)
                + (d * (d + 1) // 2) * int(self.quadratic) + self.centers.shape[0])

    def __call__(self, X) -> np.ndarray:
        """Lift the rows of ``X`` (n, d) to (n, size); a 1-D input gives a 1-D output."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.state_dim:
            raise DimensionError(f"state dimension {X.shape[1]} != {self.state_dim}")
        cols = []
        if self.constant:
            cols.append(np.ones((X.shape[0], 1)))
        if self.linear:
            cols.append(X)
        if self.quadratic:
            i, j = np.triu_indices(self.state_dim)
            cols.append(X[:, i] * X[:, j])
        if self.centers.shape[0]:
            r2 = ((X[:, None, :] - self.centers[None, :, :]) ** 2).sum(-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                tps = np.where(r2 > 0, 0.5 * r2 * np.log(r2), 0.0)
            cols.append(tps)
        Z = np.hstack(cols) if cols else np.zeros((X.shape[0], 0))
        return Z[0] if single else Z

    def to_dict(self) -> dict:
        return {"state_dim": self.state_dim, "constant": self.constant, "linear": self.linear,
                "quadratic": self.quadratic, "centers": self.centers.tolist()}


@dataclass
class KoopmanModel:
    """Lifted linear dynamics ``z+ = A z + B u`` with output ``y = C z+``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    dictionary: LiftingDictionary


def fit_koopman(states, inputs, next_states, dictionary: LiftingDictionary,
                outputs=None) -> KoopmanModel:
    """EDMD least squares on snapshot pairs (rows are samples).

    ``C`` maps the lifted successor state to ``outputs`` (or to the successor
    state itself when ``outputs`` is None). Rank deficiency is handled by the
    pseudoinverse.
    """
    X = np.atleast_2d(np.asarray(states, dtype=float))
    U = np.asarray(inputs, dtype=float).reshape(X.shape[0], -1)
    Xn = np.atleast_2d(np.asarray(next_states, dtype=float))
    if not X.shape[0] == U.shape[0] == Xn.shape[0]:
        raise DimensionError("states, inputs and next_states need equal sample counts")
    if dictionary.size == 0:
        raise ValueError("dictionary is empty")
    Z, Zn = dictionary(X), dictionary(Xn)
    AB = Zn.T @ np.linalg.pinv(np.hstack([Z, U]).T)
    A, B = AB[:, : dictionary.size], AB[:, dictionary.size:]
    target = Xn if outputs is None else np.asarray(outputs, dtype=float).reshape(X.shape[0], -1)
    C = target.T @ np.linalg.pinv(Zn.T)
    return KoopmanModel(A, B, C, dictionary)


@dataclass
class KoopmanPredictor:
    """Koopman model driven by the window state ``x_t = col(u_ini, y_ini)``.

    The lifted state is propagated linearly over the whole input sequence
    (no re-lifting), so :func:`rollout` hands it the full sequence at once.
    """

    model: KoopmanModel
    m: int
    p: int
    T_ini: int
    N: int
    propagates_state = True

    def lifted_state(self, window: InitialWindow) -> np.ndarray:
        window.check(self.m, self.p, self.T_ini)
        return self.model.dictionary(np.concatenate([window.u_ini, window.y_ini]))

    def predict_from_lifted(self, z0, u) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(-1, self.m)
        z = np.asarray(z0, dtype=float)
        ys = []
        for ut in u:
            z = self.model.A @ z + self.model.B @ ut
            ys.append(self.model.C @ z)
        return np.concatenate(ys) if ys else np.zeros(0)

    def predict(self, window: InitialWindow, u) -> np.ndarray:
        u = np.asarray(u, dtype=float).ravel()
        if u.size % self.m:
            raise DimensionError(f"input length {u.size} not a multiple of m={self.m}")
        return self.predict_from_lifted(self.lifted_state(window), u)

    def condensed(self, horizon: int):
        """Matrices ``(Phi, Gamma)`` with ``y = Phi z0 + Gamma u`` over ``horizon`` steps."""
        A, B, C = self.model.A, self.model.B, self.model.C
        nz, p, m = A.shape[0], C.shape[0], B.shape[1]
        Phi = np.zeros((p * horizon, nz))
        Gamma = np.zeros((p * horizon, m * horizon))
        Ak = np.eye(nz)
        powers = []
        for i in range(horizon):
            powers.append(Ak)
            Ak = A @ Ak
            Phi[i * p:(i + 1) * p] = C @ Ak
        for i in range(horizon):
            for j in range(i + 1):
                Gamma[i * p:(i + 1) * p, j * m:(j + 1) * m] = C @ powers[i - j] @ B
        return Phi, Gamma

    def to_dict(self) -> dict:
        return {"type": "koopman", "A": self.model.A.tolist(), "B": self.model.B.tolist(),
                "C": self.model.C.tolist(), "dictionary": self.model.dictionary.to_dict(),
                "dims": [self.m, self.p, self.T_ini, self.N]}


def window_snapshots(traj: SignalTrajectory, T_ini: int):
    """Snapshot pairs for EDMD with state ``x_t = col(u_{t-T_ini..t-1}, y_{t-T_ini..t-1})``.

    Returns:
        (states, inputs, next_states, outputs) with one sample per row; the
        output row is ``y_t``.
    """
    u, y = traj.inputs, traj.outputs
    T = traj.T
    if T < T_ini + 1:
        raise DimensionError("trajectory too short for the requested window")

    def state(t):
        return np.concatenate([u[:, t - T_ini:t].T.ravel(), y[:, t - T_ini:t].T.ravel()])

    ts = range(T_ini, T)
    X = np.array([state(t) for t in ts])
    Xn = np.array([np.concatenate([u[:, t + 1 - T_ini:t + 1].T.ravel(),
                                   y[:, t + 1 - T_ini:t + 1].T.ravel()]) for t in ts])
    U = u[:, T_ini:T].T
    Y = y[:, T_ini:T].T
    return X, U, Xn, Y


def fit_koopman_predictor(traj: SignalTrajectory, T_ini: int, N: int,
                          dictionary: LiftingDictionary) -> KoopmanPredictor:
    X, U, Xn, Y = window_snapshots(traj, T_ini)
    model = fit_koopman(X, U, Xn, dictionary, outputs=Y)
    return KoopmanPredictor(model, traj.m, traj.p, T_ini, N)


def rollout(predictor, window: InitialWindow, u_long) -> np.ndarray:
    """Chain block predictions over ``u_long`` (length a multiple of ``m*N``).

    After each block the window is rebuilt from the latest ``T_ini`` applied
    inputs and *predicted* outputs.
    """
    m, p, T_ini, N = predictor.m, predictor.p, predictor.T_ini, predictor.N
    u_long = np.asarray(u_long, dtype=float).ravel()
    if u_long.size % (m * N):
        raise DimensionError(f"input length {u_long.size} is not a multiple of m*N={m * N}")
    if getattr(predictor, "propagates_state", False):
        return predictor.predict(window, u_long)
    u_hist = window.u_ini.reshape(T_ini, m).T
    y_hist = window.y_ini.reshape(T_ini, p).T
    out = []
    for b in range(u_long.size // (m * N)):
        ub = u_long[b * m * N:(b + 1) * m * N]
        w = InitialWindow.from_history(u_hist, y_hist, T_ini)
        yb = predictor.predict(w, ub)
        out.append(yb)
        u_hist = np.hstack([u_hist, ub.reshape(N, m).T])[:, -T_ini:]
        y_hist = np.hstack([y_hist, yb.reshape(N, p).T])[:, -T_ini:]
    return np.concatenate(out)


def prediction_error(predicted, actual) -> float:
    """Sum of squared output deviations."""
    a = np.asarray(predicted, dtype=float).ravel()
    b = np.asarray(actual, dtype=float).ravel()
    if a.size != b.size:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    d = a - b
    return float(d @ d)


def model_to_json(model) -> str:
    return json.dumps(model.to_dict())


def model_from_json(text: str):
    d = json.loads(text)
    m, p, T_ini, N = d["dims"]
    kind = d["type"]
    if kind == "linear":
        return LinearPredictor(np.array(d["M"], dtype=float), m, p, T_ini, N)
    if kind == "kernel":
        return KernelPredictor(kern.from_dict(d["kernel"]), np.array(d["centers"], dtype=float),
                               np.array(d["Y_F"], dtype=float), d["gamma"], m, p, T_ini, N)
    if kind == "koopman":
        dd = d["dictionary"]
        dictionary = LiftingDictionary(dd["state_dim"], dd["constant"], dd["linear"],
                                       dd["quadratic"], np.array(dd["centers"], dtype=float))
        model = KoopmanModel(np.array(d["A"], dtype=float), np.array(d["B"], dtype=float),
                             np.array(d["C"], dtype=float), dictionary)
        return KoopmanPredictor(model, m, p, T_ini, N)
    raise ValueError(f"unknown model type {kind!r}")
