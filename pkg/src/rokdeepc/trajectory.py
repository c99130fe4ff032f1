"""Input/output trajectories, block-Hankel matrices and past/future partitions.

Trajectories are stored time-major: column ``t`` of ``inputs`` is ``u_t`` and
column ``t`` of ``outputs`` is ``y_t``. Hankel columns are then contiguous
windows of the recorded signal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DimensionError(ValueError):
    """Raised when array shapes are inconsistent with the requested operation."""


class TrajectoryParseError(ValueError):
    """Raised when a trajectory CSV file is malformed."""


@dataclass(frozen=True)
class SignalTrajectory:
    """Recorded input/output time series.

    Attributes:
        inputs: Array of shape (m, T).
        outputs: Array of shape (p, T).
    """

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        if u.ndim != 2 or y.ndim != 2:
            raise DimensionError("inputs and outputs must be 2-D (channels x samples)")
        if u.shape[1] != y.shape[1]:
            raise DimensionError(
                f"inputs have {u.shape[1]} samples but outputs have {y.shape[1]}"
            )
        if u.shape[1] < 1:
            raise DimensionError("a trajectory needs at least one sample")
        u.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "outputs", y)

    @property
    def m(self) -> int:
        return self.inputs.shape[0]

    @property
    def p(self) -> int:
        return self.outputs.shape[0]

    @property
    def T(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class InitialWindow:
    """The most recent ``T_ini`` inputs and outputs, stacked time-major.

    ``u_ini`` has length ``m * T_ini`` and ``y_ini`` has length ``p * T_ini``.
    """

    u_ini: np.ndarray
    y_ini: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u_ini", np.asarray(self.u_ini, dtype=float).ravel())
        object.__setattr__(self, "y_ini", np.asarray(self.y_ini, dtype=float).ravel())

    @classmethod
    def zeros(cls, m: int, p: int, T_ini: int) -> "InitialWindow":
        return cls(np.zeros(m * T_ini), np.zeros(p * T_ini))

    @classmethod
    def from_history(cls, inputs, outputs, T_ini: int) -> "InitialWindow":
        """Build a window from the last ``T_ini`` columns of (m, t) / (p, t) arrays."""
        u = np.atleast_2d(np.asarray(inputs, dtype=float))
        y = np.atleast_2d(np.asarray(outputs, dtype=float))
        if u.shape[1] < T_ini or y.shape[1] < T_ini:
            raise DimensionError(f"need at least {T_ini} samples of history")
        return cls(u[:, -T_ini:].T.ravel(), y[:, -T_ini:].T.ravel())

    def regressor(self, u_future) -> np.ndarray:
        """Stack ``col(u_ini, y_ini, u)``, the layout used by the kernel centers."""
        return np.concatenate([self.u_ini, self.y_ini, np.asarray(u_future, dtype=float).ravel()])

    def check(self, m: int, p: int, T_ini: int):
        if self.u_ini.size != m * T_ini or self.y_ini.size != p * T_ini:
            raise DimensionError(
                f"window sizes ({self.u_ini.size}, {self.y_ini.size}) do not match "
                f"m*T_ini={m * T_ini}, p*T_ini={p * T_ini}"
            )


@dataclass(frozen=True)
class HankelPartition:
    """Past/future blocks of the depth ``T_ini + N`` Hankel matrices.

    Attributes:
        U_P: (m*T_ini, H_c) past inputs.
        Y_P: (p*T_ini, H_c) past outputs.
        U_F: (m*N, H_c) future inputs.
        Y_F: (p*N, H_c) future outputs.
    """

    U_P: np.ndarray
    Y_P: np.ndarray
    U_F: np.ndarray
    Y_F: np.ndarray
    T_ini: int
    N: int

    @property
    def H_c(self) -> int:
        return self.U_P.shape[1]

    @property
    def m(self) -> int:
        return self.U_P.shape[0] // self.T_ini

    @property
    def p(self) -> int:
        return self.Y_P.shape[0] // self.T_ini

    @property
    def regressors(self) -> np.ndarray:
        """All kernel regressors as rows: ``(H_c, (m+p)T_ini + mN)``."""
        return np.vstack([self.U_P, self.Y_P, self.U_F]).T

    def stacked(self) -> np.ndarray:
        """``col(U_P, Y_P, U_F, Y_F)``."""
        return np.vstack([self.U_P, self.Y_P, self.U_F, self.Y_F])

    def with_outputs(self, Y_P: np.ndarray, Y_F: np.ndarray) -> "HankelPartition":
        return HankelPartition(self.U_P, Y_P, self.U_F, Y_F, self.T_ini, self.N)


def build_hankel(series, depth: int) -> np.ndarray:
    """Block-Hankel matrix of a (q, T) series with ``depth`` block rows.

    Column ``j`` is ``col(s_j, ..., s_{j+depth-1})``; the result has shape
    ``(q*depth, T-depth+1)``.
    """
    s = np.atleast_2d(np.asarray(series, dtype=float))
    q, T = s.shape
    if depth < 1 or depth > T:
        raise DimensionError(f"depth {depth} must lie in [1, {T}]")
    windows = np.lib.stride_tricks.sliding_window_view(s, depth, axis=1)
    # windows: (q, T-depth+1, depth) -> rows ordered (time, channel)
    return np.ascontiguousarray(windows.transpose(2, 0, 1).reshape(q * depth, T - depth + 1))


def partition(traj: SignalTrajectory, T_ini: int, N: int) -> HankelPartition:
    if T_ini < 1 or N < 1:
        raise DimensionError("T_ini and N must be positive")
    if T_ini + N > traj.T:
        raise DimensionError(f"T_ini + N = {T_ini + N} exceeds trajectory length {traj.T}")
    L = T_ini + N
    Hu = build_hankel(traj.inputs, L)
    Hy = build_hankel(traj.outputs, L)
    mp, pp = traj.m * T_ini, traj.p * T_ini
    return HankelPartition(
        U_P=Hu[:mp], Y_P=Hy[:pp], U_F=Hu[mp:], Y_F=Hy[pp:], T_ini=T_ini, N=N
    )


def excitation_rank(part: HankelPartition) -> int:
    """Numerical rank of ``col(U_P, Y_P, U_F, Y_F)``.

    Singular values below ``max_dim * sigma_max * 1e-10`` count as zero.
    """
    H = part.stacked()
    sv = np.linalg.svd(H, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    tol = max(H.shape) * sv[0] * 1e-10
    return int(np.sum(sv > tol))


def column_sample(part: HankelPartition, j: int) -> np.ndarray:
    """Regressor ``x_j = col(U_P[:, j], Y_P[:, j], U_F[:, j])`` with 1-based ``j``."""
    if not 1 <= j <= part.H_c:
        raise IndexError(f"column index {j} outside [1, {part.H_c}]")
    c = j - 1
    return np.concatenate([part.U_P[:, c], part.Y_P[:, c], part.U_F[:, c]])


def save_csv(traj: SignalTrajectory, path) -> None:
    """Write a trajectory as ``m,p`` header line followed by one row per sample."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"{traj.m},{traj.p}\n")
        writer = csv.writer(fh)
        data = np.vstack([traj.inputs, traj.outputs]).T
        for row in data:
            writer.writerow([repr(float(v)) for v in row])


def load_csv(path) -> SignalTrajectory:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TrajectoryParseError(f"{path}: empty file") from None
        try:
            m, p = (int(v) for v in header)
        except ValueError:
            raise TrajectoryParseError(f"{path}: row 1: header must be 'm,p', got {header!r}") from None
        if m < 1 or p < 1:
            raise TrajectoryParseError(f"{path}: row 1: m and p must be positive")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != m + p:
                raise TrajectoryParseError(
                    f"{path}: row {lineno}: expected {m + p} fields, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise TrajectoryParseError(f"{path}: row {lineno}: non-numeric field") from None
    if not rows:
        raise TrajectoryParseError(f"{path}: no samples")
    data = np.array(rows).T
    return SignalTrajectory(data[:m], data[m:])
