"""Kernel functions, Gram matrices and kernel Jacobians.

Regressors are laid out as ``col(u_ini, y_ini, u)``; the trailing ``mN``
coordinates are the future inputs, which is the block the controllers
differentiate with respect to. Center sets are arrays of shape ``(H_c, n_x)``,
one regressor per row.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Union

import numpy as np


@dataclass(frozen=True)
class Polynomial:
    """``(x^T z + offset)^degree``."""

    offset: float = 1.0
    degree: int = 10

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 1:
            raise ValueError("polynomial degree must be a positive integer")
        if self.offset < 0:
            # negative offsets break positive semidefiniteness
            raise ValueError("polynomial offset must be nonnegative")


@dataclass(frozen=True)
class Gaussian:
    """``exp(-||x - z||^2 / two_sigma_sq)``."""

    two_sigma_sq: float = 0.4

    def __post_init__(self):
        if not self.two_sigma_sq > 0:
            raise ValueError("two_sigma_sq must be positive")


@dataclass(frozen=True)
class Exponential:
    """``exp(x^T z / scale)``."""

    scale: float = 0.2

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")


@dataclass(frozen=True)
class Hybrid:
    """Gaussian on the past block plus inner product of the future-input block.

    ``past_dim`` is ``(m+p)*T_ini``; everything after it is treated as ``u``.
    The resulting predictor is affine in the future inputs.
    """

    two_sigma_sq: float = 0.4
    past_dim: int = 2

    def __post_init__(self):
        if not self.two_sigma_sq > 0:
            raise ValueError("two_sigma_sq must be positive")
        if self.past_dim < 0:
            raise ValueError("past_dim must be nonnegative")


KernelSpec = Union[Polynomial, Gaussian, Exponential, Hybrid]

_KINDS = {
    "polynomial": Polynomial,
    "gaussian": Gaussian,
    "exponential": Exponential,
    "hybrid": Hybrid,
}


def kernel_kind(spec: KernelSpec) -> str:
    for name, cls in _KINDS.items():
        if isinstance(spec, cls):
            return name
    raise TypeError(f"unknown kernel spec {spec!r}")


def to_dict(spec: KernelSpec) -> dict:
    return {"kind": kernel_kind(spec), "parameters": asdict(spec)}


def from_dict(d: dict) -> KernelSpec:
    kind = d.get("kind")
    if kind not in _KINDS:
        raise ValueError(f"unknown kernel kind {kind!r}; expected one of {sorted(_KINDS)}")
    return _KINDS[kind](**d.get("parameters", {}))


def _sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


def kernel_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    """Pairwise kernel values between the rows of ``A`` and the rows of ``B``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"length mismatch: {A.shape[1]} vs {B.shape[1]}")
    if isinstance(spec, Polynomial):
        return (A @ B.T + spec.offset) ** spec.degree
    if isinstance(spec, Gaussian):
        return np.exp(-_sqdist(A, B) / spec.two_sigma_sq)
    if isinstance(spec, Exponential):
        return np.exp(A @ B.T / spec.scale)
    if isinstance(spec, Hybrid):
        k = spec.past_dim
        if k > A.shape[1]:
            raise ValueError(f"hybrid past_dim {k} exceeds regressor length {A.shape[1]}")
        return np.exp(-_sqdist(A[:, :k], B[:, :k]) / spec.two_sigma_sq) + A[:, k:] @ B[:, k:].T
    raise TypeError(f"unknown kernel spec {spec!r}")


def evaluate(spec: KernelSpec, x, y) -> float:
    """Scalar kernel value ``K(x, y)``."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if isinstance(spec, Polynomial):
        return float((x @ y + spec.offset) ** spec.degree)
    if isinstance(spec, Gaussian):
        d = x - y
        return float(np.exp(-(d @ d) / spec.two_sigma_sq))
    if isinstance(spec, Exponential):
        return float(np.exp(x @ y / spec.scale))
    if isinstance(spec, Hybrid):
        k = spec.past_dim
        d = x[:k] - y[:k]
        return float(np.exp(-(d @ d) / spec.two_sigma_sq) + x[k:] @ y[k:])
    raise TypeError(f"unknown kernel spec {spec!r}")


def gram(spec: KernelSpec, centers) -> np.ndarray:
    """Symmetrized Gram matrix ``K[i, j] = K(x_i, x_j)``."""
    X = np.atleast_2d(np.asarray(centers, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("empty center set")
    K = kernel_matrix(spec, X, X)
    return 0.5 * (K + K.T)


def kernel_vector(spec: KernelSpec, centers, query) -> np.ndarray:
    """``k(q) = col(K(x_1, q), ..., K(x_H, q))``."""
    q = np.asarray(query, dtype=float).ravel()
    return kernel_matrix(spec, centers, q[None, :])[:, 0]


def kernel_vector_and_jacobian(spec: KernelSpec, centers, query, n_u: int):
    """Kernel vector and its Jacobian w.r.t. the trailing ``n_u`` query coordinates.

    Returns:
        (k, J) with ``k`` of shape (H,) and ``J`` of shape (H, n_u).
    """
    X = np.atleast_2d(np.asarray(centers, dtype=float))
    q = np.asarray(query, dtype=float).ravel()
    if q.size != X.shape[1]:
        raise ValueError(f"length mismatch: query {q.size} vs centers {X.shape[1]}")
    if not 0 <= n_u <= q.size:
        raise ValueError(f"n_u={n_u} outside [0, {q.size}]")
    Xu = X[:, q.size - n_u:]
    if isinstance(spec, Polynomial):
        s = X @ q + spec.offset
        k = s ** spec.degree
        J = (spec.degree * s ** (spec.degree - 1))[:, None] * Xu
    elif isinstance(spec, Gaussian):
        diff = X - q
        k = np.exp(-(diff * diff).sum(1) / spec.two_sigma_sq)
        J = (k * (2.0 / spec.two_sigma_sq))[:, None] * diff[:, q.size - n_u:]
    elif isinstance(spec, Exponential):
        k = np.exp(X @ q / spec.scale)
        J = (k / spec.scale)[:, None] * Xu
    elif isinstance(spec, Hybrid):
        if n_u > q.size - spec.past_dim:
            raise ValueError("hybrid Jacobian only defined on the future-input block")
        k = kernel_matrix(spec, X, q[None, :])[:, 0]
        J = Xu.copy()
    else:
        raise TypeError(f"unknown kernel spec {spec!r}")
    return k, J


def kernel_jacobian_u(spec: KernelSpec, centers, query, n_u: int) -> np.ndarray:
    """Row ``j`` is the gradient of ``K(x_j, .)`` at ``query`` restricted to ``u``."""
    return kernel_vector_and_jacobian(spec, centers, query, n_u)[1]
