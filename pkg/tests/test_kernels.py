import numpy as np
import pytest
from hypothesis import given, strategies as st

from rokdeepc import kernels as kern

SPECS = [kern.Polynomial(1.0, 3), kern.Gaussian(0.4), kern.Exponential(0.2),
         kern.Hybrid(0.4, past_dim=2)]
IDS = ["polynomial", "gaussian", "exponential", "hybrid"]


def fd_jacobian(spec, X, q, n_u, h=1e-6):
    J = np.zeros((X.shape[0], n_u))
    off = q.size - n_u
    for i in range(n_u):
        e = np.zeros_like(q)
        e[off + i] = h
        J[:, i] = (kern.kernel_vector(spec, X, q + e) - kern.kernel_vector(spec, X, q - e)) / (2 * h)
    return J


def test_point_values():
    x = np.array([0.3, -1.2, 0.5])
    assert kern.evaluate(kern.Gaussian(), x, x) == 1.0
    assert kern.evaluate(kern.Polynomial(1.0, 10), np.zeros(3), np.zeros(3)) == 1.0
    assert kern.evaluate(kern.Exponential(0.2), np.zeros(3), x) == 1.0
    assert kern.evaluate(kern.Exponential(0.2), x, np.zeros(3)) == 1.0


def test_invalid_parameters():
    with pytest.raises(ValueError):
        kern.Gaussian(0.0)
    with pytest.raises(ValueError):
        kern.Exponential(-1.0)
    with pytest.raises(ValueError):
        kern.Polynomial(1.0, 0)
    with pytest.raises(ValueError):
        kern.from_dict({"kind": "laplace"})


@pytest.mark.parametrize("spec", SPECS, ids=IDS)
def test_serialization_round_trip(spec):
    assert kern.from_dict(kern.to_dict(spec)) == spec


@pytest.mark.parametrize("spec", SPECS, ids=IDS)
def test_symmetry_many_pairs(spec):
    r = np.random.default_rng(0)
    X, Y = 0.5 * r.standard_normal((1000, 5)), 0.5 * r.standard_normal((1000, 5))
    for x, y in zip(X, Y):
        a, b = kern.evaluate(spec, x, y), kern.evaluate(spec, y, x)
        assert abs(a - b) <= 1e-12 * (1 + abs(a))


@pytest.mark.parametrize("spec", SPECS, ids=IDS)
def test_matrix_matches_scalar_loop(spec, rng):
    X = 0.5 * rng.standard_normal((7, 5))
    q = 0.5 * rng.standard_normal(5)
    loop = np.array([kern.evaluate(spec, x, q) for x in X])
    np.testing.assert_allclose(kern.kernel_vector(spec, X, q), loop, rtol=1e-13)


@pytest.mark.parametrize("spec", SPECS, ids=IDS)
@given(n=st.integers(1, 50), seed=st.integers(0, 2**32 - 1))
def test_gram_psd(spec, n, seed):
    r = np.random.default_rng(seed)
    X = 0.5 * r.standard_normal((n, 5))
    K = kern.gram(spec, X)
    np.testing.assert_array_equal(K, K.T)
    a = r.standard_normal(n)
    assert a @ K @ a >= -1e-8 * (a @ a) * np.linalg.norm(K, 2)


def test_gram_small_cases(rng):
    x = rng.standard_normal((1, 4))
    K = kern.gram(kern.Gaussian(), x)
    assert K.shape == (1, 1) and K[0, 0] == kern.evaluate(kern.Gaussian(), x[0], x[0])
    X = rng.standard_normal((3, 4))
    Kd = kern.gram(kern.Gaussian(), np.vstack([X, X[:1]]))
    np.testing.assert_array_equal(Kd[0], Kd[3])
    assert np.linalg.matrix_rank(Kd) < 4
    G = kern.gram(kern.Gaussian(), rng.standard_normal((20, 4)))
    assert np.linalg.eigvalsh(G).min() >= -1e-10
    with pytest.raises(ValueError):
        kern.gram(kern.Gaussian(), np.zeros((0, 3)))


def test_kernel_vector_special_queries(rng):
    X = rng.standard_normal((6, 4))
    k = kern.kernel_vector(kern.Gaussian(), X, X[2])
    assert k[2] == 1.0
    np.testing.assert_array_equal(kern.kernel_vector(kern.Exponential(), X, np.zeros(4)), np.ones(6))
    with pytest.raises(ValueError):
        kern.kernel_vector(kern.Gaussian(), X, np.zeros(3))


@pytest.mark.parametrize("spec", SPECS, ids=IDS)
def test_jacobian_finite_differences(spec):
    r = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        X = 0.5 * r.standard_normal((8, 5))
        q = 0.5 * r.standard_normal(5)
        J = kern.kernel_jacobian_u(spec, X, q, 3)
        Jfd = fd_jacobian(spec, X, q, 3)
        worst = max(worst, np.linalg.norm(J - Jfd) / max(np.linalg.norm(Jfd), 1e-12))
    assert worst <= 1e-5


def test_jacobian_special_rows(rng):
    X = rng.standard_normal((5, 5))
    J = kern.kernel_jacobian_u(kern.Gaussian(), X, X[3], 3)
    np.testing.assert_array_equal(J[3], np.zeros(3))
    hyb = kern.Hybrid(0.4, past_dim=2)
    for q in rng.standard_normal((3, 5)):
        np.testing.assert_array_equal(kern.kernel_jacobian_u(hyb, X, q, 3), X[:, 2:])
