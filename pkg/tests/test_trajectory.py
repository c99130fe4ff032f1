import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from rokdeepc.plant import ExcitationSignal, collect_data, random_lti
from rokdeepc.trajectory import (DimensionError, InitialWindow, SignalTrajectory,
                                 TrajectoryParseError, build_hankel, column_sample,
                                 excitation_rank, load_csv, partition, save_csv)


def window_oracle(series, L):
    """Brute-force Hankel: stack windows by explicit loops."""
    q, T = series.shape
    cols = []
    for j in range(T - L + 1):
        cols.append(np.concatenate([series[:, j + i] for i in range(L)]))
    return np.array(cols).T


def test_hankel_small_example():
    H = build_hankel([[1, 2, 3, 4]], 2)
    np.testing.assert_array_equal(H, [[1, 2, 3], [2, 3, 4]])


def test_hankel_constant_series():
    H = build_hankel(np.full((2, 9), 3.5), 4)
    assert H.shape == (8, 6)
    assert np.all(H == 3.5)


def test_hankel_matches_window_oracle(rng):
    s = rng.standard_normal((2, 17))
    np.testing.assert_array_equal(build_hankel(s, 3), window_oracle(s, 3))


def test_hankel_depth_out_of_range():
    with pytest.raises(DimensionError):
        build_hankel(np.zeros((1, 4)), 5)
    with pytest.raises(DimensionError):
        build_hankel(np.zeros((1, 4)), 0)


@given(q=st.integers(1, 3), T=st.integers(2, 30), data=st.data())
def test_hankel_antidiagonal_constancy(q, T, data):
    L = data.draw(st.integers(1, T))
    s = data.draw(arrays(float, (q, T), elements=st.floats(-1e3, 1e3)))
    H = build_hankel(s, L)
    for i in range(L - 1):
        np.testing.assert_array_equal(H[(i + 1) * q:(i + 2) * q, :-1], H[i * q:(i + 1) * q, 1:])


@given(T=st.integers(3, 40), T_ini=st.integers(1, 3), N=st.integers(1, 4),
       seed=st.integers(0, 2**32 - 1))
def test_partition_restacks_to_hankel(T, T_ini, N, seed):
    if T_ini + N > T:
        return
    r = np.random.default_rng(seed)
    m, p = 2, 1
    traj = SignalTrajectory(r.standard_normal((m, T)), r.standard_normal((p, T)))
    part = partition(traj, T_ini, N)
    L = T_ini + N
    Hu, Hy = build_hankel(traj.inputs, L), build_hankel(traj.outputs, L)
    np.testing.assert_array_equal(np.vstack([part.U_P, part.U_F]), Hu)
    np.testing.assert_array_equal(np.vstack([part.Y_P, part.Y_F]), Hy)
    assert part.H_c == T - L + 1


def test_partition_example_sizes():
    traj = SignalTrajectory(np.zeros((1, 600)), np.zeros((1, 600)))
    assert partition(traj, 1, 5).H_c == 595
    short = SignalTrajectory(np.zeros((1, 6)), np.zeros((1, 6)))
    assert partition(short, 1, 5).H_c == 1
    with pytest.raises(DimensionError):
        partition(SignalTrajectory(np.zeros((1, 5)), np.zeros((1, 5))), 1, 5)


def test_excitation_rank_lti_known_order():
    r = np.random.default_rng(7)
    for n in (1, 2, 3, 4, 5):
        plant = random_lti(n, 1, 1, r)
        clean, _ = collect_data(plant, ExcitationSignal(0.0, 1.0, int(r.integers(1 << 30))), 200)
        part = partition(clean, 2, 4)
        assert excitation_rank(part) == 1 * (2 + 4) + n


def test_excitation_rank_zero_and_generic(rng):
    zero = SignalTrajectory(np.zeros((1, 30)), np.zeros((1, 30)))
    assert excitation_rank(partition(zero, 1, 2)) == 0
    generic = SignalTrajectory(rng.standard_normal((1, 60)), rng.standard_normal((1, 60)))
    part = partition(generic, 2, 3)
    assert excitation_rank(part) == part.stacked().shape[0]


def test_column_sample_windows(rng):
    m, p, T_ini, N = 2, 1, 2, 3
    traj = SignalTrajectory(rng.standard_normal((m, 20)), rng.standard_normal((p, 20)))
    part = partition(traj, T_ini, N)
    x1 = column_sample(part, 1)
    expected = np.concatenate([traj.inputs[:, :T_ini].T.ravel(), traj.outputs[:, :T_ini].T.ravel(),
                               traj.inputs[:, T_ini:T_ini + N].T.ravel()])
    np.testing.assert_array_equal(x1, expected)
    assert x1.size == (m + p) * T_ini + m * N
    j = part.H_c
    last = np.concatenate([traj.inputs[:, j - 1:j - 1 + T_ini].T.ravel(),
                           traj.outputs[:, j - 1:j - 1 + T_ini].T.ravel(),
                           traj.inputs[:, j - 1 + T_ini:j - 1 + T_ini + N].T.ravel()])
    np.testing.assert_array_equal(column_sample(part, j), last)
    np.testing.assert_array_equal(part.regressors[j - 1], last)
    with pytest.raises(IndexError):
        column_sample(part, 0)


def test_csv_round_trip(tmp_path, rng):
    traj = SignalTrajectory(rng.standard_normal((2, 600)), rng.standard_normal((1, 600)) * 1e-7)
    path = tmp_path / "t.csv"
    save_csv(traj, path)
    back = load_csv(path)
    assert back.T == 600 and (back.m, back.p) == (2, 1)
    np.testing.assert_array_equal(back.inputs, traj.inputs)
    np.testing.assert_array_equal(back.outputs, traj.outputs)


def test_csv_errors_name_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,1\n0.1,0.2\n0.3\n")
    with pytest.raises(TrajectoryParseError, match="row 3"):
        load_csv(path)
    path.write_text("x,1\n")
    with pytest.raises(TrajectoryParseError, match="row 1"):
        load_csv(path)
    path.write_text("")
    with pytest.raises(TrajectoryParseError):
        load_csv(path)


def test_trajectory_is_read_only_and_validated(rng):
    traj = SignalTrajectory(rng.standard_normal(5), rng.standard_normal(5))
    with pytest.raises(ValueError):
        traj.inputs[0, 0] = 1.0
    with pytest.raises(DimensionError):
        SignalTrajectory(np.zeros((1, 4)), np.zeros((1, 5)))


def test_initial_window_from_history():
    U = np.arange(10.0).reshape(2, 5)
    Y = np.arange(5.0)[None, :]
    w = InitialWindow.from_history(U, Y, 2)
    np.testing.assert_array_equal(w.u_ini, [3, 8, 4, 9])
    np.testing.assert_array_equal(w.y_ini, [3, 4])
    np.testing.assert_array_equal(w.regressor([1, 2]), [3, 8, 4, 9, 3, 4, 1, 2])
    with pytest.raises(DimensionError):
        w.check(1, 1, 2)
