import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ifpp.boundary import (Boundary, check_B0, landmarks, left_limsup, read_boundary_csv,
                           usc_envelope, write_boundary_csv)
from ifpp.errors import DomainError, FormatError


def punctured():
    return Boundary.linear([0, 2], [0, 0], points=[(1.0, -1.0)])


def test_envelope_fills_puncture():
    b = punctured()
    assert b(1.0)[0] == -1.0
    assert usc_envelope(b, 1.0) == 0.0


def test_envelope_of_continuous_is_identity():
    b = Boundary.linear([0, 0.5, 1], [0, 1, -0.5])
    t = np.linspace(0, 1, 101)
    assert np.array_equal(b.envelope(t), b(t))
    assert np.array_equal(left_limsup(b, t), b(t))


def test_envelope_at_downward_jump():
    b = Boundary.piecewise_constant([0, 1], [0, -2], horizon=2)
    assert usc_envelope(b, 1.0) == 0.0
    assert np.all(b.envelope(np.array([1.2, 1.5, 2.0])) == -2)
    assert left_limsup(b, 1.0) == 0.0 and b(1.0)[0] == -2


def test_upward_jump_left_limsup():
    b = Boundary.piecewise_constant([0, 1], [0, 1], horizon=2)
    assert left_limsup(b, 1.0) == 0.0
    assert usc_envelope(b, 1.0) == 1.0


def test_envelope_idempotent():
    b = Boundary.piecewise_constant([0, 0.3, 0.7], [0.0, -1.0, 0.5], horizon=1,
                                    points=[(0.5, 2.0)])
    t = np.linspace(0, 1, 1001)
    env = b.envelope(t)
    again = Boundary.linear(t, env, 1.0).envelope(t)
    assert np.array_equal(np.maximum(env, again), env)
    # the envelope of the envelope at the sample points is the envelope itself
    assert np.array_equal(again[np.isin(t, [0.3, 0.5, 0.7])], env[np.isin(t, [0.3, 0.5, 0.7])])


def test_domain_errors():
    with pytest.raises(DomainError):
        Boundary.constant(0.0, 1.0)(1.5)
    with pytest.raises(FormatError):
        Boundary.linear([0, 0], [1, 2], horizon=1.0)


@pytest.mark.parametrize("n", [0, 2, 5])
def test_landmarks_of_simple_shapes(n):
    h = 2.0 ** -n
    i = np.arange(2 ** n)
    assert np.allclose(landmarks(Boundary.linear([0, 1], [0, 1]), n).times, (i + 1) * h)
    assert np.allclose(landmarks(Boundary.linear([0, 1], [0, -1]), n).times, i * h)
    assert np.allclose(landmarks(Boundary.constant(0.3, 1.0), n).times, i * h)


def rough_boundaries():
    yield Boundary.linear([0, 0.3, 0.55, 1], [0, 1, -0.5, 0.2])
    yield Boundary.piecewise_constant([0, 0.2, 0.61, 0.8], [0.0, -1.0, 0.5, -np.inf], horizon=1)
    yield Boundary.linear([0, 0.4, 0.6, 1], [0.1, -np.inf, -np.inf, 0.3])
    yield Boundary.from_callable(lambda t: np.sin(7 * t), 1.0)


@pytest.mark.parametrize("b", list(rough_boundaries()))
def test_landmark_nesting_and_domination(b):
    s = np.linspace(0, 1, 4097)
    env = b.envelope(s)
    for n in range(0, 8):
        lm, nxt = b.landmarks(n), b.landmarks(n + 1)
        h = lm.width
        assert set(lm.times.tolist()) <= set(nxt.times.tolist())
        for i, (ti, vi) in enumerate(zip(lm.times, lm.values)):
            assert i * h - 1e-15 <= ti <= (i + 1) * h + 1e-15
            cell = (s >= i * h) & (s < (i + 1) * h)
            assert vi >= env[cell].max() - 1e-12


def test_q_b_openness_proxy():
    # around every grid point strictly above a Lipschitz b, a box of radius
    # gap / (1 + Lip) stays above b
    b = Boundary.linear([0, 0.5, 1], [0, 0.8, 0.2])
    lip = 1.6
    t = np.linspace(0, 1, 41)
    x = np.linspace(-1, 2, 61)
    for ti in t:
        for xi in x[x > b(ti)[0] + 1e-9]:
            r = (xi - b(ti)[0]) / (1 + lip) * 0.999
            tt = np.clip(ti + np.linspace(-r, r, 7), 0, 1)
            for xx in xi + np.linspace(-r, r, 7):
                assert np.all(xx > b(tt))


def test_csv_round_trip(tmp_path):
    t = np.array([0, 0.25, 0.5, 1.0])
    v = np.array([0.0, -np.inf, 0.3, 0.1])
    path = tmp_path / "b.csv"
    write_boundary_csv(path, t, v)
    assert "-inf" in path.read_text()
    b = read_boundary_csv(path, "constant-left")
    assert np.array_equal(b(t), v)
    assert read_boundary_csv(path, horizon=0.5).horizon == 0.5
    (tmp_path / "bad.csv").write_text("time,b\n0,1\n")
    with pytest.raises(FormatError):
        read_boundary_csv(tmp_path / "bad.csv")


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=8))
def test_piecewise_linear_envelope_is_value(vals):
    b = Boundary.linear(np.linspace(0, 1, len(vals)), vals)
    t = np.linspace(0, 1, 57)
    assert np.allclose(b.envelope(t), b(t))


def test_check_B0_member(bm, from_one):
    rep = check_B0(Boundary.constant(0.0, 1.0), bm, from_one, n_paths=2000)
    assert rep.consistent and rep.label == "consistent with B0"
    assert all(v < 1e-3 for v in rep.early_crossing.values())


def test_check_B0_start_on_barrier(bm, from_zero):
    rep = check_B0(Boundary.constant(0.0, 1.0), bm, from_zero, n_paths=4000)
    assert not rep.consistent and rep.label == "flagged"
    # substantial early crossing mass that does not vanish as eps shrinks
    m = rep.early_crossing
    assert m[1e-3] > 0.4 and m[1e-3] >= m[1e-2] - 0.05


def test_check_B0_upward_jump(bm, from_one):
    b = Boundary.piecewise_constant([0, 0.5], [0, 0.5], horizon=1)
    rep = check_B0(b, bm, from_one, n_paths=1000)
    assert not rep.regular and 0.5 in rep.regularity_violations
