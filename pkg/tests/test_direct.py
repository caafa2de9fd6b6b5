import numpy as np
import pytest
from scipy.special import ndtr

from ifpp.analytic import bm_constant_barrier_rate, bm_constant_barrier_survival
from ifpp.boundary import Boundary
from ifpp.direct import (direct_lattice, flux_residual, kill_multiplier, refine_direct,
                         richardson, solve_direct_landmark)
from ifpp.errors import ConfigurationError
from ifpp.grid import Lattice, tail_integral, trapezoid_mass


def test_no_killing(bm, from_one):
    b = Boundary.minus_infinity(1.0)
    lat = direct_lattice(bm, from_one, b, 4, dx=0.01, dt=1e-3)
    res = solve_direct_landmark(bm, from_one, b, 4, lat)
    assert np.max(np.abs(res.p_rows - 1.0)) <= 1e-10
    j = lat.index_of([0.5])[0]
    w_exact = 1 - ndtr((lat.x - 1) / np.sqrt(lat.t[j]))
    assert np.max(np.abs(res.w.values[j] - w_exact)) <= 1e-4
    assert np.array_equal(res.U.values, res.U.reference)


def test_constant_barrier_converges(bm, from_one):
    b = Boundary.constant(0.0, 1.0)
    errs = []
    for n in (6, 8):
        lat = direct_lattice(bm, from_one, b, n, dx=0.01, dt=1e-3)
        p = solve_direct_landmark(bm, from_one, b, n, lat, store_fields=False).p_rows[-1]
        errs.append(p - bm_constant_barrier_survival(1, 0, 1.0))
    assert errs[0] > errs[1] > 0


def test_field_invariants(bm, from_one):
    b = Boundary.linear([0, 1], [0, 0.5])
    lat = direct_lattice(bm, from_one, b, 7, dx=0.01, dt=1e-3)
    res = solve_direct_landmark(bm, from_one, b, 7, lat)
    U, V, W = res.U.values, res.U.reference, res.w.values
    assert U.min() >= 0 and np.all(U <= V + 1e-10)
    assert np.all(np.diff(W, axis=1) <= 1e-12)
    assert np.max(np.abs(trapezoid_mass(U, lat.dx) - res.p_rows)) <= 1e-10
    assert np.max(np.abs(W[:, 0] - res.p_rows)) <= 1e-10
    assert np.all(np.diff(res.p_rows) <= 1e-14)


def test_flat_zone_after_kill(bm, from_one):
    lat = direct_lattice(bm, from_one, Boundary.constant(0.0, 1.0), 4, dx=0.01, dt=1e-3)
    res = solve_direct_landmark(bm, from_one, Boundary.minus_infinity(1.0), 4, lat)
    j = lat.index_of([0.5])[0]
    level = 0.3
    killed = res.U.values[j] * kill_multiplier(lat.x, level)
    w = tail_integral(killed, lat.dx)
    below = lat.x <= level - lat.dx
    assert np.max(np.abs(w[below] - w[0])) <= 1e-10


def test_kill_multiplier_variants():
    x = np.linspace(-1, 1, 21)
    frac = kill_multiplier(x, 0.0)
    assert frac[10] == 0.5 and frac[9] == 0.0 and frac[11] == 1.0
    assert kill_multiplier(x, 0.0, fractional=False)[10] == 1.0
    assert kill_multiplier(x, 0.0, fractional=False, strict=False)[10] == 0.0
    assert np.all(kill_multiplier(x, -np.inf) == 1.0)


def test_strict_and_nonstrict_agree(bm, from_one):
    # whole-node killing: the two rules differ only through the node sitting
    # on the barrier, so the gap vanishes with the cell size
    b = Boundary.constant(0.0, 1.0)
    gaps = []
    for dx in (0.01, 0.005):
        lat = direct_lattice(bm, from_one, b, 8, dx=dx, dt=5e-4)
        kw = dict(fractional=False, store_fields=False)
        ps = solve_direct_landmark(bm, from_one, b, 8, lat, strict=True, **kw).p_rows
        pn = solve_direct_landmark(bm, from_one, b, 8, lat, strict=False, **kw).p_rows
        assert np.all(pn <= ps + 1e-15)
        gaps.append(np.max(ps - pn))
    assert gaps[1] <= 0.6 * gaps[0]
    # the fractional rule gives the barrier node half its cell either way
    lat = direct_lattice(bm, from_one, b, 8, dx=0.005, dt=5e-4)
    ps = solve_direct_landmark(bm, from_one, b, 8, lat, strict=True, store_fields=False).p_rows
    pn = solve_direct_landmark(bm, from_one, b, 8, lat, strict=False, store_fields=False).p_rows
    assert np.array_equal(ps, pn)


def test_missing_landmarks_rejected(bm, from_one):
    b = Boundary.constant(0.0, 1.0)
    lat = Lattice.build(-9, 11, 0.01, 1.0, 0.003, t_start=1e-4)
    with pytest.raises(ConfigurationError):
        solve_direct_landmark(bm, from_one, b, 8, lat)


def test_richardson_removes_half_power():
    levels = [7, 8, 9]
    rows = {n: 0.25 + 3.0 * 2.0 ** (-n / 2) + 0.0 * n for n in levels}
    assert abs(richardson(rows, levels, 1) - 0.25) <= 1e-14
    rows = {n: 0.25 + 3.0 * 2.0 ** (-n / 2) - 2.0 * 2.0 ** -n for n in levels}
    assert abs(richardson(rows, levels, 2) - 0.25) <= 1e-13


def test_refinement_decreases_for_constant_barrier(bm, from_one):
    b = Boundary.constant(0.0, 1.0)
    lat = direct_lattice(bm, from_one, b, 8, dx=0.01, dt=1e-3)
    ref = refine_direct(bm, from_one, b, 8, lat, n_min=4)
    assert ref.max_violation <= 1e-12
    late = lat.t > 0.1
    for n in range(4, 8):
        assert np.all(ref.p_rows[n + 1][late] < ref.p_rows[n][late])
    assert ref.extrapolated(0.0) == 1.0
    with pytest.raises(ValueError):
        refine_direct(bm, from_one, b, 1, lat)


def test_flux_residual_minus_infinity(bm, from_one):
    b = Boundary.minus_infinity(1.0)
    lat = direct_lattice(bm, from_one, b, 3, dx=0.01, dt=1e-3)
    res = solve_direct_landmark(bm, from_one, b, 3, lat)
    fr = flux_residual(res.p_rows, res.U, b, bm)
    assert np.max(np.abs(fr.residual)) <= 1e-8 and np.max(np.abs(fr.pdot)) <= 1e-8


def test_flux_residual_converges(bm, from_one):
    b = Boundary.constant(0.0, 1.0)
    worst = []
    for dx, n in [(0.02, 8), (0.01, 10), (0.005, 12)]:
        lat = direct_lattice(bm, from_one, b, n, dx=dx, dt=dx / 10)
        ref = refine_direct(bm, from_one, b, n, lat)
        res = solve_direct_landmark(bm, from_one, b, n, lat)
        fr = flux_residual(ref.extrapolated, res.U, b, bm, layer=3 * np.sqrt(2.0 ** -n))
        m = lat.t >= 0.2
        assert fr.reliable[m].all()
        pdot = bm_constant_barrier_rate(1, 0, lat.t[m])
        worst.append((np.abs(fr.residual[m]).max(), np.abs(fr.residual[m] / pdot).max()))
    r = [w[0] for w in worst]
    assert np.all(np.log2(np.array(r[:-1]) / np.array(r[1:])) >= 0.8)
    assert worst[-1][1] <= 0.02
