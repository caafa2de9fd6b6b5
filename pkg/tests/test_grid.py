import numpy as np
import pytest

from ifpp.diffusion import COEFFICIENTS, DiffusionSpec, InitialDistribution, brownian, brownian_drift
from ifpp.errors import ConfigurationError
from ifpp.grid import (Lattice, apply_L, apply_L1, forward_stencil,
                       generator_stencil, step_forward, tail_integral, trapezoid_mass, tri_dense,
                       truncation, write_field_csv)

from mms import backward_residual_error, forward_residual_error, orders, variable_spec

X = np.linspace(-2, 2, 81)


def test_linear_and_quadratic_rows():
    assert np.allclose(apply_L(brownian(), 3 * X - 1, 0.0, X), 0.0, atol=1e-10)
    assert np.allclose(apply_L(brownian(), X ** 2, 0.0, X), -1.0, atol=1e-10)


def test_forward_constants():
    assert np.allclose(apply_L1(brownian(), np.ones_like(X), 0.0, X), 0.0, atol=1e-12)
    assert np.allclose(apply_L1(brownian_drift(0.7, 1.0), 2 * np.ones_like(X), 0.0, X), 0.0, atol=1e-12)


def test_stationary_profiles_variable_vol():
    vol, lb = COEFFICIENTS["tanh"]
    spec = DiffusionSpec(COEFFICIENTS["zero"][0], vol, lb)
    assert np.max(np.abs(apply_L(spec, np.ones_like(X), 0.0, X))) <= 1e-12
    prof = 1.0 / spec.sigma(X, 0.0) ** 2
    assert np.max(np.abs(apply_L1(spec, prof, 0.0, X))) <= 1e-9


def test_manufactured_orders():
    dxs = [0.04, 0.02, 0.01]
    assert np.all(orders([backward_residual_error(h) for h in dxs]) >= 1.8)
    assert np.all(orders([forward_residual_error(h) for h in dxs]) >= 1.8)


def test_forward_is_transpose_of_generator():
    spec = variable_spec()
    x = np.linspace(-1, 1, 41)
    F = tri_dense(forward_stencil(spec, x, 0.2))[1:-1, 1:-1]
    G = tri_dense(generator_stencil(spec, x, 0.2))[1:-1, 1:-1]
    assert np.max(np.abs(F - G.T)) <= 1e-10


def test_tail_integral_of_forward_solution_matches_backward_operator():
    # w = int_x U solves the backward equation up to O(dx^2) when U solves the forward one
    spec = variable_spec()
    errs = []
    for dx in (0.04, 0.02):
        x = np.arange(-6, 6 + dx / 2, dx)
        U = np.exp(-x ** 2 / 0.5) / np.sqrt(0.5 * np.pi)
        w = tail_integral(U, dx)
        full = np.zeros_like(x)
        full[1:-1] = apply_L1(spec, U, 0.0, x)
        lhs = tail_integral(full, dx)[1:-1]
        rhs = apply_L(spec, w, 0.0, x)
        # compare away from the ends
        errs.append(np.max(np.abs(lhs - rhs)[20:-20]))
    assert errs[1] < errs[0] / 3.5


def test_build_contains_required_times():
    lat = Lattice.build(-1.03, 2.01, 0.01, 1.0, 0.1, t_start=1e-4, required_times=[0.3, 0.333, 2.0])
    assert lat.contains_times([1e-4, 0.3, 0.333, 1.0])
    assert abs(lat.x_min / 0.01 - round(lat.x_min / 0.01)) < 1e-9
    assert np.max(np.diff(lat.t)) <= 0.1 + 1e-12
    assert lat.index_of([0.3])[0] > 0
    with pytest.raises(ConfigurationError):
        lat.index_of([0.31])
    with pytest.raises(ConfigurationError):
        Lattice(0, 1, 8, np.array([0.0, 1.0]))


def test_truncation_covers_mass():
    lo, hi = truncation(brownian(), InitialDistribution.point_mass(1.0), 1.0)
    assert lo <= 1 - 8 and hi >= 1 + 8
    lo, _ = truncation(brownian(), InitialDistribution.gaussian(0, 1), 1.0)
    assert lo < -4.7 - 8


def test_step_preserves_mass_and_sign():
    spec = brownian()
    x = np.linspace(-8, 8, 801)
    u = np.exp(-x ** 2 / 0.02) / np.sqrt(0.02 * np.pi)
    m0 = trapezoid_mass(u, x[1] - x[0])
    for k in range(20):
        u = step_forward(spec, x, u, k * 0.01, (k + 1) * 0.01, 1.0 if k < 2 else 0.5)
    assert u.min() >= -1e-12
    assert abs(trapezoid_mass(u, x[1] - x[0]) - m0) <= 1e-10


def test_field_csv(tmp_path):
    lat = Lattice(0.0, 1.0, 16, np.array([0.0, 0.5, 1.0]))
    write_field_csv(tmp_path / "f.csv", lat, np.zeros((3, 16)))
    rows = (tmp_path / "f.csv").read_text().splitlines()
    assert len(rows) == 4 and rows[0].startswith("t,0.0,")
