"""Space-time lattice, tridiagonal stencils for the backward (w) and
forward (U) operators, theta-stepping and field containers.

Stencils are returned as three full-length arrays ``(lo, di, up)`` so
that ``(A u)_i = lo_i u_{i-1} + di_i u_i + up_i u_{i+1}`` on interior
nodes; entries on the two end rows are zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError


@dataclass(frozen=True, eq=False)
class Lattice:
    x_min: float
    x_max: float
    nx: int
    t: np.ndarray

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ConfigurationError("need x_min < x_max")
        if self.nx < 16:
            raise ConfigurationError("need at least 16 space nodes")
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise ConfigurationError("time grid must be strictly increasing")
        object.__setattr__(self, "t", t)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.nx)

    @property
    def nt(self) -> int:
        return self.t.size

    @classmethod
    def build(cls, x_min: float, x_max: float, dx: float, horizon: float, dt: float,
              t_start: float = 0.0, required_times=()) -> "Lattice":
        """Lattice whose ends are multiples of dx and whose time grid
        contains every required time, other gaps split into equal steps
        no longer than dt."""
        lo = np.floor(x_min / dx) * dx
        hi = np.ceil(x_max / dx) * dx
        nx = int(round((hi - lo) / dx)) + 1
        req = np.asarray(list(required_times), dtype=float)
        req = req[(req > t_start) & (req < horizon)]
        knots = np.unique(np.concatenate([[t_start], req, [horizon]]))
        # drop near-duplicates created by rounding
        keep = np.concatenate([[True], np.diff(knots) > 1e-13])
        knots = knots[keep]
        if knots[-1] != horizon:
            knots[-1] = horizon
        pieces = [knots[:1]]
        for a, b in zip(knots[:-1], knots[1:]):
            m = max(1, int(np.ceil((b - a) / dt - 1e-9)))
            pieces.append(a + (b - a) * np.arange(1, m + 1) / m)
            pieces[-1][-1] = b
        return cls(lo, hi, nx, np.concatenate(pieces))

    def contains_times(self, times, tol: float = 1e-12) -> bool:
        times = np.asarray(times, dtype=float)
        k = np.clip(np.searchsorted(self.t, times), 0, self.nt - 1)
        km = np.maximum(k - 1, 0)
        d = np.minimum(np.abs(self.t[k] - times), np.abs(self.t[km] - times))
        return bool(np.all(d <= tol))

    def index_of(self, times, tol: float = 1e-12) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        k = np.clip(np.searchsorted(self.t, times), 0, self.nt - 1)
        km = np.maximum(k - 1, 0)
        pick = np.where(np.abs(self.t[km] - times) < np.abs(self.t[k] - times), km, k)
        if np.any(np.abs(self.t[pick] - times) > tol):
            raise ConfigurationError("time not on the lattice")
        return pick


def truncation(spec, init, horizon: float, boundary=None, t0: float = 0.0,
               q: float = 1e-6, width: float = 8.0) -> tuple[float, float]:
    """Spatial window: quantiles of X_0 widened by ``width`` standard
    deviations of the largest volatility over the horizon."""
    if init.is_point:
        q_lo = q_hi = init.x0
    else:
        q_lo, q_hi = (float(v) for v in init.quantile(np.array([q, 1 - q])))
    if boundary is not None:
        bl = boundary.lower_bound()
        if np.isfinite(bl):
            q_lo = min(q_lo, bl)
    s = spec.sigma_max(q_lo - 10.0, q_hi + 10.0, horizon)
    pad = width * s * np.sqrt(horizon)
    return q_lo - pad, q_hi + pad


def _s2_mu(spec, x, t):
    s = spec.sigma(x, t)
    return s * s, spec.mu(x, t)


def backward_stencil(spec, x: np.ndarray, t: float):
    """A_w w = (1/2) d/dx(sigma^2 dw/dx) - mu dw/dx, divergence form."""
    dx = x[1] - x[0]
    n = x.size
    sh = spec.sigma(x[:-1] + 0.5 * dx, t) ** 2  # sigma^2 at x_{i+1/2}
    mu = spec.mu(x, t)
    lo = np.zeros(n)
    di = np.zeros(n)
    up = np.zeros(n)
    a = 0.5 / dx ** 2
    lo[1:-1] = a * sh[:-1] + mu[1:-1] / (2 * dx)
    up[1:-1] = a * sh[1:] - mu[1:-1] / (2 * dx)
    di[1:-1] = -a * (sh[:-1] + sh[1:])
    return lo, di, up


def forward_stencil(spec, x: np.ndarray, t: float):
    """A_U U = (1/2) d2/dx2(sigma^2 U) - d/dx(mu U)."""
    dx = x[1] - x[0]
    n = x.size
    s2, mu = _s2_mu(spec, x, t)
    lo = np.zeros(n)
    di = np.zeros(n)
    up = np.zeros(n)
    a = 0.5 / dx ** 2
    lo[1:-1] = a * s2[:-2] + mu[:-2] / (2 * dx)
    up[1:-1] = a * s2[2:] - mu[2:] / (2 * dx)
    di[1:-1] = -2 * a * s2[1:-1]
    return lo, di, up


def generator_stencil(spec, x: np.ndarray, t: float):
    """(1/2) sigma^2 d2/dx2 + mu d/dx; its transpose is the forward stencil."""
    dx = x[1] - x[0]
    n = x.size
    s2, mu = _s2_mu(spec, x, t)
    lo = np.zeros(n)
    di = np.zeros(n)
    up = np.zeros(n)
    a = 0.5 / dx ** 2
    lo[1:-1] = a * s2[1:-1] - mu[1:-1] / (2 * dx)
    up[1:-1] = a * s2[1:-1] + mu[1:-1] / (2 * dx)
    di[1:-1] = -2 * a * s2[1:-1]
    return lo, di, up


def tri_apply(st, u: np.ndarray) -> np.ndarray:
    lo, di, up = st
    out = np.zeros_like(u)
    if u.ndim == 1:
        out[1:-1] = lo[1:-1] * u[:-2] + di[1:-1] * u[1:-1] + up[1:-1] * u[2:]
    else:
        out[1:-1] = (lo[1:-1, None] * u[:-2] + di[1:-1, None] * u[1:-1]
                     + up[1:-1, None] * u[2:])
    return out


def tri_dense(st) -> np.ndarray:
    lo, di, up = st
    return np.diag(di) + np.diag(lo[1:], -1) + np.diag(up[:-1], 1)


def apply_L(spec, row, t: float, x) -> np.ndarray:
    """Spatial part of the backward operator on interior nodes:
    -(1/2) d/dx(sigma^2 dw/dx) + mu dw/dx."""
    row = np.asarray(row, dtype=float)
    return -tri_apply(backward_stencil(spec, np.asarray(x, float), t), row)[1:-1]


def apply_L1(spec, row, t: float, x) -> np.ndarray:
    """Spatial part of the forward operator on interior nodes:
    -(1/2) d2/dx2(sigma^2 U) + d/dx(mu U)."""
    row = np.asarray(row, dtype=float)
    return -tri_apply(forward_stencil(spec, np.asarray(x, float), t), row)[1:-1]


def implicit_banded(st, dt: float, theta: float) -> np.ndarray:
    """Banded storage of I - theta dt A with identity end rows."""
    lo, di, up = st
    n = di.size
    ab = np.zeros((3, n))
    ab[1] = 1.0 - theta * dt * di
    ab[0, 1:] = -theta * dt * up[:-1]
    ab[2, :-1] = -theta * dt * lo[1:]
    ab[1, 0] = ab[1, -1] = 1.0
    ab[0, 1] = 0.0
    ab[2, -2] = 0.0
    return ab


def step_forward(spec, x, u, t0: float, t1: float, theta: float = 0.5,
                 st0=None, st1=None) -> np.ndarray:
    """One theta step of U_t = A_U U with U = 0 at both ends.

    ``u`` may carry several right-hand sides as columns.
    """
    dt = t1 - t0
    st1 = forward_stencil(spec, x, t1) if st1 is None else st1
    rhs = u.copy()
    if theta < 1:
        st0 = forward_stencil(spec, x, t0) if st0 is None else st0
        rhs = rhs + (1 - theta) * dt * tri_apply(st0, u)
    rhs[0] = 0.0
    rhs[-1] = 0.0
    return solve_banded((1, 1), implicit_banded(st1, dt, theta), rhs,
                        overwrite_b=True, check_finite=False)


def trapezoid_mass(u: np.ndarray, dx: float) -> np.ndarray:
    """Trapezoid integral over the last axis."""
    return dx * (u.sum(axis=-1) - 0.5 * (u[..., 0] + u[..., -1]))


def tail_integral(u: np.ndarray, dx: float) -> np.ndarray:
    """w(x_k) = trapezoid integral of u from x_k to x_max, along the last axis."""
    seg = 0.5 * dx * (u[..., 1:] + u[..., :-1])
    out = np.zeros_like(u)
    out[..., :-1] = np.cumsum(seg[..., ::-1], axis=-1)[..., ::-1]
    return out


@dataclass(eq=False)
class SurvivalField:
    lattice: Lattice
    values: np.ndarray
    contact: Optional[np.ndarray] = None

    @property
    def p_row(self) -> np.ndarray:
        return self.values[:, 0]


@dataclass(eq=False)
class DensityField:
    lattice: Lattice
    values: np.ndarray
    reference: Optional[np.ndarray] = None


def write_field_csv(path, lattice: Lattice, values: np.ndarray, t_stride: int = 1,
                    x_stride: int = 1) -> None:
    """Matrix CSV: header row of x nodes, first column of t nodes."""
    xs = lattice.x[::x_stride]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [repr(float(v)) for v in xs])
        for j in range(0, lattice.nt, t_stride):
            w.writerow([repr(float(lattice.t[j]))] + [repr(float(v)) for v in values[j, ::x_stride]])
