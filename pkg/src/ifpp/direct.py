"""Survival curve of a given boundary by killing a forward density at
landmark times, with monotone refinement across landmark levels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .boundary import Boundary
from .errors import ConfigurationError, SchemeError
from .grid import (DensityField, Lattice, SurvivalField, forward_stencil, step_forward,
                   tail_integral, trapezoid_mass, truncation)
from .survival import SurvivalCurve


@dataclass(eq=False)
class DirectResult:
    p: SurvivalCurve
    p_rows: np.ndarray
    lattice: Lattice
    level: int
    w: Optional[SurvivalField] = None
    U: Optional[DensityField] = None
    kill_times: Optional[np.ndarray] = None
    kill_values: Optional[np.ndarray] = None


def direct_lattice(spec, init, b: Boundary, n: int, dx: float = 0.005, dt: float = 5e-4,
                   t0: float = 1e-4, output_times=()) -> Lattice:
    """Lattice for a level-n solve: truncated window, every landmark time
    of level n and the requested output times on the time grid."""
    T = b.horizon
    lo, hi = truncation(spec, init, T, b)
    start = t0 if init.is_point else 0.0
    lm, _ = b.landmarks(n).schedule()
    return Lattice.build(lo, hi, dx, T, dt, t_start=start,
                         required_times=np.concatenate([lm, np.asarray(output_times, float)]))


def kill_multiplier(x: np.ndarray, level: float, fractional: bool = True,
                    strict: bool = True) -> np.ndarray:
    """Fraction of each node's dual cell lying above the barrier.

    With ``fractional=False`` whole nodes are kept or removed: strict
    keeps x >= level (only mass strictly below is removed), non-strict
    keeps x > level.
    """
    if level == -np.inf:
        return np.ones_like(x)
    if fractional:
        dx = x[1] - x[0]
        return np.clip((x + 0.5 * dx - level) / dx, 0.0, 1.0)
    return (x >= level).astype(float) if strict else (x > level).astype(float)


def _kill_schedule(b: Boundary, n: int, lattice: Lattice):
    times, vals = b.landmarks(n).schedule()
    t_first = lattice.t[0]
    early = times <= t_first + 1e-12
    rows = {}
    if np.any(early):
        # landmarks before the warm-up time act at the first row
        rows[0] = float(vals[early].max())
    late = ~early & (times < lattice.t[-1] - 1e-12)
    if not lattice.contains_times(times[late]):
        raise ConfigurationError(f"landmark times of level {n} are missing from the lattice")
    for j, v in zip(lattice.index_of(times[late]), vals[late]):
        rows[int(j)] = max(rows.get(int(j), -np.inf), float(v))
    return rows, times, vals


def solve_direct_landmark(spec, init, b: Boundary, n: int, lattice: Lattice, *,
                          theta: float = 0.5, rannacher: bool = True,
                          fractional: bool = True, strict: bool = True,
                          store_fields: bool = True) -> DirectResult:
    """March the forward equation, killing at level-n landmark times.

    Stored rows are taken just before any kill at that time, so p_n is
    left-continuous.  An unkilled reference density is carried through
    the same steps and kept in ``U.reference``.
    """
    x = lattice.x
    t = lattice.t
    kills, lm_t, lm_v = _kill_schedule(b, n, lattice)
    u0 = init.regularized(spec, x, t[0])
    u0[0] = u0[-1] = 0.0
    # sampled warm-start kernels are rescaled to the exact mass of the window
    cdf = init.regularized_cdf(spec, x[[0, -1]], t[0])
    u0 *= (cdf[1] - cdf[0]) / trapezoid_mass(u0, lattice.dx)
    state = np.stack([u0, u0], axis=1)
    nt = lattice.nt
    p_rows = np.empty(nt)
    if store_fields:
        U = np.empty((nt, x.size))
        V = np.empty((nt, x.size))
    const = spec.constant_coefficients
    st_c = forward_stencil(spec, x, t[0]) if const else None

    def record(j):
        p_rows[j] = trapezoid_mass(state[:, 0], lattice.dx)
        if store_fields:
            U[j] = state[:, 0]
            V[j] = state[:, 1]

    record(0)
    fresh = True
    for j in range(1, nt):
        if j - 1 in kills:
            state[:, 0] *= kill_multiplier(x, kills[j - 1], fractional, strict)
            fresh = True
        t0, t1 = t[j - 1], t[j]
        if fresh and rannacher:
            tm = 0.5 * (t0 + t1)
            state = step_forward(spec, x, state, t0, tm, 1.0, st_c, st_c)
            state = step_forward(spec, x, state, tm, t1, 1.0, st_c, st_c)
            fresh = False
        else:
            state = step_forward(spec, x, state, t0, t1, theta, st_c, st_c)
        if state[:, 0].min() < -1e-12:
            raise SchemeError(f"negative density {state[:, 0].min():.3g} at t={t1}")
        if np.max(state[:, 0] - state[:, 1]) > 1e-10:
            raise SchemeError(f"killed density exceeds the free density at t={t1}")
        # round-off level: keep 0 <= U <= free density exactly
        np.maximum(state, 0.0, out=state)
        np.minimum(state[:, 0], state[:, 1], out=state[:, 0])
        record(j)

    if t[0] > 0:
        pt = np.concatenate([[0.0], t])
        pp = np.concatenate([[1.0], p_rows])
    else:
        pt, pp = t, p_rows
    curve = SurvivalCurve(pt, pp)
    res = DirectResult(curve, p_rows, lattice, n, kill_times=lm_t, kill_values=lm_v)
    if store_fields:
        res.U = DensityField(lattice, U, V)
        res.w = SurvivalField(lattice, tail_integral(U, lattice.dx))
    return res


@dataclass(eq=False)
class RefinementResult:
    levels: list
    p_rows: dict
    lattice: Lattice
    extrapolated: SurvivalCurve
    extrapolated_rows: np.ndarray
    max_violation: float

    @property
    def finest(self) -> np.ndarray:
        return self.p_rows[self.levels[-1]]


def richardson(rows_by_level: dict, levels: list, terms: int = 1) -> np.ndarray:
    """Eliminate the leading ``terms`` powers h^(1/2), ..., h^(terms/2)
    of the dyadic width h = 2^-n using the finest ``terms + 1`` levels."""
    use = levels[-(terms + 1):]
    h = np.array([2.0 ** -n for n in use])
    A = np.stack([h ** (0.5 * i) for i in range(terms + 1)], axis=1)
    coef = np.linalg.solve(A.T, np.eye(terms + 1)[:, 0])
    return sum(c * rows_by_level[n] for c, n in zip(coef, use))


def refine_direct(spec, init, b: Boundary, n_max: int, lattice: Optional[Lattice] = None,
                  n_min: Optional[int] = None, terms: int = 1, tol: float = 1e-12,
                  **kw) -> RefinementResult:
    """Solve levels n_min..n_max on one lattice, check p_n >= p_{n+1} and
    extrapolate in the landmark width."""
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    n_min = max(n_max - terms, 0) if n_min is None else n_min
    if n_max - n_min < terms:
        raise ValueError("not enough levels for the requested extrapolation")
    if lattice is None:
        lattice = direct_lattice(spec, init, b, n_max)
    levels = list(range(n_min, n_max + 1))
    rows = {}
    for n in levels:
        rows[n] = solve_direct_landmark(spec, init, b, n, lattice, store_fields=False, **kw).p_rows
    worst = 0.0
    for n in levels[:-1]:
        worst = max(worst, float(np.max(rows[n + 1] - rows[n])))
    if worst > tol:
        raise SchemeError(f"refinement chain not monotone: p_(n+1) - p_n reaches {worst:.3g}")
    ext = richardson(rows, levels, terms)
    ext = np.clip(np.minimum.accumulate(np.minimum(ext, 1.0)), 1e-300, 1.0)
    # p_n is constant between kills; a continuous curve is obtained by
    # joining the values at the coarsest level's landmark times, which
    # are landmark times of every finer level as well
    t = lattice.t
    lm, _ = b.landmarks(levels[-(terms + 1)]).schedule()
    lm = lm[(lm > t[0]) & (lm < t[-1])]
    knots = np.unique(np.concatenate([[t[0], t[-1]], lm]))
    kp = ext[lattice.index_of(knots)]
    if t[0] > 0:
        knots = np.concatenate([[0.0], knots])
        kp = np.concatenate([[1.0], kp])
    curve = SurvivalCurve(knots, kp)
    return RefinementResult(levels, rows, lattice, curve, ext, worst)


@dataclass
class FluxResidual:
    t: np.ndarray
    residual: np.ndarray
    pdot: np.ndarray
    reliable: np.ndarray


def flux_residual(p, U: DensityField, b: Boundary, spec, layer: float = 0.0) -> FluxResidual:
    """r(t) = p'(t) + (1/2) d/dx(sigma^2 U) at x = b(t)+ on each lattice row.

    ``p`` is either lattice rows or a callable curve.  Between landmark
    times mass diffuses below b, leaving a layer of width about
    sigma sqrt(2^-n) where U is distorted; ``layer`` moves the one-sided
    stencil that far above b.
    """
    lat = U.lattice
    x, t, dx = lat.x, lat.t, lat.dx
    rows = p(t) if callable(p) else np.asarray(p, float)
    pdot = np.gradient(rows, t)
    flux = np.zeros(lat.nt)
    ok = np.ones(lat.nt, dtype=bool)
    bt = b(np.clip(t, 0, b.horizon))
    for j in range(lat.nt):
        if bt[j] == -np.inf:
            continue
        k = int(np.searchsorted(x, bt[j] + layer - 1e-12))
        if k < 2 or k > x.size - 3:
            ok[j] = False
            continue
        f = spec.sigma(x[k:k + 3], t[j]) ** 2 * U.values[j, k:k + 3]
        flux[j] = 0.5 * (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dx)
    return FluxResidual(t, pdot + flux, pdot, ok)
