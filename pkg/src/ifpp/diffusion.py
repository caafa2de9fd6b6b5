"""Diffusion coefficients, initial laws, transition densities and the
unit-diffusion change of variables.

Coefficient functions take ``(x, t)`` with ``x`` an array and ``t`` a
scalar and must be pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import CoefficientError

Coefficient = Callable[[np.ndarray, float], np.ndarray]


def _constant(c: float) -> Coefficient:
    c = float(c)

    def f(x, t):
        return np.full(np.shape(x), c)

    f.constant = c
    return f


@dataclass(frozen=True)
class DiffusionSpec:
    """dX = mu(X, t) dt + sigma(X, t) dW."""

    drift: Coefficient
    vol: Coefficient
    vol_lower_bound: float
    bound_M: float = np.inf
    name: str = "custom"

    def __post_init__(self):
        if not self.vol_lower_bound > 0:
            raise ValueError("vol_lower_bound must be positive")

    @property
    def constant_coefficients(self) -> bool:
        return hasattr(self.drift, "constant") and hasattr(self.vol, "constant")

    def mu(self, x, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.broadcast_to(np.asarray(self.drift(x, t), dtype=float), x.shape)
        if not np.all(np.isfinite(out)):
            raise CoefficientError(f"non-finite drift at t={t}")
        return out

    def sigma(self, x, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.broadcast_to(np.asarray(self.vol(x, t), dtype=float), x.shape)
        if not np.all(np.isfinite(out)):
            raise CoefficientError(f"non-finite volatility at t={t}")
        if np.any(out < self.vol_lower_bound * (1 - 1e-12)):
            raise CoefficientError(
                f"volatility below declared lower bound {self.vol_lower_bound} at t={t}"
            )
        return out

    def sigma_max(self, x_lo: float, x_hi: float, horizon: float, n: int = 201) -> float:
        """Largest sampled sigma over a box; exact for constant sigma."""
        if hasattr(self.vol, "constant"):
            return float(self.vol.constant)
        xs = np.linspace(x_lo, x_hi, n)
        return max(float(self.sigma(xs, t).max()) for t in np.linspace(0.0, horizon, 11))


def brownian(sigma: float = 1.0) -> DiffusionSpec:
    return DiffusionSpec(_constant(0.0), _constant(sigma), float(sigma), 0.0, name="bm")


def brownian_drift(mu: float, sigma: float = 1.0) -> DiffusionSpec:
    return DiffusionSpec(_constant(mu), _constant(sigma), float(sigma), abs(mu), name="bm-drift")


def _tanh_vol(x, t):
    return 1.0 + 0.5 * np.tanh(x)


def _zero(x, t):
    return np.zeros(np.shape(x))


_zero.constant = 0.0

# Named coefficient functions reachable from JSON configs: id -> (function, lower bound)
COEFFICIENTS: dict[str, tuple[Coefficient, float]] = {
    "zero": (_zero, 0.0),
    "tanh": (_tanh_vol, 0.5),
}


def register_coefficient(name: str, func: Coefficient, lower_bound: float = 0.0) -> None:
    COEFFICIENTS[name] = (func, float(lower_bound))


def spec_from_config(cfg: dict) -> tuple[DiffusionSpec, "InitialDistribution"]:
    """Build (spec, init) from ``{"kind", "mu", "sigma", "x0"}``."""
    kind = cfg.get("kind")
    sigma = cfg.get("sigma", 1.0)
    mu = cfg.get("mu", 0.0)
    if kind == "bm":
        spec = brownian(float(sigma))
    elif kind == "bm-drift":
        spec = brownian_drift(float(mu), float(sigma))
    elif kind == "custom":
        def resolve(v):
            if isinstance(v, str):
                if v not in COEFFICIENTS:
                    raise ValueError(f"unknown coefficient id {v!r}")
                return COEFFICIENTS[v]
            return _constant(float(v)), float(v)

        drift, _ = resolve(mu)
        vol, lb = resolve(sigma)
        lb = cfg.get("vol_lower_bound", lb)
        spec = DiffusionSpec(drift, vol, float(lb), name="custom")
    else:
        raise ValueError(f"unknown diffusion kind {kind!r}")
    if "init" in cfg:
        ic = cfg["init"]
        if ic.get("kind") == "gaussian":
            init = InitialDistribution.gaussian(float(ic["mean"]), float(ic["std"]))
        else:
            init = InitialDistribution.point_mass(float(ic["x0"]))
    else:
        init = InitialDistribution.point_mass(float(cfg.get("x0", 0.0)))
    return spec, init


@dataclass(frozen=True)
class InitialDistribution:
    """Law of X_0 given by its cdf, optionally with a density."""

    kind: str
    cdf: Callable[[np.ndarray], np.ndarray]
    density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    x0: Optional[float] = None
    lower_edge: float = -np.inf
    _quantile: Optional[Callable] = field(default=None, repr=False, compare=False)

    @classmethod
    def point_mass(cls, x0: float) -> "InitialDistribution":
        x0 = float(x0)
        return cls(
            "point",
            lambda x: (np.asarray(x, dtype=float) >= x0).astype(float),
            None,
            x0,
            x0,
            lambda q: np.full(np.shape(q), x0),
        )

    @classmethod
    def gaussian(cls, mean: float, std: float) -> "InitialDistribution":
        if std <= 0:
            raise ValueError("std must be positive")
        return cls(
            "density",
            lambda x: ndtr((np.asarray(x, dtype=float) - mean) / std),
            lambda x: np.exp(-0.5 * ((np.asarray(x, dtype=float) - mean) / std) ** 2)
            / (std * np.sqrt(2 * np.pi)),
            None,
            -np.inf,
            lambda q: mean + std * ndtri(q),
        )

    @classmethod
    def from_density(cls, density, lo: float, hi: float, n: int = 20001) -> "InitialDistribution":
        """Density supported on [lo, hi]; cdf by cumulative trapezoid."""
        xs = np.linspace(lo, hi, n)
        f = np.asarray(density(xs), dtype=float)
        if np.any(f < 0):
            raise ValueError("density must be nonnegative")
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(xs))])
        if abs(cum[-1] - 1.0) > 1e-8:
            raise ValueError(f"density integrates to {cum[-1]:.12g}, not 1")

        def cdf(x):
            return np.interp(x, xs, cum, left=0.0, right=1.0)

        return cls("density", cdf, density, None, lo)

    @property
    def is_point(self) -> bool:
        return self.kind == "point"

    def quantile(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self._quantile is not None:
            return self._quantile(q)
        # monotone bisection on the cdf
        lo = np.full(q.shape, -1.0)
        hi = np.full(q.shape, 1.0)
        while np.any(self.cdf(lo) > q):
            lo = np.where(self.cdf(lo) > q, 2 * lo, lo)
        while np.any(self.cdf(hi) < q):
            hi = np.where(self.cdf(hi) < q, 2 * hi, hi)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < q
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return hi

    def regularized(self, spec: DiffusionSpec, x: np.ndarray, t0: float) -> np.ndarray:
        """Density of X_{t0} on the nodes ``x`` used to start a PDE.

        A point mass is replaced by the Gaussian kernel frozen at x0;
        other laws use cell averages of the cdf (exact mass per cell).
        """
        x = np.asarray(x, dtype=float)
        if self.is_point:
            if t0 <= 0:
                raise ValueError("point-mass start needs a positive warm-up time")
            m = self.x0 + float(spec.mu(np.array([self.x0]), 0.0)[0]) * t0
            s = float(spec.sigma(np.array([self.x0]), 0.0)[0]) * np.sqrt(t0)
            return np.exp(-0.5 * ((x - m) / s) ** 2) / (s * np.sqrt(2 * np.pi))
        if self.density is not None:
            return np.asarray(self.density(x), dtype=float)
        dx = x[1] - x[0]
        return (self.cdf(x + dx / 2) - self.cdf(x - dx / 2)) / dx

    def regularized_cdf(self, spec: DiffusionSpec, x: np.ndarray, t0: float) -> np.ndarray:
        """p0(x, t0) consistent with :meth:`regularized`."""
        x = np.asarray(x, dtype=float)
        if self.is_point:
            m = self.x0 + float(spec.mu(np.array([self.x0]), 0.0)[0]) * t0
            s = float(spec.sigma(np.array([self.x0]), 0.0)[0]) * np.sqrt(t0)
            return ndtr((x - m) / s)
        return np.asarray(self.cdf(x), dtype=float)


class TransitionDensity:
    """rho(y, s; x, t): density of X_t at x given X_s = y.

    Closed form for constant coefficients, otherwise a Crank-Nicolson
    propagation of a narrow Gaussian on a fine grid.
    """

    def __init__(self, spec: DiffusionSpec, dx: float = 0.01, dt: float = 1e-3):
        self.spec = spec
        self.dx = dx
        self.dt = dt

    @property
    def closed_form(self) -> bool:
        return self.spec.constant_coefficients

    def __call__(self, y: float, s: float, x, t: float) -> np.ndarray:
        if not t > s:
            raise ValueError("need s < t")
        x = np.asarray(x, dtype=float)
        if self.closed_form:
            mu = self.spec.drift.constant
            sig = self.spec.vol.constant
            v = sig * sig * (t - s)
            return np.exp(-((x - y - mu * (t - s)) ** 2) / (2 * v)) / np.sqrt(2 * np.pi * v)
        return self._propagate(y, s, x, t)

    def _propagate(self, y, s, x, t):
        from .grid import Lattice, step_forward

        sig = float(self.spec.sigma(np.array([y]), s)[0])
        width = 8 * sig * np.sqrt(t - s) + 1.0
        lo = min(y, float(x.min())) - width
        hi = max(y, float(x.max())) + width
        warm = min(1e-4, (t - s) / 10)
        lat = Lattice.build(lo, hi, self.dx, t, self.dt, t_start=s + warm)
        u = InitialDistribution.point_mass(y).regularized(
            _shifted(self.spec, s), lat.x, warm
        )
        for j in range(1, lat.nt):
            u = step_forward(self.spec, lat.x, u, lat.t[j - 1], lat.t[j], 0.5 if j > 2 else 1.0)
        return np.interp(x, lat.x, u, left=0.0, right=0.0)


def _shifted(spec: DiffusionSpec, s: float) -> DiffusionSpec:
    return DiffusionSpec(
        lambda x, t: spec.drift(x, t + s), lambda x, t: spec.vol(x, t + s), spec.vol_lower_bound
    )


@dataclass(frozen=True)
class UnitDiffusionTransform:
    """Y(x, t) = int_0^x dz / sigma(z, t) and its inverse."""

    spec: DiffusionSpec
    step: float = 1e-3

    def forward(self, x, t: float) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        n = max(2, 2 * int(np.ceil(np.max(np.abs(x), initial=0.0) / (2 * self.step))))
        u = np.linspace(0.0, 1.0, n + 1)
        w = np.ones(n + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w /= 3 * n
        chunk = max(1, 2_000_000 // (n + 1))
        for i in range(0, x.size, chunk):
            xi = x[i:i + chunk]
            z = xi[:, None] * u[None, :]
            inv = 1.0 / self.spec.sigma(z, t)
            out[i:i + chunk] = xi * (inv @ w)
        return out

    def inverse(self, y, t: float, tol: float = 1e-12) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        # sigma >= lower bound gives |Y(x)| <= |x| / lower bound; expand upward
        lo = np.where(y < 0, 2 * y - 1.0, -1.0)
        hi = np.where(y > 0, 2 * y + 1.0, 1.0)
        for _ in range(200):
            bad = self.forward(lo, t) > y
            if not bad.any():
                break
            lo = np.where(bad, 2 * lo, lo)
        for _ in range(200):
            bad = self.forward(hi, t) < y
            if not bad.any():
                break
            hi = np.where(bad, 2 * hi, hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = self.forward(mid, t) < y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.max(hi - lo) < tol:
                break
        return 0.5 * (lo + hi)

    def transformed_drift(self, y, t: float) -> np.ndarray:
        """mu~(y,t) = -int_0^x sigma_t/sigma^2 dz + mu/sigma - sigma_x/2 at x = X(y,t)."""
        x = self.inverse(y, t)
        h = self.step
        s = self.spec.sigma(x, t)
        sx = (self.spec.sigma(x + h, t) - self.spec.sigma(x - h, t)) / (2 * h)
        # d/dt of the forward map equals -int sigma_t / sigma^2
        tl = max(t - h, 0.0)
        yt = (self.forward(x, t + h) - self.forward(x, tl)) / (t + h - tl)
        return yt + self.spec.mu(x, t) / s - 0.5 * sx

    def unit_spec(self, y_lo: float, y_hi: float, num: int = 4001, t: float = 0.0) -> DiffusionSpec:
        """Unit-volatility spec with the transformed drift tabulated at time t.

        Valid for time-homogeneous coefficients.
        """
        ys = np.linspace(y_lo, y_hi, num)
        mt = self.transformed_drift(ys, t)

        def drift(y, _t):
            return np.interp(y, ys, mt)

        return DiffusionSpec(drift, _constant(1.0), 1.0, name="unit")


def make_unit_transform(spec: DiffusionSpec, quadrature_step: float = 1e-3) -> UnitDiffusionTransform:
    if not quadrature_step > 0:
        raise ValueError("quadrature_step must be positive")
    return UnitDiffusionTransform(spec, float(quadrature_step))


def transform_boundary(transform: UnitDiffusionTransform, b):
    """Boundary t -> Y(b(t), t); -inf stays -inf."""
    from .boundary import Boundary

    def mapped(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        v = np.atleast_1d(b(t)).astype(float)
        out = np.full_like(v, -np.inf)
        fin = np.isfinite(v)
        for ti in np.unique(t[fin]):
            sel = fin & (t == ti)
            out[sel] = transform.forward(v[sel], ti)
        return out

    if b.kind in ("linear", "constant-left"):
        vals = mapped(b.knots_t) if b.knots_t.size else np.array([])
        return Boundary(b.kind, b.horizon, knots_t=b.knots_t, knots_b=vals,
                        points=tuple((tp, float(mapped([tp])[0])) for tp, _ in b.points))
    if b.kind == "constant":
        if not np.isfinite(b.value):
            return b
        if transform.spec.constant_coefficients:
            return Boundary.constant(float(transform.forward([b.value], 0.0)[0]), b.horizon)
    return Boundary.from_callable(mapped, b.horizon)
