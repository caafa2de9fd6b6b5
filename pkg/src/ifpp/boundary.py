"""Barriers t -> b(t) with -inf allowed, their usc envelopes, landmark
sets and a sampled membership check for the admissible class."""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, FormatError

NEG_INF = -np.inf
# dyadic sampling level used for black-box callables
CALLABLE_LEVEL = 16


@dataclass(frozen=True, eq=False)
class Boundary:
    """A barrier on (0, T].

    kind is one of ``constant``, ``linear`` (piecewise-linear on knots,
    held flat outside them), ``constant-left`` (value of the left knot
    held up to the next knot) or ``callable``.  ``points`` holds isolated
    ``(t, value)`` overrides that do not affect one-sided limits.
    """

    kind: str
    horizon: float
    value: float = NEG_INF
    knots_t: np.ndarray = field(default_factory=lambda: np.empty(0))
    knots_b: np.ndarray = field(default_factory=lambda: np.empty(0))
    points: tuple = ()
    func: Optional[Callable] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.kind not in ("constant", "linear", "constant-left", "callable"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind in ("linear", "constant-left"):
            kt = np.asarray(self.knots_t, dtype=float)
            kb = np.asarray(self.knots_b, dtype=float)
            if kt.ndim != 1 or kt.shape != kb.shape or kt.size == 0:
                raise FormatError("knots must be matching non-empty 1-d arrays")
            if np.any(np.diff(kt) <= 0):
                raise FormatError("knot times must be strictly increasing")
            if np.any(np.isnan(kb)) or np.any(kb == np.inf):
                raise FormatError("boundary values must be finite or -inf")
            object.__setattr__(self, "knots_t", kt)
            object.__setattr__(self, "knots_b", kb)
        if self.kind == "callable" and self.func is None:
            raise ValueError("callable boundary needs func")

    # constructors
    @classmethod
    def constant(cls, c: float, horizon: float) -> "Boundary":
        return cls("constant", float(horizon), value=float(c))

    @classmethod
    def minus_infinity(cls, horizon: float) -> "Boundary":
        return cls("constant", float(horizon), value=NEG_INF)

    @classmethod
    def linear(cls, t, b, horizon: Optional[float] = None, points=()) -> "Boundary":
        t = np.asarray(t, dtype=float)
        return cls("linear", float(horizon if horizon is not None else t[-1]),
                   knots_t=t, knots_b=np.asarray(b, dtype=float), points=tuple(points))

    @classmethod
    def piecewise_constant(cls, t, b, horizon: Optional[float] = None, points=()) -> "Boundary":
        t = np.asarray(t, dtype=float)
        return cls("constant-left", float(horizon if horizon is not None else t[-1]),
                   knots_t=t, knots_b=np.asarray(b, dtype=float), points=tuple(points))

    @classmethod
    def from_callable(cls, func: Callable, horizon: float) -> "Boundary":
        return cls("callable", float(horizon), func=func)

    # evaluation
    def _check(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0) or np.any(t > self.horizon * (1 + 1e-12)):
            raise DomainError(f"t outside (0, {self.horizon}]")
        return t

    def _raw(self, t: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full(t.shape, self.value)
        if self.kind == "callable":
            return np.asarray(self.func(t), dtype=float) * np.ones(t.shape)
        kt, kb = self.knots_t, self.knots_b
        if self.kind == "constant-left":
            i = np.clip(np.searchsorted(kt, t, side="right") - 1, 0, kt.size - 1)
            return kb[i]
        return _interp_ext(t, kt, kb)

    def _left(self, t: np.ndarray) -> np.ndarray:
        if self.kind in ("constant", "callable"):
            return self._raw(t)
        kt, kb = self.knots_t, self.knots_b
        if self.kind == "constant-left":
            i = np.clip(np.searchsorted(kt, t, side="left") - 1, 0, kt.size - 1)
            return kb[i]
        out = _interp_ext(t, kt, kb)
        k = np.searchsorted(kt, t)
        at = (k < kt.size) & (kt[np.minimum(k, kt.size - 1)] == t) & (k > 0)
        if np.any(at):
            kk = k[at]
            out[at] = np.where(np.isfinite(kb[kk - 1]), kb[kk], NEG_INF)
        return out

    def _right(self, t: np.ndarray) -> np.ndarray:
        if self.kind in ("constant", "callable", "constant-left"):
            return self._raw(t)
        kt, kb = self.knots_t, self.knots_b
        out = _interp_ext(t, kt, kb)
        k = np.searchsorted(kt, t)
        at = (k < kt.size - 1) & (kt[np.minimum(k, kt.size - 1)] == t)
        if np.any(at):
            kk = k[at]
            out[at] = np.where(np.isfinite(kb[kk + 1]), kb[kk], NEG_INF)
        return out

    def __call__(self, t) -> np.ndarray:
        """b(t), with b(0) taken as the right limit at 0."""
        t = self._check(t)
        out = self._raw(t)
        for tp, vp in self.points:
            out = np.where(t == tp, vp, out)
        z = t == 0
        if np.any(z):
            out[z] = self._right(t[z])
        return out

    def left_limsup(self, t) -> np.ndarray:
        t = self._check(t)
        out = self._left(t)
        z = t == 0
        if np.any(z):
            out[z] = self._right(t[z])
        return out

    def envelope(self, t) -> np.ndarray:
        """b*(t) = max(b(t), limsup_{s->t} b(s)) for an array of times."""
        t = self._check(t)
        v = self(t)
        out = np.maximum(v, self._left(t))
        inside = t < self.horizon
        out = np.where(inside, np.maximum(out, self._right(t)), out)
        z = t == 0
        if np.any(z):
            out[z] = self._right(t[z])
        return out

    def with_horizon(self, horizon: float) -> "Boundary":
        return dataclasses.replace(self, horizon=float(horizon), _cache={})

    def sampled(self, level: int) -> "Boundary":
        """Piecewise-linear interpolant on the dyadic grid of the given level."""
        key = ("sampled", level)
        if key not in self._cache:
            h = 2.0 ** -level
            n = int(np.ceil(self.horizon / h - 1e-9))
            t = np.minimum(np.arange(n + 1) * h, self.horizon)
            self._cache[key] = Boundary.linear(t, self(t), self.horizon)
        return self._cache[key]

    def lower_bound(self) -> float:
        """Smallest finite value, or -inf if b is -inf everywhere."""
        if self.kind == "constant":
            return self.value
        b = self.sampled(10)(self.sampled(10).knots_t) if self.kind == "callable" else self.knots_b
        extra = np.array([v for _, v in self.points], dtype=float)
        vals = np.concatenate([b, extra])
        vals = vals[np.isfinite(vals)]
        return float(vals.min()) if vals.size else NEG_INF

    def landmarks(self, n: int) -> "LandmarkSet":
        if n < 0:
            raise ValueError("level must be nonnegative")
        if self.kind == "callable":
            return self.sampled(max(n + 4, CALLABLE_LEVEL)).landmarks(n)
        if n not in self._cache:
            self._cache[n] = _compute_landmarks(self, n)
        return self._cache[n]


def _interp_ext(t, kt, kb):
    """Piecewise-linear interpolation held flat outside the knots; a
    segment touching a -inf knot is -inf in its interior."""
    t = np.asarray(t, dtype=float)
    k = np.clip(np.searchsorted(kt, t, side="right") - 1, 0, kt.size - 1)
    k1 = np.minimum(k + 1, kt.size - 1)
    b0, b1 = kb[k], kb[k1]
    span = kt[k1] - kt[k]
    with np.errstate(invalid="ignore", divide="ignore"):
        lam = np.where(span > 0, (t - kt[k]) / np.where(span > 0, span, 1.0), 0.0)
    lam = np.clip(lam, 0.0, 1.0)
    fin = np.isfinite(b0) & np.isfinite(b1)
    out = np.full(t.shape, NEG_INF)
    out[fin] = b0[fin] + lam[fin] * (b1[fin] - b0[fin])
    exact0 = lam == 0
    out[exact0] = b0[exact0]
    exact1 = (lam == 1) & (span > 0)
    out[exact1] = b1[exact1]
    return out


def usc_envelope(b: Boundary, t):
    """b*(t); scalar in, scalar out."""
    v = b.envelope(t)
    return float(v[0]) if np.ndim(t) == 0 else v


def left_limsup(b: Boundary, t):
    """limsup of b(s) as s increases to t."""
    v = b.left_limsup(t)
    return float(v[0]) if np.ndim(t) == 0 else v


@dataclass(frozen=True)
class LandmarkSet:
    """Per dyadic cell i of width 2^-n: the first time the envelope reaches
    the cell supremum, with the envelope value there."""

    level: int
    times: np.ndarray
    values: np.ndarray
    horizon: float

    @property
    def width(self) -> float:
        return 2.0 ** -self.level

    def schedule(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct landmark times with their envelope values."""
        t, idx = np.unique(self.times, return_index=True)
        return t, self.values[idx]


def _compute_landmarks(b: Boundary, n: int) -> LandmarkSet:
    h = 2.0 ** -n
    T = b.horizon
    ncell = max(1, int(np.ceil(T / h - 1e-9)))
    edges = np.minimum(np.arange(ncell + 1) * h, T)
    cand = [edges]
    if b.kind in ("linear", "constant-left"):
        cand.append(b.knots_t[(b.knots_t > 0) & (b.knots_t < T)])
    if b.points:
        pt = np.array([p for p, _ in b.points], dtype=float)
        cand.append(pt[(pt >= 0) & (pt <= T)])
    g = np.unique(np.concatenate(cand))
    val = b(g)
    env = b.envelope(g)
    lft = b._left(g)
    rgt = b._right(g)
    lo = np.searchsorted(g, edges[:-1], side="left")
    hi = np.searchsorted(g, edges[1:], side="left")
    times = np.empty(ncell)
    vals = np.empty(ncell)
    for i in range(ncell):
        s = slice(lo[i], hi[i] + 1)
        # supremum of b over the closed cell, including limits from inside
        sup = max(val[s].max(), rgt[lo[i]:hi[i]].max(initial=NEG_INF),
                  lft[lo[i] + 1:hi[i] + 1].max(initial=NEG_INF))
        k = lo[i] + int(np.argmax(env[s] >= sup))
        times[i] = g[k]
        vals[i] = env[k]
    return LandmarkSet(n, times, vals, T)


def landmarks(b: Boundary, n: int) -> LandmarkSet:
    return b.landmarks(n)


@dataclass
class B0Report:
    regular: bool
    regularity_violations: list
    start_value: float
    lower_edge: float
    starts_above: bool
    early_crossing: dict
    consistent: bool

    @property
    def label(self) -> str:
        return "consistent with B0" if self.consistent else "flagged"


def check_B0(b: Boundary, spec, init, eps=(1e-2, 1e-3), n_paths: int = 4000,
             seed: int = 0, n_samples: int = 1024) -> B0Report:
    """Sampled necessary conditions for admissibility; never a proof."""
    from .montecarlo import estimate_survival

    ts = [np.linspace(0, b.horizon, n_samples + 1)[1:]]
    if b.kind in ("linear", "constant-left"):
        ts.append(b.knots_t[(b.knots_t > 0) & (b.knots_t <= b.horizon)])
    ts.append(np.array([p for p, _ in b.points if 0 < p <= b.horizon], dtype=float))
    ts = np.unique(np.concatenate(ts))
    v, env, lft = b(ts), b.envelope(ts), b.left_limsup(ts)
    bad = ~((v == env) & (v == lft))
    violations = [float(x) for x in ts[bad]]
    start = float(b.envelope(0.0)[0])
    edge = float(init.lower_edge)
    starts_above = start < edge
    early = {}
    for e in eps:
        est = estimate_survival(spec, init, b.with_horizon(e), e, n_paths, e / 100, seed,
                                bridge=False)
        early[float(e)] = float(1.0 - est.p_hat[-1])
    return B0Report(not violations, violations, start, edge, starts_above, early,
                    (not violations) and starts_above)


def read_boundary_csv(path, interpolation: str = "linear", horizon: Optional[float] = None) -> Boundary:
    """Read a ``t,b`` CSV; ``-inf`` encodes minus infinity."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["t", "b"]:
        raise FormatError("boundary CSV must start with header 't,b'")
    data = [(float(r[0]), float(r[1])) for r in rows[1:] if r]
    if not data:
        raise FormatError("boundary CSV has no rows")
    t, v = map(np.array, zip(*data))
    if horizon is not None:
        keep = t <= horizon
        t, v = t[keep], v[keep]
    T = horizon if horizon is not None else float(t[-1])
    if interpolation == "linear":
        return Boundary.linear(t, v, T)
    if interpolation == "constant-left":
        return Boundary.piecewise_constant(t, v, T)
    raise ValueError(f"unknown interpolation {interpolation!r}")


def write_boundary_csv(path, t, b) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "b"])
        for ti, bi in zip(t, b):
            w.writerow([repr(float(ti)), "-inf" if bi == NEG_INF else repr(float(bi))])
