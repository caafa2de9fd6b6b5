"""Survival curves p(t) = P(no crossing before t)."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, FormatError, InputError


@dataclass(frozen=True, eq=False)
class SurvivalCurve:
    """Samples (t_j, p_j) with t_0 = 0 and a monotone interpolant.

    If ``closed_form`` is given it is used for evaluation and ``tag``
    names it (for instance ``"exp:1.0"``).
    """

    t: np.ndarray
    p: np.ndarray
    interpolation: str = "linear"
    closed_form: Optional[Callable] = None
    tag: Optional[str] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if t.size == 0:
            raise FormatError("empty survival curve")
        if t.shape != p.shape or t.ndim != 1:
            raise FormatError("t and p must be matching 1-d arrays")
        if t.size < 2:
            raise FormatError("need at least two samples")
        if np.any(np.diff(t) <= 0):
            raise FormatError("sample times must be strictly increasing")
        if t[0] != 0:
            raise FormatError("first sample must be at t = 0")
        if self.interpolation not in ("linear", "log-linear"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p", p)

    @property
    def horizon(self) -> float:
        return float(self.t[-1])

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.closed_form is not None:
            return np.asarray(self.closed_form(t), dtype=float) * np.ones(t.shape)
        if self.interpolation == "log-linear":
            return np.exp(np.interp(t, self.t, np.log(self.p)))
        return np.interp(t, self.t, self.p)

    def derivative(self, t) -> np.ndarray:
        """Centered difference of the evaluated curve."""
        t = np.asarray(t, dtype=float)
        h = 1e-5 * max(self.horizon, 1.0)
        lo = np.maximum(t - h, 0.0)
        hi = np.minimum(t + h, self.horizon)
        return (self(hi) - self(lo)) / (hi - lo)


@dataclass
class P0Report:
    valid: bool
    violations: list

    def __bool__(self):
        return self.valid


def validate_P0(p: SurvivalCurve, tol: float = 1e-12) -> P0Report:
    """Check p(0) = 1, positivity and monotonicity of the samples."""
    if p is None or np.size(p.t) == 0:
        raise FormatError("empty survival curve")
    bad = []
    if abs(p.p[0] - 1.0) > tol:
        bad.append((0, "p(0) != 1"))
    for j in np.flatnonzero(~(p.p > 0)):
        bad.append((int(j), "positivity: p <= 0"))
    for j in np.flatnonzero(p.p > 1 + tol):
        bad.append((int(j), "p > 1"))
    for j in np.flatnonzero(np.diff(p.p) > tol):
        bad.append((int(j) + 1, "not nonincreasing"))
    return P0Report(not bad, bad)


def decrease_rate(p: SurvivalCurve, T1: float, T2: float, dense: int = 2 ** 17) -> float:
    """inf over T1 <= s < t <= T2 of (p(s) - p(t)) / (t - s).

    For sampled curves this is the smallest segment slope magnitude on
    the window; a closed form is sampled on ``dense`` points first.
    """
    if not (0 <= T1 < T2 <= p.horizon * (1 + 1e-12)):
        raise DomainError("need 0 <= T1 < T2 <= horizon")
    if p.closed_form is not None:
        tt = np.linspace(T1, T2, dense + 1)
    else:
        inner = p.t[(p.t > T1) & (p.t < T2)]
        tt = np.concatenate([[T1], inner, [T2]])
    pp = p(tt)
    slopes = (pp[:-1] - pp[1:]) / np.diff(tt)
    return float(max(slopes.min(), 0.0))


def flat_intervals(p: SurvivalCurve, rtol: float = 0.0) -> list[tuple[float, float]]:
    """Maximal sample intervals on which p is constant."""
    flat = np.abs(np.diff(p.p)) <= rtol * p.p[1:]
    out = []
    j = 0
    n = flat.size
    while j < n:
        if flat[j]:
            k = j
            while k + 1 < n and flat[k + 1]:
                k += 1
            out.append((float(p.t[j]), float(p.t[k + 1])))
            j = k + 1
        else:
            j += 1
    return out


def read_survival_csv(path, horizon: Optional[float] = None,
                      interpolation: str = "linear") -> SurvivalCurve:
    """Read a ``t,p`` CSV, repairing monotonicity slips below 1e-9."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["t", "p"]:
        raise FormatError("survival CSV must start with header 't,p'")
    data = [(float(r[0]), float(r[1])) for r in rows[1:] if r]
    if not data:
        raise FormatError("survival CSV has no rows")
    t, v = map(np.array, zip(*data))
    if horizon is not None:
        keep = t <= horizon
        t, v = t[keep], v[keep]
    rise = np.diff(v)
    if np.any(rise > 1e-9):
        j = int(np.argmax(rise)) + 1
        raise InputError(f"survival curve increases by {rise.max():.3g} at row {j}")
    v = np.minimum.accumulate(v)
    curve = SurvivalCurve(t, v, interpolation)
    rep = validate_P0(curve)
    if not rep.valid:
        raise InputError(f"not a valid survival curve: {rep.violations[:5]}")
    return curve


def write_survival_csv(path, t, p) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "p"])
        for ti, pi in zip(t, p):
            w.writerow([repr(float(ti)), repr(float(pi))])
