"""Closed-form survival curves for Brownian motion."""

from __future__ import annotations

import numpy as np
from scipy.special import erf, log_ndtr, ndtr

from .errors import DomainError
from .survival import SurvivalCurve


def bm_constant_barrier_survival(x0: float, barrier: float, t, sigma: float = 1.0):
    """P(min_{s<=t} X_s > barrier) for X = x0 + sigma W."""
    if not x0 > barrier:
        raise DomainError("need x0 > barrier")
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(t > 0, erf((x0 - barrier) / (sigma * np.sqrt(2 * np.where(t > 0, t, 1.0)))), 1.0)
    return out if out.ndim else float(out)


def bm_constant_barrier_density(x0: float, barrier: float, x, t, sigma: float = 1.0):
    """Sub-density of surviving paths (method of images)."""
    x = np.asarray(x, dtype=float)
    v = sigma * sigma * t
    g = lambda z: np.exp(-z * z / (2 * v)) / np.sqrt(2 * np.pi * v)
    return np.where(x > barrier, g(x - x0) - g(x + x0 - 2 * barrier), 0.0)


def bm_constant_barrier_rate(x0: float, barrier: float, t, sigma: float = 1.0):
    """Time derivative of the constant-barrier survival (negative)."""
    y = (x0 - barrier) / sigma
    t = np.asarray(t, dtype=float)
    return -y / np.sqrt(2 * np.pi * t ** 3) * np.exp(-y * y / (2 * t))


def bm_linear_barrier_survival(x0: float, a: float, c: float, t):
    """P(X_s > a + c s for all s <= t) for X = x0 + W.

    With y = x0 - a this is
    Phi((y - c t)/sqrt t) - exp(2 c y) Phi((-y - c t)/sqrt t).
    """
    y = x0 - a
    if not y > 0:
        raise DomainError("need x0 > a")
    t = np.asarray(t, dtype=float)
    tt = np.where(t > 0, t, 1.0)
    s = np.sqrt(tt)
    first = ndtr((y - c * tt) / s)
    # second term in log space to avoid overflow for large c*y
    second = np.exp(2 * c * y + log_ndtr((-y - c * tt) / s))
    out = np.where(t > 0, first - second, 1.0)
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def exponential_curve(lam: float, horizon: float, samples: int = 2001) -> SurvivalCurve:
    """p(t) = exp(-lam t) sampled on a uniform grid, with its closed form."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    t = np.linspace(0.0, horizon, samples)
    return SurvivalCurve(t, np.exp(-lam * t), closed_form=lambda s: np.exp(-lam * s),
                         tag=f"exp:{lam!r}")


def constant_barrier_curve(x0: float, barrier: float, horizon: float, samples: int = 2001,
                           sigma: float = 1.0) -> SurvivalCurve:
    t = np.linspace(0.0, horizon, samples)
    f = lambda s: bm_constant_barrier_survival(x0, barrier, s, sigma)
    return SurvivalCurve(t, f(t), closed_form=f, tag=f"const:{x0!r},{barrier!r}")


def linear_barrier_curve(x0: float, a: float, c: float, horizon: float,
                         samples: int = 2001) -> SurvivalCurve:
    t = np.linspace(0.0, horizon, samples)
    f = lambda s: bm_linear_barrier_survival(x0, a, c, s)
    return SurvivalCurve(t, f(t), closed_form=f, tag=f"linear:{x0!r},{a!r},{c!r}")
