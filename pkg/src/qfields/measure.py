"""Stationary one-dimensional laws and their samplers.

The continuum family is the compactly supported symmetric law (indexed by the
deformation parameter q in (-1, 1)) that makes the monic q-Hermite
polynomials orthogonal with squared norms [n]_q!; its q -> 1 endpoint is the
standard Gaussian.  The discrete cases are the symmetric two-point law and
scaled two-point laws R*Y with a user-supplied radial part.

Densities are evaluated through the angle theta = arccos(x / S) with
S = 2/sqrt(1-q): in theta the density is sin(theta) times an infinite
product, every factor of which is accumulated in log space so extreme q
stays finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from threading import Lock

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import ndtri

from .quadrature import QuadratureError, gl_nodes, integrate_adaptive, integrate_gaussian
from . import qpoly

__all__ = [
    "MeasureSpec",
    "QGaussian",
    "StdGaussian",
    "TwoPointSym",
    "ScaledTwoPoint",
    "RadialLaw",
    "CdfTable",
    "support",
    "density",
    "moment",
    "cdf_table",
    "sample",
]


class MeasureSpec:
    """Base of the stationary-law variants."""

    __slots__ = ()

    @property
    def name(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class QGaussian(MeasureSpec):
    """Compactly supported symmetric law with deformation parameter q in (-1, 1)."""

    q: float

    def __post_init__(self):
        if not -1.0 < self.q < 1.0:
            raise ValueError("q must lie strictly inside (-1, 1)")


@dataclass(frozen=True)
class StdGaussian(MeasureSpec):
    pass


@dataclass(frozen=True)
class TwoPointSym(MeasureSpec):
    """(delta_{-1} + delta_{+1}) / 2."""


@dataclass(frozen=True)
class RadialLaw:
    """Finite nonnegative discrete law with E R^2 = 1.

    Accepted as a list of (value, probability) pairs.  An atom at zero is
    permitted; the product construction X = R*Y is then one of several
    solutions and reports carry that caveat.
    """

    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise ValueError("radial law needs matching, nonempty values/probs")
        if any(v < 0.0 for v in self.values):
            raise ValueError("radial values must be nonnegative")
        if any(p < 0.0 for p in self.probs):
            raise ValueError("radial probabilities must be nonnegative")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError("radial probabilities must sum to 1 within 1e-9")
        msq = sum(p * v * v for v, p in zip(self.values, self.probs))
        if abs(msq - 1.0) > 1e-9:
            raise ValueError(f"radial law must satisfy E R^2 = 1 within 1e-9 (got {msq!r})")

    @property
    def has_zero_atom(self) -> bool:
        return any(v == 0.0 and p > 0.0 for v, p in zip(self.values, self.probs))


@dataclass(frozen=True)
class ScaledTwoPoint(MeasureSpec):
    radial: RadialLaw


def support(spec: MeasureSpec):
    """Interval (lo, hi) for continuous specs, array of atoms otherwise."""
    if isinstance(spec, QGaussian):
        s = 2.0 / math.sqrt(1.0 - spec.q)
        return (-s, s)
    if isinstance(spec, StdGaussian):
        return (-math.inf, math.inf)
    if isinstance(spec, TwoPointSym):
        return np.array([-1.0, 1.0])
    if isinstance(spec, ScaledTwoPoint):
        pts = {-v for v in spec.radial.values} | set(spec.radial.values)
        return np.array(sorted(pts))
    raise TypeError(f"unknown spec {spec!r}")


def _product_terms(q: float, tol: float) -> int:
    """Number of product factors so the running tail factor differs from 1
    by less than tol (factor k deviates by O(q^k); stop at |q|^k < tol/(10 k))."""
    if q == 0.0:
        return 0
    k = 1
    aq = abs(q)
    while aq ** k >= tol / (10.0 * k):
        k += 1
    return k


def _qg_log_weight(q: float, sin_theta: np.ndarray, tol: float) -> np.ndarray:
    """log of sin(theta) * prod(1-q^k) * prod((1-q^k)^2 + 4 q^k sin^2 theta)."""
    out = np.where(sin_theta > 0.0, np.log(np.maximum(sin_theta, 1e-300)), -np.inf)
    kmax = _product_terms(q, tol)
    if kmax == 0:
        return out
    s2 = sin_theta * sin_theta
    block = 65536
    for start in range(1, kmax + 1, block):
        ks = np.arange(start, min(start + block, kmax + 1))
        qk = np.power(q, ks)
        one_minus = 1.0 - qk
        out = out + np.log(one_minus).sum()
        out = out + np.log(one_minus[:, None] ** 2 + 4.0 * qk[:, None] * s2[None, :]).sum(axis=0)
    return out


def density(spec: MeasureSpec, x, tol: float = 1e-12):
    """Density of a continuous spec at x (vectorized); 0 outside the support."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(spec, StdGaussian):
        out = np.exp(-0.5 * xs * xs) / math.sqrt(2.0 * math.pi)
    elif isinstance(spec, QGaussian):
        s = 2.0 / math.sqrt(1.0 - spec.q)
        inside = np.abs(xs) < s  # endpoints are exact zeros of the density
        theta = np.arccos(np.clip(xs / s, -1.0, 1.0))
        sin_t = np.sin(theta)
        logw = _qg_log_weight(spec.q, sin_t, tol)
        pref = math.log(math.sqrt(1.0 - spec.q) / math.pi)
        out = np.where(inside & (sin_t > 0.0), np.exp(pref + logw), 0.0)
    else:
        raise ValueError(f"{spec.name} is atomic and has no density")
    return out if np.ndim(x) else float(out[0])


def theta_weight(spec: QGaussian, theta: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Weight w(theta) with x = -S cos(theta): integral of f dx over the
    support equals integral of w d(theta) over [0, pi]."""
    s = 2.0 / math.sqrt(1.0 - spec.q)
    sin_t = np.sin(theta)
    logw = _qg_log_weight(spec.q, sin_t, tol)
    pref = math.log(math.sqrt(1.0 - spec.q) / math.pi)
    return np.exp(pref + logw) * s * np.where(sin_t > 0.0, sin_t, 0.0)


def theta_to_x(spec: QGaussian, theta: np.ndarray) -> np.ndarray:
    s = 2.0 / math.sqrt(1.0 - spec.q)
    return -s * np.cos(theta)


def moment(spec: MeasureSpec, k: int, tol: float = 1e-10) -> float:
    """k-th moment; odd moments return exactly 0 by symmetry."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k > 16:
        raise ValueError("moments above order 16 are outside the accuracy contract")
    if k == 0:
        return 1.0
    if k % 2 == 1:
        return 0.0
    if isinstance(spec, TwoPointSym):
        return 1.0
    if isinstance(spec, ScaledTwoPoint):
        return float(sum(p * v ** k for v, p in zip(spec.radial.values, spec.radial.probs)))
    if isinstance(spec, StdGaussian):
        return integrate_gaussian(lambda t: t ** k, n=max(32, k + 2))
    if isinstance(spec, QGaussian):
        val, _ = integrate_adaptive(
            lambda th: theta_to_x(spec, th) ** k * theta_weight(spec, th),
            0.0, math.pi, tol=tol)
        return val
    raise TypeError(f"unknown spec {spec!r}")


@dataclass
class CdfTable:
    """Monotone CDF table over a cosine-spaced support grid.

    ``max_error`` records the normalization defect |raw total mass - 1|,
    the dominant error term of the per-cell quadrature.
    """

    x: np.ndarray
    F: np.ndarray
    max_error: float
    _cdf: PchipInterpolator
    _quantile: PchipInterpolator

    def cdf(self, x):
        lo, hi = self.x[0], self.x[-1]
        xs = np.clip(np.asarray(x, dtype=float), lo, hi)
        out = self._cdf(xs)
        return np.clip(out, 0.0, 1.0) if np.ndim(x) else float(min(max(out, 0.0), 1.0))

    def quantile(self, u):
        us = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        out = self._quantile(us)
        out = np.clip(out, self.x[0], self.x[-1])
        return out if np.ndim(u) else float(out)


_CELL_NODES = 16
_TABLE_CACHE: dict = {}
_TABLE_LOCK = Lock()


def _strictly_increasing(F: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keep = np.concatenate(([True], np.diff(F) > 0.0))
    return F[keep], x[keep]


def cdf_table(spec: MeasureSpec, n_points: int = 4097, tol: float = 1e-10) -> CdfTable:
    """Build (and cache) the CDF table of a compact continuous spec.

    Cosine-spaced grid; per-cell Gauss-Legendre in theta (the density
    vanishes like a square root at the endpoints, which the substitution
    renders smooth); monotone cubic interpolants both ways.
    """
    if not isinstance(spec, QGaussian):
        raise ValueError("cdf_table requires a compactly supported continuous spec")
    if n_points < 129:
        raise ValueError("n_points must be at least 129")
    key = (spec, n_points, tol)
    with _TABLE_LOCK:
        cached = _TABLE_CACHE.get(key)
    if cached is not None:
        return cached

    theta_grid = np.linspace(0.0, math.pi, n_points)
    x_grid = theta_to_x(spec, theta_grid)
    # all cells' Gauss-Legendre nodes at once
    t_ref, w_ref = gl_nodes(0.0, 1.0, _CELL_NODES)
    lo = theta_grid[:-1]
    h = np.diff(theta_grid)
    nodes = lo[:, None] + h[:, None] * t_ref[None, :]
    weights = h[:, None] * w_ref[None, :]
    vals = theta_weight(spec, nodes.ravel(), tol).reshape(nodes.shape)
    cells = (weights * vals).sum(axis=1)
    F = np.concatenate(([0.0], np.cumsum(cells)))
    total = F[-1]
    max_error = abs(total - 1.0)
    if max_error > max(tol * 1e3, 1e-8):
        raise QuadratureError("CDF normalization defect too large", max_error)
    F = F / total
    F = np.maximum.accumulate(F)
    F[-1] = 1.0
    Fi, xi = _strictly_increasing(F, x_grid)
    table = CdfTable(
        x=x_grid, F=F, max_error=max_error,
        _cdf=PchipInterpolator(x_grid, F, extrapolate=False),
        _quantile=PchipInterpolator(Fi, xi, extrapolate=False),
    )
    with _TABLE_LOCK:
        _TABLE_CACHE.setdefault(key, table)
    return table


def sample(spec: MeasureSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw n values: inverse-CDF for continuous specs, categorical otherwise."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    u = rng.random(n)
    if isinstance(spec, StdGaussian):
        return ndtri(np.maximum(u, np.finfo(float).tiny))
    if isinstance(spec, QGaussian):
        return cdf_table(spec).quantile(u)
    if isinstance(spec, TwoPointSym):
        return np.where(u < 0.5, 1.0, -1.0)
    if isinstance(spec, ScaledTwoPoint):
        r = sample_radial(spec.radial, rng, n)
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        return r * y
    raise TypeError(f"unknown spec {spec!r}")


def sample_radial(radial: RadialLaw, rng: np.random.Generator, n: int) -> np.ndarray:
    cum = np.cumsum(radial.probs)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, rng.random(n), side="right")
    return np.asarray(radial.values, dtype=float)[idx]


def qhermite_norms(q: float, n_max: int) -> np.ndarray:
    """Squared norms [n]_q! of the monic family under the matching law."""
    return qpoly.q_factorials(n_max, q)
