"""One-step Markov transition kernels for the existing cases.

The compact continuous case uses the eigen-expansion kernel
``f(x|y) = f_q(x) * sum_n rho^n Q_n(x) Q_n(y) / [n]_q!``: the one-step
conditional expectation maps Q_n to rho^n Q_n, which the residual operations
certify by quadrature.  The Gaussian endpoint uses the closed-form AR(1)
kernel, the discrete cases a 2x2 stochastic matrix (optionally scaled by a
chain-constant radius).

Truncation tails of the series are orthogonal to every retained polynomial
direction, so the spectral residual checks integrate the raw truncated
series; the public pointwise density applies the documented clamp instead.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from threading import Lock

import numpy as np

from . import qpoly
from .measure import QGaussian, RadialLaw, StdGaussian, MeasureSpec, ScaledTwoPoint, \
    TwoPointSym, density, theta_to_x, theta_weight
from .params import FieldParams, regression_coeffs
from .quadrature import gl_nodes, integrate_gaussian

__all__ = [
    "TransitionKernel",
    "MehlerQ",
    "GaussianAR1",
    "TwoPointChain",
    "ScaledTwoPointChain",
    "PositivityError",
    "ClampStats",
    "mehler_kernel",
    "transition_density",
    "eigen_residual",
    "conditional_moment_residual",
    "stationarity_residual",
    "two_point_matrix",
    "chapman_kolmogorov_residual",
    "detailed_balance_residual",
    "stationary_spec",
]


class PositivityError(RuntimeError):
    """Negative kernel values beyond the clamp threshold: the truncation /
    parameter combination cannot represent a positive kernel."""


class ClampStats:
    """Mutable accumulator of clamped negative mass (diagnostic only)."""

    __slots__ = ("count", "total", "worst")

    def __init__(self):
        self.count = 0
        self.total = 0.0
        self.worst = 0.0

    def record(self, neg: np.ndarray) -> None:
        if neg.size:
            self.count += int(neg.size)
            self.total += float(-neg.sum())
            self.worst = max(self.worst, float(-neg.min()))


class TransitionKernel:
    __slots__ = ()

    @property
    def name(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class MehlerQ(TransitionKernel):
    rho: float
    q: float
    truncation: int
    tol: float
    tol_neg: float
    tail_estimate: float
    clamp_stats: ClampStats = field(compare=False, repr=False, default_factory=ClampStats)


@dataclass(frozen=True)
class GaussianAR1(TransitionKernel):
    rho: float


@dataclass(frozen=True)
class TwoPointChain(TransitionKernel):
    rho: float


@dataclass(frozen=True)
class ScaledTwoPointChain(TransitionKernel):
    rho: float
    radial: RadialLaw


_Q_WARN = 0.995


def mehler_kernel(rho: float, q: float, tol: float = 1e-9, tol_neg: float = 1e-9,
                  truncation: int | None = None) -> MehlerQ:
    """Build the eigen-expansion kernel, choosing the truncation order.

    The order is the smallest N with |rho|^N * max|Q_N|^2 / [N]_q! below tol
    on a support grid, capped at the polynomial degree limit.  The stored
    tail estimate is a conservative endpoint-supremum figure; pointwise
    evaluation clamps negatives against a tighter local envelope instead
    (see transition_density).
    """
    if not 0.0 < abs(rho) < 1.0:
        raise ValueError("rho must satisfy 0 < |rho| < 1")
    if not -1.0 < q < 1.0:
        raise ValueError("MehlerQ requires q strictly inside (-1, 1); "
                         "the q = 1 endpoint is the closed-form AR(1) kernel")
    if q > _Q_WARN:
        warnings.warn(f"q = {q} close to 1: series truncation degrades; "
                      "consider the Gaussian AR(1) kernel", stacklevel=2)
    cap = qpoly.MAX_DEGREE
    spec = QGaussian(q)
    grid = theta_to_x(spec, np.linspace(0.0, math.pi, 129))
    tab = qpoly.qhermite_table(grid, q, cap)
    sup = np.abs(tab).max(axis=1)
    fact = qpoly.q_factorials(cap, q)
    t = np.abs(rho) ** np.arange(cap + 1) * sup * sup / fact
    if truncation is None:
        n_trunc = cap
        for n in range(4, cap):
            if t[n] < tol and t[n + 1] <= t[n]:
                n_trunc = n
                break
    else:
        if not 1 <= truncation <= cap:
            raise ValueError(f"truncation must be in [1, {cap}]")
        n_trunc = truncation
    # conservative endpoint-supremum tail bound; the pointwise clamp decision
    # uses a local last-term estimate instead (see transition_density)
    tail = float(t[n_trunc + 1:].sum() + t[cap] * abs(rho) / (1.0 - abs(rho)))
    return MehlerQ(rho=rho, q=q, truncation=n_trunc, tol=tol,
                   tol_neg=tol_neg, tail_estimate=tail)


def _mehler_coeffs(k: MehlerQ) -> np.ndarray:
    n = np.arange(k.truncation + 1)
    return k.rho ** n / qpoly.q_factorials(k.truncation, k.q)


def mehler_sum(k: MehlerQ, x, y) -> np.ndarray:
    """The bivariate series sum_{n<=N} rho^n Q_n(x) Q_n(y) / [n]_q!
    with shape (len(x), len(y))."""
    return _mehler_sum_and_last(k, x, y)[0]


def _mehler_sum_and_last(k: MehlerQ, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Series sum plus a local tail envelope: the max magnitude over the
    trailing retained terms (individual polynomials pass through zeros, so a
    single last term underestimates the truncation wobble)."""
    qx = qpoly.qhermite_table(x, k.q, k.truncation)
    qy = qpoly.qhermite_table(y, k.q, k.truncation)
    c = _mehler_coeffs(k)
    total = (qx * c[:, None]).T @ qy
    tail_rows = slice(max(1, k.truncation - 7), k.truncation + 1)
    env = np.abs(qx[tail_rows][:, :, None] * qy[tail_rows][:, None, :])
    env *= np.abs(c[tail_rows])[:, None, None]
    return total, env.max(axis=0)


def transition_density(k: TransitionKernel, x, y: float):
    """Conditional density f(x | y); MehlerQ values are clamped at zero and
    the clamped magnitude recorded, values below -tol_neg raise."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(k, GaussianAR1):
        sd2 = 1.0 - k.rho * k.rho
        out = np.exp(-0.5 * (xs - k.rho * y) ** 2 / sd2) / math.sqrt(2.0 * math.pi * sd2)
    elif isinstance(k, MehlerQ):
        spec = QGaussian(k.q)
        fq = density(spec, xs)
        total, last = _mehler_sum_and_last(k, xs, np.array([y]))
        out = fq * total[:, 0]
        mask = out < 0.0
        if mask.any():
            r = abs(k.rho)
            local = np.maximum(k.tol_neg, 10.0 * fq * last[:, 0] * r / (1.0 - r))
            beyond = -out[mask] > local[mask]
            if beyond.any():
                worst = float(out[mask][beyond].min())
                raise PositivityError(
                    f"kernel positivity violation: value {worst:.3e} exceeds the "
                    f"clamp threshold at (rho={k.rho}, q={k.q}, N={k.truncation})")
            k.clamp_stats.record(out[mask])
            out = np.maximum(out, 0.0)
    else:
        raise ValueError(f"{k.name} is atomic and has no transition density")
    return out if np.ndim(x) else float(out[0])


# cached theta-space evaluation data per (kernel signature, node count)
_THETA_CACHE: dict = {}
_THETA_LOCK = Lock()
_NODE_LADDER = (128, 256, 512, 1024, 2048)


def _theta_data(k: MehlerQ, n_nodes: int, deg: int):
    key = (k.rho, k.q, k.truncation, n_nodes, deg)
    with _THETA_LOCK:
        hit = _THETA_CACHE.get(key)
    if hit is not None:
        return hit
    spec = QGaussian(k.q)
    theta, w = gl_nodes(0.0, math.pi, n_nodes)
    x = theta_to_x(spec, theta)
    wt = theta_weight(spec, theta)
    tab = qpoly.qhermite_table(x, k.q, deg)
    data = (theta, w, x, wt, tab)
    with _THETA_LOCK:
        _THETA_CACHE.setdefault(key, data)
    return data


def _mehler_integrate(k: MehlerQ, y: float, g_rows, tol: float = 1e-9):
    """Integrals of g_i(x) f(x|y) dx for the rows selected by g_rows, where
    g_rows(tab, x) returns an array (n_funcs, n_nodes); node-doubling."""
    deg = max(k.truncation, 12)
    coeffs = _mehler_coeffs(k)
    prev = None
    for n_nodes in _NODE_LADDER:
        theta, w, x, wt, tab = _theta_data(k, n_nodes, deg)
        qy = qpoly.qhermite_all(y, k.q, k.truncation)
        kcol = (coeffs * qy) @ tab[: k.truncation + 1]
        vals = g_rows(tab, x) @ (w * wt * kcol)
        if prev is not None and np.max(np.abs(vals - prev)) <= tol * max(1.0, float(np.max(np.abs(vals)))):
            return vals
        prev = vals
    return prev


def eigen_residual(k: TransitionKernel, n: int, y: float) -> float:
    """|integral Q_n(x) f(x|y) dx - rho^n Q_n(y)| for the kernel's q."""
    if n < 0 or n > 12:
        raise ValueError("degree n must be in [0, 12]")
    if isinstance(k, MehlerQ):
        val = _mehler_integrate(k, y, lambda tab, x: tab[n][None, :])[0]
        target = k.rho ** n * qpoly.qhermite_all(y, k.q, max(n, 1))[n]
        return float(abs(float(val) - target))
    if isinstance(k, GaussianAR1):
        sd = math.sqrt(1.0 - k.rho * k.rho)
        val = integrate_gaussian(
            lambda t: qpoly.qhermite_table(t, 1.0, max(n, 1))[n], mean=k.rho * y, sd=sd, n=96)
        target = k.rho ** n * qpoly.qhermite_all(y, 1.0, max(n, 1))[n]
        return float(abs(val - target))
    states, probs = _chain_states(k, y)
    qs = qpoly.qhermite_table(states, -1.0, max(n, 1))[n]
    target = k.rho ** n * qpoly.qhermite_all(y, -1.0, max(n, 1))[n]
    return float(abs(float(probs @ qs) - target))


def conditional_moment_residual(k: TransitionKernel, p: FieldParams, y: float) -> dict:
    """Residuals of the one-step conditional mean and second moment against
    rho*y and alpha1*y^2 + gamma1 from the parameter algebra (D = 0)."""
    rc = regression_coeffs(p)
    if isinstance(k, MehlerQ):
        vals = _mehler_integrate(k, y, lambda tab, x: np.vstack([x, x * x]))
        mean, second = float(vals[0]), float(vals[1])
    elif isinstance(k, GaussianAR1):
        sd = math.sqrt(1.0 - k.rho * k.rho)
        mean = integrate_gaussian(lambda t: t, mean=k.rho * y, sd=sd, n=96)
        second = integrate_gaussian(lambda t: t * t, mean=k.rho * y, sd=sd, n=96)
    else:
        states, probs = _chain_states(k, y)
        mean = float(probs @ states)
        second = float(probs @ (states * states))
    return {
        "r_mean": float(abs(mean - p.rho * y)),
        "r_var": float(abs(second - (rc.alpha1 * y * y + rc.gamma1))),
    }


def _chain_states(k: TransitionKernel, y: float) -> tuple[np.ndarray, np.ndarray]:
    """Reachable states and one-step probabilities from state y (atomic kernels)."""
    if isinstance(k, TwoPointChain):
        if y not in (-1.0, 1.0):
            raise ValueError("two-point chain states are +/-1")
        return np.array([y, -y]), np.array([(1.0 + k.rho) / 2.0, (1.0 - k.rho) / 2.0])
    if isinstance(k, ScaledTwoPointChain):
        r = abs(y)
        if r == 0.0:
            return np.array([0.0]), np.array([1.0])
        s = math.copysign(1.0, y)
        return np.array([s * r, -s * r]), np.array([(1.0 + k.rho) / 2.0, (1.0 - k.rho) / 2.0])
    raise ValueError(f"{k.name} is not an atomic kernel")


def stationary_spec(k: TransitionKernel) -> MeasureSpec:
    """The stationary one-dimensional law paired with the kernel."""
    if isinstance(k, MehlerQ):
        return QGaussian(k.q)
    if isinstance(k, GaussianAR1):
        return StdGaussian()
    if isinstance(k, TwoPointChain):
        return TwoPointSym()
    if isinstance(k, ScaledTwoPointChain):
        return ScaledTwoPoint(k.radial)
    raise TypeError(f"unknown kernel {k!r}")


def stationarity_residual(k: TransitionKernel, spec: MeasureSpec, x: float,
                          tol: float = 1e-9) -> float:
    """|integral f(x|y) d nu(y) - f_nu(x)| (continuous) or the total-variation
    mismatch of pi P vs pi (atomic; x selects nothing there)."""
    if isinstance(k, MehlerQ):
        if not isinstance(spec, QGaussian) or spec.q != k.q:
            raise ValueError("kernel/measure pair mismatch")
        coeffs = _mehler_coeffs(k)
        fx = density(spec, x)
        qx = qpoly.qhermite_all(x, k.q, k.truncation)
        prev = None
        for n_nodes in _NODE_LADDER:
            theta, w, ynodes, wt, tab = _theta_data(k, n_nodes, max(k.truncation, 12))
            krow = (coeffs * qx) @ tab[: k.truncation + 1]
            val = fx * float((w * wt) @ krow)
            if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
                break
            prev = val
        return float(abs(val - fx))
    if isinstance(k, GaussianAR1):
        if not isinstance(spec, StdGaussian):
            raise ValueError("kernel/measure pair mismatch")
        sd2 = 1.0 - k.rho * k.rho
        val = integrate_gaussian(
            lambda yv: np.exp(-0.5 * (x - k.rho * yv) ** 2 / sd2) / math.sqrt(2.0 * math.pi * sd2),
            n=160)
        return abs(val - density(spec, x))
    # atomic: enumerate states of the paired law
    states, pi = _atomic_law(spec)
    pi_next = np.zeros_like(pi)
    for i, s in enumerate(states):
        nxt, pr = _chain_states(k, float(s))
        for t, p in zip(nxt, pr):
            pi_next[np.argmin(np.abs(states - t))] += pi[i] * p
    return 0.5 * float(np.abs(pi_next - pi).sum())


def _atomic_law(spec: MeasureSpec) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(spec, TwoPointSym):
        return np.array([-1.0, 1.0]), np.array([0.5, 0.5])
    if isinstance(spec, ScaledTwoPoint):
        states: list[float] = []
        probs: list[float] = []
        for v, p in zip(spec.radial.values, spec.radial.probs):
            if v == 0.0:
                states.append(0.0)
                probs.append(p)
            else:
                states.extend([-v, v])
                probs.extend([p / 2.0, p / 2.0])
        return np.asarray(states), np.asarray(probs)
    raise ValueError(f"{spec.name} is not atomic")


def two_point_matrix(rho: float) -> np.ndarray:
    """Stochastic matrix of the +/-1 chain with linear one-step regression:
    stay (1+rho)/2, flip (1-rho)/2; states ordered (+1, -1)."""
    if not abs(rho) < 1.0:
        raise ValueError("|rho| must be < 1")
    stay = (1.0 + rho) / 2.0
    flip = (1.0 - rho) / 2.0
    return np.array([[stay, flip], [flip, stay]])


def chapman_kolmogorov_residual(k: TransitionKernel, x: float, z: float,
                                tol: float = 1e-9) -> float:
    """|integral f(x|y) f(y|z) dy - f_2(x|z)| where f_2 is the kernel with
    rho^2 (same truncation, so the comparison isolates quadrature error)."""
    if isinstance(k, GaussianAR1):
        k2 = GaussianAR1(k.rho * k.rho)
        sd = math.sqrt(1.0 - k.rho * k.rho)
        # Gauss-Hermite against f(y|z) = N(rho*z, sd^2) leaves f(x|y) as integrand
        val = integrate_gaussian(lambda yv: _ar1_density(k, x, yv),
                                 mean=k.rho * z, sd=sd, n=160)
        return abs(val - transition_density(k2, x, z))
    if not isinstance(k, MehlerQ):
        raise ValueError("Chapman-Kolmogorov check applies to continuous kernels")
    spec = QGaussian(k.q)
    k2 = mehler_kernel(k.rho * k.rho, k.q, tol=k.tol, truncation=k.truncation)
    coeffs = _mehler_coeffs(k)
    fx = density(spec, x)
    qx = qpoly.qhermite_all(x, k.q, k.truncation)
    qz = qpoly.qhermite_all(z, k.q, k.truncation)
    prev = None
    for n_nodes in _NODE_LADDER:
        theta, w, ynodes, wt, tab = _theta_data(k, n_nodes, max(k.truncation, 12))
        kxy = (coeffs * qx) @ tab[: k.truncation + 1]
        kyz = (coeffs * qz) @ tab[: k.truncation + 1]
        val = fx * float((w * wt) @ (kxy * kyz))
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            break
        prev = val
    target = fx * float(_mehler_coeffs(k2) @ (qx * qz))
    return abs(val - target)


def _ar1_density(k: GaussianAR1, x: float, yv: np.ndarray) -> np.ndarray:
    sd2 = 1.0 - k.rho * k.rho
    return np.exp(-0.5 * (x - k.rho * yv) ** 2 / sd2) / math.sqrt(2.0 * math.pi * sd2)


def detailed_balance_residual(k: TransitionKernel, spec: MeasureSpec,
                              x: float, y: float) -> float:
    """|f(x|y) f_nu(y) - f(y|x) f_nu(x)| on the unclamped series."""
    if isinstance(k, MehlerQ):
        s = mehler_sum(k, np.array([x]), np.array([y]))[0, 0]
        s_t = mehler_sum(k, np.array([y]), np.array([x]))[0, 0]
        return float(abs(density(spec, x) * density(spec, y) * (s - s_t)))
    if isinstance(k, GaussianAR1):
        return float(abs(transition_density(k, x, y) * density(spec, y)
                         - transition_density(k, y, x) * density(spec, x)))
    raise ValueError("detailed balance check applies to continuous kernels")
