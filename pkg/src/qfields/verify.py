"""Statistical verification of sampled ensembles.

Conditional identities are tested in weak form (residuals integrated against
polynomial test functions of the neighbours), the eigen-relation as sample
covariances of polynomial increments, correlations against the geometric
decay, and the odd-moment symmetry.  Chains are independent by construction,
so every statistic is a mean of per-chain means and its standard error the
chain-level sample deviation over sqrt(n_chains); in-chain samples are never
pooled without that batching.  An estimate passes when it lies within
``threshold`` standard errors of zero; identically-zero residuals (identities
that hold pointwise) report a zero standard error and pass exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import qpoly
from .params import Classification, ExistsGaussian, ExistsQGaussian, \
    ExistsScaledTwoPoint, ExistsTwoPointSymmetric, FieldParams
from .simulate import Ensemble

__all__ = [
    "TestEntry",
    "empirical_corr",
    "weak_form_residuals",
    "martingale_residuals",
    "symmetry_checks",
    "standard_suite",
    "build_report",
    "report_json",
    "load_report",
    "n_failures",
]

DEFAULT_THRESHOLD = 4.0


@dataclass(frozen=True)
class TestEntry:
    test_id: str
    statistic: str
    estimate: float
    stderr: float
    threshold: float
    passed: bool


def _gate(test_id: str, statistic: str, per_chain: np.ndarray,
          threshold: float) -> TestEntry:
    per_chain = np.asarray(per_chain, dtype=float)
    est = float(per_chain.mean())
    if per_chain.size > 1:
        se = float(per_chain.std(ddof=1) / np.sqrt(per_chain.size))
    else:
        se = 0.0
    return TestEntry(test_id=test_id, statistic=statistic, estimate=est,
                     stderr=se, threshold=threshold,
                     passed=bool(abs(est) <= threshold * se))


def empirical_corr(e: Ensemble, rho: float, k_max: int = 5,
                   threshold: float = DEFAULT_THRESHOLD) -> list[TestEntry]:
    """Lag-k cross moments against rho^k, k = 1..k_max (standardized scale,
    so no per-chain studentizing; lag 0 is identically 1 and not gated)."""
    if not k_max < e.n_steps / 10:
        raise ValueError("k_max must be below n_steps / 10")
    v = e.values
    out = []
    for k in range(1, k_max + 1):
        per_chain = (v[:, :-k] * v[:, k:]).mean(axis=1) - rho ** k
        out.append(_gate(f"corr_k{k}", f"E[x_t x_(t+{k})] - rho^{k}",
                         per_chain, threshold))
    return out


def _monomials(degree: int):
    return [(i, j) for i in range(degree + 1) for j in range(degree + 1 - i)]


def weak_form_residuals(e: Ensemble, p: FieldParams, degree: int = 4,
                        threshold: float = DEFAULT_THRESHOLD) -> list[TestEntry]:
    """Weak-form residuals of the two conditional-moment identities.

    For every monomial g = x^i y^j with i + j <= degree, gates the sample
    means of (X_t - a (X_{t-1} + X_{t+1})) g and
    (X_t^2 - Q(X_{t-1}, X_{t+1})) g over interior triples.  Polynomial test
    functions up to the requested degree are a practical, not a complete,
    separating class.
    """
    if degree > 4:
        raise ValueError("degree must be <= 4")
    v = e.values
    if e.n_steps < 3:
        raise ValueError("need at least 3 steps for interior triples")
    xp, xm, xn = v[:, :-2], v[:, 1:-1], v[:, 2:]
    a = p.rho / (1.0 + p.rho * p.rho)
    lin = xm - a * (xp + xn)
    quad = xm * xm - (p.A * (xp * xp + xn * xn) + p.B * xp * xn
                      + p.D * (xp + xn) + p.C)
    out = []
    for (i, j) in _monomials(degree):
        g = xp ** i * xn ** j
        out.append(_gate(f"weak_lin_x{i}y{j}",
                         f"E[(x_t - a(x_(t-1)+x_(t+1))) x_(t-1)^{i} x_(t+1)^{j}]",
                         (lin * g).mean(axis=1), threshold))
        out.append(_gate(f"weak_quad_x{i}y{j}",
                         f"E[(x_t^2 - Q(x_(t-1),x_(t+1))) x_(t-1)^{i} x_(t+1)^{j}]",
                         (quad * g).mean(axis=1), threshold))
    return out


def martingale_residuals(e: Ensemble, rho: float, q: float, n_max: int = 4,
                         m_max: int = 4,
                         threshold: float = DEFAULT_THRESHOLD) -> list[TestEntry]:
    """Gates E[(Q_n(X_{t+1}) - rho^n Q_n(X_t)) Q_m(X_t)] for n = 1..n_max,
    m = 0..m_max, with the polynomials built at the supplied q."""
    if n_max > 8 or m_max > 8:
        raise ValueError("polynomial degrees above 8 are outside the contract")
    deg = max(n_max, m_max, 1)
    v = e.values
    tabs = qpoly.qhermite_table(v.ravel(), q, deg)
    tabs = tabs.reshape(deg + 1, *v.shape)
    out = []
    for n in range(1, n_max + 1):
        resid = tabs[n][:, 1:] - rho ** n * tabs[n][:, :-1]
        for m in range(0, m_max + 1):
            per_chain = (resid * tabs[m][:, :-1]).mean(axis=1)
            out.append(_gate(f"mart_n{n}_m{m}",
                             f"E[(Q_{n}(x_(t+1)) - rho^{n} Q_{n}(x_t)) Q_{m}(x_t)]",
                             per_chain, threshold))
    return out


def symmetry_checks(e: Ensemble,
                    threshold: float = DEFAULT_THRESHOLD) -> list[TestEntry]:
    """Gates the first and third moments near zero."""
    v = e.values
    return [
        _gate("sym_mean", "E[x]", v.mean(axis=1), threshold),
        _gate("sym_third", "E[x^3]", (v ** 3).mean(axis=1), threshold),
    ]


def standard_suite(e: Ensemble, p: FieldParams, c: Classification,
                   k_max: int = 5, degree: int = 4, n_max: int = 4,
                   m_max: int = 4,
                   threshold: float = DEFAULT_THRESHOLD) -> list[TestEntry]:
    """The full verification battery applicable to a classified parameter set.

    Correlation decay, weak-form conditional identities and the symmetry
    moments run for every existing case.  The polynomial eigen-increment
    rows run with the case's deformation parameter; for the scaled two-point
    family only the degree-1 row is an identity (the conditional second
    moment is chain-constant there, so higher rows are genuinely biased for
    non-degenerate radial laws) and the suite gates only that row.
    """
    entries = empirical_corr(e, p.rho, k_max=k_max, threshold=threshold)
    entries += weak_form_residuals(e, p, degree=degree, threshold=threshold)
    entries += symmetry_checks(e, threshold=threshold)
    q_for_case = None
    n_eff = n_max
    if isinstance(c, ExistsGaussian):
        q_for_case = 1.0
    elif isinstance(c, ExistsQGaussian):
        q_for_case = c.q
    elif isinstance(c, ExistsTwoPointSymmetric):
        q_for_case = -1.0
    elif isinstance(c, ExistsScaledTwoPoint):
        q_for_case = -1.0
        n_eff = 1
    if q_for_case is not None:
        entries += martingale_residuals(e, p.rho, q_for_case, n_max=n_eff,
                                        m_max=m_max, threshold=threshold)
    return entries


def build_report(entries: list[TestEntry], meta: dict) -> dict:
    """Machine-readable report with stable key order."""
    tests = [
        {
            "id": en.test_id,
            "statistic": en.statistic,
            "estimate": en.estimate,
            "stderr": en.stderr,
            "k": en.threshold,
            "pass": en.passed,
        }
        for en in entries
    ]
    failed = [en.test_id for en in entries if not en.passed]
    return {
        "meta": dict(meta),
        "tests": tests,
        "summary": {"n_fail": len(failed), "failed_ids": failed},
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def load_report(source) -> dict:
    """Read back a report (path, file object or JSON string)."""
    if hasattr(source, "read"):
        return json.load(source)
    text = str(source)
    if text.lstrip().startswith("{"):
        return json.loads(text)
    with open(text, "r") as fh:
        return json.load(fh)


def n_failures(report: dict) -> int:
    return int(report["summary"]["n_fail"])


def entries_as_dicts(entries: list[TestEntry]) -> list[dict]:
    return [asdict(e) for e in entries]
