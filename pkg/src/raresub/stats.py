"""Special functions and the tests built on them.

Regularized incomplete beta and gamma functions use the classic series /
modified-Lentz continued-fraction evaluations; no scipy at runtime.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import OutOfRangeP, TooFewSamples, ZeroMarginal

log = logging.getLogger(__name__)

REL_TOL = 1e-15
MAX_ITER = 100_000
_TINY = 1e-300


@dataclass(frozen=True)
class TwoSampleResult:
    effect: float
    t_stat: float
    df: float
    p_value: float
    # both groups constant with different means: t is +/-inf by convention
    degenerate: bool = False


@dataclass(frozen=True)
class ContingencyResult:
    observed: np.ndarray
    chi2: float
    dof: int
    p_value: float
    cramers_v: float
    cramers_v_full: float
    p_underflow: bool = False
    min_expected: float = float("nan")


# ---------------------------------------------------------------- incomplete beta

def _betacf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < REL_TOL:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def _t_tail(t: float, df: float) -> float:
    """P(T > |t|) for Student's t, computed without cancellation."""
    t = abs(t)
    if math.isinf(t):
        return 0.0
    # x = df / (df + t^2), written to stay accurate for tiny t
    x = df / (df + t * t)
    if x > 0.5:
        # I_x(df/2, 1/2) = 1 - I_{1-x}(1/2, df/2); 1-x computed directly
        one_minus_x = t * t / (df + t * t)
        return 0.5 * (1.0 - betainc(0.5, df / 2.0, one_minus_x))
    return 0.5 * betainc(df / 2.0, 0.5, x)


def t_cdf(x: float, df: float) -> float:
    if df <= 0:
        raise ValueError("df must be positive")
    if x == 0:
        return 0.5
    tail = _t_tail(x, df)
    return tail if x < 0 else 1.0 - tail


def t_sf_two_sided(t: float, df: float) -> float:
    return min(1.0, 2.0 * _t_tail(t, df))


# ---------------------------------------------------------------- incomplete gamma

def _gamma_series(a: float, x: float) -> float:
    ap = a
    total = delta = 1.0 / a
    for _ in range(MAX_ITER):
        ap += 1.0
        delta *= x / ap
        total += delta
        if abs(delta) < abs(total) * REL_TOL:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gamma_cf(a: float, x: float) -> float:
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < REL_TOL:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise ArithmeticError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def gamma_p(a: float, x: float) -> float:
    return 1.0 - gamma_q(a, x)


def gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def chi2_sf(x: float, dof: float) -> float:
    return gamma_q(dof / 2.0, x / 2.0)


# ---------------------------------------------------------------- tests

def welch_t(group_a: Sequence[float], group_b: Sequence[float]) -> TwoSampleResult:
    a = np.asarray(group_a, dtype=np.float64)
    b = np.asarray(group_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise TooFewSamples("each group needs at least two values")
    return _welch(a.mean(), a.var(ddof=1), a.size, b.mean(), b.var(ddof=1), b.size)


def _welch(mean_a, var_a, n_a, mean_b, var_b, n_b) -> TwoSampleResult:
    effect = float(mean_a - mean_b)
    sa, sb = var_a / n_a, var_b / n_b
    se2 = sa + sb
    if se2 == 0:
        df = float(n_a + n_b - 2)
        if effect == 0:
            return TwoSampleResult(0.0, 0.0, df, 1.0, degenerate=True)
        return TwoSampleResult(effect, math.copysign(math.inf, effect), df, 0.0, degenerate=True)
    t = effect / math.sqrt(se2)
    # shares of se2 keep the squares from underflowing on tiny variances
    wa, wb = sa / se2, sb / se2
    df = 1.0 / (wa * wa / (n_a - 1) + wb * wb / (n_b - 1))
    return TwoSampleResult(effect, float(t), float(df), float(t_sf_two_sided(t, df)))


def welch_t_columns(in_group: np.ndarray, out_group: np.ndarray) -> list[TwoSampleResult]:
    """Column-wise Welch tests; each column is one gene."""
    A = np.asarray(in_group, dtype=np.float64)
    B = np.asarray(out_group, dtype=np.float64)
    if A.shape[0] < 2 or B.shape[0] < 2:
        raise TooFewSamples("each group needs at least two rows")
    ma, mb = A.mean(axis=0), B.mean(axis=0)
    va, vb = A.var(axis=0, ddof=1), B.var(axis=0, ddof=1)
    na, nb = A.shape[0], B.shape[0]
    return [_welch(ma[j], va[j], na, mb[j], vb[j], nb) for j in range(A.shape[1])]


def bh_fdr(p_values: Sequence[float]) -> np.ndarray:
    """Benjamini-Hochberg step-up q-values, returned in input order."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("p_values must be one-dimensional")
    if p.size == 0:
        return p.copy()
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise OutOfRangeP("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    # m / rank >= 1 exactly, so q >= p survives rounding
    ranked = p[order] * (m / np.arange(1, m + 1))
    ranked = np.minimum.accumulate(ranked[::-1])[::-1]
    q = np.empty(m)
    q[order] = np.minimum(ranked, 1.0)
    return q


def chi_square_independence(table) -> ContingencyResult:
    """Pearson chi-square test of independence with Cramer's V.

    ``cramers_v`` uses the usual ``n * min(r - 1, c - 1)`` denominator;
    ``cramers_v_full`` divides by ``n * min(r, c)`` instead. The p-value is
    clamped to the smallest positive double when it underflows.
    """
    O = np.asarray(table, dtype=np.float64)
    if O.ndim != 2 or O.shape[0] < 2 or O.shape[1] < 2:
        raise ValueError("contingency table must be at least 2x2")
    if np.any(O < 0) or not np.all(np.isfinite(O)):
        raise ValueError("counts must be finite and non-negative")
    n = O.sum()
    rows, cols = O.sum(axis=1), O.sum(axis=0)
    if n <= 0 or np.any(rows == 0) or np.any(cols == 0):
        raise ZeroMarginal("table has an all-zero row or column")
    E = np.outer(rows, cols) / n
    chi2 = float(((O - E) ** 2 / E).sum())
    r, c = O.shape
    dof = (r - 1) * (c - 1)
    if E.min() < 5:
        log.warning("chi-square: %d expected counts below 5", int((E < 5).sum()))
    p = chi2_sf(chi2, dof)
    underflow = p <= 0.0
    if underflow:
        p = float(np.nextafter(0.0, 1.0))
    v = math.sqrt(chi2 / (n * min(r - 1, c - 1)))
    v_full = math.sqrt(chi2 / (n * min(r, c)))
    return ContingencyResult(O, chi2, dof, p, min(v, 1.0), min(v_full, 1.0), underflow, float(E.min()))
