"""Paired-sample statistics: Student-t p-values, effect sizes, Cronbach's alpha.

Everything here is plain floating-point Python. The two-tailed p-value comes
from the identity

    p = 2 * (1 - F(|t|; df)) = I_x(df/2, 1/2),   x = df / (df + t^2)

where I_x is the regularized incomplete beta function, evaluated through its
continued-fraction expansion with the modified Lentz algorithm (convergence
tolerance 1e-10), so no statistics library is needed.

Two Cohen's d variants are reported for paired designs, because published
effect sizes are ambiguous about which one was used:

    d_z  = mean(diff) / sd(diff)
    d_av = mean(diff) / ((sd(pre) + sd(post)) / 2)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ..errors import (
    DegenerateMatrix,
    InvalidDf,
    LengthMismatch,
    TooFew,
    TooFewItems,
    ZeroVariance,
)

_CF_TOLERANCE = 1e-10
_CF_MAX_ITERATIONS = 500
_FPMIN = 1e-300


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta, modified Lentz evaluation."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITERATIONS + 1):
        m2 = 2 * m
        numerator = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + numerator * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + numerator / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        numerator = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + numerator * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + numerator / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOLERANCE:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}"
    )


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # the continued fraction converges fast only on one side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def t_to_p(t: float, df: int) -> float:
    """Two-tailed p-value of a t statistic with ``df`` degrees of freedom."""
    if not isinstance(df, int) or isinstance(df, bool) or df < 1:
        raise InvalidDf(f"degrees of freedom must be a positive integer, got {df!r}")
    if t == 0.0:
        return 1.0
    x = df / (df + float(t) * float(t))
    p = regularized_incomplete_beta(df / 2.0, 0.5, x)
    return min(max(p, math.ulp(0.0)), 1.0)


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def _sample_sd(values: Sequence[float], mean: float | None = None) -> float:
    center = _mean(values) if mean is None else mean
    ss = math.fsum((v - center) ** 2 for v in values)
    return math.sqrt(ss / (len(values) - 1))


@dataclass(frozen=True)
class PairedTestResult:
    n: int
    mean_pre: float
    mean_post: float
    mean_diff: float
    sd_diff: float
    t: float
    df: int
    p_two_tailed: float
    d_z: float
    d_av: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean_pre": self.mean_pre,
            "mean_post": self.mean_post,
            "mean_diff": self.mean_diff,
            "sd_diff": self.sd_diff,
            "t": self.t,
            "df": self.df,
            "p_two_tailed": self.p_two_tailed,
            "d_z": self.d_z,
            "d_av": self.d_av,
        }


def paired_t(pre: Sequence[float], post: Sequence[float]) -> PairedTestResult:
    """Paired-sample t-test on post - pre differences (sample sd, df = n - 1)."""
    if len(pre) != len(post):
        raise LengthMismatch(f"pre has {len(pre)} values, post has {len(post)}")
    n = len(pre)
    if n < 2:
        raise TooFew(f"need at least 2 pairs, got {n}")
    diffs = [float(b) - float(a) for a, b in zip(pre, post)]
    mean_diff = _mean(diffs)
    ss = math.fsum((d - mean_diff) ** 2 for d in diffs)
    sd_pre = _sample_sd([float(v) for v in pre])
    sd_post = _sample_sd([float(v) for v in post])
    # constant pre and constant post means the differences are constant too,
    # even when rounding leaves ss marginally above zero
    if ss == 0.0 or (sd_pre == 0.0 and sd_post == 0.0):
        raise ZeroVariance("differences have zero variance")
    sd_diff = math.sqrt(ss / (n - 1))
    t = mean_diff / (sd_diff / math.sqrt(n))
    df = n - 1
    return PairedTestResult(
        n=n,
        mean_pre=_mean([float(v) for v in pre]),
        mean_post=_mean([float(v) for v in post]),
        mean_diff=mean_diff,
        sd_diff=sd_diff,
        t=t,
        df=df,
        p_two_tailed=t_to_p(t, df),
        d_z=mean_diff / sd_diff,
        d_av=mean_diff / ((sd_pre + sd_post) / 2.0),
    )


@dataclass(frozen=True)
class ReliabilityResult:
    k_items: int
    alpha: float

    def to_dict(self) -> dict:
        return {"k_items": self.k_items, "alpha": self.alpha}


def cronbach_alpha(matrix: Sequence[Sequence[float]]) -> ReliabilityResult:
    """Cronbach's alpha over an (n respondents x k items) score matrix.

    alpha = k/(k-1) * (1 - sum(item variances) / variance(row sums)),
    all variances with the n-1 denominator.
    """
    n = len(matrix)
    if n < 2:
        raise DegenerateMatrix(f"need at least 2 respondents, got {n}")
    k = len(matrix[0])
    if any(len(row) != k for row in matrix):
        raise LengthMismatch("all rows must have the same number of items")
    if k < 2:
        raise TooFewItems(f"need at least 2 items, got {k}")
    rows = [[float(v) for v in row] for row in matrix]
    totals = [math.fsum(row) for row in rows]
    total_mean = _mean(totals)
    total_var = math.fsum((s - total_mean) ** 2 for s in totals) / (n - 1)
    if total_var == 0.0:
        raise DegenerateMatrix("total-score variance is zero")
    item_var_sum = 0.0
    for j in range(k):
        column = [row[j] for row in rows]
        col_mean = _mean(column)
        item_var_sum += math.fsum((v - col_mean) ** 2 for v in column) / (n - 1)
    alpha = (k / (k - 1)) * (1.0 - item_var_sum / total_var)
    return ReliabilityResult(k_items=k, alpha=alpha)
