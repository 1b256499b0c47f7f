"""
Log-concavity predicates, the closed-form compound thresholds and the
binomial sums behind log-concavity of compound Poisson laws with two-point Q.

Failures of a predicate are returned as verdicts; only malformed input raises.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

import settings
from dist_core import as_compounding, convolution_power

logger = logging.getLogger(__name__)

SUPPORT_NOISE_FACTOR = 10.0


class ConcavityError(ValueError):
    """Invalid arguments to a concavity check."""


@dataclass(frozen=True)
class ConcavityVerdict:
    holds: bool
    first_violation: Optional[int]
    margin: float
    checked_support: tuple
    reason: str = ""

    def __post_init__(self):
        if self.holds != (self.first_violation is None):
            raise ConcavityError("verdict holds iff there is no violation")

    def to_dict(self):
        return {
            "holds": self.holds,
            "first_violation": self.first_violation,
            "margin": self.margin,
            "checked_support": list(self.checked_support),
            "reason": self.reason,
        }


@dataclass(frozen=True)
class NecessaryLambda:
    """Smallest lambda allowed by the x = 1 log-concavity inequality for CPo(lambda, Q)."""

    value: float
    never_log_concave: bool = False

    def __float__(self):
        return self.value


class ThresholdKind(Enum):
    GENERAL_BINOMIAL = "general-binomial"
    TWO_POINT = "two-point"
    GEOMETRIC = "geometric"


def _pmf_of(p):
    return p.inner if hasattr(p, "inner") else p


def _checked_block(p):
    """
    Entries treated as support: those above 10 * tail_bound.

    Returns (lo, values, gap) with lo the absolute index of values[0] and gap
    the absolute index of the first interior hole, if any.
    """
    mask = p.probs > SUPPORT_NOISE_FACTOR * p.tail_bound
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return p.offset, p.probs[:0], None
    a, b = int(idx[0]), int(idx[-1])
    block = mask[a:b + 1]
    gap = None
    if not block.all():
        gap = p.offset + a + int(np.argmin(block))
    return p.offset + a, p.probs[a:b + 1], gap


def is_log_concave(p, tol=None):
    """
    Contiguous support and p(x)^2 >= p(x+1) p(x-1) on the checked support.

    `tol` is relative: a violation must exceed tol * max(p)^2.
    """
    p = _pmf_of(p)
    tol = settings.LC_TOL if tol is None else tol
    lo, v, gap = _checked_block(p)
    hi = lo + v.size - 1
    if v.size == 0:
        return ConcavityVerdict(True, None, 0.0, (lo, lo), "no entries above the truncation noise")
    peak = float(v.max())
    if gap is not None:
        return ConcavityVerdict(False, gap, -peak ** 2, (lo, hi), "support is not an interval")
    if v.size < 3:
        return ConcavityVerdict(True, None, 0.0, (lo, hi))
    diff = v[1:-1] ** 2 - v[2:] * v[:-2]
    margin = float(diff.min())
    bad = np.flatnonzero(diff < -tol * peak ** 2)
    if bad.size:
        x = lo + 1 + int(bad[0])
        return ConcavityVerdict(False, x, margin, (lo, hi), f"p(x)^2 < p(x+1)p(x-1) at x={x}")
    return ConcavityVerdict(True, None, margin, (lo, hi))


def is_ultra_log_concave(p, tol=None):
    """x p(x)^2 >= (x+1) p(x+1) p(x-1) for all x >= 1, with contiguous support."""
    p = _pmf_of(p)
    tol = settings.LC_TOL if tol is None else tol
    lo, v, gap = _checked_block(p)
    hi = lo + v.size - 1
    if v.size == 0:
        return ConcavityVerdict(True, None, 0.0, (lo, lo), "no entries above the truncation noise")
    if gap is not None:
        peak = float(v.max())
        return ConcavityVerdict(False, gap, -peak ** 2, (lo, hi), "support is not an interval")
    if v.size < 3:
        verdict = ConcavityVerdict(True, None, 0.0, (lo, hi))
    else:
        x = np.arange(lo + 1, hi, dtype=np.float64)
        diff = x * v[1:-1] ** 2 - (x + 1) * v[2:] * v[:-2]
        scale = float((x * v[1:-1] ** 2).max())
        margin = float(diff.min())
        bad = np.flatnonzero(diff < -tol * scale)
        if bad.size:
            first = lo + 1 + int(bad[0])
            verdict = ConcavityVerdict(
                False, first, margin, (lo, hi), f"x p(x)^2 < (x+1) p(x+1) p(x-1) at x={first}"
            )
        else:
            verdict = ConcavityVerdict(True, None, margin, (lo, hi))
    if verdict.holds and not is_log_concave(p, tol).holds:
        logger.warning("ultra log-concave verdict without log-concavity on %s", p)
    return verdict


# === Thresholds and necessary conditions ===

def cbern_lc_threshold(q):
    """p* = Q(2) / (Q(2) + Q(1)^2); CBern(p, Q) is log-concave iff p >= p*."""
    q = as_compounding(q)
    q1, q2 = q(1), q(2)
    if q2 == 0:
        return 0.0
    return q2 / (q2 + q1 ** 2)


def cpo_necessary_lambda(q):
    """2 Q(2) / Q(1)^2; infinite (never log-concave) when Q(1) = 0."""
    q = as_compounding(q)
    q1, q2 = q(1), q(2)
    if q1 == 0:
        return NecessaryLambda(math.inf, never_log_concave=True)
    return NecessaryLambda(2 * q2 / q1 ** 2)


def nec2_terms(p, q):
    """
    The two sides of the x = 1 condition for C_Q P to be log-concave.

    Returns:
        (lhs, rhs) with lhs = (P(1)^2 - P(0)P(2)) / (P(0)P(1)) and rhs = Q(2)/Q(1)^2
    """
    p = _pmf_of(p)
    q = as_compounding(q)
    p0, p1, p2 = p(0), p(1), p(2)
    if p0 <= 0 or p1 <= 0:
        raise ConcavityError("P(0) and P(1) must be positive (zero denominator)")
    lhs = (p1 ** 2 - p0 * p2) / (p0 * p1)
    q1, q2 = q(1), q(2)
    if q2 == 0:
        rhs = 0.0
    elif q1 == 0:
        rhs = math.inf
    else:
        rhs = q2 / q1 ** 2
    return lhs, rhs


def nec2_check(p, q, tol=None):
    """Necessary condition for C_Q P to be log-concave, compared with a relative slack."""
    tol = settings.LC_TOL if tol is None else tol
    lhs, rhs = nec2_terms(p, q)
    if math.isinf(rhs):
        return False
    return lhs >= rhs - tol * max(1.0, abs(rhs))


def bernoulli_sum_necessary_lhs(p):
    """
    sum r_i + sum r_i^2 / sum r_i with r_i = p_i / (1 - p_i).

    C_Q b_p can only be log-concave if this is >= 2 Q(2) / Q(1)^2.
    """
    p = np.asarray(list(p), dtype=np.float64)
    if np.any(p <= 0) or np.any(p >= 1):
        raise ConcavityError("parameters must lie strictly inside (0, 1)")
    r = p / (1 - p)
    return float(r.sum() + (r ** 2).sum() / r.sum())


def example16_thresholds(kind, n=None, q=None, alpha=None):
    """
    Smallest lambda for which the maximum-entropy results apply.

    Args:
        kind: "general-binomial" (needs n and q as a CompoundingDist),
              "two-point" (q = Q(1) in (0, 1]), or "geometric" (alpha in (0, 1])

    Returns:
        float threshold
    """
    try:
        kind = ThresholdKind(kind)
    except ValueError:
        raise ConcavityError(f"unknown threshold kind {kind!r}") from None
    if kind is ThresholdKind.GENERAL_BINOMIAL:
        if n is None or q is None or int(n) != n or n < 1:
            raise ConcavityError("general-binomial needs an integer n >= 1 and a compounding Q")
        q = as_compounding(q)
        q1, q2 = q(1), q(2)
        if q1 ** 2 + q2 == 0:
            raise ConcavityError("Q(1) and Q(2) are both zero")
        return n * q2 / (q1 ** 2 + q2)
    if kind is ThresholdKind.TWO_POINT:
        if q is None or not 0 < q <= 1:
            raise ConcavityError(f"two-point needs q in (0, 1], got {q}")
        return 2 * (1 - q) / q ** 2
    if alpha is None or not 0 < alpha <= 1:
        raise ConcavityError(f"geometric needs alpha in (0, 1], got {alpha}")
    return 2 * (1 - alpha) / alpha


def two_point_ratio_condition(p, q, tol=None):
    """
    (x+1) P(x+1) / P(x) >= 2 Q(2) / Q(1)^2 for consecutive support points of P.

    Only the stored support is visited, so for P with a nonzero tail the check
    is weaker than the condition on the whole support; the verdict says so.
    """
    p = _pmf_of(p)
    tol = settings.LC_TOL if tol is None else tol
    bound = cpo_necessary_lambda(q)
    truncated = p.tail_bound > 0
    note = "stored support only; tail not checked" if truncated else ""
    lo, v, gap = _checked_block(p)
    hi = lo + v.size - 1
    if gap is not None:
        return ConcavityVerdict(False, gap, -math.inf, (lo, hi), "support is not an interval")
    if bound.never_log_concave:
        return ConcavityVerdict(False, lo, -math.inf, (lo, hi), "Q(1) = 0")
    if v.size < 2:
        return ConcavityVerdict(True, None, math.inf, (lo, hi), note)
    x = np.arange(lo, hi, dtype=np.float64)
    ratio = (x + 1) * v[1:] / v[:-1]
    diff = ratio - bound.value
    margin = float(diff.min())
    bad = np.flatnonzero(diff < -tol * max(1.0, bound.value))
    if bad.size:
        return ConcavityVerdict(False, lo + int(bad[0]), margin, (lo, hi), note or "ratio below 2Q(2)/Q(1)^2")
    return ConcavityVerdict(True, None, margin, (lo, hi), note)


def keilson_check(q, m, n, x_max, tol=None):
    """Q^{*m}(x+1) Q^{*n}(x) >= Q^{*m}(x) Q^{*n}(x+1) for 0 <= x <= x_max, m >= n."""
    tol = settings.LC_TOL if tol is None else tol
    if n < 0 or m < n:
        raise ConcavityError(f"need m >= n >= 0, got m={m}, n={n}")
    q = as_compounding(q)
    if not is_log_concave(q.inner, tol).holds:
        raise ConcavityError("keilson_check needs a log-concave Q")
    qm = convolution_power(q, m).dense(x_max + 1)
    qn = convolution_power(q, n).dense(x_max + 1)
    diff = qm[1:] * qn[:-1] - qm[:-1] * qn[1:]
    scale = max(float(qm.max()) * float(qn.max()), np.finfo(float).tiny)
    margin = float(diff.min())
    bad = np.flatnonzero(diff < -tol * scale)
    if bad.size:
        return ConcavityVerdict(False, int(bad[0]), margin, (0, x_max), "ratio not increasing")
    return ConcavityVerdict(True, None, margin, (0, x_max))


# === Exact binomial sums ===

def _binom(n, k):
    if n < 0 or k < 0 or k > n:
        return 0
    return math.comb(n, k)


def _tech2_term(r, x, y):
    return (
        _binom(2 * x - r, x - y) * _binom(2 * r - 2 * x, 2 * y - x)
        - _binom(2 * x - r, x + 1 - y) * _binom(2 * r - 2 * x, 2 * y - x - 1)
    )


def tech2_sum(part, r, x, s):
    """
    Alternating double-binomial sum, in exact integers.

    part "a": r = 2t, sum over y = t-s .. t+s.
    part "b": r = 2t+1 and x != r, sum over y = t-s .. t+1+s.
    Binomials with a negative upper index or an out-of-range lower index are 0.
    """
    if part not in ("a", "b"):
        raise ConcavityError(f"part must be 'a' or 'b', got {part!r}")
    if r < 0 or x < 0:
        raise ConcavityError(f"need r >= 0 and x >= 0, got r={r}, x={x}")
    if part == "a":
        if r % 2:
            raise ConcavityError(f"part a needs even r, got {r}")
        t = r // 2
        y_hi_extra = 0
    else:
        if r % 2 == 0:
            raise ConcavityError(f"part b needs odd r, got {r}")
        if x == r:
            raise ConcavityError("part b excludes x = r")
        t = (r - 1) // 2
        y_hi_extra = 1
    if not 0 <= s <= t:
        raise ConcavityError(f"s must lie in [0, {t}], got {s}")
    return sum(_tech2_term(r, x, y) for y in range(t - s, t + y_hi_extra + s + 1))
