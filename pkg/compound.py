"""
The compounding operator C_Q and the named compound families.

C_Q P is the law of X_1 + ... + X_Y with Y ~ P and X_i ~ Q i.i.d., i.e. the
mixture sum_y P(y) Q^{*y}. `compound_poisson_panjer` evaluates the compound
Poisson pmf by the Panjer recursion on a code path that shares nothing with
the convolution machinery, so the two can be compared against each other.
"""

import logging

import numpy as np

import settings
from dist_core import (
    PmfError, as_compounding, as_param_vector, bernoulli_sum_pmf, binomial_pmf,
    convolution_powers, convolve, moments, point_mass, poisson_pmf, settle,
    trim_upper_tail,
)

logger = logging.getLogger(__name__)

METHODS = ("mixture", "convolution")


class CompoundError(ValueError):
    """Invalid compound-distribution parameters."""


def _check_prob(p, name="p"):
    if not 0 <= p <= 1:
        raise CompoundError(f"{name} must lie in [0, 1], got {p}")


def _mix(offset, weights, powers, support_cap=None):
    """sum_y w(y) Q^{*y} on x = 0..L, plus the weighted tail of the powers."""
    used = [(w, powers[offset + i]) for i, w in enumerate(weights) if w != 0]
    if not used:
        return np.zeros(1), 0.0
    length = max(pw.last for _, pw in used) + 1
    if support_cap is not None:
        length = min(length, support_cap + 1)
    out = np.zeros(length)
    tail = 0.0
    for w, pw in used:
        tail += abs(w) * pw.tail_bound
        if pw.offset >= length:
            tail += abs(w) * pw.mass
            continue
        out += w * pw.values_on(0, length - 1)
        if pw.last >= length:
            tail += abs(w) * float(pw.probs[length - pw.offset:].sum())
    return out, tail


def compound_weights(offset, weights, q, support_cap=None):
    """
    sum_y w(y) Q^{*y}(x) for a signed weight vector w on y = offset, offset+1, ...

    Returns a dense array indexed by x = 0, 1, ...
    """
    q = as_compounding(q)
    weights = np.asarray(weights, dtype=np.float64)
    powers = convolution_powers(q, offset + weights.size - 1, support_cap)
    out, _ = _mix(offset, weights, powers, support_cap)
    return out


def compound(p, q, support_cap=None):
    """
    Compound distribution C_Q P.

    Args:
        p: Count distribution (Pmf)
        q: Compounding distribution on {1, 2, ...}
        support_cap: Evaluate only x <= support_cap; mass beyond goes to the tail

    Returns:
        Pmf on x >= 0
    """
    q = as_compounding(q)
    powers = convolution_powers(q, p.last, support_cap)
    out, tail = _mix(p.offset, p.probs, powers, support_cap)
    return settle(0, out, p.tail_bound + tail)


def compound_bernoulli(p, q):
    """CBern(p, Q): 1 - p at 0 and p Q(x) for x >= 1."""
    _check_prob(p)
    q = as_compounding(q)
    out = np.zeros(q.last + 1)
    out[0] = 1.0 - p
    out[q.offset:] += p * q.probs
    return settle(0, out, p * q.tail_bound)


def compound_binomial(n, p, q, method="mixture"):
    """CBin(n, p, Q), either as C_Q Bin(n, p) or as n-fold convolution of CBern(p, Q)."""
    if int(n) != n or n < 1:
        raise CompoundError(f"n must be a positive integer, got {n}")
    _check_prob(p)
    if method == "mixture":
        return compound(binomial_pmf(int(n), p), q)
    if method == "convolution":
        single = compound_bernoulli(p, q)
        result = point_mass(0)
        for _ in range(int(n)):
            result = convolve(result, single)
        return result
    raise CompoundError(f"unknown method {method!r}, expected one of {METHODS}")


def compound_bernoulli_sum(p, q, method="mixture"):
    """C_Q b_p for a Bernoulli parameter vector p."""
    try:
        p = as_param_vector(p)
    except PmfError as e:
        raise CompoundError(str(e)) from None
    if method == "mixture":
        return compound(bernoulli_sum_pmf(p), q)
    if method == "convolution":
        result = point_mass(0)
        for pi in p:
            result = convolve(result, compound_bernoulli(pi, q))
        return result
    raise CompoundError(f"unknown method {method!r}, expected one of {METHODS}")


def compound_poisson(lam, q, tail_eps=None, support_cap=None, min_terms=0):
    """
    CPo(lam, Q) as the Poisson mixture of convolution powers of Q.

    The Poisson index is cut at the first J with upper tail <= tail_eps/2 (or
    at min_terms if larger); without a support cap each convolution power is
    trimmed to upper-tail mass <= tail_eps/(2J).

    Args:
        lam: Poisson rate, > 0
        q: Compounding distribution
        tail_eps: Total truncation budget (default from settings)
        support_cap: Evaluate only x <= support_cap
        min_terms: Keep at least Poisson indices 0..min_terms

    Returns:
        Pmf with the accumulated truncation in tail_bound
    """
    tail_eps = settings.TAIL_EPS if tail_eps is None else tail_eps
    if not lam > 0:
        raise CompoundError(f"lambda must be > 0, got {lam}")
    q = as_compounding(q)
    po = poisson_pmf(lam, tail_eps / 2, n_min=min_terms)
    j_max = po.last
    powers = convolution_powers(q, j_max, support_cap)
    if support_cap is None:
        budget = tail_eps / (2 * max(j_max, 1))
        powers = [trim_upper_tail(pw, budget) for pw in powers]
    out, tail = _mix(0, po.dense(), powers, support_cap)
    logger.debug("CPo(%g): %d Poisson terms, %d support points", lam, j_max + 1, out.size)
    return settle(0, out, po.tail_bound + tail)


def compound_poisson_panjer(lam, q, n_max):
    """
    CPo(lam, Q) on {0..n_max} by the Panjer recursion
    C(0) = exp(-lam), C(x) = (lam/x) sum_{j=1..x} j Q(j) C(x - j).

    Q(0) = 0 always, so the initial value needs no Q(0) correction.
    """
    if not lam > 0:
        raise CompoundError(f"lambda must be > 0, got {lam}")
    if n_max < 0:
        raise CompoundError(f"n_max must be >= 0, got {n_max}")
    q = as_compounding(q)
    qv = q.inner.dense(n_max)
    jq = np.arange(n_max + 1) * qv
    c = np.zeros(n_max + 1)
    c[0] = np.exp(-lam)
    for x in range(1, n_max + 1):
        c[x] = lam / x * np.dot(jq[1:x + 1], c[x - 1::-1])
    return settle(0, c, 1.0)


def compound_third_moment(r, q):
    """E[Z^3] for Z ~ C_Q R via q3 r1 + 3 q1 q2 E[(Y)_2] + q1^3 E[(Y)_3]."""
    qm = moments(as_compounding(q).inner, 3)
    rm = moments(r, 3)
    q1, q2, q3 = qm.raw_moments
    return q3 * rm.mean + 3 * q1 * q2 * rm.falling(2) + q1 ** 3 * rm.falling(3)
