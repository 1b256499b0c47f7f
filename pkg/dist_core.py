"""
Truncated probability mass functions on the nonnegative integers.

A `Pmf` is a dense vector of probabilities starting at `offset`, together
with `tail_bound`, an upper bound on the probability mass that lies beyond
the last stored index. Every operation here is a pure function returning a
new immutable value.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

import settings

logger = logging.getLogger(__name__)

MASS_TOL = 1e-9
ENTROPY_TAIL_WARN = 1e-6


class PmfError(ValueError):
    """Invalid pmf construction or arithmetic."""


class SupportError(PmfError):
    """p(x) > 0 where the reference pmf vanishes."""

    def __init__(self, x, message=None):
        self.x = int(x)
        super().__init__(message or f"support violation at x={self.x}")


class TruncationWarning(UserWarning):
    """A truncated pmf carries enough tail mass to affect a result."""


# === 1. Value types ===

@dataclass(frozen=True, eq=False)
class Pmf:
    offset: int
    probs: np.ndarray
    tail_bound: float = 0.0

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64).ravel()
        if probs.size == 0:
            raise PmfError("probs must be nonempty")
        if not np.all(np.isfinite(probs)):
            raise PmfError("probs must be finite")
        if np.any(probs < 0):
            x = self.offset + int(np.argmax(probs < 0))
            raise PmfError(f"negative probability at x={x}")
        if int(self.offset) != self.offset or self.offset < 0:
            raise PmfError(f"offset must be a nonnegative integer, got {self.offset}")
        tail = float(self.tail_bound)
        if not tail >= 0:
            raise PmfError(f"tail_bound must be >= 0, got {self.tail_bound}")
        total = float(probs.sum())
        if abs(total + tail - 1.0) > MASS_TOL:
            raise PmfError(f"mass {total:.12g} + tail {tail:.3g} is not 1")

        nonzero = np.flatnonzero(probs)
        if nonzero.size == 0:
            raise PmfError("all probabilities are zero")
        first, last = int(nonzero[0]), int(nonzero[-1])
        probs = probs[first:last + 1].copy()
        probs.setflags(write=False)

        object.__setattr__(self, "offset", int(self.offset) + first)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "tail_bound", tail)

    @property
    def last(self):
        """Largest stored support point."""
        return self.offset + self.probs.size - 1

    @property
    def support(self):
        return np.arange(self.offset, self.last + 1)

    @property
    def mass(self):
        return float(self.probs.sum())

    @property
    def mean(self):
        return float(np.dot(self.support, self.probs))

    def __call__(self, x):
        x = int(x)
        if x < self.offset or x > self.last:
            return 0.0
        return float(self.probs[x - self.offset])

    def values_on(self, lo, hi):
        """Probabilities at x = lo..hi (zeros outside the stored range)."""
        out = np.zeros(max(hi - lo + 1, 0))
        a, b = max(lo, self.offset), min(hi, self.last)
        if a <= b:
            out[a - lo:b - lo + 1] = self.probs[a - self.offset:b - self.offset + 1]
        return out

    def dense(self, n_max=None):
        """Probabilities at x = 0..n_max (default: up to `last`)."""
        return self.values_on(0, self.last if n_max is None else n_max)

    def to_dict(self):
        return {
            "offset": self.offset,
            "probs": [float(v) for v in self.probs],
            "tail_bound": self.tail_bound,
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            return make_pmf(int(doc["offset"]), doc["probs"], float(doc.get("tail_bound", 0.0)))
        except (KeyError, TypeError) as e:
            raise PmfError(f"not a pmf document: {e}") from None

    def __repr__(self):
        head = ", ".join(f"{v:.4g}" for v in self.probs[:6])
        more = ", ..." if self.probs.size > 6 else ""
        return f"Pmf(offset={self.offset}, probs=[{head}{more}], tail_bound={self.tail_bound:.2g})"


@dataclass(frozen=True, eq=False)
class CompoundingDist:
    """A pmf supported on {1, 2, ...}."""

    inner: Pmf

    def __post_init__(self):
        if not isinstance(self.inner, Pmf):
            raise PmfError("CompoundingDist wraps a Pmf")
        if self.inner.offset < 1:
            raise PmfError(f"compounding pmf must live on x >= 1, offset is {self.inner.offset}")

    @property
    def offset(self):
        return self.inner.offset

    @property
    def last(self):
        return self.inner.last

    @property
    def probs(self):
        return self.inner.probs

    @property
    def tail_bound(self):
        return self.inner.tail_bound

    @property
    def mean(self):
        return self.inner.mean

    def __call__(self, x):
        return self.inner(x)

    def to_dict(self):
        return self.inner.to_dict()

    def __repr__(self):
        return f"CompoundingDist({self.inner!r})"


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    raw_moments: tuple
    falling_factorial_moments: tuple

    def raw(self, k):
        return self.raw_moments[k - 1]

    def falling(self, k):
        return self.falling_factorial_moments[k - 1]


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Bernoulli parameters (p_1, ..., p_n)."""

    entries: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.float64).ravel()
        if not np.all(np.isfinite(entries)) or np.any(entries < 0) or np.any(entries > 1):
            raise PmfError(f"Bernoulli parameters must lie in [0, 1]: {entries.tolist()}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def n(self):
        return int(self.entries.size)

    @property
    def total(self):
        """The mean lambda of the Bernoulli sum."""
        return float(self.entries.sum())

    def __iter__(self):
        return iter(float(v) for v in self.entries)

    def __repr__(self):
        return f"ParamVector({[float(v) for v in self.entries]})"


def as_param_vector(p):
    return p if isinstance(p, ParamVector) else ParamVector(p)


# === 2. Construction ===

def make_pmf(offset, weights, tail_bound=0.0, normalize=False):
    """
    Build a canonical Pmf.

    Args:
        offset: Smallest support point
        weights: Nonnegative weights for x = offset, offset+1, ...
        tail_bound: Mass bound beyond the last weight
        normalize: Rescale weights so they sum to 1 - tail_bound

    Returns:
        Pmf
    """
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.size == 0:
        raise PmfError("weights must be nonempty")
    if np.any(w < 0):
        raise PmfError("weights must be nonnegative")
    total = float(w.sum())
    if total <= 0:
        raise PmfError("weights are all zero")
    if normalize:
        w = w * ((1.0 - tail_bound) / total)
    return Pmf(offset, w, tail_bound)


def point_mass(x=0):
    return Pmf(x, np.ones(1), 0.0)


def settle(offset, probs, bound):
    """Pmf whose tail is the missing mass, capped by a propagated bound."""
    probs = np.clip(probs, 0.0, None)
    tail = min(max(1.0 - float(probs.sum()), 0.0), max(bound, 0.0))
    return Pmf(offset, probs, tail)


# === 3. Arithmetic ===

def convolve(a, b):
    """Distribution of the sum of independent a and b."""
    a = a.inner if isinstance(a, CompoundingDist) else a
    b = b.inner if isinstance(b, CompoundingDist) else b
    probs = np.convolve(a.probs, b.probs)
    return settle(a.offset + b.offset, probs, a.tail_bound + b.tail_bound)


def convolution_power(q, j):
    """j-fold self convolution; j = 0 gives the point mass at 0."""
    if j < 0:
        raise PmfError(f"convolution power must be >= 0, got {j}")
    base = q.inner if isinstance(q, CompoundingDist) else q
    result = point_mass(0)
    while j:
        if j & 1:
            result = convolve(result, base)
        j >>= 1
        if j:
            base = convolve(base, base)
    return result


def convolution_powers(q, j_max, support_cap=None):
    """[Q^{*0}, ..., Q^{*j_max}] built iteratively, optionally cut at support_cap."""
    powers = [point_mass(0)]
    for _ in range(j_max):
        nxt = convolve(powers[-1], q)
        if support_cap is not None and nxt.offset <= support_cap < nxt.last:
            nxt = truncate(nxt, support_cap)
        powers.append(nxt)
    return powers


def truncate(p, n_max):
    """Drop x > n_max, moving the removed mass into tail_bound."""
    if n_max < p.offset:
        raise PmfError(f"cannot truncate below the support (offset {p.offset}, n_max {n_max})")
    if n_max >= p.last:
        return p
    kept = p.probs[:n_max - p.offset + 1]
    removed = float(p.probs[n_max - p.offset + 1:].sum())
    return Pmf(p.offset, kept, p.tail_bound + removed)


def trim_upper_tail(p, eps):
    """Drop the largest upper tail with mass <= eps."""
    if eps <= 0 or p.probs.size == 1:
        return p
    upper = np.cumsum(p.probs[::-1])
    k = int(np.searchsorted(upper, eps, side="right"))
    k = min(k, p.probs.size - 1)
    if k == 0:
        return p
    return Pmf(p.offset, p.probs[:-k], p.tail_bound + float(upper[k - 1]))


def sup_distance(a, b):
    """max_x |a(x) - b(x)| over both stored ranges."""
    lo = min(a.offset, b.offset)
    hi = max(a.last, b.last)
    return float(np.max(np.abs(a.values_on(lo, hi) - b.values_on(lo, hi))))


# === 4. Functionals ===

def entropy(p, base=None):
    """
    Discrete entropy -sum p(x) log p(x), with 0 log 0 = 0.

    Natural log unless `base` is given (base=2 gives bits).
    """
    if p.tail_bound > ENTROPY_TAIL_WARN:
        logger.warning("entropy of a pmf with tail_bound %.3g", p.tail_bound)
        warnings.warn(
            f"tail_bound {p.tail_bound:.3g} exceeds {ENTROPY_TAIL_WARN:g}; entropy is truncated",
            TruncationWarning,
            stacklevel=2,
        )
    h = float(special.entr(p.probs).sum())
    return h / np.log(base) if base else h


def relative_entropy(p, q, base=None):
    """
    D(p||q) = sum p(x) log(p(x)/q(x)) over the support of p.

    Raises:
        SupportError: p(x) > 0 where q(x) = 0 (or x lies beyond q's stored range)
    """
    pv = p.probs
    qv = q.values_on(p.offset, p.last)
    bad = np.flatnonzero((pv > 0) & (qv <= 0))
    if bad.size:
        raise SupportError(p.offset + int(bad[0]))
    d = float(special.rel_entr(pv, qv).sum())
    return d / np.log(base) if base else d


def cross_entropy(p, q, base=None):
    """-sum p(x) log q(x); equals entropy(p) + relative_entropy(p, q)."""
    pv = p.probs
    qv = q.values_on(p.offset, p.last)
    bad = np.flatnonzero((pv > 0) & (qv <= 0))
    if bad.size:
        raise SupportError(p.offset + int(bad[0]))
    mask = pv > 0
    h = float(-np.dot(pv[mask], np.log(qv[mask])))
    return h / np.log(base) if base else h


def moments(p, k):
    """Raw and falling-factorial moments of orders 1..k."""
    if k < 1:
        raise PmfError(f"moment order must be >= 1, got {k}")
    x = p.support.astype(np.float64)
    raw, falling = [], []
    power = np.ones_like(x)
    fact = np.ones_like(x)
    for i in range(1, k + 1):
        power = power * x
        fact = fact * (x - (i - 1))
        raw.append(float(np.dot(p.probs, power)))
        falling.append(float(np.dot(p.probs, fact)))
    return MomentSummary(mean=falling[0], raw_moments=tuple(raw), falling_factorial_moments=tuple(falling))


def size_bias(p):
    """p#(y) = (y+1) p(y+1) / mean(p)."""
    mu = p.mean
    if not mu > 0:
        raise PmfError("size-biasing needs a positive mean")
    x = p.support.astype(np.float64)
    weights = x * p.probs / mu
    if p.offset == 0:
        return settle(0, weights[1:], 1.0)
    return settle(p.offset - 1, weights, 1.0)


# === 5. Named distributions ===

def poisson_pmf(lam, tail_eps=None, n_min=0):
    """
    Poisson(lam) on {0..N}, N the first index whose upper tail is <= tail_eps.

    Args:
        lam: Rate, > 0
        tail_eps: Tail mass allowed beyond N (default from settings)
        n_min: Keep at least x = 0..n_min

    Returns:
        Pmf with tail_bound = P(X > N)
    """
    tail_eps = settings.TAIL_EPS if tail_eps is None else tail_eps
    if not lam > 0:
        raise PmfError(f"Poisson rate must be > 0, got {lam}")
    if not 0 < tail_eps < 1:
        raise PmfError(f"tail_eps must lie in (0, 1), got {tail_eps}")
    n = int(max(stats.poisson.isf(tail_eps, lam), 0))
    while n > 0 and stats.poisson.sf(n - 1, lam) <= tail_eps:
        n -= 1
    while stats.poisson.sf(n, lam) > tail_eps:
        n += 1
    n = max(n, int(n_min))
    x = np.arange(n + 1)
    probs = stats.poisson.pmf(x, lam)
    return settle(0, probs, float(stats.poisson.sf(n, lam)))


def binomial_pmf(n, p):
    if n < 0 or not 0 <= p <= 1:
        raise PmfError(f"invalid binomial parameters n={n}, p={p}")
    return settle(0, stats.binom.pmf(np.arange(n + 1), n, p), 0.0)


def bernoulli_sum_pmf(p):
    """Exact law of sum_i Bern(p_i) by sequential convolution."""
    p = as_param_vector(p)
    probs = np.ones(1)
    for pi in p:
        probs = np.convolve(probs, [1.0 - pi, pi])
    return settle(0, probs, 0.0)


def geometric_pmf(alpha, tail_eps=None):
    """P(x) = alpha (1 - alpha)^x on x >= 0."""
    tail_eps = settings.TAIL_EPS if tail_eps is None else tail_eps
    if not 0 < alpha <= 1:
        raise PmfError(f"geometric parameter must lie in (0, 1], got {alpha}")
    if alpha == 1:
        return point_mass(0)
    n = int(np.ceil(np.log(tail_eps) / np.log1p(-alpha)))
    x = np.arange(n)
    return settle(0, alpha * (1 - alpha) ** x, (1 - alpha) ** n)


# === 6. Compounding distributions ===

def as_compounding(q):
    return q if isinstance(q, CompoundingDist) else CompoundingDist(q)


def point_mass_q(k=1):
    if k < 1:
        raise PmfError(f"compounding point mass must sit at k >= 1, got {k}")
    return CompoundingDist(point_mass(k))


def uniform_q(lo=1, hi=2):
    if lo < 1 or hi < lo:
        raise PmfError(f"invalid uniform range {lo}..{hi}")
    n = hi - lo + 1
    return CompoundingDist(Pmf(lo, np.full(n, 1.0 / n), 0.0))


def two_point_q(q):
    """Q(1) = q, Q(2) = 1 - q."""
    if not 0 < q <= 1:
        raise PmfError(f"two-point weight must lie in (0, 1], got {q}")
    return CompoundingDist(Pmf(1, [q, 1.0 - q], 0.0))


def geometric_q(alpha, tail_eps=None, n_max=None):
    """Q(x) = alpha (1 - alpha)^(x-1) on x >= 1, cut at n_max or at tail_eps."""
    tail_eps = settings.TAIL_EPS if tail_eps is None else tail_eps
    if not 0 < alpha <= 1:
        raise PmfError(f"geometric parameter must lie in (0, 1], got {alpha}")
    if alpha == 1:
        return point_mass_q(1)
    if n_max is None:
        n_max = max(int(np.ceil(np.log(tail_eps) / np.log1p(-alpha))), 1)
    x = np.arange(n_max)
    return CompoundingDist(settle(1, alpha * (1 - alpha) ** x, (1 - alpha) ** n_max))
