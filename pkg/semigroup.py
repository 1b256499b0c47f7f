"""
The U_alpha interpolation from a count law P (alpha = 1) to Poisson(mean P)
(alpha = 0), its compound version, score functions, and the energy
functionals whose monotone decrease gives the maximum-entropy results.

U_alpha P is the law of sum_{i <= X} B_i + Z with X ~ P, B_i ~ Bern(alpha)
and Z ~ Poisson(lambda (1 - alpha)), computed exactly (binomial thinning
matrix, then a convolution).
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

import settings
from compound import compound, compound_bernoulli_sum, compound_binomial, compound_poisson, compound_weights
from concavity import ConcavityVerdict
from dist_core import (
    ParamVector, PmfError, TruncationWarning, as_compounding, as_param_vector,
    bernoulli_sum_pmf, convolve, moments, poisson_pmf, settle, size_bias,
)

logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 41
MONOTONE_SLACK = 1e-9
# log C(x) is trusted where the truncated mass is at most this fraction of C(x)
LOG_REL_ERROR = 1e-6


class SemigroupError(ValueError):
    """Invalid semigroup or energy-curve arguments."""


@dataclass(frozen=True, eq=False)
class ScoreTable:
    x: np.ndarray
    values: np.ndarray
    base_mean: float
    excluded: tuple = ()

    def weighted_mean(self, cqp):
        """sum_x C_Q P(x) r1(x); zero for the pmf the table was built from."""
        return float(np.dot(cqp.values_on(0, int(self.x.max()))[self.x], self.values))

    def is_nonincreasing(self, tol=1e-10):
        return bool(np.all(np.diff(self.values) <= tol))


@dataclass(frozen=True, eq=False)
class EnergyCurve:
    grid: np.ndarray
    values: np.ndarray
    derivative_estimates: np.ndarray
    clipped_mass: np.ndarray
    variable: str = "alpha"
    analytic_derivatives: np.ndarray = field(default=None)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise SemigroupError("energy values must be finite")

    @property
    def alphas(self):
        return self.grid

    def is_nonincreasing(self, slack=MONOTONE_SLACK):
        steps = np.diff(self.values)
        return bool(np.all(steps <= slack * (1 + np.abs(self.values[:-1]))))


def _check_grid(grid, lo, hi, name):
    grid = np.asarray(grid, dtype=np.float64).ravel()
    if grid.size == 0:
        raise SemigroupError(f"{name} grid is empty")
    if np.any(grid < lo - 1e-15) or np.any(grid > hi + 1e-15):
        raise SemigroupError(f"{name} grid must lie in [{lo:g}, {hi:g}]")
    if np.any(np.diff(grid) <= 0):
        raise SemigroupError(f"{name} grid must be strictly increasing")
    return np.clip(grid, lo, hi)


def _central_differences(grid, values):
    est = np.full(grid.size, np.nan)
    if grid.size >= 3:
        est[1:-1] = (values[2:] - values[:-2]) / (grid[2:] - grid[:-2])
    return est


# === 1. The semigroup ===

def u_alpha(p, alpha, tail_eps=None, poisson_terms=0):
    """
    U_alpha P: binomial thinning of P plus independent Poisson(lambda (1 - alpha)).

    Args:
        p: Count distribution with mean lambda
        alpha: Interpolation parameter in [0, 1]
        tail_eps: Truncation of the Poisson component
        poisson_terms: Keep at least this many Poisson terms

    Returns:
        Pmf with the same mean as p
    """
    if not 0 <= alpha <= 1:
        raise SemigroupError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 1:
        return p
    lam = p.mean
    x = p.support
    k = np.arange(p.last + 1)
    thinning = stats.binom.pmf(k[None, :], x[:, None], alpha)
    thinned = settle(0, p.probs @ thinning, p.tail_bound)
    noise_rate = lam * (1 - alpha)
    if noise_rate <= 0:
        return thinned
    return convolve(thinned, poisson_pmf(noise_rate, tail_eps, n_min=poisson_terms))


def u_alpha_q(p, q, alpha, tail_eps=None, poisson_terms=0, support_cap=None):
    """U^Q_alpha P = C_Q U_alpha P; CPo(lambda, Q) at alpha = 0 and C_Q P at alpha = 1."""
    return compound(u_alpha(p, alpha, tail_eps, poisson_terms), q, support_cap)


def _open_alpha(alpha):
    if not 0 < alpha < 1:
        raise SemigroupError(f"alpha must lie in (0, 1), got {alpha}")


def u_alpha_derivative(p, alpha, tail_eps=None, poisson_terms=0):
    """
    d/d alpha U_alpha P(y) for y = 0 .. last + 1, as

    (1/alpha) [lambda (U(y) - U(y-1)) - ((y+1) U(y+1) - y U(y))], U(-1) = 0.
    """
    _open_alpha(alpha)
    lam = p.mean
    u = u_alpha(p, alpha, tail_eps, poisson_terms)
    vals = u.dense(u.last + 2)
    y = np.arange(vals.size, dtype=np.float64)
    prev = np.concatenate(([0.0], vals[:-1]))
    nxt = np.concatenate((vals[1:], [0.0]))
    return (lam * (vals - prev) - ((y + 1) * nxt - y * vals)) / alpha


def u_alpha_derivative_rhs(p, alpha, y, tail_eps=None, poisson_terms=0):
    """The derivative identity evaluated at a single y."""
    if y < 0:
        raise SemigroupError(f"y must be >= 0, got {y}")
    deriv = u_alpha_derivative(p, alpha, tail_eps, poisson_terms)
    return float(deriv[y]) if y < deriv.size else 0.0


def u_alpha_q_derivative(p, q, alpha, tail_eps=None, poisson_terms=0):
    """d/d alpha U^Q_alpha P(x) = sum_y dU_alpha P(y) Q^{*y}(x)."""
    return compound_weights(0, u_alpha_derivative(p, alpha, tail_eps, poisson_terms), q)


# === 2. Scores ===

def score_r1(p, q, floor=None):
    """
    r1(x) = C_Q(P#)(x) / C_Q P(x) - 1 on the support of C_Q P.

    Points where C_Q P(x) <= floor are left out and listed in `excluded`.
    """
    floor = settings.UNDERFLOW_FLOOR if floor is None else floor
    lam = p.mean
    if not lam > 0:
        raise SemigroupError("the score needs a count law with positive mean")
    cqp = compound(p, q)
    biased = compound(size_bias(p), q)
    den = cqp.dense()
    num = biased.values_on(0, cqp.last)
    keep = den > floor
    x = np.flatnonzero(keep)
    values = num[keep] / den[keep] - 1.0
    excluded = tuple(int(v) for v in np.flatnonzero(~keep))
    if excluded:
        logger.debug("score: %d points below the underflow floor", len(excluded))
    return ScoreTable(x=x, values=values, base_mean=lam, excluded=excluded)


# === 3. Energy along the semigroup ===

def reference_cpo(p, q, tail_eps=None, extra=0):
    """
    CPo(mean P, Q) evaluated exactly on every x that U^Q_alpha P can reach.

    Returns:
        (cpo, cap, poisson_terms) with cap the largest x evaluated
    """
    q = as_compounding(q)
    lam = p.mean
    if not lam > 0:
        raise SemigroupError("the energy needs a count law with positive mean")
    poisson_terms = poisson_pmf(lam, tail_eps).last
    count_max = p.last + poisson_terms
    cap = count_max * q.last + extra
    cpo = compound_poisson(lam, q, tail_eps, support_cap=cap, min_terms=count_max + extra)
    return cpo, cap, poisson_terms


def _cross_entropy_clipped(w, log_ref, ok):
    """(-sum_{x ok} w(x) log ref(x), mass of w outside ok)."""
    wv = w.values_on(0, log_ref.size - 1)
    outside = float(wv[~ok].sum()) + float(w.probs[max(log_ref.size - w.offset, 0):].sum())
    return float(-np.dot(wv[ok], log_ref[ok])), outside


def _energy_at(p, q, alpha, tail_eps, poisson_terms, log_ref, ok):
    w = u_alpha_q(p, q, alpha, tail_eps, poisson_terms)
    return _cross_entropy_clipped(w, log_ref, ok)


def energy_curve(p, q, alpha_grid=None, tail_eps=None, n_jobs=None, floor=None):
    """
    E(alpha) = -sum_x U^Q_alpha P(x) log CPo(lambda, Q)(x) along a grid.

    E(0) = H(CPo(lambda, Q)); E(1) = H(C_Q P) + D(C_Q P || CPo(lambda, Q)).
    The sum skips x where CPo(x) <= floor; the skipped mass is reported.
    """
    floor = settings.UNDERFLOW_FLOOR if floor is None else floor
    n_jobs = settings.N_JOBS if n_jobs is None else n_jobs
    grid = np.linspace(0, 1, DEFAULT_GRID_POINTS) if alpha_grid is None else alpha_grid
    grid = _check_grid(grid, 0.0, 1.0, "alpha")
    q = as_compounding(q)
    cpo, cap, poisson_terms = reference_cpo(p, q, tail_eps)
    ref = cpo.dense(cap)
    ok = ref > floor
    log_ref = np.zeros_like(ref)
    log_ref[ok] = np.log(ref[ok])

    results = Parallel(n_jobs=n_jobs)(
        delayed(_energy_at)(p, q, float(a), tail_eps, poisson_terms, log_ref, ok) for a in grid
    )
    values = np.array([r[0] for r in results])
    clipped = np.array([r[1] for r in results])
    if clipped.max() > 1e-12:
        logger.warning("energy curve: up to %.3g mass outside the CPo support", clipped.max())
        warnings.warn(f"energy curve clipped mass up to {clipped.max():.3g}", TruncationWarning, stacklevel=2)
    return EnergyCurve(grid, values, _central_differences(grid, values), clipped, "alpha")


def _increasing_difference(log_ref, q, usable):
    """h(x) = log C(x) - sum_v Q(v) log C(x + v) for x with every x + v usable."""
    q = as_compounding(q)
    n = log_ref.size - q.last
    if n <= 0:
        return np.zeros(0), np.zeros(0, dtype=bool)
    h = log_ref[:n].copy()
    valid = usable[:n].copy()
    for v, qv in zip(range(q.offset, q.last + 1), q.probs):
        if qv == 0:
            continue
        h -= qv * log_ref[v:v + n]
        valid &= usable[v:v + n]
    return h, valid


def energy_derivative_analytic(p, q, alpha, tail_eps=None, floor=None):
    """
    E'(alpha) = (lambda/alpha) sum_x U^Q_alpha P(x) r1(x) (log C(x) - sum_v Q(v) log C(x+v)),

    with C = CPo(lambda, Q) and r1 the score of U^Q_alpha P against U_alpha P.
    U^Q_alpha P(x) r1(x) = C_Q(R#)(x) - C_Q R(x) with R = U_alpha P.
    """
    _open_alpha(alpha)
    floor = settings.UNDERFLOW_FLOOR if floor is None else floor
    q = as_compounding(q)
    lam = p.mean
    cpo, cap, poisson_terms = reference_cpo(p, q, tail_eps, extra=q.last)
    ref = cpo.dense(cap)
    log_ref = np.log(np.maximum(ref, floor))
    h, _ = _increasing_difference(log_ref, q, ref > floor)

    r = u_alpha(p, alpha, tail_eps, poisson_terms)
    flow = compound(size_bias(r), q).values_on(0, h.size - 1) - compound(r, q).values_on(0, h.size - 1)
    return lam / alpha * float(np.dot(flow, h))


def covariance_terms(p, q, alpha, tail_eps=None, floor=None):
    """
    (mu, f, g) of the E'(alpha) covariance: mu = U^Q_alpha P, f = its score,
    g(x) = log C(x) - sum_v Q(v) log C(x+v), over x where all are defined.
    """
    _open_alpha(alpha)
    floor = settings.UNDERFLOW_FLOOR if floor is None else floor
    q = as_compounding(q)
    cpo, cap, poisson_terms = reference_cpo(p, q, tail_eps, extra=q.last)
    ref = cpo.dense(cap)
    log_ref = np.log(np.maximum(ref, floor))
    g, valid = _increasing_difference(log_ref, q, ref > floor)

    r = u_alpha(p, alpha, tail_eps, poisson_terms)
    mu = compound(r, q).values_on(0, g.size - 1)
    biased = compound(size_bias(r), q).values_on(0, g.size - 1)
    keep = valid & (mu > floor)
    f = biased[keep] / mu[keep] - 1.0
    return mu[keep], f, g[keep]


def chebyshev_covariance(mu, f, g):
    """sum mu f g - (sum mu f)(sum mu g); <= 0 when f decreases and g increases."""
    mu = np.asarray(mu, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    return float(np.dot(mu, f * g) - np.dot(mu, f) * np.dot(mu, g))


def increasing_difference_gate(cpo, q, tol=None):
    """
    Whether log C(x) - sum_v Q(v) log C(x+v) is nondecreasing in x.

    A weaker sufficient condition than log-concavity of C for E' <= 0.
    """
    tol = settings.LC_TOL if tol is None else tol
    q = as_compounding(q)
    ref = cpo.dense()
    usable = ref > max(cpo.tail_bound / LOG_REL_ERROR, settings.UNDERFLOW_FLOOR)
    log_ref = np.zeros_like(ref)
    log_ref[usable] = np.log(ref[usable])
    h, valid = _increasing_difference(log_ref, q, usable)
    idx = np.flatnonzero(valid)
    if idx.size < 2:
        return ConcavityVerdict(True, None, 0.0, (0, max(int(idx.size) - 1, 0)), "too few points")
    lo, hi = int(idx[0]), int(idx[-1])
    pairs = np.flatnonzero(valid[:-1] & valid[1:])
    if pairs.size == 0:
        return ConcavityVerdict(True, None, 0.0, (lo, hi), "too few points")
    steps = h[pairs + 1] - h[pairs]
    margin = float(steps.min())
    # each log carries relative error at most tail / C(x); a step combines four such bounds
    slack = tol * max(1.0, float(np.abs(h[valid]).max())) + 4 * cpo.tail_bound / float(ref[usable].min())
    bad = np.flatnonzero(steps < -slack)
    if bad.size:
        return ConcavityVerdict(False, int(pairs[bad[0]]), margin, (lo, hi), "difference decreases")
    return ConcavityVerdict(True, None, margin, (lo, hi))


def third_moment_bound(lam, q):
    """lambda q3 + 3 lambda^2 q1 q2 + lambda^3 q1^3, with q_i the raw moments of Q."""
    if not lam > 0:
        raise SemigroupError(f"lambda must be > 0, got {lam}")
    q1, q2, q3 = moments(as_compounding(q).inner, 3).raw_moments
    return lam * q3 + 3 * lam ** 2 * q1 * q2 + lam ** 3 * q1 ** 3


# === 4. Bernoulli-sum flow ===

def parametrize_t(p, t):
    """((p1+p2)/2 + t, (p1+p2)/2 - t, p3, ..., pn)."""
    p = as_param_vector(p)
    if p.n < 2:
        raise SemigroupError("the t-flow needs at least two parameters")
    e = p.entries
    k = e[0] + e[1]
    if abs(t) > k / 2 + 1e-15:
        raise SemigroupError(f"t must lie in [{-k / 2:g}, {k / 2:g}], got {t}")
    try:
        return ParamVector(np.concatenate(([k / 2 + t, k / 2 - t], e[2:])))
    except PmfError as err:
        raise SemigroupError(str(err)) from None


def bernoulli_t_derivative(p, t, q):
    """
    d/dt C_Q b_{p_t}(x) = -2t sum_y b_{p~}(y) (Q^{*(y+2)} - 2 Q^{*(y+1)} + Q^{*y})(x),
    p~ = (p3, ..., pn). Returned as a dense array over x = 0, 1, ...
    """
    p = as_param_vector(p)
    parametrize_t(p, t)
    rest = bernoulli_sum_pmf(p.entries[2:]).dense()
    weights = np.convolve(rest, [1.0, -2.0, 1.0])
    return -2.0 * t * compound_weights(0, weights, q)


def energy_t_derivative_analytic(p, q, t, floor=None):
    """E'(t) = -sum_x d/dt C_Q b_{p_t}(x) log CBin(n, lambda/n, Q)(x)."""
    floor = settings.UNDERFLOW_FLOOR if floor is None else floor
    p = as_param_vector(p)
    ref = compound_binomial(p.n, p.total / p.n, q)
    deriv = bernoulli_t_derivative(p, t, q)
    log_ref = np.log(np.maximum(ref.values_on(0, deriv.size - 1), floor))
    return float(-np.dot(deriv, log_ref))


def energy_t_curve(p, q, t_grid=None, floor=None):
    """
    E(t) = -sum_x C_Q b_{p_t}(x) log CBin(n, lambda/n, Q)(x) on t in [0, (p1 - p2)/2].

    Args:
        p: Parameters with p1 >= p2 and n >= 2
        q: Compounding distribution
        t_grid: Grid inside [0, (p1 - p2)/2]; default 41 points (one when p1 = p2)

    Returns:
        EnergyCurve over t, with analytic derivatives at every grid point
    """
    floor = settings.UNDERFLOW_FLOOR if floor is None else floor
    p = as_param_vector(p)
    if p.n < 2:
        raise SemigroupError("the t-flow needs at least two parameters")
    p1, p2 = p.entries[0], p.entries[1]
    if p1 < p2:
        raise SemigroupError(f"need p1 >= p2, got {p1} < {p2}")
    if not p.total > 0:
        raise SemigroupError("parameters sum to zero")
    t_max = (p1 - p2) / 2
    if t_grid is None:
        t_grid = np.linspace(0, t_max, DEFAULT_GRID_POINTS) if t_max > 0 else [0.0]
    grid = _check_grid(t_grid, 0.0, t_max, "t")

    q = as_compounding(q)
    ref = compound_binomial(p.n, p.total / p.n, q)
    ref_vals = ref.dense()
    ok = ref_vals > floor
    log_ref = np.zeros_like(ref_vals)
    log_ref[ok] = np.log(ref_vals[ok])

    values, clipped, analytic = [], [], []
    for t in grid:
        w = compound_bernoulli_sum(parametrize_t(p, float(t)), q)
        e, out = _cross_entropy_clipped(w, log_ref, ok)
        values.append(e)
        clipped.append(out)
        analytic.append(energy_t_derivative_analytic(p, q, float(t), floor))
    values = np.array(values)
    return EnergyCurve(
        grid, values, _central_differences(grid, values), np.array(clipped), "t", np.array(analytic)
    )
