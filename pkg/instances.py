"""
Seeded random instances: log-concave compounding laws, ultra log-concave
and log-concave count laws, Bernoulli parameter vectors.

Run directly to write a small sample of instances as CSV:

    python instances.py --count 10 --seed 7 --output instances.csv
"""

import argparse

import numpy as np
import pandas as pd

import settings
from dist_core import ParamVector, as_compounding, make_pmf, poisson_pmf
from reports import format_point


def rng_for(seed=None):
    return np.random.default_rng(settings.SEED if seed is None else seed)


def _concave_log_weights(rng, size, scale):
    """Cumulative sums of nonincreasing random steps."""
    steps = np.sort(rng.normal(0.0, scale, max(size - 1, 0)))[::-1]
    return np.concatenate(([0.0], np.cumsum(steps)))


def random_lc_q(rng, max_support=6, scale=1.0):
    """Log-concave Q on {1, ..., m} with m <= max_support and Q(1) > 0."""
    m = int(rng.integers(1, max_support + 1))
    logw = _concave_log_weights(rng, m, scale)
    w = np.exp(logw - logw.max())
    return as_compounding(make_pmf(1, w, normalize=True))


def random_ulc_p(rng, max_len=12, lam=None):
    """
    Ultra log-concave P: Poisson weights times exp(concave) on {0..N}.

    Mass is truncated to {0..N}, which keeps P / Poisson log-concave.
    """
    lam = float(rng.uniform(0.3, 4.0)) if lam is None else lam
    n = int(rng.integers(2, max_len + 1))
    base = poisson_pmf(lam, n_min=n).probs[:n + 1]
    logw = np.log(base) + _concave_log_weights(rng, n + 1, 0.5)
    return make_pmf(0, np.exp(logw - logw.max()), normalize=True)


def random_lc_p(rng, max_len=12, scale=0.8):
    """Log-concave P on {0..N} with P(0), P(1) > 0."""
    n = int(rng.integers(2, max_len + 1))
    logw = _concave_log_weights(rng, n + 1, scale)
    return make_pmf(0, np.exp(logw - logw.max()), normalize=True)


def random_param_vector(rng, n=None, low=0.0, high=1.0):
    n = int(rng.integers(2, 7)) if n is None else n
    return ParamVector(rng.uniform(low, high, n))


def random_pmf(rng, max_len=6):
    """Arbitrary pmf on {0..N} with positive entries."""
    n = int(rng.integers(1, max_len + 1))
    return make_pmf(0, rng.uniform(0.05, 1.0, n), normalize=True)


def main():
    parser = argparse.ArgumentParser(description="Generate random test instances")
    parser.add_argument("--count", type=int, default=10, help="Instances per kind (default: 10)")
    parser.add_argument("--seed", type=int, default=settings.SEED, help=f"Seed (default: {settings.SEED})")
    parser.add_argument("--output", default="instances.csv", help="Output CSV file (default: instances.csv)")
    args = parser.parse_args()

    rng = rng_for(args.seed)
    rows = []
    for kind, make in (("lc-q", random_lc_q), ("ulc-p", random_ulc_p), ("lc-p", random_lc_p)):
        for i in range(args.count):
            pmf = make(rng)
            rows.append({"kind": kind, "index": i, "offset": pmf.offset, "probs": format_point(pmf.probs)})

    df = pd.DataFrame(rows)
    df.to_csv(args.output, index=False)
    print(f"Generated {len(df)} instances (seed {args.seed}) -> {args.output}")


if __name__ == "__main__":
    main()
