import math

import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from compound import compound, compound_bernoulli, compound_bernoulli_sum, compound_binomial, compound_poisson
from concavity import (
    ConcavityError, ConcavityVerdict, bernoulli_sum_necessary_lhs, cbern_lc_threshold,
    cpo_necessary_lambda, example16_thresholds, is_log_concave, is_ultra_log_concave, keilson_check,
    nec2_check, nec2_terms, tech2_sum, two_point_ratio_condition,
)
from dist_core import (
    as_compounding, bernoulli_sum_pmf, binomial_pmf, convolve, geometric_pmf, geometric_q, make_pmf,
    poisson_pmf, two_point_q, uniform_q,
)
from instances import random_lc_p, random_lc_q, random_ulc_p


class TestLogConcavity:
    def test_simple_cases(self, triangle):
        assert is_log_concave(triangle).holds
        v = is_log_concave(make_pmf(0, [0.4, 0.1, 0.5]))
        assert not v.holds
        assert v.first_violation == 1
        assert v.margin < 0

    def test_support_gap(self):
        v = is_log_concave(make_pmf(0, [0.5, 0.0, 0.5]))
        assert not v.holds
        assert v.first_violation == 1
        assert "interval" in v.reason

    def test_short_support(self):
        assert is_log_concave(make_pmf(4, [0.3, 0.7])).holds
        assert is_ultra_log_concave(make_pmf(0, [1.0])).holds

    def test_tail_noise_is_ignored(self):
        # entries at the truncation noise level are outside the checked support
        p = make_pmf(0, [0.5, 0.5 - 2e-13, 1e-13, 1e-13], tail_bound=1e-13)
        v = is_log_concave(p)
        assert v.holds
        assert v.checked_support == (0, 1)

    def test_binomial_and_poisson_are_ultra_log_concave(self):
        assert is_ultra_log_concave(binomial_pmf(7, 0.3)).holds
        assert is_ultra_log_concave(poisson_pmf(4.0)).holds
        assert is_ultra_log_concave(bernoulli_sum_pmf([0.1, 0.9, 0.4])).holds

    def test_geometric_is_log_concave_but_not_ultra(self):
        g = geometric_pmf(0.5)
        assert is_log_concave(g).holds
        v = is_ultra_log_concave(g)
        assert not v.holds
        assert v.first_violation == 1

    def test_verdict_consistency(self):
        with pytest.raises(ConcavityError):
            ConcavityVerdict(True, 3, 0.0, (0, 5))
        with pytest.raises(ConcavityError):
            ConcavityVerdict(False, None, 0.0, (0, 5))


class TestThresholds:
    def test_cbern_threshold_is_sharp(self, uniform12):
        p_star = cbern_lc_threshold(uniform12)
        assert p_star == pytest.approx(2 / 3)
        assert is_log_concave(compound_bernoulli(p_star + 0.01, uniform12)).holds
        assert not is_log_concave(compound_bernoulli(p_star - 0.01, uniform12)).holds

    def test_cbern_threshold_without_mass_at_two(self):
        assert cbern_lc_threshold(uniform_q(1, 1)) == 0.0

    def test_cpo_necessary_lambda(self, uniform12):
        nec = cpo_necessary_lambda(uniform12)
        assert float(nec) == pytest.approx(4.0)
        assert not nec.never_log_concave
        assert cpo_necessary_lambda(uniform_q(2, 3)).never_log_concave

    def test_cpo_log_concavity_switches_at_threshold(self, uniform12):
        assert not is_log_concave(compound_poisson(3.9, uniform12, 1e-14)).holds
        assert is_log_concave(compound_poisson(4.5, uniform12, 1e-14)).holds

    def test_nec2_for_poisson(self, uniform12):
        lhs, rhs = nec2_terms(poisson_pmf(3.0), uniform12)
        assert lhs == pytest.approx(1.5)
        assert rhs == pytest.approx(2.0)
        assert not nec2_check(poisson_pmf(3.0), uniform12)
        assert nec2_check(poisson_pmf(4.5), uniform12)

    def test_nec2_needs_positive_start(self, uniform12):
        with pytest.raises(ConcavityError):
            nec2_terms(make_pmf(1, [0.5, 0.5]), uniform12)

    def test_nec2_is_necessary(self, uniform12):
        p = bernoulli_sum_pmf([0.3, 0.4])
        if not nec2_check(p, uniform12):
            assert not is_log_concave(compound_bernoulli_sum([0.3, 0.4], uniform12)).holds

    def test_bernoulli_sum_form(self):
        params = [0.2, 0.5, 0.35]
        lhs, _ = nec2_terms(bernoulli_sum_pmf(params), uniform_q(1, 2))
        assert bernoulli_sum_necessary_lhs(params) == pytest.approx(2 * lhs)
        assert bernoulli_sum_necessary_lhs([0.5, 0.5]) == pytest.approx(3.0)
        with pytest.raises(ConcavityError):
            bernoulli_sum_necessary_lhs([0.0, 0.5])

    def test_general_binomial_threshold(self, uniform12):
        thr = example16_thresholds("general-binomial", n=2, q=uniform12)
        assert thr == pytest.approx(4 / 3)
        assert thr == pytest.approx(2 * cbern_lc_threshold(uniform12))
        assert is_log_concave(compound_binomial(2, (thr + 0.02) / 2, uniform12)).holds

    @pytest.mark.parametrize("q", [0.3, 0.5, 0.9, 1.0])
    def test_two_point_threshold(self, q):
        thr = example16_thresholds("two-point", q=q)
        assert thr == pytest.approx(2 * (1 - q) / q ** 2)
        assert thr == pytest.approx(float(cpo_necessary_lambda(two_point_q(q))))

    @pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
    def test_geometric_threshold(self, alpha):
        thr = example16_thresholds("geometric", alpha=alpha)
        assert thr == pytest.approx(2 * (1 - alpha) / alpha)
        assert thr == pytest.approx(float(cpo_necessary_lambda(geometric_q(alpha))))

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"kind": "cubic"},
            {"kind": "general-binomial", "n": 2},
            {"kind": "two-point", "q": 0.0},
            {"kind": "geometric", "alpha": 1.5},
        ],
    )
    def test_threshold_arguments(self, kwargs):
        with pytest.raises(ConcavityError):
            example16_thresholds(**kwargs)


class TestRatioConditions:
    def test_two_point_ratio_for_poisson(self, uniform12):
        above = two_point_ratio_condition(poisson_pmf(5.0), uniform12)
        assert above.holds
        assert "tail" in above.reason
        below = two_point_ratio_condition(poisson_pmf(3.0), uniform12)
        assert not below.holds
        assert below.first_violation == 0

    def test_two_point_ratio_without_tail(self):
        v = two_point_ratio_condition(binomial_pmf(4, 0.5), two_point_q(0.5))
        # (x+1) P(x+1)/P(x) = 4 - x for Bin(4, 1/2), against the bound 4
        assert not v.holds
        assert v.first_violation == 1
        assert "tail" not in v.reason

    def test_keilson(self):
        q = uniform_q(1, 3)
        assert keilson_check(q, 3, 1, 8).holds
        assert keilson_check(geometric_q(0.4, n_max=30), 4, 2, 20).holds

    def test_keilson_needs_log_concave_q(self):
        q = as_compounding(make_pmf(1, [0.5, 0.0, 0.5]))
        with pytest.raises(ConcavityError):
            keilson_check(q, 2, 1, 5)
        with pytest.raises(ConcavityError):
            keilson_check(uniform_q(1, 2), 1, 2, 5)


TECH2_TABLE = [
    ("a", 2, 1, [2, 1]),
    ("a", 2, 2, [2]),
    ("a", 4, 3, [3, 1, 1]),
    ("a", 4, 2, [6, 2, 2]),
    ("b", 5, 3, [2, 1, 1]),
    ("b", 5, 4, [0, 0, 0]),
    ("b", 3, 2, [0, 0]),
    ("b", 7, 4, [10, 4, 4, 4]),
    ("b", 7, 5, [5, 2, 2, 2]),
    ("b", 7, 6, [0, 0, 0, 0]),
]


class TestTech2Sum:
    @pytest.mark.parametrize("part,r,x,expected", TECH2_TABLE)
    def test_hand_computed_values(self, part, r, x, expected):
        t = r // 2
        got = [tech2_sum(part, r, x, s) for s in range(min(len(expected), t + 1))]
        assert got == expected[:len(got)]
        assert all(isinstance(v, int) for v in got)

    @pytest.mark.parametrize("r", range(2, 11))
    def test_full_sum_is_polynomial_coefficient_gap(self, r):
        part = "a" if r % 2 == 0 else "b"
        t = r // 2
        for x in range(math.ceil(r / 2), r + 1):
            if part == "b" and x == r:
                continue
            poly = P.polymul(P.polypow([1, 0, 1], 2 * x - r), P.polypow([1, 1], 2 * r - 2 * x))
            coef = np.concatenate((poly, np.zeros(2)))
            assert tech2_sum(part, r, x, t) == round(coef[x] - coef[x + 1])

    def test_partial_sums_are_nonnegative(self):
        for r in range(2, 21):
            part = "a" if r % 2 == 0 else "b"
            for x in range(0, r + 3):
                if part == "b" and x == r:
                    continue
                assert all(tech2_sum(part, r, x, s) >= 0 for s in range(r // 2 + 1))

    @pytest.mark.parametrize(
        "args",
        [("c", 2, 1, 0), ("a", 3, 1, 0), ("b", 4, 1, 0), ("b", 5, 5, 0), ("a", 4, 2, 3), ("a", -2, 1, 0)],
    )
    def test_invalid_arguments(self, args):
        with pytest.raises(ConcavityError):
            tech2_sum(*args)


class TestStructuralProperties:
    def test_cbern_threshold_is_the_equality_case(self, uniform12):
        v = is_log_concave(compound_bernoulli(cbern_lc_threshold(uniform12), uniform12))
        assert v.holds
        assert v.margin == pytest.approx(0.0, abs=1e-15)

    def test_convolution_preserves_log_concavity(self, rng):
        for _ in range(100):
            a = random_lc_p(rng)
            b = random_lc_q(rng).inner
            assert is_log_concave(a).holds and is_log_concave(b).holds
            assert is_log_concave(convolve(a, b)).holds

    def test_ultra_implies_log_concave(self, rng):
        for _ in range(50):
            p = random_ulc_p(rng)
            assert is_ultra_log_concave(p).holds
            assert is_log_concave(p).holds

    @pytest.mark.slow
    def test_two_point_cpo_is_log_concave_above_threshold(self):
        for q in np.linspace(0.2, 1.0, 20):
            qd = two_point_q(float(q))
            thr = max(float(cpo_necessary_lambda(qd)), 0.05)
            for factor in np.linspace(1.0, 3.0, 20):
                cpo = compound_poisson(thr * factor, qd, 1e-13)
                assert is_log_concave(cpo).holds, (q, thr * factor)

    def test_geometric_compound_of_log_concave(self, rng):
        checked = 0
        for _ in range(200):
            p = random_lc_p(rng, max_len=8)
            alpha = float(rng.uniform(0.3, 0.95))
            q = geometric_q(alpha, n_max=400)
            if not nec2_check(p, q):
                continue
            assert is_log_concave(compound(p, q)).holds, (p, alpha)
            checked += 1
        assert checked >= 5


def test_cbern_threshold_on_random_compounding_laws(rng):
    checked = 0
    for _ in range(50):
        q = random_lc_q(rng, max_support=5)
        p_star = cbern_lc_threshold(q)
        assert p_star == pytest.approx(1 / (1 + q(1) ** 2 / q(2)) if q(2) > 0 else 0.0)
        if not 2e-3 < p_star < 1 - 2e-3:
            continue
        assert is_log_concave(compound_bernoulli(p_star + 1e-3, q)).holds
        assert not is_log_concave(compound_bernoulli(p_star - 1e-3, q)).holds
        checked += 1
    assert checked >= 10


def test_bernoulli_sum_above_threshold_is_log_concave(rng):
    for _ in range(50):
        q = random_lc_q(rng, max_support=5)
        p_star = cbern_lc_threshold(q)
        params = rng.uniform(p_star, 1.0, int(rng.integers(2, 6)))
        assert is_log_concave(compound_bernoulli_sum(params, q)).holds, (q, params)
