"""Core likelihood and posterior: closed forms, exact-arithmetic oracles,
quadrature cross-checks, truncation behavior, and distribution invariants."""

import math
from fractions import Fraction
from itertools import combinations_with_replacement

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import gammaln

from binpop.core import (
    BetaPrior,
    InadmissiblePriorError,
    PoissonPrior,
    PowerLawPrior,
    PriorSupportError,
    Sample,
    TablePrior,
    TruncationError,
    TruncationPolicy,
    UniformRangePrior,
    log_beta_binomial_likelihood,
    posterior_miss_mass,
    posterior_n,
)

UNIT = BetaPrior(1.0, 1.0)


def exact_likelihood(counts, n, a, b) -> Fraction:
    """Independent oracle: exact rational beta-binomial likelihood for
    integer a, b: prod C(n, X_i) * (kn-S+b-1)! (S+a-1)! / (kn+a+b-1)!."""
    k = len(counts)
    s = sum(counts)
    prod = 1
    for x in counts:
        prod *= math.comb(n, x)
    num = math.factorial(k * n - s + b - 1) * math.factorial(s + a - 1)
    den = math.factorial(k * n + a + b - 1)
    return Fraction(prod) * Fraction(num, den)


class TestLikelihood:
    @pytest.mark.parametrize("counts", [(0,), (1,)])
    def test_uniform_p_closed_form(self, counts):
        # k=1, a=b=1: the marginal of any single count is uniform on {0..n}
        x = counts[0]
        s = Sample(counts)
        for n in range(max(x, 1), x + 51):
            got = math.exp(log_beta_binomial_likelihood(s, n, UNIT))
            assert got == pytest.approx(1.0 / (n + 1), rel=1e-12)

    def test_quadrature_oracle(self):
        # counts [1,2], n=3, a=b=1: prod C(3,X_i) * int_0^1 t^3 (1-t)^3 dt
        s = Sample((1, 2))
        integral, err = quad(lambda t: t**3 * (1 - t) ** 3, 0.0, 1.0,
                             epsabs=1e-14, epsrel=1e-13)
        want = math.comb(3, 1) * math.comb(3, 2) * integral
        got = math.exp(log_beta_binomial_likelihood(s, 3, UNIT))
        assert got == pytest.approx(want, rel=1e-10)

    def test_sentinel_below_sample_max(self):
        assert log_beta_binomial_likelihood(Sample((5,)), 4, UNIT) == -np.inf

    def test_n_zero_rejected(self):
        with pytest.raises(ValueError):
            log_beta_binomial_likelihood(Sample((0,)), 0, UNIT)

    def test_invalid_prior_rejected(self):
        with pytest.raises(ValueError):
            BetaPrior(0.0, 1.0)
        with pytest.raises(ValueError):
            BetaPrior(1.0, -2.0)

    def test_exact_rational_oracle_spot_grid(self):
        # small spot grid here; the full grid is acceptance criterion 1
        for counts in [(0,), (2, 3), (1, 2, 4)]:
            s = Sample(counts)
            for n in range(max(s.m_max, 1), 13):
                for a in (1, 2):
                    for b in (1, 3):
                        want = exact_likelihood(counts, n, a, b)
                        got = math.exp(log_beta_binomial_likelihood(
                            s, n, BetaPrior(a, b)))
                        assert got == pytest.approx(float(want), rel=1e-10)


def brute_force_weights(counts, a, b, gamma, n_hi):
    """Direct high-precision summation oracle: unnormalized posterior
    weights L(n) * n^-gamma over n = max(M,1) .. n_hi via scipy gammaln."""
    k = len(counts)
    s = sum(counts)
    lo = max(max(counts), 1)
    ns = np.arange(lo, n_hi + 1, dtype=np.float64)
    ll = gammaln(k * ns - s + b) + gammaln(s + a) - gammaln(k * ns + a + b)
    for x in counts:
        ll += gammaln(ns + 1) - gammaln(x + 1.0) - gammaln(ns - x + 1)
    return ns, ll - gamma * np.log(ns)


class TestPosterior:
    def test_point_mass_when_prior_caps_at_sample_max(self):
        post = posterior_n(Sample((3, 2)), UNIT, UniformRangePrior(3))
        np.testing.assert_allclose(post.probs, [1.0])
        assert post.support_start == post.truncated_at == 3

    def test_prior_support_too_small(self):
        with pytest.raises(PriorSupportError):
            posterior_n(Sample((7, 1)), UNIT, UniformRangePrior(5))

    def test_power_law_matches_brute_force_summation(self):
        # per-n absolute error <= 1e-10 against the 10^6-term oracle
        counts = (1, 2)
        post = posterior_n(Sample(counts), UNIT, PowerLawPrior(2.0),
                           TruncationPolicy(tail_tol=1e-11))
        ns, logw = brute_force_weights(counts, 1.0, 1.0, 2.0, 10**6)
        m = logw.max()
        z = math.fsum(np.exp(logw - m))
        oracle = np.exp(logw - m) / z
        length = len(post.probs)
        np.testing.assert_allclose(post.probs, oracle[:length], atol=1e-10)
        # everything the truncation dropped is individually negligible
        assert oracle[length:].max() < 1e-12

    def test_poisson_prior_matches_brute_force(self):
        counts = (2, 0, 1)
        post = posterior_n(Sample(counts), BetaPrior(2.0, 3.0),
                           PoissonPrior(4.0))
        k, s = 3, 3
        ns = np.arange(2, 401, dtype=np.float64)
        ll = gammaln(k * ns - s + 3.0) + gammaln(s + 2.0) \
            - gammaln(k * ns + 5.0)
        for x in counts:
            ll += gammaln(ns + 1) - gammaln(x + 1.0) - gammaln(ns - x + 1)
        logw = ll + ns * math.log(4.0) - gammaln(ns + 1)
        m = logw.max()
        oracle = np.exp(logw - m) / math.fsum(np.exp(logw - m))
        for n in range(2, 30):
            assert post.prob_of(n) == pytest.approx(oracle[n - 2], abs=1e-12)

    def test_miss_mass(self):
        point = posterior_n(Sample((5,)), UNIT, UniformRangePrior(5))
        assert posterior_miss_mass(point, 5) == 0.0
        assert posterior_miss_mass(point, 6) == 1.0
        post = posterior_n(Sample((1, 2)), UNIT, PowerLawPrior(2.0),
                           TruncationPolicy(tail_tol=1e-11))
        assert posterior_miss_mass(post, 2) == pytest.approx(
            1.0 - post.prob_of(2), abs=0)

    def test_improper_prior_rejected_without_override(self):
        with pytest.raises(InadmissiblePriorError):
            posterior_n(Sample((1, 0)), BetaPrior(0.5, 1.0),
                        PowerLawPrior(0.5))

    def test_nonintegrable_override_flags_posterior(self):
        post = posterior_n(Sample((1, 0)), BetaPrior(1.0, 1.0),
                           PowerLawPrior(0.0),
                           TruncationPolicy(tail_tol=1e-12, n_cap=20_000),
                           allow_nonintegrable=True)
        assert not post.normalized
        assert math.isinf(post.tail_bound)
        assert post.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_nonconvergent_tail_raises(self):
        # a + gamma = 2: posterior exists but its mass tail ~ 1/n decays too
        # slowly for tail_tol=1e-12 within a tiny cap
        with pytest.raises(TruncationError):
            posterior_n(Sample((1, 0, 2)), BetaPrior(2.0, 57.0),
                        PowerLawPrior(0.0),
                        TruncationPolicy(tail_tol=1e-12, n_cap=5_000))

    def test_all_zero_counts_supported_from_one(self):
        post = posterior_n(Sample((0, 0, 0)), BetaPrior(2.0, 10.0),
                           PowerLawPrior(2.0))
        assert post.support_start == 1
        assert post.probs[0] > 0.5  # n=1 dominates for all-zero data


counts_strategy = st.lists(st.integers(min_value=0, max_value=6),
                           min_size=1, max_size=8)


class TestInvariants:
    @given(counts=counts_strategy,
           a=st.floats(0.5, 4.0), b=st.floats(0.5, 60.0),
           gamma=st.floats(1.5, 4.0))
    @settings(max_examples=60, deadline=None)
    def test_normalization_and_support(self, counts, a, b, gamma):
        post = posterior_n(Sample(tuple(counts)), BetaPrior(a, b),
                           PowerLawPrior(gamma))
        assert abs(post.probs.sum() - 1.0) <= 1e-12
        assert post.support_start == max(1, max(counts))
        assert np.all(post.probs >= 0)
        assert post.tail_bound <= 1e-12

    @given(scale=st.floats(1e-6, 1e6))
    @settings(max_examples=25, deadline=None)
    def test_prior_scale_invariance(self, scale):
        weights = {2: 0.3, 3: 1.1, 5: 0.4, 9: 2.0}
        s = Sample((1, 2))
        base = posterior_n(s, UNIT, TablePrior(weights))
        scaled = posterior_n(s, UNIT, TablePrior(
            {n: w * scale for n, w in weights.items()}))
        np.testing.assert_allclose(base.probs, scaled.probs, atol=1e-12)

    def test_monotone_truncation(self):
        s = Sample((1, 2))
        loose = posterior_n(s, UNIT, PowerLawPrior(2.0),
                            TruncationPolicy(tail_tol=1e-6))
        tight = posterior_n(s, UNIT, PowerLawPrior(2.0),
                            TruncationPolicy(tail_tol=1e-10))
        assert loose.truncated_at <= tight.truncated_at
        assert loose.tail_bound <= 1e-6
        assert tight.tail_bound <= 1e-10

    def test_table_prior_gap_gets_zero_mass(self):
        post = posterior_n(Sample((1, 2)), UNIT,
                           TablePrior({2: 1.0, 3: 1.0, 5: 1.0}))
        assert post.prob_of(4) == 0.0
        assert post.prob_of(6) == 0.0
        assert post.probs.sum() == pytest.approx(1.0, abs=1e-12)


class TestSample:
    def test_cached_fields(self):
        s = Sample((3, 1, 4, 1, 5))
        assert (s.k, s.s, s.m_max) == (5, 14, 5)

    def test_rejects_empty_and_negative(self):
        with pytest.raises(ValueError):
            Sample(())
        with pytest.raises(ValueError):
            Sample((1, -2))
