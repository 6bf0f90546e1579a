import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize, stats

from twostream import ClaimHistory, FrequencyParams, SeverityParams, prior_mean
from twostream.errors import DomainError, InfiniteMean
from twostream.models import severity_mean
from twostream.posterior import (
    claim_size_quantile,
    credibility_split,
    frequency_posterior,
    frequency_premium,
    posterior_cdf,
    posterior_quantile,
    premium_interval,
    premium_schedule,
    quote,
    severity_posterior,
    severity_premium,
)

from oracles import frequency_posterior_mean, severity_posterior_mean

FP = FrequencyParams(0.4, 3.0, 2.0, 0.5)
SP = SeverityParams(0.7, 1.2, 2.5, 1.5)


@pytest.mark.parametrize("counts", [[0], [3], [1, 7, 2], [12, 0, 0, 5], [40, 38, 45, 50, 44]])
def test_frequency_mean_matches_quadrature(counts):
    got = frequency_premium(frequency_posterior(FP, counts))
    assert got == pytest.approx(frequency_posterior_mean(FP, counts), rel=1e-9)


@pytest.mark.parametrize("claims", [[0.5], [0.1, 0.2, 0.3], [4.0, 9.0], [0.7] * 10, [30.0, 0.2, 1.0]])
def test_severity_mean_matches_quadrature(claims):
    got = severity_premium(severity_posterior(SP, claims))
    assert got == pytest.approx(severity_posterior_mean(SP, claims), rel=1e-9)


def test_prior_only_quotes():
    fpost = frequency_posterior(FP, [])
    assert fpost.w == FP.p
    assert frequency_premium(fpost) == pytest.approx(prior_mean(FP), rel=1e-14)
    spost = severity_posterior(SP, [])
    assert spost.omega == SP.nu
    assert severity_premium(spost) == pytest.approx(severity_mean(SP), rel=1e-14)


@given(st.floats(0.001, 0.999))
def test_empty_severity_weight_is_nu_exactly(nu):
    assert severity_posterior(SeverityParams(nu, 1.0, 0.3, 0.5), []).omega == nu


def test_infinite_prior_mean_becomes_finite_after_one_claim():
    sp = SeverityParams(0.9, 1.0, 0.3, 0.5)
    with pytest.raises(InfiniteMean):
        severity_premium(severity_posterior(sp, []))
    assert math.isfinite(severity_premium(severity_posterior(sp, [2.0])))


def test_certain_exponential_never_infinite():
    sp = SeverityParams(1.0, 2.0, 0.3, 0.5)
    assert severity_premium(severity_posterior(sp, [])) == 0.5


@given(st.lists(st.integers(0, 50), min_size=1, max_size=5))
def test_credibility_split_reconstructs_premium(counts):
    post = frequency_posterior(FP, counts)
    parts = credibility_split(post)
    comp = [z * nbar + (1 - z) * coll for z, nbar, coll in parts]
    assert post.w * comp[0] + (1 - post.w) * comp[1] == pytest.approx(frequency_premium(post), rel=1e-12)
    z = parts[0][0]
    assert z == pytest.approx(len(counts) / (FP.beta + len(counts)))


@given(st.lists(st.integers(0, 10_000), min_size=0, max_size=30),
       st.floats(0.0, 1.0), st.floats(0.1, 200.0), st.floats(0.1, 100.0), st.floats(0.005, 5.0))
def test_frequency_weight_is_probability(counts, p, a1, a2, b):
    post = frequency_posterior(FrequencyParams(p, a1, a2, b), counts)
    assert 0.0 <= post.w <= 1.0
    assert math.isfinite(frequency_premium(post))


@given(st.lists(st.floats(1e-6, 1e6), min_size=0, max_size=40), st.floats(0.0, 1.0))
def test_severity_weight_is_probability(claims, nu):
    post = severity_posterior(SeverityParams(nu, 1.0, 2.0, 1.0), claims)
    assert 0.0 <= post.omega <= 1.0


def test_large_history_weight_saturates_without_overflow():
    counts = [5000] * 200
    post = frequency_posterior(FrequencyParams(0.59, 97.5, 30.1, 0.0198), counts)
    assert post.w in (0.0, 1.0) or 0.0 < post.w < 1.0
    assert math.isfinite(post.log_g)


def test_frequency_quantile_matches_scipy_root():
    post = frequency_posterior(FP, [4, 6, 1])

    def cdf(x):
        return (post.w * stats.gamma.cdf(x, post.shape1, scale=1 / post.rate)
                + (1 - post.w) * stats.gamma.cdf(x, post.shape2, scale=1 / post.rate))

    for q in [0.05, 0.5, 0.95]:
        expect = optimize.brentq(lambda x: cdf(x) - q, 1e-9, 100.0, xtol=1e-14)
        assert posterior_quantile(post, q) == pytest.approx(expect, rel=1e-8)


def test_severity_quantile_at_atom():
    post = severity_posterior(SeverityParams(0.9, 1.0, 2.0, 1.0), [])
    below = posterior_cdf(post, 1.0 - 1e-12)
    q = below + 0.5 * (posterior_cdf(post, 1.0) - below)
    assert posterior_quantile(post, q) == 1.0
    assert claim_size_quantile(post, 1.0 - q) == 1.0


def test_quantile_domain():
    with pytest.raises(DomainError):
        posterior_quantile(frequency_posterior(FP, []), 1.0)


def test_premium_interval_agrees_with_independent_sampler():
    fpost = frequency_posterior(FP, [4, 6, 1])
    spost = severity_posterior(SP, [0.4, 2.0, 0.9])
    lo, hi = premium_interval(fpost, spost, 0.9, np.random.default_rng(1), 200_000)
    # independent sampler built from scipy distributions
    r = np.random.default_rng(99)
    n = 400_000
    lam = np.where(r.random(n) < fpost.w,
                   stats.gamma.rvs(fpost.shape1, scale=1 / fpost.rate, size=n, random_state=r),
                   stats.gamma.rvs(fpost.shape2, scale=1 / fpost.rate, size=n, random_state=r))
    theta = np.where(r.random(n) < spost.omega, spost.mu,
                     stats.gamma.rvs(spost.shape, scale=1 / spost.rate, size=n, random_state=r))
    elo, ehi = np.quantile(lam / theta, [0.05, 0.95])
    assert lo == pytest.approx(elo, rel=0.02)
    assert hi == pytest.approx(ehi, rel=0.02)


def test_quote_fields():
    q = quote(FP, SP, [2, 3], [0.5, 1.0, 2.0, 0.1, 0.3], 0.9, np.random.default_rng(0), 20_000)
    assert q.period == 2 and q.cumulative_counts == 5
    assert q.cumulative_costs == pytest.approx(3.9)
    assert q.premium == pytest.approx(q.frequency_mean * q.severity_mean)
    assert q.interval[0] < q.premium < q.interval[1]
    assert q.frequency_interval[0] < q.frequency_mean < q.frequency_interval[1]


def _history():
    return ClaimHistory.from_flat([2, 0, 3, 1], [0.5, 1.5, 0.2, 0.4, 9.0, 1.0])


def test_schedule_rows_and_period_zero():
    sched = premium_schedule(FP, SP, _history(), seed=3, n_draws=5000)
    assert [q.period for q in sched] == [0, 1, 2, 3, 4]
    assert sched[0].frequency_mean == pytest.approx(prior_mean(FP))
    assert sched[0].cumulative_counts == 0
    assert [q.cumulative_counts for q in sched] == [0, 2, 2, 5, 6]
    assert sched[-1].cumulative_costs == pytest.approx(12.6)


def test_schedule_is_deterministic_per_period_stream():
    a = premium_schedule(FP, SP, _history(), seed=3, n_draws=5000)
    b = premium_schedule(FP, SP, _history(), seed=3, n_draws=5000)
    assert a == b
    # a shorter history reproduces the leading rows exactly
    c = premium_schedule(FP, SP, _history().head(2), seed=3, n_draws=5000)
    assert c == a[:3]


def test_schedule_window():
    full = premium_schedule(FP, SP, _history(), seed=3, n_draws=2000)
    wide = premium_schedule(FP, SP, _history(), seed=3, n_draws=2000, window=10)
    assert full == wide
    rolled = premium_schedule(FP, SP, _history(), seed=3, n_draws=2000, window=1)
    assert rolled[4].frequency_mean == pytest.approx(frequency_premium(frequency_posterior(FP, [1])))
    assert rolled[4].cumulative_counts == 1


def test_schedule_without_severities_keeps_prior_severity():
    sched = premium_schedule(FP, SP, ClaimHistory((1, 2)), n_draws=2000)
    assert all(q.severity_mean == pytest.approx(severity_mean(SP)) for q in sched)


def test_infinite_mean_schedule():
    sp = SeverityParams(0.9, 1.0, 0.3, 0.5)
    sched = premium_schedule(FP, sp, _history(), n_draws=2000)
    assert sched[0].infinite_mean and sched[0].premium == math.inf
    # period 1 has two claims: shape 2.3 > 1
    assert all(not q.infinite_mean and math.isfinite(q.premium) for q in sched[1:])
