import numpy as np
import pytest
from hypothesis import given, strategies as st

from twostream import FrequencyParams
from twostream.emfit import EmConfig
from twostream.errors import DomainError
from twostream.gof import discrete_gof_statistics, gof_counts
from twostream.models import frequency_pmf
from twostream.simulate import draw_counts

FP = FrequencyParams(0.6, 4.0, 3.0, 0.5)


def brute_force(counts, pmf):
    """Direct loops over the integer grid, written independently of the module."""
    n = len(counts)
    ks = cvm = ad = 0.0
    cum = 0.0
    for j, pj in enumerate(pmf):
        cum += pj
        emp = sum(1 for c in counts if c <= j) / n
        d = emp - min(cum, 1.0)
        ks = max(ks, abs(d))
        if 1e-12 < cum < 1 - 1e-12:
            cvm += d * d * pj
            ad += d * d * pj / (cum * (1 - cum))
    return ks, n * cvm, n * ad


@pytest.fixture(scope="module")
def sample():
    return draw_counts(FP, 200, np.random.default_rng(21))


def test_statistics_match_brute_force(sample):
    pmf = frequency_pmf(FP, np.arange(200))
    got = discrete_gof_statistics(sample, pmf)
    ks, cvm, ad = brute_force(list(sample), pmf)
    assert got["ks"] == pytest.approx(ks, rel=1e-12)
    assert got["cvm"] == pytest.approx(cvm, rel=1e-10)
    assert got["ad"] == pytest.approx(ad, rel=1e-10)


def test_statistics_zero_against_empirical_pmf(sample):
    emp = np.bincount(sample) / sample.size
    stats = discrete_gof_statistics(sample, emp)
    assert all(v == pytest.approx(0.0, abs=1e-12) for v in stats.values())


@given(st.lists(st.integers(0, 40), min_size=1, max_size=60), st.randoms())
def test_statistics_ignore_order_and_are_nonnegative(counts, rnd):
    pmf = frequency_pmf(FP, np.arange(60))
    shuffled = list(counts)
    rnd.shuffle(shuffled)
    a = discrete_gof_statistics(counts, pmf)
    b = discrete_gof_statistics(shuffled, pmf)
    assert a == b
    assert all(v >= 0 for v in a.values())


def test_ks_depends_on_grid_cdf_only(sample):
    # the statistic lives on the integer CDF grid: padding the pmf with zeros
    # beyond the data leaves KS unchanged
    pmf = frequency_pmf(FP, np.arange(200))
    padded = np.concatenate([pmf, np.zeros(100)])
    assert discrete_gof_statistics(sample, pmf)["ks"] == discrete_gof_statistics(sample, padded)["ks"]


def test_report_and_determinism(sample):
    a = gof_counts(sample, FP, replicates=199, seed=5)
    b = gof_counts(sample, FP, replicates=199, seed=5)
    assert a == b
    assert a.bootstrap_replicates == 199 and a.bootstrap == "fixed-parameter"
    assert all(0 < p <= 1 for p in a.p_value.values())
    d = a.as_dict()
    assert set(d) >= {"statistic", "p_value", "bootstrap_replicates", "variant"}


def test_correct_params_not_rejected(sample):
    rep = gof_counts(sample, FP, replicates=199, seed=1)
    assert min(rep.p_value.values()) > 0.05


def test_beta_perturbation_rejected(sample):
    bad = FrequencyParams(FP.p, FP.alpha1, FP.alpha2, FP.beta * 1.5)
    rep = gof_counts(sample, bad, replicates=199, seed=1)
    assert max(rep.p_value.values()) < 0.01


def test_shifted_counts_rejected(portfolio):
    counts = draw_counts(portfolio, 180, np.random.default_rng(2)) + 2000
    rep = gof_counts(counts, portfolio, replicates=199, seed=3)
    assert max(rep.p_value.values()) < 0.01


def test_refit_bootstrap_runs(sample):
    rep = gof_counts(sample[:60], FP, replicates=99, seed=2, refit=True,
                     em_config=EmConfig(max_iterations=10))
    assert rep.bootstrap == "refit" and "refit_failures" in rep.as_dict()


def test_validation(sample):
    with pytest.raises(DomainError):
        gof_counts(sample, FP, replicates=50)
    with pytest.raises(DomainError):
        gof_counts([], FP)
