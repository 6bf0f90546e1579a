"""Mixture-conjugate posterior updates and Bayesian premiums.

A Gamma-mixture prior on the Poisson intensity stays a two-component Gamma
mixture after observing counts; a Dirac/Gamma prior on the Exponential rate
stays a Dirac/Gamma mixture after observing claim sizes. Only the weights
need care: they are formed in log space and passed through a logistic.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import streams
from .errors import DomainError, InfiniteMean
from .models import ClaimHistory, FrequencyParams, SeverityParams
from .specfun import log_beta, log_gamma, reg_gamma_cdf

__all__ = [
    "FrequencyPosterior",
    "SeverityPosterior",
    "PremiumQuote",
    "frequency_posterior",
    "frequency_premium",
    "credibility_split",
    "severity_posterior",
    "severity_premium",
    "posterior_cdf",
    "posterior_quantile",
    "claim_size_quantile",
    "sample_posterior",
    "premium_interval",
    "quote",
    "premium_schedule",
]

QUANTILE_PROB_TOL = 1e-10
QUANTILE_MAX_ITER = 200
DEFAULT_MC_DRAWS = 100_000


def _sigmoid_neg(log_g):
    """1 / (1 + exp(log_g)) without overflow."""
    if log_g == math.inf:
        return 0.0
    if log_g == -math.inf:
        return 1.0
    if log_g > 0:
        e = math.exp(-log_g)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(log_g))


@dataclass(frozen=True)
class FrequencyPosterior:
    """Two-component Gamma mixture for the intensity after ``periods`` periods.

    ``w`` weights Gamma(shape1, rate); ``1 - w`` weights Gamma(shape2, rate).
    """

    w: float
    shape1: float
    shape2: float
    rate: float
    periods: int = 0
    total: int = 0
    log_g: float = 0.0


@dataclass(frozen=True)
class SeverityPosterior:
    """Dirac/Gamma mixture for the Exponential rate of claim sizes.

    ``omega`` is the mass of the point ``mu``; ``1 - omega`` weights
    Gamma(shape, rate).
    """

    omega: float
    mu: float
    shape: float
    rate: float
    claims: int = 0
    total: float = 0.0
    log_phi: float = 0.0


@dataclass(frozen=True)
class PremiumQuote:
    """Bayesian pure premium for the period after ``period`` observed ones.

    ``interval`` bounds the posterior distribution of the premium rate
    (intensity times mean claim size). ``frequency_interval`` and
    ``severity_interval`` are exact inter-percentile ranges of the two factors.
    When the severity posterior has no finite mean ``infinite_mean`` is set
    and ``severity_mean`` and ``premium`` are ``inf``.
    """

    period: int
    frequency_mean: float
    severity_mean: float
    premium: float
    interval: tuple
    frequency_interval: tuple
    severity_interval: tuple
    infinite_mean: bool = False
    cumulative_counts: int = 0
    cumulative_costs: float = 0.0


def frequency_posterior(params: FrequencyParams, counts) -> FrequencyPosterior:
    """Condition the Gamma-mixture prior on observed per-period counts."""
    counts = np.asarray(list(counts), dtype=float)
    if np.any(counts < 0) or np.any(counts != np.floor(counts)):
        raise DomainError("claim counts must be nonnegative integers")
    m = counts.size
    total = float(counts.sum())
    a1, a2, b, p = params.alpha1, params.alpha2, params.beta, params.p
    shape1 = total + a1
    shape2 = total + a1 + a2
    rate = b + m
    if m == 0:
        w = p
        log_g = math.log1p(-p) - math.log(p) if 0.0 < p < 1.0 else (
            -math.inf if p == 1.0 else math.inf
        )
    else:
        if p == 1.0:
            log_g = -math.inf
        elif p == 0.0:
            log_g = math.inf
        else:
            log_g = (
                math.log1p(-p) - math.log(p)
                + log_beta(a1, a2) - log_beta(shape1, a2)
                + a2 * (math.log(b) - math.log(rate))
            )
        w = _sigmoid_neg(log_g)
    return FrequencyPosterior(w, shape1, shape2, rate, m, int(total), log_g)


def frequency_premium(post: FrequencyPosterior) -> float:
    """Posterior mean of the intensity, i.e. expected next-period count."""
    return (post.w * post.shape1 + (1.0 - post.w) * post.shape2) / post.rate


def credibility_split(post: FrequencyPosterior):
    """Credibility form of each component mean.

    Returns
    -------
    list of (z, sample_mean, collective_mean)
        One tuple per component with ``z * sample_mean + (1 - z) *
        collective_mean`` equal to that component's posterior mean.
    """
    m = post.periods
    beta = post.rate - m
    z = m / (beta + m)
    nbar = post.total / m if m else 0.0
    alpha1 = post.shape1 - post.total
    alpha12 = post.shape2 - post.total
    return [(z, nbar, alpha1 / beta), (z, nbar, alpha12 / beta)]


def severity_posterior(params: SeverityParams, severities) -> SeverityPosterior:
    """Condition the Dirac/Gamma prior on observed claim sizes."""
    y = np.asarray(list(severities) if not isinstance(severities, np.ndarray) else severities,
                   dtype=float)
    if np.any(~(y > 0)) or not np.all(np.isfinite(y)):
        raise DomainError("claim sizes must be positive and finite")
    nu, mu, delta, sigma = params.nu, params.mu, params.delta, params.sigma
    m_star = y.size
    total = float(math.fsum(y)) if m_star else 0.0
    shape = m_star + delta
    rate = sigma + total
    if m_star == 0:
        omega = nu
        log_phi = math.log1p(-nu) - math.log(nu) if 0.0 < nu < 1.0 else (
            -math.inf if nu == 1.0 else math.inf
        )
        return SeverityPosterior(omega, mu, shape, rate, 0, 0.0, log_phi)
    if nu == 1.0:
        log_phi = -math.inf
    elif nu == 0.0:
        log_phi = math.inf
    else:
        log_phi = (
            math.log1p(-nu) - math.log(nu)
            + log_gamma(shape) - log_gamma(delta)
            + delta * math.log(sigma) - shape * math.log(rate)
            - m_star * math.log(mu) + mu * total
        )
    omega = _sigmoid_neg(log_phi)
    return SeverityPosterior(omega, mu, shape, rate, m_star, total, log_phi)


def severity_premium(post: SeverityPosterior) -> float:
    """Posterior mean claim size.

    Raises
    ------
    InfiniteMean
        If the Gamma component carries weight and ``shape <= 1``.
    """
    if post.omega == 1.0:
        return 1.0 / post.mu
    if post.shape <= 1.0:
        raise InfiniteMean(
            f"posterior Gamma shape {post.shape:g} <= 1: mean claim size is infinite"
        )
    return post.omega / post.mu + (1.0 - post.omega) * post.rate / (post.shape - 1.0)


def posterior_cdf(post, x):
    """CDF of the intensity (frequency) or Exponential rate (severity) at ``x``."""
    if x <= 0:
        return 0.0
    if isinstance(post, FrequencyPosterior):
        out = 0.0
        if post.w > 0:
            out += post.w * reg_gamma_cdf(post.shape1, post.rate, x)
        if post.w < 1:
            out += (1.0 - post.w) * reg_gamma_cdf(post.shape2, post.rate, x)
        return out
    if isinstance(post, SeverityPosterior):
        out = post.omega if x >= post.mu else 0.0
        if post.omega < 1:
            out += (1.0 - post.omega) * reg_gamma_cdf(post.shape, post.rate, x)
        return out
    raise TypeError(f"unsupported posterior type {type(post).__name__}")


def _bracket(post, q):
    if isinstance(post, FrequencyPosterior):
        mean = post.shape2 / post.rate
        sd = math.sqrt(post.shape2) / post.rate
    else:
        mean = max(post.mu, post.shape / post.rate)
        sd = math.sqrt(post.shape) / post.rate
    hi = mean + 10.0 * sd + 1e-300
    for _ in range(2000):
        if posterior_cdf(post, hi) >= q:
            return 0.0, hi
        hi *= 2.0
    raise DomainError("could not bracket quantile")


def posterior_quantile(post, q: float) -> float:
    """Generalised inverse CDF of a frequency or severity posterior.

    Bisection on the mixture CDF, stopping once the CDF gap across the
    bracket is below 1e-10 or after 200 halvings. At the severity atom the
    atom location itself is returned when the jump covers ``q``.
    """
    if not 0.0 < q < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {q}")
    if isinstance(post, SeverityPosterior) and post.omega > 0:
        below = (1.0 - post.omega) * reg_gamma_cdf(post.shape, post.rate, post.mu) \
            if post.omega < 1 else 0.0
        if below < q <= below + post.omega:
            return post.mu
    lo, hi = _bracket(post, q)
    f_lo, f_hi = 0.0, posterior_cdf(post, hi)
    for _ in range(QUANTILE_MAX_ITER):
        if f_hi - f_lo <= QUANTILE_PROB_TOL or hi - lo <= 1e-15 * hi:
            break
        mid = 0.5 * (lo + hi)
        f_mid = posterior_cdf(post, mid)
        if f_mid >= q:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    return lo if lo > 0 else hi


def claim_size_quantile(post: SeverityPosterior, q: float) -> float:
    """Quantile of the mean claim size 1 / Theta."""
    return 1.0 / posterior_quantile(post, 1.0 - q)


def sample_posterior(post, size, rng):
    """Draw intensities (frequency) or mean claim sizes 1/Theta (severity)."""
    if isinstance(post, FrequencyPosterior):
        first = rng.random(size) < post.w
        shapes = np.where(first, post.shape1, post.shape2)
        return rng.standard_gamma(shapes) / post.rate
    if isinstance(post, SeverityPosterior):
        atom = rng.random(size) < post.omega
        theta = rng.standard_gamma(post.shape, size) / post.rate
        return np.where(atom, 1.0 / post.mu, 1.0 / theta)
    raise TypeError(f"unsupported posterior type {type(post).__name__}")


def premium_interval(fpost, spost, level, rng, n_draws=DEFAULT_MC_DRAWS):
    """Monte Carlo inter-percentile range of intensity times mean claim size."""
    if not 0.0 < level < 1.0:
        raise DomainError(f"IPR level must lie in (0, 1), got {level}")
    lam = sample_posterior(fpost, n_draws, rng)
    size = sample_posterior(spost, n_draws, rng)
    lo, hi = np.quantile(lam * size, [(1.0 - level) / 2.0, (1.0 + level) / 2.0])
    return float(lo), float(hi)


def quote(fp, sp, counts, severities, ipr_level=0.90, rng=None,
          n_draws=DEFAULT_MC_DRAWS, period=None):
    """Premium quote after conditioning on ``counts`` and ``severities``."""
    if rng is None:
        rng = np.random.default_rng()
    counts = list(counts)
    severities = np.asarray(severities, dtype=float)
    fpost = frequency_posterior(fp, counts)
    spost = severity_posterior(sp, severities)
    freq_mean = frequency_premium(fpost)
    try:
        sev_mean = severity_premium(spost)
        infinite = False
    except InfiniteMean:
        sev_mean = math.inf
        infinite = True
    a = (1.0 - ipr_level) / 2.0
    f_int = (posterior_quantile(fpost, a), posterior_quantile(fpost, 1.0 - a))
    s_int = (claim_size_quantile(spost, a), claim_size_quantile(spost, 1.0 - a))
    p_int = premium_interval(fpost, spost, ipr_level, rng, n_draws)
    return PremiumQuote(
        period=len(counts) if period is None else period,
        frequency_mean=freq_mean,
        severity_mean=sev_mean,
        premium=freq_mean * sev_mean,
        interval=p_int,
        frequency_interval=f_int,
        severity_interval=s_int,
        infinite_mean=infinite,
        cumulative_counts=int(sum(counts)),
        cumulative_costs=float(math.fsum(severities)) if severities.size else 0.0,
    )


def premium_schedule(fp: FrequencyParams, sp: SeverityParams, history: ClaimHistory,
                     ipr_level=0.90, seed=0, n_draws=DEFAULT_MC_DRAWS, window=None):
    """Quotes for periods 0..m, each conditioning on the periods before it.

    Period 0 is the prior-only quote. With ``window=None`` the conditioning
    set expands (periods 1..t); an integer ``window`` keeps only the last
    ``window`` periods. Without attached severities the severity factor stays
    at its prior. The Monte Carlo interval of period ``t`` uses the stream
    ``(seed, PREMIUM_MC, t)``.
    """
    if not 0.0 < ipr_level < 1.0:
        raise DomainError(f"IPR level must lie in (0, 1), got {ipr_level}")
    if window is not None and int(window) < 1:
        raise DomainError("window must be a positive integer")
    counts = list(history.counts)
    flat = history.flat_severities()
    # claim offsets per period; without severities every slice is empty
    if history.severities is None:
        offsets = np.zeros(len(counts) + 1, dtype=np.int64)
    else:
        offsets = np.concatenate([[0], np.cumsum(counts)])
    quotes = []
    for t in range(history.periods + 1):
        start = 0 if window is None else max(0, t - int(window))
        rng = streams.substream(seed, streams.PREMIUM_MC, t)
        quotes.append(
            quote(fp, sp, counts[start:t], flat[offsets[start]:offsets[t]],
                  ipr_level, rng, n_draws, period=t)
        )
    return quotes
