"""Parameter containers and closed-form laws of the two-stream risk model.

Claim counts per period follow a two-component Negative Binomial mixture
(foreseeable stream alone, or foreseeable plus unforeseeable); single claim
sizes follow an Exponential/Lomax mixture.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.stats import nbinom

from .errors import DomainError, MismatchError
from .specfun import log_beta, log_gamma

__all__ = [
    "FrequencyParams",
    "SeverityParams",
    "ClaimHistory",
    "nb_logpmf",
    "frequency_logpmf",
    "frequency_pmf",
    "frequency_cdf_table",
    "frequency_support",
    "prior_density",
    "prior_mean",
    "severity_logpdf",
    "severity_density",
    "severity_mean",
    "nu_from_frequency",
]


@dataclass(frozen=True)
class FrequencyParams:
    """Negative Binomial mixture for per-period claim counts.

    Attributes
    ----------
    p : float
        Probability that the unforeseeable intensity is zero, i.e. weight of
        the first component.
    alpha1 : float
        Gamma shape of the foreseeable intensity.
    alpha2 : float
        Gamma shape of the unforeseeable intensity given it is positive.
    beta : float
        Common Gamma rate.
    """

    p: float
    alpha1: float
    alpha2: float
    beta: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {self.p}")
        for name in ("alpha1", "alpha2", "beta"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive and finite, got {v}")

    @property
    def nb_prob(self):
        """Success probability beta / (beta + 1) shared by both components."""
        return self.beta / (self.beta + 1.0)

    def as_dict(self):
        return {"p": self.p, "alpha1": self.alpha1, "alpha2": self.alpha2, "beta": self.beta}

    def as_vector(self):
        return np.array([self.p, self.alpha1, self.alpha2, self.beta])


@dataclass(frozen=True)
class SeverityParams:
    """Exponential/Lomax mixture for single claim sizes.

    Attributes
    ----------
    nu : float
        Weight of the historical (Exponential) stream.
    mu : float
        Exponential rate.
    delta : float
        Lomax shape.
    sigma : float
        Lomax scale.
    """

    nu: float
    mu: float
    delta: float
    sigma: float

    def __post_init__(self):
        if not 0.0 <= self.nu <= 1.0:
            raise DomainError(f"nu must lie in [0, 1], got {self.nu}")
        for name in ("mu", "delta", "sigma"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive and finite, got {v}")

    def as_dict(self):
        return {"nu": self.nu, "mu": self.mu, "delta": self.delta, "sigma": self.sigma}

    def as_vector(self):
        return np.array([self.mu, self.delta, self.sigma, self.nu])


@dataclass(frozen=True)
class ClaimHistory:
    """Observed per-period claim counts with optional per-period claim sizes.

    ``severities`` is either ``None`` (counts only) or a tuple holding one
    tuple of claim amounts per period, with lengths equal to ``counts``.
    """

    counts: tuple
    severities: tuple = field(default=None)

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise DomainError("claim counts must be nonnegative")
        object.__setattr__(self, "counts", counts)
        if self.severities is not None:
            groups = tuple(tuple(float(y) for y in g) for g in self.severities)
            if len(groups) != len(counts):
                raise MismatchError(
                    f"{len(groups)} severity groups for {len(counts)} periods"
                )
            for j, (n, g) in enumerate(zip(counts, groups)):
                if len(g) != n:
                    raise MismatchError(
                        f"period {j + 1}: count {n} but {len(g)} severities"
                    )
                if any(not (y > 0 and math.isfinite(y)) for y in g):
                    raise DomainError(f"period {j + 1}: severities must be positive")
            object.__setattr__(self, "severities", groups)

    @classmethod
    def from_flat(cls, counts, severities):
        """Group a flat, period-ordered severity list by ``counts``."""
        counts = [int(c) for c in counts]
        severities = list(severities)
        if sum(counts) != len(severities):
            raise MismatchError(
                f"sum of counts {sum(counts)} != number of severities {len(severities)}"
            )
        groups, start = [], 0
        for n in counts:
            groups.append(severities[start:start + n])
            start += n
        return cls(tuple(counts), tuple(groups))

    @property
    def periods(self):
        return len(self.counts)

    @property
    def total_claims(self):
        return sum(self.counts)

    def flat_severities(self):
        if self.severities is None:
            return np.empty(0)
        return np.fromiter((y for g in self.severities for y in g), dtype=float)

    def head(self, t):
        """History restricted to the first ``t`` periods."""
        sev = None if self.severities is None else self.severities[:t]
        return ClaimHistory(self.counts[:t], sev)

    def window(self, start, stop):
        sev = None if self.severities is None else self.severities[start:stop]
        return ClaimHistory(self.counts[start:stop], sev)


def log_binom_shifted(n, shape):
    """log C(n + shape - 1, n), written as -log n - log B(n, shape).

    The Beta form avoids cancelling two large log-gammas when the shape is
    big (the near-Poisson regime the count EM can drift into).
    """
    scalar = np.ndim(n) == 0
    n = np.atleast_1d(np.asarray(n, dtype=float))
    out = np.zeros(n.shape)
    pos = n > 0
    if pos.any():
        out[pos] = -np.log(n[pos]) - log_beta(n[pos], shape)
    return float(out[0]) if scalar else out


def nb_logpmf(n, shape, prob):
    """log NB(n; shape, prob) with pmf C(n+shape-1, n) prob^shape (1-prob)^n."""
    n = np.asarray(n, dtype=float)
    return log_binom_shifted(n, shape) + shape * math.log(prob) + n * math.log1p(-prob)


def _component_logpmfs(params, n):
    prob = params.nb_prob
    l1 = nb_logpmf(n, params.alpha1, prob)
    l2 = nb_logpmf(n, params.alpha1 + params.alpha2, prob)
    return l1, l2


def frequency_logpmf(params, n):
    """log P(N = n) under the Negative Binomial mixture."""
    n_arr = np.asarray(n)
    if np.any(n_arr < 0) or np.any(n_arr != np.floor(n_arr)):
        raise DomainError("claim counts must be nonnegative integers")
    l1, l2 = _component_logpmfs(params, n_arr)
    p = params.p
    if p == 1.0:
        return l1
    if p == 0.0:
        return l2
    return np.logaddexp(math.log(p) + l1, math.log1p(-p) + l2)


def frequency_pmf(params, n):
    """P(N = n) for the Negative Binomial mixture (log-space then exp)."""
    return np.exp(frequency_logpmf(params, n))


def _tail_mass(params, lo, hi):
    """Mixture mass below ``lo`` plus mass above ``hi``."""
    prob = params.nb_prob
    out = 0.0
    for weight, shape in ((params.p, params.alpha1),
                          (1.0 - params.p, params.alpha1 + params.alpha2)):
        if weight > 0.0:
            below = nbinom.cdf(lo - 1, shape, prob) if lo > 0 else 0.0
            out += weight * (below + nbinom.sf(hi, shape, prob))
    return float(out)


def frequency_support(params, tail=1e-12):
    """Integer range [lo, hi] outside of which the mixture has mass < ``tail``.

    Starts from Gamma-mixture moments and widens until the two NB tails,
    evaluated directly rather than as ``1 - sum``, fall below ``tail``.
    """
    means = [params.alpha1 / params.beta, (params.alpha1 + params.alpha2) / params.beta]
    shapes = [params.alpha1, params.alpha1 + params.alpha2]
    sds = [math.sqrt(m + m / params.beta) for m in means]
    lo = max(0, int(math.floor(min(m - 12 * s for m, s in zip(means, sds)))))
    hi = int(math.ceil(max(m + 12 * s + 20 * m / a for m, s, a in zip(means, sds, shapes)))) + 10
    for _ in range(60):
        if _tail_mass(params, lo, hi) < tail:
            break
        lo = max(0, lo - (hi - lo) // 2)
        hi = hi + (hi - lo)
    return lo, hi


def frequency_cdf_table(params, hi):
    """Model CDF at 0..hi as an array."""
    return np.cumsum(frequency_pmf(params, np.arange(hi + 1)))


def prior_density(params, lam):
    """Density of the Gamma-mixture prior on the Poisson intensity."""
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr <= 0):
        raise DomainError("lambda must be positive")
    b = params.beta
    loglam = np.log(lam_arr)

    def gamma_logpdf(a):
        return a * math.log(b) + (a - 1.0) * loglam - b * lam_arr - log_gamma(a)

    out = params.p * np.exp(gamma_logpdf(params.alpha1))
    if params.p < 1.0:
        out = out + (1.0 - params.p) * np.exp(gamma_logpdf(params.alpha1 + params.alpha2))
    return float(out) if np.ndim(lam) == 0 else out


def prior_mean(params):
    """Prior mean of the intensity, i.e. the expected count per period."""
    return (params.alpha1 + (1.0 - params.p) * params.alpha2) / params.beta


def severity_logpdf(params, y):
    """log h(y) for the Exponential/Lomax mixture."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("claim sizes must be positive")
    lf = math.log(params.mu) - params.mu * y
    lg = (
        math.log(params.delta) + params.delta * math.log(params.sigma)
        - (params.delta + 1.0) * np.log(params.sigma + y)
    )
    if params.nu == 1.0:
        return lf
    if params.nu == 0.0:
        return lg
    return np.logaddexp(math.log(params.nu) + lf, math.log1p(-params.nu) + lg)


def severity_density(params, y):
    """h(y) = nu mu e^{-mu y} + (1 - nu) delta sigma^delta / (sigma + y)^(delta + 1)."""
    out = np.exp(severity_logpdf(params, y))
    return float(out) if np.ndim(y) == 0 else out


def severity_mean(params):
    """Mean claim size; ``inf`` when the Lomax part has delta <= 1 and nu < 1."""
    if params.nu == 1.0:
        return 1.0 / params.mu
    if params.delta <= 1.0:
        return math.inf
    return params.nu / params.mu + (1.0 - params.nu) * params.sigma / (params.delta - 1.0)


def nu_from_frequency(params):
    """Historical-stream weight implied by the count model.

    Uses B(a1 + 1, a2) / B(a1, a2) = a1 / (a1 + a2).
    """
    ratio = params.alpha1 / (params.alpha1 + params.alpha2)
    return params.p + (1.0 - params.p) * ratio
