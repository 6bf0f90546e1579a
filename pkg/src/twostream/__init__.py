"""Claim-count and claim-size mixtures separating historical from unforeseeable risk.

The count model mixes two Negative Binomials whose Gamma intensities share a
rate; the claim-size model mixes an Exponential (historical claims) with a
Lomax (unforeseeable claims). The package fits both by EM, simulates them with
addressable random streams, tests count fits by parametric bootstrap and
computes Bayesian premiums with credibility intervals.
"""

from .errors import (
    DegenerateData,
    DomainError,
    InfiniteMean,
    MismatchError,
    QuadratureFailure,
    SolverFailure,
)
from .models import (
    ClaimHistory,
    FrequencyParams,
    SeverityParams,
    frequency_logpmf,
    frequency_pmf,
    nu_from_frequency,
    prior_density,
    prior_mean,
    severity_density,
    severity_logpdf,
    severity_mean,
)
from .emfit import EmConfig, EmTrace, fit_frequency, fit_severity, moment_init_frequency
from .posterior import (
    PremiumQuote,
    frequency_posterior,
    frequency_premium,
    premium_schedule,
    quote,
    severity_posterior,
    severity_premium,
)
from .simulate import SimConfig, simulate_counts, simulate_history, simulate_severities
from .gof import GofReport, gof_counts
from .globallik import (
    ArrivalPair,
    global_loglik,
    interarrival_density,
    joint_pair_density,
    severity_components,
)
from .estimators import BayesianPremium, FrequencyMixtureEM, SeverityMixtureEM

__version__ = "0.1.0"
