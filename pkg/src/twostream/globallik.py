"""Joint count/severity likelihood and the inter-arrival view of the model.

Evaluation only: these functions return log-likelihoods and densities for
use by external optimisers; nothing here maximises them.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate

from .emfit import frequency_loglik, severity_loglik
from .errors import DomainError, MismatchError, QuadratureFailure
from .models import ClaimHistory, FrequencyParams, SeverityParams
from .specfun import log_beta

__all__ = [
    "ArrivalPair",
    "global_loglik",
    "lomax_density",
    "interarrival_density",
    "severity_components",
    "joint_pair_density",
]

QUAD_ABS_TOL = 1e-9


@dataclass(frozen=True)
class ArrivalPair:
    """Inter-arrival time ``t`` (periods) and claim size ``y`` of one claim."""

    t: float
    y: float

    def __post_init__(self):
        if not (self.t > 0 and self.y > 0):
            raise DomainError("inter-arrival time and claim size must be positive")


def global_loglik(fp: FrequencyParams, sp: SeverityParams, history: ClaimHistory):
    """Sum of count log-pmfs plus claim-size log-densities.

    Raises
    ------
    MismatchError
        If the history carries no per-period severities.
    """
    if history.periods == 0:
        return 0.0
    if history.severities is None:
        raise MismatchError("global log-likelihood needs severities grouped by period")
    return frequency_loglik(fp, history.counts) + severity_loglik(sp, history.flat_severities())


def lomax_density(t, shape, scale):
    t = np.asarray(t, dtype=float)
    return np.exp(math.log(shape) + shape * math.log(scale) - (shape + 1.0) * np.log(scale + t))


def interarrival_density(fp: FrequencyParams, t):
    """Density of the time between claims: a two-component Lomax mixture.

    The second component has shape alpha1 + alpha2, matching the Gamma
    mixture prior on the intensity.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise DomainError("inter-arrival time must be positive")
    out = fp.p * lomax_density(t_arr, fp.alpha1, fp.beta)
    if fp.p < 1.0:
        out = out + (1.0 - fp.p) * lomax_density(t_arr, fp.alpha1 + fp.alpha2, fp.beta)
    return float(out) if np.ndim(t) == 0 else out


def severity_components(sp: SeverityParams):
    """The Exponential and Lomax claim-size densities as callables."""

    def f(y):
        return sp.mu * math.exp(-sp.mu * y)

    def g(y):
        return float(lomax_density(y, sp.delta, sp.sigma))

    return f, g


def _beta_expectation(func, a, b):
    """E[func(X)] for X ~ Beta(a, b) by adaptive quadrature."""
    log_norm = log_beta(a, b)
    opts = {"epsabs": QUAD_ABS_TOL, "epsrel": 1e-10, "limit": 200, "full_output": 1}
    if a < 1.0 or b < 1.0:
        res = integrate.quad(func, 0.0, 1.0, weight="alg", wvar=(a - 1.0, b - 1.0), **opts)
        value = res[0] * math.exp(-log_norm)
        err = res[1] * math.exp(-log_norm)
    else:
        def integrand(x):
            if x <= 0.0 or x >= 1.0:
                return 0.0
            return func(x) * math.exp(
                (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - log_norm
            )

        mode = (a - 1.0) / (a + b - 2.0) if a + b > 2.0 else 0.5
        res = integrate.quad(integrand, 0.0, 1.0, points=[mode], **opts)
        value, err = res[0], res[1]
    if len(res) > 3 and err > 10 * QUAD_ABS_TOL * max(1.0, abs(value)):
        raise QuadratureFailure(f"Beta quadrature reached only {err:.3g}", err)
    return value


def joint_pair_density(fp: FrequencyParams, sp_components, pair: ArrivalPair):
    """Joint density of an (inter-arrival time, claim size) pair.

    With probability ``p`` the unforeseeable intensity is zero: the claim is
    historical and the waiting time is Lomax(alpha1, beta). Otherwise the split
    rate xi ~ Beta(alpha1, alpha2) weights the two claim-size densities and the
    waiting time is Lomax(alpha1 + alpha2, beta). The xi-average is taken by
    quadrature.

    Parameters
    ----------
    sp_components : (callable, callable)
        Historical and unforeseeable claim-size densities ``(f, g)``.
    """
    f, g = sp_components
    fy = float(f(pair.y))
    gy = float(g(pair.y))
    atom = fp.p * fy * float(lomax_density(pair.t, fp.alpha1, fp.beta))
    if fp.p == 1.0:
        return atom
    mixed = _beta_expectation(lambda x: x * fy + (1.0 - x) * gy, fp.alpha1, fp.alpha2)
    wait = float(lomax_density(pair.t, fp.alpha1 + fp.alpha2, fp.beta))
    return atom + (1.0 - fp.p) * mixed * wait
