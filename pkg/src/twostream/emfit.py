"""EM estimation of the count mixture and the claim-size mixture.

Both fitters alternate responsibilities (E-step) with a maximisation of the
expected complete-data log-likelihood (M-step). Mixture weights and the
Exponential rate have closed forms; the Gamma/Lomax shapes come from a
damped Newton solve in log space, warm-started at the previous iterate.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import optimize

from .errors import DegenerateData, DomainError, SolverFailure
from .models import (
    FrequencyParams,
    SeverityParams,
    frequency_logpmf,
    log_binom_shifted,
    nb_logpmf,
    severity_logpdf,
)
from .solver import NewtonConfig, solve_log_newton
from .specfun import digamma

__all__ = [
    "EmConfig",
    "EmTrace",
    "freq_responsibilities",
    "freq_q_function",
    "freq_q_gradient",
    "freq_m_step",
    "fit_frequency",
    "moment_init_frequency",
    "sev_responsibilities",
    "sev_q_function",
    "sev_q_gradient",
    "sev_m_step",
    "fit_severity",
    "frequency_loglik",
    "severity_loglik",
]

TAU_FLOOR = 1e-300
TAU_CEIL = 1.0 - 1e-16


@dataclass(frozen=True)
class EmConfig:
    """EM loop settings.

    ``criterion`` is ``"params"`` (max-abs change of the raw parameters) or
    ``"loglik"`` (absolute change of the observed-data log-likelihood).
    """

    tolerance: float = 1e-3
    max_iterations: int = 10_000
    criterion: str = "params"
    solver: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")
        if int(self.max_iterations) < 1:
            raise DomainError("max_iterations must be at least 1")
        if self.criterion not in ("params", "loglik"):
            raise DomainError(f"unknown convergence criterion {self.criterion!r}")


@dataclass
class EmTrace:
    """Per-iteration history of an EM run.

    Row 0 of ``params`` and ``loglik`` is the starting point; row ``k`` is the
    state after iteration ``k``.
    """

    names: tuple
    params: list = field(default_factory=list)
    loglik: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    def append(self, vector, ll):
        self.params.append(np.asarray(vector, dtype=float).copy())
        self.loglik.append(float(ll))

    def as_rows(self):
        for k, (vec, ll) in enumerate(zip(self.params, self.loglik)):
            yield [k, *vec.tolist(), ll]

    def max_decrease(self):
        """Largest drop of the log-likelihood between consecutive iterations."""
        if len(self.loglik) < 2:
            return 0.0
        d = np.diff(np.asarray(self.loglik))
        return float(max(0.0, -d.min()))


def _pairwise_sum(x):
    return float(np.sum(x))


def frequency_loglik(params, counts):
    """Observed-data log-likelihood of the count mixture."""
    counts = np.asarray(counts, dtype=float)
    if counts.size == 0:
        return 0.0
    return math.fsum(frequency_logpmf(params, counts))


def severity_loglik(params, severities):
    """Observed-data log-likelihood of the claim-size mixture."""
    y = np.asarray(severities, dtype=float)
    if y.size == 0:
        return 0.0
    return math.fsum(severity_logpdf(params, y))


def _counts_array(counts):
    n = np.asarray(counts, dtype=float)
    if n.ndim != 1:
        raise DomainError("counts must be one-dimensional")
    if np.any(n < 0) or np.any(n != np.floor(n)):
        raise DomainError("claim counts must be nonnegative integers")
    return n


def _sev_array(severities):
    y = np.asarray(severities, dtype=float)
    if y.ndim != 1:
        raise DomainError("severities must be one-dimensional")
    if np.any(~(y > 0)) or not np.all(np.isfinite(y)):
        raise DomainError("claim sizes must be positive and finite")
    return y


def _responsibility(log_w1, l1, log_w2, l2):
    if log_w1 == -math.inf:
        return np.zeros_like(l1)
    if log_w2 == -math.inf:
        return np.ones_like(l1)
    a = log_w1 + l1
    b = log_w2 + l2
    return np.exp(a - np.logaddexp(a, b))


# --------------------------------------------------------------------------
# claim counts
# --------------------------------------------------------------------------


def freq_responsibilities(params: FrequencyParams, counts):
    """Posterior probability that each count comes from the first component."""
    n = _counts_array(counts)
    prob = params.nb_prob
    l1 = nb_logpmf(n, params.alpha1, prob)
    l2 = nb_logpmf(n, params.alpha1 + params.alpha2, prob)
    p = params.p
    log_p = math.log(p) if p > 0 else -math.inf
    log_q = math.log1p(-p) if p < 1 else -math.inf
    return _responsibility(log_p, l1, log_q, l2)


def freq_q_function(params: FrequencyParams, counts, tau):
    """Expected complete-data log-likelihood of the count mixture.

    Terms weighted by zero responsibility are dropped, so a degenerate
    ``p`` in {0, 1} does not produce ``0 * log 0``.
    """
    n = _counts_array(counts)
    tau = np.clip(np.asarray(tau, dtype=float), TAU_FLOOR, TAU_CEIL)
    a1, a2, b, p = params.alpha1, params.alpha2, params.beta, params.p
    log_ratio = math.log(b) - math.log1p(b)
    log_q1 = -math.log1p(b)
    comp1 = log_binom_shifted(n, a1) + a1 * log_ratio + n * log_q1
    comp2 = log_binom_shifted(n, a1 + a2) + (a1 + a2) * log_ratio + n * log_q1
    s1 = float(tau.sum())
    s2 = float((1.0 - tau).sum())
    out = _pairwise_sum(tau * comp1) + _pairwise_sum((1.0 - tau) * comp2)
    if p > 0:
        out += s1 * math.log(p)
    elif s1 > TAU_FLOOR * n.size:
        return -math.inf
    if p < 1:
        out += s2 * math.log1p(-p)
    elif s2 > (1.0 - TAU_CEIL) * n.size * 2:
        return -math.inf
    return out


def freq_q_gradient(params: FrequencyParams, counts, tau):
    """Partial derivatives of the count Q function.

    Returns
    -------
    ndarray
        ``[dQ/dp, dQ/dalpha1, dQ/dalpha2, dQ/dbeta]``.
    """
    n = _counts_array(counts)
    tau = np.asarray(tau, dtype=float)
    a1, a2, b, p = params.alpha1, params.alpha2, params.beta, params.p
    m = n.size
    rest = 1.0 - tau
    s_rest = float(rest.sum())
    log_ratio = math.log(b) - math.log1p(b)
    d12 = digamma(n + a1 + a2) - digamma(a1 + a2)
    d_a1 = (
        _pairwise_sum(tau * (digamma(n + a1) - digamma(a1)))
        + _pairwise_sum(rest * d12)
        + m * log_ratio
    )
    d_a2 = _pairwise_sum(rest * d12) + s_rest * log_ratio
    d_b = (a1 * m + a2 * s_rest - b * float(n.sum())) / (b * (1.0 + b))
    d_p = float(tau.sum()) / p - s_rest / (1.0 - p)
    return np.array([d_p, d_a1, d_a2, d_b])


def _beta_given_shapes(a1, a2, m, s_rest, total):
    return (a1 * m + a2 * s_rest) / total


def freq_m_step(counts, tau, warm_start: FrequencyParams, cfg: EmConfig = EmConfig()):
    """Maximise the count Q function.

    ``p`` is the mean responsibility. Setting dQ/dbeta = 0 gives beta as a
    linear function of the shapes, which is substituted into the two digamma
    equations; those are solved for (alpha1, alpha2) by damped Newton.
    """
    n = _counts_array(counts)
    tau = np.asarray(tau, dtype=float)
    m = n.size
    total = float(n.sum())
    if total <= 0:
        raise DegenerateData("all counts are zero; the Gamma rate is not identified")
    rest = 1.0 - tau
    s_rest = float(rest.sum())
    p_new = float(tau.sum()) / m

    def residual(x):
        a1, a2 = x
        b = _beta_given_shapes(a1, a2, m, s_rest, total)
        log_ratio = math.log(b) - math.log1p(b)
        d12 = digamma(n + a1 + a2) - digamma(a1 + a2)
        r_rest = _pairwise_sum(rest * d12)
        f1 = _pairwise_sum(tau * (digamma(n + a1) - digamma(a1))) + r_rest + m * log_ratio
        f2 = r_rest + s_rest * log_ratio
        return np.array([f1, f2])

    if s_rest <= 0.0:
        # second component empty: alpha2 keeps its warm start, alpha1 alone is solved
        a2 = warm_start.alpha2

        def residual1(x):
            return residual(np.array([x[0], a2]))[:1]

        sol = solve_log_newton(residual1, [warm_start.alpha1], cfg.solver)
        a1 = float(sol.x[0])
    else:
        sol = solve_log_newton(residual, [warm_start.alpha1, warm_start.alpha2], cfg.solver)
        a1, a2 = (float(v) for v in sol.x)
    p_new = min(max(p_new, 0.0), 1.0)
    new = FrequencyParams(p_new, a1, a2, _beta_given_shapes(a1, a2, m, s_rest, total))
    # On flat ridges (huge shapes) the Newton root can be slightly off the
    # maximiser. Keeping the old shapes with the optimal p and beta for them
    # never lowers Q, so the step stays a generalised EM step.
    held = FrequencyParams(p_new, warm_start.alpha1, warm_start.alpha2,
                           _beta_given_shapes(warm_start.alpha1, warm_start.alpha2,
                                              m, s_rest, total))
    if freq_q_function(new, n, tau) < freq_q_function(held, n, tau):
        return held
    return new


def _nb_mixture_central_moments(p, a1, a2, b):
    def raw(a):
        mean = a / b
        var = a / b + a / b ** 2
        k3 = a / b + 3.0 * a / b ** 2 + 2.0 * a / b ** 3
        return mean, var + mean ** 2, k3 + 3.0 * mean * var + mean ** 3

    r1 = raw(a1)
    r2 = raw(a1 + a2)
    e1, e2, e3 = (p * x + (1.0 - p) * y for x, y in zip(r1, r2))
    var = e2 - e1 ** 2
    mu3 = e3 - 3.0 * e1 * e2 + 2.0 * e1 ** 3
    return e1, var, mu3


def moment_init_frequency(counts):
    """Deterministic method-of-moments starting point for the count EM.

    ``p`` is the fraction of counts below the sample mean (kept inside
    [0.05, 0.95]). The two groups split at the mean give a first guess of the
    component means; with ``p`` fixed, (alpha1, alpha2, beta) are then solved
    so the mixture mean, variance and third central moment match the sample.
    If that system has no solution the split-sample guess is returned.

    Raises
    ------
    DegenerateData
        If fewer than two distinct counts, or the sample variance does not
        exceed the mean.
    """
    n = _counts_array(counts)
    if np.unique(n).size < 2:
        raise DegenerateData("need at least two distinct counts for a moment start")
    mean = float(n.mean())
    var = float(n.var(ddof=1))
    if var <= mean:
        raise DegenerateData(
            f"sample variance {var:g} <= mean {mean:g}: no overdispersion to fit"
        )
    mu3 = float(np.mean((n - mean) ** 3))
    low = n < mean
    p = float(np.clip(low.mean(), 0.05, 0.95))
    m1 = float(n[low].mean())
    m2 = float(n[~low].mean())
    spread = p * (1.0 - p) * (m2 - m1) ** 2
    if var - mean - spread > 0:
        b0 = mean / (var - mean - spread)
    else:
        b0 = mean / (var - mean)
    a1_0 = max(b0 * m1, 1e-3)
    a2_0 = max(b0 * (m2 - m1), 1e-3)
    start = FrequencyParams(p, a1_0, a2_0, b0)

    def residual(x):
        a1, a2, b = x
        e1, v, k3 = _nb_mixture_central_moments(p, a1, a2, b)
        return np.array([e1 / mean - 1.0, v / var - 1.0, (k3 - mu3) / var ** 1.5])

    try:
        sol = solve_log_newton(residual, [a1_0, a2_0, b0], NewtonConfig(ftol=1e-12))
    except SolverFailure:
        return start
    a1, a2, b = (float(v) for v in sol.x)
    if not all(math.isfinite(v) and 0 < v < 1e12 for v in (a1, a2, b)):
        return start
    return FrequencyParams(p, a1, a2, b)


def _max_abs_change(old, new):
    return float(np.max(np.abs(np.asarray(new) - np.asarray(old))))


def fit_frequency(counts, init: FrequencyParams, cfg: EmConfig = EmConfig()):
    """Run EM for the count mixture.

    Returns
    -------
    (FrequencyParams, EmTrace)
    """
    n = _counts_array(counts)
    if n.size == 0:
        raise DomainError("need at least one count to fit")
    params = init
    trace = EmTrace(names=("p", "alpha1", "alpha2", "beta"))
    ll = frequency_loglik(params, n)
    trace.append(params.as_vector(), ll)
    for it in range(1, int(cfg.max_iterations) + 1):
        tau = freq_responsibilities(params, n)
        try:
            new = freq_m_step(n, tau, params, cfg)
        except SolverFailure as exc:
            exc.iteration = it
            raise SolverFailure(
                f"M-step failed at EM iteration {it}: {exc}", exc.residual, it
            ) from exc
        new_ll = frequency_loglik(new, n)
        trace.append(new.as_vector(), new_ll)
        trace.iterations = it
        if cfg.criterion == "params":
            change = _max_abs_change(params.as_vector(), new.as_vector())
        else:
            change = abs(new_ll - ll)
        params, ll = new, new_ll
        if change < cfg.tolerance:
            trace.converged = True
            break
    return params, trace


# --------------------------------------------------------------------------
# claim sizes
# --------------------------------------------------------------------------


def sev_responsibilities(params: SeverityParams, severities):
    """Posterior probability that each claim comes from the Exponential part."""
    y = _sev_array(severities)
    lf = math.log(params.mu) - params.mu * y
    lg = (
        math.log(params.delta) + params.delta * math.log(params.sigma)
        - (params.delta + 1.0) * np.log(params.sigma + y)
    )
    nu = params.nu
    log_nu = math.log(nu) if nu > 0 else -math.inf
    log_rest = math.log1p(-nu) if nu < 1 else -math.inf
    return _responsibility(log_nu, lf, log_rest, lg)


def sev_q_function(params: SeverityParams, severities, tau):
    """Expected complete-data log-likelihood of the claim-size mixture."""
    y = _sev_array(severities)
    tau = np.clip(np.asarray(tau, dtype=float), TAU_FLOOR, TAU_CEIL)
    nu, mu, delta, sigma = params.nu, params.mu, params.delta, params.sigma
    rest = 1.0 - tau
    s1 = float(tau.sum())
    s2 = float(rest.sum())
    out = (
        s1 * math.log(mu) - mu * _pairwise_sum(tau * y)
        + s2 * (math.log(delta) + delta * math.log(sigma))
        - (delta + 1.0) * _pairwise_sum(rest * np.log(sigma + y))
    )
    if nu > 0:
        out += s1 * math.log(nu)
    if nu < 1:
        out += s2 * math.log1p(-nu)
    return out


def sev_q_gradient(params: SeverityParams, severities, tau):
    """``[dQ/dmu, dQ/ddelta, dQ/dsigma, dQ/dnu]`` of the claim-size Q function."""
    y = _sev_array(severities)
    tau = np.asarray(tau, dtype=float)
    nu, mu, delta, sigma = params.nu, params.mu, params.delta, params.sigma
    m_star = y.size
    rest = 1.0 - tau
    s1 = float(tau.sum())
    s2 = m_star - s1
    d_mu = s1 / mu - _pairwise_sum(tau * y)
    d_delta = s2 / delta + m_star * math.log(sigma) - math.log(sigma) * s1 \
        - _pairwise_sum(rest * np.log(sigma + y))
    d_sigma = s2 * delta / sigma - (delta + 1.0) * _pairwise_sum(rest / (sigma + y))
    d_nu = s1 / nu - float(rest.sum()) / (1.0 - nu)
    return np.array([d_mu, d_delta, d_sigma, d_nu])


def _lomax_residual(y, rest, s_rest):
    def residual(x):
        delta, sigma = x
        ls = np.log(sigma + y)
        f_delta = s_rest / delta + s_rest * math.log(sigma) - _pairwise_sum(rest * ls)
        f_sigma = s_rest * delta / sigma - (delta + 1.0) * _pairwise_sum(rest / (sigma + y))
        return np.array([f_delta, f_sigma])

    return residual


PROFILE_LOG_SPAN = 14.0  # sigma beyond ~1e6 x median claim is exponential in practice


def _lomax_profile_step(y, rest, s_rest, warm_start):
    """Fallback (delta, sigma) update when the Newton solve fails.

    For fixed sigma the delta score has the root
    ``delta(sigma) = s_rest / sum(rest * log1p(y / sigma))``; the profile
    ``s_rest * log(delta(sigma)) - sum(rest * log(sigma + y))`` (constants
    dropped) is maximised over log sigma by bounded Brent. If the maximum sits
    at the upper end, the weighted claims prefer the exponential limit
    (delta, sigma -> inf with delta / sigma fixed), which no finite point
    attains; the warm start is then kept. Either way Q does not decrease, so
    the EM stays monotone (a generalised EM step).
    """

    def neg_profile(log_sigma):
        sigma = math.exp(log_sigma)
        denom = _pairwise_sum(rest * np.log1p(y / sigma))
        if not denom > 0:
            return math.inf
        return -(s_rest * math.log(s_rest / denom) - _pairwise_sum(rest * np.log(sigma + y)))

    centre = math.log(float(np.median(y)))
    lo, hi = centre - PROFILE_LOG_SPAN, centre + PROFILE_LOG_SPAN
    res = optimize.minimize_scalar(neg_profile, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    warm_q = s_rest * (math.log(warm_start.delta) + warm_start.delta * math.log(warm_start.sigma)) \
        - (warm_start.delta + 1.0) * _pairwise_sum(rest * np.log(warm_start.sigma + y))
    if res.success and res.x < hi - 1.0:
        sigma = math.exp(res.x)
        delta = s_rest / _pairwise_sum(rest * np.log1p(y / sigma))
        new_q = s_rest * (math.log(delta) + delta * math.log(sigma)) \
            - (delta + 1.0) * _pairwise_sum(rest * np.log(sigma + y))
        if new_q >= warm_q:
            return delta, sigma
    return warm_start.delta, warm_start.sigma


def sev_m_step(severities, tau, warm_start: SeverityParams, cfg: EmConfig = EmConfig(),
               fix_nu=None):
    """Maximise the claim-size Q function.

    ``nu`` (unless ``fix_nu`` is given) and ``mu`` have closed forms; (delta,
    sigma) solve the two Lomax score equations by damped Newton, with a
    profile-likelihood fallback (see ``_lomax_profile_step``). A component
    with zero total responsibility keeps its warm-start parameters.
    """
    y = _sev_array(severities)
    tau = np.asarray(tau, dtype=float)
    m_star = y.size
    s_tau = float(tau.sum())
    rest = 1.0 - tau
    s_rest = float(rest.sum())
    nu = float(fix_nu) if fix_nu is not None else s_tau / m_star
    ty = _pairwise_sum(tau * y)
    mu = s_tau / ty if s_tau > 0 and ty > 0 else warm_start.mu
    if s_rest > 0:
        try:
            sol = solve_log_newton(
                _lomax_residual(y, rest, s_rest),
                [warm_start.delta, warm_start.sigma],
                cfg.solver,
            )
            delta, sigma = (float(v) for v in sol.x)
            if math.log(sigma) > math.log(float(np.median(y))) + PROFILE_LOG_SPAN - 1.0:
                # residual only vanishes asymptotically: a boundary, not a root
                delta, sigma = _lomax_profile_step(y, rest, s_rest, warm_start)
        except SolverFailure:
            delta, sigma = _lomax_profile_step(y, rest, s_rest, warm_start)
    else:
        delta, sigma = warm_start.delta, warm_start.sigma
    return SeverityParams(min(max(nu, 0.0), 1.0), mu, delta, sigma)


def fit_severity(severities, init: SeverityParams, cfg: EmConfig = EmConfig(), fix_nu=None):
    """Run EM for the claim-size mixture.

    With ``fix_nu`` the historical weight is held at that value and only
    (mu, delta, sigma) are estimated.

    Returns
    -------
    (SeverityParams, EmTrace)
    """
    y = _sev_array(severities)
    if y.size == 0:
        raise DomainError("need at least one claim to fit")
    params = init
    if fix_nu is not None:
        params = SeverityParams(float(fix_nu), init.mu, init.delta, init.sigma)
    trace = EmTrace(names=("mu", "delta", "sigma", "nu"))
    ll = severity_loglik(params, y)
    trace.append(params.as_vector(), ll)
    for it in range(1, int(cfg.max_iterations) + 1):
        tau = sev_responsibilities(params, y)
        try:
            new = sev_m_step(y, tau, params, cfg, fix_nu=fix_nu)
        except SolverFailure as exc:
            raise SolverFailure(
                f"M-step failed at EM iteration {it}: {exc}", exc.residual, it
            ) from exc
        new_ll = severity_loglik(new, y)
        trace.append(new.as_vector(), new_ll)
        trace.iterations = it
        if cfg.criterion == "params":
            change = _max_abs_change(params.as_vector(), new.as_vector())
        else:
            change = abs(new_ll - ll)
        params, ll = new, new_ll
        if change < cfg.tolerance:
            trace.converged = True
            break
    return params, trace
