"""scikit-learn style estimators over the functional core.

``FrequencyMixtureEM`` and ``SeverityMixtureEM`` follow the mixture-model
conventions of scikit-learn (``fit``, ``score_samples``, ``predict_proba``,
``sample``); ``BayesianPremium`` turns a claim history into premium quotes.
"""

import numbers

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from . import emfit, posterior
from .errors import DomainError
from .models import (
    ClaimHistory,
    FrequencyParams,
    SeverityParams,
    frequency_logpmf,
    nu_from_frequency,
    severity_logpdf,
)
from .simulate import draw_counts, draw_severities

__all__ = ["FrequencyMixtureEM", "SeverityMixtureEM", "BayesianPremium",
           "check_counts", "check_severities"]


def check_counts(X):
    """Validate claim counts and return them as a 1-D int64 array."""
    arr = check_array(X, ensure_2d=False, dtype=np.float64)
    arr = column_or_1d(arr)
    if np.any(arr < 0) or np.any(arr != np.floor(arr)):
        raise DomainError("claim counts must be nonnegative integers")
    return arr.astype(np.int64)


def check_severities(X, allow_empty=False):
    """Validate claim sizes and return them as a 1-D float array."""
    if allow_empty and np.size(X) == 0:
        return np.empty(0)
    arr = column_or_1d(check_array(X, ensure_2d=False, dtype=np.float64))
    if np.any(arr <= 0):
        raise DomainError("claim sizes must be positive")
    return arr


def _em_config(est):
    return emfit.EmConfig(tolerance=est.tol, max_iterations=est.max_iter,
                          criterion=est.criterion)


class FrequencyMixtureEM(BaseEstimator):
    """Negative Binomial mixture for per-period claim counts, fitted by EM.

    Parameters
    ----------
    init : "moments", FrequencyParams or sequence (alpha1, alpha2, beta, p)
        Starting point of the EM iterations.
    tol : float, default=1e-3
    max_iter : int, default=10000
    criterion : {"params", "loglik"}, default="params"

    Attributes
    ----------
    params_ : FrequencyParams
    init_params_ : FrequencyParams
    trace_ : EmTrace
    n_iter_ : int
    converged_ : bool
    nu_ : float
        Historical-stream claim weight implied by the fitted counts.
    """

    def __init__(self, init="moments", tol=1e-3, max_iter=10_000, criterion="params"):
        self.init = init
        self.tol = tol
        self.max_iter = max_iter
        self.criterion = criterion

    def _initial(self, counts):
        if isinstance(self.init, str):
            if self.init != "moments":
                raise DomainError(f"unknown init {self.init!r}")
            return emfit.moment_init_frequency(counts)
        if isinstance(self.init, FrequencyParams):
            return self.init
        a1, a2, b, p = (float(v) for v in self.init)
        return FrequencyParams(p, a1, a2, b)

    def fit(self, X, y=None):
        counts = check_counts(X)
        start = self._initial(counts)
        params, trace = emfit.fit_frequency(counts, start, _em_config(self))
        self.init_params_ = start
        self.params_ = params
        self.trace_ = trace
        self.n_iter_ = trace.iterations
        self.converged_ = trace.converged
        self.p_, self.alpha1_, self.alpha2_, self.beta_ = (
            params.p, params.alpha1, params.alpha2, params.beta)
        self.nu_ = nu_from_frequency(params)
        return self

    def score_samples(self, X):
        check_is_fitted(self, "params_")
        return frequency_logpmf(self.params_, check_counts(X))

    def score(self, X, y=None):
        """Mean log-likelihood per period."""
        return float(np.mean(self.score_samples(X)))

    def predict_proba(self, X):
        """Columns: first component (no unforeseeable intensity), second."""
        check_is_fitted(self, "params_")
        tau = emfit.freq_responsibilities(self.params_, check_counts(X))
        return np.column_stack([tau, 1.0 - tau])

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "params_")
        rng = np.random.default_rng(check_random_state(random_state).randint(2**31 - 1))
        return draw_counts(self.params_, int(n_samples), rng)


class SeverityMixtureEM(BaseEstimator):
    """Exponential/Lomax mixture for claim sizes, fitted by EM.

    Parameters
    ----------
    init : SeverityParams or sequence (mu, delta, sigma, nu)
    nu : "free" or float, default="free"
        Estimate the historical weight, or hold it at the given value.
    tol, max_iter, criterion
        As for :class:`FrequencyMixtureEM`.
    """

    def __init__(self, init=(1.5, 2.5, 0.5, 0.9), nu="free", tol=1e-3,
                 max_iter=10_000, criterion="params"):
        self.init = init
        self.nu = nu
        self.tol = tol
        self.max_iter = max_iter
        self.criterion = criterion

    def _initial(self):
        if isinstance(self.init, SeverityParams):
            return self.init
        mu, delta, sigma, nu = (float(v) for v in self.init)
        return SeverityParams(nu, mu, delta, sigma)

    def _fixed_nu(self):
        if isinstance(self.nu, str):
            if self.nu != "free":
                raise DomainError(f"nu must be 'free' or a number, got {self.nu!r}")
            return None
        if not isinstance(self.nu, numbers.Real):
            raise DomainError("nu must be 'free' or a number")
        return float(self.nu)

    def fit(self, X, y=None):
        sev = check_severities(X)
        start = self._initial()
        params, trace = emfit.fit_severity(sev, start, _em_config(self), fix_nu=self._fixed_nu())
        self.init_params_ = start
        self.params_ = params
        self.trace_ = trace
        self.n_iter_ = trace.iterations
        self.converged_ = trace.converged
        self.nu_, self.mu_, self.delta_, self.sigma_ = (
            params.nu, params.mu, params.delta, params.sigma)
        return self

    def score_samples(self, X):
        check_is_fitted(self, "params_")
        return severity_logpdf(self.params_, check_severities(X))

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def predict_proba(self, X):
        """Columns: Exponential (historical) part, Lomax (unforeseeable) part."""
        check_is_fitted(self, "params_")
        tau = emfit.sev_responsibilities(self.params_, check_severities(X))
        return np.column_stack([tau, 1.0 - tau])

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "params_")
        rng = np.random.default_rng(check_random_state(random_state).randint(2**31 - 1))
        return draw_severities(self.params_, int(n_samples), rng)


class BayesianPremium(TransformerMixin, BaseEstimator):
    """Bayesian pure premium from a claim history.

    ``fit`` conditions on the whole history and stores the quote for the
    next period; ``transform`` returns the per-period schedule as an array
    with columns ``SCHEDULE_COLUMNS``.

    Parameters
    ----------
    frequency_params : FrequencyParams
    severity_params : SeverityParams
    ipr_level : float, default=0.90
    n_draws : int, default=100000
        Monte Carlo draws for the premium interval.
    window : int or None
        Rolling window length; ``None`` conditions on all past periods.
    random_state : int, default=0
    """

    SCHEDULE_COLUMNS = ("period", "frequency_mean", "severity_mean", "premium",
                        "ipr_low", "ipr_high")

    def __init__(self, frequency_params=None, severity_params=None, ipr_level=0.90,
                 n_draws=posterior.DEFAULT_MC_DRAWS, window=None, random_state=0):
        self.frequency_params = frequency_params
        self.severity_params = severity_params
        self.ipr_level = ipr_level
        self.n_draws = n_draws
        self.window = window
        self.random_state = random_state

    def _check_params(self):
        if not isinstance(self.frequency_params, FrequencyParams):
            raise DomainError("frequency_params must be a FrequencyParams")
        if not isinstance(self.severity_params, SeverityParams):
            raise DomainError("severity_params must be a SeverityParams")
        if not 0.0 < self.ipr_level < 1.0:
            raise DomainError("ipr_level must lie in (0, 1)")

    @staticmethod
    def _history(X, severities):
        counts = check_counts(X) if np.size(X) else np.empty(0, dtype=np.int64)
        if severities is None:
            return ClaimHistory(tuple(counts.tolist()))
        if len(severities) == len(counts) and all(np.ndim(g) == 1 for g in severities):
            return ClaimHistory(tuple(counts.tolist()),
                                tuple(tuple(np.asarray(g, float)) for g in severities))
        return ClaimHistory.from_flat(counts.tolist(),
                                      check_severities(severities, allow_empty=True))

    def fit(self, X, y=None, severities=None):
        self._check_params()
        hist = self._history(X, severities)
        start = 0 if self.window is None else max(0, hist.periods - int(self.window))
        part = hist.window(start, hist.periods)
        self.frequency_posterior_ = posterior.frequency_posterior(
            self.frequency_params, part.counts)
        self.severity_posterior_ = posterior.severity_posterior(
            self.severity_params, part.flat_severities())
        rng = np.random.default_rng(self.random_state)
        self.quote_ = posterior.quote(
            self.frequency_params, self.severity_params, part.counts,
            part.flat_severities(), self.ipr_level, rng, self.n_draws,
            period=hist.periods)
        return self

    def schedule(self, X, severities=None):
        """List of :class:`PremiumQuote`, one per period 0..m."""
        self._check_params()
        hist = self._history(X, severities)
        return posterior.premium_schedule(
            self.frequency_params, self.severity_params, hist, self.ipr_level,
            seed=self.random_state, n_draws=self.n_draws, window=self.window)

    def transform(self, X, severities=None):
        rows = [
            [q.period, q.frequency_mean, q.severity_mean, q.premium, *q.interval]
            for q in self.schedule(X, severities)
        ]
        return np.asarray(rows, dtype=float)
