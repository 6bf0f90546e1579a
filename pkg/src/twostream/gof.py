"""Goodness of fit of observed claim counts against the count mixture.

Statistics are discrete analogues on the integer CDF grid
(Choulakian, Lockhart & Stephens 1994):

* ``ks``: ``max_j |F_n(j) - F(j)|``
* ``cvm``: ``N * sum_j (F_n(j) - F(j))^2 p_j``
* ``ad``: ``N * sum_j (F_n(j) - F(j))^2 p_j / (F(j) (1 - F(j)))``

with ``p_j`` the model probability of ``j``. The quadratic sums skip cells
where ``F(j)`` is within 1e-12 of 0 or 1. p-values come from a parametric
bootstrap at the given parameters (or, with ``refit=True``, re-estimated on
every replicate).
"""

from dataclasses import dataclass, field

import numpy as np

from . import streams
from .emfit import EmConfig, fit_frequency
from .errors import DomainError, SolverFailure
from .models import FrequencyParams, frequency_pmf, frequency_support
from .simulate import draw_counts

__all__ = [
    "GofReport",
    "STATISTICS",
    "VARIANT",
    "count_grid",
    "empirical_cdf",
    "discrete_gof_statistics",
    "gof_counts",
]

STATISTICS = ("ks", "ad", "cvm")
VARIANT = "choulakian-lockhart-stephens-1994 discrete CvM/AD, sup-norm KS on integer grid"
CDF_EDGE = 1e-12


@dataclass
class GofReport:
    statistic: dict
    p_value: dict
    bootstrap_replicates: int
    bootstrap: str = "fixed-parameter"
    variant: str = VARIANT
    n: int = 0
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "statistic": dict(self.statistic),
            "p_value": dict(self.p_value),
            "bootstrap_replicates": self.bootstrap_replicates,
            "bootstrap": self.bootstrap,
            "variant": self.variant,
            "n": self.n,
            "seed": self.seed,
            **self.extra,
        }


def count_grid(counts, params):
    """Integer grid 0..hi covering the data and the model's effective support."""
    _, hi = frequency_support(params, CDF_EDGE)
    return np.arange(max(hi, int(np.max(counts))) + 1)


def empirical_cdf(counts, grid):
    counts = np.asarray(counts, dtype=np.int64)
    hist = np.bincount(counts, minlength=grid.size)[: grid.size]
    return np.cumsum(hist) / counts.size


def discrete_gof_statistics(counts, model_pmf, grid=None):
    """KS, AD and CvM statistics of ``counts`` against a pmf on ``0..len-1``.

    Parameters
    ----------
    counts : array_like of int
    model_pmf : array_like
        Model probabilities at ``0, 1, ..., len(model_pmf) - 1``.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size == 0:
        raise DomainError("need at least one count")
    pmf = np.asarray(model_pmf, dtype=float)
    if grid is None:
        grid = np.arange(pmf.size)
    if counts.max() >= pmf.size:
        pad = np.zeros(counts.max() + 1 - pmf.size)
        pmf = np.concatenate([pmf, pad])
        grid = np.arange(pmf.size)
    cdf = np.minimum(np.cumsum(pmf), 1.0)
    ecdf = empirical_cdf(counts, grid)
    diff = ecdf - cdf
    n = counts.size
    ks = float(np.max(np.abs(diff)))
    inner = (cdf > CDF_EDGE) & (cdf < 1.0 - CDF_EDGE)
    sq = diff[inner] ** 2 * pmf[inner]
    cvm = float(n * np.sum(sq))
    ad = float(n * np.sum(sq / (cdf[inner] * (1.0 - cdf[inner]))))
    return {"ks": ks, "ad": ad, "cvm": cvm}


def gof_counts(counts, params: FrequencyParams, replicates=999, seed=0, refit=False,
               em_config=None):
    """KS/AD/CvM statistics with parametric-bootstrap p-values.

    Each replicate simulates ``len(counts)`` counts from ``params`` on the
    stream ``(seed, BOOTSTRAP, r)``. The p-value of a statistic ``s`` is
    ``(1 + #{s* >= s}) / (replicates + 1)``.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size == 0:
        raise DomainError("need at least one count")
    if np.any(counts < 0):
        raise DomainError("claim counts must be nonnegative")
    replicates = int(replicates)
    if replicates < 99:
        raise DomainError("use at least 99 bootstrap replicates")
    grid = count_grid(counts, params)
    pmf = frequency_pmf(params, grid)
    observed = discrete_gof_statistics(counts, pmf)
    exceed = {k: 0 for k in STATISTICS}
    cfg = em_config or EmConfig()
    failed = 0
    for r in range(replicates):
        rng = streams.substream(seed, streams.BOOTSTRAP, r)
        sim = draw_counts(params, counts.size, rng)
        if refit:
            try:
                fitted, _ = fit_frequency(sim, params, cfg)
            except SolverFailure:
                failed += 1
                fitted = params
            rep_grid = count_grid(sim, fitted)
            stats = discrete_gof_statistics(sim, frequency_pmf(fitted, rep_grid))
        else:
            stats = discrete_gof_statistics(sim, pmf)
        for k in STATISTICS:
            if stats[k] >= observed[k]:
                exceed[k] += 1
    p_values = {k: (1 + exceed[k]) / (replicates + 1) for k in STATISTICS}
    extra = {"refit_failures": failed} if refit else {}
    return GofReport(
        statistic=observed,
        p_value=p_values,
        bootstrap_replicates=replicates,
        bootstrap="refit" if refit else "fixed-parameter",
        n=int(counts.size),
        seed=int(seed),
        extra=extra,
    )
