"""Seeded generation of claim counts and claim sizes.

Counts of period ``j`` come from the stream ``(seed, COUNTS, j)``; claim
sizes are drawn in blocks of ``SEVERITY_BLOCK`` claims, block ``b`` from
``(seed, SEVERITIES, b)``. Output is therefore fixed by the seed and does
not depend on generation order or on how many severities are requested.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import streams
from .errors import DomainError
from .models import ClaimHistory, FrequencyParams, SeverityParams

__all__ = [
    "SimConfig",
    "FINITE_MEAN",
    "INFINITE_MEAN",
    "draw_counts",
    "draw_severities",
    "simulate_counts",
    "simulate_severities",
    "simulate_history",
]

FINITE_MEAN = "finite-mean"
INFINITE_MEAN = "infinite-mean"


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``scenario`` names the Lomax tail regime and must agree with
    ``severity.delta`` (finite mean iff delta > 1); ``None`` infers it.
    """

    seed: int
    periods: int
    frequency: FrequencyParams
    severity: SeverityParams
    scenario: Optional[str] = None

    def __post_init__(self):
        if int(self.periods) < 1:
            raise DomainError("periods must be a positive integer")
        implied = FINITE_MEAN if self.severity.delta > 1 else INFINITE_MEAN
        if self.scenario is None:
            object.__setattr__(self, "scenario", implied)
        elif self.scenario not in (FINITE_MEAN, INFINITE_MEAN):
            raise DomainError(f"unknown scenario {self.scenario!r}")
        elif self.scenario != implied:
            raise DomainError(
                f"scenario {self.scenario} inconsistent with delta={self.severity.delta:g}"
            )


def draw_counts(params: FrequencyParams, size, rng):
    """Counts via component choice, Gamma intensity, then Poisson."""
    first = rng.random(size) < params.p
    shape = np.where(first, params.alpha1, params.alpha1 + params.alpha2)
    lam = rng.standard_gamma(shape) / params.beta
    return rng.poisson(lam)


def draw_severities(params: SeverityParams, size, rng):
    """Claim sizes by inverse transform of the chosen mixture component."""
    u_comp = rng.random(size)
    u = 1.0 - rng.random(size)  # in (0, 1]
    expo = -np.log(u) / params.mu
    lomax = params.sigma * np.expm1(-np.log(u) / params.delta)
    return np.where(u_comp < params.nu, expo, lomax)


def simulate_counts(cfg: SimConfig):
    """Per-period claim counts, one addressable stream per period."""
    out = np.empty(int(cfg.periods), dtype=np.int64)
    for j in range(out.size):
        rng = streams.substream(cfg.seed, streams.COUNTS, j)
        out[j] = draw_counts(cfg.frequency, 1, rng)[0]
    return out


def simulate_severities(cfg: SimConfig, total):
    """The first ``total`` claim sizes of the seed's severity stream."""
    total = int(total)
    if total < 0:
        raise DomainError("total must be nonnegative")
    block = streams.SEVERITY_BLOCK
    out = np.empty(total)
    for b, start in enumerate(range(0, total, block)):
        rng = streams.substream(cfg.seed, streams.SEVERITIES, b)
        chunk = draw_severities(cfg.severity, block, rng)
        stop = min(total, start + block)
        out[start:stop] = chunk[: stop - start]
    return out


def simulate_history(cfg: SimConfig):
    """Counts and attached claim sizes as a :class:`ClaimHistory`."""
    counts = simulate_counts(cfg)
    sev = simulate_severities(cfg, int(counts.sum()))
    return ClaimHistory.from_flat(counts.tolist(), sev.tolist())
