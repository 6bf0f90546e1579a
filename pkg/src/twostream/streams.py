"""Addressable random streams.

Every stream is a Philox generator keyed by ``SeedSequence(seed, spawn_key)``,
so a draw is fixed by ``(seed, key)`` alone and does not depend on how many
other streams were consumed before it.
"""

import numpy as np

COUNTS = 0
SEVERITIES = 1
PREMIUM_MC = 2
BOOTSTRAP = 3

# claims drawn per severity sub-stream
SEVERITY_BLOCK = 4096


def substream(seed, *key):
    """Generator for the stream addressed by ``key`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
