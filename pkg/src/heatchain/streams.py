"""Deterministic, independently addressable random streams.

Every random draw in the library comes from a counter-based generator
(Philox) keyed by a small tuple of integers, e.g. ``(master_seed,
stream_tag, shell_index)`` for unitary sampling or ``(master_seed,
worker)`` for Monte Carlo workers.  Streams with different keys are
statistically independent, and the same key always reproduces the same
sequence, so results do not depend on evaluation order or scheduling.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream"]


def substream(*key: int) -> np.random.Generator:
    """Return the generator addressed by an integer key path."""
    if not key:
        raise ValueError("stream key must contain at least one integer")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))
