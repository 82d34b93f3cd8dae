"""Counter-based seed derivation for reproducible parallel replications."""

from __future__ import annotations

import numpy as np

SeedLike = int | np.random.SeedSequence | np.random.Generator | None


def derive_seed(master: int, *keys: int) -> np.random.SeedSequence:
    """Seed for the stream indexed by ``keys`` under ``master``.

    Every replicate gets its own sequence built from the tuple
    ``(master, *keys)`` so results do not depend on how replicates are
    scheduled over workers.
    """
    return np.random.SeedSequence([int(master), *(int(k) for k in keys)])


def rng_from(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
