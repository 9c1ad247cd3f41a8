"""Seeded random streams.

Every stochastic routine takes a ``numpy.random.Generator``.  Child streams
are derived with ``SeedSequence.spawn`` so that replicate ``k`` of a run
seeded with ``s`` always sees the same stream, whatever the worker count:

    child_k = Generator(PCG64(SeedSequence(s).spawn(k + 1)[k]))
"""

import numpy as np


def make_rng(seed=None):
    """Return a Generator; an existing Generator is passed through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_seeds(seed, count):
    """Deterministic child ``SeedSequence`` objects for ``count`` sub-tasks."""
    return np.random.SeedSequence(seed).spawn(count)


def spawn_rngs(seed, count):
    return [np.random.default_rng(s) for s in spawn_seeds(seed, count)]
