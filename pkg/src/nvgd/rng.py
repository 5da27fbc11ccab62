"""Named, counter-addressed random streams.

Every consumer of randomness in a run (particle init, train/validation
splits, divergence-estimator noise, Langevin noise, minibatch shuffling,
reference samples) gets its own stream derived from the root seed via
``SeedSequence(entropy=seed, spawn_key=(stream_id, *counters))``.

Streams are addressed, not consumed in sequence: the generator for
(stream, step) is a pure function of the root seed, so enabling or
disabling one consumer never shifts another consumer's draws.
"""

from __future__ import annotations

import numpy as np

_STREAM_IDS = {
    "ensemble_init": 0,
    "witness_init": 1,
    "split": 2,
    "hutchinson": 3,
    "hutchinson_val": 4,
    "langevin": 5,
    "minibatch": 6,
    "reference": 7,
    "oracle": 8,
}


def stream_rng(root_seed: int, name: str, *counters: int) -> np.random.Generator:
    """Generator for the named stream at the given counter address."""
    if name not in _STREAM_IDS:
        raise KeyError(f"unknown stream name {name!r}")
    entropy = int(root_seed) & (2**64 - 1)  # SeedSequence wants non-negative
    key = (_STREAM_IDS[name],) + tuple(int(c) for c in counters)
    return np.random.default_rng(np.random.SeedSequence(entropy=entropy, spawn_key=key))
