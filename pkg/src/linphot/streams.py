"""Deterministic derivation of independent random substreams.

Every stochastic operation draws from a generator keyed by
(master seed, stream key, chunk index).  Shots are produced on a fixed
chunk grid, so an ensemble is byte-identical for any worker count: the
chunk grid, not the workers, defines the substreams.
"""

from __future__ import annotations

import numpy as np

CHUNK_SIZE = 1 << 18

# stream-key tags (first element of a stream key)
ETA_SERIES = 1
DARK = 2
GAIN_SCALING = 3
RECONSTRUCTION = 4


def substream(seed: int, stream_key: tuple = ()) -> np.random.Generator:
    """Return the generator for a named stream under the master seed."""
    key = tuple(int(k) for k in stream_key)
    seq = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(seq))


def chunk_sizes(n_samples: int, chunk_size: int = CHUNK_SIZE) -> list[int]:
    """Split a sample count over the fixed chunk grid."""
    full, rest = divmod(int(n_samples), int(chunk_size))
    return [chunk_size] * full + ([rest] if rest else [])
