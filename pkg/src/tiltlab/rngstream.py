"""Deterministic, splittable random streams built on Philox counters.

Every stochastic routine in the package derives its generator from a root
seed plus a static tag (and optionally an index), so any unit of work is a
pure function of its identifiers. Streams are never shared between workers:
sentence i of a corpus uses ``indexed_stream(seed, "sentence", i)`` no matter
which process generates it, which makes output independent of parallelism.
"""

from __future__ import annotations

import hashlib

import numpy as np
from numpy.random import Generator, Philox, SeedSequence


def _tag_to_int(tag: str) -> int:
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(seed: int, tag: str) -> Generator:
    """Generator for a named purpose under the given root seed."""
    return Generator(Philox(SeedSequence(entropy=(int(seed), _tag_to_int(tag)))))


def indexed_stream(seed: int, tag: str, index: int) -> Generator:
    """Generator for item ``index`` of a named purpose.

    Pure function of (seed, tag, index); adjacent indices give statistically
    independent streams.
    """
    return Generator(
        Philox(SeedSequence(entropy=(int(seed), _tag_to_int(tag), int(index))))
    )


def spawn_seeds(seed: int, tag: str, count: int) -> list[int]:
    """Derive ``count`` child seeds for independent runs (e.g. seed sweeps)."""
    rng = stream(seed, tag)
    return [int(x) for x in rng.integers(0, np.iinfo(np.int64).max, size=count)]
