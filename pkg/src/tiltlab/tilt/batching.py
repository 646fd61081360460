"""Sentence batching and objective-specific corruption.

Sentences are padded to the batch maximum with PAD; losses always mask PAD
positions. Causal LM uses no BOS/EOS: the first token is unconditioned
context and targets run from the second token to the end. Masked LM
selects tokens BERT-style and keeps the original ids as targets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ..errors import ConfigError
from ..langgen import Vocabulary


@dataclass(frozen=True)
class TrainConfig:
    objective: str = "clm"   # "clm" | "mlm"
    batch_size: int = 128
    total_steps: int = 10_000
    warmup: int = 4000
    weight_decay: float = 0.01
    clip_norm: float = 0.25
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self):
        if self.objective not in ("clm", "mlm"):
            raise ConfigError(f"unknown objective: {self.objective!r}")
        if self.total_steps < 1 or self.batch_size < 1:
            raise ConfigError("total_steps and batch_size must be >= 1")


@dataclass(frozen=True)
class MlmConfig:
    select_rate: float = 0.15
    mask_rate: float = 0.80
    random_rate: float = 0.10
    keep_rate: float = 0.10

    def __post_init__(self):
        rates = (self.select_rate, self.mask_rate, self.random_rate,
                 self.keep_rate)
        if any(not 0.0 <= r <= 1.0 for r in rates):
            raise ConfigError("MLM rates must lie in [0, 1]")
        if abs(self.mask_rate + self.random_rate + self.keep_rate - 1.0) > 1e-9:
            raise ConfigError("mask/random/keep rates must sum to 1")


def pad_batch(sentences: Sequence[np.ndarray], pad_id: int
              ) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad to the batch max length. Returns (ids, pad positions)."""
    if len(sentences) == 0:
        raise ConfigError("empty batch")
    width = max(len(s) for s in sentences)
    ids = np.full((len(sentences), width), pad_id, dtype=np.int64)
    for i, s in enumerate(sentences):
        ids[i, : len(s)] = s
    return ids, ids == pad_id


def batch_stream(sentences: Sequence[np.ndarray], batch_size: int,
                 rng: np.random.Generator) -> Iterator[list[np.ndarray]]:
    """Endless stream of batches; order reshuffled every pass."""
    n = len(sentences)
    if n == 0:
        raise ConfigError("cannot batch an empty corpus")
    while True:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            chunk = order[start:start + batch_size]
            yield [sentences[i] for i in chunk]


def clm_targets(ids: np.ndarray, pad_mask: np.ndarray
                ) -> tuple[np.ndarray, np.ndarray]:
    """Next-token targets for positions 1..T-1 and their loss mask."""
    targets = ids[:, 1:]
    target_mask = ~pad_mask[:, 1:]
    return targets, target_mask


def mlm_mask(ids: np.ndarray, pad_mask: np.ndarray, config: MlmConfig,
             vocab: Vocabulary, rng: np.random.Generator
             ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """BERT-style corruption.

    Each non-PAD token is independently selected with ``select_rate``;
    of the selected, ``mask_rate`` become MASK, ``random_rate`` become a
    uniform random content token, the rest keep their surface form. Loss
    targets are always the original ids at the selected positions.

    Returns (corrupted ids, selected positions, original ids).
    """
    originals = ids.copy()
    corrupted = ids.copy()
    u_select = rng.random(ids.shape)
    selected = (u_select < config.select_rate) & ~pad_mask
    u_action = rng.random(ids.shape)
    randoms = rng.integers(0, vocab.size, size=ids.shape)
    to_mask = selected & (u_action < config.mask_rate)
    to_random = (selected & ~to_mask
                 & (u_action < config.mask_rate + config.random_rate))
    corrupted[to_mask] = vocab.mask_id
    corrupted[to_random] = randoms[to_random]
    return corrupted, selected, originals
