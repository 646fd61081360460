"""Pretraining loops and language-model evaluation."""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigError, NumericalError
from ..langgen import Vocabulary
from ..neural import AdamW, EncoderModel, deterministic_mode, noam_lr, save_checkpoint
from ..neural import tensor as T
from ..rngstream import stream
from .batching import MlmConfig, TrainConfig, batch_stream, clm_targets, mlm_mask, pad_batch


def clm_loss(model: EncoderModel, sentences: Sequence[np.ndarray],
             pad_id: int, train: bool = False,
             rng: np.random.Generator | None = None) -> tuple[T.Tensor, int]:
    """Mean next-token cross-entropy over non-PAD targets.

    Returns (loss, number of scored tokens).
    """
    ids, pad = pad_batch(sentences, pad_id)
    if ids.shape[1] < 2:
        raise ConfigError("causal LM needs sentences of length >= 2")
    hidden = model.encode(ids, causal=True, train=train, rng=rng)
    targets, target_mask = clm_targets(ids, pad)
    b, t, d = hidden.data.shape
    logits = model.logits(T.narrow(hidden, 1, 0, t - 1))
    flat = T.reshape(logits, (b * (t - 1), model.vocab_size))
    loss = T.cross_entropy(flat, targets.reshape(-1), target_mask.reshape(-1))
    return loss, int(target_mask.sum())


def mlm_loss(model: EncoderModel, sentences: Sequence[np.ndarray],
             vocab: Vocabulary, mlm: MlmConfig,
             rng: np.random.Generator, train: bool = False,
             dropout_rng: np.random.Generator | None = None
             ) -> tuple[T.Tensor, int]:
    """Masked-token cross-entropy at the selected positions only."""
    ids, pad = pad_batch(sentences, vocab.pad_id)
    corrupted, selected, originals = mlm_mask(ids, pad, mlm, vocab, rng)
    if not selected.any():
        raise ConfigError("MLM corruption selected no positions in this batch")
    hidden = model.encode(corrupted, causal=False, pad_mask=pad,
                          train=train, rng=dropout_rng)
    b, t, _ = hidden.data.shape
    logits = model.logits(hidden)
    flat = T.reshape(logits, (b * t, model.vocab_size))
    loss = T.cross_entropy(flat, originals.reshape(-1), selected.reshape(-1))
    return loss, int(selected.sum())


@dataclass
class PretrainResult:
    loss_curve: list[float]
    checkpoint_path: str | None
    final_loss: float


def pretrain(model: EncoderModel, sentences: Sequence[np.ndarray],
             vocab: Vocabulary, config: TrainConfig,
             checkpoint_path=None, mlm: MlmConfig | None = None,
             extra_config: dict | None = None) -> PretrainResult:
    """Run ``total_steps`` AdamW updates with the Noam schedule.

    Batches stream from the corpus, reshuffled each pass. A non-finite
    loss aborts with a diagnostic instead of training onward through NaNs.
    """
    if config.objective == "mlm" and mlm is None:
        mlm = MlmConfig()
    order_rng = stream(config.seed, "batch-order")
    mask_rng = stream(config.seed, "mlm-mask")
    dropout_rng = stream(config.seed, "dropout")
    batches = batch_stream(sentences, config.batch_size, order_rng)
    optimizer = AdamW(model.parameters(), weight_decay=config.weight_decay,
                      clip_norm=config.clip_norm)
    curve: list[float] = []
    guard = deterministic_mode() if config.deterministic else contextlib.nullcontext()
    with guard:
        for step in range(1, config.total_steps + 1):
            batch = next(batches)
            if config.objective == "clm":
                loss, _ = clm_loss(model, batch, vocab.pad_id,
                                   train=True, rng=dropout_rng)
            else:
                loss, _ = mlm_loss(model, batch, vocab, mlm, mask_rng,
                                   train=True, dropout_rng=dropout_rng)
            value = float(loss.data)
            if not math.isfinite(value):
                raise NumericalError(
                    f"non-finite loss {value} at step {step}; aborting"
                )
            curve.append(value)
            optimizer.zero_grad()
            T.backward(loss)
            optimizer.step(noam_lr(step, model.config.embed_dim, config.warmup))
    if checkpoint_path is not None:
        meta = {
            "encoder": model.config.to_dict(),
            "vocab_size": model.vocab_size,
            "objective": config.objective,
            "seed": config.seed,
        }
        if extra_config:
            meta.update(extra_config)
        save_checkpoint(checkpoint_path, model.state_dict(), meta)
    return PretrainResult(
        loss_curve=curve,
        checkpoint_path=str(checkpoint_path) if checkpoint_path else None,
        final_loss=curve[-1],
    )


def eval_perplexity(model: EncoderModel, sentences: Sequence[np.ndarray],
                    pad_id: int, batch_size: int = 64) -> float:
    """exp of the mean per-token negative log-likelihood (causal model)."""
    if len(sentences) == 0:
        raise ConfigError("cannot evaluate perplexity on an empty corpus")
    total_nll = 0.0
    total_tokens = 0
    for start in range(0, len(sentences), batch_size):
        batch = sentences[start:start + batch_size]
        loss, count = clm_loss(model, batch, pad_id, train=False)
        total_nll += float(loss.data) * count
        total_tokens += count
    return float(np.exp(total_nll / total_tokens))
