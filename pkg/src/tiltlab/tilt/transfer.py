"""Frozen-encoder transfer: relearn only the embeddings on a new language."""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigError, DataError, NumericalError
from ..neural import (
    AdamW,
    EncoderConfig,
    EncoderModel,
    deterministic_mode,
    load_checkpoint,
    noam_lr,
)
from ..neural import tensor as T
from ..rngstream import stream
from .batching import TrainConfig, batch_stream
from .lm import clm_loss, eval_perplexity


def load_encoder_model(checkpoint_path) -> tuple[EncoderModel, dict]:
    """Rebuild the full pretrained model (embeddings included)."""
    state, meta = load_checkpoint(checkpoint_path)
    config = EncoderConfig.from_dict(meta["encoder"])
    model = EncoderModel(config, meta["vocab_size"], stream(0, "rebuild"))
    model.load_state_dict(state)
    return model, meta


def build_transfer_model(checkpoint_path, l2_vocab_size: int,
                         seed: int) -> tuple[EncoderModel, dict]:
    """Fresh L2 embeddings in front of the checkpointed encoder, frozen.

    The tied output projection follows the new embedding automatically.
    """
    state, meta = load_checkpoint(checkpoint_path)
    config = EncoderConfig.from_dict(meta["encoder"])
    model = EncoderModel(config, l2_vocab_size, stream(seed, "l2-embedding"))
    encoder_state = {
        name[len("encoder."):]: value
        for name, value in state.items()
        if name.startswith("encoder.")
    }
    if not encoder_state:
        raise DataError("checkpoint carries no encoder parameters")
    model.encoder.load_state_dict(encoder_state)
    model.freeze_encoder()
    return model, meta


@dataclass
class TransferResult:
    perplexity: float
    loss_curve: list[float]
    fingerprint_before: str
    fingerprint_after: str


def transfer_lm(checkpoint_path, l2_train: Sequence[np.ndarray],
                l2_eval: Sequence[np.ndarray], l2_vocab_size: int,
                pad_id: int, config: TrainConfig) -> TransferResult:
    """Train L2 embeddings against the frozen encoder, then evaluate.

    Returns eval perplexity plus the encoder fingerprints before and after
    training; callers may assert they are identical (they always are, and
    the function itself raises if not).
    """
    if config.objective != "clm":
        raise ConfigError("transfer_lm is a causal-LM evaluation")
    model, _ = build_transfer_model(checkpoint_path, l2_vocab_size, config.seed)
    before = model.encoder_fingerprint()
    order_rng = stream(config.seed, "transfer-order")
    dropout_rng = stream(config.seed, "transfer-dropout")
    batches = batch_stream(l2_train, config.batch_size, order_rng)
    optimizer = AdamW(model.parameters(), weight_decay=config.weight_decay,
                      clip_norm=config.clip_norm)
    curve: list[float] = []
    guard = deterministic_mode() if config.deterministic else contextlib.nullcontext()
    with guard:
        for step in range(1, config.total_steps + 1):
            loss, _ = clm_loss(model, next(batches), pad_id,
                               train=True, rng=dropout_rng)
            value = float(loss.data)
            if not math.isfinite(value):
                raise NumericalError(f"non-finite loss {value} at step {step}")
            curve.append(value)
            optimizer.zero_grad()
            T.backward(loss)
            optimizer.step(noam_lr(step, model.config.embed_dim, config.warmup))
        perplexity = eval_perplexity(model, l2_eval, pad_id)
    after = model.encoder_fingerprint()
    if before != after:
        raise NumericalError("frozen-encoder contract violated during transfer")
    return TransferResult(
        perplexity=perplexity,
        loss_curve=curve,
        fingerprint_before=before,
        fingerprint_after=after,
    )
