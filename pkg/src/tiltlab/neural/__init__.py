"""Differentiable compute core: tensors, encoder layers, optimizer, checkpoints."""

from contextlib import contextmanager

from . import tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (
    Embedding,
    EncoderConfig,
    EncoderModel,
    LayerNorm,
    Linear,
    LstmStack,
    Module,
    TransformerStack,
    lstm_encode,
    sinusoidal_positions,
    tied_logits,
    transformer_encode,
)
from .optim import AdamW, adamw_step, clip_gradients, noam_lr
from .tensor import Parameter, Tensor, backward


@contextmanager
def deterministic_mode():
    """Pin BLAS to one thread so reduction order is fixed and runs are
    bit-reproducible."""
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=1):
        yield


__all__ = [
    "AdamW",
    "Embedding",
    "EncoderConfig",
    "EncoderModel",
    "LayerNorm",
    "Linear",
    "LstmStack",
    "Module",
    "Parameter",
    "Tensor",
    "TransformerStack",
    "adamw_step",
    "backward",
    "clip_gradients",
    "deterministic_mode",
    "load_checkpoint",
    "lstm_encode",
    "noam_lr",
    "save_checkpoint",
    "sinusoidal_positions",
    "tensor",
    "tied_logits",
    "transformer_encode",
]
