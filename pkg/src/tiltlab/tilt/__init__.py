"""Pretrain, freeze, re-embed, evaluate: the transfer pipeline."""

from .batching import MlmConfig, TrainConfig, batch_stream, clm_targets, mlm_mask, pad_batch
from .parsing import (
    ParseMetrics,
    ParserConfig,
    ParserModel,
    ParserVocab,
    decode_arcs,
    evaluate_parser,
    max_arborescence,
    train_parser,
)
from .lm import PretrainResult, clm_loss, eval_perplexity, mlm_loss, pretrain
from .runs import Metrics, metric_rows, read_manifests, write_manifest
from .tagging import TaggerConfig, TaggerModel, evaluate_tagger, train_pos
from .transfer import TransferResult, build_transfer_model, load_encoder_model, transfer_lm

__all__ = [
    "MlmConfig",
    "Metrics",
    "ParseMetrics",
    "ParserConfig",
    "ParserModel",
    "ParserVocab",
    "PretrainResult",
    "TaggerConfig",
    "TaggerModel",
    "TrainConfig",
    "TransferResult",
    "batch_stream",
    "build_transfer_model",
    "clm_loss",
    "clm_targets",
    "decode_arcs",
    "eval_perplexity",
    "evaluate_parser",
    "evaluate_tagger",
    "load_encoder_model",
    "max_arborescence",
    "metric_rows",
    "mlm_loss",
    "mlm_mask",
    "pad_batch",
    "pretrain",
    "read_manifests",
    "train_parser",
    "train_pos",
    "transfer_lm",
    "write_manifest",
]
