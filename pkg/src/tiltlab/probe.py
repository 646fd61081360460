"""Context-recovery probing.

Linear classifiers read a frozen encoder's output vector at one target
position and try to recover the identities of the tokens at fixed relative
offsets. Causal-LM probing targets the last token and looks left
([-9,-4,-3,-2,-1,0]); masked-LM probing targets the middle token and looks
both ways ([-6,-3,-2,-1,0,1,2,3,6]). Probe inputs get fresh embeddings,
trained jointly with the heads; the encoder receives zero updates.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .neural import AdamW, EncoderModel, deterministic_mode
from .neural import tensor as T
from .neural.layers import Embedding, Linear, Module
from .rngstream import indexed_stream, stream

PROBE_VOCAB = 100
MIN_LEN, MAX_LEN = 15, 25
SPLITS = (90_000, 5_000, 5_000)
CLM_POSITIONS = (-9, -4, -3, -2, -1, 0)
MLM_POSITIONS = (-6, -3, -2, -1, 0, 1, 2, 3, 6)


@dataclass(frozen=True)
class ProbeDataset:
    train: list[np.ndarray]
    valid: list[np.ndarray]
    test: list[np.ndarray]


def generate_probe_data(seed: int) -> ProbeDataset:
    """100K integer sequences, lengths uniform on [15, 25], vocabulary 100."""
    total = sum(SPLITS)
    sequences = []
    for i in range(total):
        rng = indexed_stream(seed, "probe-sequence", i)
        length = int(rng.integers(MIN_LEN, MAX_LEN + 1))
        sequences.append(rng.integers(0, PROBE_VOCAB, size=length,
                                      dtype=np.int32))
    a, b, c = SPLITS
    return ProbeDataset(train=sequences[:a], valid=sequences[a:a + b],
                        test=sequences[a + b:])


def middle_index(length: int) -> int:
    """0-based middle position; even lengths take the left-of-center token."""
    if length < 13:
        raise ConfigError(
            f"length {length} cannot host all masked-probe offsets"
        )
    return (length - 1) // 2


@dataclass(frozen=True)
class ProbeConfig:
    mode: str = "clm"   # "clm" | "mlm"
    positions: tuple[int, ...] = ()
    batch_size: int = 256
    max_epochs: int = 8
    patience: int = 3
    lr: float = 1e-3
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self):
        if self.mode not in ("clm", "mlm"):
            raise ConfigError(f"unknown probe mode: {self.mode!r}")
        if not self.positions:
            default = CLM_POSITIONS if self.mode == "clm" else MLM_POSITIONS
            object.__setattr__(self, "positions", tuple(default))
        if self.mode == "clm" and any(p > 0 for p in self.positions):
            raise ConfigError(
                "positive relative positions are ill-defined for a causal "
                "encoder probing its last token"
            )
        for p in self.positions:
            if not -MIN_LEN < p < MIN_LEN:
                raise ConfigError(f"offset {p} exceeds the minimum length")


@dataclass(frozen=True)
class ProbeResult:
    encoder_id: str
    mode: str
    positions: tuple[int, ...]
    test_accuracy: dict[int, float]
    train_accuracy: dict[int, float]

    def __post_init__(self):
        for acc in (*self.test_accuracy.values(), *self.train_accuracy.values()):
            if not 0.0 <= acc <= 1.0:
                raise DataError("accuracies must lie in [0, 1]")

    def csv_rows(self) -> list[dict]:
        return [
            {"encoder_id": self.encoder_id, "mode": self.mode,
             "relative_position": p, "test_accuracy": self.test_accuracy[p]}
            for p in self.positions
        ]


class _ProbeModel(Module):
    def __init__(self, base: EncoderModel, config: ProbeConfig):
        rng = stream(config.seed, "probe-init")
        self.base = base
        self.config = config
        base.freeze_encoder()
        # id PROBE_VOCAB doubles as padding
        self.embedding = Embedding(PROBE_VOCAB + 1, base.config.embed_dim, rng)
        self.heads = [Linear(base.config.embed_dim, PROBE_VOCAB, rng)
                      for _ in config.positions]

    def target_vectors(self, batch: list[np.ndarray]) -> tuple[T.Tensor, np.ndarray]:
        lengths = np.array([len(s) for s in batch])
        b, t = len(batch), int(lengths.max())
        ids = np.full((b, t), PROBE_VOCAB, dtype=np.int64)
        for i, s in enumerate(batch):
            ids[i, : len(s)] = s
        pad_mask = np.arange(t)[None, :] >= lengths[:, None]
        causal = self.config.mode == "clm"
        if causal:
            targets = lengths - 1
        else:
            targets = np.array([middle_index(n) for n in lengths])
        inputs = self.embedding(ids)
        hidden = self.base.encode(ids, causal=causal,
                                  pad_mask=None if causal else pad_mask,
                                  inputs=inputs)
        return T.gather_positions(hidden, targets), targets

    def losses(self, batch: list[np.ndarray]) -> tuple[T.Tensor, list[np.ndarray]]:
        vectors, targets = self.target_vectors(batch)
        ids = np.array([np.pad(s, (0, MAX_LEN - len(s)),
                               constant_values=PROBE_VOCAB) for s in batch])
        per_head_gold = []
        total: T.Tensor | None = None
        scale = np.asarray(1.0 / len(self.heads), dtype=np.float32)
        for head, offset in zip(self.heads, self.config.positions):
            gold = ids[np.arange(len(batch)), targets + offset]
            per_head_gold.append(gold)
            loss = T.cross_entropy(head(vectors), gold)
            piece = T.mul(loss, scale)
            total = piece if total is None else T.add(total, piece)
        return total, per_head_gold

    def accuracies(self, sequences: list[np.ndarray]) -> dict[int, float]:
        correct = {p: 0 for p in self.config.positions}
        total = 0
        bs = self.config.batch_size
        for start in range(0, len(sequences), bs):
            batch = sequences[start:start + bs]
            vectors, targets = self.target_vectors(batch)
            ids = np.array([np.pad(s, (0, MAX_LEN - len(s)),
                                   constant_values=PROBE_VOCAB) for s in batch])
            for head, offset in zip(self.heads, self.config.positions):
                gold = ids[np.arange(len(batch)), targets + offset]
                pred = head(vectors).data.argmax(axis=1)
                correct[offset] += int((pred == gold).sum())
            total += len(batch)
        return {p: correct[p] / total for p in self.config.positions}


def train_probes(checkpoint_or_model, dataset: ProbeDataset,
                 config: ProbeConfig, encoder_id: str = "") -> ProbeResult:
    """Fit one linear classifier per relative position on frozen outputs.

    All heads share each forward pass; early stopping watches the mean
    validation accuracy.
    """
    if isinstance(checkpoint_or_model, EncoderModel):
        base = checkpoint_or_model
    else:
        from .tilt.transfer import load_encoder_model
        base, meta = load_encoder_model(checkpoint_or_model)
        if config.mode == "clm" and meta.get("objective") == "mlm":
            raise ConfigError("causal probing needs a causally pretrained encoder")
        encoder_id = encoder_id or str(checkpoint_or_model)
    model = _ProbeModel(base, config)
    before = base.encoder_fingerprint()
    optimizer = AdamW(model.parameters())
    order_rng = stream(config.seed, "probe-order")
    best_valid = -1.0
    best_test: dict[int, float] | None = None
    best_train: dict[int, float] | None = None
    stale = 0
    guard = deterministic_mode() if config.deterministic else contextlib.nullcontext()
    with guard:
        for _epoch in range(config.max_epochs):
            order = order_rng.permutation(len(dataset.train))
            for start in range(0, len(order), config.batch_size):
                batch = [dataset.train[i]
                         for i in order[start:start + config.batch_size]]
                loss, _ = model.losses(batch)
                if not math.isfinite(float(loss.data)):
                    raise ConfigError("non-finite probe loss")
                optimizer.zero_grad()
                T.backward(loss)
                optimizer.step(config.lr)
            valid = model.accuracies(dataset.valid)
            score = float(np.mean(list(valid.values())))
            if score > best_valid:
                best_valid = score
                best_test = model.accuracies(dataset.test)
                best_train = model.accuracies(dataset.train[: len(dataset.test)])
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    if base.encoder_fingerprint() != before:
        raise ConfigError("frozen-encoder contract violated during probing")
    return ProbeResult(
        encoder_id=encoder_id or "model",
        mode=config.mode,
        positions=config.positions,
        test_accuracy=best_test,
        train_accuracy=best_train,
    )
