"""PoS tagging: a linear per-token classifier over frozen encoder outputs."""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..corpusio import Treebank, TreebankSentence
from ..errors import DataError, NumericalError
from ..neural import AdamW, EncoderModel, deterministic_mode
from ..neural import tensor as T
from ..neural.layers import Embedding, Linear, Module
from ..rngstream import stream


@dataclass(frozen=True)
class TaggerConfig:
    batch_size: int = 16
    epochs: int = 20
    patience: int = 3
    lr: float = 1e-3
    word_cap: int = 20000
    seed: int = 0
    deterministic: bool = True


class TaggerModel(Module):
    """Fresh word embeddings feed the frozen encoder; one linear layer on top."""

    def __init__(self, base: EncoderModel, words: dict[str, int],
                 tags: dict[str, int], config: TaggerConfig):
        rng = stream(config.seed, "tagger-init")
        self.base = base
        self.words = words
        self.tags = tags
        self.config = config
        base.freeze_encoder()
        self.word_emb = Embedding(len(words) + 1, base.config.embed_dim, rng)
        self.out = Linear(base.config.embed_dim, len(tags), rng)

    def logits(self, batch: Sequence[TreebankSentence]) -> tuple[T.Tensor, np.ndarray, np.ndarray]:
        lengths = np.array([len(s) for s in batch])
        b, t = len(batch), int(lengths.max())
        word_ids = np.zeros((b, t), dtype=np.int64)
        gold = np.zeros((b, t), dtype=np.int64)
        for i, sent in enumerate(batch):
            word_ids[i, : len(sent)] = [self.words.get(w, 0) for w in sent.tokens]
            gold[i, : len(sent)] = [self.tags[u] for u in sent.upos]
        pad_mask = np.arange(t)[None, :] >= lengths[:, None]
        inputs = self.word_emb(word_ids)
        hidden = self.base.encode(word_ids, causal=False, pad_mask=pad_mask,
                                  inputs=inputs)
        logits = self.out(hidden)
        flat = T.reshape(logits, (b * t, len(self.tags)))
        return flat, gold.reshape(-1), (~pad_mask).reshape(-1)


def _vocabs(treebank: Treebank, cap: int) -> tuple[dict[str, int], dict[str, int]]:
    counts: dict[str, int] = {}
    tags: set[str] = set()
    for sent in treebank:
        tags.update(sent.upos)
        for tok in sent.tokens:
            counts[tok] = counts.get(tok, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:cap]
    return ({w: i + 1 for i, (w, _) in enumerate(ranked)},
            {t: i for i, t in enumerate(sorted(tags))})


def evaluate_tagger(model: TaggerModel, treebank: Treebank) -> float:
    correct = total = 0
    sents = list(treebank)
    for start in range(0, len(sents), model.config.batch_size):
        flat, gold, mask = model.logits(sents[start:start + model.config.batch_size])
        pred = flat.data.argmax(axis=1)
        correct += int(((pred == gold) & mask).sum())
        total += int(mask.sum())
    return correct / total


def train_pos(checkpoint_or_model, treebank_train: Treebank,
              treebank_dev: Treebank, config: TaggerConfig
              ) -> tuple[TaggerModel, float]:
    """Train the tagging head (encoder frozen); returns best dev accuracy."""
    if len(treebank_train) == 0 or len(treebank_dev) == 0:
        raise DataError("tagger training needs nonempty treebanks")
    if isinstance(checkpoint_or_model, EncoderModel):
        base = checkpoint_or_model
    else:
        from .transfer import load_encoder_model
        base, _ = load_encoder_model(checkpoint_or_model)
    words, tags = _vocabs(treebank_train, config.word_cap)
    unseen = {u for s in treebank_dev for u in s.upos} - set(tags)
    if unseen:
        raise DataError(f"evaluation treebank uses unseen tags: {sorted(unseen)}")
    model = TaggerModel(base, words, tags, config)
    before = base.encoder_fingerprint()
    optimizer = AdamW(model.parameters())
    order_rng = stream(config.seed, "tagger-order")
    sents = list(treebank_train)
    best = -1.0
    stale = 0
    guard = deterministic_mode() if config.deterministic else contextlib.nullcontext()
    with guard:
        for _epoch in range(config.epochs):
            order = order_rng.permutation(len(sents))
            for start in range(0, len(sents), config.batch_size):
                batch = [sents[j] for j in order[start:start + config.batch_size]]
                flat, gold, mask = model.logits(batch)
                loss = T.cross_entropy(flat, gold, mask)
                if not math.isfinite(float(loss.data)):
                    raise NumericalError("non-finite tagger loss; aborting")
                optimizer.zero_grad()
                T.backward(loss)
                optimizer.step(config.lr)
            accuracy = evaluate_tagger(model, treebank_dev)
            if accuracy > best:
                best, stale = accuracy, 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    if base.encoder_fingerprint() != before:
        raise NumericalError("frozen-encoder contract violated during tagging")
    return model, best
