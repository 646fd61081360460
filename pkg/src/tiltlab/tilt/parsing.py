"""Graph-based dependency parsing over a frozen encoder.

Input words are represented as the concatenation of trainable word
embeddings and character features from a bidirectional character LSTM,
projected to the encoder width. Arcs are scored with a biaffine form over
head/dependent projections (a learned root vector fills head slot 0);
labels with a bilinear scorer. The encoder itself receives zero updates.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..corpusio import Treebank, TreebankSentence
from ..errors import ConfigError, DataError, NumericalError
from ..neural import AdamW, EncoderModel, deterministic_mode
from ..neural import tensor as T
from ..neural.layers import Embedding, Linear, LstmLayer, Module
from ..neural.tensor import Parameter, Tensor
from ..rngstream import stream

NEG = -1e18


# ---------------------------------------------------------------------------
# Numericalization
# ---------------------------------------------------------------------------

@dataclass
class ParserVocab:
    """Word/char/tag/label inventories built from the training treebank.

    Id 0 is the unknown/padding slot for words and characters.
    """

    words: dict[str, int]
    chars: dict[str, int]
    upos: dict[str, int]
    labels: dict[str, int]

    @classmethod
    def build(cls, treebank: Treebank, word_cap: int = 20000) -> "ParserVocab":
        if len(treebank) == 0:
            raise DataError("cannot build parser vocabularies from an empty treebank")
        counts: dict[str, int] = {}
        chars: set[str] = set()
        upos: set[str] = set()
        labels: set[str] = set()
        for sent in treebank:
            for tok, tag, rel in zip(sent.tokens, sent.upos, sent.deprels):
                counts[tok] = counts.get(tok, 0) + 1
                chars.update(tok)
                upos.add(tag)
                labels.add(rel)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:word_cap]
        return cls(
            words={w: i + 1 for i, (w, _) in enumerate(ranked)},
            chars={c: i + 1 for i, c in enumerate(sorted(chars))},
            upos={t: i for i, t in enumerate(sorted(upos))},
            labels={r: i for i, r in enumerate(sorted(labels))},
        )

    def check_compatible(self, treebank: Treebank) -> None:
        unseen = {d for s in treebank for d in s.deprels} - set(self.labels)
        if unseen:
            raise DataError(
                f"evaluation treebank uses labels missing from training: "
                f"{sorted(unseen)}"
            )

    def word_ids(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.words.get(t, 0) for t in tokens], dtype=np.int64)

    def char_ids(self, token: str) -> np.ndarray:
        return np.array([self.chars.get(c, 0) for c in token], dtype=np.int64)


@dataclass(frozen=True)
class ParserConfig:
    word_dim: int = 100
    char_dim: int = 50
    char_hidden: int = 50
    arc_dim: int = 200
    label_dim: int = 100
    dropout: float = 0.1
    batch_size: int = 16
    epochs: int = 30
    patience: int = 3
    lr: float = 1e-3
    word_cap: int = 20000
    seed: int = 0
    deterministic: bool = True
    use_mst: bool = False


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

class CharBiLstm(Module):
    """Word shapes via forward+backward character LSTMs (final states)."""

    def __init__(self, n_chars: int, dim: int, hidden: int,
                 rng: np.random.Generator):
        self.emb = Embedding(n_chars, dim, rng)
        self.fwd = LstmLayer(dim, hidden, rng)
        self.bwd = LstmLayer(dim, hidden, rng)
        self.hidden = hidden

    def __call__(self, char_ids: np.ndarray, lengths: np.ndarray) -> Tensor:
        # char_ids: (W, C) zero-padded; lengths: (W,)
        w, c = char_ids.shape
        rev = np.zeros_like(char_ids)
        for i, n in enumerate(lengths):
            rev[i, :n] = char_ids[i, :n][::-1]
        feats = []
        for ids in (char_ids, rev):
            x = self.emb(ids)
            steps = [T.reshape(T.narrow(x, 1, t, 1), (w, x.data.shape[2]))
                     for t in range(c)]
            layer = self.fwd if ids is char_ids else self.bwd
            outs = T.stack(layer(steps), axis=1)
            feats.append(T.gather_positions(outs, lengths - 1))
        return T.concat(feats, axis=-1)


class ParserModel(Module):
    """Biaffine parser head over a (frozen) base encoder."""

    def __init__(self, base: EncoderModel, vocab: ParserVocab,
                 config: ParserConfig, freeze_encoder: bool = True):
        rng = stream(config.seed, "parser-init")
        d = base.config.embed_dim
        n_labels = len(vocab.labels)
        self.base = base
        self.vocab = vocab
        self.config = config
        if freeze_encoder:
            base.freeze_encoder()
        # baseline word embedding id 0 doubles as unknown and padding
        self.word_emb = Embedding(len(vocab.words) + 1, config.word_dim, rng)
        self.char_lstm = CharBiLstm(len(vocab.chars) + 1, config.char_dim,
                                    config.char_hidden, rng)
        self.input_proj = Linear(config.word_dim + 2 * config.char_hidden, d, rng)
        self.root_vec = Parameter(np.zeros((1, d), dtype=np.float32))
        self.arc_dep = Linear(d, config.arc_dim, rng)
        self.arc_head = Linear(d, config.arc_dim, rng)
        self.arc_bilinear = Parameter(
            np.zeros((config.arc_dim, config.arc_dim), dtype=np.float32))
        self.arc_head_bias = Linear(config.arc_dim, 1, rng, bias=False)
        self.lab_dep = Linear(d, config.label_dim, rng)
        self.lab_head = Linear(d, config.label_dim, rng)
        self.lab_bilinear = Parameter(
            np.zeros((config.label_dim, n_labels * config.label_dim),
                     dtype=np.float32))
        self.lab_lin_dep = Linear(config.label_dim, n_labels, rng)
        self.lab_lin_head = Linear(config.label_dim, n_labels, rng)

    # -- feature pipeline ---------------------------------------------------

    def encode_batch(self, batch: Sequence[TreebankSentence],
                     train: bool = False,
                     rng: np.random.Generator | None = None) -> Tensor:
        lengths = np.array([len(s) for s in batch])
        b, t = len(batch), int(lengths.max())
        word_ids = np.zeros((b, t), dtype=np.int64)
        flat_words: list[np.ndarray] = []
        for i, sent in enumerate(batch):
            word_ids[i, : len(sent)] = self.vocab.word_ids(sent.tokens)
            flat_words.extend(self.vocab.char_ids(tok) for tok in sent.tokens)
        char_len = np.array([max(len(wcs), 1) for wcs in flat_words])
        chars = np.zeros((len(flat_words), int(char_len.max())), dtype=np.int64)
        for i, wcs in enumerate(flat_words):
            chars[i, : len(wcs)] = wcs
        char_feats = self.char_lstm(chars, char_len)          # (W, 2*ch)
        batch_idx = np.concatenate(
            [np.full(len(s), i) for i, s in enumerate(batch)])
        pos_idx = np.concatenate([np.arange(len(s)) for s in batch])
        char_grid = T.put_positions(char_feats, batch_idx, pos_idx, b, t)
        words = self.word_emb(word_ids)
        inputs = self.input_proj(T.concat([words, char_grid], axis=-1))
        if train and self.config.dropout > 0:
            inputs = T.dropout(inputs, self.config.dropout, rng)
        pad_mask = np.arange(t)[None, :] >= lengths[:, None]
        return self.base.encode(word_ids, causal=False, pad_mask=pad_mask,
                                train=False, inputs=inputs)

    # -- scoring ------------------------------------------------------------

    def arc_scores(self, hidden_row: Tensor) -> tuple[Tensor, Tensor]:
        """Scores (n, n+1) for one sentence plus the head representations.

        Row i scores dependent i+1 against candidates [root, w1..wn].
        """
        cands = T.concat([self.root_vec, hidden_row], axis=0)   # (n+1, d)
        heads = T.relu(self.arc_head(cands))
        deps = T.relu(self.arc_dep(hidden_row))
        bilinear = T.matmul(T.matmul(deps, self.arc_bilinear),
                            T.swapaxes(heads, 0, 1))            # (n, n+1)
        head_bias = T.reshape(self.arc_head_bias(heads),
                              (1, heads.data.shape[0]))
        return T.add(bilinear, head_bias), cands

    def label_scores(self, hidden_row: Tensor, cands: Tensor,
                     head_idx: np.ndarray) -> Tensor:
        """Label logits (n, n_labels) for the given head assignment."""
        n = hidden_row.data.shape[0]
        n_labels = len(self.vocab.labels)
        ld = self.config.label_dim
        head_repr = T.embedding(cands, np.asarray(head_idx))
        lh = T.relu(self.lab_head(head_repr))
        dp = T.relu(self.lab_dep(hidden_row))
        mix = T.reshape(T.matmul(dp, self.lab_bilinear), (n, n_labels, ld))
        bil = T.reshape(T.matmul(mix, T.reshape(lh, (n, ld, 1))), (n, n_labels))
        return T.add(T.add(bil, self.lab_lin_dep(dp)), self.lab_lin_head(lh))


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

def _best_heads(score: np.ndarray, nodes: list[int]) -> dict[int, int]:
    best = {}
    for d in nodes:
        if d == 0:
            continue
        cands = [h for h in nodes if h != d]
        best[d] = max(cands, key=lambda h: score[h, d])
    return best


def _find_cycle(best: dict[int, int]) -> list[int] | None:
    for start in best:
        seen = []
        node = start
        while node in best and node not in seen:
            seen.append(node)
            node = best[node]
        if node in seen:
            return seen[seen.index(node):]
    return None


def _cle(score: np.ndarray, nodes: list[int]) -> dict[int, int]:
    best = _best_heads(score, nodes)
    cycle = _find_cycle(best)
    if cycle is None:
        return best
    cycle_set = set(cycle)
    super_node = max(nodes) + 1
    size = super_node + 1
    new_score = np.full((size, size), NEG)
    rest = [n for n in nodes if n not in cycle_set]
    for h in rest:
        for d in rest:
            if h != d:
                new_score[h, d] = score[h, d]
    enter: dict[int, int] = {}
    for h in rest:
        gains = [(score[h, d] - score[best[d], d], d) for d in cycle]
        g, d = max(gains)
        new_score[h, super_node] = g
        enter[h] = d
    leave: dict[int, int] = {}
    for d in rest:
        options = [(score[h, d], h) for h in cycle]
        s, h = max(options)
        new_score[super_node, d] = s
        leave[d] = h
    sub = _cle(new_score, rest + [super_node])
    heads: dict[int, int] = {}
    for d, h in sub.items():
        if d == super_node:
            broken = enter[h]
            for c in cycle:
                heads[c] = h if c == broken else best[c]
        else:
            heads[d] = leave[d] if h == super_node else h
    return heads


def max_arborescence(score: np.ndarray) -> np.ndarray:
    """Maximum spanning arborescence rooted at node 0 with exactly one
    root dependent; ``score[h, d]`` is the weight of arc h -> d."""
    n = score.shape[0] - 1
    if n == 1:
        return np.array([0])
    best_total, best_heads = -np.inf, None
    for root_child in range(1, n + 1):
        trial = score.copy()
        trial[0, :] = NEG
        trial[0, root_child] = score[0, root_child]
        heads = _cle(trial, list(range(n + 1)))
        total = sum(trial[h, d] for d, h in heads.items())
        if total > best_total:
            best_total = total
            best_heads = heads
    return np.array([best_heads[d] for d in range(1, n + 1)])


def decode_arcs(arc_scores: np.ndarray, use_mst: bool = False) -> np.ndarray:
    """Head assignment from a (n, n+1) dependent-major score matrix.

    Greedy takes the argmax per dependent (self-arcs excluded); the MST
    decoder returns the maximum spanning arborescence with a single root
    dependent and no cycles.
    """
    n = arc_scores.shape[0]
    masked = arc_scores.copy()
    for i in range(n):
        masked[i, i + 1] = NEG   # a token cannot head itself
    if not use_mst:
        return masked.argmax(axis=1)
    head_major = np.full((n + 1, n + 1), NEG)
    for d in range(1, n + 1):
        head_major[:, d] = masked[d - 1, :]
    return max_arborescence(head_major)


# ---------------------------------------------------------------------------
# Training and evaluation
# ---------------------------------------------------------------------------

@dataclass
class ParseMetrics:
    uas: float
    las: float
    tokens: int


def attachment_scores(pred_heads, gold_heads, pred_labels=None,
                      gold_labels=None) -> ParseMetrics:
    """UAS/LAS over all tokens; without labels, LAS equals UAS."""
    pred_heads = np.asarray(pred_heads)
    gold_heads = np.asarray(gold_heads)
    head_ok = pred_heads == gold_heads
    if pred_labels is None:
        both_ok = head_ok
    else:
        both_ok = head_ok & (np.asarray(pred_labels) == np.asarray(gold_labels))
    n = len(gold_heads)
    return ParseMetrics(uas=float(head_ok.sum()) / n,
                        las=float(both_ok.sum()) / n, tokens=n)


def evaluate_parser(model: ParserModel, treebank: Treebank,
                    use_mst: bool | None = None) -> ParseMetrics:
    if use_mst is None:
        use_mst = model.config.use_mst
    correct_heads = correct_both = total = 0
    bs = model.config.batch_size
    sents = list(treebank)
    for start in range(0, len(sents), bs):
        batch = sents[start:start + bs]
        hidden = model.encode_batch(batch)
        for i, sent in enumerate(batch):
            n = len(sent)
            row = T.reshape(T.narrow(T.narrow(hidden, 0, i, 1), 1, 0, n),
                            (n, hidden.data.shape[2]))
            scores, cands = model.arc_scores(row)
            pred_heads = decode_arcs(scores.data, use_mst=use_mst)
            lab_logits = model.label_scores(row, cands, pred_heads)
            pred_labels = lab_logits.data.argmax(axis=1)
            gold_heads = np.array(sent.heads)
            gold_labels = np.array([model.vocab.labels[d] for d in sent.deprels])
            part = attachment_scores(pred_heads, gold_heads, pred_labels,
                                     gold_labels)
            correct_heads += round(part.uas * n)
            correct_both += round(part.las * n)
            total += n
    return ParseMetrics(uas=correct_heads / total, las=correct_both / total,
                        tokens=total)


def _batch_loss(model: ParserModel, batch: Sequence[TreebankSentence],
                train: bool, rng: np.random.Generator | None) -> Tensor:
    hidden = model.encode_batch(batch, train=train, rng=rng)
    pieces: list[Tensor] = []
    total_tokens = sum(len(s) for s in batch)
    for i, sent in enumerate(batch):
        n = len(sent)
        row = T.reshape(T.narrow(T.narrow(hidden, 0, i, 1), 1, 0, n),
                        (n, hidden.data.shape[2]))
        scores, cands = model.arc_scores(row)
        gold_heads = np.array(sent.heads)
        arc_nll = T.cross_entropy(scores, gold_heads)
        lab_logits = model.label_scores(row, cands, gold_heads)
        gold_labels = np.array([model.vocab.labels[d] for d in sent.deprels])
        lab_nll = T.cross_entropy(lab_logits, gold_labels)
        pieces.append(T.mul(T.add(arc_nll, lab_nll),
                            np.asarray(n / total_tokens, dtype=np.float32)))
    loss = pieces[0]
    for piece in pieces[1:]:
        loss = T.add(loss, piece)
    return loss


def train_parser(checkpoint_or_model, treebank_train: Treebank,
                 treebank_dev: Treebank, config: ParserConfig
                 ) -> tuple[ParserModel, ParseMetrics]:
    """Train the parser head with the encoder frozen; early-stop on dev UAS.

    ``checkpoint_or_model`` is a checkpoint path (MLM-pretrained encoder)
    or an EncoderModel instance (random-weights baseline).
    """
    if len(treebank_train) == 0 or len(treebank_dev) == 0:
        raise DataError("parser training needs nonempty treebanks")
    if isinstance(checkpoint_or_model, EncoderModel):
        base = checkpoint_or_model
    else:
        from .transfer import load_encoder_model
        base, _ = load_encoder_model(checkpoint_or_model)
    vocab = ParserVocab.build(treebank_train, word_cap=config.word_cap)
    vocab.check_compatible(treebank_dev)
    model = ParserModel(base, vocab, config, freeze_encoder=True)
    before = base.encoder_fingerprint()
    optimizer = AdamW(model.parameters(), clip_norm=0.25)
    order_rng = stream(config.seed, "parser-order")
    dropout_rng = stream(config.seed, "parser-dropout")
    sents = list(treebank_train)
    best = ParseMetrics(uas=-1.0, las=-1.0, tokens=0)
    stale = 0
    guard = deterministic_mode() if config.deterministic else contextlib.nullcontext()
    with guard:
        for _epoch in range(config.epochs):
            order = order_rng.permutation(len(sents))
            for start in range(0, len(sents), config.batch_size):
                batch = [sents[j] for j in order[start:start + config.batch_size]]
                loss = _batch_loss(model, batch, train=True, rng=dropout_rng)
                if not math.isfinite(float(loss.data)):
                    raise NumericalError("non-finite parser loss; aborting")
                optimizer.zero_grad()
                T.backward(loss)
                optimizer.step(config.lr)
            metrics = evaluate_parser(model, treebank_dev)
            if metrics.uas > best.uas:
                best = metrics
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    after = base.encoder_fingerprint()
    if before != after:
        raise NumericalError("frozen-encoder contract violated during parsing")
    return model, best
