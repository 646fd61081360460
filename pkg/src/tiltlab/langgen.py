"""Artificial language generation.

A language is a recipe with three ingredients: a sentence-length
distribution, a token sampler (uniform, rank-harmonic "zipf", or a
log-linear topic model), and an optional latent pair structure (flat or
nesting, rendered as parentheses or as bracketed dependency tokens).
Corpora are generated sentence by sentence, and sentence ``i`` is a pure
function of ``(seed, i)``, so generation order and worker count never
change the output.

Seven stock recipes mirror the languages used throughout the experiments;
see :func:`language_preset`.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .rngstream import indexed_stream

# A sentence is a 1-D int32 array of token ids.
Sentence = np.ndarray

PRESET_NAMES = (
    "uniform",
    "zipf",
    "log_linear",
    "flat_parenthesis",
    "nesting_parenthesis",
    "flat_dependency",
    "nesting_dependency",
)


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Vocabulary:
    """Content-token id space plus reserved specials.

    Content ids occupy ``[0, size)``. The three specials sit directly above
    the content range so samplers can never emit them: OOV at ``size``,
    MASK at ``size+1``, PAD at ``size+2``.

    ``rendering`` controls text serialization: ``plain-integer`` writes ids
    as decimals; ``pair-bracketed`` splits the content range into heads
    ``[0, size/2)`` written ``<i`` and tails ``[size/2, size)`` written
    ``i>`` where ``i`` is the pair id.
    """

    size: int
    rendering: str = "plain-integer"

    def __post_init__(self):
        if self.size < 2:
            raise ConfigError(f"vocabulary size must be >= 2, got {self.size}")
        if self.rendering not in ("plain-integer", "pair-bracketed"):
            raise ConfigError(f"unknown rendering kind: {self.rendering!r}")
        if self.rendering == "pair-bracketed" and self.size % 2 != 0:
            raise ConfigError(
                f"pair-bracketed vocabulary needs an even size, got {self.size}"
            )

    @property
    def oov_id(self) -> int:
        return self.size

    @property
    def mask_id(self) -> int:
        return self.size + 1

    @property
    def pad_id(self) -> int:
        return self.size + 2

    @property
    def total_size(self) -> int:
        """Content tokens plus the three specials."""
        return self.size + 3

    @property
    def pair_capable(self) -> bool:
        return self.size % 2 == 0

    @property
    def pair_count(self) -> int:
        if not self.pair_capable:
            raise ConfigError("vocabulary with odd size has no pair lexicon")
        return self.size // 2

    def token_to_str(self, token_id: int) -> str:
        if self.rendering == "pair-bracketed":
            half = self.size // 2
            if token_id < half:
                return f"<{token_id}"
            if token_id < self.size:
                return f"{token_id - half}>"
        return str(token_id)

    def token_from_str(self, text: str) -> int:
        half = self.size // 2 if self.pair_capable else 0
        if self.rendering == "pair-bracketed":
            if text.startswith("<"):
                return int(text[1:])
            if text.endswith(">"):
                return half + int(text[:-1])
        value = int(text)
        if not 0 <= value < self.total_size:
            raise DataError(f"token id {value} outside vocabulary of {self.total_size}")
        return value


# ---------------------------------------------------------------------------
# Sentence lengths
# ---------------------------------------------------------------------------

DEFAULT_MIN_LENGTH = 6
DEFAULT_MAX_LENGTH = 60


@dataclass(frozen=True, eq=False)
class LengthDistribution:
    """Histogram over sentence lengths with hard support bounds."""

    lengths: np.ndarray
    probs: np.ndarray
    min_length: int
    max_length: int
    _cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __eq__(self, other):
        return (isinstance(other, LengthDistribution)
                and self.min_length == other.min_length
                and self.max_length == other.max_length
                and np.array_equal(self.lengths, other.lengths)
                and np.array_equal(self.probs, other.probs))

    def __post_init__(self):
        lengths = np.asarray(self.lengths, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "probs", probs)
        if lengths.size == 0:
            raise ConfigError("length distribution has empty support")
        if self.min_length < 1:
            raise ConfigError("minimum sentence length must be >= 1")
        if lengths.min() < self.min_length or lengths.max() > self.max_length:
            raise ConfigError("length support exceeds [min, max] bounds")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ConfigError("length probabilities must be >= 0 and sum to 1")
        object.__setattr__(self, "_cdf", np.cumsum(probs))

    @classmethod
    def from_histogram(cls, histogram: dict[int, float],
                       min_length: int | None = None,
                       max_length: int | None = None) -> "LengthDistribution":
        items = sorted(histogram.items())
        lengths = np.array([l for l, _ in items], dtype=np.int64)
        probs = np.array([p for _, p in items], dtype=np.float64)
        if min_length is None:
            min_length = int(lengths.min())
        if max_length is None:
            max_length = int(lengths.max())
        return cls(lengths, probs, min_length, max_length)

    @classmethod
    def uniform(cls, min_length: int, max_length: int) -> "LengthDistribution":
        lengths = np.arange(min_length, max_length + 1)
        probs = np.full(lengths.size, 1.0 / lengths.size)
        return cls(lengths, probs, min_length, max_length)

    def as_histogram(self) -> dict[int, float]:
        return {int(l): float(p) for l, p in zip(self.lengths, self.probs)}

    def sample(self, rng: np.random.Generator) -> int:
        return int(self.sample_many(rng, 1)[0])

    def sample_many(self, rng: np.random.Generator, count: int) -> np.ndarray:
        idx = np.searchsorted(self._cdf, rng.random(count), side="right")
        return self.lengths[np.minimum(idx, self.lengths.size - 1)]


def sample_length(dist: LengthDistribution, rng: np.random.Generator) -> int:
    """Draw one sentence length from the histogram."""
    return dist.sample(rng)


# ---------------------------------------------------------------------------
# Token samplers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TokenSampler:
    """How token (or pair) ids are drawn.

    ``uniform``: every id equiprobable. ``zipf``: p(id) proportional to
    (id+1)^-alpha, so id order is rank order. ``log_linear``: each sentence
    draws a fresh discourse vector c from the standard normal and samples
    its tokens i.i.d. from softmax(c . v_w) over per-word vectors v_w; the
    word vectors are drawn once per language (standard normal times
    ``vector_scale``) from ``vector_seed``, so the sampler is fully
    reproducible from this record.
    """

    kind: str
    alpha: float = 1.0
    dim: int = 10
    vector_scale: float = 1.0
    vector_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("uniform", "zipf", "log_linear"):
            raise ConfigError(f"unknown sampler kind: {self.kind!r}")
        if self.kind == "zipf" and self.alpha <= 0:
            raise ConfigError("zipf exponent must be positive")
        if self.kind == "log_linear" and self.dim < 1:
            raise ConfigError("log-linear vector dimension must be >= 1")

    def probabilities(self, n_items: int) -> np.ndarray | None:
        """Fixed unigram distribution, or None for the per-sentence sampler."""
        if self.kind == "uniform":
            return np.full(n_items, 1.0 / n_items)
        if self.kind == "zipf":
            weights = np.arange(1, n_items + 1, dtype=np.float64) ** (-self.alpha)
            return weights / weights.sum()
        return None

    def word_vectors(self, n_items: int) -> np.ndarray:
        if self.kind != "log_linear":
            raise ConfigError("word vectors exist only for the log-linear sampler")
        rng = indexed_stream(self.vector_seed, "log-linear-vectors", n_items)
        return rng.standard_normal((n_items, self.dim)) * self.vector_scale


class _SamplerState:
    """Precomputed tables for drawing from a TokenSampler over n items."""

    def __init__(self, sampler: TokenSampler, n_items: int):
        self.sampler = sampler
        self.n_items = n_items
        probs = sampler.probabilities(n_items)
        self.cdf = None if probs is None else np.cumsum(probs)
        self.vectors = (
            sampler.word_vectors(n_items) if sampler.kind == "log_linear" else None
        )

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.cdf is not None:
            u = rng.random(count)
            ids = np.searchsorted(self.cdf, u, side="right")
            return np.minimum(ids, self.n_items - 1).astype(np.int32)
        # log-linear: one discourse vector per sentence, tokens then i.i.d.
        c = rng.standard_normal(self.sampler.dim)
        logits = self.vectors @ c
        logits -= logits.max()
        probs = np.exp(logits)
        cdf = np.cumsum(probs / probs.sum())
        ids = np.searchsorted(cdf, rng.random(count), side="right")
        return np.minimum(ids, self.n_items - 1).astype(np.int32)


def sample_unstructured_tokens(sampler: TokenSampler, vocab: Vocabulary,
                               length: int, rng: np.random.Generator) -> Sentence:
    """Sample ``length`` content tokens with no latent structure."""
    if length < 1:
        raise ConfigError("sentence length must be >= 1")
    return _SamplerState(sampler, vocab.size).draw(rng, length)


def pair_count_for_length(length: int) -> int:
    """Half the requested length, rounded to nearest with ties up."""
    return (length + 1) // 2


def sample_pairs(vocab: Vocabulary, pair_count: int, sampler: TokenSampler,
                 rng: np.random.Generator) -> np.ndarray:
    """Draw pair ids i.i.d. with replacement; pair id equals sampler rank."""
    if not vocab.pair_capable:
        raise ConfigError("vocabulary is not pair-capable")
    return _SamplerState(sampler, vocab.pair_count).draw(rng, pair_count)


# ---------------------------------------------------------------------------
# Structure arrangement
# ---------------------------------------------------------------------------

DEFAULT_OPEN_THRESHOLD = 0.4


@dataclass(frozen=True)
class StructureSpec:
    """Latent pair structure and its surface rendering.

    ``open_threshold`` is the nesting arranger's probability of opening a
    new pair when the closing stack is nonempty.
    """

    structure: str = "none"   # none | flat | nesting
    rendering: str = "dependency"   # parenthesis | dependency
    open_threshold: float = DEFAULT_OPEN_THRESHOLD

    def __post_init__(self):
        if self.structure not in ("none", "flat", "nesting"):
            raise ConfigError(f"unknown structure: {self.structure!r}")
        if self.rendering not in ("parenthesis", "dependency"):
            raise ConfigError(f"unknown structure rendering: {self.rendering!r}")
        if not 0.0 <= self.open_threshold <= 1.0:
            raise ConfigError("open_threshold must lie in [0, 1]")


def arrange_flat(pairs: Sequence[int], rng: np.random.Generator
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Scatter pairs over random slots, each head before its own tail.

    Draws a uniformly random permutation of the 2k slots, gives pair j the
    slots at positions (2j, 2j+1) of the permutation, and puts the head on
    the earlier slot. Returns (pair_id, is_head) arrays in sentence order.
    Arcs may cross.
    """
    pairs = np.asarray(pairs)
    if pairs.size == 0:
        raise ConfigError("arrange_flat needs at least one pair")
    k = pairs.size
    slots = rng.permutation(2 * k)
    pair_at = np.empty(2 * k, dtype=np.int32)
    head_at = np.zeros(2 * k, dtype=bool)
    for j in range(k):
        a, b = slots[2 * j], slots[2 * j + 1]
        if a > b:
            a, b = b, a
        pair_at[a] = pairs[j]
        pair_at[b] = pairs[j]
        head_at[a] = True
    return pair_at, head_at


def arrange_nesting(pairs: Sequence[int], rng: np.random.Generator,
                    open_threshold: float = DEFAULT_OPEN_THRESHOLD
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Stack-based arrangement that never crosses arcs.

    While unopened pairs remain: draw p ~ U[0,1); open the next pair (emit
    head, push tail) when the closing stack is empty or p < open_threshold,
    otherwise pop the stack and emit that tail. Finally flush the stack.
    Pairs open in the order given.
    """
    remaining = list(np.asarray(pairs))
    if not remaining:
        raise ConfigError("arrange_nesting needs at least one pair")
    next_pair = 0
    closing: list[int] = []
    out_pair: list[int] = []
    out_head: list[bool] = []
    while next_pair < len(remaining):
        p = rng.random()
        if not closing or p < open_threshold:
            pair = remaining[next_pair]
            next_pair += 1
            out_pair.append(pair)
            out_head.append(True)
            closing.append(pair)
        else:
            out_pair.append(closing.pop())
            out_head.append(False)
    while closing:
        out_pair.append(closing.pop())
        out_head.append(False)
    return np.array(out_pair, dtype=np.int32), np.array(out_head, dtype=bool)


def render_pairs(pair_ids: np.ndarray, is_head: np.ndarray, rendering: str,
                 pair_count: int | None = None) -> Sentence:
    """Map a role-annotated arrangement to surface token ids.

    Dependency rendering gives pair i two distinct tokens: head id ``i``
    and tail id ``pair_count + i`` (the vocabulary writes them ``<i`` and
    ``i>``). Parenthesis rendering writes pair i as the single token id
    ``i`` in both roles.
    """
    pair_ids = np.asarray(pair_ids, dtype=np.int32)
    is_head = np.asarray(is_head, dtype=bool)
    if rendering == "parenthesis":
        return pair_ids.copy()
    if rendering == "dependency":
        if pair_count is None:
            raise ConfigError("dependency rendering needs the pair count")
        out = pair_ids.copy()
        out[~is_head] += pair_count
        return out
    raise ConfigError(f"unknown structure rendering: {rendering!r}")


# ---------------------------------------------------------------------------
# Whole-corpus generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GenConfig:
    """Complete recipe for one artificial corpus.

    Identical configs produce byte-identical corpora regardless of worker
    count or generation order.
    """

    vocabulary: Vocabulary
    length_dist: LengthDistribution
    sampler: TokenSampler
    structure: StructureSpec
    seed: int
    sentence_count: int

    def validate(self) -> None:
        if self.sentence_count < 0:
            raise ConfigError("sentence_count must be >= 0")
        if self.structure.structure != "none" and not self.vocabulary.pair_capable:
            raise ConfigError(
                "structured language requires a pair-capable (even) vocabulary"
            )
        if (self.structure.structure != "none"
                and self.structure.rendering == "dependency"
                and self.vocabulary.rendering != "pair-bracketed"):
            raise ConfigError(
                "dependency rendering requires a pair-bracketed vocabulary"
            )

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["vocabulary"] = {
            "size": str(self.vocabulary.size),
            "rendering": self.vocabulary.rendering,
        }
        cp["length"] = {
            "min": str(self.length_dist.min_length),
            "max": str(self.length_dist.max_length),
            "histogram": ",".join(
                f"{int(l)}:{float(p):.17g}"
                for l, p in zip(self.length_dist.lengths, self.length_dist.probs)
            ),
        }
        cp["sampler"] = {
            "kind": self.sampler.kind,
            "alpha": f"{self.sampler.alpha:.17g}",
            "dim": str(self.sampler.dim),
            "vector_scale": f"{self.sampler.vector_scale:.17g}",
            "vector_seed": str(self.sampler.vector_seed),
        }
        cp["structure"] = {
            "structure": self.structure.structure,
            "rendering": self.structure.rendering,
            "open_threshold": f"{self.structure.open_threshold:.17g}",
        }
        cp["corpus"] = {
            "seed": str(self.seed),
            "sentence_count": str(self.sentence_count),
        }
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "GenConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        try:
            vocab = Vocabulary(
                size=cp.getint("vocabulary", "size"),
                rendering=cp.get("vocabulary", "rendering", fallback="plain-integer"),
            )
            histogram = {}
            for item in cp.get("length", "histogram").split(","):
                l, p = item.split(":")
                histogram[int(l)] = float(p)
            length_dist = LengthDistribution.from_histogram(
                histogram,
                min_length=cp.getint("length", "min"),
                max_length=cp.getint("length", "max"),
            )
            sampler = TokenSampler(
                kind=cp.get("sampler", "kind"),
                alpha=cp.getfloat("sampler", "alpha", fallback=1.0),
                dim=cp.getint("sampler", "dim", fallback=10),
                vector_scale=cp.getfloat("sampler", "vector_scale", fallback=1.0),
                vector_seed=cp.getint("sampler", "vector_seed", fallback=0),
            )
            structure = StructureSpec(
                structure=cp.get("structure", "structure", fallback="none"),
                rendering=cp.get("structure", "rendering", fallback="dependency"),
                open_threshold=cp.getfloat(
                    "structure", "open_threshold", fallback=DEFAULT_OPEN_THRESHOLD
                ),
            )
            config = cls(
                vocabulary=vocab,
                length_dist=length_dist,
                sampler=sampler,
                structure=structure,
                seed=cp.getint("corpus", "seed"),
                sentence_count=cp.getint("corpus", "sentence_count"),
            )
        except (configparser.Error, ValueError) as exc:
            raise ConfigError(f"bad generation config: {exc}") from exc
        config.validate()
        return config

    def sha256(self) -> str:
        return hashlib.sha256(self.to_ini().encode("utf-8")).hexdigest()


def generate_sentence(config: GenConfig, index: int) -> Sentence:
    """Sentence ``index`` of the corpus; pure function of (seed, index)."""
    rng = indexed_stream(config.seed, "sentence", index)
    length = sample_length(config.length_dist, rng)
    if config.structure.structure == "none":
        return sample_unstructured_tokens(
            config.sampler, config.vocabulary, length, rng
        )
    pairs = sample_pairs(
        config.vocabulary, pair_count_for_length(length), config.sampler, rng
    )
    if config.structure.structure == "flat":
        pair_ids, is_head = arrange_flat(pairs, rng)
    else:
        pair_ids, is_head = arrange_nesting(
            pairs, rng, config.structure.open_threshold
        )
    return render_pairs(pair_ids, is_head, config.structure.rendering,
                        pair_count=config.vocabulary.pair_count)


def _generate_chunk(config: GenConfig, start: int, stop: int) -> list[Sentence]:
    return [generate_sentence(config, i) for i in range(start, stop)]


def generate_corpus(config: GenConfig, jobs: int = 1,
                    chunk_size: int = 2000) -> Iterator[Sentence]:
    """Yield the corpus in index order, optionally using worker processes."""
    config.validate()
    n = config.sentence_count
    if jobs <= 1 or n < 2 * chunk_size:
        for i in range(n):
            yield generate_sentence(config, i)
        return
    bounds = [(s, min(s + chunk_size, n)) for s in range(0, n, chunk_size)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for chunk in pool.map(
            _generate_chunk, [config] * len(bounds),
            [b[0] for b in bounds], [b[1] for b in bounds],
        ):
            yield from chunk


# ---------------------------------------------------------------------------
# Corpus files
# ---------------------------------------------------------------------------

def write_corpus(path, sentences: Iterator[Sentence], vocab: Vocabulary,
                 header_sha: str | None = None) -> int:
    """One sentence per line, tokens space-separated. Returns sentence count."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        if header_sha is not None:
            fh.write(f"# genconfig-sha256={header_sha}\n")
        for sent in sentences:
            fh.write(" ".join(vocab.token_to_str(int(t)) for t in sent))
            fh.write("\n")
            count += 1
    return count


def read_corpus(path, vocab: Vocabulary) -> list[Sentence]:
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                continue
            if not line:
                sentences.append(np.array([], dtype=np.int32))
                continue
            sentences.append(np.array(
                [vocab.token_from_str(tok) for tok in line.split(" ")],
                dtype=np.int32,
            ))
    return sentences


# ---------------------------------------------------------------------------
# Stock languages
# ---------------------------------------------------------------------------

def language_preset(name: str, vocab_size: int, length_dist: LengthDistribution,
                    seed: int, sentence_count: int,
                    open_threshold: float = DEFAULT_OPEN_THRESHOLD) -> GenConfig:
    """Config for one of the seven stock languages.

    The three unstructured recipes (uniform, zipf, log_linear) draw token
    ids directly; the four structured ones combine zipf pair sampling with
    flat/nesting arrangement and parenthesis/dependency rendering.
    """
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown language preset: {name!r}")
    structured = name not in ("uniform", "zipf", "log_linear")
    if structured:
        kind = "zipf"
        structure, rendering = name.rsplit("_", 1)
        vocab = Vocabulary(
            vocab_size,
            rendering="pair-bracketed" if rendering == "dependency"
            else "plain-integer",
        )
        spec = StructureSpec(structure=structure, rendering=rendering,
                             open_threshold=open_threshold)
    else:
        kind = name
        vocab = Vocabulary(vocab_size, rendering="plain-integer")
        spec = StructureSpec(structure="none")
    sampler = TokenSampler(kind="log_linear" if kind == "log_linear" else kind,
                           vector_seed=seed)
    config = GenConfig(
        vocabulary=vocab,
        length_dist=length_dist,
        sampler=sampler,
        structure=spec,
        seed=seed,
        sentence_count=sentence_count,
    )
    config.validate()
    return config


def with_seed(config: GenConfig, seed: int) -> GenConfig:
    """Same language, different corpus seed (log-linear vectors follow)."""
    sampler = config.sampler
    if sampler.kind == "log_linear":
        sampler = replace(sampler, vector_seed=seed)
    return replace(config, seed=seed, sampler=sampler)
