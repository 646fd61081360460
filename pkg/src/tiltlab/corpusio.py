"""Natural-language resource ingestion.

Inputs are pre-tokenized text (one sentence per line, whitespace-separated)
and CoNLL-U treebanks. Provides capped vocabularies with OOV replacement,
empirical sentence-length histograms, id encoding/decoding, and a minimal
treebank reader.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DataError
from .langgen import LengthDistribution

OOV_MARKER = "<unk>"


# ---------------------------------------------------------------------------
# Vocabulary over surface forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VocabMap:
    """Bijection between the top-K surface forms and ids dense in [0, K).

    Unknown forms encode to ``oov_id`` (= K, directly above the content
    range, matching the reserved-id layout of langgen.Vocabulary) and
    decode to the ``<unk>`` marker.
    """

    forms: tuple[str, ...]
    cap: int

    def __post_init__(self):
        if len(self.forms) == 0:
            raise DataError("empty vocabulary")
        if len(self.forms) > self.cap:
            raise DataError("vocabulary exceeds its cap")
        object.__setattr__(self, "_ids", {f: i for i, f in enumerate(self.forms)})

    @property
    def size(self) -> int:
        return len(self.forms)

    @property
    def oov_id(self) -> int:
        return len(self.forms)

    def id_of(self, form: str) -> int:
        return self._ids.get(form, self.oov_id)

    def form_of(self, token_id: int) -> str:
        if token_id == self.oov_id:
            return OOV_MARKER
        if not 0 <= token_id < len(self.forms):
            raise DataError(f"token id {token_id} out of range")
        return self.forms[token_id]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i, form in enumerate(self.forms):
                fh.write(f"{form}\t{i}\n")

    @classmethod
    def load(cls, path) -> "VocabMap":
        forms = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                try:
                    form, idx = line.split("\t")
                except ValueError as exc:
                    raise DataError(f"bad vocab line {lineno}: {line!r}") from exc
                if int(idx) != len(forms):
                    raise DataError(f"non-dense vocab id at line {lineno}")
                forms.append(form)
        return cls(forms=tuple(forms), cap=len(forms))


def build_vocab(lines: Iterable[str], cap: int) -> VocabMap:
    """Top-``cap`` forms by frequency; ties at the boundary break
    lexicographically (earlier form wins)."""
    counts: dict[str, int] = {}
    for line in lines:
        for form in line.split():
            counts[form] = counts.get(form, 0) + 1
    if not counts:
        raise DataError("cannot build a vocabulary from empty input")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return VocabMap(forms=tuple(f for f, _ in ranked[:cap]), cap=cap)


def fit_length_distribution(lines: Iterable[str], min_length: int,
                            max_length: int) -> LengthDistribution:
    """Normalized histogram of sentence lengths within [min, max].

    Sentences outside the bounds are dropped, not clamped.
    """
    histogram: dict[int, int] = {}
    for line in lines:
        n = len(line.split())
        if min_length <= n <= max_length:
            histogram[n] = histogram.get(n, 0) + 1
    total = sum(histogram.values())
    if total == 0:
        raise DataError("no sentences within the length bounds")
    return LengthDistribution.from_histogram(
        {k: v / total for k, v in histogram.items()},
        min_length=min_length, max_length=max_length,
    )


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def encode(lines: Iterable[str], vocab: VocabMap) -> list[np.ndarray]:
    """Token ids per sentence; unknown forms map to the OOV id."""
    return [
        np.array([vocab.id_of(f) for f in line.split()], dtype=np.int32)
        for line in lines
    ]


def decode(sentences: Iterable[np.ndarray], vocab: VocabMap) -> list[str]:
    """Inverse of encode, with OOV ids rendered as the <unk> marker."""
    return [
        " ".join(vocab.form_of(int(t)) for t in sent)
        for sent in sentences
    ]


def read_text(path) -> list[str]:
    """Corpus file as a list of lines, comments ('#'-prefixed) skipped."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                continue
            out.append(line)
    return out


# ---------------------------------------------------------------------------
# Treebanks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TreebankSentence:
    tokens: tuple[str, ...]
    upos: tuple[str, ...]
    heads: tuple[int, ...]   # 0 = root
    deprels: tuple[str, ...]

    def __post_init__(self):
        n = len(self.tokens)
        if not (len(self.upos) == len(self.heads) == len(self.deprels) == n):
            raise DataError("treebank sentence fields must align with tokens")
        for i, h in enumerate(self.heads, start=1):
            if not 0 <= h <= n:
                raise DataError(f"head index {h} out of range for {n} tokens")
            if h == i:
                raise DataError(f"token {i} is its own head")

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class Treebank:
    sentences: tuple[TreebankSentence, ...]

    def __len__(self):
        return len(self.sentences)

    def __iter__(self) -> Iterator[TreebankSentence]:
        return iter(self.sentences)

    def label_set(self) -> tuple[str, ...]:
        labels = {d for s in self.sentences for d in s.deprels}
        return tuple(sorted(labels))

    def upos_set(self) -> tuple[str, ...]:
        tags = {t for s in self.sentences for t in s.upos}
        return tuple(sorted(tags))

    def subset(self, count: int) -> "Treebank":
        return Treebank(self.sentences[:count])


def read_conllu(path) -> Treebank:
    """Parse ID/FORM/UPOS/HEAD/DEPREL from a CoNLL-U file.

    Comment lines, multiword-token ranges (ID containing '-') and empty
    nodes (ID containing '.') are skipped; blank lines end sentences.
    """
    sentences: list[TreebankSentence] = []
    tokens: list[str] = []
    upos: list[str] = []
    heads: list[int] = []
    deprels: list[str] = []

    def flush():
        if tokens:
            sentences.append(TreebankSentence(
                tokens=tuple(tokens), upos=tuple(upos),
                heads=tuple(heads), deprels=tuple(deprels),
            ))
            tokens.clear(); upos.clear(); heads.clear(); deprels.clear()

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                flush()
                continue
            if line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise DataError(
                    f"{path}:{lineno}: expected 10 tab-separated columns, "
                    f"got {len(cols)}"
                )
            token_id = cols[0]
            if "-" in token_id or "." in token_id:
                continue
            try:
                head = int(cols[6])
            except ValueError as exc:
                raise DataError(
                    f"{path}:{lineno}: non-integer HEAD field {cols[6]!r}"
                ) from exc
            tokens.append(cols[1])
            upos.append(cols[3])
            heads.append(head)
            deprels.append(cols[7])
    flush()
    return Treebank(tuple(sentences))


def write_conllu(path, treebank: Treebank) -> None:
    """Emit the five populated columns; the rest are underscores."""
    with open(path, "w", encoding="utf-8") as fh:
        for sent in treebank:
            for i, (tok, tag, head, rel) in enumerate(
                zip(sent.tokens, sent.upos, sent.heads, sent.deprels), start=1
            ):
                fh.write(f"{i}\t{tok}\t_\t{tag}\t_\t_\t{head}\t{rel}\t_\t_\n")
            fh.write("\n")
