"""Corpus validation and characterization.

Pure functions over immutable inputs: rank-frequency tables and power-law
exponent fits, bracket-matching arc extraction with crossing counts, total
variation distance between length histograms, and run-level aggregates with
Welch's t-test.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import stdtr

from .errors import DataError, UnmatchedTokenError
from .langgen import Vocabulary


# ---------------------------------------------------------------------------
# Token frequencies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RankFrequencyTable:
    """(token id, frequency) rows sorted by descending frequency.

    Frequencies are stored as floats so exact analytic tables (for
    power-law fitting checks) are representable; corpus counts are
    integer-valued.
    """

    token_ids: np.ndarray
    frequencies: np.ndarray
    total: float

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=np.float64)
        object.__setattr__(self, "frequencies", freqs)
        if np.any(np.diff(freqs) > 0):
            raise DataError("frequencies must be non-increasing")
        if not np.isclose(freqs.sum(), self.total, rtol=1e-9, atol=0):
            raise DataError("frequencies must sum to the total token count")


def rank_frequency(corpus: Iterable[np.ndarray]) -> RankFrequencyTable:
    """Exact token counts over a corpus, frequency-sorted (ties by id)."""
    counts: dict[int, int] = {}
    total = 0
    for sent in corpus:
        ids, c = np.unique(np.asarray(sent), return_counts=True)
        total += int(c.sum())
        for i, n in zip(ids, c):
            counts[int(i)] = counts.get(int(i), 0) + int(n)
    if total == 0:
        raise DataError("cannot build a rank-frequency table from an empty corpus")
    rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return RankFrequencyTable(
        token_ids=np.array([r[0] for r in rows], dtype=np.int64),
        frequencies=np.array([r[1] for r in rows], dtype=np.float64),
        total=float(total),
    )


def fit_zipf_exponent(table: RankFrequencyTable, min_freq: int = 5) -> float:
    """Negated OLS slope of log frequency on log rank.

    Rows with frequency below ``min_freq`` are dropped to suppress tail
    noise. Invariant under uniform scaling of the frequencies.
    """
    keep = table.frequencies >= min_freq
    freqs = table.frequencies[keep].astype(np.float64)
    if freqs.size < 2:
        raise DataError(
            f"need at least 2 ranks with frequency >= {min_freq} to fit an exponent"
        )
    ranks = np.arange(1, freqs.size + 1, dtype=np.float64)
    slope, _ = np.polyfit(np.log(ranks), np.log(freqs), 1)
    return float(-slope)


def total_variation(p: dict[int, float], q: dict[int, float]) -> float:
    """TV distance between two discrete distributions over integers."""
    support = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in support)


# ---------------------------------------------------------------------------
# Arcs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArcSet:
    """Head/tail position pairs, 1-based, head strictly before tail."""

    arcs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        for h, t in self.arcs:
            if not h < t:
                raise DataError(f"arc ({h}, {t}) must run left to right")
            for pos in (h, t):
                if pos in seen:
                    raise DataError(f"position {pos} appears in two arcs")
                seen.add(pos)

    def __len__(self):
        return len(self.arcs)


def extract_arcs(sentence: Sequence[int], vocab: Vocabulary) -> ArcSet:
    """Match heads to tails and return all arcs.

    Dependency (pair-bracketed) sentences match a tail token to the most
    recent unmatched head of the same pair id. Parenthesis sentences use
    the same discipline on raw token identity: the first unmatched
    occurrence acts as head, the next one closes it. Raises
    UnmatchedTokenError listing leftover positions.
    """
    pair_bracketed = vocab.rendering == "pair-bracketed"
    half = vocab.pair_count if vocab.pair_capable else 0
    open_stacks: dict[int, list[int]] = {}
    arcs: list[tuple[int, int]] = []
    bad: list[int] = []
    for pos, token in enumerate(np.asarray(sentence), start=1):
        token = int(token)
        if pair_bracketed:
            if token < half:
                open_stacks.setdefault(token, []).append(pos)
            else:
                stack = open_stacks.get(token - half)
                if stack:
                    arcs.append((stack.pop(), pos))
                else:
                    bad.append(pos)
        else:
            stack = open_stacks.setdefault(token, [])
            if stack:
                arcs.append((stack.pop(), pos))
            else:
                stack.append(pos)
    leftover = [pos for stack in open_stacks.values() for pos in stack]
    if bad or leftover:
        positions = sorted(bad + leftover)
        raise UnmatchedTokenError(
            f"unmatched tokens at positions {positions}", positions
        )
    arcs.sort()
    return ArcSet(tuple(arcs))


def count_crossings(arcs: ArcSet) -> int:
    """Number of unordered arc pairs (i,j),(k,l) with i < k < j < l."""
    pairs = arcs.arcs
    count = 0
    for a in range(len(pairs)):
        i, j = pairs[a]
        for b in range(a + 1, len(pairs)):
            k, l = pairs[b]
            if i < k < j < l or k < i < l < j:
                count += 1
    return count


def is_nested(sentence: Sequence[int], vocab: Vocabulary) -> bool:
    """True iff all brackets match and no two arcs cross."""
    if len(sentence) == 0:
        return True
    try:
        arcs = extract_arcs(sentence, vocab)
    except UnmatchedTokenError:
        return False
    return count_crossings(arcs) == 0


# ---------------------------------------------------------------------------
# Run-level statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p_value: float


def welch_t_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> WelchResult:
    """Welch's unequal-variance t-test, two-sided.

    t = (mean_a - mean_b) / sqrt(va/na + vb/nb) with sample variances
    (n-1 denominator); degrees of freedom by Welch-Satterthwaite; p from
    the Student-t survival function. Each sample needs n >= 2 and nonzero
    variance.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise DataError("welch_t_test needs at least 2 observations per sample")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0.0 or vb == 0.0:
        raise DataError("welch_t_test is undefined for zero-variance samples")
    sa, sb = va / a.size, vb / b.size
    t = (a.mean() - b.mean()) / np.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa**2 / (a.size - 1) + sb**2 / (b.size - 1))
    p = 2.0 * float(stdtr(df, -abs(t)))
    return WelchResult(t=float(t), df=float(df), p_value=p)


@dataclass(frozen=True)
class RunAggregate:
    """Per-seed metric values with mean and sample standard deviation."""

    values: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        if self.n < 2:
            raise DataError("sample standard deviation needs n >= 2")
        return float(np.std(self.values, ddof=1))

    def welch_against(self, other: "RunAggregate") -> WelchResult:
        return welch_t_test(self.values, other.values)


# ---------------------------------------------------------------------------
# Whole-corpus report
# ---------------------------------------------------------------------------

def corpus_report(corpus: Sequence[np.ndarray], vocab: Vocabulary,
                  target_lengths: dict[int, float] | None = None,
                  min_freq: int = 5) -> dict:
    """JSON-ready summary: exponent fit, structure rates, length TV distance.

    ``crossing_rate`` is the fraction of sentences containing at least one
    crossing arc pair; ``nested_rate`` the fraction passing is_nested.
    Structure rates are null for corpora that do not bracket-match.
    """
    report: dict = {"sentences": len(corpus)}
    table = rank_frequency(corpus)
    report["tokens"] = int(table.total)
    report["distinct_tokens"] = int(table.token_ids.size)
    try:
        report["alpha_hat"] = fit_zipf_exponent(table, min_freq=min_freq)
    except DataError:
        report["alpha_hat"] = None
    nested = crossing = parseable = 0
    for sent in corpus:
        try:
            arcs = extract_arcs(sent, vocab)
        except UnmatchedTokenError:
            continue
        parseable += 1
        if count_crossings(arcs) > 0:
            crossing += 1
        else:
            nested += 1
    if parseable == len(corpus) and parseable > 0:
        report["nested_rate"] = nested / parseable
        report["crossing_rate"] = crossing / parseable
    else:
        report["nested_rate"] = None
        report["crossing_rate"] = None
    if target_lengths is not None:
        observed: dict[int, float] = {}
        for sent in corpus:
            observed[len(sent)] = observed.get(len(sent), 0.0) + 1.0
        total = sum(observed.values())
        observed = {k: v / total for k, v in observed.items()}
        report["tv_distance"] = total_variation(observed, target_lengths)
    return report
