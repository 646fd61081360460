import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiltlab import corpstats, langgen
from tiltlab.corpstats import (
    ArcSet,
    RankFrequencyTable,
    RunAggregate,
    count_crossings,
    extract_arcs,
    fit_zipf_exponent,
    is_nested,
    rank_frequency,
    total_variation,
    welch_t_test,
)
from tiltlab.errors import DataError, UnmatchedTokenError
from tiltlab.langgen import LengthDistribution, TokenSampler, Vocabulary, language_preset
from tiltlab.rngstream import stream

PAIR_VOCAB = Vocabulary(2000, rendering="pair-bracketed")
HALF = PAIR_VOCAB.pair_count


# ---------------------------------------------------------------------------
# rank_frequency / fit_zipf_exponent
# ---------------------------------------------------------------------------

def test_rank_frequency_counts_exactly():
    table = rank_frequency([np.array([0, 0, 1])])
    assert table.token_ids.tolist() == [0, 1]
    assert table.frequencies.tolist() == [2.0, 1.0]
    assert table.total == 3


def test_rank_frequency_rejects_empty_corpus():
    with pytest.raises(DataError):
        rank_frequency([])


def test_uniform_corpus_counts_within_binomial_bound():
    # |V|=100, n=1e6, Bonferroni z at overall 0.99 ~= 3.891
    draws = langgen._SamplerState(TokenSampler(kind="uniform"), 100).draw(
        stream(1, "t"), 1_000_000)
    table = rank_frequency([draws])
    bound = 3.891 * np.sqrt(1_000_000 * 0.01 * 0.99)
    assert np.abs(table.frequencies - 10_000).max() < bound


def test_zipf_corpus_frequency_decreases_along_separated_ranks():
    # Monte-Carlo oracle: adjacent ranks are noisy, geometrically separated
    # ranks are not (3 seeds)
    for seed in (1, 2, 3):
        draws = langgen._SamplerState(TokenSampler(kind="zipf"), 2000).draw(
            stream(seed, "z"), 1_000_000)
        counts = np.bincount(draws, minlength=2000)
        ladder = counts[[0, 1, 3, 7, 15, 31, 63, 127, 255, 511]]
        assert np.all(np.diff(ladder) < 0)


def test_exact_power_law_fit_recovers_alpha_to_1e9():
    ranks = np.arange(1, 101, dtype=np.float64)
    freqs = 1000.0 / ranks
    table = RankFrequencyTable(token_ids=np.arange(100),
                               frequencies=freqs, total=float(freqs.sum()))
    assert abs(fit_zipf_exponent(table, min_freq=5) - 1.0) < 1e-9


def test_generated_zipf_corpus_fits_near_one_uniform_near_zero():
    dist = LengthDistribution.uniform(20, 20)
    for seed in (1, 2, 3):
        zipf = language_preset("zipf", 2000, dist, seed=seed,
                               sentence_count=50_000)
        table = rank_frequency(list(langgen.generate_corpus(zipf)))
        assert 0.9 <= fit_zipf_exponent(table) <= 1.1
    uniform = language_preset("uniform", 2000, dist, seed=1,
                              sentence_count=50_000)
    table = rank_frequency(list(langgen.generate_corpus(uniform)))
    assert -0.05 <= fit_zipf_exponent(table) <= 0.05


def test_fit_zipf_insufficient_data_error():
    table = RankFrequencyTable(token_ids=np.array([0, 1]),
                               frequencies=np.array([3.0, 1.0]), total=4.0)
    with pytest.raises(DataError):
        fit_zipf_exponent(table, min_freq=5)


@given(st.floats(0.1, 100.0))
def test_fit_invariant_under_uniform_frequency_scaling(scale):
    ranks = np.arange(1, 40, dtype=np.float64)
    freqs = 5000.0 / ranks**1.3
    t1 = RankFrequencyTable(np.arange(39), freqs, float(freqs.sum()))
    t2 = RankFrequencyTable(np.arange(39), freqs * scale,
                            float((freqs * scale).sum()))
    a1 = fit_zipf_exponent(t1, min_freq=0)
    a2 = fit_zipf_exponent(t2, min_freq=0)
    assert abs(a1 - a2) < 1e-9


# ---------------------------------------------------------------------------
# Arcs
# ---------------------------------------------------------------------------

def test_extract_arcs_minimal_pair():
    arcs = extract_arcs(np.array([5, HALF + 5]), PAIR_VOCAB)
    assert arcs.arcs == ((1, 2),)


def test_extract_arcs_paper_flat_example():
    tokens = np.array([5, 84, HALF + 5, 123, HALF + 123, HALF + 84])
    arcs = extract_arcs(tokens, PAIR_VOCAB)
    assert set(arcs.arcs) == {(1, 3), (2, 6), (4, 5)}


def test_extract_arcs_unmatched_reports_positions():
    with pytest.raises(UnmatchedTokenError) as err:
        extract_arcs(np.array([5, HALF + 84]), PAIR_VOCAB)
    assert err.value.positions == [1, 2]


def test_parenthesis_matching_uses_most_recent_unmatched():
    vocab = Vocabulary(40)
    arcs = extract_arcs(np.array([5, 5, 5, 5]), vocab)
    assert arcs.arcs == ((1, 2), (3, 4))


def test_count_crossings_examples():
    assert count_crossings(ArcSet(((1, 3), (2, 6), (4, 5)))) == 1
    assert count_crossings(ArcSet(((1, 4), (2, 3)))) == 0
    assert count_crossings(ArcSet(())) == 0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 9), min_size=1, max_size=10),
       st.integers(0, 500), st.permutations(list(range(10))))
def test_crossings_invariant_under_pair_relabeling(pairs, seed, relabel):
    rng = stream(seed, "relabel")
    pair_ids, is_head = langgen.arrange_flat(pairs, rng)
    vocab = Vocabulary(20, rendering="pair-bracketed")
    tokens = langgen.render_pairs(pair_ids, is_head, "dependency", pair_count=10)
    relabeled = langgen.render_pairs(
        np.array([relabel[p] for p in pair_ids]), is_head, "dependency",
        pair_count=10)
    c1 = count_crossings(extract_arcs(tokens, vocab))
    c2 = count_crossings(extract_arcs(relabeled, vocab))
    assert c1 == c2


def test_is_nested_examples():
    nested = np.array([5, 84, HALF + 84, HALF + 5, 123, HALF + 123])
    flat = np.array([5, 84, HALF + 5, 123, HALF + 123, HALF + 84])
    assert is_nested(nested, PAIR_VOCAB)
    assert not is_nested(flat, PAIR_VOCAB)
    assert is_nested(np.array([], dtype=np.int32), PAIR_VOCAB)
    # malformed input is reported as not nested, not an exception
    assert not is_nested(np.array([5]), PAIR_VOCAB)


# ---------------------------------------------------------------------------
# Welch's t-test
# ---------------------------------------------------------------------------

def test_welch_identical_samples():
    res = welch_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert res.t == 0.0
    assert res.p_value == pytest.approx(1.0)


def test_welch_matches_hand_computation():
    # hand-derived from the Welch formulas: ma=2, mb=3, va=1, vb=2.5,
    # t = -1/sqrt(1/3 + 1/2), df via Welch-Satterthwaite
    res = welch_t_test([1, 2, 3], [1, 2, 3, 4, 5])
    assert res.t == pytest.approx(-1.0954451150103321, rel=1e-12)
    assert res.df == pytest.approx(5.882352941176471, rel=1e-12)
    assert res.p_value == pytest.approx(0.3161334219263935, rel=1e-9)


def test_welch_ten_sigma_separation_is_significant():
    rng = stream(0, "w")
    a = rng.normal(0.0, 1.0, size=9)
    b = rng.normal(10.0, 1.0, size=9)
    assert welch_t_test(a, b).p_value < 1e-6


def test_welch_degenerate_samples_rejected():
    with pytest.raises(DataError):
        welch_t_test([1.0], [1.0, 2.0])
    with pytest.raises(DataError):
        welch_t_test([2.0, 2.0], [1.0, 3.0])


@settings(max_examples=40)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=8),
       st.lists(st.floats(-100, 100), min_size=3, max_size=8))
def test_welch_antisymmetric_under_swap(a, b):
    if np.var(a, ddof=1) == 0 or np.var(b, ddof=1) == 0:
        return
    r1, r2 = welch_t_test(a, b), welch_t_test(b, a)
    assert r1.t == pytest.approx(-r2.t, rel=1e-9, abs=1e-12)
    assert r1.p_value == pytest.approx(r2.p_value, rel=1e-9, abs=1e-12)


def test_run_aggregate_std_uses_sample_denominator():
    agg = RunAggregate((1.0, 2.0, 3.0))
    assert agg.mean == 2.0
    assert agg.std == pytest.approx(1.0)
    with pytest.raises(DataError):
        RunAggregate((1.0,)).std


def test_total_variation_basics():
    assert total_variation({1: 1.0}, {1: 1.0}) == 0.0
    assert total_variation({1: 1.0}, {2: 1.0}) == 1.0


def test_corpus_report_on_nesting_corpus():
    # even-length support: pair rounding then preserves lengths exactly
    lengths = LengthDistribution.from_histogram({4: 0.25, 6: 0.25,
                                                 8: 0.25, 10: 0.25})
    config = language_preset("nesting_dependency", 40, lengths, seed=3,
                             sentence_count=200)
    corpus = list(langgen.generate_corpus(config))
    report = corpstats.corpus_report(corpus, config.vocabulary,
                                     target_lengths=config.length_dist.as_histogram())
    assert report["nested_rate"] == 1.0
    assert report["crossing_rate"] == 0.0
    assert report["tv_distance"] < 0.15
    assert report["alpha_hat"] is not None
