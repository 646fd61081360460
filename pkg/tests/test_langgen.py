import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiltlab import corpstats, langgen
from tiltlab.errors import ConfigError
from tiltlab.langgen import (
    GenConfig,
    LengthDistribution,
    StructureSpec,
    TokenSampler,
    Vocabulary,
    arrange_flat,
    arrange_nesting,
    generate_corpus,
    language_preset,
    pair_count_for_length,
    render_pairs,
    sample_length,
    sample_pairs,
    sample_unstructured_tokens,
)
from tiltlab.rngstream import stream


def rng(seed=0):
    return stream(seed, "test")


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------

def test_vocabulary_reserved_ids_sit_above_content():
    v = Vocabulary(100)
    assert (v.oov_id, v.mask_id, v.pad_id) == (100, 101, 102)
    assert v.total_size == 103
    assert len({v.oov_id, v.mask_id, v.pad_id}) == 3


def test_vocabulary_rejects_degenerate_sizes():
    with pytest.raises(ConfigError):
        Vocabulary(1)
    with pytest.raises(ConfigError):
        Vocabulary(7, rendering="pair-bracketed")


def test_pair_bracketed_serialization_round_trips():
    v = Vocabulary(400, rendering="pair-bracketed")
    assert v.token_to_str(123) == "<123"
    assert v.token_to_str(200 + 123) == "123>"
    assert v.token_from_str("<123") == 123
    assert v.token_from_str("123>") == 323


# ---------------------------------------------------------------------------
# sample_length
# ---------------------------------------------------------------------------

def test_point_mass_histogram_always_returns_its_length():
    dist = LengthDistribution.from_histogram({10: 1.0})
    assert all(sample_length(dist, rng()) == 10 for _ in range(50))


def test_two_point_histogram_frequencies_within_binomial_bound():
    # p=0.5, n=1e6: sigma = 5e-4, so 0.002 is a 4-sigma bound
    dist = LengthDistribution.from_histogram({6: 0.5, 60: 0.5})
    draws = dist.sample_many(rng(1), 1_000_000)
    freq6 = np.mean(draws == 6)
    assert abs(freq6 - 0.5) < 0.002
    assert set(np.unique(draws)) == {6, 60}


def test_fitted_histogram_draws_match_within_tv_distance():
    from tiltlab import corpusio, sampledata

    lines = sampledata.english_sentences(3, 5000)
    dist = corpusio.fit_length_distribution(lines, 6, 60)
    draws = dist.sample_many(rng(2), 1_000_000)
    observed = {int(l): c / draws.size
                for l, c in zip(*np.unique(draws, return_counts=True))}
    tv = corpstats.total_variation(observed, dist.as_histogram())
    assert tv < 0.01


def test_length_distribution_validation():
    with pytest.raises(ConfigError):
        LengthDistribution.from_histogram({5: 0.7, 6: 0.7})
    with pytest.raises(ConfigError):
        LengthDistribution.from_histogram({0: 1.0})
    with pytest.raises(ConfigError):
        LengthDistribution(np.array([7]), np.array([1.0]), 8, 10)


# ---------------------------------------------------------------------------
# Token samplers
# ---------------------------------------------------------------------------

def test_single_item_sampler_always_draws_zero():
    sampler = TokenSampler(kind="uniform")
    state = langgen._SamplerState(sampler, 1)
    assert list(state.draw(rng(), 5)) == [0, 0, 0, 0, 0]


def test_zipf_probabilities_match_analytic_normalization():
    probs = TokenSampler(kind="zipf", alpha=1.0).probabilities(3)
    np.testing.assert_allclose(probs, [6 / 11, 3 / 11, 2 / 11], rtol=1e-12)


@given(st.integers(2, 50), st.integers(2, 50))
def test_zipf_probability_ratio_is_exactly_rank_ratio(r1, r2):
    probs = TokenSampler(kind="zipf", alpha=1.0).probabilities(60)
    np.testing.assert_allclose(probs[r1 - 1] / probs[r2 - 1], r2 / r1,
                               rtol=1e-12)


def test_uniform_deviation_within_computed_binomial_bound():
    # Bonferroni over |V|=100 two-sided at overall p=0.99:
    # z = Phi^-1(1 - 0.01/200) ~= 3.891
    n, v = 1_000_000, 100
    sampler = TokenSampler(kind="uniform")
    draws = langgen._SamplerState(sampler, v).draw(rng(7), n)
    counts = np.bincount(draws, minlength=v)
    sigma = np.sqrt(n * (1 / v) * (1 - 1 / v))
    bound = 3.891 * sigma
    assert np.abs(counts - n / v).max() < bound


def test_log_linear_vectors_reproducible_and_shaped():
    s = TokenSampler(kind="log_linear", dim=10, vector_seed=42)
    v1, v2 = s.word_vectors(50), s.word_vectors(50)
    assert v1.shape == (50, 10)
    np.testing.assert_array_equal(v1, v2)


def test_log_linear_marginals_equal_across_positions():
    # tokens within a sentence are i.i.d. given the discourse vector, so
    # position marginals coincide
    vocab = Vocabulary(50)
    s = TokenSampler(kind="log_linear", dim=10, vector_seed=5)
    first, last = np.zeros(50), np.zeros(50)
    g = rng(11)
    n = 20000
    for _ in range(n):
        sent = sample_unstructured_tokens(s, vocab, 2, g)
        first[sent[0]] += 1
        last[sent[1]] += 1
    tv = 0.5 * np.abs(first / n - last / n).sum()
    assert tv < 0.03


def test_unstructured_sentence_has_requested_length_and_content_ids():
    vocab = Vocabulary(20)
    sent = sample_unstructured_tokens(TokenSampler(kind="zipf"), vocab, 9, rng())
    assert len(sent) == 9
    assert sent.min() >= 0 and sent.max() < 20


# ---------------------------------------------------------------------------
# Pairs and arrangements
# ---------------------------------------------------------------------------

def test_pair_count_rounds_to_nearest_with_ties_up():
    assert pair_count_for_length(7) == 4
    assert pair_count_for_length(8) == 4
    assert pair_count_for_length(1) == 1


def test_single_pair_lexicon_always_yields_pair_zero():
    vocab = Vocabulary(2, rendering="pair-bracketed")
    pairs = sample_pairs(vocab, 10, TokenSampler(kind="zipf"), rng())
    assert set(pairs) == {0}


def test_pair_rank_frequency_slope_is_minus_one():
    # 16,000 pairs, zipf alpha=1, 1e6 draws; OLS fit via corpstats
    vocab = Vocabulary(32_000, rendering="pair-bracketed")
    pairs = sample_pairs(vocab, 1_000_000, TokenSampler(kind="zipf"), rng(3))
    table = corpstats.rank_frequency([pairs])
    alpha = corpstats.fit_zipf_exponent(table)
    assert 0.9 <= alpha <= 1.1


def test_arrange_flat_single_pair_forced_order():
    for seed in range(5):
        pair_ids, is_head = arrange_flat([7], rng(seed))
        assert list(pair_ids) == [7, 7]
        assert list(is_head) == [True, False]


def test_flat_interleavings_match_uniform_slot_model():
    # k=2 distinct pairs: brute-force slot enumeration gives each of the
    # 3 interleavings probability 1/3
    counts = {"nested": 0, "disjoint": 0, "crossing": 0}
    g = rng(5)
    n = 100_000
    for _ in range(n):
        pair_ids, is_head = arrange_flat([0, 1], g)
        tokens = render_pairs(pair_ids, is_head, "dependency", pair_count=2)
        arcs = corpstats.extract_arcs(tokens, Vocabulary(4, rendering="pair-bracketed"))
        if corpstats.count_crossings(arcs) == 1:
            counts["crossing"] += 1
        elif arcs.arcs[0][1] < arcs.arcs[1][0] or arcs.arcs[1][1] < arcs.arcs[0][0]:
            counts["disjoint"] += 1
        else:
            counts["nested"] += 1
    for kind, c in counts.items():
        assert abs(c / n - 1 / 3) < 0.01, (kind, c / n)


def test_nesting_single_pair_and_forced_open_trace():
    pair_ids, is_head = arrange_nesting([4], rng())
    assert list(pair_ids) == [4, 4] and list(is_head) == [True, False]
    # open_threshold=1.0 forces open-open, then the closing stack flushes:
    # [A, B, B', A']
    pair_ids, is_head = arrange_nesting([1, 2], rng(), open_threshold=1.0)
    assert list(pair_ids) == [1, 2, 2, 1]
    assert list(is_head) == [True, True, False, False]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 9), min_size=1, max_size=12), st.integers(0, 999))
def test_nesting_output_never_crosses(pairs, seed):
    vocab = Vocabulary(20, rendering="pair-bracketed")
    pair_ids, is_head = arrange_nesting(pairs, rng(seed))
    tokens = render_pairs(pair_ids, is_head, "dependency", pair_count=10)
    assert corpstats.is_nested(tokens, vocab)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 9), min_size=1, max_size=12), st.integers(0, 999))
def test_flat_output_is_balanced_with_heads_first(pairs, seed):
    vocab = Vocabulary(20, rendering="pair-bracketed")
    pair_ids, is_head = arrange_flat(pairs, rng(seed))
    tokens = render_pairs(pair_ids, is_head, "dependency", pair_count=10)
    arcs = corpstats.extract_arcs(tokens, vocab)   # raises if unbalanced
    assert len(arcs) == len(pairs)
    # token multiset preserved
    heads = sorted(t for t in tokens if t < 10)
    assert heads == sorted(pairs)


def test_paper_flat_example_is_legal_with_one_crossing():
    # [<5, <84, 5>, <123, 123>, 84>]
    vocab = Vocabulary(2000, rendering="pair-bracketed")
    half = vocab.pair_count
    tokens = np.array([5, 84, half + 5, 123, half + 123, half + 84])
    arcs = corpstats.extract_arcs(tokens, vocab)
    assert set(arcs.arcs) == {(1, 3), (2, 6), (4, 5)}
    assert corpstats.count_crossings(arcs) == 1


def test_paper_nesting_example_has_zero_crossings():
    # [<5, <84, 84>, 5>, <123, 123>]
    vocab = Vocabulary(2000, rendering="pair-bracketed")
    half = vocab.pair_count
    tokens = np.array([5, 84, half + 84, half + 5, 123, half + 123])
    assert corpstats.is_nested(tokens, vocab)


def test_dependency_rendering_uses_distinct_tokens_parenthesis_same():
    vocab = Vocabulary(400, rendering="pair-bracketed")
    dep = render_pairs([123, 123], [True, False], "dependency",
                       pair_count=vocab.pair_count)
    assert vocab.token_to_str(dep[0]) == "<123"
    assert vocab.token_to_str(dep[1]) == "123>"
    par = render_pairs([5, 84, 84, 5, 123, 123],
                       [True, True, False, False, True, False], "parenthesis")
    assert list(par) == [5, 84, 84, 5, 123, 123]


def test_dependency_round_trip_recovers_roles():
    g = rng(9)
    pairs = list(g.integers(0, 10, size=8))
    pair_ids, is_head = arrange_flat(pairs, g)
    tokens = render_pairs(pair_ids, is_head, "dependency", pair_count=10)
    recovered_heads = tokens < 10
    np.testing.assert_array_equal(recovered_heads, is_head)
    recovered_ids = np.where(is_head, tokens, tokens - 10)
    np.testing.assert_array_equal(recovered_ids, pair_ids)


# ---------------------------------------------------------------------------
# Corpus generation
# ---------------------------------------------------------------------------

def _tiny_config(name="nesting_dependency", count=200, seed=13):
    return language_preset(name, 40, LengthDistribution.uniform(4, 12),
                           seed=seed, sentence_count=count)


def test_generate_corpus_is_deterministic(tmp_path):
    config = _tiny_config()
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    langgen.write_corpus(a, generate_corpus(config), config.vocabulary,
                         header_sha=config.sha256())
    langgen.write_corpus(b, generate_corpus(config), config.vocabulary,
                         header_sha=config.sha256())
    assert a.read_bytes() == b.read_bytes()


def test_generate_corpus_invariant_to_worker_count():
    config = _tiny_config(count=600)
    serial = [s.tolist() for s in generate_corpus(config, jobs=1)]
    parallel = [s.tolist()
                for s in generate_corpus(config, jobs=2, chunk_size=50)]
    assert serial == parallel


def test_nesting_corpus_sentences_all_nested():
    config = _tiny_config(count=500)
    assert all(corpstats.is_nested(s, config.vocabulary)
               for s in generate_corpus(config))


def test_empty_corpus_writes_header_only(tmp_path):
    config = _tiny_config(count=0)
    out = tmp_path / "empty.txt"
    langgen.write_corpus(out, generate_corpus(config), config.vocabulary,
                         header_sha=config.sha256())
    lines = out.read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("# genconfig-sha256=")


def test_structured_config_with_odd_vocabulary_rejected():
    with pytest.raises(ConfigError):
        GenConfig(
            vocabulary=Vocabulary(41),
            length_dist=LengthDistribution.uniform(4, 8),
            sampler=TokenSampler(kind="zipf"),
            structure=StructureSpec(structure="flat", rendering="parenthesis"),
            seed=0, sentence_count=5,
        ).validate()


def test_corpus_file_round_trip(tmp_path):
    config = _tiny_config(count=50)
    out = tmp_path / "c.txt"
    sentences = list(generate_corpus(config))
    langgen.write_corpus(out, iter(sentences), config.vocabulary,
                         header_sha=config.sha256())
    loaded = langgen.read_corpus(out, config.vocabulary)
    assert [s.tolist() for s in loaded] == [s.tolist() for s in sentences]


def test_ini_round_trip_preserves_config():
    config = _tiny_config()
    again = GenConfig.from_ini(config.to_ini())
    assert again == config
    assert again.sha256() == config.sha256()


def test_presets_cover_the_seven_languages():
    dist = LengthDistribution.uniform(4, 10)
    for name in langgen.PRESET_NAMES:
        config = language_preset(name, 40, dist, seed=1, sentence_count=3)
        sentences = list(generate_corpus(config))
        assert len(sentences) == 3
        structured = config.structure.structure != "none"
        if structured:
            assert all(len(s) % 2 == 0 for s in sentences)


def test_parenthesis_languages_use_half_the_surface_ids():
    dist = LengthDistribution.uniform(6, 12)
    config = language_preset("nesting_parenthesis", 40, dist, seed=2,
                             sentence_count=50)
    tokens = np.concatenate(list(generate_corpus(config)))
    assert tokens.max() < 20   # pair ids only
    dep = language_preset("nesting_dependency", 40, dist, seed=2,
                          sentence_count=50)
    dep_tokens = np.concatenate(list(generate_corpus(dep)))
    assert dep_tokens.max() >= 20   # tails occupy the upper half
