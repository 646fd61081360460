import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiltlab import corpusio
from tiltlab.corpusio import (
    OOV_MARKER,
    Treebank,
    TreebankSentence,
    VocabMap,
    build_vocab,
    decode,
    encode,
    fit_length_distribution,
    read_conllu,
    write_conllu,
)
from tiltlab.errors import DataError

CONLLU_SAMPLE = """\
# sent_id = 1
# text = the cat
1\tthe\t_\tDET\t_\t_\t2\tdet\t_\t_
2\tcat\t_\tNOUN\t_\t_\t0\troot\t_\t_

"""

CONLLU_WITH_RANGE = """\
1\tI\t_\tPRON\t_\t_\t2\tnsubj\t_\t_
2-3\tcannot\t_\t_\t_\t_\t_\t_\t_\t_
2\tcan\t_\tAUX\t_\t_\t4\taux\t_\t_
3\tnot\t_\tPART\t_\t_\t4\tadvmod\t_\t_
4\tgo\t_\tVERB\t_\t_\t0\troot\t_\t_
5.1\tgone\t_\tVERB\t_\t_\t_\t_\t_\t_

"""


def test_build_vocab_caps_and_maps_unknown_to_oov():
    vocab = build_vocab(["a a b"], cap=2)
    assert vocab.id_of("a") == 0 and vocab.id_of("b") == 1
    assert vocab.id_of("c") == vocab.oov_id == 2


def test_build_vocab_cap_larger_than_forms_keeps_all():
    vocab = build_vocab(["x y z z"], cap=100)
    assert vocab.size == 3
    encoded = encode(["x y z"], vocab)[0]
    assert vocab.oov_id not in encoded


def test_build_vocab_tie_break_is_lexicographic():
    vocab = build_vocab(["a a x y"], cap=2)
    assert vocab.id_of("x") == 1
    assert vocab.id_of("y") == vocab.oov_id


def test_build_vocab_empty_input_error():
    with pytest.raises(DataError):
        build_vocab([], cap=5)


def test_build_vocab_deterministic_across_orderings():
    v1 = build_vocab(["b a", "c b a"], cap=10)
    v2 = build_vocab(["a b c", "a b"], cap=10)
    assert v1.forms == v2.forms


def test_fit_length_distribution_basics():
    dist = fit_length_distribution(["a b c d e f", "a b c d e f",
                                    " ".join(["w"] * 60)], 6, 60)
    hist = dist.as_histogram()
    assert hist[6] == pytest.approx(2 / 3)
    assert hist[60] == pytest.approx(1 / 3)


def test_fit_length_distribution_drops_out_of_range():
    dist = fit_length_distribution(["a b c", "a b c d e f"], 6, 60)
    assert dist.as_histogram() == {6: 1.0}
    with pytest.raises(DataError):
        fit_length_distribution(["a b"], 6, 60)


def test_fit_length_distribution_normalized_over_sample_corpus():
    from tiltlab import sampledata

    lines = sampledata.english_sentences(5, 3000)
    dist = fit_length_distribution(lines, 6, 60)
    assert abs(dist.probs.sum() - 1.0) <= 1e-9
    assert dist.lengths.min() >= 6 and dist.lengths.max() <= 60
    # recount oracle
    lengths = [len(l.split()) for l in lines if 6 <= len(l.split()) <= 60]
    expected = {n: lengths.count(n) / len(lengths) for n in set(lengths)}
    for n, p in expected.items():
        assert dist.as_histogram()[n] == pytest.approx(p)


def test_encode_decode_round_trip_modulo_oov():
    vocab = build_vocab(["the cat sat", "the dog"], cap=10)
    lines = ["the cat", "", "the unknown dog"]
    decoded = decode(encode(lines, vocab), vocab)
    assert decoded[0] == "the cat"
    assert decoded[1] == ""
    assert decoded[2] == f"the {OOV_MARKER} dog"


def test_decode_rejects_out_of_range_ids():
    vocab = build_vocab(["a b"], cap=10)
    with pytest.raises(DataError):
        decode([np.array([99])], vocab)


@settings(max_examples=50)
@given(st.lists(st.sampled_from(["alpha", "beta", "gamma", "delta"]),
                min_size=0, max_size=12))
def test_in_vocab_round_trip_is_exact(tokens):
    vocab = build_vocab(["alpha beta gamma delta"], cap=10)
    line = " ".join(tokens)
    assert decode(encode([line], vocab), vocab)[0] == line


def test_vocab_map_save_load_round_trip(tmp_path):
    vocab = build_vocab(["b a a c c c"], cap=3)
    path = tmp_path / "vocab.tsv"
    vocab.save(path)
    loaded = VocabMap.load(path)
    assert loaded.forms == vocab.forms


def test_read_conllu_direct_mapping(tmp_path):
    path = tmp_path / "t.conllu"
    path.write_text(CONLLU_SAMPLE)
    tb = read_conllu(path)
    assert len(tb) == 1
    sent = tb.sentences[0]
    assert sent.tokens == ("the", "cat")
    assert sent.upos == ("DET", "NOUN")
    assert sent.heads == (2, 0)
    assert sent.deprels == ("det", "root")


def test_read_conllu_skips_ranges_and_empty_nodes(tmp_path):
    path = tmp_path / "r.conllu"
    path.write_text(CONLLU_WITH_RANGE)
    tb = read_conllu(path)
    assert tb.sentences[0].tokens == ("I", "can", "not", "go")


def test_read_conllu_malformed_line_reports_lineno(tmp_path):
    path = tmp_path / "bad.conllu"
    path.write_text("1\tonly\tthree\n")
    with pytest.raises(DataError) as err:
        read_conllu(path)
    assert ":1:" in str(err.value)


def test_read_conllu_non_integer_head(tmp_path):
    path = tmp_path / "head.conllu"
    path.write_text("1\tcat\t_\tNOUN\t_\t_\tx\tdet\t_\t_\n")
    with pytest.raises(DataError) as err:
        read_conllu(path)
    assert "HEAD" in str(err.value)


def test_read_conllu_sentence_count_equals_blocks(tmp_path):
    from tiltlab import sampledata

    tb = sampledata.english_treebank(7, 25)
    path = tmp_path / "tb.conllu"
    write_conllu(path, tb)
    loaded = read_conllu(path)
    blocks = [b for b in path.read_text().split("\n\n") if b.strip()]
    assert len(loaded) == len(blocks) == 25
    assert loaded.sentences == tb.sentences


@pytest.mark.skipif("TILTLAB_EWT" not in os.environ,
                    reason="set TILTLAB_EWT to the UD EWT train .conllu")
def test_read_conllu_ewt_train_sentence_count():
    tb = read_conllu(os.environ["TILTLAB_EWT"])
    assert len(tb) == 16_688


def test_treebank_sentence_validation():
    with pytest.raises(DataError):
        TreebankSentence(("a",), ("X",), (1,), ("root",))   # self-loop
    with pytest.raises(DataError):
        TreebankSentence(("a",), ("X",), (5,), ("root",))   # out of range
