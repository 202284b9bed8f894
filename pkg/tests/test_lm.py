from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genrealign.errors import ArpaFormatError, DataError
from genrealign.lm import (
    BOS,
    EOS,
    UNK,
    export_arpa,
    format_arpa,
    import_arpa,
    parse_arpa,
    perplexity,
    read_corpus,
    sentence_logprob,
    train_ngram,
)

from .oracles import ngram_prob_by_counting

corpora = st.lists(st.lists(st.sampled_from("A B C D".split()), min_size=0, max_size=6), min_size=1, max_size=8)

TOY_ARPA = """\\data\\
ngram 1=4
ngram 2=2

\\1-grams:
-99\t<s>\t-0.3
-0.5\tA\t-0.2
-0.6\t</s>
-1.0\t<unk>

\\2-grams:
-0.1\t<s> A
-0.2\tA </s>

\\end\\
"""


@settings(max_examples=40, deadline=None)
@given(corpus=corpora, order=st.integers(1, 3))
def test_every_context_is_a_distribution(corpus, order):
    lm = train_ngram(corpus, order)
    contexts = {ng[:-1] for ng in lm.probs if len(ng) > 1} | {(), ("ZZ",), (BOS, "A")}
    for h in contexts:
        total = sum(10 ** lm.log10_prob(w, h) for w in lm.words)
        assert abs(total - 1.0) <= 1e-9, h


@settings(max_examples=40, deadline=None)
@given(corpus=corpora, order=st.integers(1, 3), discount=st.sampled_from([0.5, 0.75, 1.0]),
       data=st.data())
def test_probabilities_match_counting(corpus, order, discount, data):
    lm = train_ngram(corpus, order, discount)
    vocab = set(lm.words)
    history = data.draw(st.lists(st.sampled_from([BOS, "A", "B", "C", "D"]), max_size=3))
    for w in sorted(vocab):
        want = ngram_prob_by_counting(corpus, order, discount, vocab, w, tuple(lm.map_word(x) if x != BOS else x
                                                                                  for x in history))
        assert abs(10 ** lm.log10_prob(w, history) - want) <= 1e-9


def test_unknown_words_and_sentence_scores():
    lm = train_ngram([["A", "B"], ["A"]], 2)
    assert lm.map_word("Q") == UNK and lm.map_word(BOS) == UNK
    assert lm.log10_prob("Q", ["A"]) == lm.log10_prob(UNK, ["A"])
    expected = lm.log10_prob("A", [BOS]) + lm.log10_prob("B", [BOS, "A"]) + lm.log10_prob(EOS, [BOS, "A", "B"])
    assert sentence_logprob(lm, ["A", "B"]) == pytest.approx(expected, abs=1e-12)
    assert lm.counts_by_order()[0] == 5       # <s> A B </s> <unk>
    assert lm.state([BOS, "A", "B"]) == ("B",)
    assert lm.state(["Q"]) == ()


def test_hand_written_arpa_scores():
    lm = parse_arpa(TOY_ARPA)
    assert sentence_logprob(lm, ["A"]) == pytest.approx(-0.1 - 0.2, abs=1e-12)
    assert sentence_logprob(lm, ["A", "A"]) == pytest.approx(-0.1 + (-0.2 - 0.5) - 0.2, abs=1e-12)
    assert sentence_logprob(lm, ["B"]) == pytest.approx((-0.3 - 1.0) - 0.6, abs=1e-12)
    ppl = perplexity(lm, [["A"], ["B"]])
    assert ppl == pytest.approx(10 ** ((0.3 + 1.9) / 4), rel=1e-12)


def test_arpa_round_trip_is_byte_identical(tmp_path):
    lm = train_ngram([["A", "B", "C"], ["B", "C"], ["C", "A"]], 3, vocab=["ZED"])
    export_arpa(lm, tmp_path / "a.arpa")
    again = import_arpa(tmp_path / "a.arpa")
    export_arpa(again, tmp_path / "b.arpa")
    assert (tmp_path / "a.arpa").read_bytes() == (tmp_path / "b.arpa").read_bytes()
    assert set(again.probs) == set(lm.probs) and again.vocab == lm.vocab
    for ng, p in lm.probs.items():
        assert abs(again.probs[ng] - p) <= 5e-7
    assert "ZED" in again.vocab and "-0.000000" not in format_arpa(lm)


@pytest.mark.parametrize("text, message", [
    ("ngram 1=1\n", "data"),
    (TOY_ARPA.replace("ngram 2=2", "ngram 2=3"), "header says"),
    (TOY_ARPA.replace("-0.2\tA </s>", "-0.2\t<s> A"), "duplicate"),
    (TOY_ARPA.replace("\\end\\", ""), "end"),
    (TOY_ARPA.replace("-0.5\tA", "0.5\tA"), "<= 0"),
    (TOY_ARPA.replace("-0.1\t<s> A", "-0.1\t<s> Q"), "lacks"),
    (TOY_ARPA.replace("-0.6\t</s>", "-0.6\tB"), "</s>"),
    (TOY_ARPA.replace("-1.0\t<unk>", "x\t<unk>"), "non-numeric"),
])
def test_malformed_arpa_is_rejected(text, message):
    with pytest.raises(ArpaFormatError, match=message):
        parse_arpa(text)


def test_training_errors_and_corpus_reader(tmp_path):
    with pytest.raises(DataError):
        train_ngram([], 3)
    with pytest.raises(DataError):
        train_ngram([["A"]], 0)
    with pytest.raises(DataError):
        train_ngram([["A"]], 2, discount=[0.5])
    with pytest.raises(DataError):
        perplexity(train_ngram([["A"]], 1), [])
    (tmp_path / "c.txt").write_text("Hello, world!\n\n  it's  me \n")
    assert read_corpus(tmp_path / "c.txt") == [["HELLO", "WORLD"], ["IT'S", "ME"]]


def test_in_domain_text_has_lower_perplexity():
    lyrics = [["LOVE", "ME", "BABY"], ["BABY", "LOVE", "ME"], ["LOVE", "YOU", "BABY"]] * 5
    general = [["THE", "CAT", "SAT"], ["A", "DOG", "RAN"], ["LOVE", "IS", "NICE"]] * 5
    test = [["LOVE", "ME", "BABY"], ["BABY", "LOVE", "YOU"]]
    vocab = {w for line in lyrics + general for w in line}
    in_domain, out = train_ngram(lyrics, 3, vocab=vocab), train_ngram(general, 3, vocab=vocab)
    assert perplexity(in_domain, test) < perplexity(out, test)
    assert math.isfinite(perplexity(out, test))
