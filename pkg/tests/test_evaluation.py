from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genrealign.corpus import WordBoundaryAnnotation, WordSpan
from genrealign.decode import TranscriptResult
from genrealign.errors import EvalError
from genrealign.evaluation import (
    build_report,
    edit_counts,
    format_comparison,
    report_from_dict,
    word_boundary_ae,
    word_error_rate,
)
from genrealign.genre import Genre

from .oracles import brute_edit_distance

tokens = st.lists(st.sampled_from("A B C D".split()), max_size=6)


def _ann(song_id, starts, words=None, genre=Genre.POP):
    words = words or [f"W{i}" for i in range(len(starts))]
    spans = [WordSpan(w, s, s + 0.05) for w, s in zip(words, starts)]
    return WordBoundaryAnnotation(song_id, spans, genre)


def test_ae_examples():
    ref = _ann("s", [0.0, 1.0, 2.0])
    assert word_boundary_ae(ref, ref) == 0.0
    assert word_boundary_ae(ref, _ann("s", [0.5, 1.5, 2.5])) == pytest.approx(0.5)
    assert word_boundary_ae(ref, _ann("s", [0.1, 0.8, 2.6])) == pytest.approx(0.3)
    both = [("W0", 0.1, 0.15), ("W1", 1.0, 1.25), ("W2", 2.0, 2.05)]
    assert word_boundary_ae(ref, both, mode="both") == pytest.approx((0.1 / 3 + (0.1 + 0.2) / 3) / 2)


def test_ae_errors():
    ref = _ann("s", [0.0, 1.0])
    with pytest.raises(EvalError, match="differ"):
        word_boundary_ae(ref, _ann("s", [0.0, 1.0], ["W0", "X"]))
    with pytest.raises(ValueError):
        word_boundary_ae(ref, ref, mode="mid")
    assert word_boundary_ae(_ann("s", [0.0], ["it's"]), [("IT'S!", 0.2, 0.3)]) == pytest.approx(0.2)


@settings(max_examples=50, deadline=None)
@given(starts=st.lists(st.floats(0, 100), min_size=1, max_size=8), data=st.data())
def test_ae_depends_only_on_times(starts, data):
    shifts = data.draw(st.lists(st.floats(-1, 1), min_size=len(starts), max_size=len(starts)))
    moved = [a + b for a, b in zip(starts, shifts)]

    def spans(prefix, times):
        return [(f"{prefix}{i}", t, t + 0.05) for i, t in enumerate(times)]

    ae = word_boundary_ae(spans("W", starts), spans("W", moved))
    assert ae >= 0 and ae == word_boundary_ae(spans("Q", starts), spans("Q", moved))
    assert ae == pytest.approx(np.mean(np.abs(np.subtract(moved, starts))), abs=1e-12)


def test_wer_examples():
    assert word_error_rate("A B C".split(), "A B C".split()) == 0.0
    assert word_error_rate("A B C".split(), "A X C".split()) == pytest.approx(100 / 3)
    assert word_error_rate("A B".split(), "A X Y B".split()) == 100.0
    assert word_error_rate(["A"], "B C D".split()) == 300.0
    c = edit_counts("A B C D".split(), "B X D E".split())
    assert (c.substitutions, c.deletions, c.insertions) == (1, 1, 1)
    assert word_error_rate(["it's"], ["IT'S."]) == 0.0
    with pytest.raises(EvalError):
        word_error_rate([], ["A"])


@settings(max_examples=200, deadline=None)
@given(ref=tokens.filter(bool), hyp=tokens)
def test_wer_is_minimal_edit_distance(ref, hyp):
    c = edit_counts(ref, hyp)
    assert c.errors == brute_edit_distance(ref, hyp)
    assert c.ref_length == len(ref)
    assert len(ref) - c.deletions + c.insertions == len(hyp)
    assert word_error_rate(ref, hyp) == pytest.approx(100 * c.errors / len(ref))


def _fixture_report():
    refs = {
        "p1": _ann("p1", [0, 1, 2, 3], "A B C D".split(), Genre.POP),
        "p2": _ann("p2", [0, 1], "A B".split(), Genre.POP),
        "h1": _ann("h1", [0, 1, 2], "A B C".split(), Genre.HIPHOP),
        "m1": _ann("m1", [0, 1], "A B".split(), Genre.METAL),
    }
    hyps = {
        "p1": _ann("p1", [0.1, 1, 2, 3], "A B C D".split()),
        "p2": _ann("p2", [0.2, 1.2], "A B".split()),
        "h1": _ann("h1", [0, 1.3, 2], "A B C".split()),
        "m1": _ann("m1", [1, 2], "A B".split()),
    }
    transcripts = {
        "p1": TranscriptResult(("A", "X", "C", "D"), 0.0),
        "p2": TranscriptResult(("A",), 0.0),
        "h1": "A B C",
        "m1": ["A", "B", "E", "F"],
    }
    datasets = {"p1": "set1", "p2": "set2", "h1": "set1", "m1": "set2"}
    return build_report(refs, hyps, system_label="gsp+lyrics", transcripts=transcripts, datasets=datasets)


def test_report_matches_hand_aggregation():
    rep = _fixture_report()
    by_id = {s.song_id: s for s in rep.songs}
    # hand values: per-song AE, per-song WER, pooled WER
    assert by_id["p1"].ae == pytest.approx(0.025) and by_id["p2"].ae == pytest.approx(0.2)
    assert by_id["h1"].ae == pytest.approx(0.1) and by_id["m1"].ae == pytest.approx(1.0)
    assert [by_id[k].wer for k in ("p1", "p2", "h1", "m1")] == pytest.approx([25.0, 50.0, 0.0, 100.0])
    assert rep.per_genre["pop"].ae == pytest.approx((0.025 + 0.2) / 2)
    assert rep.per_genre["pop"].wer == pytest.approx(100 * 2 / 6)
    assert rep.per_genre["pop"].wer_song_mean == pytest.approx(37.5)
    assert rep.per_dataset["set1"].ae == pytest.approx((0.025 + 0.1) / 2)
    assert rep.per_dataset["set2"].wer == pytest.approx(100 * 3 / 4)
    assert rep.overall.ae == pytest.approx((0.025 + 0.2 + 0.1 + 1.0) / 4)
    assert rep.overall.wer == pytest.approx(100 * 4 / 11)
    assert rep.overall.songs == 4
    # aggregation linearity
    for name, agg in rep.per_genre.items():
        mine = [s for s in rep.songs if s.genre == name]
        assert agg.ae == pytest.approx(np.mean([s.ae for s in mine]))


def test_single_song_dataset_equals_song():
    rep = build_report({"s": _ann("s", [0, 1])}, {"s": _ann("s", [0.5, 1])})
    assert rep.per_dataset["all"].ae == rep.songs[0].ae == pytest.approx(0.25)
    assert rep.overall.wer is None and rep.songs[0].genre == "pop"


def test_report_formats_round_trip():
    rep = _fixture_report()
    again = report_from_dict(json.loads(rep.to_json()))
    assert again.to_json() == rep.to_json()
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert [r["song_id"] for r in rows] == ["h1", "m1", "p1", "p2"]
    assert float(rows[1]["ae_seconds"]) == pytest.approx(1.0) and rows[1]["errors"] == "2"
    chart = rep.genre_chart_data()
    assert chart["genres"] == ["pop", "hiphop", "metal"] and len(chart["ae"]) == 3
    table = format_comparison([rep, rep])
    assert "AE (s)" in table and "WER (%)" in table and "genre:hiphop" in table and "set2" in table
    assert table.count("gsp+lyrics") == 4
    assert format_comparison([]) == ""


def test_report_errors():
    refs = {"a": _ann("a", [0.0])}
    with pytest.raises(EvalError, match="no hypothesis"):
        build_report(refs, {})
    with pytest.raises(EvalError, match="unknown song"):
        build_report(refs, {"a": refs["a"], "b": refs["a"]})
    with pytest.raises(EvalError, match="duplicate"):
        build_report([("a", refs["a"]), ("a", refs["a"])], {"a": refs["a"]})
    with pytest.raises(EvalError, match="two transcripts"):
        build_report(refs, {"a": "W0"}, transcripts={"a": "W0"})
    with pytest.raises(EvalError, match="word-boundary"):
        build_report({"a": ["W0"]}, {"a": refs["a"]})
