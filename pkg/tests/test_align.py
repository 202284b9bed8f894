from __future__ import annotations

import json
from dataclasses import replace

import numpy as np
import pytest

from genrealign.align import (
    AlignOptions,
    align_features,
    alignment_to_dict,
    build_align_graph,
    format_alignment_tsv,
    write_alignment,
)
from genrealign.am import Mode, TrainSchedule
from genrealign.errors import AlignmentError
from genrealign.genre import Genre
from genrealign.lexicon import make_lexicon

from . import pipeline
from .graphs import random_features, random_model_set

LEX = make_lexicon({"A": [["AA"]], "AB": [["AA", "B"]], "BA": [["B", "AA"], ["B"]]})
SCHED = TrainSchedule(iterations=8, split_at=(4,), max_components=4)


def _chain_names(graph):
    return [(c.phone.name, c.word, c.slot) for c in graph.chains]


def test_agnostic_graph_layout():
    ms = random_model_set(np.random.default_rng(0))
    g = build_align_graph(["ab", "a"], LEX, ms).graph
    assert _chain_names(g) == [("SIL", -1, -1), ("AA", 0, 0), ("B", 0, 1), ("AA", 1, 0), ("SIL", -1, -1),
                               ("SIL", -1, -1)]
    assert g.num_states == 3 * 5 + 3 * 3
    assert g.min_frames() == 9                  # AA B AA, every silence skipped
    assert set(g.state_word.tolist()) == {-1, 0, 1}


def test_pronunciation_alternatives_are_parallel():
    ms = random_model_set(np.random.default_rng(0))
    g = build_align_graph(["ba"], LEX, ms, AlignOptions(edge_silence=False)).graph
    assert _chain_names(g) == [("B", 0, 0), ("AA", 0, 1), ("B", 0, 0)]
    assert g.min_frames() == 3


def test_genre_variants_compete_unless_pinned():
    ms = random_model_set(np.random.default_rng(0), mode=Mode.GENRE_SILENCE_PHONE)
    free = build_align_graph(["a"], LEX, ms, AlignOptions(edge_silence=False)).graph
    assert sorted(n for n, *_ in _chain_names(free)) == ["AA@hiphop", "AA@metal", "AA@pop"]
    pinned = build_align_graph(["ab"], LEX, ms, AlignOptions(genre=Genre.METAL)).graph
    assert all(c.phone.genre is Genre.METAL for c in pinned.chains)
    sil = random_model_set(np.random.default_rng(0), mode=Mode.GENRE_SILENCE)
    g = build_align_graph(["a"], LEX, sil, AlignOptions(genre=Genre.POP)).graph
    assert {c.phone.name for c in g.chains} == {"SIL@pop", "AA"}


def test_graph_errors():
    ms = random_model_set(np.random.default_rng(0))
    with pytest.raises(AlignmentError):
        build_align_graph([], LEX, ms)
    with pytest.raises(AlignmentError, match="no feasible path"):
        align_features(["ab", "ab"], random_features(np.random.default_rng(1), 5), ms, LEX)
    feats = replace(random_features(np.random.default_rng(1), 50), fingerprint="y")
    ms.feature_fingerprint = "x"
    with pytest.raises(AlignmentError, match="feature configuration"):
        align_features(["a"], feats, ms, LEX)
    with pytest.raises(ValueError):
        AlignOptions(silence_prob=1.0)


def test_word_times_cover_their_frames():
    ms = random_model_set(np.random.default_rng(2))
    feats = random_features(np.random.default_rng(3), 60)
    res = align_features(["ab", "a", "ba"], feats, ms, LEX)
    assert res.tokens == ["AB", "A", "BA"] and res.num_frames == 60
    assert all(w.start < w.end for w in res.words)
    assert all(a.end <= b.start + 1e-12 for a, b in zip(res.words, res.words[1:]))
    for w in res.words:
        assert w.phones[0].start == w.start and w.phones[-1].end == w.end
        assert w.start == pytest.approx(feats.frame_time(round((w.start - feats.frame_time(0)) / feats.frame_hop)), abs=1e-12)
    again = align_features(["ab", "a", "ba"], feats, ms, LEX)
    assert again == res and np.array_equal(again.state_path, res.state_path)


def test_song_level_genre_selection():
    ms = random_model_set(np.random.default_rng(4), mode=Mode.GENRE_SILENCE_PHONE)
    feats = random_features(np.random.default_rng(5), 40)
    per_phone = align_features(["ab", "a"], feats, ms, LEX)
    per_song = align_features(["ab", "a"], feats, ms, LEX, AlignOptions(genre_selection="song"))
    assert per_song.song_genre is not None
    assert {p.genre for w in per_song.words for p in w.phones} == {per_song.song_genre.value}
    assert per_song.total_loglik <= per_phone.total_loglik + 1e-9
    pinned = align_features(["ab", "a"], feats, ms, LEX, AlignOptions(genre=per_song.song_genre))
    assert pinned.total_loglik == pytest.approx(per_song.total_loglik, abs=1e-9)


def test_output_formats(tmp_path):
    ms = random_model_set(np.random.default_rng(6), mode=Mode.GENRE_SILENCE_PHONE)
    res = align_features(["ab", "a"], random_features(np.random.default_rng(7), 30), ms, LEX)
    rows = [line.split("\t") for line in format_alignment_tsv(res).splitlines()]
    assert [r[2] for r in rows] == ["AB", "A"]
    assert all(len(r) == 5 and len(r[4].split("-")) == len(w.phones) for r, w in zip(rows, res.words))
    write_alignment(res, tmp_path / "a.json")
    write_alignment(res, tmp_path / "a.tsv")
    doc = json.loads((tmp_path / "a.json").read_text())
    assert doc == json.loads(json.dumps(alignment_to_dict(res)))
    assert [w["start"] for w in doc["words"]] == [w.start for w in res.words]
    assert (tmp_path / "a.tsv").read_text() == format_alignment_tsv(res)


def test_trained_alignment_is_accurate(corpus1):
    result, _ = pipeline.train(corpus1, Mode.GENRE_SILENCE_PHONE, SCHED)
    errors = pipeline.alignment_errors(corpus1, result.models)
    assert pipeline.mean(errors) < 0.020
    song = pipeline.alignment_errors(corpus1, result.models, AlignOptions(genre_selection="song"))
    assert pipeline.mean(song) < 0.020
