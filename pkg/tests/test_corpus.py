from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genrealign.corpus import (
    LineAnnotation,
    Song,
    WordBoundaryAnnotation,
    WordSpan,
    dump_songs,
    dump_word_tsv,
    extract_silence_segments,
    load_line_annotations,
    load_songs,
    load_word_tsv,
    partition_timeline,
)
from genrealign.errors import AnnotationError
from genrealign.genre import Genre
from genrealign.synth import GenreNoise, SynthSpec, render_song, synthesize_corpus
from genrealign.text import normalize_words


def song_doc(lines, **extra):
    return {"song_id": "s1", "genre": "Hard Rock", "duration": 20.0, **extra,
            "lines": [{"start": a, "end": b, "text": t} for a, b, t in lines]}


def write_json(tmp_path, doc, name="song.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def lines_at(spans, genre=Genre.POP):
    return [LineAnnotation("s", a, b, ("LA",), genre) for a, b in spans]


def test_two_lines_sorted(tmp_path):
    p = write_json(tmp_path, song_doc([(6, 8, "b c"), (1, 3, "a")]))
    lines = load_line_annotations(p)
    assert [(ln.line_start, ln.text) for ln in lines] == [(1.0, ("A",)), (6.0, ("B", "C"))]
    assert all(ln.genre is Genre.METAL for ln in lines)


@pytest.mark.parametrize("lines,msg", [
    ([(0, 5, "a"), (4, 8, "b")], "overlap"),
    ([(1, 2, "  ,, ")], "empty text"),
    ([(3, 2, "a")], "end"),
    ([(1, 25, "a")], "outside"),
])
def test_line_validation(tmp_path, lines, msg):
    with pytest.raises(AnnotationError, match=msg):
        load_line_annotations(write_json(tmp_path, song_doc(lines)))


@pytest.mark.parametrize("doc", [{"genre": "pop", "lines": []}, {"song_id": "x", "genre": "pop", "lines": {}},
                                 [1, 2]])
def test_schema_violations(tmp_path, doc):
    with pytest.raises(AnnotationError):
        load_songs(write_json(tmp_path, doc))
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(AnnotationError):
        load_songs(tmp_path / "bad.json")


def test_documented_silence_examples():
    segs = extract_silence_segments(lines_at([(2, 5), (7, 9)]), 12.0)
    assert [(s.start, s.end) for s in segs] == [(0, 2), (5, 7), (9, 12)]
    assert all(s.genre is Genre.POP for s in segs)
    assert extract_silence_segments(lines_at([(0, 10)]), 10.0) == []
    kept, dropped = partition_timeline(lines_at([(1, 2), (2.05, 3)]), 4.0)
    assert (2.0, 2.05) in dropped and all(s.end - s.start >= 0.1 for s in kept)


def test_long_gaps_clipped_next_to_lines():
    kept, dropped = partition_timeline(lines_at([(30, 31), (60, 61)]), 100.0)
    assert [(s.start, s.end) for s in kept] == [(20, 30), (31, 36), (55, 60), (61, 71)]
    assert dropped == [(0.0, 20.0), (36.0, 55.0), (71.0, 100.0)]


def random_layout(rng: np.random.Generator):
    n = int(rng.integers(0, 7))
    edges = np.sort(rng.uniform(0, 60, 2 * n))
    spans = [(float(edges[2 * i]), float(edges[2 * i + 1])) for i in range(n)
             if edges[2 * i + 1] > edges[2 * i]]
    duration = float(max([60.0] + [b for _, b in spans]) + rng.uniform(0, 15))
    # occasionally glue lines together or start at zero
    if spans and rng.uniform() < 0.3:
        spans[0] = (0.0, spans[0][1])
    return spans, duration


def check_complement(spans, duration, min_len, max_len):
    kept, dropped = partition_timeline(lines_at(spans), duration, min_len, max_len)
    pieces = sorted([(a, b) for a, b in spans] + [(s.start, s.end) for s in kept] + dropped)
    assert all(b > a for a, b in pieces)
    for (a0, b0), (a1, b1) in zip(pieces, pieces[1:]):
        assert math.isclose(b0, a1, abs_tol=1e-9), (pieces, duration)
    if pieces:
        assert pieces[0][0] == 0.0 and math.isclose(pieces[-1][1], duration, abs_tol=1e-9)
    assert all(min_len <= s.end - s.start <= max_len + 1e-9 for s in kept)
    return kept, dropped


@pytest.mark.parametrize("seed", range(50))
def test_timeline_complement_on_random_layouts(seed):
    spans, duration = random_layout(np.random.default_rng(seed))
    check_complement(spans, duration, 0.1, 10.0)


@settings(max_examples=60, deadline=None)
@given(gaps=st.lists(st.floats(0.0, 30.0), min_size=1, max_size=6),
       lengths=st.lists(st.floats(0.01, 10.0), min_size=5, max_size=5),
       tail=st.floats(0.0, 30.0), min_len=st.floats(0.01, 1.0), max_len=st.floats(1.0, 12.0))
def test_timeline_complement_property(gaps, lengths, tail, min_len, max_len):
    pos, spans = 0.0, []
    for g, length in zip(gaps, lengths):
        pos += g
        spans.append((pos, pos + length))
        pos += length
    check_complement(spans, pos + tail, min_len, max_len)


def test_song_json_round_trip(tmp_path):
    doc = song_doc([(1.25, 3.5, "Hello, world!"), (4.0, 6.0, "it's ok")], audio="a.wav")
    songs = load_songs(write_json(tmp_path, doc))
    dump_songs(songs, tmp_path / "again.json")
    again = load_songs(tmp_path / "again.json")
    assert again == songs
    dump_songs(again, tmp_path / "third.json")
    assert (tmp_path / "again.json").read_text() == (tmp_path / "third.json").read_text()
    assert songs[0].raw_genre == "Hard Rock" and songs[0].audio == str(tmp_path / "a.wav")


def test_multi_song_json(tmp_path):
    a = song_doc([(1, 2, "a")])
    b = {**song_doc([(1, 2, "b")]), "song_id": "s2", "genre": "Rap"}
    songs = load_songs(write_json(tmp_path, [a, b]))
    assert [s.genre for s in songs] == [Genre.METAL, Genre.HIPHOP]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0.001, 5.0), st.floats(0.001, 5.0),
                          st.sampled_from(["LOVE", "DON'T", "NIGHT", "A"])), min_size=1, max_size=10))
def test_word_tsv_round_trip(tmp_path_factory, raw):
    pos, spans = 0.0, []
    for gap, length, word in raw:
        pos += gap
        spans.append(WordSpan(word, pos, pos + length))
    ann = WordBoundaryAnnotation("song", tuple(spans))
    path = tmp_path_factory.mktemp("w") / "song.tsv"
    dump_word_tsv(ann, path)
    first = load_word_tsv(path)
    dump_word_tsv(first, path)
    assert load_word_tsv(path) == first == ann


def test_word_annotation_invariants(tmp_path):
    with pytest.raises(AnnotationError):
        WordBoundaryAnnotation("s", (WordSpan("A", 1.0, 1.0),))
    with pytest.raises(AnnotationError):
        WordBoundaryAnnotation("s", (WordSpan("A", 1.0, 2.0), WordSpan("B", 1.0, 3.0)))
    (tmp_path / "bad.tsv").write_text("0.1\tx\tWORD\n")
    with pytest.raises(AnnotationError):
        load_word_tsv(tmp_path / "bad.tsv")
    (tmp_path / "two.tsv").write_text("0.1\t0.2\tTWO WORDS\n")
    with pytest.raises(AnnotationError):
        load_word_tsv(tmp_path / "two.tsv")


def test_normalization_rules():
    assert normalize_words("Rock-n-roll, don't STOP!") == ["ROCK", "N", "ROLL", "DON'T", "STOP"]


# ------------------------------------------------------------------ synthetic corpus

SMALL = SynthSpec(songs_per_genre=1, test_songs_per_genre=1, lines_per_song=2, general_lines=20)


def test_synth_is_deterministic(tmp_path):
    a = synthesize_corpus(SMALL, 7, tmp_path / "a")
    b = synthesize_corpus(SMALL, 7, tmp_path / "b")
    assert a == b
    for rel in ["lexicon.txt", "general.txt", "lyrics_train.txt", "manifest.json"] + \
            [e[k] for e in a["songs"] for k in ("audio", "annotation", "words", "phones")]:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel


def test_synth_counts_and_files(tmp_path):
    spec = SynthSpec(songs_per_genre=5, lines_per_song=1, general_lines=5)
    man = synthesize_corpus(spec, 1, tmp_path)
    assert len(man["songs"]) == 15
    assert {g.value: sum(e["genre"] == g.value for e in man["songs"]) for g in Genre} == \
        {"pop": 5, "hiphop": 5, "metal": 5}
    for e in man["songs"]:
        song = load_songs(tmp_path / e["annotation"])[0]
        assert song.genre.value == e["genre"] and song.duration == pytest.approx(e["duration"])
        words = load_word_tsv(tmp_path / e["words"])
        assert words.tokens == [w for ln in song.lines for w in ln.text]


def test_synth_rejects_inconsistent_specs():
    from genrealign.synth import SynthSpecError
    with pytest.raises(SynthSpecError):
        SynthSpec(signatures={"AA": (500.0,), "B": (500.0,)}, words={"X": ("AA",)},
                  successors={"<s>": ("X",), "X": ("X",)}).validate()
    with pytest.raises(SynthSpecError):
        SynthSpec(words={"X": ("QQ",)}, successors={"<s>": ("X",)}).validate()


def test_ground_truth_matches_energy_onsets():
    quiet = {g: GenreNoise(kind, 0.0) for g, kind in zip(Genre, ("chord", "drums", "distortion"))}
    spec = SynthSpec(noise=quiet, lines_per_song=3)
    song = render_song(spec, Genre.POP, "x", np.random.default_rng(11))
    active = np.abs(song.samples) > 1e-4
    # a run of activity must begin within 1 ms of a word start and end within 1 ms of a word end
    edges = np.flatnonzero(np.diff(np.r_[False, active, False].astype(np.int8)))
    onsets, offsets = edges[::2] / 16000, edges[1::2] / 16000
    runs = list(zip(onsets, offsets))
    starts = np.array([w.start for w in song.words])
    ends = np.array([w.end for w in song.words])
    # merge runs split by a zero crossing inside a word
    merged = []
    for a, b in runs:
        if merged and a - merged[-1][1] < 0.002:
            merged[-1] = (merged[-1][0], b)
        else:
            merged.append((a, b))
    assert len(merged) >= len(song.lines)
    for a, b in merged:
        assert np.min(np.abs(starts - a)) <= 0.001
        assert np.min(np.abs(ends - b)) <= 0.001
    # and every word start that follows silence is detected
    silent_before = [w for i, w in enumerate(song.words) if i == 0 or w.start - song.words[i - 1].end > 0.002]
    for w in silent_before:
        assert min(abs(a - w.start) for a, _ in merged) <= 0.001


def test_genre_noise_spectra_differ():
    spec = SynthSpec()
    rng = np.random.default_rng(0)
    from genrealign.synth import _accompaniment
    spectra = {}
    for g, noise in spec.noise.items():
        x = _accompaniment(noise, 16000, 16000, rng)
        p = np.abs(np.fft.rfft(x)) ** 2
        spectra[g] = np.add.reduceat(p, np.arange(0, len(p), 25)) / p.sum()
    gs = list(spectra)
    for i in range(3):
        for j in range(i + 1, 3):
            assert np.abs(spectra[gs[i]] - spectra[gs[j]]).sum() > 0.5


def test_song_dataclass_defaults():
    s = Song("a", Genre.POP, [])
    assert s.duration is None and s.audio is None
