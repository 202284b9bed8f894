"""Annotation ingestion and non-vocal segment extraction.

Line-level song annotation (JSON, one song per file or a list of songs)::

    {
      "song_id": "song01",
      "genre": "Hard Rock",          # raw tag or broadclass
      "duration": 183.2,             # optional, seconds
      "audio": "audio/song01.wav",   # optional, relative to the JSON file
      "lines": [{"start": 12.1, "end": 15.9, "text": "..."}, ...]
    }

Word-level annotation is TSV, one file per song: ``start<TAB>end<TAB>word``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import AnnotationError
from .genre import Genre, GenreMap, classify_genre
from .text import normalize_words

MIN_SILENCE = 0.1
MAX_SILENCE = 10.0


@dataclass(frozen=True)
class LineAnnotation:
    song_id: str
    line_start: float
    line_end: float
    text: tuple[str, ...]
    genre: Genre


@dataclass
class Song:
    song_id: str
    genre: Genre
    lines: list[LineAnnotation]
    raw_genre: str = ""
    duration: float | None = None
    audio: str | None = None


@dataclass(frozen=True)
class WordSpan:
    word: str
    start: float
    end: float


@dataclass(frozen=True)
class WordBoundaryAnnotation:
    song_id: str
    words: tuple[WordSpan, ...]
    genre: Genre | None = None

    def __post_init__(self):
        validate_word_spans(self.words, self.song_id)

    @property
    def tokens(self) -> list[str]:
        return [w.word for w in self.words]


@dataclass(frozen=True)
class SilenceSegment:
    song_id: str
    start: float
    end: float
    genre: Genre

    @property
    def duration(self) -> float:
        return self.end - self.start


def _song_from_dict(doc: dict, where: str, genre_map: GenreMap | None, base_dir: str) -> Song:
    for key, kind in (("song_id", str), ("genre", str), ("lines", list)):
        if not isinstance(doc.get(key), kind):
            raise AnnotationError(f"{where}: field {key!r} missing or not a {kind.__name__}")
    song_id, raw = doc["song_id"], doc["genre"]
    genre = classify_genre(raw, genre_map)
    duration = doc.get("duration")
    if duration is not None and (not isinstance(duration, (int, float)) or duration <= 0):
        raise AnnotationError(f"{where}: bad duration {duration!r}")
    audio = doc.get("audio")
    if audio is not None and not os.path.isabs(audio):
        audio = os.path.normpath(os.path.join(base_dir, audio))

    lines = []
    for i, item in enumerate(doc["lines"]):
        ctx = f"{where}: song {song_id!r} line {i}"
        if not isinstance(item, dict) or not {"start", "end", "text"} <= set(item):
            raise AnnotationError(f"{ctx}: needs start, end, text")
        start, end, text = item["start"], item["end"], item["text"]
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in (start, end)):
            raise AnnotationError(f"{ctx}: start/end must be finite numbers")
        if end <= start:
            raise AnnotationError(f"{ctx}: end {end} <= start {start}")
        if start < 0 or (duration is not None and end > duration + 1e-9):
            raise AnnotationError(f"{ctx}: span [{start}, {end}] outside the song")
        words = tuple(normalize_words(text)) if isinstance(text, str) else ()
        if not words:
            raise AnnotationError(f"{ctx}: empty text")
        lines.append(LineAnnotation(song_id, float(start), float(end), words, genre))

    lines.sort(key=lambda ln: (ln.line_start, ln.line_end))
    for prev, nxt in zip(lines, lines[1:]):
        if nxt.line_start < prev.line_end:
            raise AnnotationError(
                f"{where}: song {song_id!r} lines [{prev.line_start}, {prev.line_end}] and "
                f"[{nxt.line_start}, {nxt.line_end}] overlap")
    return Song(song_id, genre, lines, raw_genre=raw,
                duration=None if duration is None else float(duration), audio=audio)


def load_songs(path: str | os.PathLike, genre_map: GenreMap | None = None) -> list[Song]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"{path}: invalid JSON ({exc})") from None
    docs = doc if isinstance(doc, list) else [doc]
    base_dir = os.path.dirname(os.path.abspath(path))
    songs = []
    for i, d in enumerate(docs):
        if not isinstance(d, dict):
            raise AnnotationError(f"{path}: entry {i} is not an object")
        songs.append(_song_from_dict(d, str(path), genre_map, base_dir))
    return songs


def load_line_annotations(path: str | os.PathLike, genre_map: GenreMap | None = None) -> list[LineAnnotation]:
    return [ln for song in load_songs(path, genre_map) for ln in song.lines]


def song_to_dict(song: Song, base_dir: str | None = None) -> dict:
    doc: dict = {"song_id": song.song_id, "genre": song.raw_genre or song.genre.value}
    if song.duration is not None:
        doc["duration"] = song.duration
    if song.audio is not None:
        doc["audio"] = os.path.relpath(song.audio, base_dir) if base_dir else song.audio
    doc["lines"] = [{"start": ln.line_start, "end": ln.line_end, "text": " ".join(ln.text)}
                    for ln in song.lines]
    return doc


def dump_songs(songs: Sequence[Song], path: str | os.PathLike) -> None:
    base_dir = os.path.dirname(os.path.abspath(path))
    docs = [song_to_dict(s, base_dir) for s in songs]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(docs[0] if len(docs) == 1 else docs, fh, indent=1)
        fh.write("\n")


def validate_word_spans(words: Sequence[WordSpan], song_id: str = "") -> None:
    for i, w in enumerate(words):
        if not w.end > w.start:
            raise AnnotationError(f"{song_id}: word {i} ({w.word}) has end <= start")
        if i and not w.start > words[i - 1].start:
            raise AnnotationError(f"{song_id}: word starts must strictly increase (word {i})")


def load_word_tsv(path: str | os.PathLike, song_id: str | None = None,
                  genre: Genre | None = None) -> WordBoundaryAnnotation:
    song_id = song_id or os.path.splitext(os.path.basename(path))[0]
    spans = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) < 3:
                raise AnnotationError(f"{path}:{lineno}: expected start<TAB>end<TAB>word")
            try:
                start, end = float(cols[0]), float(cols[1])
            except ValueError:
                raise AnnotationError(f"{path}:{lineno}: bad time value") from None
            words = normalize_words(cols[2])
            if len(words) != 1:
                raise AnnotationError(f"{path}:{lineno}: expected one word, got {cols[2]!r}")
            spans.append(WordSpan(words[0], start, end))
    return WordBoundaryAnnotation(song_id, tuple(spans), genre)


def dump_word_tsv(ann: WordBoundaryAnnotation, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for w in ann.words:
            fh.write(f"{w.start!r}\t{w.end!r}\t{w.word}\n")


def partition_timeline(lines: Sequence[LineAnnotation], song_duration: float,
                       min_len: float = MIN_SILENCE, max_len: float = MAX_SILENCE,
                       ) -> tuple[list[SilenceSegment], list[tuple[float, float]]]:
    """Split the non-line part of [0, duration] into kept silence and dropped pieces.

    Leading and trailing gaps keep the ``max_len`` seconds next to the line.
    An inner gap longer than ``max_len`` keeps ``max_len / 2`` after the
    previous line and ``max_len / 2`` before the next. Pieces shorter than
    ``min_len`` and clipped-away remainders are returned as dropped.
    """
    if not lines:
        return [], ([(0.0, song_duration)] if song_duration > 0 else [])
    lines = sorted(lines, key=lambda ln: ln.line_start)
    song_id, genre = lines[0].song_id, lines[0].genre
    kept: list[tuple[float, float]] = []
    dropped: list[tuple[float, float]] = []

    def keep(a: float, b: float) -> None:
        if b > a:
            (kept if b - a >= min_len else dropped).append((a, b))

    def drop(a: float, b: float) -> None:
        if b > a:
            dropped.append((a, b))

    first, last = lines[0].line_start, lines[-1].line_end
    if first > 0:
        a = max(0.0, first - max_len)
        drop(0.0, a)
        keep(a, first)
    for prev, nxt in zip(lines, lines[1:]):
        a, b = prev.line_end, nxt.line_start
        if b - a <= max_len:
            keep(a, b)
        else:
            half = max_len / 2.0
            keep(a, a + half)
            drop(a + half, b - half)
            keep(b - half, b)
    if song_duration > last:
        b = min(song_duration, last + max_len)
        keep(last, b)
        drop(b, song_duration)

    segments = [SilenceSegment(song_id, a, b, genre) for a, b in sorted(kept)]
    return segments, sorted(dropped)


def extract_silence_segments(lines: Sequence[LineAnnotation], song_duration: float,
                             min_len: float = MIN_SILENCE, max_len: float = MAX_SILENCE,
                             ) -> list[SilenceSegment]:
    return partition_timeline(lines, song_duration, min_len, max_len)[0]


def lyrics_lines(songs: Iterable[Song]) -> list[list[str]]:
    return [list(ln.text) for s in songs for ln in s.lines]
