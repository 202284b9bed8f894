"""Deterministic synthetic polyphonic corpora with exact ground truth.

Each phone is rendered as a fixed bundle of sinusoids; each genre has its
own accompaniment (sustained chord, drum pattern, or distorted noise band)
that plays through the whole song, vocals included. Lyrics come from a
sparse word-transition table so that an in-domain LM has structure to
learn; ``general.txt`` is unstructured text over a wider vocabulary.

Layout written by :func:`synthesize_corpus`::

    manifest.json  lexicon.txt  lyrics_train.txt  general.txt
    audio/<id>.wav  annotations/<id>.json  words/<id>.tsv  phones/<id>.tsv
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import butter, sosfilt

from .audio import write_wav
from .corpus import LineAnnotation, Song, WordBoundaryAnnotation, WordSpan, dump_songs, dump_word_tsv
from .errors import DataError
from .genre import Genre, TABLE_ROWS

SAMPLE_RATE = 16000


class SynthSpecError(DataError):
    pass


def _tone_grid(n: int, lo: float = 250.0, hi: float = 6000.0) -> np.ndarray:
    mel = np.linspace(2595 * np.log10(1 + lo / 700), 2595 * np.log10(1 + hi / 700), n)
    return np.round(700 * (10 ** (mel / 2595) - 1))


DEFAULT_PHONE_SET = ("AA", "AY", "D", "EH", "IY", "K", "L", "M", "N", "OW", "S", "T")


def default_signatures(phones: Sequence[str] = DEFAULT_PHONE_SET, tones: int = 3) -> dict[str, tuple[float, ...]]:
    """Interleave a mel-spaced grid so every phone gets one low, mid and high tone."""
    grid = _tone_grid(len(phones) * tones)
    return {p: tuple(float(grid[i + k * len(phones)]) for k in range(tones)) for i, p in enumerate(phones)}


DEFAULT_WORDS: dict[str, tuple[str, ...]] = {
    "SKY": ("S", "K", "AY"), "SLOW": ("S", "L", "OW"), "SEE": ("S", "IY"),
    "ME": ("M", "IY"), "MY": ("M", "AY"), "MIND": ("M", "AY", "N", "D"),
    "NIGHT": ("N", "AY", "T"), "NEED": ("N", "IY", "D"), "KNOW": ("N", "OW"),
    "LOW": ("L", "OW"), "LIKE": ("L", "AY", "K"), "TELL": ("T", "EH", "L"),
    "TIME": ("T", "AY", "M"), "DOLL": ("D", "AA", "L"), "DENSE": ("D", "EH", "N", "S"),
}

# each word is followed by one of a few fixed words
DEFAULT_SUCCESSORS: dict[str, tuple[str, ...]] = {
    "<s>": ("MY", "TELL", "SEE", "SLOW"),
    "MY": ("MIND", "TIME", "DOLL"), "MIND": ("LIKE", "KNOW"), "TIME": ("LIKE", "SLOW"),
    "DOLL": ("KNOW", "SEE"), "LIKE": ("NIGHT", "SKY"), "KNOW": ("ME", "NIGHT"),
    "TELL": ("ME", "MY"), "ME": ("LOW", "SLOW"), "SEE": ("MY", "DENSE"),
    "DENSE": ("NIGHT", "SKY"), "SLOW": ("NIGHT", "TIME"), "NIGHT": ("SKY", "LOW"),
    "SKY": ("NEED", "LOW"), "LOW": ("NEED", "SEE"), "NEED": ("ME", "TIME"),
}

GENERAL_EXTRA_WORDS = (
    "THE", "OF", "AND", "MARKET", "REPORT", "CITY", "COUNCIL", "SAID", "YEAR", "WHICH",
    "GOVERNMENT", "PRICE", "WEEK", "PEOPLE", "STATE", "NEW", "OFFICIAL", "COMPANY", "FOR", "WAS",
)


@dataclass(frozen=True)
class GenreNoise:
    kind: str            # "chord" | "drums" | "distortion"
    level: float


DEFAULT_NOISE: dict[Genre, GenreNoise] = {
    Genre.POP: GenreNoise("chord", 0.04),
    Genre.HIPHOP: GenreNoise("drums", 0.06),
    Genre.METAL: GenreNoise("distortion", 0.06),
}


@dataclass(frozen=True)
class SynthSpec:
    signatures: dict[str, tuple[float, ...]] = field(default_factory=default_signatures)
    words: dict[str, tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_WORDS))
    successors: dict[str, tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_SUCCESSORS))
    noise: dict[Genre, GenreNoise] = field(default_factory=lambda: dict(DEFAULT_NOISE))
    songs_per_genre: int = 5
    test_songs_per_genre: int = 0
    lines_per_song: int = 4
    words_per_line: tuple[int, int] = (3, 5)
    phone_duration: tuple[float, float] = (0.06, 0.14)
    word_gap: tuple[float, float] = (0.03, 0.08)
    word_gap_prob: float = 0.5
    lead_in: tuple[float, float] = (0.8, 1.5)
    interlude: tuple[float, float] = (0.5, 1.5)
    tail: tuple[float, float] = (0.5, 1.0)
    vocal_level: float = 0.15
    detune: float = 0.01
    general_lines: int = 400
    sample_rate: int = SAMPLE_RATE

    def validate(self) -> None:
        sigs = [tuple(sorted(s)) for s in self.signatures.values()]
        if len(set(sigs)) != len(sigs):
            raise SynthSpecError("duplicate phone signatures")
        if any(not s for s in sigs):
            raise SynthSpecError("empty phone signature")
        if any(f <= 0 or f >= self.sample_rate / 2 for s in sigs for f in s):
            raise SynthSpecError("signature frequency outside (0, Nyquist)")
        kinds = [(n.kind, n.level) for n in self.noise.values()]
        if len(set(kinds)) != len(kinds):
            raise SynthSpecError("duplicate genre noise signatures")
        for word, pron in self.words.items():
            missing = set(pron) - set(self.signatures)
            if missing or not pron:
                raise SynthSpecError(f"word {word!r} uses phones without signatures: {sorted(missing)}")
        for src, dsts in self.successors.items():
            if src != "<s>" and src not in self.words or not dsts or set(dsts) - set(self.words):
                raise SynthSpecError(f"bad successor entry for {src!r}")
        if "<s>" not in self.successors:
            raise SynthSpecError("successor table needs a '<s>' entry")
        if self.songs_per_genre < 0 or self.test_songs_per_genre < 0 or self.lines_per_song < 1:
            raise SynthSpecError("song counts must be non-negative and lines_per_song >= 1")


@dataclass
class RenderedSong:
    song_id: str
    genre: Genre
    raw_genre: str
    samples: np.ndarray
    words: list[WordSpan]
    phones: list[WordSpan]
    lines: list[LineAnnotation]

    @property
    def duration(self) -> float:
        return len(self.samples) / SAMPLE_RATE


def sample_lyrics(spec: SynthSpec, rng: np.random.Generator, n_words: int, prev: str = "<s>") -> list[str]:
    out = []
    for _ in range(n_words):
        options = spec.successors.get(prev) or spec.successors["<s>"]
        prev = options[int(rng.integers(len(options)))]
        out.append(prev)
    return out


def _accompaniment(noise: GenreNoise, n: int, sr: int, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / sr
    if noise.kind == "chord":
        x = sum(np.sin(2 * np.pi * f * h * t + rng.uniform(0, 2 * np.pi)) / h
                for f in (130.8, 164.8, 196.0) for h in (1, 2, 3))
        x = x / 3.0
    elif noise.kind == "drums":
        x = np.zeros(n)
        period = int(0.3 * sr)
        kick = np.sin(2 * np.pi * 55 * np.arange(int(0.12 * sr)) / sr) * np.exp(-np.arange(int(0.12 * sr)) / (0.03 * sr))
        hat_len = int(0.03 * sr)
        hat_filter = butter(4, 6000, "highpass", fs=sr, output="sos")
        for start in range(0, n, period):
            seg = kick[: n - start]
            x[start:start + len(seg)] += 3 * seg
            h0 = start + period // 2
            if h0 < n:
                hat = sosfilt(hat_filter, rng.standard_normal(hat_len)) * np.exp(-np.arange(hat_len) / (0.008 * sr))
                x[h0:h0 + hat_len] += 2 * hat[: n - h0]
    elif noise.kind == "distortion":
        band = butter(4, (300, 3000), "bandpass", fs=sr, output="sos")
        x = np.tanh(4 * sosfilt(band, rng.standard_normal(n)))
    else:
        raise SynthSpecError(f"unknown accompaniment kind {noise.kind!r}")
    rms = np.sqrt(np.mean(x ** 2)) or 1.0
    return noise.level * x / rms


def _samples(seconds: float, sr: int) -> int:
    return int(round(seconds * sr))


def render_song(spec: SynthSpec, genre: Genre, song_id: str, rng: np.random.Generator,
                raw_genre: str | None = None) -> RenderedSong:
    sr = spec.sample_rate
    u = lambda lohi: float(rng.uniform(*lohi))  # noqa: E731
    # plan the timeline in samples
    events: list[tuple[str, str, int, int]] = []   # (kind, label, start, end)
    words: list[WordSpan] = []
    phones: list[WordSpan] = []
    lines: list[LineAnnotation] = []
    pos = _samples(u(spec.lead_in), sr)
    prev = "<s>"
    for li in range(spec.lines_per_song):
        if li:
            pos += _samples(u(spec.interlude), sr)
        n_words = int(rng.integers(spec.words_per_line[0], spec.words_per_line[1] + 1))
        lyric = sample_lyrics(spec, rng, n_words, prev)
        prev = lyric[-1]
        line_start = pos
        for wi, word in enumerate(lyric):
            if wi and rng.uniform() < spec.word_gap_prob:
                pos += _samples(u(spec.word_gap), sr)
            w0 = pos
            for ph in spec.words[word]:
                d = _samples(u(spec.phone_duration), sr)
                events.append(("phone", ph, pos, pos + d))
                phones.append(WordSpan(ph, pos / sr, (pos + d) / sr))
                pos += d
            words.append(WordSpan(word, w0 / sr, pos / sr))
        lines.append(LineAnnotation(song_id, line_start / sr, pos / sr, tuple(lyric), genre))
    pos += _samples(u(spec.tail), sr)

    n = pos
    x = _accompaniment(spec.noise[genre], n, sr, rng)
    detune = 1.0 + spec.detune * float(rng.uniform(-1, 1))
    for _, ph, a, b in events:
        t = np.arange(b - a) / sr
        tone = sum(np.sin(2 * np.pi * f * detune * t + rng.uniform(0, 2 * np.pi)) for f in spec.signatures[ph])
        x[a:b] += spec.vocal_level * tone
    if raw_genre is None:
        names = TABLE_ROWS[genre]
        raw_genre = names[int(rng.integers(len(names)))]
    return RenderedSong(song_id, genre, raw_genre, np.clip(x, -1.0, 1.0), words, phones, lines)


def general_text(spec: SynthSpec, rng: np.random.Generator) -> list[list[str]]:
    vocab = sorted(set(spec.words) | set(GENERAL_EXTRA_WORDS))
    return [[vocab[int(i)] for i in rng.integers(len(vocab), size=int(rng.integers(5, 13)))]
            for _ in range(spec.general_lines)]


def _write_json(path: str, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def synthesize_corpus(spec: SynthSpec, seed: int, out_dir: str | os.PathLike,
                      genres: Sequence[Genre] = tuple(Genre)) -> dict:
    """Write a corpus under ``out_dir`` and return its manifest.

    Song ``k`` draws from ``SeedSequence([seed, k])`` so output does not
    depend on processing order.
    """
    spec.validate()
    out_dir = str(out_dir)
    for sub in ("audio", "annotations", "words", "phones"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)

    with open(os.path.join(out_dir, "lexicon.txt"), "w", encoding="utf-8") as fh:
        for word in sorted(spec.words):
            fh.write(f"{word}\t{' '.join(spec.words[word])}\n")

    entries = []
    train_lyrics: list[str] = []
    k = 0
    for genre in genres:
        for split, count in (("train", spec.songs_per_genre), ("test", spec.test_songs_per_genre)):
            for i in range(count):
                rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
                k += 1
                song_id = f"{genre.value}_{split}_{i:02d}"
                song = render_song(spec, genre, song_id, rng)
                rel = {"audio": f"audio/{song_id}.wav", "annotation": f"annotations/{song_id}.json",
                       "words": f"words/{song_id}.tsv", "phones": f"phones/{song_id}.tsv"}
                write_wav(os.path.join(out_dir, rel["audio"]), song.samples, spec.sample_rate)
                dump_songs([Song(song_id, genre, song.lines, song.raw_genre, song.duration,
                                 os.path.join(out_dir, rel["audio"]))],
                           os.path.join(out_dir, rel["annotation"]))
                dump_word_tsv(WordBoundaryAnnotation(song_id, tuple(song.words), genre),
                              os.path.join(out_dir, rel["words"]))
                dump_word_tsv(WordBoundaryAnnotation(song_id, tuple(song.phones), genre),
                              os.path.join(out_dir, rel["phones"]))
                if split == "train":
                    train_lyrics.extend(" ".join(ln.text) for ln in song.lines)
                entries.append({"song_id": song_id, "genre": genre.value, "raw_genre": song.raw_genre,
                                "split": split, "duration": song.duration, **rel})

    with open(os.path.join(out_dir, "lyrics_train.txt"), "w", encoding="utf-8") as fh:
        fh.writelines(line + "\n" for line in train_lyrics)
    grng = np.random.default_rng(np.random.SeedSequence([seed, 1_000_003]))
    with open(os.path.join(out_dir, "general.txt"), "w", encoding="utf-8") as fh:
        fh.writelines(" ".join(words) + "\n" for words in general_text(spec, grng))

    manifest = {"seed": seed, "sample_rate": spec.sample_rate, "lexicon": "lexicon.txt",
                "lyrics_text": "lyrics_train.txt", "general_text": "general.txt", "songs": entries}
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest
