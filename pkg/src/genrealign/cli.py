"""Command-line entry point.

Subcommands::

    synth          write a synthetic 3-genre corpus
    prep           validate a corpus; write a prep manifest with genres and silence segments
    train          train an acoustic model set in one of the three modes
    align          force-align lyrics to audio
    decode         transcribe songs with a lexicon-tree beam search
    train-lm       train an N-gram LM and write ARPA
    eval           score alignments/transcripts and print per-dataset, per-genre tables
    inspect-model  human-readable model dump

A TOML file given with ``--config`` supplies defaults; command-line flags
override it. Relative paths in the config resolve against the config file's
directory. Exit codes: 0 success, 1 data/configuration error, 2 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.io import wavfile

from . import __version__
from .align import (AlignOptions, align_features, alignment_to_dict, format_alignment_tsv, song_features,
                    training_utterances)
from .am import (Mode, TrainSchedule, describe_models, flat_start, load_models, model_inventory, save_models,
                 train_em)
from .audio import FeatureConfig, FeatureMatrix, feature_config_from_dict, load_audio, tomllib
from .corpus import (LineAnnotation, SilenceSegment, Song, WordBoundaryAnnotation, WordSpan, load_songs,
                     load_word_tsv, partition_timeline)
from .decode import DecodeConfig, beam_decode, build_decode_network, format_hypotheses
from .errors import AnnotationError, DataError, GenreAlignError
from .evaluation import AE_MODES, build_report, format_comparison, report_from_dict
from .genre import Genre, GenreMap, load_genre_map
from .lexicon import load_lexicon, words_to_phone_sequences
from .lm import export_arpa, import_arpa, read_corpus, train_ngram, write_vocab
from .synth import SynthSpec, synthesize_corpus
from .text import normalize_words

log = logging.getLogger("genrealign")

CACHE_ENV = "GENREALIGN_CACHE"
PREP_VERSION = 1


class ConfigError(DataError):
    pass


# ------------------------------------------------------------------ config

@dataclass
class PipelineConfig:
    corpus: str | None = None
    lexicon: str | None = None
    genre_map: str | None = None
    model_dir: str | None = None
    lyrics_lm: str | None = None
    general_lm: str | None = None
    mode: Mode = Mode.GENRE_SILENCE_PHONE
    seed: int = 0
    features: FeatureConfig = field(default_factory=FeatureConfig)
    train: dict = field(default_factory=dict)
    align: dict = field(default_factory=dict)
    decode: dict = field(default_factory=dict)
    lm: dict = field(default_factory=dict)

    def validate(self) -> None:
        for name in ("corpus", "lexicon", "genre_map", "lyrics_lm", "general_lm"):
            path = getattr(self, name)
            if path is not None and not os.path.exists(path):
                raise ConfigError(f"config path {name} = {path!r} does not exist")


_SECTION_KEYS = {
    "train": {"iterations", "split_at", "max_components", "optional_silence", "silence_prob"},
    "align": {"silence_prob", "optional_silence", "genre_selection", "beam", "oov"},
    "decode": {"beam", "max_active", "lm_weight", "word_insertion_penalty", "silence_prob"},
    "lm": {"order", "discount"},
}


def load_config(path: str | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = os.path.dirname(os.path.abspath(path))
    cfg = PipelineConfig()
    unknown = set(doc) - {"paths", "mode", "seed", "features", *_SECTION_KEYS}
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    paths = doc.get("paths", {})
    bad = set(paths) - {"corpus", "lexicon", "genre_map", "model_dir", "lyrics_lm", "general_lm"}
    if bad:
        raise ConfigError(f"{path}: unknown [paths] keys {sorted(bad)}")
    for key, value in paths.items():
        setattr(cfg, key, os.path.normpath(os.path.join(base, value)))
    try:
        cfg.mode = Mode(doc.get("mode", cfg.mode.value))
        cfg.seed = int(doc.get("seed", 0))
        cfg.features = feature_config_from_dict(doc.get("features", {}))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section, keys in _SECTION_KEYS.items():
        table = doc.get(section, {})
        bad = set(table) - keys
        if bad:
            raise ConfigError(f"{path}: unknown [{section}] keys {sorted(bad)}")
        setattr(cfg, section, dict(table))
    cfg.validate()
    return cfg


def _pick(flag: Any, section: dict, key: str, default: Any) -> Any:
    if flag is not None:
        return flag
    return section.get(key, default)


def _need(value: Any, what: str) -> Any:
    if value is None:
        raise ConfigError(f"{what} is required (flag or config)")
    return value


# ------------------------------------------------------------------ io helpers

def _atomic_write(path: str, text: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _json_text(doc: Any) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _wav_duration(path: str) -> float:
    try:
        rate, data = wavfile.read(path, mmap=True)
    except FileNotFoundError:
        raise DataError(f"audio file {path} not found") from None
    except ValueError as exc:
        raise DataError(f"{path}: unreadable WAV ({exc})") from None
    return len(data) / float(rate)


def _parallel_map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _cache_dir(args) -> str | None:
    return getattr(args, "cache_dir", None) or os.environ.get(CACHE_ENV) or None


@dataclass(frozen=True)
class _FeatureJob:
    audio: str
    config: FeatureConfig
    cache: str | None


def _run_job(job: _FeatureJob) -> FeatureMatrix:
    return compute_features(job.audio, job.config, job.cache)


def compute_features(audio: str, config: FeatureConfig, cache: str | None = None) -> FeatureMatrix:
    """MFCC + CMVN for one file, memoized under ``cache`` by path, size, mtime and config."""
    key = None
    if cache:
        st = os.stat(audio)
        ident = f"{os.path.abspath(audio)}|{st.st_size}|{st.st_mtime_ns}|{config.fingerprint()}"
        key = os.path.join(cache, "features", hashlib.sha256(ident.encode()).hexdigest()[:32] + ".npz")
        if os.path.exists(key):
            with np.load(key) as z:
                return FeatureMatrix(z["frames"], float(z["hop"]), float(z["length"]), float(z["offset"]),
                                     config.fingerprint())
    feats = song_features(load_audio(audio, config.sample_rate), config)
    if key:
        os.makedirs(os.path.dirname(key), exist_ok=True)
        tmp = key + f".{os.getpid()}.tmp.npz"
        np.savez(tmp, frames=feats.frames, hop=feats.frame_hop, length=feats.frame_length,
                 offset=feats.start_offset)
        os.replace(tmp, key)
    return feats


def features_for(songs: Sequence[dict], config: FeatureConfig, jobs: int, cache: str | None) -> list[FeatureMatrix]:
    for s in songs:
        if not s.get("audio"):
            raise DataError(f"song {s['song_id']} has no audio path")
        if not os.path.exists(s["audio"]):
            raise DataError(f"audio file {s['audio']} not found")
    return _parallel_map(_run_job, [_FeatureJob(s["audio"], config, cache) for s in songs], jobs)


# ------------------------------------------------------------------ prep manifest

def _read_corpus(path: str, genre_map: GenreMap | None) -> list[tuple[Song, dict]]:
    """Songs plus extra fields (split, word TSV path) from a synth manifest,
    an annotation JSON file, or a directory of annotation files."""
    if os.path.isdir(path):
        files = sorted(os.path.join(path, f) for f in os.listdir(path) if f.endswith(".json"))
        if not files:
            raise AnnotationError(f"{path}: no annotation JSON files")
        return [(s, {}) for f in files for s in load_songs(f, genre_map)]
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"corpus {path} not found") from None
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(doc, dict) and isinstance(doc.get("songs"), list):
        base = os.path.dirname(os.path.abspath(path))
        out = []
        for i, entry in enumerate(doc["songs"]):
            if not isinstance(entry, dict) or "annotation" not in entry:
                raise AnnotationError(f"{path}: songs[{i}] lacks an annotation path")
            extra = {"split": entry.get("split")}
            if entry.get("words"):
                extra["words"] = os.path.normpath(os.path.join(base, entry["words"]))
            for song in load_songs(os.path.join(base, entry["annotation"]), genre_map):
                out.append((song, extra))
        return out
    return [(s, {}) for s in load_songs(path, genre_map)]


def prepare(corpus: str, genre_map: GenreMap | None = None, min_silence: float = 0.1,
            max_silence: float = 10.0, dataset: str = "all", words_dir: str | None = None) -> dict:
    songs = _read_corpus(corpus, genre_map)
    seen: set[str] = set()
    out = []
    for song, extra in songs:
        if song.song_id in seen:
            raise AnnotationError(f"duplicate song_id {song.song_id!r}")
        seen.add(song.song_id)
        duration = song.duration
        if song.audio and not os.path.exists(song.audio):
            raise DataError(f"{song.song_id}: audio file {song.audio} not found")
        if duration is None:
            if not song.audio:
                raise AnnotationError(f"{song.song_id}: needs a duration or an audio file")
            duration = _wav_duration(song.audio)
        if song.lines and song.lines[-1].line_end > duration + 1e-6:
            raise AnnotationError(f"{song.song_id}: lines extend past the audio ({duration:.3f} s)")
        words = extra.get("words")
        if words is None and words_dir:
            cand = os.path.join(words_dir, f"{song.song_id}.tsv")
            words = cand if os.path.exists(cand) else None
        if words is not None:
            load_word_tsv(words, song.song_id)   # validate now
        segs, dropped = partition_timeline(song.lines, duration, min_silence, max_silence)
        out.append({
            "song_id": song.song_id, "genre": song.genre.value, "raw_genre": song.raw_genre,
            "dataset": dataset, "split": extra.get("split") or "all",
            "audio": song.audio, "duration": duration, "words": words,
            "lines": [{"start": ln.line_start, "end": ln.line_end, "text": " ".join(ln.text)} for ln in song.lines],
            "silence": [[s.start, s.end] for s in segs],
            "dropped": [list(d) for d in dropped],
        })
    out.sort(key=lambda s: s["song_id"])
    counts = {g.value: sum(1 for s in out if s["genre"] == g.value) for g in Genre}
    return {"version": PREP_VERSION, "songs": out, "genre_counts": counts,
            "min_silence": min_silence, "max_silence": max_silence}


def load_prep(path: str, split: str | None = None) -> list[dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"prep manifest {path} not found") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("version") != PREP_VERSION:
        raise DataError(f"{path}: not a prep manifest (run `genrealign prep`)")
    songs = doc["songs"]
    if split and split != "all":
        songs = [s for s in songs if s["split"] == split]
        if not songs:
            raise DataError(f"{path}: no songs in split {split!r}")
    return songs


def _lines(song: dict) -> list[LineAnnotation]:
    g = Genre(song["genre"])
    return [LineAnnotation(song["song_id"], ln["start"], ln["end"], tuple(normalize_words(ln["text"])), g)
            for ln in song["lines"]]


def _lyrics(song: dict) -> list[str]:
    if song.get("words"):
        return load_word_tsv(song["words"], song["song_id"]).tokens
    return [w for ln in _lines(song) for w in ln.text]


# ------------------------------------------------------------------ commands

def cmd_synth(args, cfg: PipelineConfig) -> int:
    spec = SynthSpec(songs_per_genre=args.songs_per_genre, test_songs_per_genre=args.test_songs_per_genre,
                     lines_per_song=args.lines_per_song)
    spec.validate()
    seed = _pick(args.seed, {}, "", cfg.seed)
    man = synthesize_corpus(spec, seed, args.out)
    print(f"wrote {len(man['songs'])} songs to {args.out} (seed {seed})")
    return 0


def cmd_prep(args, cfg: PipelineConfig) -> int:
    corpus = _need(args.corpus or cfg.corpus, "--corpus")
    gmap_path = args.genre_map or cfg.genre_map
    gmap = load_genre_map(gmap_path) if gmap_path else None
    doc = prepare(corpus, gmap, args.min_silence, args.max_silence, args.dataset, args.words_dir)
    _atomic_write(args.out, _json_text(doc))
    counts = ", ".join(f"{k}={v}" for k, v in doc["genre_counts"].items())
    print(f"{len(doc['songs'])} songs ({counts}) -> {args.out}")
    return 0


def _schedule(args, cfg: PipelineConfig) -> TrainSchedule:
    t = cfg.train
    split_at = args.split_at if args.split_at is not None else t.get("split_at", [4, 8, 12])
    return TrainSchedule(iterations=_pick(args.iterations, t, "iterations", 20),
                         split_at=tuple(int(v) for v in split_at),
                         max_components=_pick(args.max_components, t, "max_components", 8))


def cmd_train(args, cfg: PipelineConfig) -> int:
    mode = Mode(args.mode) if args.mode else cfg.mode
    lex = load_lexicon(_need(args.lexicon or cfg.lexicon, "--lexicon"))
    songs = load_prep(args.prep, args.split)
    schedule = _schedule(args, cfg)
    silence_prob = _pick(args.silence_prob, cfg.train, "silence_prob", 0.5)
    optional = not args.no_optional_silence and cfg.train.get("optional_silence", True)
    out = args.out or (os.path.join(cfg.model_dir, f"{mode.value}.json") if cfg.model_dir else None)
    out = _need(out, "--out")

    # validate transcripts before any heavy work or output
    for s in songs:
        for ln in _lines(s):
            words_to_phone_sequences(lex, ln.text, "strict")

    feats = features_for(songs, cfg.features, args.jobs, _cache_dir(args))
    inventory = model_inventory(lex.base_phones, list(Genre), mode)
    models = flat_start(inventory, [f.frames for f in feats], mode, cfg.features.fingerprint())
    utts = []
    for s, f in zip(songs, feats):
        segs = [_silence(s, a, b) for a, b in s["silence"]]
        utts += training_utterances(s["song_id"], Genre(s["genre"]), f, _lines(s), segs, lex, models,
                                    optional_silence=optional, silence_prob=silence_prob)
    result = train_em(models, utts, schedule)
    save_models(result.models, out)
    log_doc = {
        "mode": mode.value, "songs": [s["song_id"] for s in songs],
        "schedule": {"iterations": schedule.iterations, "split_at": list(schedule.split_at),
                     "max_components": schedule.max_components},
        "history": [{"iteration": h.iteration, "log_likelihood": h.log_likelihood, "frames": h.frames,
                     "per_frame": h.per_frame, "split_after": h.split_after,
                     "zero_occupancy": h.zero_occupancy} for h in result.history],
        "skipped": result.skipped,
    }
    _atomic_write(f"{out}.log.json", _json_text(log_doc))
    print(f"trained {mode.value} on {len(songs)} songs; "
          f"final log-likelihood/frame {result.history[-1].per_frame:.4f} -> {out}")
    return 0


def _silence(song: dict, a: float, b: float) -> SilenceSegment:
    return SilenceSegment(song["song_id"], a, b, Genre(song["genre"]))


def _align_options(args, cfg: PipelineConfig) -> AlignOptions:
    a = cfg.align
    return AlignOptions(optional_silence=a.get("optional_silence", True),
                        silence_prob=_pick(args.silence_prob, a, "silence_prob", 0.5),
                        oov=_pick(args.oov, a, "oov", "spell"),
                        genre_selection=_pick(args.genre_selection, a, "genre_selection", "phone"),
                        beam=_pick(args.beam, a, "beam", None))


def cmd_align(args, cfg: PipelineConfig) -> int:
    lex = load_lexicon(_need(args.lexicon or cfg.lexicon, "--lexicon"))
    models = load_models(args.model, cfg.features.fingerprint())
    opts = _align_options(args, cfg)
    if args.audio:
        if not args.lyrics:
            raise ConfigError("--audio needs --lyrics")
        with open(args.lyrics, encoding="utf-8") as fh:
            words = normalize_words(fh.read())
        feats = compute_features(args.audio, cfg.features, _cache_dir(args))
        res = align_features(words, feats, models, lex, opts)
        text = _json_text(alignment_to_dict(res)) if args.format == "json" else format_alignment_tsv(res)
        _atomic_write(args.out, text)
        return 0
    songs = load_prep(_need(args.prep, "--prep or --audio"), args.split)
    lyrics = [_lyrics(s) for s in songs]
    for s, words in zip(songs, lyrics):
        words_to_phone_sequences(lex, words, opts.oov)
    feats = features_for(songs, cfg.features, args.jobs, _cache_dir(args))
    results = [align_features(w, f, models, lex, opts) for w, f in zip(lyrics, feats)]
    os.makedirs(args.out, exist_ok=True)
    for s, res in zip(songs, results):
        if args.format == "json":
            _atomic_write(os.path.join(args.out, f"{s['song_id']}.json"), _json_text(alignment_to_dict(res)))
        else:
            _atomic_write(os.path.join(args.out, f"{s['song_id']}.tsv"), format_alignment_tsv(res))
    print(f"aligned {len(songs)} songs -> {args.out}")
    return 0


def _decode_config(args, cfg: PipelineConfig) -> DecodeConfig:
    d = cfg.decode
    return DecodeConfig(beam=_pick(args.beam, d, "beam", 2000.0),
                        max_active=_pick(args.max_active, d, "max_active", 20000),
                        lm_weight=_pick(args.lm_weight, d, "lm_weight", 10.0),
                        word_insertion_penalty=_pick(args.word_insertion_penalty, d, "word_insertion_penalty", 0.0),
                        silence_prob=_pick(args.silence_prob, d, "silence_prob", 0.5))


def cmd_decode(args, cfg: PipelineConfig) -> int:
    lex = load_lexicon(_need(args.lexicon or cfg.lexicon, "--lexicon"))
    models = load_models(args.model, cfg.features.fingerprint())
    lm = import_arpa(_need(args.lm or cfg.lyrics_lm, "--lm"))
    dcfg = _decode_config(args, cfg)
    songs = load_prep(args.prep, args.split)
    net = build_decode_network(lex, models, dcfg.silence_prob)
    feats = features_for(songs, cfg.features, args.jobs, _cache_dir(args))
    results = [(s["song_id"], beam_decode(net, f, lm, dcfg)) for s, f in zip(songs, feats)]
    _atomic_write(args.out, format_hypotheses(results))
    print(f"decoded {len(songs)} songs -> {args.out}")
    return 0


def cmd_train_lm(args, cfg: PipelineConfig) -> int:
    corpus = [line for path in args.text for line in read_corpus(path)]
    if not corpus:
        raise DataError("training text is empty")
    vocab = load_lexicon(args.vocab_lexicon).words if args.vocab_lexicon else None
    model = train_ngram(corpus, _pick(args.order, cfg.lm, "order", 3),
                        _pick(args.discount, cfg.lm, "discount", 0.75), vocab)
    export_arpa(model, args.out)
    if args.vocab_out:
        write_vocab(model, args.vocab_out)
    counts = ", ".join(f"{k + 1}-grams={n}" for k, n in enumerate(model.counts_by_order()))
    print(f"{len(corpus)} sentences, {counts} -> {args.out}")
    return 0


def read_hypotheses(path: str) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            song_id, _, text = line.rstrip("\n").partition("\t")
            if song_id in out:
                raise DataError(f"{path}:{lineno}: duplicate song_id {song_id!r}")
            out[song_id] = normalize_words(text)
    return out


def _read_alignment(path: str, song_id: str) -> WordBoundaryAnnotation:
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        spans = tuple(WordSpan(w["word"], w["start"], w["end"]) for w in doc["words"])
        return WordBoundaryAnnotation(song_id, spans)
    return load_word_tsv(path, song_id)


def cmd_eval(args, cfg: PipelineConfig) -> int:
    if not args.alignments and not args.hyps:
        raise ConfigError("give --alignments and/or --hyps")
    songs = load_prep(args.prep, args.split)
    refs, aligned, genres, datasets = {}, {}, {}, {}
    transcripts = read_hypotheses(args.hyps) if args.hyps else {}
    for s in songs:
        sid = s["song_id"]
        genres[sid], datasets[sid] = s["genre"], s["dataset"]
        if s.get("words"):
            refs[sid] = load_word_tsv(s["words"], sid, Genre(s["genre"]))
        elif args.alignments:
            raise DataError(f"{sid}: no word-boundary reference for AE")
        else:
            refs[sid] = [w for ln in _lines(s) for w in ln.text]
        if args.alignments:
            cands = [os.path.join(args.alignments, f"{sid}{ext}") for ext in (".tsv", ".json")]
            found = next((c for c in cands if os.path.exists(c)), None)
            if found is None:
                raise DataError(f"no alignment for {sid} in {args.alignments}")
            aligned[sid] = _read_alignment(found, sid)
    if args.hyps:
        missing = set(refs) - set(transcripts)
        if missing:
            raise DataError(f"{args.hyps}: no hypothesis for {', '.join(sorted(missing))}")
        transcripts = {k: v for k, v in transcripts.items() if k in refs}
    report = build_report(refs, aligned, genres, args.system, transcripts=transcripts,
                          datasets=datasets, ae_mode=args.ae_mode)
    others = [report_from_dict(json.load(open(p, encoding="utf-8"))) for p in args.compare or []]
    if args.json:
        _atomic_write(args.json, report.to_json())
    if args.csv:
        _atomic_write(args.csv, report.to_csv())
    if args.chart:
        _atomic_write(args.chart, _json_text(report.genre_chart_data()))
    print(format_comparison([*others, report]))
    return 0


def cmd_inspect_model(args, cfg: PipelineConfig) -> int:
    models = load_models(args.model)
    text = describe_models(models)
    if args.phone:
        picked, on = [], False
        for ln in text.splitlines():
            if not ln.startswith(" "):
                on = ln.startswith(f"{args.phone}: ")
            if on:
                picked.append(ln)
        if not picked:
            raise DataError(f"no phone {args.phone!r} in {args.model}")
        text = "\n".join(picked) + "\n"
    sys.stdout.write(text)
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="genrealign", description="Genre-informed lyrics alignment and transcription.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="TOML config file supplying defaults")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for per-song work")
    p.add_argument("--cache-dir", help=f"feature cache directory (default: ${CACHE_ENV}, unset = no cache)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--songs-per-genre", type=int, default=5)
    s.add_argument("--test-songs-per-genre", type=int, default=2)
    s.add_argument("--lines-per-song", type=int, default=4)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("prep", help="validate a corpus and write a prep manifest")
    s.add_argument("--corpus", help="synth manifest, annotation JSON, or directory of annotation JSON files")
    s.add_argument("--out", required=True)
    s.add_argument("--genre-map", help="TSV overriding the built-in genre table")
    s.add_argument("--words-dir", help="directory with <song_id>.tsv word references")
    s.add_argument("--dataset", default="all", help="dataset label for reports")
    s.add_argument("--min-silence", type=float, default=0.1)
    s.add_argument("--max-silence", type=float, default=10.0)
    s.set_defaults(func=cmd_prep)

    s = sub.add_parser("train", help="train an acoustic model set")
    s.add_argument("--prep", required=True)
    s.add_argument("--split", default="train", help="songs to use ('all' for every song)")
    s.add_argument("--mode", choices=[m.value for m in Mode])
    s.add_argument("--lexicon")
    s.add_argument("--out")
    s.add_argument("--iterations", type=int)
    s.add_argument("--split-at", type=int, nargs="*")
    s.add_argument("--max-components", type=int)
    s.add_argument("--silence-prob", type=float)
    s.add_argument("--no-optional-silence", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("align", help="force-align lyrics")
    s.add_argument("--model", required=True)
    s.add_argument("--lexicon")
    s.add_argument("--prep")
    s.add_argument("--split", default="test")
    s.add_argument("--audio", help="single WAV instead of --prep")
    s.add_argument("--lyrics", help="lyrics text file for --audio")
    s.add_argument("--out", required=True, help="output directory (file with --audio)")
    s.add_argument("--format", choices=["tsv", "json"], default="tsv")
    s.add_argument("--genre-selection", choices=["phone", "song"])
    s.add_argument("--silence-prob", type=float)
    s.add_argument("--beam", type=float)
    s.add_argument("--oov", choices=["strict", "spell"])
    s.set_defaults(func=cmd_align)

    s = sub.add_parser("decode", help="transcribe songs")
    s.add_argument("--model", required=True)
    s.add_argument("--lexicon")
    s.add_argument("--lm", help="ARPA language model")
    s.add_argument("--prep", required=True)
    s.add_argument("--split", default="test")
    s.add_argument("--out", required=True)
    s.add_argument("--beam", type=float)
    s.add_argument("--max-active", type=int)
    s.add_argument("--lm-weight", type=float)
    s.add_argument("--word-insertion-penalty", type=float)
    s.add_argument("--silence-prob", type=float)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("train-lm", help="train an N-gram LM")
    s.add_argument("--text", nargs="+", required=True, help="text files, one sentence per line")
    s.add_argument("--out", required=True)
    s.add_argument("--order", type=int)
    s.add_argument("--discount", type=float)
    s.add_argument("--vocab-lexicon", help="add every lexicon word to the vocabulary")
    s.add_argument("--vocab-out", help="write the token list here")
    s.set_defaults(func=cmd_train_lm)

    s = sub.add_parser("eval", help="score alignments and/or transcripts")
    s.add_argument("--prep", required=True)
    s.add_argument("--split", default="test")
    s.add_argument("--alignments", help="directory of <song_id>.tsv/.json alignments")
    s.add_argument("--hyps", help="hypothesis file: song_id<TAB>words")
    s.add_argument("--system", default="system")
    s.add_argument("--ae-mode", choices=AE_MODES, default="start")
    s.add_argument("--json")
    s.add_argument("--csv")
    s.add_argument("--chart", help="per-genre chart data (JSON)")
    s.add_argument("--compare", nargs="*", help="earlier report JSON files to show alongside")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("inspect-model", help="print a model set")
    s.add_argument("model")
    s.add_argument("--phone", help="only this phone, e.g. SIL@pop")
    s.set_defaults(func=cmd_inspect_model)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (GenreAlignError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001
        log.exception("internal error")
        return 2


if __name__ == "__main__":
    sys.exit(main())
