"""Forced alignment of lyrics to audio.

Graph layout for words w1..wn (``p`` = silence probability)::

    start -p-> SIL -> w1 -(1-p)-> w2 ... wn -(1-p)-> end
      \\--(1-p)-----/   \\-p-> SIL -/        \\-p-> SIL -> end

Each phone slot becomes parallel chains, one per usable model variant;
with a genre-tagged model set and no genre given, every genre's variant
competes, so the genre choice is made per phone instance on the Viterbi
path. Pronunciation alternatives are parallel chains as well.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .am import AcousticModelSet, Mode, TrainingUtterance
from .audio import AudioBuffer, FeatureConfig, FeatureMatrix, apply_cmvn, extract_mfcc
from .corpus import LineAnnotation, SilenceSegment
from .errors import AlignmentError, LexiconError
from .genre import Genre
from .hmm import Chain, GraphBuilder, StateGraph, graph_weights, viterbi
from .lexicon import SILENCE, Lexicon, words_to_phone_sequences

GENRE_SELECTION = ("phone", "song")


@dataclass(frozen=True)
class AlignOptions:
    optional_silence: bool = True       # between words
    silence_prob: float = 0.5
    edge_silence: bool = True           # before the first and after the last word
    oov: str = "spell"
    genre: Genre | None = None           # restrict every slot to this genre's variants
    genre_selection: str = "phone"       # "song": best single genre for the whole song
    beam: float | None = None

    def __post_init__(self):
        if not 0.0 < self.silence_prob < 1.0:
            raise ValueError("silence_prob must be in (0, 1)")
        if self.genre_selection not in GENRE_SELECTION:
            raise ValueError(f"genre_selection must be one of {GENRE_SELECTION}")


@dataclass(frozen=True)
class AlignGraph:
    words: tuple[str, ...]
    graph: StateGraph
    models: AcousticModelSet


@dataclass(frozen=True)
class AlignedPhone:
    phone: str
    genre: str | None
    start: float
    end: float


@dataclass(frozen=True)
class AlignedWord:
    word: str
    start: float
    end: float
    avg_loglik: float
    phones: tuple[AlignedPhone, ...] = ()

    @property
    def genre_path(self) -> str:
        return "-".join(p.genre or "none" for p in self.phones)


@dataclass(frozen=True)
class AlignmentResult:
    words: tuple[AlignedWord, ...]
    total_loglik: float
    num_frames: int
    song_genre: Genre | None = None
    state_path: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def tokens(self) -> list[str]:
        return [w.word for w in self.words]


def _slot_variants(models: AcousticModelSet, base: str, genre: Genre | None) -> list:
    try:
        return models.variants(base, genre)
    except KeyError as exc:
        raise AlignmentError(str(exc.args[0])) from None


def _sil_chains(b: GraphBuilder, models: AcousticModelSet, genre: Genre | None) -> list[Chain]:
    return [b.add_chain(p) for p in _slot_variants(models, SILENCE, genre)]


def build_state_graph(prons: Sequence[Sequence[Sequence[str]]], models: AcousticModelSet,
                      options: AlignOptions = AlignOptions()) -> StateGraph:
    """Graph for a sequence of words given as pronunciation alternatives.

    An empty sequence yields a silence-only graph (used by the decoding oracle).
    """
    lp, lq = math.log(options.silence_prob), math.log1p(-options.silence_prob)
    edge = options.edge_silence or not prons
    b = GraphBuilder()
    lead = _sil_chains(b, models, options.genre) if edge else []
    for c in lead:
        b.add_entry(c, lp)
    if not prons:
        for c in lead:
            b.add_exit(c)
        b.set_canonical(lead[:1])
        return b.build()

    prev_exits: list[Chain] = []
    canonical: list[Chain] = []
    for wi, alternatives in enumerate(prons):
        entries: list[Chain] = []
        exits: list[Chain] = []
        for pron in alternatives:
            slot_prev: list[Chain] = []
            for si, base in enumerate(pron):
                chains = [b.add_chain(p, wi, si) for p in _slot_variants(models, base, options.genre)]
                if si == 0:
                    entries.extend(chains)
                else:
                    b.connect_all(slot_prev, chains)
                slot_prev = chains
                if pron is alternatives[0]:
                    canonical.append(chains[0])
            exits.extend(slot_prev)
        if wi == 0:
            for c in entries:
                b.add_entry(c, lq if edge else 0.0)
            b.connect_all(lead, entries)
        elif options.optional_silence:
            sil = _sil_chains(b, models, options.genre)
            b.connect_all(prev_exits, sil, lp)
            b.connect_all(prev_exits, entries, lq)
            b.connect_all(sil, entries)
        else:
            b.connect_all(prev_exits, entries)
        prev_exits = exits

    tail = _sil_chains(b, models, options.genre) if edge else []
    b.connect_all(prev_exits, tail, lp)
    for c in prev_exits:
        b.add_exit(c, lq if edge else 0.0)
    for c in tail:
        b.add_exit(c)
    b.set_canonical(canonical)
    return b.build()


def build_align_graph(lyrics: Sequence[str], lex: Lexicon, models: AcousticModelSet,
                      options: AlignOptions = AlignOptions()) -> AlignGraph:
    words = [w.upper() for w in lyrics]
    if not words:
        raise AlignmentError("empty lyrics")
    prons = words_to_phone_sequences(lex, words, options.oov)
    return AlignGraph(tuple(words), build_state_graph(prons, models, options), models)


def _result_from_path(ag: AlignGraph, features: FeatureMatrix, path, emis: np.ndarray) -> AlignmentResult:
    g = ag.graph
    chain_of = g.state_chain[path.states]
    t_of = lambda i: float(features.frame_time(i))  # noqa: E731
    per_frame = emis[np.arange(len(path.states)), path.states]

    # runs of identical chain id = phone instances
    bounds = np.flatnonzero(np.r_[True, chain_of[1:] != chain_of[:-1]])
    runs = [(int(chain_of[s]), int(s), int(e)) for s, e in zip(bounds, np.r_[bounds[1:], len(chain_of)])]
    words: list[AlignedWord] = []
    for wi, word in enumerate(ag.words):
        mine = [(c, s, e) for c, s, e in runs if g.chains[c].word == wi]
        if not mine:
            raise AlignmentError(f"word {word!r} missing from the best path")
        lo, hi = mine[0][1], mine[-1][2]
        phones = tuple(AlignedPhone(g.chains[c].phone.base,
                                    None if g.chains[c].phone.genre is None else g.chains[c].phone.genre.value,
                                    t_of(s), t_of(e)) for c, s, e in mine)
        words.append(AlignedWord(word, t_of(lo), t_of(hi), float(per_frame[lo:hi].mean()), phones))
    return AlignmentResult(tuple(words), path.score, len(path.states), state_path=path.states)


def viterbi_align(graph: AlignGraph, features: FeatureMatrix, beam: float | None = None) -> AlignmentResult:
    """Exact best path (optionally beam-pruned); word times in seconds.

    A word starts at the stamp of its first frame and ends at the stamp
    just after its last frame.
    """
    x = features.frames
    emis = graph.models.graph_log_likelihoods(graph.graph, x)
    weights = graph_weights(graph.graph, graph.models.log_transitions_for(graph.graph))
    path = viterbi(graph.graph, emis, weights, beam)
    if path is None:
        need = graph.graph.min_frames()
        raise AlignmentError(f"no feasible path: {len(x)} frames, graph needs at least {need}")
    return _result_from_path(graph, features, path, emis)


def align_features(lyrics: Sequence[str], features: FeatureMatrix, models: AcousticModelSet,
                   lex: Lexicon, options: AlignOptions = AlignOptions()) -> AlignmentResult:
    if models.feature_fingerprint and features.fingerprint and models.feature_fingerprint != features.fingerprint:
        raise AlignmentError("feature configuration differs from the one the models were trained on")
    if options.genre_selection == "song" and options.genre is None and models.mode is not Mode.GENRE_AGNOSTIC:
        best = None
        for g in models.genres:
            opts = replace(options, genre=g, genre_selection="phone")
            res = viterbi_align(build_align_graph(lyrics, lex, models, opts), features, options.beam)
            if best is None or res.total_loglik > best.total_loglik:
                best = AlignmentResult(res.words, res.total_loglik, res.num_frames, g, res.state_path)
        return best
    return viterbi_align(build_align_graph(lyrics, lex, models, options), features, options.beam)


def song_features(audio: AudioBuffer, config: FeatureConfig | None = None) -> FeatureMatrix:
    return apply_cmvn(extract_mfcc(audio, config))


def align_song(audio: AudioBuffer, lyrics: Sequence[str], models: AcousticModelSet, lex: Lexicon,
               config: FeatureConfig | None = None, options: AlignOptions = AlignOptions()) -> AlignmentResult:
    """MFCC -> CMVN -> graph -> Viterbi over the whole song."""
    return align_features(lyrics, song_features(audio, config), models, lex, options)


# ------------------------------------------------------------------ training graphs

def training_utterances(song_id: str, genre: Genre, features: FeatureMatrix,
                        lines: Sequence[LineAnnotation], silences: Sequence[SilenceSegment],
                        lex: Lexicon, models: AcousticModelSet,
                        optional_silence: bool = True, silence_prob: float = 0.5) -> list[TrainingUtterance]:
    """One utterance per annotated line plus one per non-vocal segment.

    Graphs use the song's genre variants only, so a genre-tagged model is
    only ever trained on songs of its genre. Line graphs have no edge
    silence, so silence models see only non-vocal segments and optional
    inter-word pauses. Transcripts must be fully covered by the lexicon.
    """
    opts = AlignOptions(optional_silence, silence_prob, edge_silence=False, oov="strict",
                        genre=None if models.mode is Mode.GENRE_AGNOSTIC else genre)
    out = []
    for i, line in enumerate(lines):
        lo, hi = features.frame_range(line.line_start, line.line_end)
        try:
            graph = build_align_graph(line.text, lex, models, opts).graph
        except LexiconError as exc:
            raise LexiconError(f"{song_id} line {i}: {exc}") from None
        out.append(TrainingUtterance(f"{song_id}/line{i:04d}", features.frames[lo:hi], graph, genre))
    for i, seg in enumerate(silences):
        lo, hi = features.frame_range(seg.start, seg.end)
        b = GraphBuilder()
        sil = _sil_chains(b, models, opts.genre)
        for c in sil:
            b.add_entry(c)
            b.add_exit(c)
        b.set_canonical(sil[:1])
        out.append(TrainingUtterance(f"{song_id}/sil{i:04d}", features.frames[lo:hi], b.build(), genre))
    return out


# ------------------------------------------------------------------ output formats

def format_alignment_tsv(result: AlignmentResult) -> str:
    return "".join(f"{w.start:.3f}\t{w.end:.3f}\t{w.word}\t{w.avg_loglik:.4f}\t{w.genre_path}\n"
                   for w in result.words)


def alignment_to_dict(result: AlignmentResult) -> dict:
    return {
        "total_loglik": result.total_loglik,
        "num_frames": result.num_frames,
        "song_genre": None if result.song_genre is None else result.song_genre.value,
        "words": [
            {"word": w.word, "start": w.start, "end": w.end, "avg_loglik": w.avg_loglik,
             "phones": [{"phone": p.phone, "genre": p.genre, "start": p.start, "end": p.end} for p in w.phones]}
            for w in result.words
        ],
    }


def write_alignment(result: AlignmentResult, path: str | os.PathLike) -> None:
    path = str(path)
    if path.endswith(".json"):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(alignment_to_dict(result), fh, indent=1)
            fh.write("\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(format_alignment_tsv(result))
