"""Lyrics transcription by token passing over a phone prefix tree.

The search space is the union of forced-alignment graphs over all word
sequences: an optional silence before the first word, optional silence
between words and after the last one, with the same ``silence_prob``
constants as :func:`genrealign.align.build_state_graph`. Each active LM
history owns one row of state scores over the shared network; the LM is
applied when a token leaves a word end, as
``lm_weight * ln(10) * log10 P(w | h) + word_insertion_penalty``.

With an unbounded beam the result is the exact best word sequence under
that combined score.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .am import AcousticModelSet
from .audio import FeatureMatrix
from .errors import DecodeError, LexiconError
from .genre import Genre
from .hmm import Chain, GraphBuilder, StateGraph, graph_weights
from .lexicon import SILENCE, Lexicon
from .lm import BOS, EOS, NgramModel

log = logging.getLogger(__name__)

LN10 = math.log(10.0)
NEG_INF = -np.inf


@dataclass(frozen=True)
class DecodeConfig:
    beam: float = 2000.0
    max_active: int = 20000
    lm_weight: float = 10.0
    word_insertion_penalty: float = 0.0
    silence_prob: float = 0.5
    genre: Genre | None = None

    def __post_init__(self):
        if not self.beam > 0:
            raise ValueError("beam must be > 0")
        if self.max_active < 1:
            raise ValueError("max_active must be >= 1")
        if self.lm_weight < 0:
            raise ValueError("lm_weight must be >= 0")
        if not 0.0 < self.silence_prob < 1.0:
            raise ValueError("silence_prob must be in (0, 1)")


@dataclass(frozen=True)
class TranscriptResult:
    words: tuple[str, ...]
    score: float
    word_times: tuple[tuple[float, float], ...] = ()
    complete: bool = True        # False: no token reached the end; partial traceback

@dataclass(frozen=True)
class DecodeNetwork:
    graph: StateGraph
    models: AcousticModelSet
    words: tuple[str, ...]
    num_nodes: int                      # prefix-tree nodes (phone slots)
    root_states: np.ndarray
    sil_entry_states: np.ndarray
    sil_exit: np.ndarray                # indices into graph.exit_state
    word_exits: tuple[np.ndarray, ...]  # per word, indices into graph.exit_state
    silence_prob: float


def _variants(models: AcousticModelSet, base: str, genre: Genre | None) -> list:
    try:
        return models.variants(base, genre)
    except KeyError as exc:
        raise LexiconError(str(exc.args[0])) from None


def build_decode_network(lex: Lexicon, models: AcousticModelSet, silence_prob: float = 0.5,
                         genre: Genre | None = None) -> DecodeNetwork:
    """Prefix tree over all pronunciations, each node a set of parallel genre-variant chains."""
    if not lex.words:
        raise LexiconError("empty lexicon")
    b = GraphBuilder()
    sil = [b.add_chain(p) for p in _variants(models, SILENCE, genre)]
    nodes: dict[tuple[str, ...], list[Chain]] = {}
    words = tuple(sorted(lex.words))
    ends: dict[str, list[Chain]] = {}
    for wi, word in enumerate(words):
        for pron in lex.pronunciations(word):
            parent: list[Chain] | None = None
            for k in range(1, len(pron) + 1):
                key = tuple(pron[:k])
                if key not in nodes:
                    nodes[key] = [b.add_chain(p, wi, k - 1) for p in _variants(models, pron[k - 1], genre)]
                    if parent is not None:
                        b.connect_all(parent, nodes[key])
                parent = nodes[key]
            ends.setdefault(word, []).extend(parent)
    roots = [c for key, cs in nodes.items() if len(key) == 1 for c in cs]
    for c in roots + sil:
        b.add_entry(c)
    for c in sil + [c for w in words for c in ends[w]]:
        b.add_exit(c)
    graph = b.build()
    exit_pos = {int(s): i for i, s in enumerate(graph.exit_state)}
    return DecodeNetwork(
        graph=graph, models=models, words=words, num_nodes=len(nodes),
        root_states=np.array(sorted(c.first for c in roots), dtype=np.int64),
        sil_entry_states=np.array([c.first for c in sil], dtype=np.int64),
        sil_exit=np.array([exit_pos[c.last] for c in sil], dtype=np.int64),
        word_exits=tuple(np.array(sorted({exit_pos[c.last] for c in ends[w]}), dtype=np.int64) for w in words),
        silence_prob=silence_prob,
    )


@dataclass
class _Link:
    word: str
    start: int
    end: int          # exclusive frame index
    prev: int


class _Rows:
    """Per-history score/link/start-frame rows."""

    def __init__(self, num_states: int):
        self.S = num_states
        self.hist: list[tuple[str, ...]] = []
        self.index: dict[tuple[str, ...], int] = {}
        self.score = np.zeros((0, num_states))
        self.link = np.zeros((0, num_states), dtype=np.int64)
        self.start = np.zeros((0, num_states), dtype=np.int64)

    def row(self, h: tuple[str, ...]) -> int:
        i = self.index.get(h)
        if i is None:
            i = len(self.hist)
            self.index[h] = i
            self.hist.append(h)
            self.score = np.vstack([self.score, np.full((1, self.S), NEG_INF)])
            self.link = np.vstack([self.link, np.full((1, self.S), -1, dtype=np.int64)])
            self.start = np.vstack([self.start, np.zeros((1, self.S), dtype=np.int64)])
        return i

    def keep(self, mask: np.ndarray) -> None:
        self.hist = [h for h, k in zip(self.hist, mask) if k]
        self.index = {h: i for i, h in enumerate(self.hist)}
        self.score, self.link, self.start = self.score[mask], self.link[mask], self.start[mask]


def beam_decode(network: DecodeNetwork, features: FeatureMatrix | np.ndarray, lm: NgramModel,
                config: DecodeConfig = DecodeConfig()) -> TranscriptResult:
    """Best word sequence under acoustic + weighted LM score."""
    x = features.frames if isinstance(features, FeatureMatrix) else np.asarray(features)
    if len(x) == 0:
        raise DecodeError("no feature frames to decode")
    g = network.graph
    models = network.models
    emis = models.graph_log_likelihoods(g, x)
    w = graph_weights(g, models.log_transitions_for(g))
    lp, lq = math.log(network.silence_prob), math.log1p(-network.silence_prob)
    lm_scale = config.lm_weight * LN10
    T, S = emis.shape

    starts = np.flatnonzero(np.r_[True, g.arc_dst[1:] != g.arc_dst[:-1]])
    dsts = g.arc_dst[starts]
    sizes = np.diff(np.r_[starts, len(g.arc_dst)])
    n_arcs = len(g.arc_src)
    arc_index = np.arange(n_arcs)
    exit_states = g.exit_state
    word_exit_lists = network.word_exits
    lm_cache: dict[tuple[tuple[str, ...], int], tuple[float, tuple[str, ...]]] = {}

    def lm_step(h: tuple[str, ...], wi: int) -> tuple[float, tuple[str, ...]]:
        key = (h, wi)
        hit = lm_cache.get(key)
        if hit is None:
            word = network.words[wi]
            score = lm_scale * lm.log10_prob(word, h) + config.word_insertion_penalty
            hit = (score, lm.state(h + (lm.map_word(word),)))
            lm_cache[key] = hit
        return hit

    links: list[_Link] = []
    rows = _Rows(S)
    r0 = rows.row(lm.state((BOS,)))
    rows.score[r0, network.root_states] = lq
    rows.score[r0, network.sil_entry_states] = lp
    rows.score[r0] += emis[0]

    def boundaries(t_end: int):
        """Word-end and silence-exit scores of the current rows after frame ``t_end``."""
        ex = rows.score[:, exit_states] + w.exit                    # (H, E)
        sil_best = ex[:, network.sil_exit]
        si = np.argmax(sil_best, axis=1)
        b_sil = sil_best[np.arange(len(rows.hist)), si]
        sil_state = exit_states[network.sil_exit[si]]
        sil_link = rows.link[np.arange(len(rows.hist)), sil_state]
        bword: dict[tuple[str, ...], tuple[float, int]] = {}
        cand_words: dict[int, list[tuple[int, float, int]]] = {}
        for h_i in np.flatnonzero(np.isfinite(ex).any(axis=1)):
            for wi, idx in enumerate(word_exit_lists):
                vals = ex[h_i, idx]
                k = int(np.argmax(vals))
                if np.isfinite(vals[k]):
                    cand_words.setdefault(int(h_i), []).append((wi, float(vals[k]), int(exit_states[idx[k]])))
        for h_i, items in cand_words.items():
            h = rows.hist[h_i]
            for wi, val, st in items:
                lm_score, h2 = lm_step(h, wi)
                total = val + lm_score
                cur = bword.get(h2)
                if cur is None or total > cur[0]:
                    link = _Link(network.words[wi], int(rows.start[h_i, st]), t_end + 1, int(rows.link[h_i, st]))
                    bword[h2] = (total, len(links))
                    links.append(link)
        return b_sil, sil_link, bword

    for t in range(1, T):
        b_sil, sil_link, bword = boundaries(t - 1)
        old_hist = list(rows.hist)
        H = len(old_hist)
        new = np.full((H, S), NEG_INF)
        new_link = np.full((H, S), -1, dtype=np.int64)
        new_start = np.zeros((H, S), dtype=np.int64)
        if n_arcs:
            cand = rows.score[:, g.arc_src] + w.arc
            best = np.maximum.reduceat(cand, starts, axis=1)
            hit = cand == np.repeat(best, sizes, axis=1)
            first = np.minimum.reduceat(np.where(hit, arc_index, n_arcs), starts, axis=1)
            first = np.minimum(first, n_arcs - 1)
            src = g.arc_src[first]
            new[:, dsts] = best
            new_link[:, dsts] = np.take_along_axis(rows.link, src, axis=1)
            new_start[:, dsts] = np.take_along_axis(rows.start, src, axis=1)
        rows.score, rows.link, rows.start = new, new_link, new_start

        # entries: silence exit keeps the history, word ends move to a new one
        entry: dict[int, list] = {}
        for h_i in range(H):
            if np.isfinite(b_sil[h_i]):
                entry[h_i] = [float(b_sil[h_i]), int(sil_link[h_i]), NEG_INF, -1]
        for h2, (val, link) in bword.items():
            r = rows.row(h2)
            e = entry.setdefault(r, [NEG_INF, -1, NEG_INF, -1])
            e[2], e[3] = val, link
        for r, (s_val, s_link, w_val, w_link) in entry.items():
            root_val, root_link = (w_val + lq, w_link) if w_val + lq >= s_val else (s_val, s_link)
            for states, val, link in ((network.root_states, root_val, root_link),
                                      (network.sil_entry_states, w_val + lp, w_link)):
                if not np.isfinite(val):
                    continue
                better = val > rows.score[r, states]
                tgt = states[better]
                rows.score[r, tgt] = val
                rows.link[r, tgt] = link
                rows.start[r, tgt] = t
        rows.score += emis[t]

        top = rows.score.max()
        if not np.isfinite(top):
            raise DecodeError(f"all tokens pruned at frame {t}; widen the beam or raise max_active")
        thresh = top - config.beam
        n_active = int(np.count_nonzero(rows.score >= thresh))
        if n_active > config.max_active:
            flat = rows.score.ravel()
            thresh = max(thresh, float(np.partition(flat, flat.size - config.max_active)[flat.size - config.max_active]))
        rows.score[rows.score < thresh] = NEG_INF
        rows.keep(np.isfinite(rows.score).any(axis=1))

    b_sil, sil_link, bword = boundaries(T - 1)
    best_val, best_link = NEG_INF, -1
    finals: dict[tuple[str, ...], tuple[float, int]] = {}
    for h_i, h in enumerate(rows.hist):
        if np.isfinite(b_sil[h_i]):
            finals[h] = (float(b_sil[h_i]), int(sil_link[h_i]))
    for h2, (val, link) in bword.items():
        cur = finals.get(h2)
        if cur is None or val + lq > cur[0]:
            finals[h2] = (val + lq, link)
    for h, (val, link) in sorted(finals.items()):
        total = val + lm_scale * lm.log10_prob(EOS, h)
        if total > best_val:
            best_val, best_link = total, link
    complete = bool(np.isfinite(best_val))
    if not complete:
        if T < 2:
            raise DecodeError("utterance shorter than the shortest silence path")
        r, st = np.unravel_index(int(np.argmax(rows.score)), rows.score.shape)
        best_val, best_link = float(rows.score[r, st]), int(rows.link[r, st])
        log.warning("no token reached the end of the utterance; returning a partial traceback "
                    "(consider a wider beam)")

    seq: list[_Link] = []
    k = best_link
    while k >= 0:
        seq.append(links[k])
        k = links[k].prev
    seq.reverse()
    times = tuple((float(_frame_time(features, ln.start)), float(_frame_time(features, ln.end))) for ln in seq)
    return TranscriptResult(tuple(ln.word for ln in seq), float(best_val), times, complete)


def _frame_time(features, i: int) -> float:
    if isinstance(features, FeatureMatrix):
        return float(features.frame_time(i))
    return float(i)


def decode_song(features: FeatureMatrix, lex: Lexicon, models: AcousticModelSet, lm: NgramModel,
                config: DecodeConfig = DecodeConfig()) -> TranscriptResult:
    net = build_decode_network(lex, models, config.silence_prob, config.genre)
    return beam_decode(net, features, lm, config)


def format_hypotheses(results: Sequence[tuple[str, TranscriptResult]]) -> str:
    return "".join(f"{song_id}\t{' '.join(r.words)}\n" for song_id, r in results)
