"""HMM topologies, compiled state graphs and Viterbi search.

A :class:`StateGraph` holds only structure. Every arc names the HMM
transition it uses (phone, row, column) plus a constant graph weight, so
the same graph can be re-scored as models are re-estimated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .lexicon import Phone

SPEECH_STATES = 3
SILENCE_STATES = 5
NEG_INF = -np.inf


def num_states(phone: "Phone") -> int:
    return SILENCE_STATES if phone.is_silence else SPEECH_STATES


def topology(phone: "Phone") -> list[tuple[int, ...]]:
    """Permitted destination columns per state; column ``n`` is the exit.

    Speech: strict left-to-right. Silence: left-to-right plus a skip from
    the first state to the last.
    """
    n = num_states(phone)
    rows = [(i, i + 1) for i in range(n)]
    if phone.is_silence:
        rows[0] = (0, 1, n - 1)
    return rows


def topology_mask(phone: "Phone") -> np.ndarray:
    n = num_states(phone)
    mask = np.zeros((n, n + 1), dtype=bool)
    for row, cols in enumerate(topology(phone)):
        mask[row, list(cols)] = True
    return mask


@dataclass(frozen=True)
class Chain:
    """One phone-model instance inside a graph."""
    phone: "Phone"
    word: int          # word position in the utterance, -1 for silence
    slot: int          # phone position inside the word's pronunciation, -1 for silence
    first: int
    last: int


@dataclass(frozen=True)
class StateGraph:
    """Flattened HMM graph. Arcs are sorted by destination, self-loop first, then by source."""
    phones: tuple
    chains: tuple[Chain, ...]
    state_phone: np.ndarray
    state_hmm: np.ndarray
    state_chain: np.ndarray
    arc_src: np.ndarray
    arc_dst: np.ndarray
    arc_phone: np.ndarray
    arc_row: np.ndarray
    arc_col: np.ndarray
    arc_const: np.ndarray
    entry_state: np.ndarray
    entry_const: np.ndarray
    exit_state: np.ndarray
    exit_phone: np.ndarray
    exit_row: np.ndarray
    exit_col: np.ndarray
    exit_const: np.ndarray
    canonical: np.ndarray | None = None   # state sequence of the transcript's plain path

    @property
    def num_states(self) -> int:
        return len(self.state_phone)

    @property
    def state_word(self) -> np.ndarray:
        words = np.array([c.word for c in self.chains], dtype=np.int64)
        return words[self.state_chain]

    def emission_keys(self) -> tuple[list[tuple], np.ndarray]:
        """Unique (phone, hmm state) pairs and, per graph state, its index into them."""
        pairs = np.stack([self.state_phone, self.state_hmm], axis=1)
        uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
        keys = [(self.phones[p], int(s)) for p, s in uniq]
        return keys, inverse.reshape(-1)

    def min_frames(self) -> int:
        """Fewest frames any complete path needs (shortest path in states)."""
        dist = np.full(self.num_states, np.iinfo(np.int64).max // 2)
        dist[self.entry_state] = 1
        moving = self.arc_src != self.arc_dst
        src, dst = self.arc_src[moving], self.arc_dst[moving]
        for _ in range(self.num_states):
            relaxed = dist.copy()
            np.minimum.at(relaxed, dst, dist[src] + 1)
            if np.array_equal(relaxed, dist):
                break
            dist = relaxed
        return int(dist[self.exit_state].min())


class GraphBuilder:
    def __init__(self):
        self._phones: list = []
        self._phone_index: dict = {}
        self._chains: list[Chain] = []
        self._states: list[tuple[int, int, int]] = []
        self._arcs: dict[tuple[int, int], tuple[int, int, int, float]] = {}
        self._entries: dict[int, float] = {}
        self._exits: dict[int, tuple[int, int, int, float]] = {}
        self._canonical: list[Chain] = []

    def _pid(self, phone) -> int:
        if phone not in self._phone_index:
            self._phone_index[phone] = len(self._phones)
            self._phones.append(phone)
        return self._phone_index[phone]

    def _arc(self, src: int, dst: int, ref: tuple[int, int, int], const: float) -> None:
        if (src, dst) in self._arcs:
            raise ValueError(f"duplicate arc {src}->{dst}")
        self._arcs[(src, dst)] = (*ref, const)

    def add_chain(self, phone, word: int = -1, slot: int = -1) -> Chain:
        pid = self._pid(phone)
        first = len(self._states)
        n = num_states(phone)
        cid = len(self._chains)
        self._states.extend((pid, i, cid) for i in range(n))
        for row, cols in enumerate(topology(phone)):
            for col in cols:
                if col < n:
                    self._arc(first + row, first + col, (pid, row, col), 0.0)
        chain = Chain(phone, word, slot, first, first + n - 1)
        self._chains.append(chain)
        return chain

    def _exit_ref(self, chain: Chain) -> tuple[int, int, int]:
        n = num_states(chain.phone)
        return (self._pid(chain.phone), n - 1, n)

    def connect(self, src: Chain, dst: Chain, const: float = 0.0) -> None:
        self._arc(src.last, dst.first, self._exit_ref(src), const)

    def connect_all(self, srcs: Sequence[Chain], dsts: Sequence[Chain], const: float = 0.0) -> None:
        for s in srcs:
            for d in dsts:
                self.connect(s, d, const)

    def add_entry(self, chain: Chain, const: float = 0.0) -> None:
        self._entries[chain.first] = const

    def add_exit(self, chain: Chain, const: float = 0.0) -> None:
        self._exits[chain.last] = (*self._exit_ref(chain), const)

    def set_canonical(self, chains: Sequence[Chain]) -> None:
        """Chains (each traversed fully, in order) of the path used for equal alignment."""
        self._canonical = list(chains)

    def build(self) -> StateGraph:
        if not self._entries or not self._exits:
            raise ValueError("graph needs at least one entry and one exit")
        st = np.array(self._states, dtype=np.int64).reshape(-1, 3)
        arcs = sorted(self._arcs.items(), key=lambda kv: (kv[0][1], kv[0][0] != kv[0][1], kv[0][0]))
        src = np.array([k[0] for k, _ in arcs], dtype=np.int64)
        dst = np.array([k[1] for k, _ in arcs], dtype=np.int64)
        ref = np.array([v[:3] for _, v in arcs], dtype=np.int64).reshape(-1, 3)
        const = np.array([v[3] for _, v in arcs], dtype=np.float64)
        entries = sorted(self._entries.items())
        exits = sorted(self._exits.items())
        ex_ref = np.array([v[:3] for _, v in exits], dtype=np.int64).reshape(-1, 3)
        return StateGraph(
            phones=tuple(self._phones),
            chains=tuple(self._chains),
            state_phone=st[:, 0], state_hmm=st[:, 1], state_chain=st[:, 2],
            arc_src=src, arc_dst=dst,
            arc_phone=ref[:, 0], arc_row=ref[:, 1], arc_col=ref[:, 2], arc_const=const,
            entry_state=np.array([s for s, _ in entries], dtype=np.int64),
            entry_const=np.array([c for _, c in entries], dtype=np.float64),
            exit_state=np.array([s for s, _ in exits], dtype=np.int64),
            exit_phone=ex_ref[:, 0], exit_row=ex_ref[:, 1], exit_col=ex_ref[:, 2],
            exit_const=np.array([v[3] for _, v in exits], dtype=np.float64),
            canonical=(np.array([s for c in self._canonical for s in range(c.first, c.last + 1)], dtype=np.int64)
                       if self._canonical else None),
        )


@dataclass(frozen=True)
class GraphWeights:
    arc: np.ndarray
    entry: np.ndarray
    exit: np.ndarray


def graph_weights(graph: StateGraph, log_transitions: Sequence[np.ndarray]) -> GraphWeights:
    """Arc/entry/exit log weights given one log-transition matrix per graph phone."""
    arc = np.empty(len(graph.arc_src))
    for i, lt in enumerate(log_transitions):
        sel = graph.arc_phone == i
        arc[sel] = lt[graph.arc_row[sel], graph.arc_col[sel]]
    ex = np.empty(len(graph.exit_state))
    for i, lt in enumerate(log_transitions):
        sel = graph.exit_phone == i
        ex[sel] = lt[graph.exit_row[sel], graph.exit_col[sel]]
    return GraphWeights(arc + graph.arc_const, graph.entry_const.copy(), ex + graph.exit_const)


@dataclass(frozen=True)
class ViterbiPath:
    states: np.ndarray      # (T,) graph state per frame
    arcs: np.ndarray        # (T-1,) arc index taken into frame t+1
    exit_index: int         # index into graph.exit_state
    score: float


class _ArcGroups:
    """Arcs grouped by destination, for vectorised max/argmax per frame."""

    def __init__(self, graph: StateGraph):
        dst = graph.arc_dst
        if len(dst):
            starts = np.flatnonzero(np.r_[True, dst[1:] != dst[:-1]])
        else:
            starts = np.zeros(0, dtype=np.int64)
        self.starts = starts
        self.dst = dst[starts] if len(dst) else dst
        self.sizes = np.diff(np.r_[starts, len(dst)])
        self.index = np.arange(len(dst))
        self.src = graph.arc_src


def score_state_path(graph: StateGraph, states: np.ndarray, log_emis: np.ndarray,
                     weights: GraphWeights) -> ViterbiPath | None:
    """Score a given state sequence; None if it is not a path of the graph."""
    states = np.asarray(states, dtype=np.int64)
    entry = np.flatnonzero(graph.entry_state == states[0])
    exit_ = np.flatnonzero(graph.exit_state == states[-1])
    if not len(entry) or not len(exit_):
        return None
    arc_of = {(int(s), int(d)): i for i, (s, d) in enumerate(zip(graph.arc_src, graph.arc_dst))}
    arcs = []
    for a, b in zip(states[:-1], states[1:]):
        i = arc_of.get((int(a), int(b)))
        if i is None:
            return None
        arcs.append(i)
    arcs = np.array(arcs, dtype=np.int64)
    score = (weights.entry[entry[0]] + weights.arc[arcs].sum() + weights.exit[exit_[0]]
             + log_emis[np.arange(len(states)), states].sum())
    return ViterbiPath(states, arcs, int(exit_[0]), float(score))


def equal_alignment(graph: StateGraph, num_frames: int) -> np.ndarray | None:
    """Spread ``num_frames`` uniformly over the canonical state sequence."""
    seq = graph.canonical
    if seq is None or num_frames < len(seq):
        return None
    return seq[(np.arange(num_frames) * len(seq)) // num_frames]


def viterbi(graph: StateGraph, log_emis: np.ndarray, weights: GraphWeights,
            beam: float | None = None) -> ViterbiPath | None:
    """Best state path through ``graph`` for emission scores ``log_emis`` (T, S).

    Ties are broken towards the predecessor that entered its state earliest
    (self-loop first), then the lowest source state index; final ties go
    to the lowest exit state. Returns None if no complete path exists.
    """
    T, S = log_emis.shape
    if S != graph.num_states:
        raise ValueError("emission matrix does not match graph")
    if T == 0:
        return None
    g = _ArcGroups(graph)
    delta = np.full(S, NEG_INF)
    delta[graph.entry_state] = weights.entry + log_emis[0, graph.entry_state]
    back = np.full((max(T - 1, 0), S), -1, dtype=np.int64)
    n_arcs = len(graph.arc_src)
    for t in range(1, T):
        new = np.full(S, NEG_INF)
        if n_arcs:
            cand = delta[g.src] + weights.arc
            best = np.maximum.reduceat(cand, g.starts)
            hit = cand == np.repeat(best, g.sizes)
            first = np.minimum.reduceat(np.where(hit, g.index, n_arcs), g.starts)
            new[g.dst] = best + log_emis[t, g.dst]
            back[t - 1, g.dst] = first
        if beam is not None and np.isfinite(beam):
            top = new.max()
            if np.isfinite(top):
                new[new < top - beam] = NEG_INF
        delta = new
    final = delta[graph.exit_state] + weights.exit
    k = int(np.argmax(final))
    score = float(final[k])
    if not np.isfinite(score):
        return None
    states = np.empty(T, dtype=np.int64)
    arcs = np.empty(T - 1, dtype=np.int64)
    s = int(graph.exit_state[k])
    for t in range(T - 1, 0, -1):
        states[t] = s
        a = int(back[t - 1, s])
        arcs[t - 1] = a
        s = int(graph.arc_src[a])
    states[0] = s
    return ViterbiPath(states, arcs, k, score)
