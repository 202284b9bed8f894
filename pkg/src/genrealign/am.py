"""Genre-tagged monophone GMM-HMM acoustic models.

Three model-set modes mirror the three compared systems:

* ``genre_agnostic``: untagged phones and one SIL.
* ``genre_silence``: untagged speech phones, one SIL per genre.
* ``genre_silence_phone``: every phone, SIL included, tagged per genre.

Training is Viterbi (hard) EM over fixed alignment graphs: state
sequences are hard, mixture responsibilities inside a state are soft.
Transition and mixture-weight floors are applied as constrained maximum
likelihood, so each re-estimation cannot lower the score of the path it
was estimated from.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ModelFormatError, TrainingError
from .genre import Genre
from .hmm import (StateGraph, equal_alignment, graph_weights, num_states, score_state_path,
                  topology_mask, viterbi)
from .lexicon import SILENCE, Phone, sorted_phones

log = logging.getLogger(__name__)

VAR_FLOOR = 1e-4
TRANSITION_FLOOR = 1e-3
WEIGHT_FLOOR = 1e-5
FORMAT_NAME = "genrealign-acoustic-model"
FORMAT_VERSION = 1
_LOG_2PI = np.log(2.0 * np.pi)


class Mode(str, Enum):
    GENRE_AGNOSTIC = "genre_agnostic"
    GENRE_SILENCE = "genre_silence"
    GENRE_SILENCE_PHONE = "genre_silence_phone"

    def __str__(self) -> str:
        return self.value


def model_inventory(base_phones: Iterable[str], genres: Iterable[Genre], mode: Mode | str) -> set[Phone]:
    """The phone models a set in ``mode`` contains."""
    mode = Mode(mode)
    bases = set(base_phones) - {SILENCE}
    genres = list(genres)
    if mode is Mode.GENRE_AGNOSTIC:
        return {Phone(b) for b in bases} | {Phone(SILENCE)}
    if not genres:
        raise ValueError(f"mode {mode} needs at least one genre")
    sil = {Phone(SILENCE, g) for g in genres}
    if mode is Mode.GENRE_SILENCE:
        return {Phone(b) for b in bases} | sil
    return {Phone(b, g) for b in bases for g in genres} | sil


def infer_mode(inventory: Iterable[Phone]) -> Mode:
    speech_tagged = {p.genre is not None for p in inventory if not p.is_silence}
    sil_tagged = {p.genre is not None for p in inventory if p.is_silence}
    if len(speech_tagged) > 1 or len(sil_tagged) > 1:
        raise ValueError("inventory mixes tagged and untagged variants of the same kind")
    if True in speech_tagged:
        if False in sil_tagged:
            raise ValueError("tagged speech phones need tagged silence")
        return Mode.GENRE_SILENCE_PHONE
    return Mode.GENRE_SILENCE if True in sil_tagged else Mode.GENRE_AGNOSTIC


def constrained_mle(counts: np.ndarray, floor: float) -> np.ndarray:
    """argmax sum(c log p) subject to sum(p) = 1 and p >= floor (water-filling)."""
    counts = np.asarray(counts, dtype=np.float64)
    n = len(counts)
    if n * floor > 1.0:
        raise ValueError("floor too large for the number of outcomes")
    if n == 1:
        return np.ones(1)
    total = counts.sum()
    if total <= 0:
        return np.full(n, 1.0 / n)
    pinned = np.zeros(n, dtype=bool)
    while True:
        free_mass = 1.0 - floor * pinned.sum()
        free_total = counts[~pinned].sum()
        p = np.where(pinned, floor, counts * free_mass / free_total if free_total > 0 else 0.0)
        low = (~pinned) & (p < floor)
        if not low.any():
            return p
        pinned |= low


@dataclass
class GaussianMixture:
    weights: np.ndarray     # (K,)
    means: np.ndarray       # (K, D)
    variances: np.ndarray   # (K, D)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.variances = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if self.means.shape != self.variances.shape or self.weights.shape != (self.means.shape[0],):
            raise ValueError("inconsistent mixture shapes")

    @property
    def num_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def component_log_densities(self, x: np.ndarray) -> np.ndarray:
        """log(w_k N(x | mu_k, var_k)) for frames ``x`` (T, D) -> (T, K)."""
        x = np.atleast_2d(x)
        inv = 1.0 / self.variances
        const = -0.5 * (self.dim * _LOG_2PI + np.log(self.variances).sum(axis=1))
        quad = (((x[:, None, :] - self.means[None, :, :]) ** 2) * inv[None, :, :]).sum(axis=2)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return logw + const - 0.5 * quad

    def log_density(self, x: np.ndarray) -> np.ndarray:
        return logsumexp(self.component_log_densities(x), axis=1)

    def copy(self) -> "GaussianMixture":
        return GaussianMixture(self.weights.copy(), self.means.copy(), self.variances.copy())

    def split(self, max_components: int, scale: float = 0.2) -> "GaussianMixture":
        """Double the component count (capped), perturbing means by +-scale*sigma."""
        k = self.num_components
        n_split = min(k, max_components - k)
        if n_split <= 0:
            return self.copy()
        order = np.argsort(-self.weights, kind="stable")[:n_split]
        w, m, v = list(self.weights), list(self.means), list(self.variances)
        for i in order:
            offset = scale * np.sqrt(self.variances[i])
            w[i] = self.weights[i] / 2.0
            m[i] = self.means[i] + offset
            w.append(self.weights[i] / 2.0)
            m.append(self.means[i] - offset)
            v.append(self.variances[i].copy())
        return GaussianMixture(np.array(w), np.array(m), np.array(v))


def reestimate_gmm(gmm: GaussianMixture, x: np.ndarray, var_floor: float = VAR_FLOOR) -> GaussianMixture:
    """One EM step on frames ``x`` with the floors applied inside the M-step."""
    if len(x) == 0:
        return gmm.copy()
    comp = gmm.component_log_densities(x)
    resp = np.exp(comp - logsumexp(comp, axis=1, keepdims=True))
    occ = resp.sum(axis=0)
    weights = constrained_mle(occ, WEIGHT_FLOOR) if gmm.num_components > 1 else np.ones(1)
    means, variances = gmm.means.copy(), gmm.variances.copy()
    for k in range(gmm.num_components):
        if occ[k] <= 1e-10:
            continue
        mu = resp[:, k] @ x / occ[k]
        var = resp[:, k] @ (x - mu) ** 2 / occ[k]
        means[k] = mu
        variances[k] = np.maximum(var, var_floor)
    return GaussianMixture(weights, means, variances)


@dataclass
class HmmPhoneModel:
    phone: Phone
    transitions: np.ndarray                 # (n, n+1) probabilities, last column = exit
    emissions: list[GaussianMixture]
    trained: bool = True                    # False until some training frame was assigned to it

    @property
    def num_states(self) -> int:
        return len(self.emissions)

    def log_transitions(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.transitions)

    def copy(self) -> "HmmPhoneModel":
        return HmmPhoneModel(self.phone, self.transitions.copy(), [g.copy() for g in self.emissions], self.trained)


def uniform_transitions(phone: Phone) -> np.ndarray:
    mask = topology_mask(phone)
    return mask / mask.sum(axis=1, keepdims=True)


@dataclass
class AcousticModelSet:
    models: dict[Phone, HmmPhoneModel]
    mode: Mode
    feature_fingerprint: str = ""

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if infer_mode(self.models) is not self.mode and self.models:
            raise ValueError(f"inventory does not match mode {self.mode}")

    @property
    def dim(self) -> int:
        return next(iter(self.models.values())).emissions[0].dim

    @property
    def phones(self) -> list[Phone]:
        return sorted_phones(self.models)

    @property
    def genres(self) -> list[Genre]:
        return [g for g in Genre if any(p.genre is g for p in self.models)]

    def variants(self, base: str, genre: Genre | None = None) -> list[Phone]:
        """Models usable for a phone slot: the untagged model, or the tagged
        variants (all genres, or only ``genre`` when given).

        Across genres, variants that never received training data are left
        out unless no variant was trained.
        """
        if Phone(base) in self.models:
            return [Phone(base)]
        found = [Phone(base, g) for g in Genre if Phone(base, g) in self.models
                 and (genre is None or g is genre)]
        if not found:
            raise KeyError(f"no model for phone {base!r}" + (f" in genre {genre}" if genre else ""))
        return [p for p in found if self.models[p].trained] or found

    def state_log_likelihoods(self, x: np.ndarray, keys: Sequence[tuple[Phone, int]]) -> np.ndarray:
        """(T, len(keys)) log densities of frames ``x`` under each (phone, state)."""
        out = np.empty((len(x), len(keys)))
        for j, (phone, s) in enumerate(keys):
            out[:, j] = self.models[phone].emissions[s].log_density(x)
        return out

    def graph_log_likelihoods(self, graph: StateGraph, x: np.ndarray) -> np.ndarray:
        keys, inverse = graph.emission_keys()
        return self.state_log_likelihoods(x, keys)[:, inverse]

    def log_transitions_for(self, graph: StateGraph) -> list[np.ndarray]:
        return [self.models[p].log_transitions() for p in graph.phones]

    def copy(self) -> "AcousticModelSet":
        return AcousticModelSet({p: m.copy() for p, m in self.models.items()}, self.mode, self.feature_fingerprint)


def score_state(model_set: AcousticModelSet, phone: Phone | str, state_index: int, frame: np.ndarray) -> float:
    """Log density of one frame under one HMM state's mixture."""
    if isinstance(phone, str):
        phone = Phone.parse(phone)
    if phone not in model_set.models:
        raise KeyError(f"unknown phone {phone}")
    model = model_set.models[phone]
    if not 0 <= state_index < model.num_states:
        raise KeyError(f"{phone} has no state {state_index}")
    value = float(model.emissions[state_index].log_density(np.asarray(frame, dtype=np.float64)[None, :])[0])
    if not np.isfinite(value):
        raise TrainingError(f"non-finite density for {phone} state {state_index}")
    return value


def global_stats(features: Iterable[np.ndarray]) -> tuple[np.ndarray, np.ndarray, int]:
    """Streaming mean/variance via shifted sums (shift = first frame)."""
    n, shift, s1, s2 = 0, None, None, None
    for x in features:
        x = np.asarray(getattr(x, "frames", x), dtype=np.float64)
        if len(x) == 0:
            continue
        if shift is None:
            shift = x[0].copy()
            s1 = np.zeros_like(shift)
            s2 = np.zeros_like(shift)
        d = x - shift
        s1 += d.sum(axis=0)
        s2 += (d ** 2).sum(axis=0)
        n += len(x)
    if n == 0:
        raise TrainingError("flat start needs a non-empty training sample")
    m = s1 / n
    return shift + m, np.maximum(s2 / n - m ** 2, 0.0), n


def flat_start(inventory: Iterable[Phone], features: Iterable[np.ndarray],
               mode: Mode | str | None = None, feature_fingerprint: str = "") -> AcousticModelSet:
    """Every state starts as one Gaussian at the global mean/variance."""
    inventory = set(inventory)
    if not inventory:
        raise ValueError("empty phone inventory")
    mean, var, _ = global_stats(features)
    var = np.maximum(var, VAR_FLOOR)
    models = {}
    for phone in sorted_phones(inventory):
        gmms = [GaussianMixture(np.ones(1), mean[None, :].copy(), var[None, :].copy())
                for _ in range(num_states(phone))]
        models[phone] = HmmPhoneModel(phone, uniform_transitions(phone), gmms, trained=False)
    return AcousticModelSet(models, Mode(mode) if mode is not None else infer_mode(inventory),
                            feature_fingerprint)


@dataclass(frozen=True)
class TrainSchedule:
    iterations: int = 20
    split_at: tuple[int, ...] = (4, 8, 12)
    max_components: int = 8
    var_floor: float = VAR_FLOOR
    equal_align_first: bool = True

    def __post_init__(self):
        if self.iterations < 1 or self.max_components < 1:
            raise ValueError("iterations and max_components must be >= 1")


@dataclass(frozen=True)
class TrainingUtterance:
    utt_id: str
    features: np.ndarray
    graph: StateGraph
    genre: Genre | None = None


@dataclass
class IterationRecord:
    iteration: int
    log_likelihood: float
    frames: int
    split_after: bool
    zero_occupancy: list[str] = field(default_factory=list)

    @property
    def per_frame(self) -> float:
        return self.log_likelihood / self.frames


@dataclass
class TrainResult:
    models: AcousticModelSet
    history: list[IterationRecord]
    skipped: list[str]

    @property
    def per_frame_log_likelihoods(self) -> list[float]:
        return [h.per_frame for h in self.history]

    @property
    def zero_occupancy(self) -> list[str]:
        return self.history[-1].zero_occupancy if self.history else []


class _Accumulator:
    def __init__(self, model_set: AcousticModelSet):
        self.frames: dict[tuple[Phone, int], list[np.ndarray]] = {}
        self.trans = {p: np.zeros_like(m.transitions) for p, m in model_set.models.items()}

    def add(self, utt: TrainingUtterance, path) -> None:
        g = utt.graph
        keys, inverse = g.emission_keys()
        key_of_frame = inverse[path.states]
        for k in np.unique(key_of_frame):
            self.frames.setdefault(keys[k], []).append(utt.features[key_of_frame == k])
        for a in path.arcs:
            self.trans[g.phones[g.arc_phone[a]]][g.arc_row[a], g.arc_col[a]] += 1
        e = path.exit_index
        self.trans[g.phones[g.exit_phone[e]]][g.exit_row[e], g.exit_col[e]] += 1

    def stacked(self, key) -> np.ndarray:
        parts = self.frames.get(key)
        return np.concatenate(parts) if parts else np.empty((0, 0))


def _align(models: AcousticModelSet, utt: TrainingUtterance, equal: bool = False):
    emis = models.graph_log_likelihoods(utt.graph, utt.features)
    weights = graph_weights(utt.graph, models.log_transitions_for(utt.graph))
    if equal:
        states = equal_alignment(utt.graph, len(utt.features))
        if states is not None:
            return score_state_path(utt.graph, states, emis, weights)
    return viterbi(utt.graph, emis, weights)


def train_em(models: AcousticModelSet, utterances: Sequence[TrainingUtterance],
             schedule: TrainSchedule = TrainSchedule()) -> TrainResult:
    """Viterbi EM over fixed graphs; see the module docstring.

    Each iteration aligns every utterance with the current models (the
    recorded log-likelihood), re-estimates transitions and mixtures from
    that alignment, and on split iterations doubles mixtures and refits
    them once on the same alignment. With ``equal_align_first`` the first
    iteration uses a uniform segmentation of each transcript's plain path
    instead of Viterbi, since flat-start models cannot tell states apart.
    Utterances with no feasible path are skipped for the whole run. States that received no frames keep their
    previous parameters and are reported.
    """
    models = models.copy()
    history: list[IterationRecord] = []
    skipped: list[str] = []
    active = list(utterances)
    for it in range(1, schedule.iterations + 1):
        acc = _Accumulator(models)
        total, frames = 0.0, 0
        keep = []
        for utt in active:
            path = _align(models, utt, equal=schedule.equal_align_first and it == 1)
            if path is None:
                if it == 1:
                    log.warning("no feasible path for %s (%d frames, needs %d); skipped",
                                utt.utt_id, len(utt.features), utt.graph.min_frames())
                    skipped.append(utt.utt_id)
                    continue
                raise TrainingError(f"{utt.utt_id}: alignment became infeasible")
            if not np.isfinite(path.score):
                raise TrainingError(f"non-finite likelihood for {utt.utt_id}")
            keep.append(utt)
            acc.add(utt, path)
            total += path.score
            frames += len(utt.features)
        active = keep
        if frames == 0:
            raise TrainingError("no trainable utterances")

        zero = []
        split = it in schedule.split_at
        for phone, model in models.models.items():
            counts = acc.trans[phone]
            mask = topology_mask(phone)
            if counts.sum() == 0:
                zero.append(phone.name)
            else:
                model.trained = True
                new_t = np.zeros_like(model.transitions)
                for row in range(model.num_states):
                    cols = np.flatnonzero(mask[row])
                    if counts[row, cols].sum() > 0:
                        new_t[row, cols] = constrained_mle(counts[row, cols], TRANSITION_FLOOR)
                    else:
                        new_t[row, cols] = model.transitions[row, cols]
                model.transitions = new_t
            for s in range(model.num_states):
                x = acc.stacked((phone, s))
                gmm = model.emissions[s]
                if len(x):
                    gmm = reestimate_gmm(gmm, x, schedule.var_floor)
                if split:
                    gmm = gmm.split(schedule.max_components)
                    if len(x):
                        gmm = reestimate_gmm(gmm, x, schedule.var_floor)
                model.emissions[s] = gmm
        if zero and (not history or zero != history[-1].zero_occupancy):
            log.warning("iteration %d: zero occupancy for %s", it, ", ".join(zero))
        rec = IterationRecord(it, total, frames, split, zero)
        history.append(rec)
        log.info("iteration %d: log-likelihood/frame %.6f over %d frames", it, rec.per_frame, frames)
    return TrainResult(models, history, skipped)


# ---------------------------------------------------------------- persistence

def _mixture_doc(g: GaussianMixture) -> dict:
    return {"weights": g.weights.tolist(), "means": g.means.tolist(), "variances": g.variances.tolist()}


def model_set_to_dict(ms: AcousticModelSet) -> dict:
    return {
        "mode": ms.mode.value,
        "feature_fingerprint": ms.feature_fingerprint,
        "inventory": [p.name for p in ms.phones],
        "models": [
            {"phone": p.name,
             "transitions": ms.models[p].transitions.tolist(),
             "trained": ms.models[p].trained,
             "states": [_mixture_doc(g) for g in ms.models[p].emissions]}
            for p in ms.phones
        ],
    }


def _checksum(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def save_models(ms: AcousticModelSet, path: str | os.PathLike) -> None:
    """JSON container; floats are written with repr so they reload bit-exactly."""
    payload = model_set_to_dict(ms)
    doc = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "checksum": _checksum(payload), "payload": payload}
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def load_models(path: str | os.PathLike, expected_fingerprint: str | None = None) -> AcousticModelSet:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: not a model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFormatError(f"{path}: not a model file")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported version {doc.get('version')}")
    payload = doc.get("payload")
    if not isinstance(payload, dict) or _checksum(payload) != doc.get("checksum"):
        raise ModelFormatError(f"{path}: checksum mismatch (corrupted file)")
    fp = payload["feature_fingerprint"]
    if expected_fingerprint is not None and fp != expected_fingerprint:
        raise ModelFormatError(f"{path}: feature fingerprint {fp} != expected {expected_fingerprint}")
    try:
        models = {}
        for m in payload["models"]:
            phone = Phone.parse(m["phone"])
            gmms = [GaussianMixture(np.array(s["weights"]), np.array(s["means"]), np.array(s["variances"]))
                    for s in m["states"]]
            models[phone] = HmmPhoneModel(phone, np.array(m["transitions"]), gmms, bool(m.get("trained", True)))
        if sorted(p.name for p in models) != sorted(payload["inventory"]):
            raise ModelFormatError(f"{path}: inventory does not match models")
        return AcousticModelSet(models, Mode(payload["mode"]), fp)
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"{path}: malformed model payload ({exc})") from None


def describe_models(ms: AcousticModelSet) -> str:
    """Human-readable dump for ``inspect-model``."""
    lines = [f"mode: {ms.mode.value}", f"feature fingerprint: {ms.feature_fingerprint}",
             f"phones: {len(ms.models)}"]
    for p in ms.phones:
        m = ms.models[p]
        comps = ",".join(str(g.num_components) for g in m.emissions)
        flag = "" if m.trained else " untrained"
        lines.append(f"{p.name}: states={m.num_states} components=[{comps}]{flag}")
        for row in range(m.num_states):
            probs = " ".join(f"{v:.4f}" for v in m.transitions[row])
            lines.append(f"  trans[{row}] {probs}")
    return "\n".join(lines) + "\n"
