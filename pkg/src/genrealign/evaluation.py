"""Alignment and transcription metrics with per-dataset and per-genre reports.

Aggregation rules: a dataset's AE is the unweighted mean of its songs' AE;
its WER is pooled (total errors over total reference words), and the
unweighted mean of per-song WER is reported alongside.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .align import AlignmentResult
from .corpus import WordBoundaryAnnotation, WordSpan
from .decode import TranscriptResult
from .errors import EvalError
from .genre import Genre
from .text import normalize_word

AE_MODES = ("start", "both")


def _spans(hyp) -> list[tuple[str, float, float]]:
    if isinstance(hyp, AlignmentResult):
        return [(w.word, w.start, w.end) for w in hyp.words]
    if isinstance(hyp, WordBoundaryAnnotation):
        return [(w.word, w.start, w.end) for w in hyp.words]
    return [(w.word, w.start, w.end) if isinstance(w, WordSpan) else (w[0], float(w[1]), float(w[2])) for w in hyp]


def word_boundary_ae(ref: WordBoundaryAnnotation, hyp, mode: str = "start") -> float:
    """Mean absolute word boundary error in seconds.

    ``mode="start"`` uses word starts; ``"both"`` averages start and end errors.
    """
    if mode not in AE_MODES:
        raise ValueError(f"mode must be one of {AE_MODES}")
    r, h = _spans(ref), _spans(hyp)
    if [normalize_word(w) for w, _, _ in r] != [normalize_word(w) for w, _, _ in h]:
        raise EvalError(f"{getattr(ref, 'song_id', '')}: reference and hypothesis word sequences differ")
    if not r:
        raise EvalError("empty reference")
    start = np.abs(np.array([a[1] for a in r]) - np.array([b[1] for b in h]))
    if mode == "start":
        return float(start.mean())
    end = np.abs(np.array([a[2] for a in r]) - np.array([b[2] for b in h]))
    return float((start.mean() + end.mean()) / 2.0)


@dataclass(frozen=True)
class EditCounts:
    substitutions: int
    deletions: int
    insertions: int
    ref_length: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        if self.ref_length == 0:
            raise EvalError("empty reference")
        return 100.0 * self.errors / self.ref_length


def edit_counts(ref: Sequence[str], hyp: Sequence[str]) -> EditCounts:
    """Minimum edit distance with unit costs, split into S/D/I.

    Among equally cheap alignments the backtrace prefers a diagonal step,
    then a deletion, then an insertion.
    """
    ref = [normalize_word(w) for w in ref]
    hyp = [normalize_word(w) for w in hyp]
    n, m = len(ref), len(hyp)
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i, j] = min(d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]), d[i - 1, j] + 1, d[i, j - 1] + 1)
    s = dl = ins = 0
    i, j = n, m
    while i or j:
        if i and j and d[i, j] == d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            s += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i and d[i, j] == d[i - 1, j] + 1:
            dl += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return EditCounts(int(s), dl, ins, n)


def word_error_rate(ref: Sequence[str], hyp: Sequence[str]) -> float:
    """WER in percent; may exceed 100."""
    if len(ref) == 0:
        raise EvalError("empty reference")
    return edit_counts(ref, hyp).wer


# ------------------------------------------------------------------ reports

@dataclass(frozen=True)
class SongScore:
    song_id: str
    genre: str
    dataset: str
    ae: float | None = None
    wer: float | None = None
    errors: int | None = None
    ref_words: int | None = None


@dataclass(frozen=True)
class Aggregate:
    songs: int
    ae: float | None
    wer: float | None               # pooled
    wer_song_mean: float | None


def aggregate(scores: Sequence[SongScore]) -> Aggregate:
    aes = [s.ae for s in scores if s.ae is not None]
    with_wer = [s for s in scores if s.wer is not None]
    ref_words = sum(s.ref_words for s in with_wer)
    return Aggregate(
        songs=len(scores),
        ae=float(np.mean(aes)) if aes else None,
        wer=100.0 * sum(s.errors for s in with_wer) / ref_words if with_wer else None,
        wer_song_mean=float(np.mean([s.wer for s in with_wer])) if with_wer else None,
    )


@dataclass
class EvalReport:
    system: str
    songs: list[SongScore]
    per_dataset: dict[str, Aggregate] = field(default_factory=dict)
    per_genre: dict[str, Aggregate] = field(default_factory=dict)
    overall: Aggregate | None = None
    ae_mode: str = "start"

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "ae_mode": self.ae_mode,
            "songs": [asdict(s) for s in self.songs],
            "per_dataset": {k: asdict(v) for k, v in self.per_dataset.items()},
            "per_genre": {k: asdict(v) for k, v in self.per_genre.items()},
            "overall": asdict(self.overall) if self.overall else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["system", "song_id", "dataset", "genre", "ae_seconds", "wer_percent", "errors", "ref_words"])
        for s in self.songs:
            writer.writerow([self.system, s.song_id, s.dataset, s.genre, _csv_num(s.ae), _csv_num(s.wer),
                             "" if s.errors is None else s.errors, "" if s.ref_words is None else s.ref_words])
        return buf.getvalue()

    def genre_chart_data(self) -> dict:
        """Per-genre values in fixed genre order, for external bar charts."""
        order = [g.value for g in Genre] + sorted(set(self.per_genre) - {g.value for g in Genre})
        present = [g for g in order if g in self.per_genre]
        return {"system": self.system, "genres": present,
                "ae": [self.per_genre[g].ae for g in present],
                "wer": [self.per_genre[g].wer for g in present]}

    def format_table(self) -> str:
        return format_comparison([self])


def _csv_num(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def _pairs(items, what: str) -> dict:
    pairs = items.items() if isinstance(items, Mapping) else items
    out: dict = {}
    for key, value in pairs:
        if key in out:
            raise EvalError(f"duplicate song_id {key!r} in {what}")
        out[key] = value
    return out


def _hyp_words(hyp) -> list[str]:
    if isinstance(hyp, TranscriptResult):
        return list(hyp.words)
    if isinstance(hyp, AlignmentResult):
        return hyp.tokens
    if isinstance(hyp, str):
        return hyp.split()
    return list(hyp)


def _ref_words(ref) -> list[str]:
    if isinstance(ref, WordBoundaryAnnotation):
        return ref.tokens
    if isinstance(ref, str):
        return ref.split()
    return list(ref)


def build_report(refs, hyps=None, genres=None, system_label: str = "", *,
                 transcripts=None, datasets=None, ae_mode: str = "start") -> EvalReport:
    """Score songs and aggregate them per dataset and per genre.

    ``refs`` maps song_id to a :class:`WordBoundaryAnnotation` (or a word list
    when only WER is wanted). ``hyps`` maps song_id to alignments or timed
    annotations (scored by AE) or to transcripts/word lists (scored by WER); ``transcripts``
    adds WER hypotheses next to alignments. ``genres`` and ``datasets`` map
    song_id to labels; missing datasets default to ``"all"``. Mappings may
    also be given as (song_id, value) pairs, in which case duplicates are
    rejected.
    """
    refs = _pairs(refs, "references")
    hyps = _pairs(hyps or {}, "hypotheses")
    transcripts = _pairs(transcripts or {}, "transcripts")
    genres = _pairs(genres or {}, "genres")
    datasets = _pairs(datasets or {}, "datasets")
    alignments = {k: v for k, v in hyps.items() if isinstance(v, (AlignmentResult, WordBoundaryAnnotation))}
    for k, v in hyps.items():
        if k not in alignments:
            if k in transcripts:
                raise EvalError(f"{k}: two transcripts given")
            transcripts[k] = v
    for name, table in (("hypothesis", alignments), ("transcript", transcripts)):
        extra = set(table) - set(refs)
        if extra:
            raise EvalError(f"{name} for unknown song(s): {', '.join(sorted(extra))}")
    scored = set(alignments) | set(transcripts)
    missing = set(refs) - scored
    if missing:
        raise EvalError(f"no hypothesis for song(s): {', '.join(sorted(missing))}")

    songs = []
    for song_id in sorted(refs):
        ref = refs[song_id]
        genre = genres.get(song_id)
        if genre is None:
            genre = getattr(ref, "genre", None)
        genre = genre.value if isinstance(genre, Genre) else (genre or "unknown")
        ae = wer = errors = n_ref = None
        if song_id in alignments:
            if not isinstance(ref, WordBoundaryAnnotation):
                raise EvalError(f"{song_id}: AE needs word-boundary references")
            ae = word_boundary_ae(ref, alignments[song_id], ae_mode)
        if song_id in transcripts:
            counts = edit_counts(_ref_words(ref), _hyp_words(transcripts[song_id]))
            errors, n_ref, wer = counts.errors, counts.ref_length, counts.wer
        songs.append(SongScore(song_id, str(genre), str(datasets.get(song_id, "all")), ae, wer, errors, n_ref))

    report = EvalReport(system_label, songs, ae_mode=ae_mode)
    for key, attr in (("per_dataset", "dataset"), ("per_genre", "genre")):
        groups: dict[str, list[SongScore]] = {}
        for s in songs:
            groups.setdefault(getattr(s, attr), []).append(s)
        setattr(report, key, {k: aggregate(v) for k, v in sorted(groups.items())})
    report.overall = aggregate(songs)
    return report


def _cell(x: float | None, fmt: str) -> str:
    return "-" if x is None or (isinstance(x, float) and math.isnan(x)) else format(x, fmt)


def format_comparison(reports: Sequence[EvalReport]) -> str:
    """Fixed-width table: one row per dataset and genre, AE/WER columns per system."""
    if not reports:
        return ""
    width = max(12, *(len(r.system) + 2 for r in reports))
    rows = []
    header = f"{'':<16}" + "".join(f"{r.system or 'system':>{width}}" for r in reports)
    for metric, fmt, label in (("ae", ".3f", "AE (s)"), ("wer", ".2f", "WER (%)")):
        if all(r.overall is None or getattr(r.overall, metric) is None for r in reports):
            continue
        rows.append(label)
        rows.append(header)
        for section in ("per_dataset", "per_genre"):
            keys = sorted({k for r in reports for k in getattr(r, section)})
            for k in keys:
                name = k if section == "per_dataset" else f"genre:{k}"
                cells = [getattr(getattr(r, section).get(k), metric, None) for r in reports]
                rows.append(f"{name:<16}" + "".join(f"{_cell(c, fmt):>{width}}" for c in cells))
        rows.append("")
    return "\n".join(rows)


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def report_from_dict(doc: dict) -> EvalReport:
    songs = [SongScore(**s) for s in doc["songs"]]
    rep = EvalReport(doc["system"], songs, ae_mode=doc.get("ae_mode", "start"))
    rep.per_dataset = {k: Aggregate(**v) for k, v in doc["per_dataset"].items()}
    rep.per_genre = {k: Aggregate(**v) for k, v in doc["per_genre"].items()}
    rep.overall = Aggregate(**doc["overall"]) if doc.get("overall") else None
    return rep

