"""Back-off N-gram language models with interpolated absolute discounting.

Smoothing, for an n-gram ``h w`` with history count ``c(h) > 0``::

    P(w | h) = max(c(h w) - D, 0) / c(h) + alpha(h) * P(w | h')
    alpha(h) = D * N1+(h .) / c(h)

where ``h'`` drops the oldest word of ``h`` and ``N1+(h .)`` counts distinct
continuations of ``h``. The unigram level interpolates with a uniform
distribution over the vocabulary, so unseen words (``<unk>``) keep a small
nonzero share. Sentences are padded with one ``<s>`` (never predicted) and
one ``</s>`` (predicted and counted in perplexity).

Stored probabilities are the interpolated values for seen n-grams and the
back-off weights are ``alpha(h)``, so ARPA-style back-off scoring reproduces
the interpolated distribution exactly.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ArpaFormatError, DataError
from .text import normalize_words

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
NO_PROB = -99.0           # log10 "probability" stored for <s>
ARPA_DECIMALS = 6


@dataclass
class NgramModel:
    order: int
    probs: dict[tuple[str, ...], float]       # log10 P(w | h) for stored n-grams
    backoffs: dict[tuple[str, ...], float] = field(default_factory=dict)   # log10 alpha(h)

    def __post_init__(self):
        if self.order < 1:
            raise DataError("order must be >= 1")
        self.vocab = frozenset(ng[0] for ng in self.probs if len(ng) == 1)
        for tok in (BOS, EOS, UNK):
            if tok not in self.vocab:
                raise DataError(f"vocabulary lacks {tok}")
        self._contexts = frozenset(ng[:-1] for ng in self.probs if len(ng) > 1)

    @property
    def words(self) -> list[str]:
        """Predictable tokens (everything except ``<s>``), sorted."""
        return sorted(self.vocab - {BOS})

    def map_word(self, word: str) -> str:
        return word if word in self.vocab and word != BOS else UNK

    def state(self, history: Sequence[str]) -> tuple[str, ...]:
        """Shortest history that scores every next word identically to ``history``."""
        h = tuple(history)[len(history) - self.order + 1:] if self.order > 1 else ()
        while h and h not in self._contexts:
            h = h[1:]
        return h

    def log10_prob(self, word: str, history: Sequence[str] = ()) -> float:
        word = self.map_word(word)
        h = tuple(history)[len(history) - self.order + 1:] if self.order > 1 else ()
        total = 0.0
        while True:
            p = self.probs.get(h + (word,))
            if p is not None:
                return total + p
            total += self.backoffs.get(h, 0.0)
            h = h[1:]

    def counts_by_order(self) -> list[int]:
        c = Counter(len(ng) for ng in self.probs)
        return [c.get(k, 0) for k in range(1, self.order + 1)]


def _as_discounts(discount: float | Sequence[float], order: int) -> list[float]:
    ds = [float(discount)] * order if isinstance(discount, (int, float)) else [float(d) for d in discount]
    if len(ds) != order:
        raise DataError(f"need {order} discounts, got {len(ds)}")
    if any(not 0.0 < d <= 1.0 for d in ds):
        raise DataError("discounts must be in (0, 1]")
    return ds


def train_ngram(corpus: Iterable[Sequence[str]], order: int = 3,
                discount: float | Sequence[float] = 0.75,
                vocab: Iterable[str] | None = None) -> NgramModel:
    """Estimate a model from tokenized lines; ``vocab`` adds zero-count words."""
    if order < 1:
        raise DataError("order must be >= 1")
    ds = _as_discounts(discount, order)
    counts: list[Counter] = [Counter() for _ in range(order + 1)]
    n_lines = 0
    for line in corpus:
        n_lines += 1
        toks = [BOS, *line, EOS]
        for i in range(1, len(toks)):
            for k in range(1, order + 1):
                if i - k + 1 < 0:
                    break
                counts[k][tuple(toks[i - k + 1:i + 1])] += 1
    if n_lines == 0:
        raise DataError("empty training corpus")

    words = {ng[0] for ng in counts[1]} | set(vocab or ()) | {EOS, UNK}
    words.discard(BOS)
    probs: dict[tuple[str, ...], float] = {}
    backoffs: dict[tuple[str, ...], float] = {}

    # unigrams, interpolated with a uniform distribution
    total = sum(counts[1].values())
    d = ds[0]
    uniform_mass = d * len(counts[1]) / total
    p1 = {w: max(counts[1].get((w,), 0) - d, 0.0) / total + uniform_mass / len(words) for w in words}
    for w, p in p1.items():
        probs[(w,)] = math.log10(p)
    probs[(BOS,)] = NO_PROB

    lower = {(w,): p for w, p in p1.items()}
    for k in range(2, order + 1):
        d = ds[k - 1]
        ctx_total: Counter = Counter()
        ctx_types: Counter = Counter()
        for ng, c in counts[k].items():
            ctx_total[ng[:-1]] += c
            ctx_types[ng[:-1]] += 1
        current = {}
        for ng, c in counts[k].items():
            h = ng[:-1]
            alpha = d * ctx_types[h] / ctx_total[h]
            current[ng] = max(c - d, 0.0) / ctx_total[h] + alpha * lower[ng[1:]]
        for h in ctx_total:
            backoffs[h] = math.log10(d * ctx_types[h] / ctx_total[h])
        for ng, p in current.items():
            probs[ng] = math.log10(p)
        lower = current
    return NgramModel(order, probs, backoffs)


def sentence_logprob(model: NgramModel, words: Sequence[str]) -> float:
    """log10 P(words </s> | <s>)."""
    hist = [BOS]
    total = 0.0
    for w in [*words, EOS]:
        total += model.log10_prob(w, hist)
        hist.append(model.map_word(w))
    return total


def perplexity(model: NgramModel, corpus: Iterable[Sequence[str]]) -> float:
    total, tokens = 0.0, 0
    for line in corpus:
        total += sentence_logprob(model, line)
        tokens += len(line) + 1
    if tokens == 0:
        raise DataError("empty evaluation corpus")
    return 10.0 ** (-total / tokens)


# ------------------------------------------------------------------ ARPA

def _fmt(x: float) -> str:
    s = f"{x:.{ARPA_DECIMALS}f}"
    return "0." + "0" * ARPA_DECIMALS if s == "-0." + "0" * ARPA_DECIMALS else s


def format_arpa(model: NgramModel) -> str:
    """Canonical text: n-grams sorted per order, fixed decimals, back-off only where defined."""
    by_order: list[list[tuple[str, ...]]] = [[] for _ in range(model.order)]
    for ng in model.probs:
        by_order[len(ng) - 1].append(ng)
    out = ["", "\\data\\"]
    out += [f"ngram {k + 1}={len(ngs)}" for k, ngs in enumerate(by_order)]
    for k, ngs in enumerate(by_order):
        out += ["", f"\\{k + 1}-grams:"]
        for ng in sorted(ngs):
            line = f"{_fmt(model.probs[ng])}\t{' '.join(ng)}"
            if k + 1 < model.order and ng in model.backoffs:
                line += f"\t{_fmt(model.backoffs[ng])}"
            out.append(line)
    out += ["", "\\end\\", ""]
    return "\n".join(out)


def export_arpa(model: NgramModel, path: str | os.PathLike) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_arpa(model))
    os.replace(tmp, path)


def parse_arpa(text: str, source: str = "<arpa>") -> NgramModel:
    lines = text.splitlines()
    i = 0

    def fail(msg: str):
        raise ArpaFormatError(f"{source}:{i + 1}: {msg}")

    while i < len(lines) and lines[i].strip() != "\\data\\":
        i += 1
    if i == len(lines):
        raise ArpaFormatError(f"{source}: missing \\data\\ section")
    i += 1
    declared: dict[int, int] = {}
    while i < len(lines) and lines[i].strip().startswith("ngram "):
        try:
            k, n = lines[i].strip()[6:].split("=")
            declared[int(k)] = int(n)
        except ValueError:
            fail(f"bad count line {lines[i]!r}")
        i += 1
    if not declared or sorted(declared) != list(range(1, max(declared) + 1)):
        fail("n-gram counts must cover orders 1..N")
    order = max(declared)

    probs: dict[tuple[str, ...], float] = {}
    backoffs: dict[tuple[str, ...], float] = {}
    seen_orders: list[int] = []
    while i < len(lines):
        s = lines[i].strip()
        if not s:
            i += 1
            continue
        if s == "\\end\\":
            break
        if not (s.startswith("\\") and s.endswith("-grams:")):
            fail(f"expected a section header, got {s!r}")
        try:
            k = int(s[1:-7])
        except ValueError:
            fail(f"bad section header {s!r}")
        if k not in declared or k in seen_orders:
            fail(f"unexpected section {s!r}")
        seen_orders.append(k)
        i += 1
        n = 0
        while i < len(lines) and lines[i].strip() and not lines[i].strip().startswith("\\"):
            parts = lines[i].split()
            if len(parts) not in (k + 1, k + 2):
                fail(f"expected {k} words with probability and optional back-off")
            try:
                p = float(parts[0])
                bo = float(parts[k + 1]) if len(parts) == k + 2 else None
            except ValueError:
                fail("non-numeric probability or back-off")
            ng = tuple(parts[1:k + 1])
            if ng in probs:
                fail(f"duplicate n-gram {' '.join(ng)}")
            if p > 0 or not math.isfinite(p):
                fail("log10 probability must be finite and <= 0")
            probs[ng] = p
            if bo is not None:
                backoffs[ng] = bo
            n += 1
            i += 1
        if n != declared[k]:
            fail(f"{k}-gram section has {n} entries, header says {declared[k]}")
    else:
        raise ArpaFormatError(f"{source}: missing \\end\\")
    if sorted(seen_orders) != list(range(1, order + 1)):
        raise ArpaFormatError(f"{source}: missing n-gram sections")
    for ng in probs:
        if len(ng) > 1 and (ng[:-1] not in probs or ng[1:] not in probs):
            raise ArpaFormatError(f"{source}: n-gram {' '.join(ng)} lacks its lower-order prefix or suffix")
    if UNK not in {ng[0] for ng in probs if len(ng) == 1}:
        probs[(UNK,)] = NO_PROB
    try:
        return NgramModel(order, probs, backoffs)
    except DataError as exc:
        raise ArpaFormatError(f"{source}: {exc}") from None


def import_arpa(path: str | os.PathLike) -> NgramModel:
    with open(path, encoding="utf-8") as fh:
        return parse_arpa(fh.read(), str(path))


def write_vocab(model: NgramModel, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(w + "\n" for w in sorted(model.vocab))


def read_corpus(path: str | os.PathLike) -> list[list[str]]:
    """Text file, one sentence per line, normalized like annotations; blank lines skipped."""
    with open(path, encoding="utf-8") as fh:
        return [ws for ws in (normalize_words(line) for line in fh) if ws]
