"""Pronunciation lexicon and genre-tagged phone inventories.

Pronunciations are always stored as base phone symbols. Genre tags live
only in the phone inventory (``AA@pop``, ``SIL@metal``); which tagged
variant is used is decided when an alignment or decoding graph is built.
"""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import LexiconError, OOVError
from .genre import GENRE_ORDER, Genre

log = logging.getLogger(__name__)

SILENCE = "SIL"

# 39-phone ARPAbet set (CMUdict without stress).
DEFAULT_PHONES: tuple[str, ...] = (
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH", "EH", "ER", "EY",
    "F", "G", "HH", "IH", "IY", "JH", "K", "L", "M", "N", "NG", "OW", "OY", "P",
    "R", "S", "SH", "T", "TH", "UH", "UW", "V", "W", "Y", "Z", "ZH",
)

# Letter names used by the "spell" OOV policy (see README for the table).
LETTER_PRONUNCIATIONS: dict[str, tuple[str, ...]] = {
    "A": ("EY",), "B": ("B", "IY"), "C": ("S", "IY"), "D": ("D", "IY"),
    "E": ("IY",), "F": ("EH", "F"), "G": ("JH", "IY"), "H": ("EY", "CH"),
    "I": ("AY",), "J": ("JH", "EY"), "K": ("K", "EY"), "L": ("EH", "L"),
    "M": ("EH", "M"), "N": ("EH", "N"), "O": ("OW",), "P": ("P", "IY"),
    "Q": ("K", "Y", "UW"), "R": ("AA", "R"), "S": ("EH", "S"), "T": ("T", "IY"),
    "U": ("Y", "UW"), "V": ("V", "IY"), "W": ("D", "AH", "B", "AH", "L", "Y", "UW"),
    "X": ("EH", "K", "S"), "Y": ("W", "AY"), "Z": ("Z", "IY"),
}

OOV_POLICIES = ("strict", "spell")

_STRESS = re.compile(r"\d+$")


@dataclass(frozen=True)
class Phone:
    base: str
    genre: Genre | None = None

    @property
    def is_silence(self) -> bool:
        return self.base == SILENCE

    @property
    def name(self) -> str:
        return self.base if self.genre is None else f"{self.base}@{self.genre.value}"

    def __str__(self) -> str:
        return self.name

    def sort_key(self) -> tuple:
        return (self.base, -1 if self.genre is None else GENRE_ORDER[self.genre])

    def untagged(self) -> "Phone":
        return Phone(self.base)

    @classmethod
    def parse(cls, name: str) -> "Phone":
        base, sep, tag = name.partition("@")
        if not base:
            raise LexiconError(f"bad phone name {name!r}")
        return cls(base, Genre.parse(tag) if sep else None)


def sorted_phones(phones: Iterable[Phone]) -> list[Phone]:
    return sorted(phones, key=Phone.sort_key)


@dataclass(frozen=True)
class Lexicon:
    entries: dict[str, tuple[tuple[str, ...], ...]]
    phone_inventory: frozenset[Phone]

    def __post_init__(self):
        bases = {p.base for p in self.phone_inventory}
        for word, prons in self.entries.items():
            if not prons or any(not p for p in prons):
                raise LexiconError(f"empty pronunciation for {word!r}")
            missing = {ph for pron in prons for ph in pron} - bases
            if missing:
                raise LexiconError(f"{word!r} uses phones outside the inventory: {sorted(missing)}")

    def __contains__(self, word: str) -> bool:
        return word.upper() in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def words(self) -> list[str]:
        return list(self.entries)

    @property
    def base_phones(self) -> list[str]:
        """Speech phone symbols (no silence), sorted."""
        return sorted({p.base for p in self.phone_inventory if not p.is_silence})

    @property
    def genres(self) -> list[Genre]:
        return sorted({p.genre for p in self.phone_inventory if p.genre is not None},
                      key=GENRE_ORDER.__getitem__)

    def pronunciations(self, word: str) -> tuple[tuple[str, ...], ...]:
        return self.entries[word.upper()]


def make_lexicon(entries: dict[str, Sequence[Sequence[str]]], extra_phones: Iterable[str] = ()) -> Lexicon:
    clean = {w.upper(): tuple(tuple(p) for p in prons) for w, prons in entries.items()}
    bases = {ph for prons in clean.values() for pron in prons for ph in pron} | set(extra_phones)
    bases.discard(SILENCE)
    inventory = frozenset({Phone(b) for b in bases} | {Phone(SILENCE)})
    return Lexicon(clean, inventory)


def load_lexicon(path: str | os.PathLike, extra_phones: Iterable[str] = ()) -> Lexicon:
    """Parse ``WORD<TAB>PH1 PH2 ...`` lines; repeated words accumulate alternatives.

    Stress digits are stripped (``AH0`` -> ``AH``). Lines without a tab are
    split at the first run of whitespace, as in CMUdict.
    """
    entries: dict[str, list[tuple[str, ...]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith(";;;"):
                continue
            if "\t" in line:
                word, _, rest = line.partition("\t")
            else:
                word, _, rest = line.strip().partition(" ")
            word = word.strip().upper()
            pron = tuple(_STRESS.sub("", ph).upper() for ph in rest.split())
            if not word:
                raise LexiconError(f"{path}:{lineno}: missing word")
            if not pron:
                raise LexiconError(f"{path}:{lineno}: empty pronunciation for {word!r}")
            prons = entries.setdefault(word, [])
            if pron in prons:
                log.warning("%s:%d: duplicate pronunciation for %s dropped", path, lineno, word)
                continue
            prons.append(pron)
    return make_lexicon(entries, extra_phones)


def dump_lexicon(lex: Lexicon, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word, prons in lex.entries.items():
            for pron in prons:
                fh.write(f"{word}\t{' '.join(pron)}\n")


def expand_genre_phones(lex: Lexicon, genres: Iterable[Genre]) -> Lexicon:
    """Replace the inventory by one tagged copy of every phone (and SIL) per genre."""
    genres = set(genres)
    if not genres:
        raise ValueError("expand_genre_phones needs at least one genre")
    bases = {p.base for p in lex.phone_inventory} | {SILENCE}
    inventory = frozenset(Phone(b, g) for b in bases for g in genres)
    return Lexicon(dict(lex.entries), inventory)


def phones_listing(inventory: Iterable[Phone]) -> str:
    """``phones.txt`` body: one phone name per line, sorted."""
    return "".join(f"{p.name}\n" for p in sorted_phones(inventory))


def spell_word(word: str) -> tuple[str, ...]:
    letters = [ch for ch in word.upper() if ch != "'"]
    if not letters or any(ch not in LETTER_PRONUNCIATIONS for ch in letters):
        raise OOVError(word)
    return tuple(ph for ch in letters for ph in LETTER_PRONUNCIATIONS[ch])


def words_to_phone_sequences(lex: Lexicon, words: Sequence[str],
                             oov: str = "strict") -> list[tuple[tuple[str, ...], ...]]:
    """Pronunciation alternatives for every word, in order."""
    if oov not in OOV_POLICIES:
        raise ValueError(f"unknown OOV policy {oov!r}")
    out = []
    for word in words:
        key = word.upper()
        if key in lex.entries:
            out.append(lex.entries[key])
        elif oov == "spell":
            out.append((spell_word(key),))
        else:
            raise OOVError(word)
    return out
