"""Genre broadclasses and the raw-genre -> broadclass table."""

from __future__ import annotations

import logging
import os
import re
from enum import Enum
from types import MappingProxyType
from typing import Mapping

from .errors import GenreMapError

log = logging.getLogger(__name__)


class Genre(str, Enum):
    POP = "pop"
    HIPHOP = "hiphop"
    METAL = "metal"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, label: str) -> "Genre":
        try:
            return cls(label.strip().lower())
        except ValueError:
            raise GenreMapError(f"unknown genre broadclass {label!r}; expected one of "
                                f"{[g.value for g in cls]}") from None


GENRES: tuple[Genre, ...] = tuple(Genre)
GENRE_ORDER = {g: i for i, g in enumerate(GENRES)}

# Rows of the grouping table, verbatim (including the rock-ish genres under metal).
TABLE_ROWS: dict[Genre, tuple[str, ...]] = {
    Genre.HIPHOP: ("Rap", "Hip Hop", "R&B"),
    Genre.METAL: ("Metal", "Hard Rock", "Electro", "Alternative", "Dance", "Disco", "Rock", "Indie"),
    Genre.POP: ("Country", "Pop", "Jazz", "Soul", "Reggae", "Blues", "Classical"),
}

# Spelling variants seen in metadata; not part of the table proper.
ALIASES: dict[str, Genre] = {
    "hip-hop": Genre.HIPHOP,
    "hiphop": Genre.HIPHOP,
    "rhythm and blues": Genre.HIPHOP,
}

_WS = re.compile(r"\s+")


def normalize_genre(raw: str) -> str:
    return _WS.sub(" ", raw.replace("&", " and ").strip().lower()).strip()


class GenreMap:
    """Immutable lookup from normalized raw genre strings to broadclasses."""

    def __init__(self, entries: Mapping[str, Genre]):
        self._entries = MappingProxyType({normalize_genre(k): Genre(v) for k, v in entries.items()})

    @classmethod
    def default(cls) -> "GenreMap":
        entries: dict[str, Genre] = dict(ALIASES)
        for genre, names in TABLE_ROWS.items():
            entries.update({name: genre for name in names})
        return cls(entries)

    @property
    def entries(self) -> Mapping[str, Genre]:
        return self._entries

    def lookup(self, raw: str) -> Genre | None:
        return self._entries.get(normalize_genre(raw))

    def __contains__(self, raw: str) -> bool:
        return self.lookup(raw) is not None

    def __len__(self) -> int:
        return len(self._entries)


def classify_genre(raw: str, genre_map: GenreMap | None = None) -> Genre:
    """Broadclass for a raw tag. Unknown tags fall back to pop and log a warning."""
    genre_map = genre_map or GenreMap.default()
    genre = genre_map.lookup(raw)
    if genre is not None:
        return genre
    if normalize_genre(raw) in {g.value for g in GENRES}:
        return Genre(normalize_genre(raw))
    log.warning("unmapped genre %r, using pop", raw,
                extra={"event": "unmapped_genre", "raw_genre": raw, "fallback": "pop"})
    return Genre.POP


def load_genre_map(path: str | os.PathLike) -> GenreMap:
    """Read ``raw_genre<TAB>broadclass`` lines on top of the built-in table.

    Blank lines and ``#`` comments are ignored; file entries win over defaults.
    """
    entries = dict(GenreMap.default().entries)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 2 or not cols[0].strip():
                raise GenreMapError(f"{path}:{lineno}: expected 'raw_genre<TAB>broadclass', got {line!r}")
            try:
                entries[normalize_genre(cols[0])] = Genre.parse(cols[1])
            except GenreMapError as exc:
                raise GenreMapError(f"{path}:{lineno}: {exc}") from None
    return GenreMap(entries)
