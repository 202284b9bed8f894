"""Lyrics text normalization shared by corpus, LM and evaluation code.

Rules: uppercase, every character that is not a letter, digit, apostrophe
or whitespace becomes a space, then split on whitespace. Hyphenated words
therefore split ("ROCK-N-ROLL" -> ROCK N ROLL).
"""

from __future__ import annotations

import re

_STRIP = re.compile(r"[^\w\s']|_")


def normalize_words(text: str) -> list[str]:
    return _STRIP.sub(" ", text.upper()).split()


def normalize_word(word: str) -> str:
    """Normalize a single token; raises if it normalizes to nothing or to several."""
    parts = normalize_words(word)
    if len(parts) != 1:
        raise ValueError(f"{word!r} does not normalize to a single word")
    return parts[0]
