from __future__ import annotations

import re
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from genrealign.errors import LexiconError, OOVError
from genrealign.genre import Genre
from genrealign.lexicon import (
    DEFAULT_PHONES,
    LETTER_PRONUNCIATIONS,
    SILENCE,
    Phone,
    dump_lexicon,
    expand_genre_phones,
    load_lexicon,
    make_lexicon,
    phones_listing,
    spell_word,
    words_to_phone_sequences,
)


def write(tmp_path, text: str, name: str = "lex.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_single_entry(tmp_path):
    lex = load_lexicon(write(tmp_path, "HELLO\tHH AH L OW\n"))
    assert lex.pronunciations("hello") == (("HH", "AH", "L", "OW"),)


def test_alternatives_accumulate_in_order(tmp_path):
    lex = load_lexicon(write(tmp_path, "THE\tDH AH\nTHE\tDH IY\n"))
    assert lex.pronunciations("THE") == (("DH", "AH"), ("DH", "IY"))


def test_empty_pronunciation_rejected(tmp_path):
    with pytest.raises(LexiconError):
        load_lexicon(write(tmp_path, "X\t\n"))


def test_duplicate_pair_dropped_with_warning(tmp_path, caplog):
    lex = load_lexicon(write(tmp_path, "A\tEY\nA\tEY\n"))
    assert lex.pronunciations("A") == (("EY",),)
    assert "duplicate" in caplog.text


def test_cmudict_style_and_stress(tmp_path):
    lex = load_lexicon(write(tmp_path, ";;; comment\nABOUT  AH0 B AW1 T\n"))
    assert lex.pronunciations("about") == (("AH", "B", "AW", "T"),)


def test_default_phone_set_expansion_size():
    lex = make_lexicon({"A": [["EY"]]}, DEFAULT_PHONES)
    assert len(lex.base_phones) == 39
    tagged = expand_genre_phones(lex, set(Genre)).phone_inventory
    assert len(tagged) == 117 + 3
    assert sum(p.is_silence for p in tagged) == 3
    assert all(p.genre is not None for p in tagged)


def test_single_genre_is_isomorphic_and_expansion_idempotent():
    lex = make_lexicon({"CAT": [["K", "AE", "T"]]})
    pop = expand_genre_phones(lex, {Genre.POP})
    assert {p.untagged() for p in pop.phone_inventory} == set(lex.phone_inventory)
    assert expand_genre_phones(pop, {Genre.POP}).phone_inventory == pop.phone_inventory
    assert pop.entries == lex.entries


@given(st.sets(st.sampled_from(list(Genre)), min_size=1),
       st.sets(st.sampled_from(DEFAULT_PHONES), min_size=1))
def test_expansion_size_property(genres, phones):
    lex = make_lexicon({"W": [[sorted(phones)[0]]]}, phones)
    out = expand_genre_phones(lex, genres).phone_inventory
    assert len(out) == len(phones) * len(genres) + len(genres)


def test_expand_needs_genres():
    with pytest.raises(ValueError):
        expand_genre_phones(make_lexicon({"A": [["EY"]]}), set())


def test_phone_names_round_trip():
    for name in ["AA", "AA@pop", "SIL@metal", SILENCE]:
        assert Phone.parse(name).name == name
    assert Phone.parse("SIL@hiphop").is_silence
    with pytest.raises(LexiconError):
        Phone.parse("@pop")


def test_phones_listing_format():
    inv = {Phone("AA", Genre.METAL), Phone("AA", Genre.POP), Phone("SIL", Genre.POP)}
    assert phones_listing(inv) == "AA@pop\nAA@metal\nSIL@pop\n"


def test_words_to_phone_sequences():
    lex = make_lexicon({"HELLO": [["HH", "AH", "L", "OW"]], "THE": [["DH", "AH"], ["DH", "IY"]]})
    assert words_to_phone_sequences(lex, ["hello", "the"]) == [
        (("HH", "AH", "L", "OW"),), (("DH", "AH"), ("DH", "IY"))]
    with pytest.raises(OOVError, match="zap"):
        words_to_phone_sequences(lex, ["zap"], "strict")
    assert words_to_phone_sequences(lex, ["ok"], "spell") == [(("OW", "K", "EY"),)]
    with pytest.raises(ValueError):
        words_to_phone_sequences(lex, ["hello"], "guess")


def test_spelling_uses_letter_table():
    assert set(LETTER_PRONUNCIATIONS) == set("ABCDEFGHIJKLMNOPQRSTUVWXYZ")
    assert spell_word("don't") == LETTER_PRONUNCIATIONS["D"] + LETTER_PRONUNCIATIONS["O"] \
        + LETTER_PRONUNCIATIONS["N"] + LETTER_PRONUNCIATIONS["T"]
    with pytest.raises(OOVError):
        spell_word("42")


def test_readme_letter_table_matches_the_code():
    text = (Path(__file__).resolve().parents[1] / "README.md").read_text(encoding="utf-8")
    section = text.split("### Letter pronunciations", 1)[1]
    rows = re.findall(r"^\| ([A-Z]) \| ([A-Z ]+?) \|$", section, flags=re.M)
    assert {k: tuple(v.split()) for k, v in rows} == LETTER_PRONUNCIATIONS
    example = re.search(r"`OK` becomes `([A-Z ]+)`", section).group(1)
    assert spell_word("ok") == tuple(example.split())


def test_lexicon_invariants():
    with pytest.raises(LexiconError):
        make_lexicon({"A": [[]]})


@given(st.dictionaries(st.text("ABCDEFG'", min_size=1, max_size=6),
                       st.lists(st.lists(st.sampled_from(DEFAULT_PHONES), min_size=1, max_size=5),
                                min_size=1, max_size=3, unique_by=tuple), min_size=1, max_size=8))
def test_round_trip(tmp_path_factory, entries):
    lex = make_lexicon(entries)
    path = tmp_path_factory.mktemp("lex") / "lex.txt"
    dump_lexicon(lex, path)
    assert load_lexicon(path) == lex
