"""Deterministic synthetic fixtures for tests and demos.

The shipped rhyme book covers a few hundred characters; the corpus builder
samples poems that follow the canonical tone schemes and rhyme inside one
group, so every generated record validates at STRICT against the same
book.  Everything is a pure function of its seed.
"""

from __future__ import annotations

import random
from importlib import resources
from pathlib import Path
from typing import Sequence

from .corpus import Genre, PoemRecord
from .decode import display_text
from .extraction import EmbeddingTable, load_embeddings
from .prosody import RhymeBook, ToneClass, load_rhyme_book, template_for

FIXTURE_BOOK_NAME = "pingshui_fixture"


def fixture_book_path() -> Path:
    return Path(str(resources.files("guiyun.data").joinpath("pingshui_fixture.tsv")))


def fixture_rhyme_book() -> RhymeBook:
    return load_rhyme_book(fixture_book_path(), name=FIXTURE_BOOK_NAME)


def _tone_buckets(book: RhymeBook) -> tuple[list[str], list[str]]:
    ping = sorted(ch for ch in book.chars if book.has_tone(ch, ToneClass.PING))
    ze = sorted(ch for ch in book.chars if book.has_tone(ch, ToneClass.ZE))
    return ping, ze


def _rhyme_groups(book: RhymeBook, minimum: int = 5) -> dict[str, list[str]]:
    groups: dict[str, list[str]] = {}
    for ch in sorted(book.chars):
        for reading in book.readings(ch):
            if reading.tone is ToneClass.PING:
                groups.setdefault(reading.group_id, []).append(ch)
    return {g: sorted(members) for g, members in groups.items() if len(members) >= minimum}


def build_fixture_corpus(
    n_poems: int = 1200,
    seed: int = 7,
    genres: Sequence[Genre] = (Genre.WUJUE, Genre.QIJUE),
    book: RhymeBook | None = None,
) -> list[PoemRecord]:
    """Sample scheme-conforming poems from the fixture rhyme book."""
    book = book or fixture_rhyme_book()
    rng = random.Random(seed)
    ping, ze = _tone_buckets(book)
    groups = _rhyme_groups(book)
    group_ids = sorted(groups)
    records = []
    for n in range(n_poems):
        genre = genres[rng.randrange(len(genres))]
        template = template_for(genre)
        scheme_idx = rng.randrange(len(template.schemes))
        scheme = template.schemes[scheme_idx]
        group = group_ids[rng.randrange(len(group_ids))]
        members = groups[group]
        rhyme_lines = set(template.rhyme_positions)
        if scheme[0][-1] is ToneClass.PING:
            rhyme_lines.add(1)   # opening line carries the rhyme in this scheme
        lines = []
        for i, pattern in enumerate(scheme):
            chars = []
            for j, tone in enumerate(pattern):
                last = j == len(pattern) - 1
                if last and (i + 1) in rhyme_lines:
                    chars.append(members[rng.randrange(len(members))])
                elif tone is ToneClass.PING:
                    chars.append(ping[rng.randrange(len(ping))])
                else:
                    chars.append(ze[rng.randrange(len(ze))])
            lines.append("".join(chars))
        records.append(
            PoemRecord(
                title=f"拟作其{n + 1}",
                dynasty="当代",
                author="无名氏",
                content=display_text(lines),
                source_id=f"fixture:{n + 1}",
            )
        )
    return records


def reduced_fixture_book(
    ping_groups: Sequence[str] = ("一东", "九青", "七阳"),
    ze_groups: Sequence[str] = ("一屋", "四质", "十一陌", "一送"),
) -> RhymeBook:
    """A small-vocabulary slice of the fixture book.

    Useful where a character n-gram needs realistic per-step entropy, e.g.
    when measuring how conditioning shifts the decoded text.
    """
    full = fixture_rhyme_book()
    keep = set(ping_groups) | set(ze_groups)
    readings = {
        ch: selected
        for ch in full.chars
        if (selected := frozenset(r for r in full.readings(ch) if r.group_id in keep))
    }
    return RhymeBook(readings, name=f"{FIXTURE_BOOK_NAME}-reduced")


def fixture_embedding_lines(
    tokens: Sequence[str], dim: int = 8, seed: int = 3, header: bool = True
) -> list[str]:
    """Text-format embedding lines with seeded gaussian components."""
    rng = random.Random(seed)
    lines = [f"{len(tokens)} {dim}"] if header else []
    for tok in tokens:
        comps = " ".join(f"{rng.gauss(0.0, 1.0):.4f}" for _ in range(dim))
        lines.append(f"{tok} {comps}")
    return lines


def build_fixture_embeddings(
    tokens: Sequence[str] | None = None, dim: int = 8, seed: int = 3
) -> EmbeddingTable:
    if tokens is None:
        tokens = sorted(fixture_rhyme_book().chars)
    return load_embeddings(fixture_embedding_lines(tokens, dim=dim, seed=seed))
