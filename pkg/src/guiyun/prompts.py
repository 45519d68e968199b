"""Conditioning prompts for the two generation modes.

FS2TEXT continues a given first line into a whole poem; RR2TEXT composes a
new poem on the rhyme of an existing one (matching its rhyme-position end
characters, with a different first line).  Both carry optional theme words
and key characters that steer decoding.

The canonical text form is space-separated: genre name, theme words, the
key characters as one block, then the first line (FS2TEXT) — e.g.
``七言绝句 白鹭 烟一山 杨柳花飞芜草青`` — or the rhyme end characters as one
block right after the genre (RR2TEXT).  Empty fields collapse their
separators.  When exactly one of the two conditioning fields is empty the
space form cannot be parsed back unambiguously, so serialization falls back
to the explicit ``&``-delimited field form, which is also accepted on parse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .corpus import Genre, NormalizedPoem, classify_genre
from .errors import (
    LineLengthError,
    NoRhymeGroupError,
    PromptError,
    UnsupportedGenreError,
)
from .extraction import (
    EmbeddingTable,
    IdfTable,
    Segmenter,
    character_segmenter,
    default_stopwords,
    key_chars as extract_key_chars,
    theme_words as extract_theme_words,
)
from .prosody import RhymeBook, detect_rhyme_group, template_for


class PromptMode(Enum):
    FS2TEXT = "fs2text"
    RR2TEXT = "rr2text"


@dataclass(frozen=True)
class RhymeConstraint:
    """Rhyme obligations carried by an RR2TEXT prompt.

    ``positions`` are 1-indexed line numbers; ``end_chars`` aligns with
    them.  ``group_id`` may be empty when reconstructed from bare text
    without a rhyme book.
    """

    group_id: str
    positions: tuple[int, ...]
    end_chars: tuple[str, ...]
    forbidden_first_line: str | None = None

    def __post_init__(self):
        if len(self.positions) != len(self.end_chars):
            raise PromptError("rhyme positions and end chars must align")
        if any(len(ch) != 1 for ch in self.end_chars):
            raise PromptError("rhyme end entries must be single characters")


@dataclass(frozen=True)
class PromptSpec:
    mode: PromptMode
    genre: Genre
    theme_words: tuple[str, ...] = ()
    key_chars: tuple[str, ...] = ()
    first_line: str | None = None
    rhyme: RhymeConstraint | None = None

    def __post_init__(self):
        if self.genre is Genre.OTHER:
            raise UnsupportedGenreError("prompts require a regulated-verse genre")
        if any((not t) or (" " in t) for t in self.theme_words):
            raise PromptError("theme words must be non-empty and space-free")
        if any(len(c) != 1 for c in self.key_chars):
            raise PromptError("key chars must be single characters")
        if self.mode is PromptMode.FS2TEXT:
            if self.rhyme is not None:
                raise PromptError("first-line prompts carry no rhyme constraint")
            if self.first_line is None:
                raise PromptError("first line required")
            if len(self.first_line) != self.genre.line_length:
                raise LineLengthError(
                    f"first line must have {self.genre.line_length} characters, "
                    f"got {len(self.first_line)}"
                )
        else:
            if self.first_line is not None:
                raise PromptError("rhyme prompts carry no first line")
            if self.rhyme is None:
                raise PromptError("rhyme constraint required")
            allowed = set(template_for(self.genre).rhyme_positions) | {1}
            if not set(self.rhyme.positions) <= allowed:
                raise PromptError(f"rhyme positions must lie in {sorted(allowed)}")

    @property
    def canonical_text(self) -> str:
        return serialize_prompt(self)


def serialize_prompt(spec: PromptSpec) -> str:
    themes = " ".join(spec.theme_words)
    keys = "".join(spec.key_chars)
    ambiguous = bool(spec.theme_words) != bool(spec.key_chars)
    if spec.mode is PromptMode.FS2TEXT:
        if ambiguous:
            return "&".join([spec.genre.display, themes, keys, spec.first_line])
        parts = [spec.genre.display, *spec.theme_words]
        if keys:
            parts.append(keys)
        parts.append(spec.first_line)
        return " ".join(parts)
    ends = "".join(spec.rhyme.end_chars)
    if ambiguous:
        return "&".join([spec.genre.display, ends, themes, keys])
    parts = [spec.genre.display, ends, *spec.theme_words]
    if keys:
        parts.append(keys)
    return " ".join(parts)


def _positions_for(genre: Genre, n_ends: int) -> tuple[int, ...]:
    base = template_for(genre).rhyme_positions
    if n_ends == len(base):
        return base
    if n_ends == len(base) + 1:
        return (1, *base)
    raise PromptError(
        f"{genre.display} takes {len(base)} or {len(base) + 1} rhyme end chars, got {n_ends}"
    )


def _rhyme_from_text(genre: Genre, ends: str, book: RhymeBook | None) -> RhymeConstraint:
    group = ""
    if book is not None and ends:
        common = None
        for ch in ends:
            groups = book.groups(ch)
            common = groups if common is None else common & groups
        if common:
            group = sorted(common)[0]
    return RhymeConstraint(
        group_id=group, positions=_positions_for(genre, len(ends)), end_chars=tuple(ends)
    )


def parse_prompt(text: str, book: RhymeBook | None = None) -> PromptSpec:
    """Parse either the space form or the ``&`` field form.

    In the space form a single token between the fixed fields is read as
    the key-character block; with two or more, the last is the key block
    and the rest are theme words.
    """
    text = text.strip()
    if not text:
        raise PromptError("empty prompt")
    if "&" in text:
        return _parse_amp(text, book)
    tokens = text.split()
    genre = _genre_token(tokens[0])
    rest = tokens[1:]
    if not rest:
        raise PromptError("prompt carries no content fields")
    if len(rest[-1]) == genre.line_length:
        middle, first_line = rest[:-1], rest[-1]
        themes, keys = _split_middle(middle)
        return PromptSpec(
            PromptMode.FS2TEXT, genre, themes, keys, first_line=first_line
        )
    ends, middle = rest[0], rest[1:]
    themes, keys = _split_middle(middle)
    return PromptSpec(
        PromptMode.RR2TEXT, genre, themes, keys, rhyme=_rhyme_from_text(genre, ends, book)
    )


def _split_middle(middle: list[str]) -> tuple[tuple[str, ...], tuple[str, ...]]:
    if not middle:
        return (), ()
    if len(middle) == 1:
        return (), tuple(middle[0])
    return tuple(middle[:-1]), tuple(middle[-1])


def _genre_token(token: str) -> Genre:
    try:
        return Genre.from_name(token)
    except ValueError:
        raise PromptError(f"prompt must start with a genre name, got {token!r}") from None


def _parse_amp(text: str, book: RhymeBook | None) -> PromptSpec:
    fields = [f.strip() for f in text.split("&")]
    if len(fields) != 4:
        raise PromptError(f"expected 4 &-separated fields, got {len(fields)}")
    try:
        genre = Genre.from_name(fields[0])
        genre_first = True
    except ValueError:
        genre = _genre_token(fields[-1])
        genre_first = False
    if genre_first:
        if len(fields[3]) == genre.line_length:
            themes, keys, first_line = fields[1], fields[2], fields[3]
            return PromptSpec(
                PromptMode.FS2TEXT, genre,
                tuple(themes.split()), tuple(keys), first_line=first_line,
            )
        ends, themes, keys = fields[1], fields[2], fields[3]
        return PromptSpec(
            PromptMode.RR2TEXT, genre,
            tuple(themes.split()), tuple(keys),
            rhyme=_rhyme_from_text(genre, ends, book),
        )
    first_line, themes, keys = fields[0], fields[1], fields[2]
    return PromptSpec(
        PromptMode.FS2TEXT, genre, tuple(themes.split()), tuple(keys), first_line=first_line
    )


def assemble_fs2text_prompt(
    genre: Genre,
    theme_words: tuple[str, ...] | list[str] = (),
    key_chars: tuple[str, ...] | list[str] = (),
    first_line: str = "",
) -> PromptSpec:
    return PromptSpec(
        PromptMode.FS2TEXT,
        genre,
        tuple(theme_words),
        tuple(key_chars),
        first_line=first_line,
    )


def assemble_rr2text_prompt(
    original: NormalizedPoem,
    book: RhymeBook,
    idf: IdfTable,
    emb: EmbeddingTable,
    segmenter: Segmenter | None = None,
    stopwords: frozenset[str] | None = None,
    theme_fraction: float = 0.5,
    key_fraction: float = 0.5,
) -> PromptSpec:
    """Build the rhyme-following prompt for an existing poem.

    The constraint pins the original's end characters at every required
    rhyme position (plus line 1 when it shares the group) and forbids
    reusing its first line.  Theme words and key chars are the top
    ``ceil(fraction × full)`` of the original's own extraction output, so
    the new poem stays near the original's subject without copying it.
    """
    genre = classify_genre(original)
    if genre is Genre.OTHER:
        raise UnsupportedGenreError("unsupported genre")
    segmenter = segmenter or character_segmenter()
    stopwords = default_stopwords() if stopwords is None else stopwords
    detection = detect_rhyme_group(original, book)
    if detection.indeterminate:
        raise NoRhymeGroupError(
            "no common rhyme group: characters missing from the rhyme book: "
            + "".join(detection.missing_chars)
        )
    if not detection.groups:
        raise NoRhymeGroupError("no common rhyme group")
    group_id = sorted(detection.groups)[0]
    positions = list(template_for(genre).rhyme_positions)
    if detection.line1_member:
        positions = [1, *positions]
    end_chars = tuple(original.lines[p - 1][-1] for p in positions)

    full_theme = extract_theme_words(original, idf, segmenter, stopwords)
    full_keys = extract_key_chars(original, emb, stopwords, missing_ok=True)
    n_theme = math.ceil(theme_fraction * len(full_theme))
    n_keys = math.ceil(key_fraction * len(full_keys))
    return PromptSpec(
        PromptMode.RR2TEXT,
        genre,
        tuple(full_theme[:n_theme]),
        tuple(full_keys[:n_keys]),
        rhyme=RhymeConstraint(
            group_id=group_id,
            positions=tuple(positions),
            end_chars=end_chars,
            forbidden_first_line=original.lines[0],
        ),
    )
