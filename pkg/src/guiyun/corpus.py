"""Corpus ingestion for the 4-field poem storage format.

Poem collections are CSV files with columns ``title,dynasty,author,content``
(header optional).  Records are normalized into punctuation-free line
sequences, classified into the regulated-verse genres, and deduplicated on a
content digest.
"""

from __future__ import annotations

import csv
import hashlib
import io
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import BinaryIO, Iterable, Sequence, TextIO, Union

from .errors import CorpusDecodeError, EmptyPoemError

FIELD_NAMES = ("title", "dynasty", "author", "content")

# Full-width sentence punctuation delimits verse lines, as does any
# whitespace.  Everything else in a punctuation/symbol category is stripped
# without splitting.
LINE_DELIMITERS = "，。？！、；："

# ASCII '?' stands in for characters the source could not display; it is
# stripped like punctuation but flags the record as gapped.
GAP_CHAR = "?"


@dataclass(frozen=True)
class PoemRecord:
    """One corpus row.  ``source_id`` is provenance only and never compared."""

    title: str
    dynasty: str
    author: str
    content: str
    source_id: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.content.strip():
            raise EmptyPoemError("empty poem")


@dataclass(frozen=True)
class NormalizedPoem:
    """A poem reduced to bare character lines.

    ``punctuation_map`` records every stripped character with its index in
    the original content, so the original text can be reconstructed exactly.
    """

    lines: tuple[str, ...]
    line_lengths: tuple[int, ...]
    char_count: int
    has_gaps: bool
    punctuation_map: tuple[tuple[int, str], ...] = field(default=(), compare=False)

    @property
    def text(self) -> str:
        return "".join(self.lines)


class Genre(Enum):
    """Regulated-verse genres, keyed by (line count, line length)."""

    WUJUE = (4, 5, "五言绝句")
    QIJUE = (4, 7, "七言绝句")
    WULV = (8, 5, "五言律诗")
    QILV = (8, 7, "七言律诗")
    OTHER = (None, None, "其他")

    @property
    def line_count(self):
        return self.value[0]

    @property
    def line_length(self):
        return self.value[1]

    @property
    def display(self) -> str:
        return self.value[2]

    @classmethod
    def from_name(cls, name: str) -> "Genre":
        """Accept either the Chinese display name or the enum name."""
        name = name.strip()
        for genre in cls:
            if name == genre.display or name.upper() == genre.name:
                return genre
        raise ValueError(f"unknown genre: {name!r}")


@dataclass(frozen=True)
class RowIssue:
    row: int
    message: str


@dataclass
class ParseResult:
    records: list[PoemRecord]
    errors: list[RowIssue]


def _is_stripped(ch: str) -> bool:
    return ch.isspace() or unicodedata.category(ch).startswith(("P", "S"))


def _read_text(stream: Union[bytes, str, BinaryIO, TextIO]) -> str:
    if hasattr(stream, "read"):
        stream = stream.read()
    if isinstance(stream, bytes):
        try:
            return stream.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusDecodeError(exc.start) from exc
    return stream


def parse_corpus(stream: Union[bytes, str, BinaryIO, TextIO], source: str = "") -> ParseResult:
    """Parse a CSV corpus into records.

    Malformed rows are collected per-row and parsing continues; bytes that
    do not decode as UTF-8 abort with the byte offset.  A header row is
    skipped when it matches the canonical field names exactly.
    """
    text = _read_text(stream)
    records: list[PoemRecord] = []
    errors: list[RowIssue] = []
    reader = csv.reader(io.StringIO(text))
    for row_no, row in enumerate(reader, start=1):
        if not row:
            continue
        if row_no == 1 and tuple(row) == FIELD_NAMES:
            continue
        if len(row) != len(FIELD_NAMES):
            errors.append(RowIssue(row_no, f"expected {len(FIELD_NAMES)} fields, got {len(row)}"))
            continue
        title, dynasty, author, content = row
        try:
            records.append(
                PoemRecord(title, dynasty, author, content, source_id=f"{source}:{row_no}")
            )
        except EmptyPoemError:
            errors.append(RowIssue(row_no, "empty content"))
    return ParseResult(records, errors)


def serialize_corpus(records: Iterable[PoemRecord]) -> str:
    """Inverse of :func:`parse_corpus`, header included."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIELD_NAMES)
    for rec in records:
        writer.writerow([rec.title, rec.dynasty, rec.author, rec.content])
    return buf.getvalue()


def normalize(record: Union[PoemRecord, str]) -> NormalizedPoem:
    """Split content into punctuation-free lines.

    Lines break on the full-width sentence punctuation （，。？！、；：）and
    newlines; all other punctuation, symbols and whitespace are stripped but
    remembered in the punctuation map.  The ASCII ``?`` gap placeholder sets
    ``has_gaps``.
    """
    content = record.content if isinstance(record, PoemRecord) else record
    lines: list[str] = []
    current: list[str] = []
    punct: list[tuple[int, str]] = []
    has_gaps = False
    for i, ch in enumerate(content):
        if ch == GAP_CHAR:
            has_gaps = True
            punct.append((i, ch))
        elif ch in LINE_DELIMITERS or ch.isspace():
            punct.append((i, ch))
            if current:
                lines.append("".join(current))
                current = []
        elif _is_stripped(ch):
            punct.append((i, ch))
        else:
            current.append(ch)
    if current:
        lines.append("".join(current))
    if not lines:
        raise EmptyPoemError("empty poem")
    lengths = tuple(len(line) for line in lines)
    return NormalizedPoem(
        lines=tuple(lines),
        line_lengths=lengths,
        char_count=sum(lengths),
        has_gaps=has_gaps,
        punctuation_map=tuple(punct),
    )


def reconstruct(poem: NormalizedPoem) -> str:
    """Rebuild the original content from lines plus the punctuation map."""
    total = poem.char_count + len(poem.punctuation_map)
    slots: list[str] = [""] * total
    for pos, ch in poem.punctuation_map:
        slots[pos] = ch
    chars = iter(poem.text)
    for i in range(total):
        if not slots[i]:
            slots[i] = next(chars)
    return "".join(slots)


def classify_genre(poem: NormalizedPoem) -> Genre:
    """Classify purely on line count and uniform line length."""
    lengths = set(poem.line_lengths)
    if len(lengths) == 1:
        shape = (len(poem.lines), lengths.pop())
        for genre in Genre:
            if (genre.line_count, genre.line_length) == shape:
                return genre
    return Genre.OTHER


def content_digest(content: str) -> str:
    """SHA-256 of the punctuation- and whitespace-free content."""
    bare = "".join(ch for ch in content if not _is_stripped(ch))
    return hashlib.sha256(bare.encode("utf-8")).hexdigest()


def deduplicate(records: Sequence[PoemRecord]) -> list[PoemRecord]:
    """Drop records whose normalized content digest was already seen."""
    seen: set[str] = set()
    unique: list[PoemRecord] = []
    for rec in records:
        digest = content_digest(rec.content)
        if digest in seen:
            continue
        seen.add(digest)
        unique.append(rec)
    return unique
