"""Regulated-verse metrics: tone classes, rhyme groups, templates, validation.

Tone and rhyme knowledge comes from a rhyme book in the pingshui tradition:
a TSV mapping each character to one or more ``(group, tone)`` readings.
Genre templates are the four canonical tone schemes per genre; the usual
"one, three, five unrestricted" relaxation is applied at ``RELAXED``
strictness and disabled at ``STRICT``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum, IntEnum
from pathlib import Path
from typing import Mapping, Union

from .corpus import Genre, NormalizedPoem
from .errors import NoTemplateError, RhymeBookFormatError


class ToneClass(Enum):
    PING = "ping"
    ZE = "ze"
    UNKNOWN = "unknown"


class Strictness(IntEnum):
    """Validation levels, ordered from most permissive to most demanding."""

    OFF = 0
    RHYME_ONLY = 1
    RELAXED = 2
    STRICT = 3

    @classmethod
    def from_name(cls, name: str) -> "Strictness":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown strictness: {name!r}") from None

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class Reading:
    group_id: str
    tone: ToneClass


_TONE_NAMES = {"平": ToneClass.PING, "仄": ToneClass.ZE}


class RhymeBook:
    """Immutable character → readings table."""

    def __init__(self, readings: Mapping[str, frozenset[Reading]], name: str = ""):
        self.name = name
        self._readings = {ch: frozenset(rs) for ch, rs in readings.items()}
        self._group_members: dict[str, set[str]] = {}
        for ch, rs in self._readings.items():
            for r in rs:
                self._group_members.setdefault(r.group_id, set()).add(ch)

    def __contains__(self, ch: str) -> bool:
        return ch in self._readings

    def __len__(self) -> int:
        return len(self._readings)

    @property
    def chars(self):
        return self._readings.keys()

    def readings(self, ch: str) -> frozenset[Reading]:
        return self._readings.get(ch, frozenset())

    def groups(self, ch: str, tone: ToneClass | None = None) -> frozenset[str]:
        """Rhyme groups of a character, optionally restricted to one tone."""
        return frozenset(
            r.group_id for r in self.readings(ch) if tone is None or r.tone == tone
        )

    def has_tone(self, ch: str, tone: ToneClass) -> bool:
        return any(r.tone == tone for r in self.readings(ch))

    def tone_of(self, ch: str) -> ToneClass:
        """PING or ZE when unambiguous across readings, else UNKNOWN."""
        tones = {r.tone for r in self.readings(ch)}
        if len(tones) == 1:
            return next(iter(tones))
        return ToneClass.UNKNOWN

    def group_members(self, group_id: str, tone: ToneClass | None = None) -> frozenset[str]:
        members = self._group_members.get(group_id, set())
        if tone is None:
            return frozenset(members)
        return frozenset(ch for ch in members if Reading(group_id, tone) in self._readings[ch])


def load_rhyme_book(stream: Union[str, Path, io.TextIOBase], name: str = "") -> RhymeBook:
    """Load ``char<TAB>group<TAB>tone`` lines; tone is 平 or 仄.

    Repeated identical lines are idempotent; distinct lines for the same
    character accumulate readings.  Blank lines are skipped; anything else
    malformed aborts with its line number.
    """
    if isinstance(stream, (str, Path)):
        text = Path(stream).read_text(encoding="utf-8")
        name = name or Path(stream).stem
    else:
        text = stream.read()
    readings: dict[str, set[Reading]] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise RhymeBookFormatError(line_no, f"expected 3 tab-separated fields, got {len(parts)}")
        ch, group, tone_name = (p.strip() for p in parts)
        if len(ch) != 1:
            raise RhymeBookFormatError(line_no, f"character field must be a single char: {ch!r}")
        if not group:
            raise RhymeBookFormatError(line_no, "empty group id")
        if tone_name not in _TONE_NAMES:
            raise RhymeBookFormatError(line_no, f"tone must be 平 or 仄, got {tone_name!r}")
        readings.setdefault(ch, set()).add(Reading(group, _TONE_NAMES[tone_name]))
    return RhymeBook(readings, name=name)


# ---------------------------------------------------------------------------
# Genre templates

_P, _Z = ToneClass.PING, ToneClass.ZE

# The four line types of five-character regulated verse and their
# seven-character extensions (two opposite-tone positions prepended).
_A5, _B5, _C5, _D5 = "ZZPPZ", "PPZZP", "PPPZZ", "ZZZPP"
_A7, _B7, _C7, _D7 = "PPZZPPZ", "ZZPPZZP", "ZZPPPZZ", "PPZZZPP"

_QUATRAIN_SCHEMES_5 = (
    (_A5, _B5, _C5, _D5),
    (_D5, _B5, _C5, _D5),
    (_C5, _D5, _A5, _B5),
    (_B5, _D5, _A5, _B5),
)
_QUATRAIN_SCHEMES_7 = (
    (_A7, _B7, _C7, _D7),
    (_D7, _B7, _C7, _D7),
    (_C7, _D7, _A7, _B7),
    (_B7, _D7, _A7, _B7),
)


def _octave(scheme: tuple[str, ...], continuation: tuple[str, ...]) -> tuple[str, ...]:
    return scheme + continuation


_OCTAVE_SCHEMES_5 = (
    _octave(_QUATRAIN_SCHEMES_5[0], _QUATRAIN_SCHEMES_5[0]),
    _octave(_QUATRAIN_SCHEMES_5[1], _QUATRAIN_SCHEMES_5[0]),
    _octave(_QUATRAIN_SCHEMES_5[2], _QUATRAIN_SCHEMES_5[2]),
    _octave(_QUATRAIN_SCHEMES_5[3], _QUATRAIN_SCHEMES_5[2]),
)
_OCTAVE_SCHEMES_7 = (
    _octave(_QUATRAIN_SCHEMES_7[0], _QUATRAIN_SCHEMES_7[0]),
    _octave(_QUATRAIN_SCHEMES_7[1], _QUATRAIN_SCHEMES_7[0]),
    _octave(_QUATRAIN_SCHEMES_7[2], _QUATRAIN_SCHEMES_7[2]),
    _octave(_QUATRAIN_SCHEMES_7[3], _QUATRAIN_SCHEMES_7[2]),
)

_TONE_OF_LETTER = {"P": _P, "Z": _Z}


def _parse_scheme(scheme: tuple[str, ...]) -> tuple[tuple[ToneClass, ...], ...]:
    return tuple(tuple(_TONE_OF_LETTER[c] for c in line) for line in scheme)


@dataclass(frozen=True)
class MeterTemplate:
    genre: Genre
    schemes: tuple[tuple[tuple[ToneClass, ...], ...], ...]
    rhyme_positions: tuple[int, ...]          # 1-indexed lines that must rhyme
    optional_rhyme_position: int              # line 1 may rhyme; reported, never required
    relaxed_free: tuple[int, ...]             # 1-indexed positions free at RELAXED

    @property
    def line_count(self) -> int:
        return len(self.schemes[0])

    @property
    def line_length(self) -> int:
        return len(self.schemes[0][0])


_TEMPLATES = {
    Genre.WUJUE: MeterTemplate(
        Genre.WUJUE, tuple(_parse_scheme(s) for s in _QUATRAIN_SCHEMES_5),
        rhyme_positions=(2, 4), optional_rhyme_position=1, relaxed_free=(1, 3)),
    Genre.QIJUE: MeterTemplate(
        Genre.QIJUE, tuple(_parse_scheme(s) for s in _QUATRAIN_SCHEMES_7),
        rhyme_positions=(2, 4), optional_rhyme_position=1, relaxed_free=(1, 3, 5)),
    Genre.WULV: MeterTemplate(
        Genre.WULV, tuple(_parse_scheme(s) for s in _OCTAVE_SCHEMES_5),
        rhyme_positions=(2, 4, 6, 8), optional_rhyme_position=1, relaxed_free=(1, 3)),
    Genre.QILV: MeterTemplate(
        Genre.QILV, tuple(_parse_scheme(s) for s in _OCTAVE_SCHEMES_7),
        rhyme_positions=(2, 4, 6, 8), optional_rhyme_position=1, relaxed_free=(1, 3, 5)),
}


def template_for(genre: Genre) -> MeterTemplate:
    if genre not in _TEMPLATES:
        raise NoTemplateError("no template")
    return _TEMPLATES[genre]


# ---------------------------------------------------------------------------
# Rhyme detection

@dataclass(frozen=True)
class RhymeDetection:
    """Common rhyme groups over the required rhyme lines.

    ``groups`` is the intersection of the end characters' group sets; line 1
    is folded in only when its groups intersect the required lines'.  Missing
    characters make the result indeterminate rather than failed.
    """

    groups: frozenset[str]
    missing_chars: tuple[str, ...] = ()
    line1_member: bool | None = None

    @property
    def indeterminate(self) -> bool:
        return bool(self.missing_chars)


def detect_rhyme_group(
    poem: NormalizedPoem, book: RhymeBook, tone: ToneClass | None = None
) -> RhymeDetection:
    """Intersect the rhyme-line end characters' group sets.

    ``tone`` restricts readings (validation passes ``PING`` since rhyme
    positions sit on level-tone pattern slots); detection alone uses all
    readings.
    """
    genre = _classify(poem)
    template = template_for(genre)
    missing: list[str] = []
    common: frozenset[str] | None = None
    for line_no in template.rhyme_positions:
        ch = poem.lines[line_no - 1][-1]
        if ch not in book:
            missing.append(ch)
            continue
        groups = book.groups(ch, tone)
        common = groups if common is None else (common & groups)
    if common is None:
        common = frozenset()
    line1_member: bool | None = None
    first_end = poem.lines[template.optional_rhyme_position - 1][-1]
    if first_end in book and not (missing and not common):
        line1_groups = book.groups(first_end, tone)
        line1_member = bool(common & line1_groups)
        if line1_member:
            common = common & line1_groups
    return RhymeDetection(
        groups=common, missing_chars=tuple(missing), line1_member=line1_member
    )


def _classify(poem: NormalizedPoem) -> Genre:
    from .corpus import classify_genre

    genre = classify_genre(poem)
    if genre is Genre.OTHER:
        raise NoTemplateError("no template")
    return genre


# ---------------------------------------------------------------------------
# Validation

class PositionVerdict(Enum):
    PASS = "pass"
    FAIL = "fail"
    UNKNOWN = "unknown"
    FREE = "free"


class Verdict(Enum):
    PASS = "pass"
    FAIL = "fail"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class RhymeLineVerdict:
    line: int
    char: str
    member: bool | None   # None when the char is absent from the book
    required: bool


@dataclass(frozen=True)
class MeterReport:
    genre: Genre
    strictness: Strictness
    scheme_index: int | None
    lines: tuple[tuple[PositionVerdict, ...], ...]
    rhyme_groups: tuple[str, ...]
    rhyme_lines: tuple[RhymeLineVerdict, ...]
    missing_chars: tuple[str, ...]
    overall: Verdict

    def to_json_dict(self) -> dict:
        return {
            "genre": self.genre.display,
            "strictness": self.strictness.label,
            "rhyme_group": list(self.rhyme_groups),
            "lines": [[v.value for v in line] for line in self.lines],
            "overall": self.overall.value,
            "scheme": self.scheme_index,
            "rhyme_lines": [
                {"line": r.line, "char": r.char, "member": r.member, "required": r.required}
                for r in self.rhyme_lines
            ],
            "missing_chars": list(self.missing_chars),
        }


def tone_sequence(line: str, book: RhymeBook) -> list[ToneClass]:
    """Per-character tone classes; multi-tone characters are UNKNOWN here."""
    return [book.tone_of(ch) for ch in line]


def _free_at(template: MeterTemplate, strictness: Strictness, pos_1idx: int) -> bool:
    if strictness <= Strictness.RHYME_ONLY:
        return True
    if strictness == Strictness.RELAXED and pos_1idx in template.relaxed_free:
        return True
    return False


def _line_verdicts(
    line: str,
    pattern: tuple[ToneClass, ...],
    template: MeterTemplate,
    strictness: Strictness,
    book: RhymeBook,
) -> tuple[PositionVerdict, ...]:
    verdicts = []
    for j, ch in enumerate(line):
        if _free_at(template, strictness, j + 1):
            verdicts.append(PositionVerdict.FREE)
        elif not book.readings(ch):
            verdicts.append(PositionVerdict.UNKNOWN)
        elif book.has_tone(ch, pattern[j]):
            verdicts.append(PositionVerdict.PASS)
        else:
            verdicts.append(PositionVerdict.FAIL)
    return tuple(verdicts)


def validate(
    poem: NormalizedPoem,
    genre: Genre,
    book: RhymeBook,
    strictness: Strictness = Strictness.RELAXED,
) -> MeterReport:
    """Check a poem against its genre template at the given strictness.

    A position passes when any reading of its character fits; the rhyme
    verdict requires one group shared by all required rhyme lines (readings
    restricted to level tone once tones are being checked at all).  Overall
    is PASS only when every checked position and the rhyme verdict hold;
    unknown characters on checked positions yield INDETERMINATE unless some
    other check already failed.
    """
    template = template_for(genre)
    if len(poem.lines) != template.line_count or any(
        length != template.line_length for length in poem.line_lengths
    ):
        raise ValueError(
            f"poem shape {poem.line_lengths} does not match genre {genre.name}"
        )

    rhyme_tone = ToneClass.PING if strictness >= Strictness.RELAXED else None
    detection = detect_rhyme_group(poem, book, tone=rhyme_tone)

    rhyme_lines = []
    rhyme_fail = False
    for line_no in template.rhyme_positions:
        ch = poem.lines[line_no - 1][-1]
        if ch not in book:
            member = None
        else:
            member = bool(detection.groups & book.groups(ch, rhyme_tone))
        rhyme_lines.append(RhymeLineVerdict(line_no, ch, member, required=True))
        if member is False:
            rhyme_fail = True
    first_no = template.optional_rhyme_position
    first_ch = poem.lines[first_no - 1][-1]
    rhyme_lines.append(
        RhymeLineVerdict(first_no, first_ch, detection.line1_member, required=False)
    )
    if not detection.missing_chars and not detection.groups:
        rhyme_fail = True

    if strictness <= Strictness.RHYME_ONLY:
        lines = tuple(
            tuple(PositionVerdict.FREE for _ in line) for line in poem.lines
        )
        scheme_index = None
        tone_fail = tone_unknown = 0
    else:
        best = None
        for idx, scheme in enumerate(template.schemes):
            per_line = tuple(
                _line_verdicts(line, scheme[i], template, strictness, book)
                for i, line in enumerate(poem.lines)
            )
            fails = sum(v is PositionVerdict.FAIL for line in per_line for v in line)
            unknowns = sum(v is PositionVerdict.UNKNOWN for line in per_line for v in line)
            key = (fails, unknowns, idx)
            if best is None or key < best[0]:
                best = (key, idx, per_line)
        (tone_fail, tone_unknown, _), scheme_index, lines = best

    rhyme_indeterminate = bool(detection.missing_chars) and not rhyme_fail
    if strictness == Strictness.OFF:
        overall = Verdict.PASS
    elif tone_fail or rhyme_fail:
        overall = Verdict.FAIL
    elif tone_unknown or rhyme_indeterminate:
        overall = Verdict.INDETERMINATE
    else:
        overall = Verdict.PASS

    return MeterReport(
        genre=genre,
        strictness=strictness,
        scheme_index=scheme_index,
        lines=lines,
        rhyme_groups=tuple(sorted(detection.groups)),
        rhyme_lines=tuple(rhyme_lines),
        missing_chars=detection.missing_chars,
        overall=overall,
    )
