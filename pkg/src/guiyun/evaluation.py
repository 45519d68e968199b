"""Forced-choice discrimination testing and compliance metrics.

The questionnaire pairs a human poem with a machine poem sharing the same
genre and first line; respondents pick the one they believe is machine
made.  Scoring reports per-item and overall accuracy plus a two-sided
binomial test against chance, so "people cannot tell them apart" becomes a
checkable statistical claim rather than an impression.
"""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import Genre, NormalizedPoem, classify_genre, normalize
from .errors import GuiyunError
from .prosody import RhymeBook, Strictness, Verdict, validate

# Above this many trials the exact binomial test switches to a normal
# approximation with continuity correction.
EXACT_TEST_LIMIT = 10_000


@dataclass(frozen=True)
class TuringItem:
    item_id: str
    option_a: str
    option_b: str
    machine_option: str           # "A" | "B"; kept out of questionnaire exports
    genre: Genre
    shared_first_line: str

    def __post_init__(self):
        if self.machine_option not in ("A", "B"):
            raise GuiyunError("machine_option must be A or B")
        if self.option_a == self.option_b:
            raise GuiyunError("options must differ")


@dataclass(frozen=True)
class ResponseSheet:
    respondent_id: str
    choices: Mapping[str, str]    # item_id -> "A" | "B" | "skip"


@dataclass
class ScoreReport:
    total_choices: int
    total_correct: int
    accuracy: float | None        # None when no choices were made
    per_item: dict[str, dict]     # item_id -> {choices, correct, accuracy}
    p_value: float | None
    invalid_sheets: int = 0
    errors: list[str] = field(default_factory=list)

    @property
    def undefined(self) -> bool:
        return self.total_choices == 0

    def to_json_dict(self) -> dict:
        return {
            "total_choices": self.total_choices,
            "total_correct": self.total_correct,
            "accuracy": None if self.accuracy is None else round(self.accuracy, 4),
            "p_value": self.p_value,
            "per_item": self.per_item,
            "invalid_sheets": self.invalid_sheets,
            "errors": self.errors,
        }


def build_turing_set(
    pairs: Sequence[tuple[str, str]], seed: int
) -> tuple[list[TuringItem], dict[str, str]]:
    """Build questionnaire items from (human poem, machine poem) pairs.

    Each pair must share genre and first line; A/B order is randomized by
    the seed.  Returns the items and the answer key separately so the
    questionnaire can be distributed blind.
    """
    rng = random.Random(seed)
    items: list[TuringItem] = []
    key: dict[str, str] = {}
    for n, (human, machine) in enumerate(pairs, start=1):
        human_poem = normalize(human)
        machine_poem = normalize(machine)
        genre = classify_genre(human_poem)
        if classify_genre(machine_poem) is not genre:
            raise GuiyunError(f"pair {n}: genre mismatch")
        if human_poem.lines[0] != machine_poem.lines[0]:
            raise GuiyunError(f"pair {n}: first lines differ")
        machine_is_a = rng.random() < 0.5
        item_id = f"q{n:02d}"
        item = TuringItem(
            item_id=item_id,
            option_a=machine if machine_is_a else human,
            option_b=human if machine_is_a else machine,
            machine_option="A" if machine_is_a else "B",
            genre=genre,
            shared_first_line=human_poem.lines[0],
        )
        items.append(item)
        key[item_id] = item.machine_option
    return items, key


def questionnaire_json(items: Iterable[TuringItem]) -> list[dict]:
    """Public view of the items: no answer key inside."""
    return [
        {
            "item_id": it.item_id,
            "option_a": it.option_a,
            "option_b": it.option_b,
            "genre": it.genre.display,
            "shared_first_line": it.shared_first_line,
        }
        for it in items
    ]


def parse_response_csv(stream) -> list[ResponseSheet]:
    """Rows ``respondent_id,item_id,choice``; header row optional."""
    if hasattr(stream, "read"):
        text = stream.read()
    else:
        text = stream
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    sheets: dict[str, dict[str, str]] = {}
    order: list[str] = []
    for row_no, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row:
            continue
        if row_no == 1 and [c.strip() for c in row] == ["respondent_id", "item_id", "choice"]:
            continue
        if len(row) != 3:
            raise GuiyunError(f"row {row_no}: expected 3 fields")
        rid, item_id, choice = (c.strip() for c in row)
        if rid not in sheets:
            sheets[rid] = {}
            order.append(rid)
        sheets[rid][item_id] = choice
    return [ResponseSheet(rid, sheets[rid]) for rid in order]


def score_responses(
    key: Mapping[str, str], sheets: Sequence[ResponseSheet]
) -> ScoreReport:
    """Count choices matching the answer key; skips leave the denominator."""
    per_item = {
        item_id: {"choices": 0, "correct": 0, "accuracy": None} for item_id in key
    }
    total = correct = 0
    invalid = 0
    errors: list[str] = []
    for sheet in sheets:
        unknown = [item_id for item_id in sheet.choices if item_id not in key]
        if unknown:
            invalid += 1
            errors.append(
                f"sheet {sheet.respondent_id}: unknown items {','.join(sorted(unknown))}"
            )
            continue
        for item_id, choice in sheet.choices.items():
            if choice not in ("A", "B"):
                continue
            stats = per_item[item_id]
            stats["choices"] += 1
            total += 1
            if choice == key[item_id]:
                stats["correct"] += 1
                correct += 1
    for stats in per_item.values():
        if stats["choices"]:
            stats["accuracy"] = round(stats["correct"] / stats["choices"], 4)
    accuracy = correct / total if total else None
    p_value = binomial_pvalue(total, correct) if total else None
    return ScoreReport(
        total_choices=total,
        total_correct=correct,
        accuracy=accuracy,
        per_item=per_item,
        p_value=p_value,
        invalid_sheets=invalid,
        errors=errors,
    )


def _log_pmf(n: int, k: int, p0: float) -> float:
    return (
        math.lgamma(n + 1)
        - math.lgamma(k + 1)
        - math.lgamma(n - k + 1)
        + k * math.log(p0)
        + (n - k) * math.log(1 - p0)
    )


def binomial_pvalue(n: int, k: int, p0: float = 0.5) -> float:
    """Two-sided binomial test probability.

    Exact (summing all outcomes with probability not above the observed
    one) up to ``EXACT_TEST_LIMIT`` trials; beyond that a normal
    approximation with continuity correction keeps it O(1).
    """
    if n <= 0:
        raise GuiyunError("binomial test needs at least one trial")
    if not 0 <= k <= n:
        raise GuiyunError("successes must lie in [0, n]")
    if not 0 < p0 < 1:
        raise GuiyunError("null probability must lie in (0, 1)")
    if n > EXACT_TEST_LIMIT:
        mean = n * p0
        sd = math.sqrt(n * p0 * (1 - p0))
        z = (abs(k - mean) - 0.5) / sd
        if z < 0:
            return 1.0
        return min(1.0, math.erfc(z / math.sqrt(2)))
    observed = _log_pmf(n, k, p0)
    tolerance = 1e-12
    total = 0.0
    for i in range(n + 1):
        log_p = _log_pmf(n, i, p0)
        if log_p <= observed + tolerance:
            total += math.exp(log_p)
    return min(1.0, total)


@dataclass
class ComplianceReport:
    poem_count: int
    pass_rates: dict[str, float]
    distinct_char_ratio: float | None
    line_length_accuracy: float | None

    @property
    def empty(self) -> bool:
        return self.poem_count == 0

    def to_json_dict(self) -> dict:
        return {
            "poem_count": self.poem_count,
            "pass_rates": self.pass_rates,
            "distinct_char_ratio": self.distinct_char_ratio,
            "line_length_accuracy": self.line_length_accuracy,
            "empty": self.empty,
        }


def compliance_metrics(
    poems: Sequence[NormalizedPoem], genre: Genre, book: RhymeBook
) -> ComplianceReport:
    """Pass fractions by strictness plus shape and diversity statistics."""
    levels = (Strictness.RHYME_ONLY, Strictness.RELAXED, Strictness.STRICT)
    if not poems:
        return ComplianceReport(0, {s.label: 0.0 for s in levels}, None, None)
    passes = {s: 0 for s in levels}
    distinct_sum = 0.0
    shape_sum = 0.0
    for poem in poems:
        distinct_sum += len(set(poem.text)) / poem.char_count
        good = sum(1 for length in poem.line_lengths if length == genre.line_length)
        shape_sum += good / max(len(poem.lines), genre.line_count)
        if classify_genre(poem) is not genre:
            continue
        for level in levels:
            if validate(poem, genre, book, level).overall is Verdict.PASS:
                passes[level] += 1
    n = len(poems)
    return ComplianceReport(
        poem_count=n,
        pass_rates={s.label: passes[s] / n for s in levels},
        distinct_char_ratio=distinct_sum / n,
        line_length_accuracy=shape_sum / n,
    )
