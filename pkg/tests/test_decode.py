from __future__ import annotations

import io
import itertools
import math
import random

import pytest

from guiyun.corpus import Genre, classify_genre, normalize
from guiyun.decode import constrained_decode, display_text
from guiyun.errors import InfeasibleConstraintsError
from guiyun.lm import LINE_END, POEM_END, train_ngram
from guiyun.prompts import (
    PromptMode,
    PromptSpec,
    RhymeConstraint,
    assemble_fs2text_prompt,
)
from guiyun.prosody import Strictness, Verdict, load_rhyme_book, validate

from conftest import TABLE2_INPUT_LINE

TOY_BOOK = load_rhyme_book(
    io.StringIO("东\t一东\t平\n风\t一东\t平\n青\t九青\t平\n月\t六月\t仄\n"),
    name="toy",
)
TOY_CHARS = ["东", "风", "月", "青"]


class FixedUnigram:
    """Context-independent distribution over the toy vocabulary."""

    order = 1

    def __init__(self, probs: dict[str, float], lm_id: str = "toy-unigram"):
        total = sum(probs.values())
        self._probs = {ch: p / total for ch, p in probs.items()}
        self.lm_id = lm_id

    @property
    def vocabulary(self):
        return sorted(self._probs)

    def next_distribution(self, context, prompt=None):
        return dict(self._probs)


def random_toy_lm(seed: int) -> FixedUnigram:
    rnd = random.Random(seed)
    probs = {ch: rnd.uniform(0.05, 1.0) for ch in TOY_CHARS}
    probs[LINE_END] = rnd.uniform(0.01, 0.2)
    probs[POEM_END] = rnd.uniform(0.01, 0.2)
    return FixedUnigram(probs, lm_id=f"toy-{seed}")


def enumerate_optimum(lm: FixedUnigram, first_line: str) -> tuple[str, float]:
    """Brute-force best constraint-satisfying completion for a WUJUE poem.

    Exhaustively scores all 4^5 candidate lines; lines 2 and 4 must end in
    the rhyme group seeded by the first line's end character.  Iteration in
    lexicographic order makes ties resolve to the smallest text, matching
    the decoder's tie rule.
    """
    dist = lm.next_distribution("")
    logp = {ch: math.log(dist[ch]) for ch in TOY_CHARS}
    seed_groups = TOY_BOOK.groups(first_line[-1])
    rhyme_ends = sorted(
        ch for ch in TOY_CHARS if TOY_BOOK.groups(ch) & seed_groups
    )
    all_lines = [
        "".join(combo) for combo in itertools.product(sorted(TOY_CHARS), repeat=5)
    ]
    line_score = {line: sum(logp[c] for c in line) for line in all_lines}

    def best(lines):
        top, top_score = None, -math.inf
        for line in lines:  # lexicographic order; strict > keeps the smallest
            if line_score[line] > top_score:
                top, top_score = line, line_score[line]
        return top, top_score

    best_by_end = {
        end: best([line for line in all_lines if line.endswith(end)])
        for end in rhyme_ends
    }
    line3, line3_score = best(all_lines)
    winner, winner_score = None, -math.inf
    for e2, e4 in itertools.product(rhyme_ends, repeat=2):
        line2, s2 = best_by_end[e2]
        line4, s4 = best_by_end[e4]
        total = s2 + line3_score + s4
        text = "".join([first_line, line2, line3, line4])
        if total > winner_score or (
            total == winner_score and text < winner
        ):
            winner, winner_score = text, total
        elif winner is None:
            winner, winner_score = text, total
    return winner, winner_score


class TestOptimalityOracle:
    def test_matches_exhaustive_enumeration_for_20_random_lms(self):
        first_line = "月青月风东"  # ends on 东: rhyme group 一东, ends in {东, 风}
        for seed in range(20):
            lm = random_toy_lm(seed)
            result = constrained_decode(
                lm,
                assemble_fs2text_prompt(Genre.WUJUE, (), (), first_line),
                TOY_BOOK,
                strictness=Strictness.RHYME_ONLY,
                beam_width=4096,
                seed=seed * 31 + 1,
                boost=1.0,
            )
            expected_text, _ = enumerate_optimum(lm, first_line)
            assert "".join(result.poem.lines) == expected_text, f"lm seed {seed}"

    def test_full_width_beam_is_seed_independent(self):
        lm = random_toy_lm(3)
        prompt = assemble_fs2text_prompt(Genre.WUJUE, (), (), "月青月风东")
        outputs = {
            constrained_decode(
                lm, prompt, TOY_BOOK,
                strictness=Strictness.RHYME_ONLY, beam_width=4096, seed=s, boost=1.0,
            ).poem.text
            for s in range(5)
        }
        assert len(outputs) == 1


class TestFs2Contract:
    def test_first_line_verbatim_and_validates(self, ngram_lm, book, fixture_poems):
        for n, poem in enumerate(fixture_poems[:10]):
            genre = classify_genre(poem)
            prompt = assemble_fs2text_prompt(genre, (), (), poem.lines[0])
            result = constrained_decode(ngram_lm, prompt, book, seed=n)
            assert result.poem.lines[0] == poem.lines[0]
            assert result.poem.line_lengths == poem.line_lengths
            report = validate(result.poem, genre, book, result.strictness_used)
            assert report.overall is Verdict.PASS

    def test_rhyme_group_seeded_by_known_ping_first_line_end(self, ngram_lm, book):
        prompt = assemble_fs2text_prompt(Genre.QIJUE, (), (), TABLE2_INPUT_LINE)
        result = constrained_decode(ngram_lm, prompt, book, seed=9)
        # 青 seeds 九青: both generated rhyme ends must carry it
        for line_no in (2, 4):
            end = result.poem.lines[line_no - 1][-1]
            assert "九青" in book.groups(end)

    def test_ze_first_line_end_leaves_group_to_line_two(self, ngram_lm, book):
        line = "鹤影过寒月"  # 月 is oblique: no group seeding
        prompt = assemble_fs2text_prompt(Genre.WUJUE, (), (), line)
        result = constrained_decode(ngram_lm, prompt, book, seed=4)
        end2 = result.poem.lines[1][-1]
        end4 = result.poem.lines[3][-1]
        assert book.groups(end2, None) & book.groups(end4, None)

    def test_deterministic_per_seed(self, ngram_lm, book):
        prompt = assemble_fs2text_prompt(Genre.QIJUE, ("白鹭",), ("烟",), TABLE2_INPUT_LINE)
        a = constrained_decode(ngram_lm, prompt, book, seed=77)
        b = constrained_decode(ngram_lm, prompt, book, seed=77)
        assert a.display_text == b.display_text and a.score == b.score

    def test_seeds_explore_different_outputs(self, ngram_lm, book):
        prompt = assemble_fs2text_prompt(Genre.QIJUE, (), (), TABLE2_INPUT_LINE)
        outputs = {
            constrained_decode(ngram_lm, prompt, book, seed=s).display_text
            for s in range(12)
        }
        assert len(outputs) > 3

    def test_metadata_fields(self, ngram_lm, book):
        prompt = assemble_fs2text_prompt(Genre.QIJUE, (), (), TABLE2_INPUT_LINE)
        result = constrained_decode(ngram_lm, prompt, book, seed=5)
        data = result.provenance()
        assert data["seed"] == 5
        assert data["lm_id"] == ngram_lm.lm_id
        assert data["strictness_used"] in ("relaxed", "rhyme_only")
        assert data["prompt"].startswith("七言绝句")


class TestRetryLadder:
    def test_unmatchable_first_line_relaxes_to_rhyme_only(self, ngram_lm, book):
        # an all-oblique first line fits no tone scheme at STRICT or RELAXED
        line = "月月月月月"
        prompt = assemble_fs2text_prompt(Genre.WUJUE, (), (), line)
        result = constrained_decode(
            ngram_lm, prompt, book, strictness=Strictness.STRICT, seed=1
        )
        assert result.strictness_used is Strictness.RHYME_ONLY
        assert result.relaxation_note is not None
        assert validate(result.poem, Genre.WUJUE, book, Strictness.RHYME_ONLY).overall is Verdict.PASS

    def test_infeasible_at_rhyme_only_raises(self, book):
        # the model's vocabulary has no member of 九青, the group seeded by 青
        lm = FixedUnigram(
            {"东": 0.4, "风": 0.3, "月": 0.2, LINE_END: 0.05, POEM_END: 0.05}
        )
        prompt = assemble_fs2text_prompt(Genre.WUJUE, (), (), "月月月月青")
        with pytest.raises(InfeasibleConstraintsError):
            constrained_decode(
                lm, prompt, TOY_BOOK, strictness=Strictness.RHYME_ONLY, seed=0
            )


class TestRr2Contract:
    def _constraint(self, poem, book):
        from guiyun.prosody import detect_rhyme_group, template_for

        detection = detect_rhyme_group(poem, book)
        positions = list(template_for(classify_genre(poem)).rhyme_positions)
        if detection.line1_member:
            positions = [1, *positions]
        return RhymeConstraint(
            group_id=sorted(detection.groups)[0],
            positions=tuple(positions),
            end_chars=tuple(poem.lines[p - 1][-1] for p in positions),
            forbidden_first_line=poem.lines[0],
        )

    def test_end_chars_identical_and_first_line_differs(self, ngram_lm, book, fixture_poems):
        sources = [p for p in fixture_poems if classify_genre(p) is Genre.WUJUE][:5]
        for n, source in enumerate(sources):
            constraint = self._constraint(source, book)
            prompt = PromptSpec(
                PromptMode.RR2TEXT, Genre.WUJUE, rhyme=constraint
            )
            result = constrained_decode(ngram_lm, prompt, book, seed=n * 7)
            for line_no, end in zip(constraint.positions, constraint.end_chars):
                assert result.poem.lines[line_no - 1][-1] == end
            assert result.poem.lines[0] != source.lines[0]

    def test_same_group_mode_when_not_matching_chars(self, ngram_lm, book, fixture_poems):
        source = next(p for p in fixture_poems if classify_genre(p) is Genre.WUJUE)
        constraint = self._constraint(source, book)
        prompt = PromptSpec(PromptMode.RR2TEXT, Genre.WUJUE, rhyme=constraint)
        result = constrained_decode(
            ngram_lm, prompt, book, seed=6, match_end_chars=False
        )
        for line_no in (2, 4):
            end = result.poem.lines[line_no - 1][-1]
            assert constraint.group_id in book.groups(end)


class TestConditioningBoost:
    def test_boost_raises_key_char_occurrences(self):
        from guiyun.fixtures import build_fixture_corpus, reduced_fixture_book
        from guiyun.lm import train_ngram

        reduced = reduced_fixture_book()
        poems = [
            normalize(r)
            for r in build_fixture_corpus(400, seed=17, genres=(Genre.WUJUE,), book=reduced)
        ]
        lm = train_ngram(poems, order=2, interpolation=0.5)
        keys = ("风", "青")
        first_line = next(
            p.lines[0] for p in poems if not set(keys) & set(p.lines[0])
        )
        prompt = assemble_fs2text_prompt(Genre.WUJUE, (), keys, first_line)
        gains = 0
        total_boosted = total_plain = 0
        for seed in range(30):
            boosted = constrained_decode(lm, prompt, reduced, seed=seed, boost=math.e)
            plain = constrained_decode(lm, prompt, reduced, seed=seed, boost=1.0)
            body_boosted = "".join(boosted.poem.lines[1:])
            body_plain = "".join(plain.poem.lines[1:])
            count_boosted = sum(body_boosted.count(k) for k in keys)
            count_plain = sum(body_plain.count(k) for k in keys)
            total_boosted += count_boosted
            total_plain += count_plain
            gains += count_boosted > count_plain
        assert total_boosted > total_plain
        assert gains > 0

    def test_boosted_char_loses_boost_after_emission(self, book):
        # once the key char appears, later steps must not keep inflating it;
        # with one dominant alternative the poem cannot be all key chars
        lm = FixedUnigram(
            {"东": 0.55, "风": 0.2, "月": 0.2, LINE_END: 0.03, POEM_END: 0.02}
        )
        prompt = assemble_fs2text_prompt(Genre.WUJUE, (), ("风",), "月月月月东")
        result = constrained_decode(
            lm, prompt, TOY_BOOK,
            strictness=Strictness.RHYME_ONLY, beam_width=64, seed=2,
            boost=5.0, noise_scale=0.0,
        )
        body = "".join(result.poem.lines[1:])
        assert body.count("风") <= 2  # appears, but is not repeated greedily


class TestDisplay:
    def test_display_punctuation(self):
        assert display_text(["一二三四五", "六七八九十"]) == "一二三四五，六七八九十。"
        lines = ["一二三四五", "六七八九十", "甲乙丙丁戊", "己庚辛壬癸"]
        assert display_text(lines) == "一二三四五，六七八九十。甲乙丙丁戊，己庚辛壬癸。"
        assert normalize(display_text(lines)).lines == tuple(lines)
