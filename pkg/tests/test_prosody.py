from __future__ import annotations

import io
import random

import pytest

from guiyun.corpus import Genre, classify_genre, normalize
from guiyun.errors import NoTemplateError, RhymeBookFormatError
from guiyun.fixtures import fixture_book_path
from guiyun.prosody import (
    PositionVerdict,
    Reading,
    Strictness,
    ToneClass,
    Verdict,
    detect_rhyme_group,
    load_rhyme_book,
    template_for,
    tone_sequence,
    validate,
)

from conftest import TABLE2_OUTPUT, TABLE4_ORIGINAL, TABLE4_OUTPUT


class TestLoadRhymeBook:
    def test_single_entry(self):
        book = load_rhyme_book(io.StringIO("东\t上平一东\t平\n"))
        assert book.readings("东") == frozenset({Reading("上平一东", ToneClass.PING)})

    def test_multi_reading_accumulates(self):
        book = load_rhyme_book(io.StringIO("中\t一东\t平\n中\t一送\t仄\n"))
        assert len(book.readings("中")) == 2
        assert book.tone_of("中") is ToneClass.UNKNOWN

    def test_duplicate_lines_idempotent(self):
        book = load_rhyme_book(io.StringIO("东\t一东\t平\n东\t一东\t平\n"))
        assert len(book.readings("东")) == 1

    def test_malformed_line_fatal_with_number(self):
        with pytest.raises(RhymeBookFormatError) as err:
            load_rhyme_book(io.StringIO("东\t一东\t平\n块 无分隔\n"))
        assert err.value.line_no == 2

    def test_bad_tone_rejected(self):
        with pytest.raises(RhymeBookFormatError):
            load_rhyme_book(io.StringIO("东\t一东\t上\n"))

    def test_fixture_book_matches_file_line_by_line(self, book):
        lines = fixture_book_path().read_text(encoding="utf-8").splitlines()
        sample = random.Random(5).sample(lines, 40)
        tones = {"平": ToneClass.PING, "仄": ToneClass.ZE}
        for line in sample:
            ch, group, tone = line.split("\t")
            assert Reading(group, tones[tone]) in book.readings(ch)


class TestDetectRhymeGroup:
    def test_table4_original(self, book):
        detection = detect_rhyme_group(normalize(TABLE4_ORIGINAL), book)
        assert detection.groups == frozenset({"一东"})
        assert detection.line1_member is True

    def test_table4_output(self, book):
        assert detect_rhyme_group(normalize(TABLE4_OUTPUT), book).groups == frozenset({"一东"})

    def test_table2_output(self, book):
        detection = detect_rhyme_group(normalize(TABLE2_OUTPUT), book)
        assert detection.groups == frozenset({"九青"})
        assert detection.line1_member is True

    def test_disjoint_groups_empty(self, book):
        poem = normalize("独起凭栏对晓风，满溪春水小桥东。始知昨夜红楼梦，身在桃花万树青。")
        detection = detect_rhyme_group(poem, book)
        assert detection.groups == frozenset()
        assert not detection.indeterminate

    def test_missing_char_is_indeterminate(self, book):
        poem = normalize("独起凭栏对晓风，满溪春水小桥彍。始知昨夜红楼梦，身在桃花万树中。")
        detection = detect_rhyme_group(poem, book)
        assert detection.indeterminate
        assert detection.missing_chars == ("彍",)

    def test_line1_outside_group_not_included(self, book):
        poem = normalize("独起凭栏对晓青，满溪春水小桥东。始知昨夜红楼梦，身在桃花万树中。")
        detection = detect_rhyme_group(poem, book)
        assert detection.groups == frozenset({"一东"})
        assert detection.line1_member is False

    def test_other_genre_rejected(self, book):
        with pytest.raises(NoTemplateError):
            detect_rhyme_group(normalize("三字句，不是诗。"), book)


class TestValidate:
    def test_table2_rhyme_only_pass(self, book):
        poem = normalize(TABLE2_OUTPUT)
        report = validate(poem, Genre.QIJUE, book, Strictness.RHYME_ONLY)
        assert report.overall is Verdict.PASS
        assert report.rhyme_groups == ("九青",)

    def test_rhyme_violation_fails_at_line4(self, book):
        poem = normalize("独起凭栏对晓风，满溪春水小桥东。始知昨夜红楼梦，身在桃花万树青。")
        report = validate(poem, Genre.QIJUE, book, Strictness.RHYME_ONLY)
        assert report.overall is Verdict.FAIL
        line4 = [v for v in report.rhyme_lines if v.line == 4][0]
        assert line4.member is False

    def test_unknown_checked_char_indeterminate(self, book):
        poem = normalize("独起凭栏对晓风，满溪春水小桥彍。始知昨夜红楼梦，身在桃花万树中。")
        report = validate(poem, Genre.QIJUE, book, Strictness.RHYME_ONLY)
        assert report.overall is Verdict.INDETERMINATE
        assert "彍" in report.missing_chars

    def test_other_genre_error(self, book):
        poem = normalize("三字句，不是诗。")
        with pytest.raises(NoTemplateError):
            validate(poem, Genre.OTHER, book)

    def test_shape_mismatch_rejected(self, book):
        with pytest.raises(ValueError):
            validate(normalize(TABLE2_OUTPUT), Genre.WUJUE, book)

    def test_monotonic_over_fixture_poems(self, book, fixture_poems):
        order = [Strictness.STRICT, Strictness.RELAXED, Strictness.RHYME_ONLY, Strictness.OFF]
        for poem in fixture_poems[:80]:
            genre = classify_genre(poem)
            passed = [
                validate(poem, genre, book, level).overall is Verdict.PASS
                for level in order
            ]
            # once passing at a stricter level, all looser levels must pass
            for stricter, looser in zip(passed, passed[1:]):
                assert not stricter or looser

    def test_strict_pass_on_generated_scheme_poem(self, book, fixture_poems):
        poem = fixture_poems[0]
        report = validate(poem, classify_genre(poem), book, Strictness.STRICT)
        assert report.overall is Verdict.PASS

    def test_relaxed_frees_odd_positions(self, book):
        # 彍 is unknown to the book; on position 1 or 3 it must not matter at RELAXED
        poem = normalize("彍柳花飞芜草青 野塘烟草自凋零 一双白鹭来烟际 点破遥山数抹青")
        report = validate(poem, Genre.QIJUE, book, Strictness.RELAXED)
        assert report.lines[0][0] is PositionVerdict.FREE
        assert report.overall is not Verdict.FAIL

    def test_off_always_passes(self, book):
        poem = normalize("独起凭栏对晓风，满溪春水小桥东。始知昨夜红楼梦，身在桃花万树青。")
        assert validate(poem, Genre.QIJUE, book, Strictness.OFF).overall is Verdict.PASS

    def test_rhyme_only_iff_detection_nonempty(self, book, fixture_poems):
        for poem in fixture_poems[:60]:
            genre = classify_genre(poem)
            detection = detect_rhyme_group(poem, book)
            report = validate(poem, genre, book, Strictness.RHYME_ONLY)
            assert bool(detection.groups) == (report.overall is Verdict.PASS)

    def test_json_shape(self, book):
        report = validate(normalize(TABLE2_OUTPUT), Genre.QIJUE, book, Strictness.RELAXED)
        data = report.to_json_dict()
        for key in ("genre", "strictness", "rhyme_group", "lines", "overall"):
            assert key in data
        assert data["genre"] == "七言绝句"
        assert len(data["lines"]) == 4 and len(data["lines"][0]) == 7


class TestToneSequence:
    def test_pure_ping(self, book):
        assert tone_sequence("东", book) == [ToneClass.PING]

    def test_multi_reading_unknown(self, book):
        assert tone_sequence("中", book) == [ToneClass.UNKNOWN]

    def test_line_against_fixture_entries(self, book):
        line = "杨柳花飞芜草青"
        expected = []
        for ch in line:
            readings = book.readings(ch)
            tones = {r.tone for r in readings}
            expected.append(tones.pop() if len(tones) == 1 else ToneClass.UNKNOWN)
        assert tone_sequence(line, book) == expected
        assert tone_sequence("听醒看", book) == [ToneClass.UNKNOWN] * 3


class TestTemplates:
    def test_shapes(self):
        for genre in (Genre.WUJUE, Genre.QIJUE, Genre.WULV, Genre.QILV):
            template = template_for(genre)
            assert len(template.schemes) == 4
            for scheme in template.schemes:
                assert len(scheme) == genre.line_count
                assert all(len(line) == genre.line_length for line in scheme)
            # every rhyme-position line ends on a level tone in every scheme
            for scheme in template.schemes:
                for line_no in template.rhyme_positions:
                    assert scheme[line_no - 1][-1] is ToneClass.PING

    def test_couplet_opposition_inside_schemes(self):
        # within each couplet the second and fourth positions oppose (对)
        for genre in (Genre.WUJUE, Genre.QIJUE, Genre.WULV, Genre.QILV):
            template = template_for(genre)
            for scheme in template.schemes:
                for start in range(0, template.line_count, 2):
                    first, second = scheme[start], scheme[start + 1]
                    assert first[1] is not second[1]
                    assert first[3] is not second[3]

    def test_couplet_adhesion_between_couplets(self):
        # line 3 matches line 2 on position 2 (粘), and so on down the poem
        for genre in (Genre.WUJUE, Genre.QIJUE, Genre.WULV, Genre.QILV):
            template = template_for(genre)
            for scheme in template.schemes:
                for even in range(1, template.line_count - 1, 2):
                    assert scheme[even][1] is scheme[even + 1][1]
