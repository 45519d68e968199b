from __future__ import annotations

import pytest

from guiyun.corpus import Genre, normalize
from guiyun.errors import GuiyunError, StyleViolationError
from guiyun.extraction import (
    MaxMatchSegmenter,
    build_idf,
    key_chars,
    theme_words,
)
from guiyun.compose import generate_fs2text
from guiyun.fixtures import build_fixture_embeddings
from guiyun.style import StyleLexicon, build_style_lexicon

from conftest import TABLE2_INPUT_LINE

STYLE_DOCS = [
    "东风知人意，吹梦到青山。明月满空谷，清泉流水间。",
    "明月出东山，清风入梦间。故人千里外，春水向东还。",
]
OTHER_DOCS = ["孤城霜角冷，铁马渡寒冰。战鼓惊沙起，边声入夜深。"]


@pytest.fixture(scope="module")
def style_setup(stopwords):
    segmenter = MaxMatchSegmenter(("东风", "明月", "清风", "清泉", "故人", "春水"))
    poems = [normalize(t) for t in STYLE_DOCS + OTHER_DOCS]
    idf = build_idf(poems, segmenter, stopwords)
    chars = sorted({ch for p in poems for ch in p.text})
    emb = build_fixture_embeddings(chars, dim=4, seed=9)
    return segmenter, idf, emb


class TestBuildStyleLexicon:
    def test_union_of_per_poem_extractions(self, style_setup, stopwords):
        segmenter, idf, emb = style_setup
        poems = [normalize(t) for t in STYLE_DOCS]
        lexicon = build_style_lexicon(poems, idf, emb, segmenter, stopwords, "toy")
        expected_themes = set()
        expected_keys = set()
        for poem in poems:
            expected_themes.update(theme_words(poem, idf, segmenter, stopwords))
            expected_keys.update(key_chars(poem, emb, stopwords, missing_ok=True))
        assert lexicon.allowed_theme_words == frozenset(expected_themes)
        assert lexicon.allowed_key_chars == frozenset(expected_keys)

    def test_single_poem_lexicon(self, style_setup, stopwords):
        segmenter, idf, emb = style_setup
        poem = normalize(STYLE_DOCS[0])
        lexicon = build_style_lexicon([poem], idf, emb, segmenter, stopwords)
        assert lexicon.allowed_theme_words == frozenset(
            theme_words(poem, idf, segmenter, stopwords)
        )
        assert lexicon.allowed_key_chars == frozenset(
            key_chars(poem, emb, stopwords, missing_ok=True)
        )

    def test_disjoint_corpora_disjoint_lexicons(self, style_setup, stopwords):
        segmenter, idf, emb = style_setup
        a = build_style_lexicon(
            [normalize(STYLE_DOCS[0])], idf, emb, segmenter, stopwords
        )
        b = build_style_lexicon(
            [normalize(OTHER_DOCS[0])], idf, emb, segmenter, stopwords
        )
        assert not a.allowed_theme_words & b.allowed_theme_words
        assert not a.allowed_key_chars & b.allowed_key_chars

    def test_empty_corpus_rejected(self, style_setup, stopwords):
        segmenter, idf, emb = style_setup
        with pytest.raises(GuiyunError):
            build_style_lexicon([], idf, emb, segmenter, stopwords)

    def test_save_load_roundtrip(self, style_setup, stopwords, tmp_path):
        segmenter, idf, emb = style_setup
        lexicon = build_style_lexicon(
            [normalize(t) for t in STYLE_DOCS], idf, emb, segmenter, stopwords, "toy"
        )
        path = tmp_path / "style.json"
        lexicon.save(path)
        assert StyleLexicon.load(path) == lexicon


class TestStyleRestriction:
    LEXICON = StyleLexicon(
        "gaudy",
        allowed_theme_words=frozenset({"明月", "东风"}),
        allowed_key_chars=frozenset({"月", "风", "春"}),
    )

    def test_out_of_lexicon_theme_named(self, ngram_lm, book):
        with pytest.raises(StyleViolationError) as err:
            generate_fs2text(
                TABLE2_INPUT_LINE, Genre.QIJUE,
                theme_words=("白鹭",), key_chars=("月",),
                style=self.LEXICON, lm=ngram_lm, book=book,
            )
        assert "白鹭" in err.value.offending

    def test_out_of_lexicon_key_named(self):
        with pytest.raises(StyleViolationError) as err:
            self.LEXICON.check(["明月"], ["月", "鹭"])
        assert err.value.offending == ("鹭",)

    def test_in_lexicon_accepted(self, ngram_lm, book):
        result = generate_fs2text(
            TABLE2_INPUT_LINE, Genre.QIJUE,
            theme_words=("明月",), key_chars=("风",),
            style=self.LEXICON, lm=ngram_lm, book=book, seed=8,
        )
        assert result.poem.lines[0] == TABLE2_INPUT_LINE

    def test_rejection_happens_before_decoding(self, book):
        # no language model is touched when the style check fails
        with pytest.raises(StyleViolationError):
            generate_fs2text(
                TABLE2_INPUT_LINE, Genre.QIJUE,
                theme_words=("白鹭",),
                style=self.LEXICON, lm=None, book=book,
            )
