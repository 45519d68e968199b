from __future__ import annotations

import pytest

from guiyun.corpus import normalize
from guiyun.extraction import MaxMatchSegmenter, default_stopwords
from guiyun.fixtures import (
    build_fixture_corpus,
    build_fixture_embeddings,
    fixture_rhyme_book,
)
from guiyun.lm import train_ngram

TABLE2_INPUT_LINE = "杨柳花飞芜草青"
TABLE2_OUTPUT = "杨柳花飞芜草青 野塘烟草自凋零 一双白鹭来烟际 点破遥山数抹青"
TABLE4_ORIGINAL = "独起凭栏对晓风 满溪春水小桥东 始知昨夜红楼梦 身在桃花万树中"
TABLE4_OUTPUT = "日没荒墟生晓风 满溪流水碧山东 不知渔父相扶醉 独立苍茫烟雨中"
EXAMPLE_QUATRAIN = "后会何须约，前尘自可忘。一时同梦寐，万古各参商。"
OCTAVE_FIRST_LINE = "相见时难别亦难"


@pytest.fixture(scope="session")
def book():
    return fixture_rhyme_book()


@pytest.fixture(scope="session")
def stopwords():
    return default_stopwords()


@pytest.fixture(scope="session")
def segmenter():
    return MaxMatchSegmenter()


@pytest.fixture(scope="session")
def fixture_records():
    return build_fixture_corpus(1200, seed=7)


@pytest.fixture(scope="session")
def fixture_poems(fixture_records):
    return [normalize(r) for r in fixture_records]


@pytest.fixture(scope="session")
def ngram_lm(fixture_poems):
    return train_ngram(fixture_poems, order=3)


@pytest.fixture(scope="session")
def embeddings():
    return build_fixture_embeddings()
