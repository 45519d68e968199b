"""Theme-word and key-character extraction.

Theme words come from TF-IDF over a segmented, stopword-filtered corpus
where each poem is one document.  Key characters are the poem characters
whose embedding vectors lie nearest the centroid of all candidate vectors.
Extraction counts default to 1/12 (words) and 1/10 (characters) of the
poem's character count, rounded half-up with a floor of one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Union

import numpy as np

from .corpus import NormalizedPoem
from .errors import EmbeddingFormatError, GuiyunError, NoCoverageError

THEME_FRACTION = 1 / 12
KEY_FRACTION = 1 / 10


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def default_count(char_count: int, fraction: float) -> int:
    return max(1, round_half_up(char_count * fraction))


class Segmenter(Protocol):
    def segment(self, text: str) -> list[str]: ...


class MaxMatchSegmenter:
    """Greedy forward maximum-match against a lexicon.

    Characters not starting any lexicon word are emitted as single-character
    tokens, so the concatenation of tokens always equals the input.
    """

    def __init__(self, lexicon: Iterable[str] = ()):
        self._words = {w for w in lexicon if w}
        self._max_len = max((len(w) for w in self._words), default=1)

    def segment(self, text: str) -> list[str]:
        tokens: list[str] = []
        i = 0
        while i < len(text):
            for width in range(min(self._max_len, len(text) - i), 1, -1):
                if text[i : i + width] in self._words:
                    tokens.append(text[i : i + width])
                    i += width
                    break
            else:
                tokens.append(text[i])
                i += 1
        return tokens


def character_segmenter() -> MaxMatchSegmenter:
    return MaxMatchSegmenter()


def load_stopwords(source: Union[str, Path, Iterable[str]]) -> frozenset[str]:
    """One token per line; blank lines ignored."""
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = list(source)
    return frozenset(line.strip() for line in lines if line.strip())


def default_stopwords() -> frozenset[str]:
    text = resources.files("guiyun.data").joinpath("stopwords.txt").read_text("utf-8")
    return load_stopwords(text.splitlines())


def poem_tokens(
    poem: NormalizedPoem, segmenter: Segmenter, stopwords: frozenset[str]
) -> list[str]:
    """Segment each line and drop stopword tokens and stopword characters."""
    tokens: list[str] = []
    for line in poem.lines:
        for tok in segmenter.segment(line):
            if tok not in stopwords:
                tokens.append(tok)
    return tokens


@dataclass(frozen=True)
class IdfTable:
    """Smoothed inverse document frequencies over a poem corpus."""

    doc_count: int
    df: Mapping[str, int] = field(default_factory=dict)

    def idf(self, token: str) -> float:
        n_docs = self.df.get(token, 0)
        return math.log((1 + self.doc_count) / (1 + n_docs)) + 1.0


def build_idf(
    corpus: Iterable[NormalizedPoem],
    segmenter: Segmenter,
    stopwords: frozenset[str],
) -> IdfTable:
    """One poem = one document; df counts documents containing a token."""
    df: dict[str, int] = {}
    n = 0
    for poem in corpus:
        n += 1
        for tok in set(poem_tokens(poem, segmenter, stopwords)):
            df[tok] = df.get(tok, 0) + 1
    if n == 0:
        raise GuiyunError("empty corpus")
    return IdfTable(doc_count=n, df=df)


def theme_words(
    poem: NormalizedPoem,
    idf: IdfTable,
    segmenter: Segmenter,
    stopwords: frozenset[str],
    k: int | None = None,
) -> list[str]:
    """Top-k tokens by tf·idf, ties broken by first occurrence in the poem."""
    if k is None:
        k = default_count(poem.char_count, THEME_FRACTION)
    tokens = poem_tokens(poem, segmenter, stopwords)
    tf: dict[str, int] = {}
    first_at: dict[str, int] = {}
    for i, tok in enumerate(tokens):
        tf[tok] = tf.get(tok, 0) + 1
        first_at.setdefault(tok, i)
    ranked = sorted(tf, key=lambda t: (-tf[t] * idf.idf(t), first_at[t]))
    return ranked[:k]


@dataclass
class EmbeddingTable:
    """Token → fixed-dimension vector map."""

    dim: int
    vectors: dict[str, np.ndarray]
    replaced: int = 0   # duplicate tokens overwritten during load

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token)


def load_embeddings(source: Union[str, Path, Iterable[str]]) -> EmbeddingTable:
    """Parse the whitespace-separated text vector format.

    An optional first line ``<count> <dim>`` declares the shape; otherwise
    the first data line fixes the dimension.  A line whose component count
    disagrees aborts with its line number; duplicate tokens keep the last
    vector and bump ``replaced``.
    """
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = [line.rstrip("\n") for line in source]
    dim: int | None = None
    vectors: dict[str, np.ndarray] = {}
    replaced = 0
    start = 0
    if lines:
        head = lines[0].split()
        if len(head) == 2 and all(p.lstrip("-").isdigit() for p in head):
            dim = int(head[1])
            if dim <= 0:
                raise EmbeddingFormatError(1, f"non-positive dimension {dim}")
            start = 1
    for line_no, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        parts = line.split()
        token, comps = parts[0], parts[1:]
        if dim is None:
            if not comps:
                raise EmbeddingFormatError(line_no, "no vector components")
            dim = len(comps)
        if len(comps) != dim:
            raise EmbeddingFormatError(
                line_no, f"expected {dim} components, got {len(comps)}"
            )
        try:
            vec = np.array([float(c) for c in comps], dtype=float)
        except ValueError:
            raise EmbeddingFormatError(line_no, "non-numeric component") from None
        if not np.all(np.isfinite(vec)):
            raise EmbeddingFormatError(line_no, "non-finite component")
        if token in vectors:
            replaced += 1
        vectors[token] = vec
    if dim is None:
        raise EmbeddingFormatError(1, "empty embedding file")
    return EmbeddingTable(dim=dim, vectors=vectors, replaced=replaced)


def key_chars(
    poem: NormalizedPoem,
    emb: EmbeddingTable,
    stopwords: frozenset[str],
    k: int | None = None,
    missing_ok: bool = False,
) -> list[str]:
    """Characters nearest the centroid of the poem's candidate vectors.

    Candidates are the distinct non-stopword characters that have
    embeddings, in first-occurrence order; ties in distance keep that
    order.  With no covered candidate the call fails, unless ``missing_ok``
    requests an empty result instead.
    """
    if k is None:
        k = default_count(poem.char_count, KEY_FRACTION)
    seen: list[str] = []
    missing: list[str] = []
    for ch in poem.text:
        if ch in stopwords or ch in seen or ch in missing:
            continue
        if ch in emb:
            seen.append(ch)
        else:
            missing.append(ch)
    if not seen:
        if missing_ok:
            return []
        raise NoCoverageError(tuple(missing))
    matrix = np.stack([emb.vectors[ch] for ch in seen])
    centroid = matrix.mean(axis=0)
    dists = np.linalg.norm(matrix - centroid, axis=1)
    order = sorted(range(len(seen)), key=lambda i: (dists[i], i))
    return [seen[i] for i in order[:k]]
