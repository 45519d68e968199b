"""High-level generation entry points wrapping prompt assembly and decoding."""

from __future__ import annotations

from typing import Union

from .corpus import Genre, NormalizedPoem, normalize
from .decode import DEFAULT_BEAM_WIDTH, DEFAULT_BOOST, DecodeResult, constrained_decode
from .extraction import EmbeddingTable, IdfTable, Segmenter
from .lm import LanguageModel
from .prompts import assemble_fs2text_prompt, assemble_rr2text_prompt
from .prosody import RhymeBook, Strictness
from .style import StyleLexicon


def generate_fs2text(
    first_line: str,
    genre: Genre,
    theme_words=(),
    key_chars=(),
    style: StyleLexicon | None = None,
    lm: LanguageModel = None,
    book: RhymeBook = None,
    strictness: Strictness = Strictness.RELAXED,
    beam_width: int = DEFAULT_BEAM_WIDTH,
    seed: int = 0,
    boost: float = DEFAULT_BOOST,
    noise_scale: float | None = None,
) -> DecodeResult:
    """Continue a first line into a whole poem.

    With a style lexicon, every conditioning token must come from the
    lexicon; violations are rejected before any decoding happens.
    """
    if style is not None:
        style.check(theme_words, key_chars)
    prompt = assemble_fs2text_prompt(genre, theme_words, key_chars, first_line)
    kwargs = {} if noise_scale is None else {"noise_scale": noise_scale}
    return constrained_decode(
        lm, prompt, book,
        strictness=strictness, beam_width=beam_width, seed=seed, boost=boost,
        **kwargs,
    )


def follow_rhyme(
    original: Union[NormalizedPoem, str],
    lm: LanguageModel,
    book: RhymeBook,
    idf: IdfTable,
    emb: EmbeddingTable,
    segmenter: Segmenter | None = None,
    stopwords: frozenset[str] | None = None,
    theme_fraction: float = 0.5,
    key_fraction: float = 0.5,
    strictness: Strictness = Strictness.RELAXED,
    beam_width: int = DEFAULT_BEAM_WIDTH,
    seed: int = 0,
    boost: float = DEFAULT_BOOST,
    match_end_chars: bool = True,
) -> DecodeResult:
    """Compose a new poem on the rhyme of an existing one.

    The result reuses the original's rhyme-position end characters in order
    (or merely its rhyme group with ``match_end_chars=False``) and never
    repeats the original's first line.
    """
    if isinstance(original, str):
        original = normalize(original)
    prompt = assemble_rr2text_prompt(
        original, book, idf, emb,
        segmenter=segmenter, stopwords=stopwords,
        theme_fraction=theme_fraction, key_fraction=key_fraction,
    )
    return constrained_decode(
        lm, prompt, book,
        strictness=strictness, beam_width=beam_width, seed=seed, boost=boost,
        match_end_chars=match_end_chars,
    )
