"""Style-restricted conditioning.

A style lexicon is the union of theme words and key characters extracted
from a corpus that contains only poems of one style.  In style mode a
prompt may only condition on tokens from the lexicon, which keeps the
generated text inside the style's vocabulary of motifs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from .corpus import NormalizedPoem
from .errors import GuiyunError, StyleViolationError
from .extraction import (
    EmbeddingTable,
    IdfTable,
    Segmenter,
    key_chars as extract_key_chars,
    theme_words as extract_theme_words,
)


@dataclass(frozen=True)
class StyleLexicon:
    style_name: str
    allowed_theme_words: frozenset[str]
    allowed_key_chars: frozenset[str]

    def violations(
        self, theme_words: Iterable[str], key_chars: Iterable[str]
    ) -> tuple[str, ...]:
        bad = [t for t in theme_words if t not in self.allowed_theme_words]
        bad += [c for c in key_chars if c not in self.allowed_key_chars]
        return tuple(bad)

    def check(self, theme_words: Iterable[str], key_chars: Iterable[str]) -> None:
        bad = self.violations(theme_words, key_chars)
        if bad:
            raise StyleViolationError(bad)

    def to_json_dict(self) -> dict:
        return {
            "style_name": self.style_name,
            "theme_words": sorted(self.allowed_theme_words),
            "key_chars": sorted(self.allowed_key_chars),
        }

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), ensure_ascii=False, indent=1),
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "StyleLexicon":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            style_name=data.get("style_name", Path(path).stem),
            allowed_theme_words=frozenset(data["theme_words"]),
            allowed_key_chars=frozenset(data["key_chars"]),
        )


def build_style_lexicon(
    style_corpus: Iterable[NormalizedPoem],
    idf: IdfTable,
    emb: EmbeddingTable,
    segmenter: Segmenter,
    stopwords: frozenset[str],
    style_name: str = "",
) -> StyleLexicon:
    """Union of every style poem's default theme-word and key-char output."""
    themes: set[str] = set()
    keys: set[str] = set()
    n = 0
    for poem in style_corpus:
        n += 1
        themes.update(extract_theme_words(poem, idf, segmenter, stopwords))
        keys.update(extract_key_chars(poem, emb, stopwords, missing_ok=True))
    if n == 0:
        raise GuiyunError("empty style corpus")
    if not themes or not keys:
        raise GuiyunError(
            f"style corpus yields an empty lexicon "
            f"({len(themes)} theme words, {len(keys)} key chars)"
        )
    return StyleLexicon(
        style_name=style_name,
        allowed_theme_words=frozenset(themes),
        allowed_key_chars=frozenset(keys),
    )
