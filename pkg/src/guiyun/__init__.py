"""Classical Chinese poetry toolkit.

Corpus ingestion, regulated-verse metrical validation, theme/key-character
extraction, constraint-enforcing generation around a pluggable language
model, discrimination-test scoring, and an append-only provenance ledger.
"""

from .compose import follow_rhyme, generate_fs2text
from .corpus import (
    Genre,
    NormalizedPoem,
    PoemRecord,
    classify_genre,
    deduplicate,
    normalize,
    parse_corpus,
    reconstruct,
    serialize_corpus,
)
from .decode import DecodeResult, constrained_decode, display_text
from .errors import GuiyunError
from .evaluation import (
    ResponseSheet,
    ScoreReport,
    TuringItem,
    binomial_pvalue,
    build_turing_set,
    compliance_metrics,
    score_responses,
)
from .extraction import (
    EmbeddingTable,
    IdfTable,
    MaxMatchSegmenter,
    build_idf,
    default_stopwords,
    key_chars,
    load_embeddings,
    load_stopwords,
    theme_words,
)
from .ledger import Ledger, LedgerEntry
from .lm import LanguageModel, NGramModel, StdioLanguageModel, train_ngram
from .prompts import (
    PromptMode,
    PromptSpec,
    RhymeConstraint,
    assemble_fs2text_prompt,
    assemble_rr2text_prompt,
    parse_prompt,
    serialize_prompt,
)
from .prosody import (
    MeterReport,
    RhymeBook,
    Strictness,
    ToneClass,
    detect_rhyme_group,
    load_rhyme_book,
    tone_sequence,
    validate,
)
from .style import StyleLexicon, build_style_lexicon

__version__ = "0.1.0"
