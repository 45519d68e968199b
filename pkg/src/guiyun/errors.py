"""Exception hierarchy shared across the toolkit.

Every domain error carries a short machine-readable ``code`` so the HTTP
layer and the CLI can report failures uniformly.
"""

from __future__ import annotations


class GuiyunError(Exception):
    """Base class for all domain errors."""

    code = "error"


class CorpusDecodeError(GuiyunError):
    """Corpus bytes are not valid UTF-8."""

    code = "undecodable_bytes"

    def __init__(self, byte_offset: int, message: str | None = None):
        self.byte_offset = byte_offset
        super().__init__(message or f"undecodable byte at offset {byte_offset}")


class EmptyPoemError(GuiyunError):
    code = "empty_poem"


class NoTemplateError(GuiyunError):
    """Raised when a poem's genre has no metrical template (``Other``)."""

    code = "no_template"


class RhymeBookFormatError(GuiyunError):
    code = "rhyme_book_format"

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class EmbeddingFormatError(GuiyunError):
    code = "embedding_format"

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class NoCoverageError(GuiyunError):
    """No candidate character has an embedding vector."""

    code = "no_coverage"

    def __init__(self, missing: tuple[str, ...]):
        self.missing = missing
        super().__init__("no coverage: " + "".join(missing))


class PromptError(GuiyunError):
    code = "bad_prompt"


class LineLengthError(PromptError):
    code = "line_length"


class StyleViolationError(GuiyunError):
    code = "style_violation"

    def __init__(self, offending: tuple[str, ...]):
        self.offending = offending
        super().__init__("tokens outside style lexicon: " + " ".join(offending))


class NoRhymeGroupError(GuiyunError):
    code = "no_rhyme_group"


class UnsupportedGenreError(GuiyunError):
    code = "unsupported_genre"


class InfeasibleConstraintsError(GuiyunError):
    code = "infeasible_constraints"


class ModelFormatError(GuiyunError):
    code = "model_format"


class LedgerError(GuiyunError):
    code = "ledger_error"


class ConfigError(GuiyunError):
    code = "config_error"
