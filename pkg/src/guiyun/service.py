"""HTTP service exposing the pipeline to the composer UI and to scripts.

All bodies are JSON.  Domain failures map to 400 with
``{"error": {"code": ..., "message": ...}}``; anything unexpected is a 500
in the same shape.  Every successful generation is recorded in the ledger
and the response carries the entry id and the full provenance, including
the (possibly server-chosen) seed so any result can be reproduced.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .compose import follow_rhyme, generate_fs2text
from .config import ServiceConfig, load_config
from .corpus import Genre, classify_genre, deduplicate, normalize, parse_corpus
from .decode import DecodeResult
from .errors import EmptyPoemError, GuiyunError, UnsupportedGenreError
from .extraction import (
    MaxMatchSegmenter,
    build_idf,
    default_stopwords,
    key_chars,
    load_embeddings,
    load_stopwords,
    theme_words,
)
from .ledger import Ledger
from .lm import NGramModel, train_ngram
from .prosody import (
    Strictness,
    detect_rhyme_group,
    load_rhyme_book,
    tone_sequence,
    validate,
)
from .style import StyleLexicon


@dataclass
class ServiceState:
    config: ServiceConfig
    book: object
    stopwords: frozenset
    segmenter: MaxMatchSegmenter
    idf: object
    emb: object
    lm: object
    ledger: Ledger
    styles: dict[str, StyleLexicon]


def build_state(config: ServiceConfig) -> ServiceState:
    from .fixtures import fixture_rhyme_book

    book = load_rhyme_book(config.rhyme_book) if config.rhyme_book else fixture_rhyme_book()
    stopwords = load_stopwords(config.stopwords) if config.stopwords else default_stopwords()
    segmenter = MaxMatchSegmenter()
    if not config.corpus:
        raise GuiyunError("service needs a corpus path for IDF and the reference model")
    records = deduplicate(parse_corpus(Path(config.corpus).read_bytes(), source=config.corpus).records)
    poems = [p for p in (normalize(r) for r in records) if not p.has_gaps]
    idf = build_idf(poems, segmenter, stopwords)
    if not config.embeddings:
        raise GuiyunError("service needs an embeddings path")
    emb = load_embeddings(config.embeddings)
    if config.lm_path:
        lm = NGramModel.load(config.lm_path)
    else:
        lm = train_ngram(poems, order=config.lm_order)
    styles: dict[str, StyleLexicon] = {}
    if config.styles_dir:
        for path in sorted(Path(config.styles_dir).glob("*.json")):
            lexicon = StyleLexicon.load(path)
            styles[lexicon.style_name or path.stem] = lexicon
    return ServiceState(
        config=config,
        book=book,
        stopwords=stopwords,
        segmenter=segmenter,
        idf=idf,
        emb=emb,
        lm=lm,
        ledger=Ledger(config.ledger),
        styles=styles,
    )


class GenerateBody(BaseModel):
    genre: str
    first_line: str
    theme_words: list[str] = []
    key_chars: list[str] = []
    style: str | None = None
    seed: int | None = None
    strictness: str | None = None


class FollowRhymeBody(BaseModel):
    poem: str
    seed: int | None = None
    theme_fraction: float = 0.5
    key_fraction: float = 0.5
    strictness: str | None = None


class AnalyzeBody(BaseModel):
    poem: str
    strictness: str | None = None


class ExtractBody(BaseModel):
    poem: str
    k_theme: int | None = None
    k_key: int | None = None


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"code": code, "message": message}}
    )


def _strictness_or(default: Strictness, name: str | None) -> Strictness:
    if name is None:
        return default
    try:
        return Strictness.from_name(name)
    except ValueError as exc:
        raise GuiyunError(str(exc)) from None


def _fresh_seed() -> int:
    return random.SystemRandom().randrange(2**31)


def create_app(state: ServiceState | ServiceConfig | str | None = None) -> FastAPI:
    if state is None or isinstance(state, str):
        state = load_config(state)
    if isinstance(state, ServiceConfig):
        state = build_state(state)

    app = FastAPI(title="guiyun", version=__version__)
    app.state.resources = state
    if state.config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(state.config.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(GuiyunError)
    async def _domain_error(request: Request, exc: GuiyunError):
        return _error_response(400, exc.code, str(exc))

    @app.exception_handler(Exception)
    async def _internal_error(request: Request, exc: Exception):
        return _error_response(500, "internal", str(exc))

    def _generation_response(result: DecodeResult) -> dict:
        entry_id = state.ledger.record(
            result.poem,
            prompt=result.prompt.canonical_text,
            lm_id=result.lm_id,
            seed=result.seed,
        )
        prompt = result.prompt
        payload = {
            "poem": {
                "lines": list(result.poem.lines),
                "text": result.display_text,
                "genre": prompt.genre.display,
            },
            "meter": result.report.to_json_dict(),
            "prompt": {
                "mode": prompt.mode.value,
                "text": prompt.canonical_text,
                "theme_words": list(prompt.theme_words),
                "key_chars": list(prompt.key_chars),
            },
            "seed": result.seed,
            "beam_width": result.beam_width,
            "strictness_requested": result.strictness_requested.label,
            "strictness_used": result.strictness_used.label,
            "relaxation_note": result.relaxation_note,
            "lm_id": result.lm_id,
            "entry_id": entry_id,
        }
        if prompt.rhyme is not None:
            payload["prompt"]["rhyme"] = {
                "group": prompt.rhyme.group_id,
                "positions": list(prompt.rhyme.positions),
                "end_chars": list(prompt.rhyme.end_chars),
            }
        return payload

    @app.post("/generate")
    async def generate(body: GenerateBody):
        try:
            genre = Genre.from_name(body.genre)
        except ValueError as exc:
            raise UnsupportedGenreError(str(exc)) from None
        if genre is Genre.OTHER:
            raise UnsupportedGenreError("unsupported genre")
        style = None
        if body.style is not None:
            style = state.styles.get(body.style)
            if style is None:
                raise GuiyunError(f"unknown style: {body.style}")
        seed = body.seed if body.seed is not None else _fresh_seed()
        result = generate_fs2text(
            body.first_line,
            genre,
            tuple(body.theme_words),
            tuple(body.key_chars),
            style=style,
            lm=state.lm,
            book=state.book,
            strictness=_strictness_or(state.config.strictness, body.strictness),
            beam_width=state.config.beam_width,
            seed=seed,
        )
        return _generation_response(result)

    @app.post("/follow-rhyme")
    async def follow(body: FollowRhymeBody):
        if not body.poem.strip():
            raise EmptyPoemError("empty poem")
        seed = body.seed if body.seed is not None else _fresh_seed()
        result = follow_rhyme(
            body.poem,
            state.lm,
            state.book,
            state.idf,
            state.emb,
            segmenter=state.segmenter,
            stopwords=state.stopwords,
            theme_fraction=body.theme_fraction,
            key_fraction=body.key_fraction,
            strictness=_strictness_or(state.config.strictness, body.strictness),
            beam_width=state.config.beam_width,
            seed=seed,
        )
        return _generation_response(result)

    @app.post("/analyze")
    async def analyze(body: AnalyzeBody):
        if not body.poem.strip():
            raise EmptyPoemError("empty poem")
        poem = normalize(body.poem)
        genre = classify_genre(poem)
        tones = [
            [tone.value for tone in tone_sequence(line, state.book)]
            for line in poem.lines
        ]
        if genre is Genre.OTHER:
            return {
                "genre": genre.display,
                "rhyme_group": [],
                "meter": None,
                "tones": tones,
                "lines": list(poem.lines),
                "note": "no template",
            }
        strictness = _strictness_or(state.config.strictness, body.strictness)
        report = validate(poem, genre, state.book, strictness)
        detection = detect_rhyme_group(poem, state.book)
        return {
            "genre": genre.display,
            "rhyme_group": sorted(detection.groups),
            "meter": report.to_json_dict(),
            "tones": tones,
            "lines": list(poem.lines),
            "note": None,
        }

    @app.post("/extract")
    async def extract(body: ExtractBody):
        if not body.poem.strip():
            raise EmptyPoemError("empty poem")
        poem = normalize(body.poem)
        themes = theme_words(
            poem, state.idf, state.segmenter, state.stopwords, k=body.k_theme
        )
        keys = key_chars(poem, state.emb, state.stopwords, k=body.k_key, missing_ok=True)
        return {"theme_words": themes, "key_chars": keys}

    @app.get("/ledger/check")
    async def ledger_check(text: str = Query(...)):
        entry = state.ledger.check(text)
        if entry is None:
            return {"found": False, "entry": None}
        return {"found": True, "entry": entry.to_json_dict()}

    @app.get("/health")
    async def health():
        return {
            "status": "ok",
            "version": __version__,
            "lm_id": state.lm.lm_id,
            "ledger_entries": len(state.ledger),
            "styles": sorted(state.styles),
        }

    return app


def main() -> None:
    """Entry point used by ``guiyun serve``."""
    import uvicorn

    config = load_config()
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port)


if __name__ == "__main__":
    main()
