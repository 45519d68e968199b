"""Command-line interface.

Each subcommand wraps one library operation and prints JSON to stdout.
Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from pathlib import Path

from . import __version__
from .compose import follow_rhyme, generate_fs2text
from .corpus import Genre, classify_genre, deduplicate, normalize, parse_corpus, serialize_corpus
from .errors import GuiyunError
from .evaluation import (
    build_turing_set,
    parse_response_csv,
    questionnaire_json,
    score_responses,
)
from .extraction import (
    MaxMatchSegmenter,
    build_idf,
    default_stopwords,
    key_chars,
    load_embeddings,
    load_stopwords,
    theme_words,
)
from .fixtures import fixture_rhyme_book
from .ledger import Ledger
from .lm import NGramModel, serve_model, train_ngram
from .prosody import Strictness, detect_rhyme_group, load_rhyme_book, validate
from .style import StyleLexicon


def _print(data) -> None:
    print(json.dumps(data, ensure_ascii=False, indent=1))


def _load_book(path: str | None):
    return load_rhyme_book(path) if path else fixture_rhyme_book()


def _load_stop(path: str | None):
    return load_stopwords(path) if path else default_stopwords()


def _segmenter(path: str | None) -> MaxMatchSegmenter:
    if not path:
        return MaxMatchSegmenter()
    words = [w.strip() for w in Path(path).read_text(encoding="utf-8").splitlines()]
    return MaxMatchSegmenter(w for w in words if w)


def _corpus_poems(path: str):
    result = parse_corpus(Path(path).read_bytes(), source=path)
    return [normalize(r) for r in deduplicate(result.records)]


def _poem_text(args) -> str:
    if getattr(args, "text", None):
        return args.text
    if getattr(args, "file", None):
        return Path(args.file).read_text(encoding="utf-8")
    raise GuiyunError("provide --text or --file")


def _lm_from_args(args):
    if getattr(args, "lm", None):
        return NGramModel.load(args.lm)
    if getattr(args, "corpus", None):
        return train_ngram(_corpus_poems(args.corpus), order=args.order)
    raise GuiyunError("provide --lm MODEL or --corpus CSV to build the reference model")


def _maybe_record(args, result) -> str | None:
    if not getattr(args, "ledger", None):
        return None
    ledger = Ledger(args.ledger)
    return ledger.record(
        result.poem,
        prompt=result.prompt.canonical_text,
        lm_id=result.lm_id,
        seed=result.seed,
    )


def _generation_json(result, entry_id=None) -> dict:
    data = {
        "poem": {"lines": list(result.poem.lines), "text": result.display_text},
        "prompt": result.prompt.canonical_text,
        "meter": result.report.to_json_dict(),
        **result.provenance(),
    }
    if entry_id:
        data["entry_id"] = entry_id
    return data


# -- subcommand handlers -----------------------------------------------------

def cmd_ingest(args) -> None:
    raw = Path(args.corpus).read_bytes()
    result = parse_corpus(raw, source=args.corpus)
    unique = deduplicate(result.records)
    genres = Counter()
    gapped = 0
    for record in unique:
        poem = normalize(record)
        genres[classify_genre(poem).name.lower()] += 1
        gapped += poem.has_gaps
    if args.out:
        Path(args.out).write_text(serialize_corpus(unique), encoding="utf-8")
    _print(
        {
            "parsed": len(result.records),
            "row_errors": [{"row": e.row, "message": e.message} for e in result.errors],
            "unique": len(unique),
            "duplicates_removed": len(result.records) - len(unique),
            "gapped": gapped,
            "genres": dict(sorted(genres.items())),
            "out": args.out,
        }
    )


def cmd_extract(args) -> None:
    stop = _load_stop(args.stopwords)
    seg = _segmenter(args.lexicon)
    poems = _corpus_poems(args.corpus)
    idf = build_idf(poems, seg, stop)
    emb = load_embeddings(args.embeddings)

    def one(poem):
        return {
            "text": poem.text,
            "theme_words": theme_words(poem, idf, seg, stop, k=args.k_theme),
            "key_chars": key_chars(poem, emb, stop, k=args.k_key, missing_ok=True),
        }

    if args.poem:
        _print(one(normalize(args.poem)))
    else:
        for poem in poems:
            print(json.dumps(one(poem), ensure_ascii=False))


def cmd_analyze(args) -> None:
    poem = normalize(_poem_text(args))
    genre = classify_genre(poem)
    if genre is Genre.OTHER:
        _print({"genre": genre.display, "rhyme_group": [], "meter": None, "note": "no template"})
        return
    book = _load_book(args.rhyme_book)
    report = validate(poem, genre, book, Strictness.from_name(args.strictness))
    detection = detect_rhyme_group(poem, book)
    _print(
        {
            "genre": genre.display,
            "rhyme_group": sorted(detection.groups),
            "meter": report.to_json_dict(),
            "note": None,
        }
    )


def cmd_train_lm(args) -> None:
    poems = _corpus_poems(args.corpus)
    model = train_ngram(poems, order=args.order, interpolation=args.interpolation)
    model.save(args.out)
    _print({"out": args.out, "lm_id": model.lm_id, "poems": len(poems), "order": args.order})


def cmd_generate(args) -> None:
    book = _load_book(args.rhyme_book)
    lm = _lm_from_args(args)
    style = StyleLexicon.load(args.style) if args.style else None
    result = generate_fs2text(
        args.first_line,
        Genre.from_name(args.genre),
        tuple(args.theme),
        tuple(args.key),
        style=style,
        lm=lm,
        book=book,
        strictness=Strictness.from_name(args.strictness),
        beam_width=args.beam_width,
        seed=args.seed,
    )
    _print(_generation_json(result, _maybe_record(args, result)))


def cmd_follow_rhyme(args) -> None:
    book = _load_book(args.rhyme_book)
    stop = _load_stop(args.stopwords)
    seg = _segmenter(args.lexicon)
    poems = _corpus_poems(args.corpus)
    idf = build_idf(poems, seg, stop)
    emb = load_embeddings(args.embeddings)
    lm = NGramModel.load(args.lm) if args.lm else train_ngram(poems, order=args.order)
    original = Path(args.poem_file).read_text(encoding="utf-8") if args.poem_file else args.poem
    if not original:
        raise GuiyunError("provide --poem or --poem-file")
    result = follow_rhyme(
        original,
        lm,
        book,
        idf,
        emb,
        segmenter=seg,
        stopwords=stop,
        theme_fraction=args.theme_fraction,
        key_fraction=args.key_fraction,
        strictness=Strictness.from_name(args.strictness),
        beam_width=args.beam_width,
        seed=args.seed,
    )
    _print(_generation_json(result, _maybe_record(args, result)))


def cmd_turing_build(args) -> None:
    pairs_data = json.loads(Path(args.pairs).read_text(encoding="utf-8"))
    pairs = [(p["human"], p["machine"]) for p in pairs_data]
    items, key = build_turing_set(pairs, seed=args.seed)
    Path(args.questionnaire).write_text(
        json.dumps(questionnaire_json(items), ensure_ascii=False, indent=1),
        encoding="utf-8",
    )
    Path(args.key).write_text(json.dumps(key, indent=1), encoding="utf-8")
    _print({"items": len(items), "questionnaire": args.questionnaire, "key": args.key})


def cmd_turing_score(args) -> None:
    key = json.loads(Path(args.key).read_text(encoding="utf-8"))
    sheets = parse_response_csv(Path(args.responses).read_text(encoding="utf-8"))
    _print(score_responses(key, sheets).to_json_dict())


def cmd_ledger_check(args) -> None:
    ledger = Ledger(args.ledger)
    entry = ledger.check(_poem_text(args))
    _print({"found": entry is not None, "entry": entry.to_json_dict() if entry else None})


def cmd_serve(args) -> None:
    import uvicorn

    from .config import load_config
    from .service import create_app

    config = load_config(args.config)
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    uvicorn.run(create_app(config), host=config.host, port=config.port)


def cmd_lm_serve(args) -> None:
    serve_model(NGramModel.load(args.model))


# -- parser ------------------------------------------------------------------

def _add_resource_flags(p, *, book=False, stop=False, lexicon=False):
    if book:
        p.add_argument("--rhyme-book", help="rhyme book TSV (default: packaged fixture)")
    if stop:
        p.add_argument("--stopwords", help="stopword list (default: packaged)")
    if lexicon:
        p.add_argument("--lexicon", help="segmenter word list, one word per line")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="guiyun", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, deduplicate and classify a corpus CSV")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", help="write the deduplicated corpus CSV here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="theme words and key chars, one JSON per poem")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--poem", help="extract for this poem only")
    p.add_argument("--k-theme", type=int)
    p.add_argument("--k-key", type=int)
    _add_resource_flags(p, stop=True, lexicon=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("analyze", help="genre, meter report and rhyme group")
    p.add_argument("--text")
    p.add_argument("--file")
    p.add_argument("--strictness", default="relaxed")
    _add_resource_flags(p, book=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train-lm", help="train the reference n-gram model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--interpolation", type=float, default=0.7)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("generate", help="continue a first line into a poem")
    p.add_argument("--genre", required=True)
    p.add_argument("--first-line", required=True)
    p.add_argument("--theme", action="append", default=[])
    p.add_argument("--key", action="append", default=[])
    p.add_argument("--style", help="style lexicon JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strictness", default="relaxed")
    p.add_argument("--beam-width", type=int, default=16)
    p.add_argument("--lm", help="trained model file")
    p.add_argument("--corpus", help="train an n-gram on this corpus instead")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--ledger", help="record the result in this ledger file")
    _add_resource_flags(p, book=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("follow-rhyme", help="compose on the rhyme of an existing poem")
    p.add_argument("--poem")
    p.add_argument("--poem-file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--lm")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theme-fraction", type=float, default=0.5)
    p.add_argument("--key-fraction", type=float, default=0.5)
    p.add_argument("--strictness", default="relaxed")
    p.add_argument("--beam-width", type=int, default=16)
    p.add_argument("--ledger")
    _add_resource_flags(p, book=True, stop=True, lexicon=True)
    p.set_defaults(func=cmd_follow_rhyme)

    p = sub.add_parser("turing-build", help="build a blind A/B questionnaire")
    p.add_argument("--pairs", required=True, help='JSON: [{"human": ..., "machine": ...}]')
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--questionnaire", required=True)
    p.add_argument("--key", required=True)
    p.set_defaults(func=cmd_turing_build)

    p = sub.add_parser("turing-score", help="score response sheets against a key")
    p.add_argument("--key", required=True)
    p.add_argument("--responses", required=True)
    p.set_defaults(func=cmd_turing_score)

    p = sub.add_parser("ledger-check", help="was this text generated here?")
    p.add_argument("--ledger", required=True)
    p.add_argument("--text")
    p.add_argument("--file")
    p.set_defaults(func=cmd_ledger_check)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("lm-serve", help="serve a model over the stdio line protocol")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_lm_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except GuiyunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
