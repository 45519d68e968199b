"""Pluggable language models over the poem character stream.

The decoder only needs ``next_distribution(context, prompt)`` returning a
probability map over a fixed character vocabulary that includes the
end-of-poem marker.  Poems are flattened to character events with a line
marker after every line and a poem marker at the end.

The reference implementation is an interpolated character n-gram: at each
order the maximum-likelihood estimate is mixed with the next-lower order,
and an unseen context falls through to the lower order unchanged.  An
out-of-process model can be attached through a newline-delimited JSON
protocol on its standard streams (one ``{"context", "prompt"}`` request
line, one ``{"probs": {...}}`` response line).
"""

from __future__ import annotations

import gzip
import hashlib
import json
import subprocess
import sys
from pathlib import Path
from typing import IO, Iterable, Mapping, Protocol, Sequence, Union, runtime_checkable

import numpy as np

from .corpus import NormalizedPoem
from .errors import GuiyunError, ModelFormatError
from .prompts import PromptSpec

LINE_END = "\n"
POEM_END = "\x04"
_BOS = "\x02"

MODEL_FORMAT = "guiyun-ngram"


@runtime_checkable
class LanguageModel(Protocol):
    """Anything that can score the next character given the poem so far."""

    lm_id: str

    @property
    def vocabulary(self) -> Sequence[str]: ...

    def next_distribution(
        self, context: str, prompt: PromptSpec | None = None
    ) -> Mapping[str, float]: ...


def poem_events(poem: NormalizedPoem) -> list[str]:
    """Flatten a poem into its character event stream."""
    events: list[str] = []
    for line in poem.lines:
        events.extend(line)
        events.append(LINE_END)
    events.append(POEM_END)
    return events


class NGramModel:
    """Interpolated character n-gram with marker-aware contexts."""

    def __init__(self, order: int, interpolation: float = 0.7):
        if order < 1:
            raise GuiyunError("n-gram order must be >= 1")
        if not 0.0 < interpolation <= 1.0:
            raise GuiyunError("interpolation weight must lie in (0, 1]")
        self.order = order
        self.interpolation = interpolation
        # counts[k] maps a length-k context tuple to {next char: count}
        self._counts: list[dict[tuple[str, ...], dict[str, int]]] = [
            {} for _ in range(order)
        ]
        self._vocab: list[str] = []
        self._index: dict[str, int] = {}
        self._cache: dict[tuple[str, ...], np.ndarray] = {}
        self._doc_count = 0

    # -- training ----------------------------------------------------------

    def fit(self, corpus: Iterable[NormalizedPoem]) -> "NGramModel":
        chars: set[str] = set()
        for poem in corpus:
            self._doc_count += 1
            events = poem_events(poem)
            chars.update(events)
            padded = [_BOS] * (self.order - 1) + events
            for i in range(self.order - 1, len(padded)):
                nxt = padded[i]
                for k in range(self.order):
                    ctx = tuple(padded[i - k : i])
                    table = self._counts[k].setdefault(ctx, {})
                    table[nxt] = table.get(nxt, 0) + 1
        if self._doc_count == 0:
            raise GuiyunError("empty corpus")
        self._vocab = sorted(chars)
        self._index = {ch: i for i, ch in enumerate(self._vocab)}
        self._cache.clear()
        return self

    @property
    def vocabulary(self) -> Sequence[str]:
        return self._vocab

    @property
    def lm_id(self) -> str:
        digest = hashlib.sha256(
            json.dumps(
                sorted(self._counts[0].get((), {}).items()), ensure_ascii=False
            ).encode("utf-8")
        ).hexdigest()[:8]
        return f"ngram-o{self.order}-i{self.interpolation}-d{self._doc_count}-{digest}"

    # -- scoring -----------------------------------------------------------

    def _ml_vector(self, k: int, ctx: tuple[str, ...]) -> np.ndarray | None:
        table = self._counts[k].get(ctx)
        if not table:
            return None
        vec = np.zeros(len(self._vocab))
        for ch, n in table.items():
            vec[self._index[ch]] = n
        return vec / vec.sum()

    def _vector_for(self, ctx: tuple[str, ...]) -> np.ndarray:
        """Interpolated distribution for a (possibly padded) context tuple."""
        if ctx in self._cache:
            return self._cache[ctx]
        if not ctx:
            vec = self._ml_vector(0, ())
        else:
            lower = self._vector_for(ctx[1:])
            ml = self._ml_vector(len(ctx), ctx)
            if ml is None:
                vec = lower
            else:
                lam = self.interpolation
                vec = lam * ml + (1.0 - lam) * lower
        # long contexts are cheap to reblend and too numerous to keep
        if len(ctx) <= 1:
            self._cache[ctx] = vec
        return vec

    def context_tuple(self, context: str) -> tuple[str, ...]:
        events = list(context)
        if len(events) < self.order - 1:
            events = [_BOS] * (self.order - 1 - len(events)) + events
        return tuple(events[len(events) - (self.order - 1) :]) if self.order > 1 else ()

    def next_probs(self, context: str) -> np.ndarray:
        """Distribution over ``vocabulary`` as an array (fast path)."""
        if not self._vocab:
            raise GuiyunError("model is not trained")
        return self._vector_for(self.context_tuple(context))

    def next_distribution(
        self, context: str, prompt: PromptSpec | None = None
    ) -> dict[str, float]:
        vec = self.next_probs(context)
        return {ch: float(vec[i]) for i, ch in enumerate(self._vocab)}

    # -- persistence -------------------------------------------------------

    def save(self, path: Union[str, Path]) -> None:
        payload = {
            "format": MODEL_FORMAT,
            "version": 1,
            "order": self.order,
            "interpolation": self.interpolation,
            "doc_count": self._doc_count,
            "counts": [
                {"\u0000".join(ctx): table for ctx, table in level.items()}
                for level in self._counts
            ],
        }
        raw = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        path = Path(path)
        if path.suffix == ".gz":
            path.write_bytes(gzip.compress(raw))
        else:
            path.write_bytes(raw)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "NGramModel":
        path = Path(path)
        raw = path.read_bytes()
        if path.suffix == ".gz":
            raw = gzip.decompress(raw)
        try:
            payload = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelFormatError(f"unreadable model file: {exc}") from exc
        if payload.get("format") != MODEL_FORMAT:
            raise ModelFormatError("not a n-gram model file")
        model = cls(payload["order"], payload["interpolation"])
        model._doc_count = payload["doc_count"]
        chars: set[str] = set()
        for k, level in enumerate(payload["counts"]):
            for joined, table in level.items():
                ctx = tuple(joined.split("\u0000")) if joined else ()
                model._counts[k][ctx] = {ch: int(n) for ch, n in table.items()}
                chars.update(table)
        model._vocab = sorted(chars)
        model._index = {ch: i for i, ch in enumerate(model._vocab)}
        return model


def train_ngram(corpus: Iterable[NormalizedPoem], order: int, interpolation: float = 0.7) -> NGramModel:
    return NGramModel(order, interpolation).fit(corpus)


# ---------------------------------------------------------------------------
# Out-of-process models

def serve_model(lm: LanguageModel, stdin: IO[str] | None = None, stdout: IO[str] | None = None) -> None:
    """Answer the line protocol until EOF (used by ``guiyun lm-serve``)."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        request = json.loads(line)
        probs = lm.next_distribution(request.get("context", ""), None)
        stdout.write(json.dumps({"probs": probs}, ensure_ascii=False) + "\n")
        stdout.flush()


class StdioLanguageModel:
    """Client side of the line protocol: one request line, one reply line."""

    def __init__(self, command: Sequence[str], lm_id: str = ""):
        self._proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
        )
        self.lm_id = lm_id or "stdio:" + " ".join(command)
        self._vocab: list[str] | None = None

    def _query(self, context: str, prompt: PromptSpec | None) -> dict[str, float]:
        request = {
            "context": context,
            "prompt": prompt.canonical_text if prompt is not None else "",
        }
        assert self._proc.stdin is not None and self._proc.stdout is not None
        self._proc.stdin.write(json.dumps(request, ensure_ascii=False) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise GuiyunError("language-model subprocess closed its output")
        return {str(k): float(v) for k, v in json.loads(line)["probs"].items()}

    @property
    def vocabulary(self) -> Sequence[str]:
        if self._vocab is None:
            self._vocab = sorted(self._query("", None))
        return self._vocab

    def next_distribution(
        self, context: str, prompt: PromptSpec | None = None
    ) -> dict[str, float]:
        return self._query(context, prompt)

    def close(self) -> None:
        if self._proc.stdin:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)

    def __enter__(self) -> "StdioLanguageModel":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
