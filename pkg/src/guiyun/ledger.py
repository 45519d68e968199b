"""Append-only ledger of generated works.

Anyone can ask "did this system generate this poem?"; the ledger answers by
exact lookup on the digest of the punctuation- and whitespace-free text.
Storage is one JSON object per line so the history stays auditable and
diff-friendly; an in-memory digest index is rebuilt on open.  Entries are
never mutated or removed.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Union

from .corpus import NormalizedPoem
from .errors import LedgerError

_FIELDS = ("entry_id", "normalized_text", "raw_text", "created_at", "prompt", "lm_id", "seed")


def text_digest(normalized_text: str) -> str:
    return hashlib.sha256(normalized_text.encode("utf-8")).hexdigest()


def _normalized_text(poem: Union[NormalizedPoem, str]) -> tuple[str, str]:
    """Return (normalized, raw) for a poem or raw text."""
    from .corpus import normalize

    if isinstance(poem, NormalizedPoem):
        return poem.text, poem.text
    return normalize(poem).text, poem


@dataclass(frozen=True)
class LedgerEntry:
    entry_id: str
    normalized_text: str
    raw_text: str
    created_at: str
    prompt: str
    lm_id: str
    seed: int | None

    def to_json_dict(self) -> dict:
        return {name: getattr(self, name) for name in _FIELDS}


class Ledger:
    """Single-writer append-only store over a JSON-lines file."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._entries: list[LedgerEntry] = []
        self._by_digest: dict[str, LedgerEntry] = {}
        self._hits: dict[str, int] = {}
        if self.path.exists():
            self._load()
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.touch()

    def _load(self) -> None:
        raw_lines = self.path.read_text(encoding="utf-8").splitlines()
        for line_no, line in enumerate(raw_lines, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                entry = LedgerEntry(**{name: data[name] for name in _FIELDS})
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                if line_no == len(raw_lines):
                    # a torn final line from an interrupted append is dropped
                    break
                raise LedgerError(f"corrupt ledger line {line_no}: {exc}") from exc
            self._entries.append(entry)
            self._by_digest[entry.entry_id] = entry

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self) -> list[LedgerEntry]:
        return list(self._entries)

    def hit_count(self, entry_id: str) -> int:
        return self._hits.get(entry_id, 0)

    def record(
        self,
        poem: Union[NormalizedPoem, str],
        prompt: str = "",
        lm_id: str = "",
        seed: int | None = None,
    ) -> str:
        """Append one work; identical normalized text is idempotent."""
        normalized, raw = _normalized_text(poem)
        digest = text_digest(normalized)
        existing = self._by_digest.get(digest)
        if existing is not None:
            self._hits[digest] = self._hits.get(digest, 0) + 1
            return existing.entry_id
        entry = LedgerEntry(
            entry_id=digest,
            normalized_text=normalized,
            raw_text=raw,
            created_at=datetime.now(timezone.utc).isoformat(),
            prompt=prompt,
            lm_id=lm_id,
            seed=seed,
        )
        line = json.dumps(entry.to_json_dict(), ensure_ascii=False) + "\n"
        try:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line)
                f.flush()
                os.fsync(f.fileno())
        except OSError as exc:
            raise LedgerError(f"ledger write failed: {exc}") from exc
        self._entries.append(entry)
        self._by_digest[digest] = entry
        return digest

    def check(self, text: Union[NormalizedPoem, str]) -> LedgerEntry | None:
        """Exact lookup on the normalized-text digest; None when absent."""
        try:
            normalized, _ = _normalized_text(text)
        except Exception:
            return None
        return self._by_digest.get(text_digest(normalized))
