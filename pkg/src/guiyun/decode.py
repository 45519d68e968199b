"""Constraint-enforcing beam decoding.

The decoder walks the poem position by position, keeping a beam of partial
candidates.  Hard constraints are applied as masks while expanding:

* genre shape is fixed, so every candidate has the same length budget;
* a forced first line (FS2TEXT) or forced rhyme-position end characters
  (RR2TEXT) are played verbatim;
* at tone-checking strictness a character survives only if at least one
  genre tone scheme remains satisfiable;
* rhyme-position end characters must keep one common rhyme group alive
  (seeded by the first line's end character when that character is known
  and level-toned, otherwise by the first generated rhyme end).

Conditioning boosts the probability of theme/key characters until their
first emission.  Scores always come from the boosted distribution
renormalized over the full vocabulary, so pruning never changes how two
candidates compare.  Beam truncation adds seeded Gumbel noise to the
ranking: different seeds explore different corners of the search space,
while a beam wide enough to hold every candidate makes the decoder exact
regardless of the seed.  Candidates that tie on score are ordered by text.

A beam that dies at STRICT or RELAXED retries one level lower (at most
twice); dying at RHYME_ONLY is an infeasibility error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import NormalizedPoem, normalize
from .errors import GuiyunError, InfeasibleConstraintsError
from .lm import LINE_END, POEM_END, LanguageModel
from .prompts import PromptMode, PromptSpec
from .prosody import (
    MeterReport,
    RhymeBook,
    Strictness,
    ToneClass,
    template_for,
    validate,
)

DEFAULT_BEAM_WIDTH = 16
DEFAULT_BOOST = math.e
DEFAULT_NOISE_SCALE = 1.0
MAX_RETRIES = 2


@dataclass
class DecodeResult:
    poem: NormalizedPoem
    display_text: str
    prompt: PromptSpec
    score: float
    seed: int
    beam_width: int
    strictness_requested: Strictness
    strictness_used: Strictness
    relaxation_note: str | None
    report: MeterReport
    lm_id: str
    boost: float

    def provenance(self) -> dict:
        return {
            "prompt": self.prompt.canonical_text,
            "mode": self.prompt.mode.value,
            "genre": self.prompt.genre.display,
            "seed": self.seed,
            "beam_width": self.beam_width,
            "boost": self.boost,
            "strictness_requested": self.strictness_requested.label,
            "strictness_used": self.strictness_used.label,
            "relaxation_note": self.relaxation_note,
            "lm_id": self.lm_id,
            "score": self.score,
        }


def display_text(lines: Sequence[str]) -> str:
    """Join lines with alternating ，/。 punctuation for presentation."""
    out = []
    for i, line in enumerate(lines):
        out.append(line)
        out.append("。" if i % 2 == 1 or i == len(lines) - 1 else "，")
    return "".join(out)


class _Exhausted(Exception):
    pass


@dataclass(frozen=True)
class _Candidate:
    seq: str                      # emitted events, LINE_END after each full line
    score: float
    scheme_mask: frozenset[int]   # alive tone schemes (empty set = tones unchecked)
    groups: frozenset[str] | None  # alive rhyme groups, None = unconstrained
    boost_left: frozenset[str]

    @property
    def lines(self) -> list[str]:
        return [part for part in self.seq.split(LINE_END) if part]


class _Decoder:
    def __init__(
        self,
        lm: LanguageModel,
        prompt: PromptSpec,
        book: RhymeBook,
        strictness: Strictness,
        beam_width: int,
        seed: int,
        boost: float,
        noise_scale: float,
        match_end_chars: bool,
    ):
        self.lm = lm
        self.prompt = prompt
        self.book = book
        self.strictness = strictness
        self.beam_width = beam_width
        self.seed = seed
        self.boost = boost
        self.noise_scale = noise_scale
        self.match_end_chars = match_end_chars

        self.template = template_for(prompt.genre)
        self.n_lines = self.template.line_count
        self.width = self.template.line_length

        self.vocab = sorted(set(lm.vocabulary))
        self.index = {ch: i for i, ch in enumerate(self.vocab)}
        self.fast = (
            hasattr(lm, "next_probs") and list(getattr(lm, "vocabulary")) == self.vocab
        )
        self.order = getattr(lm, "order", None)

        v = len(self.vocab)
        self.char_mask = np.ones(v, dtype=bool)
        for marker in (LINE_END, POEM_END):
            if marker in self.index:
                self.char_mask[self.index[marker]] = False

        self.has_tone = {
            ToneClass.PING: np.zeros(v, dtype=bool),
            ToneClass.ZE: np.zeros(v, dtype=bool),
        }
        self.ping_groups: list[frozenset[str]] = []
        self.all_groups: list[frozenset[str]] = []
        for i, ch in enumerate(self.vocab):
            readings = book.readings(ch)
            self.has_tone[ToneClass.PING][i] = any(r.tone is ToneClass.PING for r in readings)
            self.has_tone[ToneClass.ZE][i] = any(r.tone is ToneClass.ZE for r in readings)
            self.ping_groups.append(book.groups(ch, ToneClass.PING))
            self.all_groups.append(book.groups(ch))
        self.cover_ping = frozenset().union(*self.ping_groups) if self.ping_groups else frozenset()
        self.cover_any = frozenset().union(*self.all_groups) if self.all_groups else frozenset()
        self._group_vec_cache: dict[tuple, np.ndarray] = {}
        self._probs_cache: dict[str, np.ndarray] = {}

        # rhyme bookkeeping
        self.rhyme_lines = {p - 1 for p in self.template.rhyme_positions}
        self.forced: dict[tuple[int, int], str] = {}
        self.forbidden_first: str | None = None
        if prompt.mode is PromptMode.FS2TEXT:
            for j, ch in enumerate(prompt.first_line):
                self.forced[(0, j)] = ch
        else:
            constraint = prompt.rhyme
            self.forbidden_first = constraint.forbidden_first_line
            if match_end_chars:
                for line_no, ch in zip(constraint.positions, constraint.end_chars):
                    self.forced[(line_no - 1, self.width - 1)] = ch
            else:
                self.group_only = constraint.group_id
            # a line-1 constraint makes line 1 a rhyme line as well
            if 1 in constraint.positions:
                self.rhyme_lines.add(0)

        self.check_tones = strictness >= Strictness.RELAXED
        if self.check_tones:
            self.required = [
                [
                    [self._required_tone(s, i, j) for j in range(self.width)]
                    for i in range(self.n_lines)
                ]
                for s in range(len(self.template.schemes))
            ]
            self.fit_vectors = {}
        self.initial_mask = frozenset(range(len(self.template.schemes)))

    def _required_tone(self, s: int, i: int, j: int) -> ToneClass | None:
        if self.strictness == Strictness.RELAXED and (j + 1) in self.template.relaxed_free:
            return None
        return self.template.schemes[s][i][j]

    def _fits(self, s: int, i: int, j: int) -> np.ndarray:
        key = (s, i, j)
        vec = self.fit_vectors.get(key)
        if vec is None:
            req = self.required[s][i][j]
            vec = np.ones(len(self.vocab), dtype=bool) if req is None else self.has_tone[req]
            self.fit_vectors[key] = vec
        return vec

    def _group_member_vec(self, groups: frozenset[str] | None, ping_only: bool) -> np.ndarray:
        key = (groups, ping_only)
        vec = self._group_vec_cache.get(key)
        if vec is None:
            source = self.ping_groups if ping_only else self.all_groups
            if groups is None:
                vec = np.array([bool(g) for g in source], dtype=bool)
            else:
                vec = np.array([bool(g & groups) for g in source], dtype=bool)
            self._group_vec_cache[key] = vec
        return vec

    def _probs(self, context: str) -> np.ndarray:
        vec = self._probs_cache.get(context)
        if vec is not None:
            return vec
        if self.fast:
            vec = self.lm.next_probs(context)
        else:
            dist = self.lm.next_distribution(context, self.prompt)
            vec = np.zeros(len(self.vocab))
            for ch, p in dist.items():
                idx = self.index.get(ch)
                if idx is not None:
                    vec[idx] = p
        self._probs_cache[context] = vec
        return vec

    def _boosted_logp(self, cand: _Candidate) -> np.ndarray:
        vec = self._probs(cand.seq)
        if self.boost != 1.0 and cand.boost_left:
            vec = vec.copy()
            for ch in cand.boost_left:
                idx = self.index.get(ch)
                if idx is not None:
                    vec[idx] *= self.boost
            total = vec.sum()
            if total > 0:
                vec = vec / total
        with np.errstate(divide="ignore"):
            return np.log(vec)

    # -- constraint updates --------------------------------------------------

    def _initial_boost(self) -> frozenset[str]:
        chars = set()
        for word in self.prompt.theme_words:
            chars.update(word)
        chars.update(self.prompt.key_chars)
        return frozenset(chars)

    def _child(
        self, cand: _Candidate, ch: str, i: int, j: int, logp: float
    ) -> _Candidate | None:
        """Apply one character; None when a hard constraint dies.

        Uses the book directly (not the vocabulary index) because forced
        characters may fall outside the model's vocabulary.
        """
        scheme_mask = cand.scheme_mask
        if self.check_tones and scheme_mask:
            scheme_mask = frozenset(
                s
                for s in scheme_mask
                if self.required[s][i][j] is None
                or self.book.has_tone(ch, self.required[s][i][j])
            )
            if not scheme_mask:
                return None

        groups = cand.groups
        if (
            self.strictness >= Strictness.RHYME_ONLY
            and j == self.width - 1
            and i in self.rhyme_lines
            and (i, j) not in self.forced
        ):
            ping_only = self.strictness >= Strictness.RELAXED
            char_groups = self.book.groups(
                ch, ToneClass.PING if ping_only else None
            )
            if self.prompt.mode is PromptMode.RR2TEXT and not self.match_end_chars:
                if self.group_only not in char_groups:
                    return None
            else:
                new_groups = char_groups if groups is None else groups & char_groups
                remaining = sum(
                    1
                    for line in self.rhyme_lines
                    if line > i and (line, self.width - 1) not in self.forced
                )
                if remaining:
                    cover = self.cover_ping if ping_only else self.cover_any
                    new_groups = new_groups & cover
                if not new_groups:
                    return None
                groups = new_groups

        seq = cand.seq + ch
        if j == self.width - 1:
            if i == 0 and self.forbidden_first is not None:
                if seq[-self.width :] == self.forbidden_first:
                    return None
            seq += LINE_END
        boost_left = cand.boost_left
        if ch in boost_left:
            boost_left = boost_left - {ch}
        return _Candidate(seq, cand.score + logp, scheme_mask, groups, boost_left)

    # -- main loop -----------------------------------------------------------

    def run(self) -> _Candidate:
        rng = np.random.default_rng(self.seed)
        self._check_forced_ends()
        groups0: frozenset[str] | None = None
        if self.prompt.mode is PromptMode.FS2TEXT:
            end = self.prompt.first_line[-1]
            seeded = self.book.groups(end, ToneClass.PING)
            if seeded:
                groups0 = seeded
        start = _Candidate(
            seq="",
            score=0.0,
            scheme_mask=self.initial_mask if self.check_tones else frozenset(),
            groups=groups0,
            boost_left=self._initial_boost(),
        )
        beam = [start]
        for i in range(self.n_lines):
            for j in range(self.width):
                beam = self._step(beam, i, j, rng)
                if not beam:
                    raise _Exhausted()
        best = min(beam, key=lambda c: (-c.score, c.seq))
        return best

    def _check_forced_ends(self) -> None:
        """Forced rhyme ends must share a group under the active tone rule."""
        if self.strictness < Strictness.RHYME_ONLY:
            return
        ends = [
            ch
            for (i, j), ch in sorted(self.forced.items())
            if j == self.width - 1 and i in self.rhyme_lines and i + 1 != 1
        ]
        if not ends:
            return
        ping_only = self.strictness >= Strictness.RELAXED
        common: frozenset[str] | None = None
        for ch in ends:
            groups = self.book.groups(ch, ToneClass.PING if ping_only else None)
            common = groups if common is None else common & groups
        if not common:
            raise _Exhausted()

    def _step(self, beam: list[_Candidate], i: int, j: int, rng) -> list[_Candidate]:
        # Per-(parent, char) Gumbel noise perturbs scores BEFORE any pruning,
        # so exploration follows the boosted distribution; ranking within the
        # kept pool and the final answer always use the true score.
        children: dict[tuple, tuple[_Candidate, float]] = {}

        def offer(child: _Candidate, perturbed: float) -> None:
            if self.order is not None:
                tail = child.seq[-(self.order - 1) :] if self.order > 1 else ""
            else:
                tail = child.seq
            key = (tail, child.scheme_mask, child.groups, child.boost_left)
            held = children.get(key)
            if held is None:
                children[key] = (child, perturbed)
            elif child.score > held[0].score or (
                child.score == held[0].score and child.seq < held[0].seq
            ):
                children[key] = (child, max(perturbed, held[1]))
            else:
                children[key] = (held[0], max(perturbed, held[1]))

        forced = self.forced.get((i, j))
        parents = sorted(beam, key=lambda c: c.seq)
        noise = None
        if forced is None and self.noise_scale > 0:
            noise = rng.gumbel(0.0, self.noise_scale, size=(len(parents), len(self.vocab)))
        for row, cand in enumerate(parents):
            logp = self._boosted_logp(cand)
            if forced is not None:
                idx = self.index.get(forced)
                lp = float(logp[idx]) if idx is not None and np.isfinite(logp[idx]) else 0.0
                child = self._child(cand, forced, i, j, lp)
                if child is not None:
                    offer(child, cand.score + lp)
                continue
            allowed = self.char_mask & np.isfinite(logp)
            if self.check_tones and cand.scheme_mask:
                fit_any = np.zeros(len(self.vocab), dtype=bool)
                for s in cand.scheme_mask:
                    fit_any |= self._fits(s, i, j)
                allowed &= fit_any
            if (
                j == self.width - 1
                and i in self.rhyme_lines
                and self.strictness >= Strictness.RHYME_ONLY
            ):
                if self.prompt.mode is PromptMode.RR2TEXT and not self.match_end_chars:
                    allowed &= self._group_member_vec(
                        frozenset({self.group_only}),
                        self.strictness >= Strictness.RELAXED,
                    )
                else:
                    allowed &= self._group_member_vec(
                        cand.groups, self.strictness >= Strictness.RELAXED
                    )
            idxs = np.nonzero(allowed)[0]
            if idxs.size == 0:
                continue
            perturbed = logp[idxs]
            if noise is not None:
                perturbed = perturbed + noise[row, idxs]
            if idxs.size > self.beam_width:
                top = np.argpartition(-perturbed, self.beam_width - 1)[: self.beam_width]
                idxs = idxs[top]
                perturbed = perturbed[top]
            for idx, pert in zip(idxs, perturbed):
                child = self._child(cand, self.vocab[idx], i, j, float(logp[idx]))
                if child is not None:
                    offer(child, cand.score + float(pert))

        pool = sorted(children.values(), key=lambda pair: pair[0].seq)
        if len(pool) <= self.beam_width:
            return [child for child, _ in pool]
        ranked = sorted(
            range(len(pool)), key=lambda n: (-pool[n][1], pool[n][0].seq)
        )
        return [pool[n][0] for n in ranked[: self.beam_width]]


def constrained_decode(
    lm: LanguageModel,
    prompt: PromptSpec,
    book: RhymeBook,
    strictness: Strictness = Strictness.RELAXED,
    beam_width: int = DEFAULT_BEAM_WIDTH,
    seed: int = 0,
    boost: float = DEFAULT_BOOST,
    noise_scale: float = DEFAULT_NOISE_SCALE,
    match_end_chars: bool = True,
    max_retries: int = MAX_RETRIES,
) -> DecodeResult:
    """Decode a poem satisfying the prompt's constraints.

    Deterministic for fixed ``(lm, prompt, seed, beam_width, strictness)``.
    Beam exhaustion above RHYME_ONLY retries one strictness level lower;
    exhaustion at RHYME_ONLY (or below) raises.
    """
    if beam_width < 1:
        raise GuiyunError("beam width must be >= 1")
    requested = strictness
    note = None
    level = strictness
    retries = 0
    while True:
        decoder = _Decoder(
            lm, prompt, book, level, beam_width, seed, boost, noise_scale, match_end_chars
        )
        try:
            best = decoder.run()
            break
        except _Exhausted:
            if level <= Strictness.RHYME_ONLY or retries >= max_retries:
                raise InfeasibleConstraintsError("infeasible constraints") from None
            retries += 1
            level = Strictness(level - 1)
            note = f"beam exhausted at {requested.label}; relaxed to {level.label}"

    lines = best.lines
    text = display_text(lines)
    poem = normalize(text)
    report = validate(poem, prompt.genre, book, level)
    if level > Strictness.OFF and report.overall.value != "pass":
        raise GuiyunError(
            f"internal error: decoded poem failed validation at {level.label}"
        )
    return DecodeResult(
        poem=poem,
        display_text=text,
        prompt=prompt,
        score=best.score,
        seed=seed,
        beam_width=beam_width,
        strictness_requested=requested,
        strictness_used=level,
        relaxation_note=note,
        report=report,
        lm_id=lm.lm_id,
        boost=boost,
    )
