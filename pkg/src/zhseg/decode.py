"""Decoders over BMES emission lattices.

Three strategies share one result type: per-position softmax, exact
Viterbi, and a beam search whose objective adds a fluency term from an
n-gram language model to the structural CRF score. A tiny brute-force
decoder over all legal paths backs the equivalence tests.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ._kernels import viterbi_path
from .corpus import B, END_OK, LEGAL_NEXT, S, START_OK, TaggedSentence, bmes_decode, normalize
from .emission import EmissionMatrix, EmissionModel, TransitionMatrix, score_sentence
from .errors import EmptyInput, LmMissing, TooLong
from .lm import NGramLM

#: beam_width value requesting exhaustive search (no pruning).
EXHAUSTIVE: None = None

_BRUTE_MAX = 12


@dataclass(frozen=True)
class DecoderConfig:
    lm_weight: float = 0.0
    beam_width: int | None = 8
    enforce_legality: bool = True

    def __post_init__(self):
        if self.lm_weight < 0:
            raise ValueError("lm_weight must be >= 0")
        if self.lm_weight > 1:
            warnings.warn(
                f"lm_weight={self.lm_weight} is outside the calibrated range (0, 1]",
                stacklevel=2,
            )
        if self.beam_width is not None and self.beam_width < 1:
            raise ValueError("beam_width must be >= 1 or EXHAUSTIVE")


@dataclass(frozen=True)
class DecodeResult:
    tags: tuple[int, ...]
    score: float
    words: tuple[str, ...]
    decoder: str


def _result(chars: str, tags: tuple[int, ...], score: float, decoder: str) -> DecodeResult:
    words = tuple(bmes_decode(TaggedSentence(chars, tags)))
    return DecodeResult(tags, float(score), words, decoder)


def softmax_decode(emissions: EmissionMatrix, enforce_legality: bool = True) -> DecodeResult:
    """Independent per-position argmax; ties go to the smaller tag id.

    No path constraint is applied while picking, so the raw tag sequence
    can be illegal; the word list always comes out of the total repair
    rule in bmes_decode, which is what makes this decoder usable at all.
    Score is the sum of the chosen log-softmax values.
    """
    del enforce_legality  # repair happens in word decoding either way
    scores = emissions.scores
    n = len(scores)
    if n == 0:
        raise EmptyInput("empty sentence")
    shifted = scores - scores.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    tags = tuple(int(np.argmax(row)) for row in scores)
    total = float(sum(logp[i, t] for i, t in enumerate(tags)))
    return _result(emissions.chars, tags, total, "softmax")


def viterbi(
    emissions: EmissionMatrix,
    transitions: TransitionMatrix,
    enforce_legality: bool = True,
) -> DecodeResult:
    """Exact argmax of emission + transition score over tag paths."""
    scores = emissions.scores
    n = len(scores)
    if n == 0:
        raise EmptyInput("empty sentence")
    trans = transitions.weights
    tags = tuple(int(t) for t in viterbi_path(scores, trans, masked=enforce_legality))
    total = scores[0, tags[0]]
    for i in range(1, n):
        total = total + trans[tags[i - 1], tags[i]] + scores[i, tags[i]]
    return _result(emissions.chars, tags, total, "viterbi")


class _Node:
    """Immutable backpointer chain; cheaper than copying tag tuples."""

    __slots__ = ("tag", "prev")

    def __init__(self, tag: int, prev: "_Node | None"):
        self.tag = tag
        self.prev = prev

    def path(self) -> tuple[int, ...]:
        out = []
        node: _Node | None = self
        while node is not None:
            out.append(node.tag)
            node = node.prev
        return tuple(reversed(out))


@dataclass
class _Item:
    structural: float
    lm_sum: float
    words_done: int
    pending_start: int
    last_tag: int
    context: tuple[int, ...]
    node: _Node
    combined: float = 0.0
    _path: tuple[int, ...] | None = field(default=None, repr=False)

    def path(self) -> tuple[int, ...]:
        if self._path is None:
            self._path = self.node.path()
        return self._path


def _combined(structural: float, lm_sum: float, words_done: int, lam: float) -> float:
    return structural + lam * (lm_sum / max(1, words_done))


def pcrf_decode(
    emissions: EmissionMatrix,
    transitions: TransitionMatrix,
    lm: NGramLM | None,
    chars: str | None = None,
    config: DecoderConfig | None = None,
) -> DecodeResult:
    """Beam search maximizing structural score + lm_weight * fluency.

    Fluency is the running mean word log10 probability (the negated log
    perplexity of the words closed so far), so the two terms pull in the
    same direction: bigger is better. A word closes when the next tag
    starts a new one (B or S) and at the end of the sentence; each step
    re-ranks with the updated mean rather than waiting for sentence end.

    Hypotheses are merged only when no future extension can order them
    differently: same last tag, pending word start, closed-word count,
    language model context, and fluency sum. The closed-word count and
    sum must participate because the per-word normalization lets a
    future word flip comparisons between prefixes that disagree on them.

    With lm_weight 0 the objective collapses to the structural score and
    decoding routes to exact Viterbi.
    """
    config = config or DecoderConfig()
    if chars is None:
        chars = emissions.chars
    elif chars != emissions.chars:
        raise ValueError("chars disagree with the emission matrix")
    lam = config.lm_weight
    if lam == 0.0:
        res = viterbi(emissions, transitions, config.enforce_legality)
        return replace(res, decoder="pcrf")
    if lm is None:
        raise LmMissing()

    scores = emissions.scores
    n = len(scores)
    if n == 0:
        raise EmptyInput("empty sentence")
    trans = transitions.weights
    masked = config.enforce_legality
    width = config.beam_width

    def close(item: _Item, end: int) -> tuple[float, int, tuple[int, ...]]:
        """Score the pending word chars[item.pending_start:end]."""
        wid = lm.word_id(chars[item.pending_start:end])
        lp = lm.logprob_ids(item.context, wid)
        return item.lm_sum + lp, item.words_done + 1, lm.push_context(item.context, wid)

    start_ctx = lm.start_context()
    beam: list[_Item] = []
    for t in range(4):
        if masked and not START_OK[t]:
            continue
        item = _Item(float(scores[0, t]), 0.0, 0, 0, t, start_ctx, _Node(t, None))
        item.combined = _combined(item.structural, 0.0, 0, lam)
        beam.append(item)
    if width is not None and len(beam) > width:
        beam.sort(key=lambda it: -it.combined)
        beam = beam[:width]

    for i in range(1, n):
        merged: dict[tuple, _Item] = {}
        for item in beam:
            for u in range(4):
                if masked and not LEGAL_NEXT[item.last_tag][u]:
                    continue
                if masked and i == n - 1 and not END_OK[u]:
                    continue
                structural = item.structural + trans[item.last_tag, u] + scores[i, u]
                if u in (B, S):
                    lm_sum, words_done, ctx = close(item, i)
                    pending = i
                else:
                    lm_sum, words_done, ctx = item.lm_sum, item.words_done, item.context
                    pending = item.pending_start
                new = _Item(float(structural), lm_sum, words_done, pending, u, ctx, _Node(u, item.node))
                key = (u, pending, words_done, ctx, lm_sum)
                old = merged.get(key)
                if old is None or new.structural > old.structural or (
                    new.structural == old.structural and new.path() < old.path()
                ):
                    merged[key] = new
        beam = list(merged.values())
        for item in beam:
            item.combined = _combined(item.structural, item.lm_sum, item.words_done, lam)
        if width is not None and len(beam) > width:
            beam.sort(key=lambda it: -it.combined)
            beam = beam[:width]

    best: _Item | None = None
    best_score = -np.inf
    finals = []
    for item in beam:
        if masked and not END_OK[item.last_tag]:
            continue
        lm_sum, words_done, _ = close(item, n)
        score = _combined(item.structural, lm_sum, words_done, lam)
        finals.append((score, item))
    if not finals:
        raise EmptyInput("no legal hypothesis survived")
    for score, item in finals:
        if best is None or score > best_score or (score == best_score and item.path() < best.path()):
            best, best_score = item, score
    return _result(chars, best.path(), best_score, "pcrf")


def _legal_paths(n: int, masked: bool):
    """All tag paths in lexicographic order, legal ones only when masked."""
    path = [0] * n

    def rec(i: int, prev: int):
        for t in range(4):
            if masked:
                if i == 0:
                    if not START_OK[t]:
                        continue
                elif not LEGAL_NEXT[prev][t]:
                    continue
                if i == n - 1 and not END_OK[t]:
                    continue
            path[i] = t
            if i == n - 1:
                yield tuple(path)
            else:
                yield from rec(i + 1, t)

    yield from rec(0, -1)


def brute_force_decode(
    emissions: EmissionMatrix,
    transitions: TransitionMatrix,
    lm: NGramLM | None,
    chars: str | None = None,
    lm_weight: float = 0.0,
    enforce_legality: bool = True,
) -> DecodeResult:
    """Reference decoder: enumerate paths, score like the beam, keep the
    first maximum (lexicographically smallest on ties). Refuses inputs
    past a small length bound since the path count grows exponentially.
    """
    if chars is None:
        chars = emissions.chars
    elif chars != emissions.chars:
        raise ValueError("chars disagree with the emission matrix")
    scores = emissions.scores
    n = len(scores)
    if n == 0:
        raise EmptyInput("empty sentence")
    if n > _BRUTE_MAX:
        raise TooLong(f"brute force capped at {_BRUTE_MAX} characters, got {n}")
    if lm_weight > 0 and lm is None:
        raise LmMissing()
    trans = transitions.weights

    best_tags: tuple[int, ...] | None = None
    best_score = -np.inf
    for tags in _legal_paths(n, enforce_legality):
        structural = float(scores[0, tags[0]])
        for i in range(1, n):
            structural = structural + trans[tags[i - 1], tags[i]] + scores[i, tags[i]]
        if lm_weight > 0:
            words = bmes_decode(TaggedSentence(chars, tags))
            ctx = lm.start_context()
            lm_sum = 0.0
            for word in words:
                wid = lm.word_id(word)
                lm_sum = lm_sum + lm.logprob_ids(ctx, wid)
                ctx = lm.push_context(ctx, wid)
            total = _combined(structural, lm_sum, len(words), lm_weight)
        else:
            total = structural
        if total > best_score:
            best_score = total
            best_tags = tags
    if best_tags is None:
        raise EmptyInput("no legal path")
    return _result(chars, best_tags, best_score, "brute")


def segment(
    text: str,
    model: EmissionModel,
    lm: NGramLM | None = None,
    config: DecoderConfig | None = None,
    decoder: str = "crf",
) -> list[str]:
    """Normalize, score, decode; returns the word list (possibly empty)."""
    config = config or DecoderConfig()
    text = normalize(text)
    if not text:
        return []
    emissions = score_sentence(model, text)
    if decoder == "softmax":
        res = softmax_decode(emissions, config.enforce_legality)
    elif decoder == "crf":
        res = viterbi(emissions, model.transitions, config.enforce_legality)
    elif decoder == "pcrf":
        res = pcrf_decode(emissions, model.transitions, lm, config=config)
    else:
        raise ValueError(f"unknown decoder {decoder!r}")
    return list(res.words)


@dataclass(frozen=True)
class Pipeline:
    """Picklable text -> words callable; what the bench and the CLI map
    over worker pools."""

    model: EmissionModel
    lm: NGramLM | None = None
    decoder: str = "crf"
    config: DecoderConfig = field(default_factory=DecoderConfig)

    def __call__(self, text: str) -> list[str]:
        return segment(text, self.model, self.lm, self.config, self.decoder)
