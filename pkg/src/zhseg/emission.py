"""Per-character emission scoring over {B,M,E,S}.

Scores come either from an averaged structured perceptron trained here,
or from score matrices computed elsewhere and imported through the
Emissions Exchange Format. Both feed the same decoders.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._kernels import viterbi_path
from .corpus import LEGAL_NEXT, TAG_NAMES, TaggedSentence
from .errors import EmptyCorpus, FormatError, RowCountMismatch

TEMPLATE_VERSION = "v1"
ALPHA_S = 0.1  # additive smoothing for transition counts

_BOS = "<BOS>"
_EOS = "<EOS>"


@dataclass(frozen=True, eq=False)
class EmissionMatrix:
    scores: np.ndarray  # n x 4, column order B,M,E,S
    chars: str

    def __post_init__(self):
        object.__setattr__(self, "scores", np.asarray(self.scores, dtype=np.float64))
        if self.scores.shape != (len(self.chars), 4):
            raise ValueError("scores must be |chars| x 4")


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    weights: np.ndarray  # 4 x 4, entry (i, j) scores tag_i -> tag_j
    mask: np.ndarray = field(default_factory=lambda: LEGAL_NEXT.copy())

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        if self.weights.shape != (4, 4):
            raise ValueError("transition weights must be 4x4")


class EmissionModel:
    """Feature weights plus transitions; scoring is a pure lookup-sum."""

    def __init__(
        self,
        feature_weights: dict[str, np.ndarray],
        transitions: TransitionMatrix,
        template: str = TEMPLATE_VERSION,
        train_accuracy: float | None = None,
    ):
        self.feature_weights = feature_weights
        self.transitions = transitions
        self.template = template
        self.train_accuracy = train_accuracy


def extract_features(chars: str, i: int) -> list[str]:
    """Context template around position i.

    Character unigrams in a +-2 window and the three adjacent bigrams,
    each keyed by position; positions outside the sentence read as
    <BOS>/<EOS> sentinels.
    """
    n = len(chars)

    def at(j: int) -> str:
        if j < 0:
            return _BOS
        if j >= n:
            return _EOS
        return chars[j]

    c_m2, c_m1, c0, c_p1, c_p2 = at(i - 2), at(i - 1), chars[i], at(i + 1), at(i + 2)
    return [
        f"U-2={c_m2}",
        f"U-1={c_m1}",
        f"U0={c0}",
        f"U+1={c_p1}",
        f"U+2={c_p2}",
        f"B-10={c_m1}{c0}",
        f"B0+1={c0}{c_p1}",
        f"B-1+1={c_m1}{c_p1}",
    ]


def score_sentence(model: EmissionModel, chars: str) -> EmissionMatrix:
    """scores[i][t] = sum of weight(f, t) over the features at i."""
    n = len(chars)
    scores = np.zeros((n, 4))
    weights = model.feature_weights
    for i in range(n):
        row = scores[i]
        for f in extract_features(chars, i):
            vec = weights.get(f)
            if vec is not None:
                row += vec
    return EmissionMatrix(scores, chars)


def train_perceptron(corpus, epochs: int, seed: int) -> EmissionModel:
    """Averaged structured perceptron with Viterbi decoding.

    Feature and transition weights update together whenever the decoded
    path differs from gold; the returned model holds the average of the
    weight vector over every training step, which damps the last-epoch
    oscillation of the plain perceptron.
    """
    sentences = [s for s in corpus]
    if not sentences:
        raise EmptyCorpus("no training sentences")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")

    feats: list[list[list[str]]] = [
        [extract_features(s.chars, i) for i in range(len(s.chars))] for s in sentences
    ]

    w: dict[str, np.ndarray] = {}
    totals: dict[str, np.ndarray] = {}
    stamp: dict[str, int] = {}
    trans = np.zeros((4, 4))
    trans_totals = np.zeros((4, 4))
    trans_stamp = 1

    def touch(f: str, tick: int) -> np.ndarray:
        vec = w.get(f)
        if vec is None:
            vec = w[f] = np.zeros(4)
            totals[f] = np.zeros(4)
            stamp[f] = tick
        else:
            totals[f] += vec * (tick - stamp[f])
            stamp[f] = tick
        return vec

    rng = random.Random(seed)
    order = list(range(len(sentences)))
    tick = 0
    correct_chars = total_chars = 0
    for epoch in range(epochs):
        rng.shuffle(order)
        last_epoch = epoch == epochs - 1
        for idx in order:
            tick += 1
            sent = sentences[idx]
            sfeats = feats[idx]
            n = len(sent.chars)
            emissions = np.zeros((n, 4))
            for i in range(n):
                row = emissions[i]
                for f in sfeats[i]:
                    vec = w.get(f)
                    if vec is not None:
                        row += vec
            pred = tuple(int(t) for t in viterbi_path(emissions, trans, masked=True))
            gold = sent.tags
            if last_epoch:
                correct_chars += sum(1 for a, b in zip(pred, gold) if a == b)
                total_chars += n
            if pred == gold:
                continue
            for i in range(n):
                if pred[i] != gold[i]:
                    for f in sfeats[i]:
                        vec = touch(f, tick)
                        vec[gold[i]] += 1.0
                        vec[pred[i]] -= 1.0
            changed = False
            for i in range(1, n):
                if (gold[i - 1], gold[i]) != (pred[i - 1], pred[i]):
                    if not changed:
                        trans_totals += trans * (tick - trans_stamp)
                        trans_stamp = tick
                        changed = True
                    trans[gold[i - 1], gold[i]] += 1.0
                    trans[pred[i - 1], pred[i]] -= 1.0

    final = tick + 1
    averaged: dict[str, np.ndarray] = {}
    for f, vec in w.items():
        avg = (totals[f] + vec * (final - stamp[f])) / tick
        if np.any(avg):
            averaged[f] = avg
    avg_trans = (trans_totals + trans * (final - trans_stamp)) / tick

    return EmissionModel(
        averaged,
        TransitionMatrix(avg_trans),
        train_accuracy=(correct_chars / total_chars) if total_chars else 1.0,
    )


def estimate_transitions_mle(corpus) -> TransitionMatrix:
    """Smoothed log relative frequencies of adjacent tag pairs."""
    counts = np.zeros((4, 4))
    seen = False
    for sent in corpus:
        seen = True
        tags = sent.tags if isinstance(sent, TaggedSentence) else sent
        for a, b in zip(tags, tags[1:]):
            counts[a, b] += 1
    if not seen:
        raise EmptyCorpus("no sentences")
    source = counts.sum(axis=1)
    weights = np.log((counts + ALPHA_S) / (source[:, None] + 4 * ALPHA_S))
    return TransitionMatrix(weights)


# -- model file (TSV with a fixed 16-line header) -------------------------

_HEADER_LINES = 16
_MAGIC = "#zhseg-emission-model"


def save_model(model: EmissionModel, path: str | Path) -> None:
    rows = []
    for f in sorted(model.feature_weights):
        vec = model.feature_weights[f]
        for t in range(4):
            if vec[t] != 0.0:
                rows.append(f"{f}\t{TAG_NAMES[t]}\t{vec[t]:.17g}")
    tw = model.transitions.weights
    header = [
        _MAGIC,
        f"#template {model.template}",
        f"#tags {' '.join(TAG_NAMES)}",
        "#transitions 4x4",
        *(f"#trans-row {TAG_NAMES[i]} " + " ".join(f"{v:.17g}" for v in tw[i]) for i in range(4)),
        f"#rows {len(rows)}",
        *("#reserved" for _ in range(6)),
        "#end-header",
    ]
    assert len(header) == _HEADER_LINES
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(header) + "\n")
        for row in rows:
            fh.write(row + "\n")


def load_model(path: str | Path) -> EmissionModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if len(lines) < _HEADER_LINES or lines[0] != _MAGIC:
        raise FormatError(1, "not an emission model file")
    template = lines[1].removeprefix("#template ").strip()
    if template != TEMPLATE_VERSION:
        raise FormatError(2, f"unknown feature template {template!r}")
    if lines[2] != f"#tags {' '.join(TAG_NAMES)}":
        raise FormatError(3, "unexpected tag order")
    tw = np.zeros((4, 4))
    for i in range(4):
        line = lines[4 + i]
        prefix = f"#trans-row {TAG_NAMES[i]} "
        if not line.startswith(prefix):
            raise FormatError(5 + i, "bad transition row")
        tw[i] = [float(v) for v in line[len(prefix):].split()]
    try:
        declared = int(lines[8].removeprefix("#rows "))
    except ValueError as exc:
        raise FormatError(9, "bad row count") from exc
    if lines[_HEADER_LINES - 1] != "#end-header":
        raise FormatError(_HEADER_LINES, "missing end-header")

    weights: dict[str, np.ndarray] = {}
    n_rows = 0
    for lineno, line in enumerate(lines[_HEADER_LINES:], start=_HEADER_LINES + 1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3 or parts[1] not in TAG_NAMES:
            raise FormatError(lineno, "bad weight row")
        try:
            value = float(parts[2])
        except ValueError as exc:
            raise FormatError(lineno, "bad weight value") from exc
        vec = weights.get(parts[0])
        if vec is None:
            vec = weights[parts[0]] = np.zeros(4)
        vec[TAG_NAMES.index(parts[1])] = value
        n_rows += 1
    if n_rows != declared:
        raise FormatError(0, f"declared {declared} rows, found {n_rows}")
    return EmissionModel(weights, TransitionMatrix(tw))


# -- Emissions Exchange Format --------------------------------------------


def save_emissions(matrices, path: str | Path) -> None:
    """Write EEF: per block, the characters, `n 4`, then n score rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for b, mat in enumerate(matrices):
            if b:
                fh.write("\n")
            fh.write(mat.chars + "\n")
            fh.write(f"{len(mat.chars)} 4\n")
            for row in mat.scores:
                fh.write("\t".join(f"{v:.8g}" for v in row) + "\n")


def load_emissions(path: str | Path) -> list[EmissionMatrix]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    matrices: list[EmissionMatrix] = []
    i = 0
    block = 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        block += 1
        chars = lines[i].rstrip("\n")
        if i + 1 >= len(lines):
            raise FormatError(i + 2, "missing block header")
        header = lines[i + 1].split()
        if len(header) != 2 or header[1] != "4":
            raise FormatError(i + 2, "block header must be `n 4`")
        try:
            n = int(header[0])
        except ValueError as exc:
            raise FormatError(i + 2, "bad row count in header") from exc
        if n != len(chars):
            raise RowCountMismatch(block, f"block {block}: {len(chars)} chars but header says {n}")
        rows = np.zeros((n, 4))
        for r in range(n):
            lineno = i + 2 + r
            if lineno >= len(lines) or not lines[lineno].strip():
                raise RowCountMismatch(block, f"block {block}: expected {n} rows")
            parts = lines[lineno].split("\t")
            if len(parts) != 4:
                raise FormatError(lineno + 1, "expected 4 tab-separated scores")
            try:
                rows[r] = [float(v) for v in parts]
            except ValueError as exc:
                raise FormatError(lineno + 1, "unparseable score") from exc
        i += 2 + n
        if i < len(lines) and lines[i].strip():
            raise RowCountMismatch(block, f"block {block}: more rows than declared")
        matrices.append(EmissionMatrix(rows, chars))
    return matrices
