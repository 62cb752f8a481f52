"""Scoring, corpus-distance metrics, and throughput measurement."""
from __future__ import annotations

import json
import statistics
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .corpus import TaggedSentence, bmes_decode
from .errors import EmptyCorpus, EmptyWord, LengthMismatch

#: How a string occurrence sits relative to the gold segmentation:
#: exactly one word, strictly inside one word, or across a boundary.
LABELS = ("word", "inside", "cross")


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    gold_words: int
    pred_words: int
    correct_words: int

    def to_record(self) -> str:
        return json.dumps(
            {
                "precision": self.precision,
                "recall": self.recall,
                "f1": self.f1,
                "gold_words": self.gold_words,
                "pred_words": self.pred_words,
                "correct_words": self.correct_words,
            },
            ensure_ascii=False,
        )


@dataclass(frozen=True)
class ConsistencyReport:
    mean_consistency: float
    oov_rate: float
    psi: dict[str, float]

    def to_record(self) -> str:
        return json.dumps(
            {"mean_consistency": self.mean_consistency, "oov_rate": self.oov_rate},
            ensure_ascii=False,
        )


@dataclass(frozen=True)
class BenchReport:
    bytes_processed: int
    wall_seconds: float
    kb_per_s: float
    batch_size: int
    threads: int

    def to_record(self) -> str:
        return json.dumps(
            {
                "bytes_processed": self.bytes_processed,
                "wall_seconds": self.wall_seconds,
                "kb_per_s": self.kb_per_s,
                "batch_size": self.batch_size,
                "threads": self.threads,
            },
            ensure_ascii=False,
        )


def _as_words(sent) -> list[str]:
    if isinstance(sent, TaggedSentence):
        return bmes_decode(sent)
    return list(sent)


def _spans(words) -> set[tuple[int, int]]:
    out = set()
    pos = 0
    for w in words:
        out.add((pos, pos + len(w)))
        pos += len(w)
    return out


def f1_score(gold, pred) -> EvalReport:
    """Span-based word F1 (SIGHAN convention).

    Both sides are converted to (start, end) character spans per
    sentence; a predicted word is correct only when its exact span
    appears in gold.
    """
    gold = [_as_words(s) for s in gold]
    pred = [_as_words(s) for s in pred]
    if len(gold) != len(pred):
        raise LengthMismatch(min(len(gold), len(pred)), "corpora have different sentence counts")
    g_total = p_total = correct = 0
    for i, (g, p) in enumerate(zip(gold, pred)):
        if "".join(g) != "".join(p):
            raise LengthMismatch(i, f"sentence {i}: gold and pred text differ")
        gs, ps = _spans(g), _spans(p)
        g_total += len(gs)
        p_total += len(ps)
        correct += len(gs & ps)
    precision = correct / p_total if p_total else 0.0
    recall = correct / g_total if g_total else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalReport(precision, recall, f1, g_total, p_total, correct)


def _sentence_index(words):
    """Character string plus, per character, the index of its word."""
    chars = "".join(words)
    word_of = []
    spans = []
    for wi, w in enumerate(words):
        start = len(word_of)
        spans.append((start, start + len(w)))
        word_of.extend([wi] * len(w))
    return chars, word_of, spans


def _classify(word_of, spans, i, j) -> str:
    wi, wj = word_of[i], word_of[j - 1]
    if wi == wj:
        return "word" if spans[wi] == (i, j) else "inside"
    return "cross"


def label_consistency(word: str, label: str, train) -> float:
    """Fraction of the word's string occurrences in the training text
    that carry the given label. 0 when it never occurs at all."""
    if not word:
        raise EmptyWord("cannot measure consistency of the empty string")
    if label not in LABELS:
        raise ValueError(f"label must be one of {LABELS}")
    span = len(word)
    counts: Counter[str] = Counter()
    total = 0
    for sent in train:
        words = _as_words(sent)
        chars, word_of, spans = _sentence_index(words)
        for i in range(len(chars) - span + 1):
            if chars[i:i + span] == word:
                counts[_classify(word_of, spans, i, i + span)] += 1
                total += 1
    return counts[label] / total if total else 0.0


def dataset_distance(train, test) -> ConsistencyReport:
    """Token-weighted mean of psi(word, as-a-word) over test tokens,
    with the out-of-vocabulary token rate alongside."""
    train_sents = [_as_words(s) for s in train]
    test_sents = [_as_words(s) for s in test]
    if not train_sents:
        raise EmptyCorpus("empty training corpus")
    if not test_sents:
        raise EmptyCorpus("empty test corpus")

    test_tokens = [w for sent in test_sents for w in sent]
    targets: dict[int, set[str]] = {}
    for w in test_tokens:
        if w:
            targets.setdefault(len(w), set()).add(w)

    occ: dict[str, list[int]] = {}  # word -> [total occurrences, as-a-word]
    train_vocab: set[str] = set()
    for words in train_sents:
        train_vocab.update(words)
        chars, word_of, spans = _sentence_index(words)
        n = len(chars)
        for span, wanted in targets.items():
            for i in range(n - span + 1):
                sub = chars[i:i + span]
                if sub in wanted:
                    entry = occ.setdefault(sub, [0, 0])
                    entry[0] += 1
                    if _classify(word_of, spans, i, i + span) == "word":
                        entry[1] += 1

    psi = {}
    for length_set in targets.values():
        for w in length_set:
            total, as_word = occ.get(w, (0, 0))
            psi[w] = as_word / total if total else 0.0
    mean = sum(psi[w] for w in test_tokens if w) / len(test_tokens) if test_tokens else 0.0
    oov = sum(1 for w in test_tokens if w not in train_vocab) / len(test_tokens) if test_tokens else 0.0
    return ConsistencyReport(mean, oov, psi)


# -- worker pool plumbing --------------------------------------------------

_WORKER_FN = None


def _pool_init(fn):
    global _WORKER_FN
    _WORKER_FN = fn


def _pool_call(arg):
    return _WORKER_FN(arg)


def map_sentences(fn, items, threads: int = 1, batch_size: int = 1) -> list:
    """Map fn over items, preserving order. threads > 1 fans out over a
    process pool (fn must be picklable); batch_size sets the chunk each
    worker takes at once."""
    items = list(items)
    if threads <= 1 or not items:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(
        max_workers=threads, initializer=_pool_init, initargs=(fn,)
    ) as pool:
        return list(pool.map(_pool_call, items, chunksize=max(1, batch_size)))


def bench_throughput(pipeline, corpus, batch_size: int = 1, threads: int = 1, runs: int = 3) -> BenchReport:
    """Time end-to-end segmentation over the corpus.

    One untimed warm-up pass, then at least three timed passes; the
    median wall time goes into the report. Throughput is UTF-8 input
    bytes per second. Pool start-up stays outside the timed region so
    the number reflects segmentation, not fork cost.
    """
    corpus = [s for s in corpus]
    if not corpus:
        raise EmptyCorpus("nothing to benchmark")
    runs = max(3, runs)
    nbytes = sum(len(s.encode("utf-8")) for s in corpus)

    pool = None
    try:
        if threads > 1:
            pool = ProcessPoolExecutor(
                max_workers=threads, initializer=_pool_init, initargs=(pipeline,)
            )

            def run_once():
                for _ in pool.map(_pool_call, corpus, chunksize=max(1, batch_size)):
                    pass
        else:

            def run_once():
                for s in corpus:
                    pipeline(s)

        run_once()
        times = []
        for _ in range(runs):
            t0 = time.perf_counter()
            run_once()
            times.append(time.perf_counter() - t0)
    finally:
        if pool is not None:
            pool.shutdown()

    wall = statistics.median(times)
    return BenchReport(nbytes, wall, nbytes / 1024 / wall, batch_size, threads)
