"""Word-level n-gram language model with absolute-discount smoothing.

Probabilities are interpolated: the top order keeps discounted raw
counts, lower orders use continuation (distinct-predecessor) counts in
the Kneser-Ney style, and the unigram level interpolates with a uniform
floor so every vocabulary word, including <unk>, keeps positive mass.
Storage follows the ARPA convention: log10 probabilities plus log10
backoff weights per context.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import DegenerateVocab, EmptyCorpus, EmptyInput, FormatError, OrderMismatch

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

DEFAULT_DISCOUNT = 0.75
_PSEUDO_LOG10 = -99.0  # conventional placeholder for never-predicted entries


@dataclass(frozen=True)
class PplResult:
    ppl: float
    log10_prob_sum: float
    word_count: int


@dataclass(frozen=True)
class PplState:
    """Rolling perplexity accumulator: context ids, log10 sum, word count."""

    context: tuple[int, ...]
    log10_prob_sum: float
    word_count: int

    def result(self) -> PplResult:
        if self.word_count == 0:
            raise EmptyInput("no words pushed")
        return PplResult(
            ppl=10.0 ** (-self.log10_prob_sum / self.word_count),
            log10_prob_sum=self.log10_prob_sum,
            word_count=self.word_count,
        )


class NGramLM:
    def __init__(
        self,
        order: int,
        vocab: dict[str, int],
        logprob: dict[tuple[int, ...], float],
        backoff: dict[tuple[int, ...], float],
        words: list[str] | None = None,
        discount: float | None = None,
    ):
        if words is None:
            words = [w for w, _ in sorted(vocab.items(), key=lambda kv: kv[1])]
        self.order = order
        self.vocab = vocab
        self.words = words
        self.logprob = logprob
        self.backoff = backoff
        self.discount = discount
        self.bos_id = vocab[BOS]
        self.eos_id = vocab[EOS]
        self.unk_id = vocab[UNK]

    # -- queries ---------------------------------------------------------

    def word_id(self, word: str) -> int:
        return self.vocab.get(word, self.unk_id)

    def start_context(self) -> tuple[int, ...]:
        return (self.bos_id,) * (self.order - 1)

    def push_context(self, context: tuple[int, ...], wid: int) -> tuple[int, ...]:
        if self.order == 1:
            return ()
        return (context + (wid,))[-(self.order - 1):]

    def logprob_ids(self, context: tuple[int, ...], wid: int) -> float:
        """log10 p(w | context) with standard backoff walk."""
        acc = 0.0
        if self.order > 1:
            context = context[-(self.order - 1):]
        else:
            context = ()
        while True:
            entry = self.logprob.get(context + (wid,))
            if entry is not None:
                return acc + entry
            if not context:
                return acc + self.logprob[(self.unk_id,)]
            acc += self.backoff.get(context, 0.0)
            context = context[1:]

    def logprob_word(self, word: str, context: tuple[str, ...] = ()) -> float:
        ctx = tuple(self.word_id(w) for w in context)
        return self.logprob_ids(ctx, self.word_id(word))

    def prob(self, word: str, context: tuple[str, ...] = ()) -> float:
        return 10.0 ** self.logprob_word(word, context)

    # -- perplexity ------------------------------------------------------

    def ppl(self, words, include_eos: bool = False) -> PplResult:
        """Perplexity of a word sequence, 10^(-sum/m) in log10 space.

        <s> conditions the first word but is not counted; </s> is only
        scored when include_eos is set, and never adds to the count.
        """
        words = list(words)
        if not words:
            raise EmptyInput("empty word sequence")
        ctx = self.start_context()
        total = 0.0
        for w in words:
            wid = self.word_id(w)
            total += self.logprob_ids(ctx, wid)
            ctx = self.push_context(ctx, wid)
        if include_eos:
            total += self.logprob_ids(ctx, self.eos_id)
        m = len(words)
        return PplResult(ppl=10.0 ** (-total / m), log10_prob_sum=total, word_count=m)

    def stream_init(self) -> PplState:
        return PplState(context=self.start_context(), log10_prob_sum=0.0, word_count=0)

    def stream_push(self, state: PplState, word: str) -> PplState:
        wid = self.word_id(word)
        lp = self.logprob_ids(state.context, wid)
        return PplState(
            context=self.push_context(state.context, wid),
            log10_prob_sum=state.log10_prob_sum + lp,
            word_count=state.word_count + 1,
        )


def train_lm(
    corpus,
    order: int = 2,
    min_count: int = 1,
    discount: float = DEFAULT_DISCOUNT,
) -> NGramLM:
    """Train an interpolated absolute-discount model.

    Sentences are padded with <s>...</s>; words under min_count collapse
    into <unk>. Orders below the top are estimated from continuation
    counts so that frequent-but-predictable words do not dominate the
    backoff distribution.
    """
    sentences = [list(s) for s in corpus if s]
    if not sentences:
        raise EmptyCorpus("no sentences")
    if not 2 <= order <= 5:
        raise ValueError("order must be in [2, 5]")
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if not 0.0 < discount < 1.0:
        raise ValueError("discount must be in (0, 1)")

    word_counts = Counter(w for s in sentences for w in s)
    kept = sorted(w for w, c in word_counts.items() if c >= min_count)
    if len(kept) < 2:
        raise DegenerateVocab(f"{len(kept)} distinct words survive min_count={min_count}")

    words = [BOS, EOS, UNK] + kept
    vocab = {w: i for i, w in enumerate(words)}
    bos, eos, unk = vocab[BOS], vocab[EOS], vocab[UNK]
    # prediction vocabulary: everything that may follow a context
    predicted = [i for i in range(len(words)) if i != bos]

    counts: list[Counter] = [Counter() for _ in range(order + 1)]
    for sent in sentences:
        toks = [bos] * (order - 1) + [vocab.get(w, unk) for w in sent] + [eos]
        for k in range(1, order + 1):
            ck = counts[k]
            for i in range(len(toks) - k + 1):
                ck[tuple(toks[i : i + k])] += 1

    # continuation counts per level: distinct predecessors in the level above
    cont: list[Counter] = [Counter() for _ in range(order)]
    for k in range(1, order):
        ck = cont[k]
        for gram in counts[k + 1]:
            ck[gram[1:]] += 1

    logprob: dict[tuple[int, ...], float] = {}
    backoff: dict[tuple[int, ...], float] = {}

    # unigram level over the prediction vocab, with a uniform floor
    cont1 = cont[1] if order > 1 else counts[1]
    cont_total = sum(cont1.get((w,), 0) for w in predicted)
    seen_types = sum(1 for w in predicted if cont1.get((w,), 0) > 0)
    floor = discount * seen_types / cont_total / len(predicted)
    for w in predicted:
        c = cont1.get((w,), 0)
        logprob[(w,)] = math.log10(max(c - discount, 0.0) / cont_total + floor)
    logprob[(bos,)] = _PSEUDO_LOG10

    # middle levels from continuation counts
    for k in range(2, order):
        ctx_total = Counter()
        ctx_types = Counter()
        for gram, c in cont[k].items():
            if gram[-1] == bos:
                continue
            ctx_total[gram[:-1]] += c
            ctx_types[gram[:-1]] += 1
        for gram in counts[k]:
            if gram[-1] == bos:
                logprob[gram] = _PSEUDO_LOG10
                continue
            ctx = gram[:-1]
            total = ctx_total[ctx]
            if total == 0:
                logprob[gram] = _PSEUDO_LOG10
                continue
            lower = 10.0 ** logprob[gram[1:]]
            gamma = discount * ctx_types[ctx] / total
            p = max(cont[k][gram] - discount, 0.0) / total + gamma * lower
            logprob[gram] = math.log10(p)
        for ctx, total in ctx_total.items():
            backoff[ctx] = math.log10(discount * ctx_types[ctx] / total)

    # top level from raw counts
    ctx_total = Counter()
    ctx_types = Counter()
    for gram, c in counts[order].items():
        ctx_total[gram[:-1]] += c
        ctx_types[gram[:-1]] += 1
    for gram, c in counts[order].items():
        ctx = gram[:-1]
        total = ctx_total[ctx]
        lower = 10.0 ** logprob[gram[1:]]
        gamma = discount * ctx_types[ctx] / total
        p = max(c - discount, 0.0) / total + gamma * lower
        logprob[gram] = math.log10(p)
    for ctx, total in ctx_total.items():
        backoff[ctx] = math.log10(discount * ctx_types[ctx] / total)

    return NGramLM(order, vocab, logprob, backoff, words=words, discount=discount)


# -- ARPA serialization ---------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.7g}"


def save_arpa(model: NGramLM, path: str | Path) -> None:
    """Write the model in the standard ARPA text format."""
    by_order: dict[int, list[tuple[tuple[str, ...], float]]] = {}
    for gram, lp in model.logprob.items():
        key = tuple(model.words[i] for i in gram)
        by_order.setdefault(len(gram), []).append((key, lp))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\\data\\\n")
        for k in range(1, model.order + 1):
            fh.write(f"ngram {k}={len(by_order.get(k, []))}\n")
        for k in range(1, model.order + 1):
            fh.write(f"\n\\{k}-grams:\n")
            for key, lp in sorted(by_order.get(k, [])):
                ids = tuple(model.vocab[w] for w in key)
                line = f"{_fmt(lp)}\t{' '.join(key)}"
                if k < model.order and ids in model.backoff:
                    line += f"\t{_fmt(model.backoff[ids])}"
                fh.write(line + "\n")
        fh.write("\n\\end\\\n")


def load_arpa(path: str | Path) -> NGramLM:
    """Read an ARPA file, including ones produced by external toolkits."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")

    declared: dict[int, int] = {}
    i = 0
    while i < len(lines) and lines[i].strip() != "\\data\\":
        if lines[i].strip() and not lines[i].startswith("#"):
            raise FormatError(i + 1, "expected \\data\\ header")
        i += 1
    if i == len(lines):
        raise FormatError(len(lines), "missing \\data\\ header")
    i += 1
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if line.startswith("\\"):
            break
        if not line.startswith("ngram "):
            raise FormatError(i + 1, f"unexpected line in \\data\\ section: {line!r}")
        try:
            k_str, n_str = line[len("ngram "):].split("=")
            declared[int(k_str)] = int(n_str)
        except ValueError as exc:
            raise FormatError(i + 1, f"bad ngram count line: {line!r}") from exc
        i += 1
    if not declared:
        raise FormatError(i, "no ngram counts declared")
    order = max(declared)
    if order > 5:
        raise OrderMismatch(f"order {order} outside the supported range 1..5")

    vocab: dict[str, int] = {}
    words: list[str] = []

    def intern(word: str) -> int:
        if word not in vocab:
            vocab[word] = len(words)
            words.append(word)
        return vocab[word]

    str_probs: dict[int, dict[tuple[str, ...], float]] = {k: {} for k in declared}
    str_bows: dict[tuple[str, ...], float] = {}
    seen_end = False
    current = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line:
            continue
        if line == "\\end\\":
            seen_end = True
            break
        if line.endswith("-grams:") and line.startswith("\\"):
            try:
                current = int(line[1 : -len("-grams:")])
            except ValueError as exc:
                raise FormatError(i, f"bad section header {line!r}") from exc
            if current not in declared:
                raise OrderMismatch(f"section {current}-grams not declared in \\data\\")
            continue
        if current == 0:
            raise FormatError(i, "entry before any n-gram section")
        toks = line.split()
        if len(toks) not in (current + 1, current + 2):
            raise FormatError(i, f"expected {current}-gram entry, got {len(toks)} fields")
        try:
            lp = float(toks[0])
            bow = float(toks[current + 1]) if len(toks) == current + 2 else None
        except ValueError as exc:
            raise FormatError(i, "unparseable numeric field") from exc
        gram = tuple(toks[1 : current + 1])
        str_probs[current][gram] = lp
        if bow is not None:
            str_bows[gram] = bow
    if not seen_end:
        raise FormatError(len(lines), "missing \\end\\ sentinel")
    for k, expected in declared.items():
        if len(str_probs[k]) != expected:
            raise FormatError(
                0, f"\\{k}-grams: declared {expected} entries, found {len(str_probs[k])}"
            )

    for special in (BOS, EOS, UNK):
        if (special,) not in str_probs.get(1, {}):
            str_probs.setdefault(1, {})[(special,)] = _PSEUDO_LOG10
    for k in sorted(str_probs):
        for gram in str_probs[k]:
            for w in gram:
                intern(w)

    logprob = {
        tuple(vocab[w] for w in gram): lp
        for k in str_probs
        for gram, lp in str_probs[k].items()
    }
    bows = {tuple(vocab[w] for w in gram): b for gram, b in str_bows.items()}
    return NGramLM(order, vocab, logprob, bows, words=words)
