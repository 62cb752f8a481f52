"""Shipping gate: the numbered end-to-end checks this package must pass.

Every test here is one release criterion, exercised at its stated
tolerance and (where stated) time budget. The terminal summary hook in
conftest prints one PASS/FAIL line per criterion after the run.
"""
import json
import math
import random
import re
import time

import numpy as np
import pytest

from zhseg import (
    EXHAUSTIVE,
    DecoderConfig,
    EmissionMatrix,
    TransitionMatrix,
    bmes_encode,
    brute_force_decode,
    f1_score,
    load_arpa,
    pcrf_decode,
    save_arpa,
    save_model,
    segment,
    train_lm,
    train_perceptron,
    viterbi,
)
from zhseg.corpus import legal_tag_path
from zhseg.lm import BOS, EOS, UNK

# Paths emitted while running the decode-equivalence criteria; the
# legality criterion audits this ledger afterwards.
_PATHS = {"checked": 0, "illegal": 0}


def _audit(*tag_seqs):
    for tags in tag_seqs:
        _PATHS["checked"] += 1
        if not legal_tag_path(tags):
            _PATHS["illegal"] += 1


def _random_instance(rng, n, alphabet="abcd"):
    chars = "".join(rng.choice(list(alphabet), size=n))
    emis = EmissionMatrix(rng.normal(scale=2.0, size=(n, 4)), chars)
    trans = TransitionMatrix(rng.normal(size=(4, 4)))
    return emis, trans


# -- 1: zero-weight reduction ----------------------------------------------


def test_c01_zero_weight_reduction():
    """pcrf with lm_weight 0 is exactly viterbi on 1000 random instances."""
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    for _ in range(1000):
        n = int(rng.integers(1, 11))
        emis, trans = _random_instance(rng, n)
        v = viterbi(emis, trans)
        p = pcrf_decode(emis, trans, None, config=DecoderConfig(lm_weight=0.0))
        _audit(v.tags, p.tags)
        assert p.tags == v.tags
        assert abs(p.score - v.score) <= 1e-9
    assert time.perf_counter() - t0 < 10.0


# -- 2: beam oracle equivalence --------------------------------------------


def _random_toy_lms(count, seed):
    rng = random.Random(seed)
    lms = []
    for _ in range(count):
        corpus = [
            [rng.choice("abcd") for _ in range(rng.randint(1, 5))]
            for _ in range(rng.randint(4, 9))
        ]
        lms.append(train_lm(corpus, order=2))
    return lms


def test_c02_exhaustive_beam_matches_brute_force():
    """Unpruned fused search equals exhaustive path enumeration on 500
    random instances with random toy bigram models."""
    rng = np.random.default_rng(202)
    rr = random.Random(202)
    lms = _random_toy_lms(5, 2020)
    t0 = time.perf_counter()
    for k in range(500):
        n = int(rng.integers(1, 9))
        emis, trans = _random_instance(rng, n)
        lm = lms[k % len(lms)]
        lam = rr.choice([0.1, 0.25, 0.4, 0.5, 0.7, 0.9, 1.0])
        cfg = DecoderConfig(lm_weight=lam, beam_width=EXHAUSTIVE)
        a = pcrf_decode(emis, trans, lm, config=cfg)
        b = brute_force_decode(emis, trans, lm, lm_weight=lam)
        _audit(a.tags, b.tags)
        assert a.tags == b.tags
        assert abs(a.score - b.score) <= 1e-9
    assert time.perf_counter() - t0 < 60.0


# -- 3: viterbi correctness ------------------------------------------------


def test_c03_viterbi_matches_brute_force():
    """Exact DP equals path enumeration, scores bit-for-bit, 500 instances."""
    rng = np.random.default_rng(303)
    for _ in range(500):
        n = int(rng.integers(1, 9))
        emis, trans = _random_instance(rng, n)
        v = viterbi(emis, trans)
        b = brute_force_decode(emis, trans, None)
        _audit(v.tags, b.tags)
        assert v.tags == b.tags
        assert v.score == b.score


# -- 4: legality -----------------------------------------------------------


def test_c04_no_illegal_paths_emitted():
    """Every masked decode above produced a well-formed BMES path."""
    if _PATHS["checked"] == 0:
        # Criteria 1-3 did not run (filtered invocation); do a reduced sweep.
        rng = np.random.default_rng(404)
        lm = _random_toy_lms(1, 4040)[0]
        for _ in range(150):
            n = int(rng.integers(1, 9))
            emis, trans = _random_instance(rng, n)
            _audit(
                viterbi(emis, trans).tags,
                pcrf_decode(
                    emis, trans, lm, config=DecoderConfig(lm_weight=0.5)
                ).tags,
                brute_force_decode(emis, trans, None).tags,
            )
    assert _PATHS["checked"] > 0
    assert _PATHS["illegal"] == 0


# -- 5: language model normalization ---------------------------------------


def _observed_contexts(model):
    out = {(BOS,)}
    for ctx_ids in model.backoff:
        out.add(tuple(model.words[i] for i in ctx_ids))
    return out


def test_c05_lm_normalization_and_arpa_round_trip(tmp_path):
    """Conditional distributions sum to one for every observed context;
    serialization preserves every stored query to 1e-6 in log10."""
    rr = random.Random(505)
    for ci, (vocab_size, order) in enumerate([(6, 2), (18, 3), (45, 2)]):
        vocab = [f"w{i}" for i in range(vocab_size)]
        corpus = [
            [rr.choice(vocab) for _ in range(rr.randint(1, 7))]
            for _ in range(40)
        ]
        model = train_lm(corpus, order=order)
        predict = [w for w in model.vocab if w != BOS]
        for ctx in _observed_contexts(model):
            total = sum(model.prob(w, ctx) for w in predict)
            assert abs(total - 1.0) <= 1e-6, (ctx, total)

        path = tmp_path / f"lm{ci}.arpa"
        save_arpa(model, path)
        loaded = load_arpa(path)
        for gram in model.logprob:
            words = tuple(model.words[i] for i in gram)
            if words[-1] == BOS:
                continue
            orig = model.logprob_word(words[-1], words[:-1])
            back = loaded.logprob_word(words[-1], words[:-1])
            assert abs(orig - back) <= 1e-6, words


# -- 6: perplexity correctness ---------------------------------------------

PPL_SENTENCES = [
    ["我们", "喜欢", "吃", "苹果"],
    ["他们", "喝", "茶"],
    ["我们", "喝", "茶"],
    ["苹果", "好吃"],
    ["他们", "吃", "苹果"],
    ["我们", "喜欢", "喝", "茶"],
    ["茶"],
    ["苹果"],
    ["我们"],
    ["好吃"],
    ["吃", "苹果"],
    ["喝", "茶", "喝", "茶"],
    ["我们", "我们", "我们"],
    ["苹果", "茶"],
    ["茶", "苹果", "好吃"],
    ["白开水"],
    ["我们", "白开水"],
    ["白开水", "好吃", "白开水"],
    ["他们", "喜欢", "白开水", "苹果"],
    ["吃", "喝", "吃", "喝", "吃", "喝"],
]


def test_c06_ppl_reference_walk_and_streaming(toy_lm):
    """Bigram perplexity equals an independent chain-rule product built
    from single probability queries; streaming equals batch."""
    assert len(PPL_SENTENCES) == 20
    for sentence in PPL_SENTENCES:
        product = 1.0
        prev = BOS
        for w in sentence:
            product *= toy_lm.prob(w, (prev,))
            prev = w if w in toy_lm.vocab else UNK
        expected = product ** (-1.0 / len(sentence))
        assert toy_lm.ppl(sentence).ppl == pytest.approx(expected, rel=1e-9)

        state = toy_lm.stream_init()
        for k, w in enumerate(sentence, start=1):
            state = toy_lm.stream_push(state, w)
            batch = toy_lm.ppl(sentence[:k])
            assert state.result().log10_prob_sum == pytest.approx(
                batch.log10_prob_sum, rel=1e-12, abs=1e-12
            )
            assert state.result().ppl == pytest.approx(batch.ppl, rel=1e-12)


# -- 7: fluency crossover --------------------------------------------------

CROSSOVER_TEXT = "请播放一首将军令"
CROSSOVER_GOLD = ["请", "播放", "一首", "将军令"]
CROSSOVER_WRONG = ["请", "播放", "一首", "将", "军令"]


def _crossover_fixture():
    emis = np.full((8, 4), -3.0)
    for i, t in enumerate(bmes_encode(CROSSOVER_GOLD).tags):
        emis[i, t] = 0.0
    # Nudge the decoder toward splitting 将军令, as a scorer that has
    # never seen the song title would.
    emis[5, 3] = 0.15
    emis[6, 0] = 0.15
    lm = train_lm(
        [
            ["请", "播放", "一首", "将军令"],
            ["请", "播放", "一首", "歌"],
            ["播放", "将军令"],
            ["一首", "将军令"],
            ["我", "喜欢", "将军令"],
        ],
        order=2,
    )
    return EmissionMatrix(emis, CROSSOVER_TEXT), TransitionMatrix(np.zeros((4, 4))), lm


def test_c07_fluency_crossover_fixture():
    """Some lm_weight in (0, 1] flips the decode from the scorer's wrong
    split to the fluent gold segmentation; weight 0 stays wrong."""
    emis, trans, lm = _crossover_fixture()
    plain = pcrf_decode(emis, trans, lm, config=DecoderConfig(lm_weight=0.0))
    assert list(plain.words) == CROSSOVER_WRONG

    flipped = [
        lam
        for lam in [round(0.1 * k, 1) for k in range(1, 11)]
        if list(
            pcrf_decode(
                emis, trans, lm, config=DecoderConfig(lm_weight=lam, beam_width=8)
            ).words
        )
        == CROSSOVER_GOLD
    ]
    assert flipped, "no lm_weight in (0,1] recovered the gold segmentation"


# -- 8: low-resource directionality ----------------------------------------


def _chain_vocab(rng, n_words=800):
    chars = [chr(0x4E00 + i) for i in rng.sample(range(3000), 45)]
    vocab, seen = [], set()
    while len(vocab) < n_words:
        length = rng.choices([1, 2, 3, 4], weights=[20, 50, 20, 10])[0]
        w = "".join(rng.choice(chars) for _ in range(length))
        if w not in seen:
            seen.add(w)
            vocab.append(w)
    return vocab


def _chain_corpus(seed=0, n_sentences=3600):
    """Zipfian vocabulary, Markov word chains: enough sequential signal
    for a language model to earn its keep."""
    rng = random.Random(seed)
    vocab = _chain_vocab(rng)
    n = len(vocab)
    zipf = [1.0 / (r + 2.7) ** 1.07 for r in range(n)]
    succ = {w: rng.choices(range(n), weights=zipf, k=8) for w in vocab}
    corpus = []
    for _ in range(n_sentences):
        k = rng.randint(5, 25)
        sent = [vocab[rng.choices(range(n), weights=zipf, k=1)[0]]]
        for _ in range(k - 1):
            if rng.random() < 0.85:
                sent.append(vocab[rng.choice(succ[sent[-1]])])
            else:
                sent.append(vocab[rng.choices(range(n), weights=zipf, k=1)[0]])
        corpus.append(sent)
    return corpus


def test_c08_low_resource_fusion_directionality():
    """Tagger on 1% of sentences, LM on the full split: the fused decoder
    (lm_weight tuned on dev) reaches at least the plain decoder's F1 for
    a majority of three seeds."""
    t0 = time.perf_counter()
    corpus = _chain_corpus()
    assert sum(len(s) for s in corpus) >= 50_000
    train, dev, test = corpus[:3000], corpus[3000:3300], corpus[3300:]
    lm = train_lm(train, order=2)

    wins = 0
    for seed in (1, 2, 3):
        rng = random.Random(seed)
        sample = [train[i] for i in sorted(rng.sample(range(len(train)), 30))]
        model = train_perceptron([bmes_encode(s) for s in sample], epochs=1, seed=seed)

        def run_f1(part, decoder, lam=0.0):
            cfg = DecoderConfig(lm_weight=lam, beam_width=8)
            pred = [segment("".join(s), model, lm, cfg, decoder) for s in part]
            return f1_score(part, pred).f1

        grid = [round(0.1 * k, 1) for k in range(1, 10)]
        best_lam = max(grid, key=lambda lam: run_f1(dev, "pcrf", lam))
        if run_f1(test, "pcrf", best_lam) >= run_f1(test, "crf"):
            wins += 1
    assert wins >= 2, f"fused decoding helped on only {wins} of 3 seeds"
    assert time.perf_counter() - t0 < 600.0


# -- 9: scorer fixture -----------------------------------------------------


def test_c09_f1_fixture():
    """The one-shared-boundary pair scores P=0.2, R=0.25, F1 0.2222."""
    rep = f1_score(
        [["新来", "的", "吃鸡", "主播"]],
        [["新", "来", "的", "吃", "鸡主播"]],
    )
    assert abs(rep.precision - 0.2) <= 1e-4
    assert abs(rep.recall - 0.25) <= 1e-4
    assert abs(rep.f1 - 0.2222) <= 1e-4


# -- 10: throughput reporting ----------------------------------------------


@pytest.fixture(scope="module")
def cli_dir(tmp_path_factory, toy_model, toy_lm):
    from zhseg.cli import main  # noqa: F401  (import check)

    d = tmp_path_factory.mktemp("accept")
    lines = ["我们喜欢吃苹果", "他们喝茶", "苹果好吃", "我们喝茶"] * 10
    (d / "raw.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (d / "corpus.txt").write_text(
        "我们 喜欢 吃 苹果\n他们 喝 茶\n我们 喝 茶\n苹果 好吃\n他们 吃 苹果\n",
        encoding="utf-8",
    )
    save_model(toy_model, d / "model.tsv")
    save_arpa(toy_lm, d / "lm.arpa")
    return d


def test_c10_bench_reporting(cli_dir, capsys):
    """Benchmark records are arithmetically consistent and the speed
    floor verdict is reported (not asserted) for this host."""
    from zhseg.cli import main

    code = main(
        ["bench", "--input", str(cli_dir / "raw.txt"),
         "--model", str(cli_dir / "model.tsv"), "--batch", "1,8"]
    )
    assert code == 0
    out = capsys.readouterr().out.strip().split("\n")
    records = [json.loads(ln) for ln in out if not ln.startswith("#")]
    assert len(records) == 2
    for rec in records:
        recomputed = rec["bytes_processed"] / 1024 / rec["wall_seconds"]
        assert rec["kb_per_s"] == pytest.approx(recomputed, rel=1e-6)
    assert re.fullmatch(
        r"# minimum speed 68 KB/s: (PASS|FAIL) \(best \d+(\.\d+)? KB/s\)",
        out[-1],
    )


# -- 11: determinism -------------------------------------------------------


def test_c11_determinism(cli_dir, tmp_path):
    """Same inputs, same seed: byte-identical models, byte-identical
    language models, byte-identical segmentation output."""
    from zhseg.cli import main

    corpus = str(cli_dir / "corpus.txt")
    raw = str(cli_dir / "raw.txt")
    pairs = []
    for run in ("one", "two"):
        d = tmp_path / run
        d.mkdir()
        assert main(["train-tagger", "--input", corpus, "--output",
                     str(d / "m.tsv"), "--seed", "42"]) == 0
        assert main(["train-lm", "--input", corpus, "--output",
                     str(d / "lm.arpa")]) == 0
        assert main(["segment", "--model", str(d / "m.tsv"), "--input", raw,
                     "--decoder", "pcrf", "--lambda", "0.4",
                     "--lm", str(d / "lm.arpa"),
                     "--output", str(d / "seg.txt")]) == 0
        pairs.append(d)
    one, two = pairs
    for name in ("m.tsv", "lm.arpa", "seg.txt"):
        assert (one / name).read_bytes() == (two / name).read_bytes(), name
