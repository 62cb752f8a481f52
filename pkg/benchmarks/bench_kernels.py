"""Compare the compiled and pure-numpy Viterbi kernels.

Runs both backends over the same batch of random lattices, checks they
agree tag-for-tag, and prints throughput side by side. The compiled
backend needs one warm-up call to amortize JIT compilation; that call is
excluded from timing.

Usage:
    python3 benchmarks/bench_kernels.py [--sentences N] [--max-len N]
"""
import argparse
import time

import numpy as np

from zhseg._kernels import HAS_NUMBA, viterbi_path_np, viterbi_path_numba


def make_batch(n_sentences, max_len, seed=7):
    rng = np.random.default_rng(seed)
    batch = []
    for _ in range(n_sentences):
        n = int(rng.integers(1, max_len + 1))
        batch.append(rng.normal(scale=2.0, size=(n, 4)))
    trans = rng.normal(size=(4, 4))
    return batch, trans


def run(kernel, batch, trans):
    t0 = time.perf_counter()
    out = [kernel(e, trans) for e in batch]
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sentences", type=int, default=20000)
    ap.add_argument("--max-len", type=int, default=40)
    args = ap.parse_args()

    batch, trans = make_batch(args.sentences, args.max_len)
    chars = sum(e.shape[0] for e in batch)
    print(f"{args.sentences} lattices, {chars} positions total")

    np_time, np_tags = run(viterbi_path_np, batch, trans)
    print(f"numpy   : {np_time:8.3f} s  ({chars / np_time / 1000:9.1f} kpos/s)")

    if not HAS_NUMBA:
        print("numba   : not installed, skipping")
        return

    viterbi_path_numba(batch[0], trans)  # warm-up, triggers compilation
    nb_time, nb_tags = run(viterbi_path_numba, batch, trans)
    print(f"numba   : {nb_time:8.3f} s  ({chars / nb_time / 1000:9.1f} kpos/s)")
    print(f"speedup : {np_time / nb_time:8.2f}x")

    mismatches = sum(
        not np.array_equal(a, b) for a, b in zip(np_tags, nb_tags)
    )
    print(f"agreement: {args.sentences - mismatches}/{args.sentences} identical")
    if mismatches:
        raise SystemExit("backends disagree")


if __name__ == "__main__":
    main()
