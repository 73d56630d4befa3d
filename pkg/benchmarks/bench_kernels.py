"""Benchmark the hot training kernels: numba-compiled vs interpreted.

Both paths run the same source (see alphagraph.accel); this script measures
the speedup on representative workloads and verifies the outputs agree.

Run:  python benchmarks/bench_kernels.py [--scale N]
"""

import argparse
import time

import numpy as np

from alphagraph import accel
from alphagraph.embeddings import _glove_epoch, glove_weight
from alphagraph.news import CooccurrenceMatrix
from alphagraph.word2vec import _cbow_epoch, build_negative_table


def time_fn(fn, *args, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_cbow(scale, compiled):
    rng = np.random.default_rng(0)
    vocab, dim, n_tokens = 2000, 64, 200_000 * scale
    tokens = rng.integers(0, vocab, size=n_tokens).astype(np.int64)
    starts = np.arange(0, n_tokens + 1, 40, dtype=np.int64)
    table = build_negative_table(np.bincount(tokens, minlength=vocab))

    def run(fn):
        w_in = (np.random.default_rng(1).random((vocab, dim)) - 0.5) / dim
        w_out = np.zeros((vocab, dim))
        return fn(tokens, starts, w_in, w_out, 5, 5, 0.025, table, 12345), w_in

    t_py, (res_py, w_py) = time_fn(lambda: run(_cbow_epoch), repeats=1)
    # warm the JIT before timing
    run(compiled)
    t_nb, (res_nb, w_nb) = time_fn(lambda: run(compiled), repeats=1)
    assert res_py[1] == res_nb[1] and res_py[2] == res_nb[2]
    assert np.allclose(w_py, w_nb, atol=1e-12, rtol=0)
    return "cbow_epoch", t_py, t_nb


def bench_glove(scale, compiled):
    rng = np.random.default_rng(2)
    n, dim = 300, 32
    counts = {}
    for i in range(n):
        for j in range(i + 1, n):
            c = int(rng.integers(0, 30))
            if c:
                counts[(i, j)] = c
    x = CooccurrenceMatrix(tuple(map(str, range(n))), counts)
    rows, cols, vals = x.to_coo()
    logx = np.log(vals)
    wgt = np.array([glove_weight(v, 100.0, 0.75) for v in vals])

    def run(fn, epochs=5 * scale):
        emb = np.random.default_rng(3).normal(scale=0.3, size=(n, dim))
        bias = np.zeros(n)
        loss = 0.0
        for _ in range(epochs):
            loss = fn(rows, cols, logx, wgt, emb, bias, 0.01)
        return loss, emb

    t_py, (loss_py, emb_py) = time_fn(lambda: run(_glove_epoch), repeats=1)
    run(compiled, epochs=1)
    t_nb, (loss_nb, emb_nb) = time_fn(lambda: run(compiled), repeats=1)
    assert abs(loss_py - loss_nb) <= 1e-9 * max(1.0, abs(loss_py))
    assert np.allclose(emb_py, emb_nb, atol=1e-12, rtol=0)
    return "glove_epoch", t_py, t_nb


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scale", type=int, default=1,
                        help="workload multiplier (default 1)")
    args = parser.parse_args()
    if not accel.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")
    rows = [
        bench_cbow(args.scale, accel.force_njit(_cbow_epoch)),
        bench_glove(args.scale, accel.force_njit(_glove_epoch)),
    ]
    print(f"{'kernel':<14}{'interpreted':>14}{'numba':>12}{'speedup':>10}")
    for name, t_py, t_nb in rows:
        print(f"{name:<14}{t_py:>12.3f}s{t_nb:>11.4f}s{t_py / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
