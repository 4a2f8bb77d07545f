#!/usr/bin/env python3
"""Time the hot kernels on both backends and report the speedup.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from absagru import backends


def bench(fn, repeats):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def _gru_case(rng, T, H):
    xz, xr, xh = (rng.standard_normal((T, H)) for _ in range(3))
    uz, ur, uh = (rng.uniform(-0.3, 0.3, (H, H)) for _ in range(3))
    h0 = np.zeros(H)
    grad_h = rng.standard_normal((T, H))

    def run(k):
        fwd = k.gru_recurrence_forward(xz, xr, xh, uz, ur, uh, h0)
        k.gru_recurrence_backward(grad_h, *fwd, uz, ur, uh, h0)

    return run


def workloads(rng):
    L, T = 3, 40
    em = rng.standard_normal((T, L))
    tr = rng.standard_normal((L + 2, L + 2))

    P, D, F, W = 12, 25, 30, 3
    emb = rng.standard_normal((P, D))
    filt = rng.standard_normal((F, W, D))
    bias = rng.standard_normal(F)
    go = rng.standard_normal(F)

    def crf(k):
        logz, alpha = k.crf_partition_forward(em, tr)
        k.crf_partition_backward(em, tr, alpha, logz, 1.0)
        k.crf_viterbi(em, tr)

    def conv(k):
        out, arg = k.conv_maxpool_forward(emb, filt, bias)
        k.conv_maxpool_backward(emb, filt, arg, go)

    return [("gru fwd+bwd (T=10, H=32)", _gru_case(rng, 10, 32)),
            ("gru fwd+bwd (T=40, H=100)", _gru_case(rng, 40, 100)),
            ("crf fwd+bwd+viterbi (T=40, L=3)", crf),
            ("char conv+pool (P=12, F=30)", conv)]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    names = backends.available_backends()
    if len(names) < 2:
        print(f"only {names} available; build the extension to compare")
    rng = np.random.default_rng(0)
    rows = []
    for label, fn in workloads(rng):
        times = {}
        for name in names:
            k = backends._BACKENDS[name]
            times[name] = bench(lambda: fn(k), args.repeats)
        rows.append((label, times))

    width = max(len(r[0]) for r in rows)
    header = f"{'kernel':<{width}}  " + "  ".join(f"{n:>12}" for n in names)
    if "compiled" in names and "python" in names:
        header += "  speedup"
    print(header)
    for label, times in rows:
        line = f"{label:<{width}}  " + "  ".join(
            f"{times[n] * 1e6:>10.1f}us" for n in names)
        if "compiled" in times and "python" in times:
            line += f"  {times['python'] / times['compiled']:>6.1f}x"
        print(line)


if __name__ == "__main__":
    main()
