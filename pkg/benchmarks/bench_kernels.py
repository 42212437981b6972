#!/usr/bin/env python3
"""Benchmark the compiled loss kernels against the pure-numpy fallback.

Measures the per-batch loss+gradient evaluation (the non-BLAS hot loop of a
training step) and an end-to-end toy-encoder training epoch under each
backend. Run from the repo root:

    python benchmarks/bench_kernels.py [--batches 2000] [--batch-size 32]
"""

import argparse
import time

import numpy as np

from spanemo import kernels
from spanemo.kernels import py_kernels


def time_kernel(fn, args, repeats):
    best = float("inf")
    for _ in range(3):
        start = time.perf_counter()
        for _ in range(repeats):
            fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_loss_kernels(batch_size, n_classes, repeats):
    rng = np.random.default_rng(0)
    y = (rng.random((batch_size, n_classes)) < 0.35).astype(np.float64)
    y_hat = rng.uniform(0.0, 1.0, size=(batch_size, n_classes))

    rows = []
    for name, fn_fast, fn_py, args in (
        ("lca_batch", kernels.lca_batch, py_kernels.lca_batch, (y, y_hat)),
        ("bce_batch", kernels.bce_batch, py_kernels.bce_batch, (y, y_hat, 1e-7)),
    ):
        t_py = time_kernel(fn_py, args, repeats)
        if kernels.BACKEND == "cython":
            t_fast = time_kernel(fn_fast, args, repeats)
            rows.append((name, t_py, t_fast, t_py / t_fast))
        else:
            rows.append((name, t_py, None, None))
    return rows


def bench_epoch():
    """One toy-encoder training epoch on synthetic data, per backend."""
    import os
    import subprocess
    import sys

    code = r"""
import time
import numpy as np
from spanemo import kernels
from spanemo.data import Dataset, Example
from spanemo.labels import default_semeval_space
from spanemo.trainer import TrainConfig, train
import tempfile

space = default_semeval_space()
rng = np.random.default_rng(7)
fillers = ["today", "was", "really", "quite", "a", "day", "and", "then"]
examples = []
for i in range(256):
    k = int(rng.integers(1, 4))
    labels = np.zeros(len(space), dtype=np.int8)
    chosen = rng.choice(len(space), size=k, replace=False)
    labels[chosen] = 1
    tokens = list(rng.choice(fillers, size=6)) + [f"trigger{space.names[c]}" for c in chosen]
    examples.append(Example(id=str(i), raw_text=" ".join(tokens), tokens=tokens, labels=labels))
data = Dataset(split="train", examples=examples, space=space)
cfg = TrainConfig(batch_size=32, epochs=3, early_stop_patience=3,
                  lr_encoder=0.02, lr_head=0.01, seed=1)
with tempfile.TemporaryDirectory() as d:
    start = time.perf_counter()
    train(cfg, data, data, d)
    print(f"{kernels.BACKEND} {time.perf_counter() - start:.3f}")
"""
    results = {}
    for env_extra in ({}, {"SPANEMO_PURE_PYTHON": "1"}):
        env = dict(os.environ)
        env.pop("SPANEMO_PURE_PYTHON", None)
        env.update(env_extra)
        out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                             text=True, env=env)
        if out.returncode != 0:
            raise RuntimeError(out.stderr)
        backend, seconds = out.stdout.split()
        results[backend] = float(seconds)
    return results


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--batches", type=int, default=2000,
                        help="kernel invocations per timing sample")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--classes", type=int, default=11)
    parser.add_argument("--skip-epoch", action="store_true",
                        help="only time the raw kernels")
    args = parser.parse_args()

    print(f"active backend: {kernels.BACKEND}")
    print(f"\nloss kernels ({args.batches} calls, batch {args.batch_size} x {args.classes}):")
    print(f"{'kernel':<12} {'numpy (s)':>10} {'cython (s)':>11} {'speedup':>8}")
    for name, t_py, t_fast, speedup in bench_loss_kernels(args.batch_size, args.classes,
                                                          args.batches):
        if t_fast is None:
            print(f"{name:<12} {t_py:>10.4f} {'n/a':>11} {'n/a':>8}")
        else:
            print(f"{name:<12} {t_py:>10.4f} {t_fast:>11.4f} {speedup:>7.1f}x")

    if not args.skip_epoch:
        print("\nend-to-end toy training (256 examples, 3 epochs):")
        for backend, seconds in sorted(bench_epoch().items()):
            print(f"  {backend:<8} {seconds:.3f}s")


if __name__ == "__main__":
    main()
