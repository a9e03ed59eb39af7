"""Time the compiled kernels against the NumPy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel is called with identical inputs on both backends; the script
checks that the outputs agree bitwise and prints the best-of-N wall time.
"""

import argparse
import time

import numpy as np

from mcrc import _backend
from mcrc.params import ChannelParams
from mcrc.stochastic import StochasticConfig, run_replicate


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases():
    rng = np.random.default_rng(0)
    amounts = rng.random(500)
    kernel = rng.random(500 * 200)
    decay, b_inf = rng.random(200_000), rng.random(200_000)
    hist = 1.2 + 1e-3 * rng.standard_normal(171)
    d = rng.standard_normal((2000, 3))
    near = d / np.linalg.norm(d, axis=1)[:, None] * rng.uniform(0.5e-6, 0.7e-6, 2000)[:, None]
    counts = np.array([0, 5000, 5000, 10000])
    d = rng.standard_normal((20000, 3))
    far = d / np.linalg.norm(d, axis=1)[:, None] * rng.uniform(0.6e-6, 10e-6, 20000)[:, None]
    noise = rng.standard_normal((20000, 3))
    sig = [1e-8, 2e-8, 4e-8, 8e-8]
    p = ChannelParams(k_on=1e-19, k_off=1.0, symbol_duration_T=1.0, distance_d=3e-6,
                      n_max=5000, diffusion_D=1e-11)
    cfg = StochasticConfig(num_receptors=100, steps_per_symbol=500)
    return {
        "superpose_aligned": lambda k: k.superpose_aligned(amounts, kernel, 200, kernel.size),
        "bind_recurrence": lambda k: k.bind_recurrence(decay, b_inf, 0.0),
        "mackey_glass": lambda k: k.mackey_glass(hist, 20_000, 0.1, 0.2, 0.1, 10.0, 170),
        "near_field_block": lambda k: k.near_field_block(
            near, 16, 2e-8, 0.5e-6, 0.55e-6, 1e-4, 0.01, 100, 10, (1, 0, 0.0)),
        "far_field_sync": lambda k: k.far_field_sync(
            far, counts, sig, 0.5e-6, 0.55e-6, [5 * s for s in sig], 0.0, noise),
        "run_replicate": lambda k: run_replicate(
            p, [1.0, 0.5, 0.8], cfg, 0, backend="cython" if k is not py else "python").samples,
    }


py = _backend.get("python")


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    return a.shape == b.shape and a.tobytes() == b.astype(a.dtype).tobytes()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if "cython" not in _backend.available():
        raise SystemExit("compiled kernels are not built; nothing to compare")
    cy = _backend.get("cython")
    print(f"{'kernel':<18} {'python s':>10} {'cython s':>10} {'speedup':>8}  bitwise")
    for name, fn in cases().items():
        tp, op = best_time(lambda: fn(py), args.repeat)
        tc, oc = best_time(lambda: fn(cy), args.repeat)
        print(f"{name:<18} {tp:>10.4f} {tc:>10.4f} {tp / tc:>8.1f}  {'yes' if same(op, oc) else 'NO'}")


if __name__ == "__main__":
    main()
