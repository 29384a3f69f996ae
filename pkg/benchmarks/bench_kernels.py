"""Compare the compiled kernels against the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--size BYTES] [--repeats N] [--csv PATH]

Prints one row per kernel with the best-of-N time of each backend and the
speedup; both backends are checked for identical output first.
"""

from __future__ import annotations

import argparse
import csv
import sys
import timeit

import numpy as np

from graphveil import _kernels_py as pure

try:
    from graphveil import _kernels as compiled
except ImportError:
    compiled = None


def cases(size: int) -> dict[str, tuple]:
    rng = np.random.default_rng(0)
    runs = rng.integers(1, 9, size=size)
    data = np.repeat(rng.integers(0, 256, size=size, dtype=np.uint8), runs)[:size].tobytes()
    encoded = pure.rle_encode(data)
    return {
        "rle_encode": ("rle_encode", (data,)),
        "rle_decode": ("rle_decode", (encoded,)),
        "xor_stream": ("xor_stream", (data, 0x5EED)),
        "train_kernel": ("train_kernel", (data, 2, 7)),
        "evaluate_kernel": ("evaluate_kernel", (data, 1, 7)),
        "busy_kernel": ("busy_kernel", (data[:256], 50)),
        # one scheduling decision over a five-graph batch
        "pick_index": ("pick_index", ([[3], [], [0, 2], [1], [4]], [2.0, 1.0, 1.0, 2.0, 1.0], 0.61)),
    }


def best_ms(fn, args, repeats: int) -> float:
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeats, number=number)) / number * 1000.0


def main(argv: list[str] | None = None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=65536)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--csv", help="also write the table as CSV")
    args = p.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first",
              file=sys.stderr)
        return 1
    rows = [["kernel", "size", "python_ms", "compiled_ms", "speedup"]]
    for name, (fn, fargs) in cases(args.size).items():
        a, b = getattr(pure, fn)(*fargs), getattr(compiled, fn)(*fargs)
        if a != b:
            print(f"{name}: backends disagree", file=sys.stderr)
            return 2
        t_py = best_ms(getattr(pure, fn), fargs, args.repeats)
        t_c = best_ms(getattr(compiled, fn), fargs, args.repeats)
        rows.append([name, len(fargs[0]), f"{t_py:.4f}", f"{t_c:.4f}", f"{t_py / t_c:.1f}"])
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    for r in rows:
        print("  ".join(str(c).rjust(w) for c, w in zip(r, widths)))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
