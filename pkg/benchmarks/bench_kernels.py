"""Timing of the compiled and pure-Python kernels.

Usage::

    python benchmarks/bench_kernels.py [--stage 8] [--steps 400] [--repeat 3]

Both backends are run on the same inputs and their outputs are compared
before any timing is printed.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from staircase_flow import kernels
from staircase_flow.staircase import classical_staircase
from staircase_flow.suspension import SuspensionFlow
from staircase_flow.trajectory import PhiQEnsemble


def best_of(func, repeat: int):
    """Smallest wall time over ``repeat`` calls, with the last result."""
    best, result = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        result = func()
        best = min(best, time.perf_counter() - t)
    return best, result


def bench_walk(backend: str, stage: int, repeat: int):
    spec = classical_staircase()
    r = [1] + [spec.r(k) for k in range(1, stage + 1)]
    s = [[0]] + [[0] + list(spec.spacer_row(k)) for k in range(1, stage + 1)]
    return best_of(lambda: kernels.walk_spacer_runs(r, s, stage, backend=backend), repeat)


def bench_phi_q(backend: str, steps: int, repeat: int):
    flow = SuspensionFlow(classical_staircase())

    def go():
        pe = PhiQEnsemble(flow, [(3, 0)], cylinders=[(2, 0)], backend=backend).run(steps)
        return sorted(pe.piece_tuples())

    return best_of(go, repeat)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--stage", type=int, default=8, help="column walk stage (default 8)")
    parser.add_argument("--steps", type=int, default=400, help="time-q steps for the ensemble (default 400)")
    parser.add_argument("--repeat", type=int, default=3, help="repetitions, best time kept (default 3)")
    args = parser.parse_args(argv)

    names = list(kernels.backends())
    print(f"default backend: {kernels.BACKEND}; available: {', '.join(names)}")
    for label, bench, size in [("walk_spacer_runs", bench_walk, args.stage),
                               ("phi_q_run", bench_phi_q, args.steps)]:
        results = {name: bench(name, size, args.repeat) for name in names}
        outputs = [out for _, out in results.values()]
        same = all(np.array_equal(np.asarray(outputs[0]), np.asarray(o)) for o in outputs[1:])
        if not same:
            print(f"{label}: backends disagree")
            return 1
        ref = results.get("python", next(iter(results.values())))[0]
        for name, (secs, _) in results.items():
            print(f"{label:18s} {name:9s} size={size:<5d} {secs:9.4f} s  speedup x{ref / secs:6.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
