"""Time the compiled enumeration kernel against the pure-Python one.

    python benchmarks/bench_kernels.py [--max-rounds 5] [--repeat 3]

Both backends must agree on every count; the script exits 1 if they do not.
"""
from __future__ import annotations

import argparse
import time

from ewfe._kernels import BACKENDS
from ewfe.checker import encode
from ewfe.protocol import build_protocol
from ewfe.stories import TheoryRuleSet

CASES = ("none", "qt_a", "qt_b", "qt_c", "compat_17", "compat_18")


def _time(fn, repeat: int) -> tuple[float, tuple]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-rounds", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    spec = build_protocol()
    print(f"backends: {', '.join(sorted(BACKENDS))}; max_rounds = {args.max_rounds}")
    print(f"{'dropped':<10} {'visited':>10} {'satisfying':>12} " + " ".join(f"{b:>10}" for b in sorted(BACKENDS)) + "   speedup")
    agree = True
    for case in CASES:
        rules = TheoryRuleSet() if case == "none" else TheoryRuleSet().without(case)
        kargs = encode(spec, rules).kernel_args()
        results = {}
        for name in sorted(BACKENDS):
            fn = BACKENDS[name]
            results[name] = _time(
                lambda: fn(*kargs, args.max_rounds, rules.repetition, rules.qt_c, 16), args.repeat
            )
        outs = {r[1] for r in ((t, (o[0], o[1], tuple(o[2]))) for t, o in results.values())}
        agree &= len(outs) == 1
        sat, visited, _ = next(iter(results.values()))[1]
        times = " ".join(f"{results[b][0]:>9.4f}s" for b in sorted(BACKENDS))
        speed = ""
        if "compiled" in results:
            speed = f"{results['python'][0] / max(results['compiled'][0], 1e-9):8.1f}x"
        print(f"{case:<10} {visited:>10} {sat:>12} {times}  {speed}")
    print("backends agree" if agree else "BACKENDS DISAGREE")
    return 0 if agree else 1


if __name__ == "__main__":
    raise SystemExit(main())
