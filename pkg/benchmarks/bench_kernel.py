"""Compare the compiled and pure-Python kernels.

Micro-benchmarks each kernel function on random inputs, then times a full
analysis of a generated corpus with each backend swapped in.

    python3 benchmarks/bench_kernel.py [--cases N] [--corpus-clauses N]
"""

from __future__ import annotations

import argparse
import random
import time
from array import array

from verifly import kernel
from verifly._pykernel import ANY, ATM, BIND, EQ, G, INT, IS, LST, STRUCT, USE_GROUND, USE_TYPES
from verifly.engine import analyze
from verifly.harness import CorpusSpec, gen_program, program_of

SHAPES = (INT, ATM, LST, STRUCT, ANY)
FUNCS = ("run_eqs", "project", "meet_at", "lub", "glb", "leq", "fnv1a64")


def _byte(rng):
    return rng.choice(SHAPES) | (G if rng.random() < 0.4 else 0)


def _code(rng, n):
    code = []
    for _ in range(rng.randint(1, 8)):
        op = rng.choice((EQ, BIND, IS))
        x = rng.randrange(n)
        if op == EQ:
            code += [EQ, x, rng.randrange(n)]
        else:
            vs = [rng.randrange(n) for _ in range(rng.randint(0, 3))]
            code += [op, x, INT if op == IS else rng.choice(SHAPES[:4]), len(vs)] + vs
    return array("i", code)


def make_cases(count: int, seed: int = 0):
    rng = random.Random(seed)
    cases = []
    for _ in range(count):
        n = rng.randint(2, 12)
        a = bytes(_byte(rng) for _ in range(n))
        b = bytes(_byte(rng) for _ in range(n))
        idx = array("i", [rng.randrange(n) for _ in range(rng.randint(1, n))])
        vals = bytes(_byte(rng) for _ in idx)
        cases.append((a, b, _code(rng, n), idx, vals, rng.randbytes(48)))
    return cases


def micro(impl, cases) -> dict:
    out = {}
    flags = USE_GROUND | USE_TYPES

    def timed(name, fn):
        t0 = time.perf_counter()
        for c in cases:
            fn(c)
        out[name] = (time.perf_counter() - t0) * 1e9 / len(cases)

    timed("run_eqs", lambda c: impl.run_eqs(bytearray(c[0]), c[2], flags))
    timed("project", lambda c: impl.project(c[0], c[3]))
    timed("meet_at", lambda c: impl.meet_at(bytearray(c[0]), c[3], c[4]))
    timed("lub", lambda c: impl.lub(c[0], c[1]))
    timed("glb", lambda c: impl.glb(c[0], c[1]))
    timed("leq", lambda c: impl.leq(c[0], c[1]))
    timed("fnv1a64", lambda c: impl.fnv1a64(c[5]))
    return out


def end_to_end(impl, program, reps: int = 3) -> float:
    saved = {f: getattr(kernel, f) for f in FUNCS}
    for f in FUNCS:
        setattr(kernel, f, getattr(impl, f))
    try:
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            analyze(program)
            times.append((time.perf_counter() - t0) * 1000.0)
        return sorted(times)[len(times) // 2]
    finally:
        for f, fn in saved.items():
            setattr(kernel, f, fn)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", type=int, default=20_000)
    ap.add_argument("--corpus-clauses", type=int, default=1200)
    args = ap.parse_args(argv)
    backends = kernel.backends()
    if "cython" not in backends:
        print("compiled kernel not built; only the Python backend is available")
    cases = make_cases(args.cases)
    results = {name: micro(impl, cases) for name, impl in backends.items()}
    names = list(backends)
    print(f"{'function':<10}" + "".join(f"{n + ' ns':>14}" for n in names) + ("   speedup" if len(names) > 1 else ""))
    for f in FUNCS:
        row = f"{f:<10}" + "".join(f"{results[n][f]:>14.0f}" for n in names)
        if len(names) > 1:
            row += f"{results['python'][f] / results['cython'][f]:>9.1f}x"
        print(row)
    spec = CorpusSpec(seed=3, files=4, clauses_total=args.corpus_clauses, preds=max(1, args.corpus_clauses // 4),
                      shape="dense", assertion_density=0.2)
    program = program_of(gen_program(spec))
    e2e = {n: end_to_end(impl, program) for n, impl in backends.items()}
    print(f"\nfull analysis of {args.corpus_clauses} clauses (median of 3):")
    for n, ms in e2e.items():
        print(f"  {n:<8} {ms:8.1f} ms")
    if len(e2e) > 1:
        print(f"  speedup  {e2e['python'] / e2e['cython']:8.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
