"""Benchmark the compiled elbow kernel against the pure-Python fallback.

Run:  python3 benchmarks/bench_kernels.py [--ticks N]

Both backends execute the identical operation order, so besides timing
this also asserts that their trajectories agree bit-for-bit.
"""

from __future__ import annotations

import argparse
import time

from vsoftpro._kernels import _py


def _load_compiled():
    try:
        from vsoftpro._kernels import _core

        return _core
    except ImportError:
        return None


ARGS = dict(
    th_a=0.55, th_b=0.45, is_esv=False, a=1.0, b=5.0,
    inertia=0.07, damping=1.5, grav=0.88, tau_ext=0.0, dt=0.001,
)


def run(kernel, n_calls: int, substeps: int = 5) -> tuple[float, float, float]:
    q, qd = 0.0, 0.0
    t0 = time.perf_counter()
    for _ in range(n_calls):
        q, qd = kernel.elbow_rk4(
            q, qd, ARGS["th_a"], ARGS["th_b"], ARGS["is_esv"], ARGS["a"], ARGS["b"],
            ARGS["inertia"], ARGS["damping"], ARGS["grav"], ARGS["tau_ext"],
            ARGS["dt"], substeps,
        )
    return time.perf_counter() - t0, q, qd


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--ticks", type=int, default=200_000,
                        help="number of 5-substep control ticks per backend")
    args = parser.parse_args()

    compiled = _load_compiled()
    t_py, q_py, qd_py = run(_py, args.ticks)
    print(f"pure python : {args.ticks} ticks in {t_py:.3f}s "
          f"({args.ticks / t_py:,.0f} ticks/s)")
    if compiled is None:
        print("compiled    : not available (install with a C compiler present)")
        return
    t_c, q_c, qd_c = run(compiled, args.ticks)
    print(f"compiled    : {args.ticks} ticks in {t_c:.3f}s "
          f"({args.ticks / t_c:,.0f} ticks/s)")
    print(f"speedup     : {t_py / t_c:.1f}x")
    assert (q_py, qd_py) == (q_c, qd_c), "backends disagree"
    print(f"agreement   : bit-identical final state (q={q_py!r})")


if __name__ == "__main__":
    main()
