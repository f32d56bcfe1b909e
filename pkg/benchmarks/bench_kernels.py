"""Collision throughput of the compiled and pure-Python event kernels.

    python3 benchmarks/bench_kernels.py [--n 64] [--energy 60] [--collisions 200000]

Both kernels are driven through Simulation with the same seed.  The final
states are compared so a speedup is only reported for identical trajectories.
"""
import argparse
import time

from bbsim.engine import KERNELS, Simulation
from bbsim.model import InitialCondition, ModelParams
from bbsim.rng import RngStream


def time_backend(backend, params, n, seed, repeats):
    best, sim = float("inf"), None
    for _ in range(repeats):
        sim = Simulation.start(params, InitialCondition(), RngStream(seed, (params.N, 0, 0)),
                               backend=backend)
        t0 = time.perf_counter()
        sim.run(n)
        best = min(best, time.perf_counter() - t0)
    return best, sim.checkpoint()


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--energy", type=float, default=60.0)
    ap.add_argument("--collisions", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)

    print(f"backends available: {', '.join(sorted(KERNELS))}")
    for mode in ("classical", "discrete"):
        params = ModelParams(args.n, args.energy, mode)
        results = {}
        for backend in sorted(KERNELS):
            # the python kernel is slow; give it a tenth of the work
            n = args.collisions if backend != "python" else max(1, args.collisions // 10)
            dt, ck = time_backend(backend, params, n, args.seed, args.repeats)
            results[backend] = (n, dt, ck)
            print(f"{mode:9s} {backend:7s} {n:>9d} collisions  {dt:8.3f} s  "
                  f"{n / dt / 1e6:8.3f} M collisions/s  {1e9 * dt / n:9.1f} ns/collision")
        if len(results) == 2:
            (nc, tc, _), (npy, tp, ckp) = results["cython"], results["python"]
            _, ckc = time_backend("cython", params, npy, args.seed, 1)
            same = ckc == ckp
            print(f"{mode:9s} speedup {(nc / tc) / (npy / tp):.1f}x, "
                  f"identical state after {npy} collisions: {same}")


if __name__ == "__main__":
    main()
