"""Time the Euler-Maruyama step loop with the numba and numpy kernels.

    python benchmarks/bench_particle.py [--steps 2000] [--sizes 128 256 512 1000]

Both backends are compiled/imported in the same process; the first call of
each is a warm-up so JIT compilation is not timed.
"""

import argparse
import time

import numpy as np

from graphon_sips.graphon import ErdosRenyi, PowerLaw, sample_adjacency
from graphon_sips.particle_sim import SimParams, init_state, run
from graphon_sips.potential import MultichromaticPotential


def bench(graph, pot, steps, backend, sparse, repeat=3):
    params = SimParams(0.01, 200.0, pot, graph, T=steps * 0.01, record_stride=steps)
    s0 = init_state(graph.n, seed=0)
    run(SimParams(0.01, 200.0, pot, graph, T=0.02), s0, 1, backend=backend, sparse=sparse)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        traj = run(params, s0, 1, backend=backend, sparse=sparse)
        best = min(best, time.perf_counter() - t0)
    return best, traj.final.positions


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512, 1000])
    args = ap.parse_args()

    pot = MultichromaticPotential((1.0, 2.0, 3.0, 4.0))
    print(f"{'graph':<6}{'N':>6}{'path':>8}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}{'max diff':>11}")
    for family, g, sparse in [("ER", ErdosRenyi(0.5), False), ("PL", PowerLaw(0.3, 0.4), True)]:
        for n in args.sizes:
            graph = sample_adjacency(g, n, seed=1)
            t_nb, x_nb = bench(graph, pot, args.steps, "numba", sparse)
            t_np, x_np = bench(graph, pot, args.steps, "numpy", sparse)
            diff = np.max(np.abs(np.angle(np.exp(1j * (x_nb - x_np)))))
            path = "sparse" if sparse else "dense"
            print(f"{family:<6}{n:>6}{path:>8}{t_nb:>12.3f}{t_np:>12.3f}{t_np / t_nb:>10.2f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
