"""Time the numba and pure-numpy kernels on one default repetition.

Usage: python3 benchmarks/bench_kernels.py [--steps N] [--bs-density F]

Both backends get identical inputs; the script also checks that they agree.
"""
import argparse
import time

import numpy as np

from mmhybrid.association import BeamCache, Network, initial_association
from mmhybrid.channel import direction_cosines, realize_links
from mmhybrid.deployment import sample_topology
from mmhybrid.kernels import load_backend
from mmhybrid.scenario import ScenarioConfig
from mmhybrid.seeding import stream


def coupling_inputs(cache):
    links, cfg = cache.links, cache.cfg
    ray = np.vstack(direction_cosines(links.rays[0], links.rays[1])
                    + direction_cosines(links.rays[2], links.rays[3]))
    centre = links.centre[:, links.best]
    beam = np.vstack(direction_cosines(centre[0], centre[1])
                     + direction_cosines(centre[2], centre[3]))
    sides = np.array([[c.bs_side, c.ue_side] for c in cfg.carriers], dtype=np.int64)
    return (links.link_bs, links.link_ue, links.cl_ptr, int(links.subpaths), ray,
            np.ascontiguousarray(links.gain), beam, cache.cand_ptr, cache.cand_lid,
            cache.bsue_ptr, cache.bsue_ue, links.link_of, sides[:, 0].copy(),
            sides[:, 1].copy(), cache.cp_off)


def timed(fn, *args, repeat=1):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--bs-density", type=float, default=30.0)
    args = ap.parse_args()

    cfg = ScenarioConfig(bs_density=args.bs_density, ue_density=10 * args.bs_density)
    rng = stream(cfg.seed, ("bench", 0))
    topo = sample_topology(cfg, rng)
    links = realize_links(topo, cfg, rng)
    cache = BeamCache(cfg, topo, links)
    net = Network(cache, cfg)
    inputs = coupling_inputs(cache)
    covered = np.flatnonzero(cache.covered)
    picks = covered[rng.integers(0, len(covered), args.steps)].astype(np.int64)
    fixed = np.full(topo.n_ue, -1, dtype=np.int64)
    print(f"{topo.n_bs} BSs, {topo.n_ue} UEs, {links.n_links} live links, "
          f"{links.rays.shape[1]} rays, {cache.coupling.shape[1]} coupling entries")

    results = {}
    for name in ("numba", "numpy"):
        impl = load_backend(name)
        out = np.zeros_like(cache.coupling)
        if name == "numba":  # compile outside the timed region
            impl.coupling(*inputs, out)
        t_cpl, _ = timed(impl.coupling, *inputs, out)

        def steps():
            asg = initial_association(net, stream(cfg.seed, ("bench", 1)))
            trace = np.zeros(len(picks))
            impl.run_steps(picks, fixed, net.arrays, asg.state, trace,
                           float(len(covered)), 10 ** 9, 0.0, 0)
            return asg.serve_c.copy(), trace
        if name == "numba":
            steps()
        t_steps, (serve_c, trace) = timed(steps)
        results[name] = (out, serve_c, trace)
        print(f"{name:6s} coupling {t_cpl:8.3f} s   {args.steps} greedy steps {t_steps:8.3f} s")

    a, b = results["numba"], results["numpy"]
    print("coupling max rel diff", float(np.max(np.abs(a[0] - b[0]) / np.maximum(np.abs(a[0]), 1e-300))))
    print("identical assignments", bool(np.array_equal(a[1], b[1])))


if __name__ == "__main__":
    main()
