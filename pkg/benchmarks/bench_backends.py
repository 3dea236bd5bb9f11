"""Benchmark the numba kernels against the pure-numpy fallback.

Times the three hot kernels on workloads representative of the package's
heaviest jobs: master-equation propagation of the emitter-cavity model,
Monte-Carlo trajectory generation, and coincidence counting over click
streams. Run as a script:

    python3 benchmarks/bench_backends.py [--traj N]

The first numba call in each section compiles; compilation is excluded by
a warmup call.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sivsim.dynamics import steady_state
from sivsim.kernels import build_kernels, numba_available
from sivsim.siv_models import CavityParams, DriveParams, SivParams, build_cavity_model
from sivsim.trajectories import _prepare


def _time(fn, repeat=3):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_rk45(kernels):
    model = build_cavity_model(SivParams(), CavityParams(),
                               DriveParams(probe_freq=0.0, probe_flux=0.3))
    L = np.ascontiguousarray(model.liouvillian)
    rho0 = steady_state(model).rho.ravel().copy()
    t_eval = np.linspace(0.0, 10.0, 11)

    def job():
        ys, status, _ = kernels.rk45(L, rho0, t_eval, 1e-8, 1e-12, 1e-4, 1e-6)
        assert status == 0
        return ys

    job()  # warmup/compile
    return _time(job)


def bench_mcwf(kernels, n_traj):
    model = build_cavity_model(SivParams(), CavityParams(),
                               DriveParams(probe_freq=0.0, probe_flux=0.3))
    eng = _prepare(model, steady_state(model), None)
    empty = np.zeros(0, dtype=np.float64)
    no_samples = np.zeros((0, 0), dtype=np.float64)
    click_t = np.empty(4096, dtype=np.float64)
    click_ch = np.empty(4096, dtype=np.int64)

    def one(tid):
        n, status = kernels.mcwf_trajectory(
            eng.lam, eng.M, eng.W, eng.N, eng.init_kets[0], 60.0, 7, tid,
            1e-6, empty, eng.obs, click_t, click_ch, no_samples)
        assert status == 0
        return n

    one(0)  # warmup/compile

    def job():
        total = 0
        for tid in range(n_traj):
            total += one(tid)
        return total

    return _time(job, repeat=2)


def bench_count_pairs(kernels):
    rng = np.random.default_rng(0)
    n_rec = 2000
    times, offsets = [], [0]
    for _ in range(n_rec):
        n = rng.integers(20, 60)
        times.append(np.sort(rng.uniform(0, 60.0, n)))
        offsets.append(offsets[-1] + n)
    ta = np.concatenate(times)
    off = np.array(offsets, dtype=np.int64)
    counts = np.zeros(300, dtype=np.int64)

    def job():
        counts[:] = 0
        kernels.count_pairs(ta, off, ta, off, 30.0, 0.2, 300, 1, counts)
        return counts

    job()  # warmup/compile
    return _time(job)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--traj", type=int, default=500,
                        help="trajectories per MCWF timing (default 500)")
    args = parser.parse_args()

    if not numba_available():
        raise SystemExit("numba is not importable; nothing to compare")

    backends = {"numba": build_kernels(True), "numpy": build_kernels(False)}
    rows = []
    for job, label in ((bench_rk45, "rk45 cavity model, 10 ns"),
                       (lambda k: bench_mcwf(k, args.traj),
                        f"mcwf {args.traj} trajectories, 60 ns"),
                       (bench_count_pairs, "count_pairs ~8e4 clicks")):
        timing = {name: job(k) for name, k in backends.items()}
        rows.append((label, timing["numba"], timing["numpy"]))

    print(f"{'kernel':<38} {'numba [s]':>10} {'numpy [s]':>10} {'speedup':>8}")
    for label, tn, tp in rows:
        print(f"{label:<38} {tn:>10.4f} {tp:>10.4f} {tp/tn:>7.1f}x")


if __name__ == "__main__":
    main()
