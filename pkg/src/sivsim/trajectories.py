"""Monte-Carlo wavefunction unraveling producing detection records.

Between jumps the state evolves under the non-Hermitian effective
Hamiltonian, which is time-independent here, so propagation uses its
eigendecomposition and the next-jump time is found by bisecting the exact
squared norm to ``bisect_tol`` (default 1e-6 ns). Channel selection draws
over the relative jump weights.

Reproducibility: trajectory ``i`` consumes the counter-based stream
``(seed, first_id + i)`` (see :mod:`sivsim.rng`), so results are
identical for any worker count and any batching.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
import scipy.linalg

from . import kernels as _kernels
from .dynamics import LindbladModel
from .hilbert import DensityState, Operator
from .rng import uniform_pair

__all__ = ["DetectionRecord", "TrajectoryError", "run_trajectories",
           "trajectory_observables"]

_INIT_BLOCK = np.uint64(1) << np.uint64(62)  # far philox block for init draws


class TrajectoryError(RuntimeError):
    def __init__(self, message: str, trajectory_id: int):
        super().__init__(f"{message} (trajectory {trajectory_id})")
        self.trajectory_id = trajectory_id


@dataclass(frozen=True)
class DetectionRecord:
    """Time-tagged, channel-tagged click stream of one trajectory."""

    times: np.ndarray
    channel_codes: np.ndarray
    channel_labels: tuple[str, ...]
    duration: float
    trajectory_id: int
    seed: int

    @property
    def clicks(self) -> Iterator[tuple[float, str]]:
        for t, c in zip(self.times, self.channel_codes):
            yield float(t), self.channel_labels[int(c)]

    def times_for(self, label: str) -> np.ndarray:
        code = self.channel_labels.index(label)
        return self.times[self.channel_codes == code]

    def __len__(self) -> int:
        return int(self.times.size)


@dataclass
class _Engine:
    """Precomputed eigenbasis data shared by all trajectories of a run."""

    lam: np.ndarray
    M: np.ndarray
    W: np.ndarray
    N: np.ndarray
    Vinv: np.ndarray
    labels: tuple[str, ...]
    init_kets: np.ndarray      # (n_states, d) eigenbasis coefficients
    init_cum: np.ndarray       # cumulative probabilities
    obs: np.ndarray = field(default=None)


def _prepare(model: LindbladModel, rho0: DensityState,
             observables: Sequence[Operator] | None) -> _Engine:
    h_eff = model.effective_hamiltonian
    lam, V = scipy.linalg.eig(h_eff)
    resid = np.max(np.abs(h_eff @ V - V * lam))
    scale = max(np.max(np.abs(h_eff)), 1.0)
    if resid > 1e-9 * scale:
        raise TrajectoryError(
            "effective Hamiltonian is not reliably diagonalizable "
            f"(residual {resid:.2e}); the trajectory engine requires it", -1)
    Vinv = np.linalg.inv(V)
    M = np.ascontiguousarray(V.conj().T @ V)

    d = model.dim
    nj = len(model.jumps)
    W = np.empty((nj, d, d), dtype=np.complex128)
    N = np.empty((nj, d, d), dtype=np.complex128)
    for k, j in enumerate(model.jumps):
        a = j.scaled_matrix()
        W[k] = Vinv @ a @ V
        N[k] = V.conj().T @ (a.conj().T @ a) @ V

    # decompose rho0 into pure states to sample from
    evals, kets = np.linalg.eigh(rho0.rho)
    keep = evals > 1e-12
    probs = evals[keep]
    probs = probs / probs.sum()
    init_kets = np.ascontiguousarray((Vinv @ kets[:, keep]).T)
    init_cum = np.cumsum(probs)

    if observables:
        obs = np.empty((len(observables), d, d), dtype=np.complex128)
        for i, op in enumerate(observables):
            obs[i] = V.conj().T @ op.matrix @ V
    else:
        obs = np.zeros((0, d, d), dtype=np.complex128)
    return _Engine(lam=np.ascontiguousarray(lam), M=M, W=W, N=N, Vinv=Vinv,
                   labels=tuple(j.label for j in model.jumps),
                   init_kets=init_kets, init_cum=init_cum, obs=obs)


def _run_one(eng: _Engine, traj_id: int, seed: int, duration: float,
             bisect_tol: float, sample_times: np.ndarray, max_clicks: int):
    if eng.init_cum.size > 1:
        u, _ = uniform_pair(seed, traj_id, _INIT_BLOCK)
        pick = int(np.searchsorted(eng.init_cum, u))
        pick = min(pick, eng.init_cum.size - 1)
    else:
        pick = 0
    c0 = eng.init_kets[pick]

    while True:
        click_t = np.empty(max_clicks, dtype=np.float64)
        click_ch = np.empty(max_clicks, dtype=np.int64)
        samples = np.zeros((sample_times.size, eng.obs.shape[0]),
                           dtype=np.float64)
        n, status = _kernels.kernels.mcwf_trajectory(
            eng.lam, eng.M, eng.W, eng.N, c0, duration, seed, traj_id,
            bisect_tol, sample_times, eng.obs, click_t, click_ch, samples)
        if status == _kernels.STATUS_CLICK_OVERFLOW:
            max_clicks *= 4
            continue
        if status == _kernels.STATUS_NORM_UNDERFLOW:
            raise TrajectoryError("state norm underflow after jump", traj_id)
        return click_t[:n].copy(), click_ch[:n].copy(), samples


def _dispatch(work, ids, workers: int) -> list:
    """Run ``work`` over ids, first one serially so the kernel is compiled
    before threads share it."""
    ids = list(ids)
    if workers <= 1 or len(ids) < 2:
        return [work(t) for t in ids]
    head = [work(ids[0])]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        tail = list(pool.map(work, ids[1:]))
    return head + tail


def run_trajectories(model: LindbladModel, rho0: DensityState, duration: float,
                     n_traj: int, seed: int, workers: int = 1,
                     bisect_tol: float = 1e-6, first_id: int = 0,
                     max_clicks_hint: int = 512) -> list[DetectionRecord]:
    """Sample quantum trajectories and return their detection records.

    ``rho0`` may be mixed; each trajectory starts from one of its
    eigenstates drawn with the eigenvalue weights, so the ensemble mean
    over records reproduces master-equation evolution from ``rho0``.
    Every jump channel produces clicks tagged with its label, including
    non-photon channels (dephasing, thermal flips); correlation analysis
    simply selects the channels of interest.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    eng = _prepare(model, rho0, None)
    no_samples = np.zeros(0, dtype=np.float64)

    def work(tid: int):
        t, ch, _ = _run_one(eng, tid, seed, duration, bisect_tol,
                            no_samples, max_clicks_hint)
        return tid, t, ch

    ids = range(first_id, first_id + n_traj)
    results = _dispatch(work, ids, workers)
    results.sort(key=lambda r: r[0])
    return [
        DetectionRecord(times=t, channel_codes=ch.astype(np.int16),
                        channel_labels=eng.labels, duration=duration,
                        trajectory_id=tid, seed=seed)
        for tid, t, ch in results
    ]


def trajectory_observables(model: LindbladModel, rho0: DensityState,
                           duration: float, sample_times, observables,
                           n_traj: int, seed: int, workers: int = 1,
                           bisect_tol: float = 1e-6,
                           ) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble mean and standard error of observables along trajectories.

    Returns arrays of shape (n_times, n_observables). The mean converges
    to the master-equation expectation values; the standard error is the
    sample stderr over trajectories.
    """
    sample_times = np.ascontiguousarray(sample_times, dtype=np.float64)
    if np.any(sample_times < 0) or np.any(sample_times > duration):
        raise ValueError("sample_times must lie within [0, duration]")
    eng = _prepare(model, rho0, list(observables))

    def work(tid: int):
        _, _, samples = _run_one(eng, tid, seed, duration, bisect_tol,
                                 sample_times, 512)
        return samples

    all_samples = _dispatch(work, range(n_traj), workers)
    stack = np.stack(all_samples)
    mean = stack.mean(axis=0)
    stderr = stack.std(axis=0, ddof=1) / np.sqrt(n_traj) if n_traj > 1 \
        else np.full_like(mean, np.inf)
    return mean, stderr
