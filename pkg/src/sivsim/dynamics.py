"""Lindblad master-equation dynamics.

Conventions
-----------
* Time in nanoseconds; every frequency-like quantity inside a model is an
  angular rate in rad/ns. Builders that accept ordinary frequencies in
  GHz multiply by 2*pi at the boundary, never here.
* Density matrices are vectorized row-major (C order), so
  ``vec(A @ X @ B) = (A \\otimes B.T) @ vec(X)``.

The propagator is an adaptive Dormand-Prince 5(4) pair on the vectorized
density matrix (see :mod:`sivsim.kernels`); dense matrix exponentials of
the same Liouvillian serve as the independent oracle in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg

from . import kernels as _kernels
from .hilbert import HERMITICITY_TOL, DensityState, HilbertSpace, Operator, expectation

__all__ = [
    "Jump",
    "LindbladModel",
    "CorrelationResult",
    "SpectrumResult",
    "IntegrationError",
    "SteadyStateError",
    "ZeroFluxError",
    "evolve",
    "steady_state",
    "correlate_g2",
    "g2_zero_delay",
    "emission_spectrum",
    "apply_timing_jitter",
    "liouvillian_matrix",
]

TRACE_DRIFT_TOL = 1e-6
DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-12


class IntegrationError(RuntimeError):
    """Adaptive integration failed; ``time`` holds the failure time in ns."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g} ns)")
        self.time = time


class SteadyStateError(RuntimeError):
    pass


class ZeroFluxError(RuntimeError):
    pass


@dataclass(frozen=True)
class Jump:
    operator: Operator
    rate: float
    label: str

    def scaled_matrix(self) -> np.ndarray:
        """sqrt(rate) * A, the Lindblad operator proper."""
        return np.sqrt(self.rate) * self.operator.matrix


class LindbladModel:
    """Hamiltonian plus jump channels; fully defines the open dynamics.

    Immutable after construction. The Hamiltonian is in rad/ns and must
    be Hermitian; jump rates are nonnegative rad/ns (or 1/ns, the
    distinction is the caller's bookkeeping) and channel labels unique.
    """

    def __init__(self, space: HilbertSpace, hamiltonian: Operator,
                 jumps: Sequence[Jump]):
        if hamiltonian.space.dims != space.dims:
            raise ValueError("hamiltonian space does not match model space")
        if not hamiltonian.is_hermitian(HERMITICITY_TOL):
            raise ValueError("hamiltonian is not Hermitian within 1e-10")
        labels = [j.label for j in jumps]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate channel labels: {labels}")
        for j in jumps:
            if j.rate < 0:
                raise ValueError(f"negative rate for channel {j.label!r}: {j.rate}")
            if j.operator.space.dims != space.dims:
                raise ValueError(f"jump {j.label!r} acts on the wrong space")
        self.space = space
        self.hamiltonian = hamiltonian
        self.jumps = tuple(jumps)

    @property
    def dim(self) -> int:
        return self.space.total_dim

    @cached_property
    def liouvillian(self) -> np.ndarray:
        return liouvillian_matrix(
            self.hamiltonian.matrix,
            [(j.operator.matrix, j.rate) for j in self.jumps],
        )

    @cached_property
    def effective_hamiltonian(self) -> np.ndarray:
        """H - (i/2) sum_k rate_k A_k^dag A_k for the trajectory engine."""
        h = self.hamiltonian.matrix.astype(np.complex128).copy()
        for j in self.jumps:
            a = j.operator.matrix
            h -= 0.5j * j.rate * (a.conj().T @ a)
        return h

    def jump_by_label(self, label: str) -> Jump:
        for j in self.jumps:
            if j.label == label:
                return j
        raise KeyError(f"no jump channel {label!r}; have {[j.label for j in self.jumps]}")

    def channel_flux(self, state: DensityState, label: str) -> float:
        """rate * <A^dag A> for one channel, in clicks per ns."""
        j = self.jump_by_label(label)
        a = j.operator.matrix
        return float(np.real(np.trace(state.rho @ (a.conj().T @ a)))) * j.rate


def liouvillian_matrix(h: np.ndarray, jumps: Sequence[tuple[np.ndarray, float]]) -> np.ndarray:
    """Dense Liouvillian for row-major vectorization."""
    d = h.shape[0]
    eye = np.eye(d, dtype=np.complex128)
    L = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for a, rate in jumps:
        if rate == 0.0:
            continue
        ada = a.conj().T @ a
        L += rate * (np.kron(a, a.conj())
                     - 0.5 * np.kron(ada, eye)
                     - 0.5 * np.kron(eye, ada.T))
    return np.ascontiguousarray(L)


def _initial_step(L: np.ndarray) -> float:
    scale = np.max(np.sum(np.abs(L), axis=1))
    return min(0.1, 0.1 / scale) if scale > 0 else 0.1


def _propagate(L: np.ndarray, y0: np.ndarray, t_grid: np.ndarray,
               rtol: float, atol: float, trace_tol: float) -> np.ndarray:
    """Integrate dy/dt = L y through the grid points; raises on failure."""
    t_grid = np.ascontiguousarray(t_grid, dtype=np.float64)
    ys, status, t_fail = _kernels.kernels.rk45(
        np.ascontiguousarray(L), np.ascontiguousarray(y0, dtype=np.complex128),
        t_grid, rtol, atol, _initial_step(L), trace_tol)
    if status == _kernels.STATUS_STEP_UNDERFLOW:
        raise IntegrationError("step size underflow", t_fail)
    if status == _kernels.STATUS_TRACE_DRIFT:
        raise IntegrationError(
            f"trace drifted by more than {trace_tol:g}; refusing to renormalize",
            t_fail)
    return ys


def evolve(model: LindbladModel, rho0: DensityState, t_grid,
           rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
           validate: bool = True) -> list[DensityState]:
    """Propagate a density matrix through an increasing time grid from 0."""
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a nonempty 1-d sequence")
    if t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing and start at 0")
    if rho0.space.dims != model.space.dims:
        raise ValueError("rho0 space does not match model space")
    ys = _propagate(model.liouvillian, rho0.rho.ravel(), t_grid,
                    rtol, atol, TRACE_DRIFT_TOL)
    d = model.dim
    return [DensityState(model.space, y.reshape(d, d), validate=validate)
            for y in ys]


def steady_state(model: LindbladModel, degeneracy_tol: float = 1e-8) -> DensityState:
    """Stationary state from the SVD null space of the Liouvillian.

    The trace-one normalization is applied after extracting the (unique)
    null vector; a second singular value below ``degeneracy_tol`` relative
    to the largest means the stationary state is not unique.
    """
    L = model.liouvillian
    _, s, vh = np.linalg.svd(L)
    s_max = s[0] if s[0] > 0 else 1.0
    null_mask = s / s_max < degeneracy_tol
    n_null = int(np.sum(null_mask))
    if n_null == 0:
        raise SteadyStateError(
            f"no stationary state found (smallest singular value {s[-1]:.3e})")
    if n_null > 1:
        raise SteadyStateError(
            f"stationary state is degenerate: kernel dimension {n_null}")
    d = model.dim
    rho = vh[-1].conj().reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise SteadyStateError("null vector has vanishing trace")
    rho = rho / tr
    return DensityState(model.space, rho, validate=False)


# ---------------------------------------------------------------------------
# two-time correlations via the quantum regression theorem

@dataclass(frozen=True)
class CorrelationResult:
    """Normalized second-order correlation on a tau grid.

    ``normalization`` is the long-delay coincidence rate (product of the
    two channel fluxes for regression results, plateau rate for histogram
    results). ``stderr`` is zero for exact regression curves.
    """

    tau_grid: np.ndarray
    g2: np.ndarray
    stderr: np.ndarray
    normalization: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        g2 = np.asarray(self.g2, dtype=np.float64)
        if g2.min() < -1e-9:
            raise ValueError(f"g2 has a significantly negative value: {g2.min():.3e}")
        object.__setattr__(self, "g2", np.maximum(g2, 0.0))
        object.__setattr__(self, "tau_grid", np.asarray(self.tau_grid, dtype=np.float64))
        object.__setattr__(self, "stderr", np.asarray(self.stderr, dtype=np.float64))


def _conditional_curve(model: LindbladModel, pump: np.ndarray, probe: np.ndarray,
                       taus: np.ndarray, rho_ss: np.ndarray,
                       rtol: float, atol: float) -> np.ndarray:
    """Tr[probe^dag probe e^{L tau}(pump rho pump^dag)] for tau >= 0."""
    m0 = pump @ rho_ss @ pump.conj().T
    taus = np.asarray(taus, dtype=np.float64)
    if taus.size == 0:
        return np.zeros(0)
    grid = taus if taus[0] == 0.0 else np.concatenate(([0.0], taus))
    ys = _propagate(model.liouvillian, m0.ravel(), grid, rtol, atol, np.inf)
    if taus[0] != 0.0:
        ys = ys[1:]
    obs_row = (probe.conj().T @ probe).T.ravel()
    return np.real(ys @ obs_row)


def correlate_g2(model: LindbladModel, collapse_a: Operator, collapse_b: Operator,
                 tau_grid, rho: DensityState | None = None,
                 rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                 ) -> CorrelationResult:
    """g2_ab(tau) by quantum regression from the steady state.

    For tau >= 0 the conditional state after an ``a`` detection is
    propagated and the ``b`` intensity read out; for tau < 0 the roles
    swap. Both operators are used unscaled: channel rates cancel in the
    normalization.
    """
    tau_grid = np.asarray(tau_grid, dtype=np.float64)
    if rho is None:
        rho = steady_state(model)
    a = collapse_a.matrix
    b = collapse_b.matrix
    flux_a = float(np.real(np.trace(rho.rho @ (a.conj().T @ a))))
    flux_b = float(np.real(np.trace(rho.rho @ (b.conj().T @ b))))
    if flux_a <= 1e-30 or flux_b <= 1e-30:
        raise ZeroFluxError("zero flux in channel")

    g2 = np.empty_like(tau_grid)
    pos = tau_grid >= 0
    if np.any(pos):
        taus = tau_grid[pos]
        order = np.argsort(taus)
        curve = _conditional_curve(model, a / np.sqrt(flux_a), b, taus[order],
                                   rho.rho, rtol, atol) / flux_b
        g2[np.flatnonzero(pos)[order]] = curve
    if np.any(~pos):
        taus = -tau_grid[~pos]
        order = np.argsort(taus)
        curve = _conditional_curve(model, b / np.sqrt(flux_b), a, taus[order],
                                   rho.rho, rtol, atol) / flux_a
        g2[np.flatnonzero(~pos)[order]] = curve

    return CorrelationResult(tau_grid=tau_grid, g2=g2,
                             stderr=np.zeros_like(tau_grid),
                             normalization=flux_a * flux_b,
                             metadata={"method": "regression"})


def g2_zero_delay(model: LindbladModel, collapse_a: Operator, collapse_b: Operator,
                  rho: DensityState | None = None) -> float:
    """Direct fourth-moment g2(0) = <a^dag b^dag b a> / (<a^dag a><b^dag b>)."""
    if rho is None:
        rho = steady_state(model)
    a = collapse_a.matrix
    b = collapse_b.matrix
    flux_a = float(np.real(np.trace(rho.rho @ (a.conj().T @ a))))
    flux_b = float(np.real(np.trace(rho.rho @ (b.conj().T @ b))))
    if flux_a <= 1e-30 or flux_b <= 1e-30:
        raise ZeroFluxError("zero flux in channel")
    num = float(np.real(np.trace(rho.rho @ (a.conj().T @ b.conj().T @ b @ a))))
    return num / (flux_a * flux_b)


def apply_timing_jitter(result: CorrelationResult, sigma: float) -> CorrelationResult:
    """Convolve g2 with a Gaussian detector response of std ``sigma`` ns.

    Optional instrument-response model; the physical curves are computed
    without it. Requires a uniform tau grid.
    """
    tau = result.tau_grid
    if tau.size < 3:
        return result
    dt = np.diff(tau)
    if not np.allclose(dt, dt[0], rtol=1e-9):
        raise ValueError("timing jitter convolution requires a uniform tau grid")
    h = dt[0]
    n_k = max(1, int(np.ceil(4 * sigma / h)))
    x = np.arange(-n_k, n_k + 1) * h
    k = np.exp(-0.5 * (x / sigma) ** 2)
    k /= k.sum()
    padded = np.concatenate((np.full(n_k, result.g2[0]), result.g2,
                             np.full(n_k, result.g2[-1])))
    smooth = np.convolve(padded, k, mode="valid")
    meta = dict(result.metadata)
    meta["timing_jitter_sigma_ns"] = sigma
    return CorrelationResult(tau_grid=tau, g2=smooth, stderr=result.stderr,
                             normalization=result.normalization, metadata=meta)


# ---------------------------------------------------------------------------
# emission spectra

@dataclass(frozen=True)
class SpectrumResult:
    freqs: np.ndarray       # GHz, relative to the model's rotating frame
    values: np.ndarray      # arbitrary units, >= 0 within tolerance
    metadata: dict = field(default_factory=dict)


def emission_spectrum(model: LindbladModel, dipole: Operator, freq_grid,
                      filter_fwhm: float = 0.0, method: str = "eig",
                      rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                      horizon: float | None = None) -> SpectrumResult:
    """Steady-state emission spectrum of a dipole operator.

    S(nu) = Re integral_0^inf <d^dag(tau) d(0)> e^{-i 2 pi nu tau} dtau,
    convolved with a Lorentzian filter of FWHM ``filter_fwhm`` (GHz; 0
    disables it). The sign convention makes a transition of angular
    frequency w (in the model's rotating frame) appear at nu = w / 2 pi,
    so the frequency axis reads as emission frequency relative to the
    frame reference.

    The default path diagonalizes the Liouvillian and evaluates the
    half-range Fourier integral in closed form, so no time-domain
    truncation enters. If the eigendecomposition is unreliable (checked
    by residual), or ``method="time"``, the correlator is propagated
    explicitly and integrated with the truncation horizon recorded in the
    metadata.
    """
    freqs = np.asarray(freq_grid, dtype=np.float64)
    rho_ss = steady_state(model)
    d = dipole.matrix
    flux = float(np.real(np.trace(rho_ss.rho @ (d.conj().T @ d))))
    if flux <= 1e-30:
        raise ZeroFluxError("zero dipole flux")

    L = model.liouvillian
    if method == "eig":
        lam, V = np.linalg.eig(L)
        resid = np.max(np.abs(L @ V - V * lam)) / max(np.max(np.abs(L)), 1.0)
        if resid < 1e-8:
            alpha = np.linalg.solve(V, (d @ rho_ss.rho).ravel())
            row = d.conj().ravel()  # tr(d^dag rho) = vec((d^dag)^T) . vec(rho)
            weights = (row @ V) * alpha
            # drop numerically empty modes; a non-decaying mode with weight
            # would make the unfiltered integral diverge
            decay = lam.real - np.pi * filter_fwhm
            keep = np.abs(weights) > 1e-14 * np.max(np.abs(weights))
            if np.any(keep & (decay >= -1e-12)):
                raise ZeroFluxError(
                    "dipole correlator has a non-decaying component; "
                    "set a nonzero filter_fwhm")
            vals = np.zeros_like(freqs)
            lam_k = lam[keep]
            w_k = weights[keep]
            for i, nu in enumerate(freqs):
                vals[i] = np.real(np.sum(-w_k / (lam_k - np.pi * filter_fwhm
                                                 - 2j * np.pi * nu)))
            return SpectrumResult(freqs=freqs, values=vals,
                                  metadata={"method": "eig", "filter_fwhm": filter_fwhm,
                                            "eig_residual": float(resid)})
        # fall through to the time-domain path

    # time-domain path with explicit truncation
    rates = [j.rate for j in model.jumps if j.rate > 0]
    if horizon is None:
        horizon = 50.0 / min(rates) if rates else 50.0
    n_t = 4096
    taus = np.linspace(0.0, horizon, n_t)
    ys = _propagate(L, (d @ rho_ss.rho).ravel(), taus, rtol, atol, np.inf)
    row = d.conj().ravel()
    m = ys @ row
    if filter_fwhm > 0:
        m = m * np.exp(-np.pi * filter_fwhm * taus)
    env = np.abs(m)
    stop = n_t
    below = np.flatnonzero(env < 1e-6 * env[0])
    if below.size:
        stop = below[0] + 1
    taus, m = taus[:stop], m[:stop]
    vals = np.empty_like(freqs)
    for i, nu in enumerate(freqs):
        vals[i] = np.real(np.trapezoid(m * np.exp(-2j * np.pi * nu * taus), taus))
    return SpectrumResult(freqs=freqs, values=vals,
                          metadata={"method": "time", "filter_fwhm": filter_fwhm,
                                    "horizon_ns": float(taus[-1]),
                                    "truncated_at_envelope": bool(below.size > 0)})
