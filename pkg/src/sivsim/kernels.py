"""Hot numerical kernels with a numba and a pure-numpy execution path.

The adaptive Runge-Kutta propagator and the Monte-Carlo trajectory stepper
are written once, in njit-compatible numpy, and either compiled with
``numba.njit`` or executed as plain Python. The coincidence counter has a
separate vectorized numpy variant because the natural numpy formulation
(searchsorted + bincount) differs from the natural compiled one (two
moving pointers); the two are checked against each other in the tests.

Backend selection: the environment variable ``SIVSIM_NUMBA`` set to
``0``/``false``/``off`` forces the pure-numpy path; anything else (or the
variable unset) uses numba when it is importable. ``benchmarks/`` times
the two paths against each other.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

from .rng import _make_uniform_pair, philox4x32_10, uniform_pair

__all__ = ["kernels", "get_backend", "build_kernels", "numba_available"]

# RK45 / trajectory status codes shared with the drivers.
STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_TRACE_DRIFT = 2
STATUS_NORM_UNDERFLOW = 3
STATUS_CLICK_OVERFLOW = 4

_R_FLOOR = 1e-12  # floor on the jump threshold draw, guards r == 0


# ---------------------------------------------------------------------------
# adaptive Dormand-Prince 5(4) on dy/dt = L @ y

def _rk45_impl(L, y0, t_eval, rtol, atol, h0, trace_tol):
    n_out = t_eval.shape[0]
    d2 = y0.shape[0]
    ys = np.empty((n_out, d2), dtype=np.complex128)

    d = int(np.sqrt(d2))
    tr0 = 0.0 + 0.0j
    for i in range(d):
        tr0 += y0[i * d + i]

    t = t_eval[0]
    y = y0.copy()
    k1 = L @ y
    h = h0
    h_min = 1e-14
    status = STATUS_OK
    t_fail = 0.0

    for i_out in range(n_out):
        t_next = t_eval[i_out]
        while t < t_next:
            capped = t + h > t_next
            h_use = t_next - t if capped else h
            # stages
            k2 = L @ (y + h_use * 0.2 * k1)
            k3 = L @ (y + h_use * (0.075 * k1 + 0.225 * k2))
            k4 = L @ (y + h_use * ((44.0 / 45.0) * k1 - (56.0 / 15.0) * k2
                                   + (32.0 / 9.0) * k3))
            k5 = L @ (y + h_use * ((19372.0 / 6561.0) * k1 - (25360.0 / 2187.0) * k2
                                   + (64448.0 / 6561.0) * k3 - (212.0 / 729.0) * k4))
            k6 = L @ (y + h_use * ((9017.0 / 3168.0) * k1 - (355.0 / 33.0) * k2
                                   + (46732.0 / 5247.0) * k3 + (49.0 / 176.0) * k4
                                   - (5103.0 / 18656.0) * k5))
            y5 = y + h_use * ((35.0 / 384.0) * k1 + (500.0 / 1113.0) * k3
                              + (125.0 / 192.0) * k4 - (2187.0 / 6784.0) * k5
                              + (11.0 / 84.0) * k6)
            k7 = L @ y5
            err_vec = h_use * ((71.0 / 57600.0) * k1 - (71.0 / 16695.0) * k3
                               + (71.0 / 1920.0) * k4 - (17253.0 / 339200.0) * k5
                               + (22.0 / 525.0) * k6 - (1.0 / 40.0) * k7)
            # weighted RMS error
            acc = 0.0
            for j in range(d2):
                aj = abs(y[j])
                bj = abs(y5[j])
                scale = atol + rtol * (aj if aj > bj else bj)
                e = abs(err_vec[j]) / scale
                acc += e * e
            err = np.sqrt(acc / d2)

            if err == 0.0:
                factor = 5.0
            else:
                factor = 0.9 * err ** (-0.2)
                if factor < 0.2:
                    factor = 0.2
                elif factor > 5.0:
                    factor = 5.0

            if err <= 1.0:
                t = t + h_use
                y = y5
                k1 = k7
                tr = 0.0 + 0.0j
                for j in range(d):
                    tr += y[j * d + j]
                if abs(tr - tr0) > trace_tol:
                    status = STATUS_TRACE_DRIFT
                    t_fail = t
                    break
                if not capped:  # steps shortened to hit a grid point carry
                    h = h_use * factor  # no information about the error scale
            else:
                h = h_use * factor  # rejected: always shrink from the attempt
            if h < h_min:
                status = STATUS_STEP_UNDERFLOW
                t_fail = t
                break
        if status != STATUS_OK:
            break
        ys[i_out, :] = y
    return ys, status, t_fail


# ---------------------------------------------------------------------------
# Monte-Carlo wavefunction trajectory in the eigenbasis of H_eff
#
# State is carried as coefficients c in the eigenbasis: psi(t) = V @ (c *
# exp(-i lam (t - t_seg))). Precomputed inputs:
#   lam   eigenvalues of H_eff                                (d,)
#   M     V^dag V Gram matrix, norm^2 = c^dag M c             (d, d)
#   W     V^-1 L_k V, post-jump coefficient maps              (nj, d, d)
#   N     V^dag L_k^dag L_k V, jump weights c^dag N_k c       (nj, d, d)
#   obs   V^dag O V for sampled observables                   (no, d, d)
# The stepper body lives in _make_mcwf so the quadratic-form and RNG
# helpers can be bound either to their jitted or to their plain versions.

def _quad_form(Mz, z):
    acc = 0.0
    for j in range(z.shape[0]):
        acc += (z[j].real * Mz[j].real + z[j].imag * Mz[j].imag)
    return acc


# ---------------------------------------------------------------------------
# coincidence counting over click streams
#
# ta/tb hold the click times of all records concatenated; offsets give the
# record boundaries (len n_records + 1). Delays tb - ta are histogrammed
# on nbins uniform bins spanning [-max_tau, +max_tau). With auto != 0 the
# two streams are the same array and self-pairs (same index) are skipped.

def _count_pairs_impl(ta, a_off, tb, b_off, max_tau, bin_width, nbins, auto, counts):
    n_rec = a_off.shape[0] - 1
    for rec in range(n_rec):
        a0, a1 = a_off[rec], a_off[rec + 1]
        b0, b1 = b_off[rec], b_off[rec + 1]
        lo = b0
        hi = b0
        for ia in range(a0, a1):
            t0 = ta[ia]
            while lo < b1 and tb[lo] < t0 - max_tau:
                lo += 1
            while hi < b1 and tb[hi] < t0 + max_tau:
                hi += 1
            for ib in range(lo, hi):
                if auto != 0 and ib == ia:
                    continue
                k = int((tb[ib] - t0 + max_tau) / bin_width)
                if 0 <= k < nbins:
                    counts[k] += 1
    return counts


def _count_pairs_numpy(ta, a_off, tb, b_off, max_tau, bin_width, nbins, auto, counts):
    n_rec = a_off.shape[0] - 1
    for rec in range(n_rec):
        a = ta[a_off[rec]:a_off[rec + 1]]
        b = tb[b_off[rec]:b_off[rec + 1]]
        if a.size == 0 or b.size == 0:
            continue
        lo = np.searchsorted(b, a - max_tau, side="left")
        hi = np.searchsorted(b, a + max_tau, side="left")
        n_per = hi - lo
        if int(n_per.sum()) == 0:
            continue
        ia = np.repeat(np.arange(a.size), n_per)
        ib = np.concatenate([np.arange(l, h) for l, h in zip(lo, hi)])
        if auto != 0:
            keep = ib != ia
            ia, ib = ia[keep], ib[keep]
        k = ((b[ib] - a[ia] + max_tau) / bin_width).astype(np.int64)
        valid = (k >= 0) & (k < nbins)
        counts += np.bincount(k[valid], minlength=nbins).astype(np.int64)
    return counts


# ---------------------------------------------------------------------------
# backend assembly

def numba_available() -> bool:
    try:
        import numba  # noqa: F401
        return True
    except ImportError:
        return False


def build_kernels(use_numba: bool) -> SimpleNamespace:
    """Compile (or not) the kernel set; the benchmark builds both."""
    if use_numba:
        from numba import njit
        jit = njit(nogil=True, cache=True)
        quad = jit(_quad_form)
        pair = njit(nogil=True)(_make_uniform_pair(jit(philox4x32_10)))
        rk45 = jit(_rk45_impl)
        mcwf = njit(nogil=True)(_make_mcwf(quad, pair))
        count = jit(_count_pairs_impl)
        name = "numba"
    else:
        rk45 = _rk45_impl
        mcwf = _make_mcwf(_quad_form, uniform_pair)
        count = _count_pairs_numpy
        name = "numpy"
    return SimpleNamespace(name=name, rk45=rk45, mcwf_trajectory=mcwf,
                           count_pairs=count)


def _make_mcwf(quad, pair):
    """Bind the quadratic-form and RNG helpers into the MCWF stepper.

    Needed because numba resolves globals at compile time; passing the
    helpers through a closure lets the same body run compiled and plain.
    """

    def mcwf(lam, M, W, N, c0, duration, seed, stream_id, bisect_tol,
             sample_times, obs, click_t, click_ch, samples_out):
        d = lam.shape[0]
        nj = W.shape[0]
        ns = sample_times.shape[0]
        nobs = obs.shape[0]
        max_clicks = click_t.shape[0]

        c = c0.copy()
        nrm2 = quad(M @ c, c)
        c = c / np.sqrt(nrm2)

        t_seg = 0.0
        n_clicks = 0
        draw = 0
        s_ptr = 0
        status = STATUS_OK

        while True:
            u0, u1 = pair(seed, stream_id, draw >> 1)
            r = u1 if (draw & 1) else u0
            draw += 1
            if r < _R_FLOOR:
                r = _R_FLOOR

            dt_end = duration - t_seg
            z = c * np.exp(-1j * lam * dt_end)
            n_end = quad(M @ z, z)

            if n_end > r:
                t_jump = duration
            else:
                lo = 0.0
                hi = dt_end
                while hi - lo > bisect_tol:
                    mid = 0.5 * (lo + hi)
                    z = c * np.exp(-1j * lam * mid)
                    if quad(M @ z, z) > r:
                        lo = mid
                    else:
                        hi = mid
                t_jump = t_seg + 0.5 * (lo + hi)

            while s_ptr < ns and (sample_times[s_ptr] < t_jump
                                  or (t_jump >= duration
                                      and sample_times[s_ptr] <= duration)):
                dt = sample_times[s_ptr] - t_seg
                z = c * np.exp(-1j * lam * dt)
                norm2 = quad(M @ z, z)
                for io in range(nobs):
                    samples_out[s_ptr, io] = quad(obs[io] @ z, z) / norm2
                s_ptr += 1

            if t_jump >= duration:
                break

            z = c * np.exp(-1j * lam * (t_jump - t_seg))
            wsum = 0.0
            for k in range(nj):
                w = quad(N[k] @ z, z)
                if w > 0.0:
                    wsum += w
            if wsum <= 0.0:
                # norm cannot truly cross r with no open channel; the
                # crossing was roundoff on a flat norm, so the record ends
                break
            u0, u1 = pair(seed, stream_id, draw >> 1)
            u = u1 if (draw & 1) else u0
            draw += 1
            target = u * wsum
            acc = 0.0
            pick = nj - 1
            for k in range(nj):
                w = quad(N[k] @ z, z)
                if w > 0.0:
                    acc += w
                if acc >= target:
                    pick = k
                    break

            if n_clicks >= max_clicks:
                status = STATUS_CLICK_OVERFLOW
                break
            click_t[n_clicks] = t_jump
            click_ch[n_clicks] = pick
            n_clicks += 1

            c_new = W[pick] @ z
            nrm2 = quad(M @ c_new, c_new)
            if nrm2 < 1e-300:
                status = STATUS_NORM_UNDERFLOW
                break
            c = c_new / np.sqrt(nrm2)
            t_seg = t_jump

        return n_clicks, status

    return mcwf


def _select_default() -> bool:
    flag = os.environ.get("SIVSIM_NUMBA", "").strip().lower()
    if flag in ("0", "false", "off", "no"):
        return False
    return numba_available()


kernels = build_kernels(_select_default())


def get_backend() -> str:
    """Name of the active execution path: ``"numba"`` or ``"numpy"``."""
    return kernels.name
