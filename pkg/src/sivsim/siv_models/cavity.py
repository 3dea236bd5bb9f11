"""Emitter-cavity models: transmission spectra, saturation, optical switch.

Frames and conventions
----------------------
Cavity models are built in the frame rotating at the probe frequency: the
|e> level sits at -2*pi*probe_freq (probe offset from the bare |c>-|e>
resonance), the |u> level keeps its bare +2*pi*64 GHz splitting, and the
cavity mode sits at 2*pi*(detuning_cavity - probe_freq). The probe enters
the Hamiltonian as a coherent displacement of the waveguide input with
amplitude sqrt(kappa_in * flux), kappa_in being half the waveguide share
of kappa (input from one side).

Detected channels: "T" is the waveguide share of the cavity decay
(transmission), "S" the free-space |e>->|c> fluorescence, "Su" the
free-space |e>->|u> fluorescence. Transmission figures are fluxes in "T"
normalized to the same model with g = 0, so port conventions cancel.
"""

from __future__ import annotations

import numpy as np

from ..dynamics import Jump, LindbladModel, evolve, steady_state
from ..hilbert import (
    DensityState,
    HilbertSpace,
    Operator,
    destroy,
    embed,
    transition,
)
from .params import (
    LEVEL_C,
    LEVEL_E,
    LEVEL_U,
    CavityParams,
    DriveParams,
    GatePulse,
    SivParams,
    thermal_rates,
)

__all__ = [
    "cooperativity",
    "build_cavity_model",
    "transmission_spectrum",
    "extinction",
    "saturation_sweep",
    "fluorescence_fwhm",
    "switch_dynamics",
    "fit_relaxation_time",
    "fock_convergence_check",
]

TWO_PI = 2.0 * np.pi


def cooperativity(g: float, kappa: float, gamma: float) -> float:
    """4 g^2 / (kappa gamma), all in the same (ordinary) frequency units."""
    if kappa == 0 or gamma == 0:
        raise ValueError("cooperativity undefined for zero kappa or gamma")
    return 4.0 * g * g / (kappa * gamma)


def _emitter_jumps(siv: SivParams, s_ce: Operator, s_ue: Operator,
                   s_uc: Operator, s_ee: Operator, suffix: str = "",
                   waveguide_rate: float = 0.0) -> list[Jump]:
    """Decay, dephasing and thermal channels shared by all scenarios.

    ``waveguide_rate`` (rad/ns) is subtracted from the radiative
    |e>->|c> free-space rate when part of that decay is routed into a
    separately modeled waveguide channel.
    """
    gamma_rad = TWO_PI * siv.gamma * (1.0 - siv.nonradiative)
    rate_ce = gamma_rad * siv.branching_ce - waveguide_rate
    if rate_ce < -1e-12:
        raise ValueError(
            "waveguide rate exceeds the radiative |e>->|c> decay "
            f"(gamma_1d too large for branching_ce={siv.branching_ce})")
    jumps = []
    if rate_ce > 0:
        jumps.append(Jump(s_ce, rate_ce, "S" + suffix))
    rate_ue = gamma_rad * (1.0 - siv.branching_ce)
    if rate_ue > 0:
        jumps.append(Jump(s_ue, rate_ue, "Su" + suffix))
    if siv.nonradiative > 0:
        gamma_dark = TWO_PI * siv.gamma * siv.nonradiative
        jumps.append(Jump(s_ce, gamma_dark * siv.branching_ce, "NRc" + suffix))
        if siv.branching_ce < 1:
            jumps.append(Jump(s_ue, gamma_dark * (1 - siv.branching_ce),
                              "NRu" + suffix))
    if siv.dephasing > 0:
        jumps.append(Jump(s_ee, TWO_PI * siv.dephasing, "phi" + suffix))
    rate_up, rate_down = thermal_rates(siv)
    jumps.append(Jump(s_uc, rate_up, "th_up" + suffix))
    jumps.append(Jump(s_uc.dag(), rate_down, "th_dn" + suffix))
    return jumps


def build_cavity_model(siv: SivParams, cav: CavityParams,
                       drive: DriveParams) -> LindbladModel:
    """Driven emitter-cavity model in the probe rotating frame."""
    space = HilbertSpace((3, cav.fock_cutoff))
    a = embed(destroy(cav.fock_cutoff), 1, space)
    s_ce = embed(transition(3, LEVEL_C, LEVEL_E), 0, space)
    s_ue = embed(transition(3, LEVEL_U, LEVEL_E), 0, space)
    s_uc = embed(transition(3, LEVEL_U, LEVEL_C), 0, space)
    s_ee = embed(transition(3, LEVEL_E, LEVEL_E), 0, space)
    s_uu = embed(transition(3, LEVEL_U, LEVEL_U), 0, space)

    kappa_ang = TWO_PI * cav.kappa
    kappa_wg = kappa_ang * cav.kappa_wg_fraction
    g_ang = TWO_PI * cav.g

    h = (-TWO_PI * drive.probe_freq) * s_ee.matrix \
        + (TWO_PI * siv.orbital_splitting) * s_uu.matrix \
        + TWO_PI * (cav.detuning_cavity - drive.probe_freq) * (a.dag() @ a).matrix \
        + g_ang * (a.dag().matrix @ s_ce.matrix + a.matrix @ s_ce.dag().matrix)
    eps = np.sqrt(0.5 * kappa_wg * drive.probe_flux)
    if eps > 0:
        h = h + eps * (a.matrix + a.dag().matrix)

    jumps = [Jump(a, kappa_wg, "T")]
    if cav.kappa_wg_fraction < 1:
        jumps.append(Jump(a, kappa_ang - kappa_wg, "loss"))
    jumps += _emitter_jumps(siv, s_ce, s_ue, s_uc, s_ee)
    return LindbladModel(space, Operator(space, h), jumps)


def _fluxes(model: LindbladModel, state: DensityState) -> dict[str, float]:
    out = {}
    for j in model.jumps:
        out[j.label] = model.channel_flux(state, j.label)
    return out


def transmission_spectrum(siv: SivParams, cav: CavityParams, flux: float,
                          freq_grid) -> tuple[np.ndarray, np.ndarray]:
    """Relative transmission and fluorescence versus probe frequency.

    Transmission is the steady "T"-channel flux normalized per frequency
    to the identical model with g = 0; fluorescence is the total
    free-space scattering rate ("S" plus "Su"), in clicks/ns.
    """
    freq_grid = np.asarray(freq_grid, dtype=np.float64)
    cav0 = CavityParams(g=0.0, kappa=cav.kappa,
                        kappa_wg_fraction=cav.kappa_wg_fraction,
                        detuning_cavity=cav.detuning_cavity,
                        fock_cutoff=cav.fock_cutoff)
    t_rel = np.empty_like(freq_grid)
    fluor = np.empty_like(freq_grid)
    for i, nu in enumerate(freq_grid):
        drive = DriveParams(probe_freq=float(nu), probe_flux=flux)
        m = build_cavity_model(siv, cav, drive)
        ss = steady_state(m)
        m0 = build_cavity_model(siv, cav0, drive)
        ss0 = steady_state(m0)
        t_rel[i] = m.channel_flux(ss, "T") / m0.channel_flux(ss0, "T")
        fluor[i] = m.channel_flux(ss, "S")
        if siv.branching_ce < 1:
            fluor[i] += m.channel_flux(ss, "Su")
    return t_rel, fluor


def extinction(siv: SivParams, cav: CavityParams, flux: float) -> float:
    """1 - T_rel with the probe on the bare emitter resonance."""
    t_rel, _ = transmission_spectrum(siv, cav, flux, np.array([0.0]))
    return float(1.0 - t_rel[0])


def fluorescence_fwhm(siv: SivParams, cav: CavityParams, flux: float,
                      window: float = 1.2, points: int = 161) -> float:
    """FWHM (GHz) of the fluorescence line versus probe frequency.

    The scan window doubles until the half-maximum crossings are
    bracketed; crossings are located by linear interpolation.
    """
    for _ in range(6):
        grid = np.linspace(-window, window, points)
        _, fluor = transmission_spectrum(siv, cav, flux, grid)
        peak = fluor.max()
        if fluor[0] < peak / 2 and fluor[-1] < peak / 2:
            above = fluor >= peak / 2
            i0 = int(np.argmax(above))
            i1 = len(grid) - 1 - int(np.argmax(above[::-1]))
            # linear interpolation at both edges
            def cross(ia, ib):
                f0, f1 = fluor[ia], fluor[ib]
                x0, x1 = grid[ia], grid[ib]
                return x0 + (peak / 2 - f0) * (x1 - x0) / (f1 - f0)
            left = cross(i0 - 1, i0)
            right = cross(i1 + 1, i1)
            return float(right - left)
        window *= 2.0
    raise RuntimeError("fluorescence line is wider than the widest scan window")


def saturation_sweep(siv: SivParams, cav: CavityParams, flux_grid,
                     ) -> tuple[np.ndarray, np.ndarray]:
    """On-resonance extinction and fluorescence linewidth versus flux."""
    flux_grid = np.asarray(flux_grid, dtype=np.float64)
    if np.any(np.diff(flux_grid) <= 0):
        raise ValueError("flux_grid must be strictly increasing")
    ext = np.array([extinction(siv, cav, float(f)) for f in flux_grid])
    widths = np.array([fluorescence_fwhm(siv, cav, float(f)) for f in flux_grid])
    return ext, widths


def _gate_model(siv: SivParams, cav: CavityParams, gate: GatePulse,
                ) -> LindbladModel:
    """Pump model in the frame rotating at the gate laser.

    Target |u>: drive |c> <-> |e> resonantly; decay branching then pumps
    into |u>. Target |c>: drive |u> <-> |e>, which is 64 GHz from the
    cavity. Cavity and emitter detunings follow the chosen frame; the
    probe is off during the gate (its effect over 30 ns is negligible at
    the weak probe fluxes used).
    """
    space = HilbertSpace((3, cav.fock_cutoff))
    a = embed(destroy(cav.fock_cutoff), 1, space)
    s_ce = embed(transition(3, LEVEL_C, LEVEL_E), 0, space)
    s_ue = embed(transition(3, LEVEL_U, LEVEL_E), 0, space)
    s_uc = embed(transition(3, LEVEL_U, LEVEL_C), 0, space)
    s_ee = embed(transition(3, LEVEL_E, LEVEL_E), 0, space)
    s_uu = embed(transition(3, LEVEL_U, LEVEL_U), 0, space)

    kappa_ang = TWO_PI * cav.kappa
    kappa_wg = kappa_ang * cav.kappa_wg_fraction
    g_ang = TWO_PI * cav.g
    split = siv.orbital_splitting
    rabi = np.pi * gate.strength  # 2*pi * strength / 2

    if gate.target == "u":
        # gate at the |c>-|e> frequency
        h = (TWO_PI * split) * s_uu.matrix \
            + TWO_PI * cav.detuning_cavity * (a.dag() @ a).matrix \
            + rabi * (s_ce.matrix + s_ce.dag().matrix)
    else:
        # gate at the |u>-|e> frequency, 64 GHz below the |c>-|e> line
        h = (TWO_PI * split) * (s_ee.matrix + s_uu.matrix) \
            + TWO_PI * (cav.detuning_cavity + split) * (a.dag() @ a).matrix \
            + rabi * (s_ue.matrix + s_ue.dag().matrix)
    h = h + g_ang * (a.dag().matrix @ s_ce.matrix + a.matrix @ s_ce.dag().matrix)

    jumps = [Jump(a, kappa_wg, "T")]
    if cav.kappa_wg_fraction < 1:
        jumps.append(Jump(a, kappa_ang - kappa_wg, "loss"))
    jumps += _emitter_jumps(siv, s_ce, s_ue, s_uc, s_ee)
    return LindbladModel(space, Operator(space, h), jumps)


def switch_dynamics(siv: SivParams, cav: CavityParams, gate_target: str,
                    t_grid, probe: DriveParams | None = None,
                    gate: GatePulse | None = None, pre_roll: float = 1.0,
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Probe transmission and fluorescence after an initialization gate.

    The gate pulse is simulated in its own rotating frame starting from
    the probe steady state. At the handover only the metastable orbital
    populations survive (residual |e> population is reassigned by the
    Purcell-weighted branching; optical coherences and the gate-frame
    cavity field live for picoseconds and are dropped), and the probe
    window starts with an empty cavity. ``t_grid`` counts from
    ``pre_roll`` ns after the gate so the probe field has refilled the
    cavity by t = 0. Transmission is normalized to the g = 0 reference.
    """
    if gate_target not in ("u", "c"):
        raise ValueError("gate_target must be 'u' or 'c'")
    probe = probe or DriveParams(probe_freq=0.0, probe_flux=1e-4)
    gate = gate or (probe.gate if probe.gate and probe.gate.target == gate_target
                    else GatePulse(target=gate_target))

    probe_model = build_cavity_model(siv, cav, probe)
    rho_ss = steady_state(probe_model)

    gate_model = _gate_model(siv, cav, gate)
    gate_init = DensityState(gate_model.space, np.diag(np.diag(rho_ss.rho)),
                             validate=False)
    gated = evolve(gate_model, gate_init, np.array([0.0, gate.duration]),
                   validate=False)[-1]

    # orbital populations at gate end; |e> feeds |c>/|u> by the branching
    # of its total decay, cavity channel included
    nf = cav.fock_cutoff
    pops_full = np.clip(np.diag(gated.rho).real, 0.0, None).reshape(3, nf)
    p = pops_full.sum(axis=1)
    p /= p.sum()
    delta_gate = cav.detuning_cavity if gate_target == "u" \
        else cav.detuning_cavity + siv.orbital_splitting
    kappa_ang = TWO_PI * cav.kappa
    purcell = (TWO_PI * cav.g) ** 2 * 4 / kappa_ang \
        / (1.0 + (2 * TWO_PI * delta_gate / kappa_ang) ** 2) if cav.g else 0.0
    gamma_ang = TWO_PI * siv.gamma
    beta = (purcell + gamma_ang * siv.branching_ce) / (purcell + gamma_ang)
    p_c = p[LEVEL_C] + beta * p[LEVEL_E]
    p_u = p[LEVEL_U] + (1 - beta) * p[LEVEL_E]

    rho0_m = np.zeros((3 * nf, 3 * nf), dtype=complex)
    rho0_m[LEVEL_C * nf, LEVEL_C * nf] = p_c
    rho0_m[LEVEL_U * nf, LEVEL_U * nf] = p_u
    rho0 = DensityState(probe_model.space, rho0_m, validate=False)

    t_grid = np.asarray(t_grid, dtype=np.float64)
    full_grid = np.concatenate(([0.0], t_grid + pre_roll))
    states = evolve(probe_model, rho0, full_grid, validate=False)[1:]

    cav0 = CavityParams(g=0.0, kappa=cav.kappa,
                        kappa_wg_fraction=cav.kappa_wg_fraction,
                        detuning_cavity=cav.detuning_cavity,
                        fock_cutoff=cav.fock_cutoff)
    ref = build_cavity_model(siv, cav0, probe)
    t_ref = ref.channel_flux(steady_state(ref), "T")

    trans = np.array([probe_model.channel_flux(s, "T") for s in states]) / t_ref
    fluor = np.array([probe_model.channel_flux(s, "S")
                      + (probe_model.channel_flux(s, "Su")
                         if siv.branching_ce < 1 else 0.0)
                      for s in states])
    return trans, fluor


def fit_relaxation_time(t: np.ndarray, y: np.ndarray, y_inf: float,
                        window: tuple[float, float] | None = None) -> float:
    """Exponential relaxation time from a log-linear fit of |y - y_inf|."""
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    resid = np.abs(y - y_inf)
    mask = resid > 1e-3 * resid.max()
    if window is not None:
        mask &= (t >= window[0]) & (t <= window[1])
    if mask.sum() < 3:
        raise ValueError("not enough points above noise for a relaxation fit")
    slope, _ = np.polyfit(t[mask], np.log(resid[mask]), 1)
    if slope >= 0:
        raise ValueError("series does not relax toward the stated asymptote")
    return float(-1.0 / slope)


def fock_convergence_check(siv: SivParams, cav: CavityParams,
                           drive: DriveParams, rel_tol: float = 1e-6,
                           ) -> dict[str, float]:
    """Compare steady observables at fock_cutoff and twice that.

    Returns the relative shifts; raises if any exceeds ``rel_tol``.
    """
    doubled = CavityParams(g=cav.g, kappa=cav.kappa,
                           kappa_wg_fraction=cav.kappa_wg_fraction,
                           detuning_cavity=cav.detuning_cavity,
                           fock_cutoff=2 * cav.fock_cutoff)
    out = {}
    for name, c in (("base", cav), ("doubled", doubled)):
        m = build_cavity_model(siv, c, drive)
        ss = steady_state(m)
        out[name] = {
            "T": m.channel_flux(ss, "T"),
            "S": m.channel_flux(ss, "S"),
        }
    shifts = {}
    for key in ("T", "S"):
        a, b = out["base"][key], out["doubled"][key]
        shifts[key] = abs(a - b) / max(abs(b), 1e-300)
        if shifts[key] > rel_tol:
            raise RuntimeError(
                f"fock_cutoff={cav.fock_cutoff} not converged: {key} flux "
                f"shifts by {shifts[key]:.2e} when the cutoff doubles")
    return shifts
