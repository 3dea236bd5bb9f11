"""Scenario runners: execute one configured experiment and emit tables.

Each runner returns ``(tables, extras)`` where ``tables`` maps file stems
to (comment_lines, columns) and ``extras`` goes into the run manifest
(fit results, convergence checks, figures of merit). Column units are
spelled out in the header comments; all files are plain CSV.
"""

from __future__ import annotations

import numpy as np

from .analysis import (
    CoincidenceConfig,
    bin_averaged_reference,
    entanglement_report,
    g2_from_records,
    reduced_chi2,
)
from .config import ScenarioConfig
from .dynamics import correlate_g2, emission_spectrum, evolve, steady_state
from .hilbert import DensityState
from .siv_models import (
    CavityParams,
    DriveParams,
    WaveguideParams,
    build_cavity_model,
    build_waveguide_model,
    entangled_state_beat,
    fit_relaxation_time,
    fock_convergence_check,
    saturation_sweep,
    switch_dynamics,
    transmission_spectrum,
)
from .trajectories import run_trajectories

__all__ = ["run_scenario"]


def _convergence(cfg: ScenarioConfig) -> dict:
    shifts = fock_convergence_check(cfg.siv, cfg.cavity, cfg.drive)
    return {f"fock_doubling_shift_{k}": v for k, v in shifts.items()}


def _run_spectrum(cfg: ScenarioConfig):
    grid = np.asarray(cfg.sweep["grid"], dtype=float)
    t_rel, fluor = transmission_spectrum(cfg.siv, cfg.cavity,
                                         cfg.drive.probe_flux, grid)
    extras = {"extinction": float(1.0 - t_rel.min()), **_convergence(cfg)}
    tables = {"spectrum": (
        ["probe scan across the emitter resonance",
         "columns: probe_freq_GHz, transmission_rel (to g=0), fluorescence_per_ns"],
        {"probe_freq_GHz": grid, "transmission_rel": t_rel,
         "fluorescence_per_ns": fluor})}
    return tables, extras


def _run_saturation(cfg: ScenarioConfig):
    grid = np.asarray(cfg.sweep["grid"], dtype=float)
    ext, widths = saturation_sweep(cfg.siv, cfg.cavity, grid)
    tables = {"saturation": (
        ["on-resonance extinction and fluorescence linewidth vs probe flux",
         "columns: flux_per_ns, extinction, fwhm_GHz"],
        {"flux_per_ns": grid, "extinction": ext, "fwhm_GHz": widths})}
    return tables, _convergence(cfg)


def _run_switch(cfg: ScenarioConfig):
    t = np.linspace(0.0, cfg.solver["t_max"], cfg.solver["t_points"])
    gate = cfg.drive.gate
    tr_u, fl_u = switch_dynamics(cfg.siv, cfg.cavity, "u", t, probe=cfg.drive,
                                 gate=gate if gate and gate.target == "u" else None)
    tr_c, fl_c = switch_dynamics(cfg.siv, cfg.cavity, "c", t, probe=cfg.drive,
                                 gate=gate if gate and gate.target == "c" else None)
    extras = {
        "tau_fit_gate_u_ns": fit_relaxation_time(t, tr_u, tr_u[-1],
                                                 window=(1.0, 0.6 * t[-1])),
        "tau_fit_gate_c_ns": fit_relaxation_time(t, tr_c, tr_c[-1],
                                                 window=(1.0, 0.6 * t[-1])),
        **_convergence(cfg),
    }
    tables = {"switch": (
        ["probe response after an initialization gate to |u> or |c>",
         "columns: t_ns, transmission_rel_after_u, fluorescence_per_ns_after_u,"
         " transmission_rel_after_c, fluorescence_per_ns_after_c"],
        {"t_ns": t, "transmission_u": tr_u, "fluorescence_u": fl_u,
         "transmission_c": tr_c, "fluorescence_c": fl_c})}
    return tables, extras


def _run_correlations(cfg: ScenarioConfig):
    model = build_cavity_model(cfg.siv, cfg.cavity, cfg.drive)
    rho_ss = steady_state(model)
    solver = cfg.solver
    records = run_trajectories(model, rho_ss, solver["duration"],
                               solver["n_traj"], solver["seed"],
                               workers=solver["workers"])
    tables = {}
    extras = {"n_records": len(records), **_convergence(cfg)}
    pairs = [("T", "T"), ("S", "S"), ("S", "T")]
    ops = {"T": model.jump_by_label("T").operator,
           "S": model.jump_by_label("S").operator}
    for ch_a, ch_b in pairs:
        cfg_hist = CoincidenceConfig(ch_a, ch_b, bin_width=solver["bin_width"],
                                     max_tau=solver["max_tau"])
        try:
            hist = g2_from_records(records, cfg_hist)
        except ValueError as exc:
            extras[f"g2_{ch_a}{ch_b}_skipped"] = str(exc)
            continue
        ref = bin_averaged_reference(model, ops[ch_a], ops[ch_b],
                                     hist.tau_grid, solver["bin_width"])
        extras[f"chi2_{ch_a}{ch_b}"] = reduced_chi2(hist, ref)
        tables[f"correlations_{ch_a}{ch_b}"] = (
            [f"g2 between channels {ch_a} and {ch_b}: trajectory histogram "
             "vs quantum-regression reference",
             "columns: tau_ns, g2_records, stderr, g2_regression"],
            {"tau_ns": hist.tau_grid, "g2_records": hist.g2,
             "stderr": hist.stderr, "g2_regression": ref})
    return tables, extras, records


def _run_raman(cfg: ScenarioConfig):
    detunings = np.asarray(cfg.sweep.get("grid", np.arange(0.0, 7.0)), dtype=float)
    freqs = np.linspace(-detunings.max() - 2.0, 2.0, 1601)
    columns = {"freq_GHz": freqs}
    extras = {}
    for det in detunings:
        wg = WaveguideParams(
            gamma_1d=cfg.waveguide.gamma_1d,
            phase_phi=cfg.waveguide.phase_phi,
            drive1=DriveParams(probe_freq=float(det),
                               probe_flux=cfg.waveguide.drive1.probe_flux),
            collection_efficiency=cfg.waveguide.collection_efficiency)
        model = build_waveguide_model(cfg.siv, None, wg)
        dipole = model.jump_by_label("wg").operator
        spec = emission_spectrum(model, dipole, freqs,
                                 filter_fwhm=cfg.solver["filter_fwhm"])
        columns[f"S_detuning_{det:g}GHz"] = spec.values
        raman_region = freqs <= (-det + 0.4 if det >= 1.0 else 2.0)
        idx = np.argmax(np.where(raman_region, spec.values, -np.inf))
        extras[f"raman_peak_GHz_detuning_{det:g}"] = float(freqs[idx])
    tables = {"raman": (
        ["waveguide emission spectra vs drive detuning; frequencies are "
         "offsets from the bare |c>-|e> line",
         "spontaneous line near 0, Raman line at minus the detuning",
         "columns: freq_GHz then one spectrum column per detuning (arb. units)"],
        columns)}
    return tables, extras


def _run_entangle(cfg: ScenarioConfig):
    siv2 = cfg.siv2 or cfg.siv
    taus = np.linspace(0.0, cfg.solver["max_tau"], 301)
    beat = entangled_state_beat(cfg.siv, siv2, cfg.waveguide, taus,
                                delta_sigma=cfg.delta_sigma)
    columns = {"tau_ns": taus, "g2_conditional": beat.g2,
               "g2_dephased": beat.g2_dephased,
               "interference": beat.interference}
    if beat.gaussian_avg is not None:
        columns["gaussian_avg"] = beat.gaussian_avg
    report = entanglement_report(cfg.siv, siv2, cfg.waveguide)
    extras = {
        "fidelity": report.fidelity,
        "fidelity_lower_bound": report.fidelity_lower_bound,
        "concurrence": report.concurrence,
        "herald_rate_per_s": report.herald_rate,
        **{k: v for k, v in report.metadata.items() if isinstance(v, float)},
    }
    tables = {"entangle": (
        ["conditional waveguide rate after a heralding click (normalized "
         "to the steady rate)",
         "columns: tau_ns, g2_conditional, g2_dephased (which-path "
         "reference), interference" + (", gaussian_avg" if beat.gaussian_avg
                                       is not None else "")],
        columns)}
    return tables, extras


def _run_custom(cfg: ScenarioConfig):
    model = build_cavity_model(cfg.siv, cfg.cavity, cfg.drive)
    t = np.linspace(0.0, cfg.solver["t_max"], cfg.solver["t_points"])
    nf = cfg.cavity.fock_cutoff
    ground = np.zeros((3 * nf, 3 * nf), dtype=complex)
    ground[0, 0] = 1.0
    states = evolve(model, DensityState(model.space, ground, validate=False),
                    t, rtol=cfg.solver["rtol"], validate=False)
    pops = np.array([np.diag(s.rho).real.reshape(3, nf).sum(axis=1)
                     for s in states])
    n_cav = np.array([
        np.sum(np.diag(s.rho).real.reshape(3, nf) * np.arange(nf)[None, :])
        for s in states])
    flux_t = np.array([model.channel_flux(s, "T") for s in states])
    tables = {"custom": (
        ["raw model evolution from |c, vacuum>",
         "columns: t_ns, p_c, p_u, p_e, n_cavity, flux_T_per_ns"],
        {"t_ns": t, "p_c": pops[:, 0], "p_u": pops[:, 1], "p_e": pops[:, 2],
         "n_cavity": n_cav, "flux_T_per_ns": flux_t})}
    return tables, _convergence(cfg)


def run_scenario(cfg: ScenarioConfig):
    """Dispatch one scenario; returns (tables, extras, records-or-None)."""
    records = None
    if cfg.scenario == "spectrum":
        tables, extras = _run_spectrum(cfg)
    elif cfg.scenario == "saturation":
        tables, extras = _run_saturation(cfg)
    elif cfg.scenario == "switch":
        tables, extras = _run_switch(cfg)
    elif cfg.scenario == "correlations":
        tables, extras, records = _run_correlations(cfg)
    elif cfg.scenario == "raman":
        tables, extras = _run_raman(cfg)
    elif cfg.scenario == "entangle":
        tables, extras = _run_entangle(cfg)
    elif cfg.scenario == "custom":
        tables, extras = _run_custom(cfg)
    else:  # pragma: no cover - guarded by config validation
        raise ValueError(f"unknown scenario {cfg.scenario!r}")
    return tables, extras, records
