from .params import (
    LEVEL_C,
    LEVEL_E,
    LEVEL_U,
    CavityParams,
    DriveParams,
    GatePulse,
    SivParams,
    WaveguideParams,
    thermal_rates,
)
from .cavity import (
    build_cavity_model,
    cooperativity,
    extinction,
    fit_relaxation_time,
    fluorescence_fwhm,
    fock_convergence_check,
    saturation_sweep,
    switch_dynamics,
    transmission_spectrum,
)
from .waveguide import (
    BeatResult,
    beat_brute_force,
    build_waveguide_model,
    entangled_state_beat,
    g2_distinguishable_baseline,
    g2_waveguide_zero,
    sigma_for_t2star,
    waveguide_jump,
)

__all__ = [n for n in dir() if not n.startswith("_")]
