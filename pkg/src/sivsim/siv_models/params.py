"""Physical parameter records for the emitter, cavity, drives and waveguide.

All frequencies are ordinary frequencies in GHz (the builders multiply by
2*pi), times in ns, temperatures in K. Defaults follow the measured
device values; ``gamma`` defaults to the cavity-detuned optical linewidth
298 MHz. The |e> -> |c| vs |e> -> |u> branching and the pure optical
dephasing are not independently measured, so they are exposed as
parameters with documented defaults rather than asserted constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import scipy.constants as _sc

__all__ = ["SivParams", "CavityParams", "GatePulse", "DriveParams",
           "WaveguideParams", "thermal_rates"]

# levels of the three-level emitter, used everywhere downstream
LEVEL_C, LEVEL_U, LEVEL_E = 0, 1, 2


@dataclass(frozen=True)
class SivParams:
    """Three-level emitter: metastable |c>, |u> and optically excited |e>."""

    gamma: float = 0.298            # optical linewidth gamma/2pi, GHz
    orbital_splitting: float = 64.0  # |u> above |c>, GHz
    tau0: float = 10.0              # orbital depolarization time, ns
    temperature: float = 4.0        # K
    branching_ce: float = 0.9       # fraction of |e> decay ending in |c>
    dephasing: float = 0.1          # extra optical linewidth (FWHM), GHz
    nonradiative: float = 0.0       # dark fraction of gamma

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.tau0 <= 0:
            raise ValueError("tau0 must be > 0")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if not 0 < self.branching_ce <= 1:
            raise ValueError("branching_ce must be in (0, 1]")
        if self.dephasing < 0:
            raise ValueError("dephasing must be >= 0")
        if not 0 <= self.nonradiative < 1:
            raise ValueError("nonradiative must be in [0, 1)")


@dataclass(frozen=True)
class CavityParams:
    g: float = 2.1                  # single-photon Rabi frequency g/2pi, GHz
    kappa: float = 57.0             # cavity intensity decay kappa/2pi, GHz
    kappa_wg_fraction: float = 0.85  # share of kappa into the detected waveguide
    detuning_cavity: float = 0.0    # cavity minus emitter |c>-|e> frequency, GHz
    fock_cutoff: int = 4

    def __post_init__(self):
        if self.g < 0 or self.kappa < 0:
            raise ValueError("g and kappa must be >= 0")
        if not 0 <= self.kappa_wg_fraction <= 1:
            raise ValueError("kappa_wg_fraction must be in [0, 1]")
        if self.fock_cutoff < 2:
            raise ValueError("fock_cutoff must be >= 2")


@dataclass(frozen=True)
class GatePulse:
    """Optical pumping pulse that initializes |u> or |c>."""

    target: str                     # "u" or "c"
    duration: float = 30.0          # ns
    strength: float = 1.0           # free-space Rabi amplitude, GHz

    def __post_init__(self):
        if self.target not in ("u", "c"):
            raise ValueError("gate target must be 'u' or 'c'")
        if self.duration <= 0:
            raise ValueError("gate duration must be > 0")
        if self.strength <= 0:
            raise ValueError("gate strength must be > 0")


@dataclass(frozen=True)
class DriveParams:
    """Probe settings.

    For the cavity scenarios ``probe_freq`` is the probe offset from the
    bare |c>-|e> resonance and ``probe_flux`` the photon flux (1/ns) at
    the cavity input. For free-space waveguide drives ``probe_freq`` is
    the single-photon detuning and ``probe_flux`` the Rabi amplitude in
    GHz.
    """

    probe_freq: float = 0.0
    probe_flux: float = 1e-4
    gate: GatePulse | None = None

    def __post_init__(self):
        if self.probe_flux < 0:
            raise ValueError("probe_flux must be >= 0")


@dataclass(frozen=True)
class WaveguideParams:
    gamma_1d: float = 0.1           # |e>->|c> decay into the waveguide, GHz
    phase_phi: float = 0.0          # propagation plus laser phase, rad
    delta_rel: float = 0.0          # relative Raman detuning of the two emitters, GHz
    drive1: DriveParams = field(default_factory=lambda: DriveParams(
        probe_freq=2.0, probe_flux=0.05))
    drive2: DriveParams | None = None   # defaults to drive1
    collection_efficiency: float = 1.0

    def __post_init__(self):
        if self.gamma_1d < 0:
            raise ValueError("gamma_1d must be >= 0")
        if not 0 <= self.collection_efficiency <= 1:
            raise ValueError("collection_efficiency must be in [0, 1]")

    @property
    def drive2_or_default(self) -> DriveParams:
        return self.drive2 if self.drive2 is not None else self.drive1


def thermal_rates(siv: SivParams) -> tuple[float, float]:
    """Orbital flip rates (up: c->u, down: u->c) in 1/ns.

    Detailed balance at ``temperature`` with total depolarization rate
    1/tau0, i.e. rate_up + rate_down = 1/tau0 and rate_up/rate_down =
    exp(-h nu_uc / k_B T).
    """
    boltz = float(_sc.h * siv.orbital_splitting * 1e9
                  / (_sc.k * siv.temperature))
    f = math.exp(-boltz)
    total = 1.0 / siv.tau0
    rate_up = total * f / (1.0 + f)
    rate_down = total / (1.0 + f)
    return rate_up, rate_down
