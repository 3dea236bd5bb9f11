"""Simulator for multilevel quantum emitters in nanophotonic cavities and
waveguides: Lindblad dynamics, quantum-trajectory click streams, photon
correlation analysis, and entanglement figures of merit."""

from .hilbert import (
    DensityState,
    HilbertSpace,
    Operator,
    basis_state,
    destroy,
    embed,
    expectation,
    identity,
    ket_projector,
    partial_trace,
    tensor,
    transition,
)
from .dynamics import (
    CorrelationResult,
    IntegrationError,
    Jump,
    LindbladModel,
    SpectrumResult,
    SteadyStateError,
    ZeroFluxError,
    apply_timing_jitter,
    correlate_g2,
    emission_spectrum,
    evolve,
    g2_zero_delay,
    steady_state,
)
from .trajectories import (
    DetectionRecord,
    TrajectoryError,
    run_trajectories,
    trajectory_observables,
)
from .kernels import get_backend
from . import analysis, records, siv_models

__version__ = "0.1.0"
