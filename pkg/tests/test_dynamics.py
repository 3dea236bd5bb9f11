import numpy as np
import pytest
import scipy.linalg

from sivsim.dynamics import (
    CorrelationResult,
    IntegrationError,
    Jump,
    LindbladModel,
    SteadyStateError,
    ZeroFluxError,
    apply_timing_jitter,
    correlate_g2,
    emission_spectrum,
    evolve,
    g2_zero_delay,
    liouvillian_matrix,
    steady_state,
)
from sivsim.hilbert import (
    DensityState,
    HilbertSpace,
    Operator,
    basis_state,
    destroy,
    embed,
    expectation,
    transition,
)

TWO = HilbertSpace((2,))
SM = transition(2, 0, 1)      # |g><e|
PE = transition(2, 1, 1)


def two_level(gamma=1.0, rabi=0.0, detuning=0.0):
    h = detuning * PE.matrix + 0.5 * rabi * (SM.matrix + SM.matrix.T)
    return LindbladModel(TWO, Operator(TWO, h), [Jump(SM, gamma, "decay")])


def random_model(rng, dims=(3,), n_jumps=2, rate_scale=1.0):
    space = HilbertSpace(dims)
    d = space.total_dim
    h = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = 0.5 * (h + h.conj().T)
    jumps = []
    for k in range(n_jumps):
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        jumps.append(Jump(Operator(space, a / np.max(np.abs(a))),
                          rate_scale * rng.uniform(0.1, 1.0), f"ch{k}"))
    return LindbladModel(space, Operator(space, h), jumps)


class TestModelValidation:
    def test_non_hermitian_rejected(self):
        h = np.array([[0, 1], [0, 0]], dtype=complex)
        with pytest.raises(ValueError, match="Hermitian"):
            LindbladModel(TWO, Operator(TWO, h), [])

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError, match="negative rate"):
            LindbladModel(TWO, Operator(TWO, np.zeros((2, 2))),
                          [Jump(SM, -0.1, "x")])

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            LindbladModel(TWO, Operator(TWO, np.zeros((2, 2))),
                          [Jump(SM, 0.1, "x"), Jump(SM.dag(), 0.1, "x")])

    def test_liouvillian_matches_direct_rhs(self):
        rng = np.random.default_rng(11)
        m = random_model(rng, dims=(2, 2))
        rho = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = rho @ rho.conj().T
        rho /= np.trace(rho)
        h = m.hamiltonian.matrix
        rhs = -1j * (h @ rho - rho @ h)
        for j in m.jumps:
            a = j.operator.matrix
            ada = a.conj().T @ a
            rhs += j.rate * (a @ rho @ a.conj().T
                             - 0.5 * (ada @ rho + rho @ ada))
        np.testing.assert_allclose((m.liouvillian @ rho.ravel()).reshape(4, 4),
                                   rhs, atol=1e-12)


class TestEvolve:
    def test_free_evolution_is_identity(self):
        m = LindbladModel(TWO, Operator(TWO, np.zeros((2, 2))), [])
        rho0 = DensityState.from_ket(TWO, (basis_state(TWO, 0) + basis_state(TWO, 1)) / np.sqrt(2))
        for s in evolve(m, rho0, np.linspace(0, 10, 5)):
            np.testing.assert_allclose(s.rho, rho0.rho, atol=1e-10)

    def test_analytic_decay(self):
        gamma = 0.9
        m = two_level(gamma=gamma)
        rho0 = DensityState.from_ket(TWO, basis_state(TWO, 1))
        t = np.array([0.0, 0.5, 1 / gamma, 3.0])
        states = evolve(m, rho0, t)
        pe = [expectation(s, PE).real for s in states]
        np.testing.assert_allclose(pe, np.exp(-gamma * t), atol=1e-6)

    def test_rabi_frequency_recovered(self):
        # damped Rabi oscillation: population oscillates at Omega within 1%
        omega, gamma = 12.0, 0.1
        m = two_level(gamma=gamma, rabi=omega)
        rho0 = DensityState.from_ket(TWO, basis_state(TWO, 0))
        t = np.linspace(0, 4 * np.pi / omega, 2001)
        pe = np.array([expectation(s, PE).real
                       for s in evolve(m, rho0, t)])
        # period from the first two maxima
        from scipy.signal import argrelmax
        peaks = argrelmax(pe)[0]
        period = t[peaks[1]] - t[peaks[0]]
        assert abs(2 * np.pi / period - omega) / omega < 0.01

    def test_matrix_exponential_oracle(self):
        # dimensions <= 9: evolve agrees with expm of the Liouvillian to 1e-7
        rng = np.random.default_rng(21)
        for dims in [(2,), (3,), (2, 2), (3, 3)]:
            m = random_model(rng, dims=dims)
            d = m.dim
            rho0 = np.eye(d, dtype=complex) / d
            t = np.linspace(0, 3, 4)
            states = evolve(m, DensityState(m.space, rho0), t)
            for ti, s in zip(t, states):
                exact = (scipy.linalg.expm(m.liouvillian * ti) @ rho0.ravel()).reshape(d, d)
                assert np.max(np.abs(s.rho - exact)) < 1e-7

    def test_trace_hermiticity_positivity_preserved(self):
        rng = np.random.default_rng(31)
        m = random_model(rng, dims=(3,), n_jumps=3)
        rho0 = DensityState.from_ket(m.space, basis_state(m.space, 2))
        for s in evolve(m, rho0, np.linspace(0, 8, 17)):
            assert abs(np.trace(s.rho) - 1) <= 1e-8
            assert np.max(np.abs(s.rho - s.rho.conj().T)) <= 1e-9
            assert np.linalg.eigvalsh(s.rho).min() >= -1e-7

    def test_grid_validation(self):
        m = two_level()
        rho0 = DensityState.from_ket(TWO, basis_state(TWO, 1))
        with pytest.raises(ValueError):
            evolve(m, rho0, [1.0, 2.0])
        with pytest.raises(ValueError):
            evolve(m, rho0, [0.0, 2.0, 1.0])


class TestSteadyState:
    def test_undriven_decay_gives_ground(self):
        ss = steady_state(two_level(gamma=0.5))
        np.testing.assert_allclose(ss.rho, np.diag([1.0, 0.0]), atol=1e-12)

    def test_detailed_balance(self):
        down, up = 0.7, 0.3
        m = LindbladModel(TWO, Operator(TWO, np.zeros((2, 2))),
                          [Jump(SM, down, "dn"), Jump(SM.dag(), up, "up")])
        ss = steady_state(m)
        assert np.isclose(expectation(ss, PE).real, up / (up + down), atol=1e-12)

    def test_boltzmann_64ghz_4k(self):
        # orbital pair split by 64 GHz at 4 K; independent Boltzmann oracle
        import scipy.constants as sc
        f = np.exp(-sc.h * 64e9 / (sc.k * 4.0))
        p_c = 1.0 / (1.0 + f)
        rate = 0.1  # total depolarization 1/tau0
        m = LindbladModel(TWO, Operator(TWO, np.zeros((2, 2))),
                          [Jump(SM, rate / (1 + f), "dn"),
                           Jump(SM.dag(), rate * f / (1 + f), "up")])
        ss = steady_state(m)
        assert abs(expectation(ss, transition(2, 0, 0)).real - p_c) < 1e-9
        assert abs(p_c - 0.683) < 0.001  # anchor: approximately 65-68%

    def test_degenerate_kernel_reports_dimension(self):
        m = LindbladModel(TWO, Operator(TWO, np.diag([0.0, 1.0])), [])
        with pytest.raises(SteadyStateError, match="dimension 2"):
            steady_state(m)

    def test_residual_small(self):
        rng = np.random.default_rng(41)
        m = random_model(rng, dims=(3,))
        ss = steady_state(m)
        assert np.max(np.abs(m.liouvillian @ ss.rho.ravel())) < 1e-10
        assert np.isclose(np.trace(ss.rho), 1.0)


class TestCorrelations:
    def test_single_emitter_antibunching(self):
        m = two_level(gamma=1.0, rabi=0.08)
        res = correlate_g2(m, SM, SM, np.array([0.0]))
        assert res.g2[0] <= 1e-10
        assert g2_zero_delay(m, SM, SM) <= 1e-12

    def test_coherent_cavity_flat_g2(self):
        fock = HilbertSpace((6,))
        a = destroy(6)
        h = Operator(fock, 0.3 * (a.matrix + a.matrix.conj().T))
        m = LindbladModel(fock, h, [Jump(a, 2.0, "out")])
        taus = np.linspace(-3, 3, 13)
        res = correlate_g2(m, a, a, taus)
        np.testing.assert_allclose(res.g2, 1.0, atol=1e-4)

    def test_regression_matches_fourth_moment_at_zero(self):
        rng = np.random.default_rng(51)
        for _ in range(3):
            m = random_model(rng, dims=(3,), n_jumps=2)
            a = m.jumps[0].operator
            b = m.jumps[1].operator
            try:
                direct = g2_zero_delay(m, a, b)
            except ZeroFluxError:
                continue
            res = correlate_g2(m, a, b, np.array([0.0]))
            assert abs(res.g2[0] - direct) < 1e-9

    def test_cross_correlation_antisymmetry(self):
        # channels on different subsystems (the physical case: their
        # operators commute at equal times)
        rng = np.random.default_rng(61)
        space = HilbertSpace((2, 2))
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = 0.5 * (h + h.conj().T)
        low = Operator(HilbertSpace((2,)), np.array([[0, 1], [0, 0]], dtype=complex))
        a = embed(low, 0, space)
        b = embed(low, 1, space)
        m = LindbladModel(space, Operator(space, h),
                          [Jump(a, 0.6, "a"), Jump(b, 0.9, "b")])
        taus = np.linspace(-4, 4, 17)
        ab = correlate_g2(m, a, b, taus)
        ba = correlate_g2(m, b, a, taus)
        np.testing.assert_allclose(ab.g2, ba.g2[::-1], atol=1e-8)

    def test_autocorrelation_symmetric(self):
        m = two_level(gamma=1.0, rabi=0.4)
        taus = np.linspace(-5, 5, 21)
        res = correlate_g2(m, SM, SM, taus)
        np.testing.assert_allclose(res.g2, res.g2[::-1], atol=1e-8)

    def test_zero_flux_raises(self):
        m = two_level(gamma=1.0)  # undriven: no steady emission
        with pytest.raises(ZeroFluxError, match="zero flux"):
            correlate_g2(m, SM, SM, np.array([0.0]))

    def test_g2_never_negative(self):
        with pytest.raises(ValueError):
            CorrelationResult(np.array([0.0]), np.array([-0.5]),
                              np.array([0.0]), 1.0)

    def test_timing_jitter_smooths_dip(self):
        m = two_level(gamma=1.0, rabi=0.15)
        taus = np.linspace(-8, 8, 161)
        res = correlate_g2(m, SM, SM, taus)
        blurred = apply_timing_jitter(res, sigma=0.5)
        assert blurred.g2[80] > res.g2[80]  # dip partially filled
        assert blurred.metadata["timing_jitter_sigma_ns"] == 0.5


class TestSpectrum:
    def test_coherent_tone_through_filter(self):
        # weakly driven empty cavity: single line at the drive frequency
        # whose width is set by the filter
        fock = HilbertSpace((5,))
        a = destroy(5)
        h = Operator(fock, 2 * np.pi * 1.5 * (a.dag() @ a).matrix
                     + 0.1 * (a.matrix + a.matrix.conj().T))
        m = LindbladModel(fock, h, [Jump(a, 2.0, "out")])
        nu = np.linspace(-1, 1, 801)
        res = emission_spectrum(m, a, nu, filter_fwhm=0.15)
        peak = nu[np.argmax(res.values)]
        assert abs(peak) < 0.01
        half = res.values.max() / 2
        above = nu[res.values > half]
        assert abs((above.max() - above.min()) - 0.15) < 0.01

    def test_unfiltered_coherent_component_rejected(self):
        fock = HilbertSpace((5,))
        a = destroy(5)
        h = Operator(fock, 0.1 * (a.matrix + a.matrix.conj().T))
        m = LindbladModel(fock, h, [Jump(a, 2.0, "out")])
        with pytest.raises(ZeroFluxError, match="non-decaying"):
            emission_spectrum(m, a, np.linspace(-1, 1, 11))

    def test_zero_flux_raises(self):
        m = two_level(gamma=1.0)
        with pytest.raises(ZeroFluxError):
            emission_spectrum(m, SM, np.linspace(-1, 1, 5))

    def test_eig_and_time_paths_agree(self):
        fock = HilbertSpace((5,))
        a = destroy(5)
        h = Operator(fock, 2 * np.pi * 0.8 * (a.dag() @ a).matrix
                     + 0.05 * (a.matrix + a.matrix.conj().T))
        m = LindbladModel(fock, h, [Jump(a, 1.5, "out")])
        nu = np.linspace(-0.5, 0.5, 101)
        r_eig = emission_spectrum(m, a, nu, filter_fwhm=0.1)
        r_time = emission_spectrum(m, a, nu, filter_fwhm=0.1, method="time")
        assert r_eig.metadata["method"] == "eig"
        assert r_time.metadata["method"] == "time"
        dev = np.max(np.abs(r_eig.values - r_time.values)) / r_eig.values.max()
        assert dev < 1e-3

    def test_nonnegative_within_tolerance(self):
        fock = HilbertSpace((5,))
        a = destroy(5)
        h = Operator(fock, 2 * np.pi * 0.8 * (a.dag() @ a).matrix
                     + 0.05 * (a.matrix + a.matrix.conj().T))
        m = LindbladModel(fock, h, [Jump(a, 1.5, "out")])
        res = emission_spectrum(m, a, np.linspace(-3, 3, 301), filter_fwhm=0.05)
        assert res.values.min() > -1e-9 * res.values.max()
