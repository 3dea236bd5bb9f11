import numpy as np
import pytest
from scipy.stats import kstest

from sivsim.dynamics import Jump, LindbladModel, evolve, steady_state
from sivsim.hilbert import (
    DensityState,
    HilbertSpace,
    Operator,
    basis_state,
    expectation,
    transition,
)
from sivsim.trajectories import run_trajectories, trajectory_observables

TWO = HilbertSpace((2,))
SM = transition(2, 0, 1)
PE = transition(2, 1, 1)


def driven(gamma=0.4, rabi=2.0):
    h = Operator(TWO, 0.5 * rabi * (SM.matrix + SM.matrix.T))
    return LindbladModel(TWO, h, [Jump(SM, gamma, "ph")])


class TestClickStatistics:
    def test_no_jumps_no_clicks(self):
        m = LindbladModel(TWO, Operator(TWO, np.diag([0.0, 1.0])), [])
        rho0 = DensityState.from_ket(TWO, basis_state(TWO, 1))
        recs = run_trajectories(m, rho0, 10.0, 20, seed=1)
        assert all(len(r) == 0 for r in recs)

    def test_decay_gives_one_exponential_click(self):
        gamma = 0.8
        m = LindbladModel(TWO, Operator(TWO, np.zeros((2, 2))),
                          [Jump(SM, gamma, "ph")])
        rho0 = DensityState.from_ket(TWO, basis_state(TWO, 1))
        recs = run_trajectories(m, rho0, 20 / gamma, 10_000, seed=7, workers=4)
        assert all(len(r) == 1 for r in recs)
        times = np.concatenate([r.times for r in recs])
        assert kstest(times, "expon", args=(0, 1 / gamma)).pvalue > 0.01

    def test_click_times_ordered_and_bounded(self):
        m = driven()
        recs = run_trajectories(m, steady_state(m), 15.0, 50, seed=3)
        for r in recs:
            assert np.all(np.diff(r.times) > 0)
            assert r.times.size == 0 or (r.times.min() >= 0 and r.times.max() <= 15.0)

    def test_channel_labels_round_trip(self):
        m = LindbladModel(TWO, Operator(TWO, 0.5 * 2.0 * (SM.matrix + SM.matrix.T)),
                          [Jump(SM, 0.4, "down"), Jump(SM.dag(), 0.1, "up")])
        recs = run_trajectories(m, steady_state(m), 40.0, 30, seed=5)
        labels = {lab for r in recs for _, lab in r.clicks}
        assert labels <= {"down", "up"}
        r = recs[0]
        assert len(r.times_for("down")) + len(r.times_for("up")) == len(r)


class TestEnsembleAgreement:
    def test_matches_master_equation_within_5_sigma(self):
        m = driven()
        rho0 = DensityState.from_ket(TWO, basis_state(TWO, 0))
        ts = np.linspace(0, 8, 17)
        mean, err = trajectory_observables(m, rho0, 8.0, ts, [PE],
                                           n_traj=3000, seed=11, workers=4)
        exact = np.array([expectation(s, PE).real for s in evolve(m, rho0, ts)])
        dev = np.abs(mean[:, 0] - exact)
        tol = 5 * np.maximum(err[:, 0], 1e-12) + 1e-9
        assert np.all(dev < tol)

    def test_mixed_initial_state_sampling(self):
        m = driven()
        ss = steady_state(m)
        ts = np.linspace(0, 6, 7)
        mean, err = trajectory_observables(m, ss, 6.0, ts, [PE],
                                           n_traj=3000, seed=13, workers=4)
        exact = expectation(ss, PE).real
        assert np.all(np.abs(mean[:, 0] - exact) < 5 * err[:, 0] + 1e-9)


class TestReproducibility:
    def test_worker_count_irrelevant(self):
        m = driven()
        rho0 = steady_state(m)
        a = run_trajectories(m, rho0, 12.0, 40, seed=17, workers=1)
        b = run_trajectories(m, rho0, 12.0, 40, seed=17, workers=4)
        for ra, rb in zip(a, b):
            np.testing.assert_array_equal(ra.times, rb.times)
            np.testing.assert_array_equal(ra.channel_codes, rb.channel_codes)

    def test_seed_changes_records(self):
        m = driven()
        rho0 = steady_state(m)
        a = run_trajectories(m, rho0, 12.0, 10, seed=1)
        b = run_trajectories(m, rho0, 12.0, 10, seed=2)
        assert any(not np.array_equal(ra.times, rb.times) for ra, rb in zip(a, b))

    def test_first_id_offsets_streams(self):
        m = driven()
        rho0 = steady_state(m)
        a = run_trajectories(m, rho0, 12.0, 20, seed=9)
        b = run_trajectories(m, rho0, 12.0, 10, seed=9, first_id=10)
        for ra, rb in zip(a[10:], b):
            np.testing.assert_array_equal(ra.times, rb.times)
