import numpy as np
import pytest

from consensuslab import (
    ConfigurationError,
    NoiseProcess,
    StateVector,
    WeightSchedule,
    average_drift,
    laplacian,
    project,
    projected_system,
    read_trajectory_csv,
    simulate,
    transition_matrix,
)
from helpers import (
    alternating_schedule,
    empty_schedule,
    five_node_schedule,
    k2_schedule,
    k3_schedule,
    random_weights,
    weights,
)


class TestSimulate:
    def test_k2_closed_form(self):
        traj = simulate(k2_schedule(), [1.0, -1.0], 10.0, 0.01)
        expected = np.exp(-2.0 * traj.sample_times)
        assert np.abs(traj.states[:, 0] - expected).max() < 1e-9
        assert np.abs(traj.states[:, 1] + expected).max() < 1e-9

    def test_consensus_is_equilibrium(self):
        traj = simulate(alternating_schedule(), np.full(3, 2.5), 8.0, 0.1)
        assert np.abs(traj.states - 2.5).max() == 0.0

    def test_pure_integrator_under_noise(self):
        noise = NoiseProcess.table([0.0, 5.0], [[1.0, 0.0, 0.0]], zeta=1.0, energy_bound=1.0)
        traj = simulate(empty_schedule(3, horizon=5.0), [0.5, 0.0, 0.0], 5.0, 0.25, noise=noise)
        assert np.abs(traj.states[:, 0] - (0.5 + traj.sample_times)).max() < 1e-12
        assert np.abs(traj.states[:, 1:]).max() < 1e-12

    def test_samples_include_boundaries(self):
        traj = simulate(alternating_schedule(), [1.0, 0.0, -1.0], 4.0, 0.3)
        for boundary in (1.0, 2.0, 3.0):
            assert traj.index_at(boundary) is not None

    def test_noise_must_cover_horizon(self):
        noise = NoiseProcess.table([0.0, 2.0], [[0.1, 0.0]], zeta=1.0, energy_bound=1.0)
        with pytest.raises(ConfigurationError, match="cover"):
            simulate(k2_schedule(), [1.0, -1.0], 5.0, 0.1, noise=noise)

    def test_simpson_order_on_smooth_noise(self):
        # constant noise makes the convolution integrand smooth, so halving
        # the quadrature step must shrink the error ~16x (>= 8x asserted)
        sched = k2_schedule(horizon=3.0)
        noise = NoiseProcess.table([0.0, 3.0], [[0.3, -0.1]], zeta=1.0, energy_bound=0.2)
        x0 = [1.0, -1.0]

        def run(h):
            return simulate(sched, x0, 3.0, 0.5, noise=noise, noise_quad_step=h).states

        ref = run(0.5 / 64)
        err_coarse = np.abs(run(0.5 / 4) - ref).max()
        err_fine = np.abs(run(0.5 / 8) - ref).max()
        assert err_coarse > 1e-10  # error must be measurable for the ratio to mean anything
        assert err_coarse / err_fine >= 8.0


class TestAverageDrift:
    def test_noiseless_conservation(self):
        rng = np.random.default_rng(0)
        for sched in (k2_schedule(), alternating_schedule(), five_node_schedule()):
            x0 = rng.standard_normal(sched.node_count)
            traj = simulate(sched, x0, 10.0, 0.05)
            assert average_drift(traj) < 1e-9

    def test_mean_zero_noise(self):
        noise = NoiseProcess.table(
            [0.0, 10.0], [[0.2, -0.3, 0.1]], zeta=1.0, energy_bound=0.2
        )
        traj = simulate(alternating_schedule(), [1.0, 0.0, -1.0], 10.0, 0.1, noise=noise)
        assert average_drift(traj) < 1e-6

    def test_single_node_noise_drifts_linearly(self):
        noise = NoiseProcess.table([0.0, 1.0], [[1.0, 0.0, 0.0]], zeta=1.0, energy_bound=1.0)
        traj = simulate(empty_schedule(3, horizon=1.0), [0.0, 0.0, 0.0], 1.0, 0.1, noise=noise)
        drift_at_end = abs(traj.states[-1].mean() - traj.initial_average)
        assert drift_at_end == pytest.approx(1.0 / 3.0, abs=1e-12)


class TestTransitionMatrix:
    def test_identity_at_equal_times(self):
        tm = transition_matrix("raw", alternating_schedule(), 1.5, 1.5)
        assert np.array_equal(tm.entries, np.eye(3))

    def test_projected_at_equal_times_is_projector(self):
        tm = transition_matrix("projected", alternating_schedule(), 1.5, 1.5)
        assert np.allclose(tm.entries, np.eye(3) - np.ones((3, 3)) / 3)

    def test_raw_k2_spectral_formula(self):
        tm = transition_matrix("raw", k2_schedule(), 0.0, 1.0)
        e = np.exp(-2.0)
        expected = np.array([[(1 + e) / 2, (1 - e) / 2], [(1 - e) / 2, (1 + e) / 2]])
        assert np.abs(tm.entries - expected).max() < 1e-14

    def test_projected_exponential_decay(self):
        # constant connected graph: disagreement decays at the spectral gap,
        # so ||Phi_proj(t,0)|| = exp(-lambda2 t) (= 3 for unit-weight K3)
        sched = k3_schedule(horizon=20.0)
        ts = np.arange(1.0, 11.0)
        norms = [np.linalg.norm(transition_matrix("projected", sched, 0.0, t).entries, 2)
                 for t in ts]
        slope = np.polyfit(ts, np.log(norms), 1)[0]
        assert slope == pytest.approx(-3.0, abs=1e-9)

    def test_semigroup_property(self):
        sched = five_node_schedule()
        rng = np.random.default_rng(9)
        for _ in range(10):
            s, u, t = np.sort(rng.uniform(0.0, 6.0, size=3))
            for system in ("raw", "projected"):
                full = transition_matrix(system, sched, s, t).entries
                split = (transition_matrix(system, sched, u, t).entries
                         @ transition_matrix(system, sched, s, u).entries)
                assert np.abs(full - split).max() < 1e-9

    def test_projection_identity(self):
        sched = alternating_schedule()
        n = 3
        proj = np.eye(n) - np.ones((n, n)) / n
        phi = transition_matrix("projected", sched, 0.5, 4.0).entries
        assert np.abs(phi @ proj - phi).max() < 1e-9

    def test_window_outside_horizon(self):
        from consensuslab import HorizonError

        with pytest.raises(HorizonError):
            transition_matrix("raw", k2_schedule(horizon=5.0), 2.0, 7.0)

    def test_projector_commutes_with_laplacian(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            n = int(rng.integers(2, 7))
            lap = laplacian(random_weights(rng, n))
            proj = np.eye(n) - np.ones((n, n)) / n
            assert np.abs(proj @ lap - lap @ proj).max() < 1e-12


class TestProject:
    def test_annihilates_consensus(self):
        assert np.array_equal(project(np.full(4, 3.3)), np.zeros(4))

    def test_zero_mean_fixed_point(self):
        assert np.array_equal(project(np.array([1.0, -1.0])), [1.0, -1.0])

    def test_subtracts_mean(self):
        assert np.array_equal(project(np.array([3.0, 1.0, 2.0])), [1.0, -1.0, 0.0])


class TestProjectedSystem:
    def test_k2_drift(self):
        ps = projected_system(k2_schedule())
        assert np.allclose(ps.drift[0], -np.array([[1.5, -0.5], [-0.5, 1.5]]))

    def test_empty_graph_rank_one(self):
        ps = projected_system(empty_schedule(3))
        assert np.allclose(ps.drift[0], -np.ones((3, 3)) / 3)
        assert np.linalg.matrix_rank(ps.drift[0]) == 1

    def test_k3_spectrum(self):
        ps = projected_system(k3_schedule())
        assert np.allclose(np.linalg.eigvalsh(-ps.drift[0]), [1.0, 3.0, 3.0])

    def test_output_factor_identity(self):
        for sched in (k2_schedule(), five_node_schedule(), alternating_schedule()):
            ps = projected_system(sched)
            n = sched.node_count
            for k, seg in enumerate(sched.segments):
                target = laplacian(seg.weights) + np.ones((n, n)) / n
                d = ps.output_factor[k]
                assert np.abs(d @ d.T - target).max() < 1e-10

    def test_signed_segment_uses_symmetric_root(self):
        sched = WeightSchedule(
            [(0.0, 1.0, weights(3, (0, 1, 1.0), (0, 2, 1.0), (1, 2, -0.4)))]
        )
        ps = projected_system(sched)
        d = ps.output_factor[0]
        assert d.shape == (3, 3)
        target = laplacian(sched.segments[0].weights) + np.ones((3, 3)) / 3
        assert np.abs(d @ d.T - target).max() < 1e-10


class TestProjectedEquivalence:
    def test_projected_flow_matches_projected_trajectory(self):
        sched = alternating_schedule()
        rng = np.random.default_rng(12)
        x0 = rng.standard_normal(3)
        traj = simulate(sched, x0, 6.0, 0.5)
        y0 = project(x0)
        for idx, t in enumerate(traj.sample_times):
            phi = transition_matrix("projected", sched, 0.0, t).entries
            y_t = project(traj.states[idx])
            assert np.abs(phi @ y0 - y_t).max() < 1e-10
            assert np.linalg.norm(y_t) == pytest.approx(
                np.linalg.norm(traj.states[idx] - traj.states[idx].mean()), abs=1e-10
            )


class TestNoiseProcess:
    def test_windowed_random_energy_is_scaled(self):
        noise = NoiseProcess.windowed_random(3, zeta=1.0, energy_bound=1.0,
                                             seed=5, t_end=10.0)
        energies = noise.window_energies()
        assert len(energies) == 10
        assert np.allclose(energies, 0.95, atol=1e-12)

    def test_table_energy_violation(self):
        with pytest.raises(ConfigurationError, match="energy"):
            NoiseProcess.table([0.0, 1.0], [[2.0, 0.0]], zeta=1.0, energy_bound=1.0)

    def test_values_right_continuous(self):
        noise = NoiseProcess.table([0.0, 1.0, 2.0], [[1.0], [3.0]],
                                   zeta=1.0, energy_bound=9.0)
        assert noise.values_at(1.0)[0] == 3.0
        assert noise.values_at(0.999)[0] == 1.0

    def test_same_seed_reproducible(self):
        a = NoiseProcess.windowed_random(2, 1.0, 1.0, seed=7, t_end=5.0)
        b = NoiseProcess.windowed_random(2, 1.0, 1.0, seed=7, t_end=5.0)
        assert np.array_equal(a.values, b.values)


class TestTrajectoryCsv:
    def test_full_precision_roundtrip(self, tmp_path):
        traj = simulate(k2_schedule(), [1.0, -1.0], 2.0, 0.1)
        path = tmp_path / "traj.csv"
        traj.write_csv(path)
        back = read_trajectory_csv(path)
        assert np.array_equal(back.sample_times, traj.sample_times)
        assert np.array_equal(back.states, traj.states)

    def test_header(self, tmp_path):
        traj = simulate(k3_schedule(), [1.0, 0.0, -1.0], 1.0, 0.5)
        path = tmp_path / "traj.csv"
        traj.write_csv(path)
        assert path.read_text().splitlines()[0] == "t,x1,x2,x3"


def test_state_vector_rejects_nonfinite():
    with pytest.raises(ValueError):
        StateVector(0.0, [1.0, np.inf])
