"""Overlap, phase extraction, populations and series assembly."""

import math

import numpy as np
import pytest

from cascade_qed import (
    CompositeState,
    FieldSpec,
    SystemConfig,
    UndefinedPhaseError,
    dynamical_phase,
    dynamical_phase_resonant,
    evolve,
    geometric_phase,
    initial_state,
    overlap,
    pancharatnam_phase,
    populations,
    series_from_closed_form,
    series_from_trajectory,
    superposed_distribution,
    unwrap_with_gaps,
    wrap_angle,
)


def unit_state(seed=0, n_ph=4):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=(3, n_ph + 1)) + 1j * rng.normal(size=(3, n_ph + 1))
    amps /= np.linalg.norm(amps)
    return CompositeState(amps)


class TestOverlap:
    def test_self_overlap_is_one(self):
        psi = unit_state()
        z = overlap(psi, psi)
        assert z == pytest.approx(1.0 + 0.0j, abs=1e-14)

    def test_global_phase(self):
        psi = unit_state()
        rotated = CompositeState(1j * psi.amplitudes)
        z = overlap(psi, rotated)
        assert z == pytest.approx(1j, abs=1e-14)

    def test_orthogonal_states(self):
        a = np.zeros((3, 5), dtype=complex)
        a[0, 0] = 1.0
        b = np.zeros((3, 5), dtype=complex)
        b[1, 1] = 1.0
        z = overlap(CompositeState(a), CompositeState(b))
        assert z == 0.0
        with pytest.raises(UndefinedPhaseError):
            pancharatnam_phase(z)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            overlap(unit_state(n_ph=4), unit_state(n_ph=5))


class TestPancharatnamPhase:
    def test_examples(self):
        assert pancharatnam_phase(1.0 + 0.0j) == 0.0
        assert pancharatnam_phase(1j) == pytest.approx(math.pi / 2, abs=1e-15)
        # branch edge pinned to +pi
        assert pancharatnam_phase(-1.0 + 0.0j) == pytest.approx(math.pi, abs=1e-15)

    def test_below_floor_rejected(self):
        with pytest.raises(UndefinedPhaseError):
            pancharatnam_phase(1e-13 + 0.0j)


class TestWrapAndUnwrap:
    def test_wrap_interval(self):
        assert wrap_angle(math.pi) == pytest.approx(math.pi)
        assert wrap_angle(-math.pi) == pytest.approx(math.pi)
        assert wrap_angle(3.0 * math.pi) == pytest.approx(math.pi)
        assert wrap_angle(0.0) == 0.0
        grid = np.linspace(-10.0, 10.0, 401)
        wrapped = wrap_angle(grid)
        assert np.all(wrapped > -math.pi - 1e-12)
        assert np.all(wrapped <= math.pi + 1e-12)

    def test_unwrap_with_gaps(self):
        phi = np.array([0.0, 3.0, 6.0 - 2 * math.pi, np.nan, 0.5, 0.6])
        out = unwrap_with_gaps(phi)
        assert out[2] == pytest.approx(6.0)
        assert math.isnan(out[3])
        assert out[4] == 0.5 and out[5] == 0.6

    def test_unwrap_all_nan(self):
        phi = np.array([np.nan, np.nan])
        out = unwrap_with_gaps(phi)
        assert np.all(np.isnan(out))


class TestGeometricPhase:
    def test_zero_dynamical_returns_total(self):
        total = np.array([0.1, -0.2, 3.0])
        assert np.allclose(geometric_phase(total, np.zeros(3)), total)

    def test_pure_dynamical_negates(self):
        dyn = np.array([0.4, 1.0])
        out = geometric_phase(np.zeros(2), dyn)
        assert np.allclose(out, -dyn)

    def test_pi_minus_pi_is_zero(self):
        out = geometric_phase(np.array([math.pi]), np.array([math.pi]))
        assert out[0] == 0.0

    def test_wraps_into_interval(self):
        out = geometric_phase(np.array([3.0]), np.array([-3.0]))
        assert -math.pi < out[0] <= math.pi

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            geometric_phase(np.zeros(3), np.zeros(4))


class TestPopulations:
    def test_sum_to_one(self):
        rho = populations(unit_state(seed=2))
        assert sum(rho) == pytest.approx(1.0, abs=1e-12)


class TestDynamicalPhase:
    def make_run(self, theta, dt=5e-4, alpha=5.0, tau_max=2.0 * math.pi, p=1):
        cfg = SystemConfig(
            field=FieldSpec(alpha=alpha, r=0.0), delta=0.0, theta=theta, p=p,
            tau_max=tau_max, n_steps=81, dt_internal=dt,
        )
        dist = superposed_distribution(cfg.field)
        traj = evolve(initial_state(cfg, dist), cfg)
        return cfg, dist, traj

    def test_theta_zero_identically_zero(self):
        _, _, traj = self.make_run(theta=0.0, dt=2e-3)
        phi = dynamical_phase(traj)
        assert np.max(np.abs(phi)) < 1e-12

    def test_quadrature_matches_resonant_closed_form(self):
        cfg, dist, traj = self.make_run(theta=math.pi / 4)
        numeric = dynamical_phase(traj)
        closed = dynamical_phase_resonant(traj.taus, cfg, dist)
        assert np.max(np.abs(numeric - closed)) < 1e-6

    def test_stationary_state_has_zero_phase(self):
        # all weight on the decoupled ground-vacuum state: H acts as zero
        amps = np.zeros((3, 4), dtype=complex)
        amps[2, 0] = 1.0
        cfg = SystemConfig(
            field=FieldSpec(alpha=1.0, r=0.0), delta=0.0, theta=0.0,
            tau_max=2.0, n_steps=21, dt_internal=1e-2,
        )
        traj = evolve(CompositeState(amps), cfg)
        assert np.max(np.abs(dynamical_phase(traj))) == 0.0
        assert np.max(np.abs(traj.states[-1] - traj.states[0])) == 0.0


class TestSeriesAssembly:
    def test_numeric_series_invariants(self):
        cfg = SystemConfig(
            field=FieldSpec(alpha=5.0, r=0.0), delta=0.0, theta=math.pi / 4,
            p=1, tau_max=4.0 * math.pi, n_steps=201,
        )
        dist = superposed_distribution(cfg.field)
        series = series_from_trajectory(evolve(initial_state(cfg, dist), cfg))
        assert np.all(series.x**2 + series.y**2 <= 1.0 + 1e-9)
        assert np.max(np.abs(series.rho11 + series.rho22 + series.rho33 - 1.0)) < 1e-9
        finite = np.isfinite(series.phi_pancharatnam)
        assert np.all(np.abs(series.phi_pancharatnam[finite]) <= math.pi + 1e-12)
        assert np.all(np.abs(series.phi_arcsin[np.isfinite(series.phi_arcsin)])
                      <= math.pi / 2 + 1e-12)
        # branch consistency where the overlap sits in the right half plane
        mask = (series.x > 0.0) & (np.hypot(series.x, series.y) > 1e-6)
        assert np.max(np.abs(series.phi_pancharatnam[mask] + series.phi_arcsin[mask])) < 1e-9

    def test_closed_form_series_gaps(self):
        cfg = SystemConfig(
            field=FieldSpec(alpha=3.0, r=0.0), delta=0.0, theta=0.5,
            p=1, tau_max=6.0, n_steps=64,
        )
        dist = superposed_distribution(cfg.field)
        series = series_from_closed_form(cfg, dist)
        assert np.all(np.isnan(series.rho11))
        assert np.all(np.isnan(series.norm_error))
        assert np.all(np.isfinite(series.x))
        assert len(series.tau) == 64

    def test_engines_agree_on_phases(self):
        cfg = SystemConfig(
            field=FieldSpec(alpha=5.0, r=0.0), delta=0.0, theta=math.pi / 4,
            p=1, tau_max=2.0 * math.pi, n_steps=101, dt_internal=5e-4,
        )
        dist = superposed_distribution(cfg.field)
        numeric = series_from_trajectory(evolve(initial_state(cfg, dist), cfg))
        analytic = series_from_closed_form(cfg, dist)
        assert np.max(np.abs(numeric.x - analytic.x)) < 1e-6
        assert np.max(np.abs(numeric.y - analytic.y)) < 1e-6
        assert np.nanmax(np.abs(numeric.phi_arcsin - analytic.phi_arcsin)) < 1e-5
        assert np.max(np.abs(numeric.phi_dynamical - analytic.phi_dynamical)) < 1e-5

    def test_edge_term_visible_at_small_alpha(self):
        # the closed form drops the middle-level vacuum rung; at alpha=1
        # that term carries q_0^2 = e^-1 of weight, so the two routes must
        # disagree measurably, yet never by more than twice that weight
        cfg = SystemConfig(
            field=FieldSpec(alpha=1.0, r=0.0), delta=0.0, theta=math.pi / 4,
            p=1, tau_max=2.0 * math.pi, n_steps=201,
        )
        dist = superposed_distribution(cfg.field)
        numeric = series_from_trajectory(evolve(initial_state(cfg, dist), cfg))
        analytic = series_from_closed_form(cfg, dist)
        dev = np.abs((numeric.x - analytic.x) + 1j * (numeric.y - analytic.y))
        assert np.max(dev) > 1e-3
        assert np.max(dev) < 2.0 * math.exp(-1.0)

    def test_gap_marking_on_synthetic_orthogonal_state(self):
        from cascade_qed.evolver import Trajectory

        a = np.zeros((2, 3, 4), dtype=complex)
        a[0, 0, 0] = 1.0
        a[1, 1, 1] = 1.0  # orthogonal to the initial state
        traj = Trajectory(
            taus=np.array([0.0, 1.0]),
            states=a,
            expectation_V=np.zeros(2),
            h_expectation=np.zeros(2),
            norm_error=np.zeros(2),
            fine_taus=np.array([0.0, 1.0]),
            fine_h_expectation=np.zeros(2),
            output_indices=np.array([0, 1]),
        )
        series = series_from_trajectory(traj)
        assert math.isnan(series.phi_pancharatnam[1])
        assert math.isnan(series.phi_geometric[1])
        assert math.isnan(series.phi_arcsin[1])
        assert series.phi_pancharatnam[0] == 0.0
