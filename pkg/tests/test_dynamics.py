import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nucdecay.couplings import (CouplingKernel, central_site,
                                coupling_parameter_finite,
                                coupling_parameter_infinite,
                                pair_coupling_conjugate)
from nucdecay.dynamics import (EnsembleState, ExcitationSpec, ReducedState,
                               analytic_phase, analytic_population, init_state,
                               integrate, low_excitation_rates, rhs_finite,
                               rhs_reduced, simulate_finite, simulate_reduced)
from nucdecay.errors import ConfigError

from oracles import integrate_magnitude_phase


class TestInitState:
    def test_ground_state(self):
        state = init_state(ExcitationSpec(0.0), 4)
        assert np.all(state.coherences == 0) and np.all(state.populations == 0)

    def test_full_inversion(self):
        state = init_state(ExcitationSpec(math.pi), 3)
        assert np.allclose(state.populations, 1.0)
        assert np.max(np.abs(state.coherences)) < 1e-16

    def test_half_pulse(self):
        state = init_state(ExcitationSpec(math.pi / 2))
        assert isinstance(state, ReducedState)
        assert abs(state.population - 0.5) < 1e-15
        assert abs(state.coherence_magnitude - 0.5) < 1e-15

    def test_pulse_area_range(self):
        with pytest.raises(ConfigError):
            ExcitationSpec(-0.1)
        with pytest.raises(ConfigError):
            ExcitationSpec(math.pi + 0.1)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(min_value=0.0, max_value=math.pi))
    def test_coherence_population_identity(self, area):
        exc = ExcitationSpec(area)
        s2 = exc.initial_coherence ** 2
        p = exc.initial_population
        assert abs(s2 - p * (1.0 - p)) < 1e-15

    def test_site_phases(self, geom_50mrad):
        exc = ExcitationSpec.from_geometry(0.3 * math.pi, geom_50mrad, global_phase=0.2)
        state = init_state(exc, 5)
        rel = np.angle(state.coherences[1:] / state.coherences[:-1])
        step = math.remainder(geom_50mrad.phase_step, 2 * math.pi)
        assert np.allclose(rel, step, atol=1e-12)


class TestFiniteRhs:
    def test_single_site_bare_decay(self, geom_5mrad, fe57):
        kernel = CouplingKernel(geom_5mrad, fe57, 1)
        state = EnsembleState(0.0, np.array([0.3 + 0.1j]), np.array([0.4]))
        ds, dp = rhs_finite(state, kernel)
        assert abs(ds[0] - (-0.5 * (0.3 + 0.1j))) < 1e-16
        assert abs(dp[0] - (-0.4)) < 1e-16

    def test_no_coherence_builds_none(self, geom_5mrad, fe57):
        kernel = CouplingKernel(geom_5mrad, fe57, 6)
        state = EnsembleState(0.0, np.zeros(6, complex), np.full(6, 0.9))
        ds, dp = rhs_finite(state, kernel)
        assert np.all(ds == 0)
        assert np.allclose(dp, -0.9)

    def test_two_site_low_excitation_rate(self, geom_50mrad, fe57):
        # instantaneous |s| decay rate at t=0 against the linearized value
        kernel = CouplingKernel(geom_50mrad, fe57, 2)
        exc = ExcitationSpec.from_geometry(1e-5 * math.pi, geom_50mrad)
        state = init_state(exc, 2)
        ds, _ = rhs_finite(state, kernel)
        rate = -np.real(ds[0] / state.coherences[0])
        c1 = pair_coupling_conjugate(geom_50mrad, fe57, 1)
        step = geom_50mrad.phase_step
        expected = 0.5 + np.real(c1 * np.exp(1j * step))
        assert abs(rate - expected) < 1e-9

    def test_two_site_symmetric_mode_decay(self, geom_no_step, fe57):
        # zero phase step: the initial state is the symmetric eigenmode
        c1 = pair_coupling_conjugate(geom_no_step, fe57, 1)
        expected_rate, _ = low_excitation_rates(c1 + 0j)
        traj = simulate_finite(geom_no_step, fe57, 1e-5 * math.pi, 2,
                               t_end=3.0, grid=np.linspace(0, 3, 200), rtol=1e-11)
        coh = np.abs(traj.coherences[:, 0])
        fit = -np.polyfit(traj.times, np.log(coh), 1)[0]
        assert abs(fit - expected_rate) < 1e-6 * expected_rate


class TestReducedRhs:
    def test_uncoupled_exponentials(self, geom_5mrad, fe57):
        traj = simulate_reduced(geom_5mrad, fe57, 0.3 * math.pi,
                                coupling=0j, t_end=4.0)
        t = traj.times
        p0 = math.sin(0.15 * math.pi) ** 2
        s0 = math.sin(0.15 * math.pi) * math.cos(0.15 * math.pi)
        assert np.max(np.abs(traj.population - p0 * np.exp(-t))) < 1e-10
        assert np.max(np.abs(traj.coherence_abs - s0 * np.exp(-0.5 * t))) < 1e-10
        assert np.max(np.abs(traj.phase)) < 1e-12

    def test_phase_stalls_at_half_inversion(self, fe57):
        state = ReducedState(0.0, 0.5, 0.0, 0.5)
        _, dphi, _ = rhs_reduced(state, complex(0.01, -0.05), fe57)
        assert dphi == 0.0

    def test_population_coupling_is_quadratic_in_coherence(self, fe57):
        k = complex(0.02, -0.01)
        d1 = rhs_reduced(ReducedState(0.0, 0.1, 0.0, 0.0), k, fe57)[2]
        d2 = rhs_reduced(ReducedState(0.0, 0.2, 0.0, 0.0), k, fe57)[2]
        assert abs(d2 / d1 - 4.0) < 1e-12


class TestIntegrate:
    def test_single_nucleus_exact(self, geom_5mrad, fe57):
        traj = simulate_finite(geom_5mrad, fe57, 0.5 * math.pi, 1, rtol=1e-11)
        p_ref = analytic_population(traj.times, 0.5 * math.pi)
        s_ref = 0.5 * np.exp(-0.5 * traj.times)
        assert np.max(np.abs(traj.populations[:, 0] - p_ref) / p_ref) < 1e-8
        assert np.max(np.abs(np.abs(traj.coherences[:, 0]) - s_ref) / s_ref) < 1e-8

    def test_reduced_population_decouples_without_kr(self, geom_5mrad, fe57):
        traj = simulate_reduced(geom_5mrad, fe57, 0.7 * math.pi, coupling=0.03j)
        p_ref = analytic_population(traj.times, 0.7 * math.pi)
        assert np.max(np.abs(traj.population - p_ref)) < 1e-10

    def test_self_convergence(self, geom_5mrad, fe57):
        k = coupling_parameter_infinite(geom_5mrad, fe57)
        tight = simulate_reduced(geom_5mrad, fe57, 0.5 * math.pi, coupling=k, rtol=1e-10)
        loose = simulate_reduced(geom_5mrad, fe57, 0.5 * math.pi, coupling=k, rtol=1e-8)
        for name in ("coherence_abs", "phase", "population"):
            assert np.max(np.abs(tight.series(name) - loose.series(name))) < 1e-7

    def test_parameter_validation(self, geom_5mrad, fe57):
        with pytest.raises(ConfigError):
            simulate_reduced(geom_5mrad, fe57, 0.5, t_end=-1.0)
        with pytest.raises(ConfigError):
            simulate_reduced(geom_5mrad, fe57, 0.5, rtol=1e-2)
        with pytest.raises(ConfigError):
            integrate(lambda s: s, init_state(ExcitationSpec(0.5)), 1.0,
                      grid=np.array([0.0, 0.0, 1.0]))

    def test_fixed_step_deterministic(self, geom_5mrad, fe57):
        runs = [simulate_reduced(geom_5mrad, fe57, 0.5 * math.pi, method="rk4",
                                 grid=np.linspace(0, 2, 300))
                for _ in range(2)]
        assert np.array_equal(runs[0].phase, runs[1].phase)
        assert np.array_equal(runs[0].population, runs[1].population)

    def test_no_warnings_on_default_runs(self, geom_5mrad, fe57):
        traj = simulate_finite(geom_5mrad, fe57, 0.5 * math.pi, 8, t_end=2.0)
        assert traj.warnings == []


class TestClosedForms:
    def test_phase_linear_at_zero_area(self):
        t = np.linspace(0, 5, 50)
        assert np.allclose(analytic_phase(t, 0.03, 0.0, phi0=0.2), -0.03 * t + 0.2)

    def test_phase_at_origin(self):
        assert analytic_phase(0.0, 0.5, 2.0, phi0=0.7) == pytest.approx(0.7)

    def test_late_time_offset(self):
        # slope returns to -K'' with a residual offset 2 K'' sin^2(A/2) / G
        k_imag, area = -0.06, 0.6 * math.pi
        t = 60.0
        offset = analytic_phase(t, k_imag, area) - (-k_imag * t)
        assert abs(offset - k_imag * 2.0 * math.sin(area / 2) ** 2) < 1e-12

    def test_population_values(self):
        assert analytic_population(0.0, math.pi) == pytest.approx(1.0)
        assert analytic_population(1.0, 0.5 * math.pi) == pytest.approx(0.5 / math.e)
        exc = ExcitationSpec(0.37 * math.pi)
        assert analytic_population(0.0, exc.pulse_area) == pytest.approx(
            exc.initial_population)

    def test_low_excitation_rates(self):
        assert low_excitation_rates(0j) == (0.5, 0.0)
        rate, slope = low_excitation_rates(complex(0.02, -0.05), 1.0)
        assert rate > 0.5  # superradiant broadening for positive K'
        assert slope == 0.05


class TestRepresentationEquivalence:
    def test_complex_vs_magnitude_phase(self, geom_50mrad, fe57):
        n = 5
        kernel = CouplingKernel(geom_50mrad, fe57, n)
        area = 0.5 * math.pi
        exc = ExcitationSpec.from_geometry(area, geom_50mrad)
        grid = np.linspace(0, 5, 600)
        traj = simulate_finite(geom_50mrad, fe57, area, n, grid=grid, rtol=1e-11)
        phases0 = np.angle(init_state(exc, n).coherences)
        sbar, phi, pop = integrate_magnitude_phase(
            kernel, exc.initial_coherence, phases0, exc.initial_population, grid,
            rtol=1e-11)
        for l in range(1, n + 1):
            assert np.max(np.abs(np.abs(traj.coherences[:, l - 1]) - sbar[:, l - 1])) < 1e-8
            ref = np.unwrap(phi[:, l - 1])
            assert np.max(np.abs(traj.site_phase(l) - ref)) < 1e-8


class TestUniformChainReduction:
    def test_matches_reduced_model(self, geom_50mrad, fe57):
        n = 16
        k_c = coupling_parameter_finite(geom_50mrad, fe57, central_site(n), n).value
        grid = np.linspace(0, 5, 500)
        finite = simulate_finite(geom_50mrad, fe57, 0.4 * math.pi, n, grid=grid,
                                 rtol=1e-11, uniform_coupling=k_c)
        reduced = simulate_reduced(geom_50mrad, fe57, 0.4 * math.pi, coupling=k_c,
                                   grid=grid, rtol=1e-11)
        mags = np.abs(finite.coherences)
        assert np.max(np.ptp(mags, axis=1)) < 1e-12  # site independent
        assert np.max(np.ptp(finite.populations, axis=1)) < 1e-12
        assert np.max(np.abs(mags[:, 0] - reduced.coherence_abs)) < 1e-9
        rel = finite.site_phase(1) - finite.site_phase(1)[0]
        assert np.max(np.abs(rel - (reduced.phase - reduced.phase[0]))) < 1e-9


class TestQualitativeProperties:
    @pytest.mark.parametrize("area_pi", [0.1, 0.5, 0.9])
    def test_population_never_exceeds_initial(self, geom_5mrad, fe57, area_pi):
        traj = simulate_reduced(geom_5mrad, fe57, area_pi * math.pi)
        assert np.all(traj.population <= traj.population[0] + 1e-12)
        chain = simulate_finite(geom_5mrad, fe57, area_pi * math.pi, 6, t_end=3.0)
        assert np.all(chain.populations <= chain.populations[0, :] + 1e-12)

    def test_phase_nonlinearity_switches_with_area(self, geom_5mrad, fe57):
        k = coupling_parameter_infinite(geom_5mrad, fe57)
        grid = np.linspace(0, 5, 2000)
        flat = simulate_reduced(geom_5mrad, fe57, 0.0, coupling=k, grid=grid)
        curved = simulate_reduced(geom_5mrad, fe57, 0.5 * math.pi, coupling=k, grid=grid)
        window = (grid[1:-1] > 0.8) & (grid[1:-1] < 1.2)
        assert np.max(np.abs(np.diff(flat.phase, 2))) < 1e-10
        assert np.max(np.abs(np.diff(curved.phase, 2)[window])) > 1e-8

    def test_analytic_phase_bound(self, geom_5mrad, fe57):
        k = coupling_parameter_infinite(geom_5mrad, fe57)
        traj = simulate_reduced(geom_5mrad, fe57, 0.5 * math.pi, coupling=k)
        ana = analytic_phase(traj.times, k.imag, 0.5 * math.pi)
        bound = 0.1 * abs(k.imag) * traj.times + 1e-12
        assert np.all(np.abs(traj.phase - ana) < bound)
