import math

import numpy as np
import pytest

from nucdecay.couplings import (central_site, coupling_parameter_finite,
                                coupling_parameter_infinite)
from nucdecay.dynamics import Trajectory, simulate_finite, simulate_reduced
from nucdecay.errors import ConfigError
from nucdecay.observables import (InterferometerSpec, beat_minima,
                                  combined_intensity, first_minimum_time,
                                  fit_low_excitation, forward_field,
                                  to_nanoseconds)


def synthetic_reduced(t, coh, phase, pop=None, area=None):
    meta = {"excitation": {"pulse_area": area}} if area is not None else {}
    return Trajectory(np.asarray(t, float), "reduced",
                      coherence_abs=np.asarray(coh, float),
                      phase=np.asarray(phase, float),
                      population=np.asarray(pop if pop is not None else coh, float),
                      metadata=meta)


class TestForwardField:
    def test_uncoupled_pure_exponential(self, geom_5mrad, fe57):
        traj = simulate_reduced(geom_5mrad, fe57, 0.4 * math.pi, coupling=0j)
        amp = forward_field(traj)
        assert abs(amp[0]) == pytest.approx(1.0)
        assert np.max(np.abs(np.abs(amp) - np.exp(-0.5 * traj.times))) < 1e-9
        assert np.max(np.abs(np.angle(amp))) < 1e-10

    def test_low_excitation_linear_argument(self, geom_5mrad, fe57):
        k = coupling_parameter_infinite(geom_5mrad, fe57)
        traj = simulate_reduced(geom_5mrad, fe57, 1e-5 * math.pi, coupling=k)
        arg = np.unwrap(np.angle(forward_field(traj)))
        slope = np.polyfit(traj.times, arg, 1)[0]
        assert slope == pytest.approx(-k.imag, rel=1e-4)

    def test_full_inversion_gives_no_field(self, geom_5mrad, fe57):
        traj = simulate_reduced(geom_5mrad, fe57, math.pi)
        amp = forward_field(traj)
        assert np.all(np.abs(amp) < 1e-14)  # normalization must not rescale noise

    def test_requires_reduced(self, geom_5mrad, fe57):
        chain = simulate_finite(geom_5mrad, fe57, 0.2, 2, t_end=1.0)
        with pytest.raises(ValueError):
            forward_field(chain)


class TestCombinedIntensity:
    def test_pure_two_frequency_beat(self):
        t = np.linspace(0, 5, 4000)
        sample = synthetic_reduced(t, np.exp(-0.5 * t), np.zeros_like(t))
        ref = synthetic_reduced(t, np.exp(-0.5 * t), np.zeros_like(t))
        spec = InterferometerSpec(detuning=-3.0, amplitude_model="equal-exponential")
        tt, intensity = combined_intensity(spec, sample, ref)
        minima = beat_minima(tt, intensity)
        expected = [math.pi / 3.0, math.pi]
        assert len(minima) >= 2
        for (t_min, _), ref_t in zip(minima, expected):
            assert abs(t_min - ref_t) < 1e-6

    def test_linear_phases_renormalize_beat_frequency(self):
        t = np.linspace(0, 5, 4000)
        slope_s, slope_r = 0.30, -0.10
        sample = synthetic_reduced(t, np.exp(-0.5 * t), slope_s * t)
        ref = synthetic_reduced(t, np.exp(-0.5 * t), slope_r * t)
        spec = InterferometerSpec(detuning=-3.0, amplitude_model="equal-exponential")
        tt, intensity = combined_intensity(spec, sample, ref)
        minima = beat_minima(tt, intensity)
        # cos argument advances at |detuning + slope_r - slope_s|
        period = 2.0 * math.pi / abs(-3.0 + slope_r - slope_s)
        assert abs((minima[1][0] - minima[0][0]) - period) < 1e-5

    def test_nonnegative_and_matches_modulus_square(self, geom_5mrad, fe57):
        spec = InterferometerSpec()
        k_s = coupling_parameter_infinite(geom_5mrad, fe57)
        geom_r = geom_5mrad.with_incidence(spec.reference_angle)
        k_r = coupling_parameter_infinite(geom_r, fe57)
        sample = simulate_reduced(geom_5mrad, fe57, spec.pulse_area, coupling=k_s)
        ref = simulate_reduced(geom_r, fe57, spec.pulse_area, coupling=k_r)
        t, intensity = combined_intensity(spec, sample, ref, normalize=False)
        assert np.all(intensity >= 0)
        rng = np.random.default_rng(11)
        for i in rng.integers(0, t.size, 10):
            field = (ref.coherence_abs[i] * np.exp(1j * (spec.detuning * t[i] + ref.phase[i]))
                     + sample.coherence_abs[i] * np.exp(1j * sample.phase[i]))
            assert abs(intensity[i] - abs(field) ** 2) < 1e-12

    def test_grid_mismatch_without_resampling(self):
        t1 = np.linspace(0, 5, 100)
        t2 = np.linspace(0, 5, 120)
        a = synthetic_reduced(t1, np.exp(-t1 / 2), np.zeros_like(t1))
        b = synthetic_reduced(t2, np.exp(-t2 / 2), np.zeros_like(t2))
        with pytest.raises(ConfigError):
            combined_intensity(InterferometerSpec(), a, b, resample=False)
        combined_intensity(InterferometerSpec(), a, b, resample=True)


class TestBeatMinima:
    def test_analytic_positions(self):
        # interpolation bias is O(h^2); this grid puts it below 1e-6
        t = np.linspace(0, 5, 6000)
        y = np.exp(-t) * (1.0 + np.cos(3.0 * t))
        for (t_min, i_min), k in zip(beat_minima(t, y), (1, 3)):
            assert abs(t_min - k * math.pi / 3.0) < 1e-6
            assert i_min < 1e-6

    def test_quadratic_interpolation_converges_second_order(self):
        def locate(points):
            t = np.linspace(0, 2, points)
            y = np.exp(-t) * (1.0 + np.cos(3.0 * t))
            return beat_minima(t, y)[0][0]

        exact = math.pi / 3.0
        err_coarse = abs(locate(1000) - exact)
        err_fine = abs(locate(2000) - exact)
        assert err_fine < err_coarse / 2.5
        assert err_fine < 5e-6

    def test_no_minimum_returns_empty(self):
        t = np.linspace(0, 3, 100)
        assert beat_minima(t, np.exp(-t)) == []
        with pytest.raises(ValueError):
            first_minimum_time(t, np.exp(-t))

    def test_monotone_shift_with_pulse_area(self, geom_5mrad, fe57):
        spec = InterferometerSpec()
        geom_r = geom_5mrad.with_incidence(spec.reference_angle)
        k_s = coupling_parameter_infinite(geom_5mrad, fe57)
        k_r = coupling_parameter_infinite(geom_r, fe57)
        grid = np.linspace(0, 3, 1500)
        t_mins = []
        for area_pi in (0.1, 0.25, 0.5, 0.75):
            sample = simulate_reduced(geom_5mrad, fe57, area_pi * math.pi,
                                      coupling=k_s, grid=grid, t_end=3.0)
            ref = simulate_reduced(geom_r, fe57, area_pi * math.pi,
                                   coupling=k_r, grid=grid, t_end=3.0)
            t, intensity = combined_intensity(spec, sample, ref)
            t_mins.append(first_minimum_time(t, intensity))
        diffs = np.diff(t_mins)
        assert np.all(diffs > 0) or np.all(diffs < 0)


class TestLowExcitationFit:
    def test_uncoupled(self, geom_5mrad, fe57):
        traj = simulate_reduced(geom_5mrad, fe57, 1e-5 * math.pi, coupling=0j)
        rate, slope = fit_low_excitation(traj)
        assert rate == pytest.approx(0.5, abs=1e-9)
        assert slope == pytest.approx(0.0, abs=1e-9)

    def test_round_trip_recovers_coupling(self, geom_5mrad, fe57):
        k = coupling_parameter_infinite(geom_5mrad, fe57)
        traj = simulate_reduced(geom_5mrad, fe57, 1e-5 * math.pi, coupling=k)
        rate, slope = fit_low_excitation(traj)
        assert rate == pytest.approx(0.5 + k.real, rel=1e-6)
        assert slope == pytest.approx(-k.imag, rel=1e-6)

    def test_finite_chain_recovers_local_not_asymptotic(self, geom_5mrad, fe57):
        # the central-site fit lands on the chain's own coupling value,
        # far from the infinite-chain one (which is not converged here);
        # the small residual is the neighbors drifting during the window
        n = 601
        site = central_site(n)
        k_local = coupling_parameter_finite(geom_5mrad, fe57, site, n).value
        k_inf = coupling_parameter_infinite(geom_5mrad, fe57).value
        traj = simulate_finite(geom_5mrad, fe57, 1e-5 * math.pi, n,
                               grid=np.linspace(0, 3, 400), rtol=1e-10, t_end=3.0)
        rate, slope = fit_low_excitation(traj, site=site)
        fitted = complex(rate - 0.5, -slope)
        assert -slope == pytest.approx(k_local.imag, rel=1e-3)
        assert abs(fitted - k_local) < 0.05 * abs(k_inf - k_local)
        assert abs(-slope - k_inf.imag) > 100.0 * abs(-slope - k_local.imag)

    def test_rejects_high_excitation(self, geom_5mrad, fe57):
        traj = simulate_reduced(geom_5mrad, fe57, 0.5 * math.pi)
        with pytest.raises(ConfigError):
            fit_low_excitation(traj)

    def test_warns_on_nonexponential_decay(self):
        t = np.linspace(0, 3, 200)
        curved = synthetic_reduced(t, 1e-4 * np.exp(-0.5 * t - 0.2 * t**2),
                                   np.zeros_like(t), area=1e-4 * math.pi)
        with pytest.warns(UserWarning):
            fit_low_excitation(curved)


def test_nanosecond_conversion():
    assert to_nanoseconds(1.0) == pytest.approx(140.0, abs=0.2)
