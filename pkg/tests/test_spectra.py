import numpy as np
import pytest
from scipy.integrate import quad

from seisbound import (
    GroundMotion,
    ModulationParams,
    PsdParams,
    clough_penzien_psd,
    epsd,
    kanai_tajimi_psd,
    modulation,
    synthesize_accelerogram,
    synthesize_ensemble,
)
from seisbound.spectra import CM_TO_M, cutoff_for_energy, modulation_peak_time


class TestPsdParams:
    def test_defaults_follow_site_frequency(self):
        p = PsdParams(omega_g=10.0, zeta_g=0.5)
        assert p.omega_f == pytest.approx(1.0)
        assert p.zeta_f == 0.5
        assert p.s0 == 48.933

    @pytest.mark.parametrize("kwargs", [
        dict(omega_g=-1.0, zeta_g=0.5),
        dict(omega_g=1.0, zeta_g=0.0),
        dict(omega_g=1.0, zeta_g=1.5),
        dict(omega_g=1.0, zeta_g=0.5, s0=-2.0),
    ])
    def test_invalid_parameters_rejected(self, kwargs):
        with pytest.raises(ValueError):
            PsdParams(**kwargs)


class TestKanaiTajimi:
    def test_value_at_zero_is_s0(self, site_params):
        assert kanai_tajimi_psd(0.0, site_params) == pytest.approx(48.933, abs=1e-12)

    def test_value_at_site_frequency(self):
        # (1 + 4*0.36) / (4*0.36) * 48.933, direct substitution
        p = PsdParams(omega_g=5 * np.pi, zeta_g=0.6)
        expected = (1 + 4 * 0.36) / (4 * 0.36) * 48.933
        assert kanai_tajimi_psd(5 * np.pi, p) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(82.914, abs=5e-4)

    def test_even_in_omega(self, site_params):
        w = np.linspace(0.1, 200.0, 57)
        np.testing.assert_allclose(kanai_tajimi_psd(-w, site_params),
                                   kanai_tajimi_psd(w, site_params), rtol=1e-14)

    def test_nonnegative(self, site_params):
        w = np.linspace(-300, 300, 1001)
        assert np.all(kanai_tajimi_psd(w, site_params) >= 0)


class TestCloughPenzien:
    def test_zero_at_zero(self, site_params):
        assert clough_penzien_psd(0.0, site_params) == 0.0

    def test_highpass_factor_near_one_far_above_filter(self, site_params):
        w = 100.0 * site_params.omega_g
        ratio = clough_penzien_psd(w, site_params) / kanai_tajimi_psd(w, site_params)
        assert abs(ratio - 1.0) < 1e-3

    def test_highpass_factor_by_direct_evaluation(self):
        # the filter hinders frequencies below its corner; above it the factor
        # settles to one (with a small resonant overshoot when zeta_f < 1/sqrt 2)
        p = PsdParams(omega_g=5 * np.pi, zeta_g=0.6, omega_f=0.5 * np.pi, zeta_f=0.6)
        below = 0.5 * p.omega_f
        assert clough_penzien_psd(below, p) < kanai_tajimi_psd(below, p)
        w = 5 * np.pi
        ratio = clough_penzien_psd(w, p) / kanai_tajimi_psd(w, p)
        assert ratio == pytest.approx(1.0, abs=0.01)

    def test_even_and_nonnegative(self, site_params):
        w = np.linspace(0.05, 250.0, 83)
        np.testing.assert_allclose(clough_penzien_psd(-w, site_params),
                                   clough_penzien_psd(w, site_params), rtol=1e-14)
        assert np.all(clough_penzien_psd(w, site_params) >= 0)

    def test_integrable(self, cp_psd):
        total, _ = quad(cp_psd, 0, np.inf, limit=400)
        assert np.isfinite(total) and total > 0


class TestModulation:
    MOD = ModulationParams(a=0.05, b=0.07, c=0.01)

    def test_zero_at_time_zero(self):
        assert modulation(3.0, 0.0, self.MOD) == pytest.approx(0.0, abs=1e-15)

    def test_unit_peak_at_peak_time(self):
        for w in (0.5, 3.0, 40.0):
            ts = modulation_peak_time(w, self.MOD)
            assert modulation(w, ts, self.MOD) == pytest.approx(1.0, abs=1e-12)

    def test_peak_time_closed_form(self):
        # a = 0.05, c*w + b = 0.1 -> t* = ln(0.1/0.05)/(0.1-0.05)
        mod = ModulationParams(a=0.05, b=0.07, c=0.01)
        w = (0.1 - mod.b) / mod.c
        assert modulation_peak_time(w, mod) == pytest.approx(13.8629, abs=1e-4)

    def test_bounded_and_unimodal(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            w = rng.uniform(0.1, 60.0)
            ts = modulation_peak_time(w, self.MOD)
            t = np.linspace(0.0, 5.0 * ts, 2001)
            amp = modulation(w, t, self.MOD)
            assert np.all(amp >= -1e-12) and np.all(amp <= 1.0 + 1e-12)
            peak_idx = int(np.argmax(amp))
            assert t[peak_idx] == pytest.approx(ts, rel=2e-3)
            assert np.all(np.diff(amp[:peak_idx]) > -1e-12)
            assert np.all(np.diff(amp[peak_idx:]) < 1e-12)

    def test_rejects_rate_inversion(self):
        mod = ModulationParams(a=0.5, b=0.1, c=0.0)
        with pytest.raises(ValueError):
            modulation(1.0, 1.0, mod)
        with pytest.raises(ValueError):
            modulation_peak_time(1.0, mod)


class TestEpsd:
    MOD = ModulationParams(a=0.05, b=0.07, c=0.01)

    def test_zero_at_time_zero(self, site_params):
        assert epsd(3.0, 0.0, site_params, self.MOD) == pytest.approx(0.0, abs=1e-15)

    def test_equals_psd_at_peak_time(self, site_params):
        w = 7.0
        ts = modulation_peak_time(w, self.MOD)
        assert epsd(w, ts, site_params, self.MOD) == pytest.approx(
            clough_penzien_psd(w, site_params), rel=1e-12)

    def test_zero_at_zero_frequency(self, site_params):
        mod = ModulationParams(a=0.05, b=0.07, c=0.01)
        assert epsd(1e-300, 2.0, site_params, mod) == pytest.approx(0.0, abs=1e-12)

    def test_never_exceeds_psd(self, site_params):
        w = np.linspace(0.2, 80.0, 41)
        for t in (0.5, 2.0, 8.0, 30.0):
            assert np.all(epsd(w, t, site_params, self.MOD)
                          <= clough_penzien_psd(w, site_params) + 1e-12)


class TestSynthesis:
    def test_zero_psd_gives_zero_signal(self, grid_10s):
        motion = synthesize_accelerogram(lambda w: np.zeros_like(np.asarray(w)),
                                         grid_10s, seed=5, omega_cut=50.0)
        np.testing.assert_array_equal(motion.values, 0.0)

    def test_seed_determinism(self, cp_psd, grid_10s):
        a = synthesize_accelerogram(cp_psd, grid_10s, seed=11)
        b = synthesize_accelerogram(cp_psd, grid_10s, seed=11)
        np.testing.assert_array_equal(a.values, b.values)
        c = synthesize_accelerogram(cp_psd, grid_10s, seed=12)
        assert not np.array_equal(a.values, c.values)

    def test_ensemble_variance_matches_spectral_integral(self, cp_psd, grid_10s):
        # quadrature of the target spectrum over the synthesis band is the oracle
        cut = cutoff_for_energy(cp_psd, 0.99)
        motions = synthesize_ensemble(cp_psd, grid_10s, 1000, seed=2024,
                                      omega_cut=cut, n_freq=256)
        values = np.vstack([m.values for m in motions])
        target, _ = quad(cp_psd, 0.0, cut, limit=400)
        target *= CM_TO_M**2
        per_instant = values.var(axis=0)
        # 1000 samples resolve ~4.5% (1 sigma) per instant: probe instants and
        # the time average at 5%, and the everywhere-bound with a larger batch
        for idx in (0, 67, 134):
            assert abs(per_instant[idx] - target) / target < 0.05
        assert abs(per_instant.mean() - target) / target < 0.05
        many = synthesize_ensemble(cp_psd, grid_10s, 20000, seed=2025,
                                   omega_cut=cut, n_freq=256)
        tight = np.vstack([m.values for m in many]).var(axis=0)
        assert np.max(np.abs(tight - target)) / target < 0.05

    def test_ensemble_periodogram_matches_target_psd(self, cp_psd):
        dt = 0.02
        n_time = 1024
        grid = np.arange(n_time) * dt
        cut = cutoff_for_energy(cp_psd, 0.995)
        motions = synthesize_ensemble(cp_psd, grid, 500, seed=31, omega_cut=cut,
                                      n_freq=512)
        values = np.vstack([m.values for m in motions]) / CM_TO_M
        # two-sided periodogram in angular frequency, averaged over the ensemble
        spectrum = np.abs(np.fft.rfft(values, axis=1) * dt) ** 2
        periodogram = spectrum.mean(axis=0) / (2.0 * np.pi * n_time * dt)
        freqs = np.fft.rfftfreq(n_time, dt) * 2.0 * np.pi
        # compare band-averaged levels over the energetic part of the band
        band_edges = np.linspace(0.0, cut, 13)
        target_bands, got_bands = [], []
        for lo, hi in zip(band_edges[:-1], band_edges[1:]):
            mask = (freqs >= lo) & (freqs < hi)
            target, _ = quad(cp_psd, lo, hi, limit=200)
            target_bands.append(target / (hi - lo))
            got_bands.append(periodogram[mask].mean())
        target_bands = np.array(target_bands)
        got_bands = np.array(got_bands)
        heavy = target_bands > 0.05 * target_bands.max()
        assert np.all(np.abs(got_bands[heavy] / target_bands[heavy] - 1.0) < 0.15)
        total_got = np.trapezoid(periodogram, freqs)
        total_target, _ = quad(cp_psd, 0, cut, limit=400)
        assert abs(total_got / total_target - 1.0) < 0.05

    def test_modulated_amplitudes_follow_envelope(self, cp_psd, grid_10s,
                                                  site_params):
        mod = ModulationParams(a=0.05, b=0.07, c=0.01)
        motions = synthesize_ensemble(cp_psd, grid_10s, 200, seed=9, mod=mod)
        values = np.vstack([m.values for m in motions])
        std = values.std(axis=0)
        assert std[0] == pytest.approx(0.0, abs=1e-12)
        # variance rises from zero and decays well below its peak by t = 10 s
        peak_idx = int(np.argmax(std))
        assert 0 < peak_idx < grid_10s.size - 1
        assert std[-1] < 0.8 * std[peak_idx]

    def test_rejects_insufficient_cutoff(self, cp_psd, grid_10s):
        with pytest.raises(ValueError, match="captures"):
            synthesize_accelerogram(cp_psd, grid_10s, seed=0, omega_cut=5.0)

    def test_rejects_bad_arguments(self, cp_psd, grid_10s):
        with pytest.raises(ValueError):
            synthesize_accelerogram(cp_psd, np.array([]), seed=0)
        with pytest.raises(ValueError):
            synthesize_accelerogram(cp_psd, grid_10s, seed=0, omega_cut=-3.0)
        with pytest.raises(ValueError):
            synthesize_accelerogram(cp_psd, grid_10s, seed=0, n_freq=32)


class TestGroundMotion:
    def test_rejects_nonuniform_grid(self):
        with pytest.raises(ValueError):
            GroundMotion(grid=np.array([0.0, 0.1, 0.3]), values=np.zeros(3))

    def test_rejects_decreasing_grid(self):
        with pytest.raises(ValueError):
            GroundMotion(grid=np.array([0.0, -0.1, -0.2]), values=np.zeros(3))

    def test_rejects_nonfinite_values(self):
        with pytest.raises(ValueError):
            GroundMotion(grid=np.array([0.0, 0.1]), values=np.array([0.0, np.nan]))

    def test_dt(self):
        gm = GroundMotion(grid=np.array([0.0, 0.5, 1.0]), values=np.zeros(3))
        assert gm.dt == 0.5
