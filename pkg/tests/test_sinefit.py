import math

import numpy as np
import pytest

from tiadc_cal import (ConfigError, ConvergenceError, DegenerateFitError,
                       MismatchProfile, PhaseAmbiguityError, SineFitResult,
                       TiadcConfig, ToneSpec, alias_to_subrate,
                       derive_mismatches, detect_tone_freq,
                       estimate_from_capture, sine_fit_four_param,
                       simulate_capture)

CFG12 = TiadcConfig(n_channels=2, bits=12)
CFG16 = TiadcConfig(n_channels=2, bits=16)


def make_sine(n, amp, freq, phase, dc):
    k = np.arange(n)
    return dc + amp * np.sin(2 * np.pi * freq * k + phase)


class TestSineFit:
    def test_exact_recovery(self):
        data = make_sine(4096, 0.9, 0.1, 0.3, 0.05)
        fit = sine_fit_four_param(data, 0.1 + 0.3 / 4096)
        assert fit.amplitude == pytest.approx(0.9, rel=1e-10)
        assert fit.freq_rel == pytest.approx(0.1, rel=1e-10)
        assert fit.phase == pytest.approx(0.3, rel=1e-10)
        assert fit.dc == pytest.approx(0.05, rel=1e-10)
        assert fit.rms_residual < 1e-10

    def test_quantized_recovery(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            phase = rng.uniform(-math.pi, math.pi)
            data = make_sine(4096, 0.9, 545 / 4096, phase, 0.0)
            codes = np.round(data * 2048).clip(-2048, 2047)
            fit = sine_fit_four_param(codes / 2048, 545 / 4096)
            assert fit.amplitude == pytest.approx(0.9, rel=1e-3)
            d = (fit.phase - phase + math.pi) % (2 * math.pi) - math.pi
            assert abs(d) <= 1e-3

    def test_guess_basin_half_bin(self):
        n = 4096
        data = make_sine(n, 0.5, 0.2, -1.0, 0.0)
        for off in (-1.0, -0.5, 0.49, 1.0):
            fit = sine_fit_four_param(data, 0.2 + off / n)
            assert fit.freq_rel == pytest.approx(0.2, rel=1e-9)

    def test_all_zero_degenerate(self):
        with pytest.raises(DegenerateFitError):
            sine_fit_four_param(np.zeros(64), 0.1)

    def test_constant_degenerate(self):
        with pytest.raises(DegenerateFitError):
            sine_fit_four_param(np.full(64, 3.7), 0.1)

    def test_preconditions(self):
        data = make_sine(64, 1, 0.1, 0, 0)
        with pytest.raises(ConfigError):
            sine_fit_four_param(data[:15], 0.1)
        with pytest.raises(ConfigError):
            sine_fit_four_param(data, 0.0)
        with pytest.raises(ConfigError):
            sine_fit_four_param(data, 0.5)

    def test_convergence_error_carries_last_fit(self):
        # two beating tones close in frequency keep the omega update hunting
        k = np.arange(64)
        data = (np.sin(2 * np.pi * 0.102 * k) + np.sin(2 * np.pi * 0.126 * k)
                + 0.8 * np.sin(2 * np.pi * 0.3 * k + 1.0))
        try:
            fit = sine_fit_four_param(data, 0.11)
        except ConvergenceError as err:
            assert isinstance(err.last_fit, SineFitResult)
            assert 0 < err.last_fit.freq_rel < 0.5
        else:
            assert fit.iterations <= 50  # converged anyway: acceptable

    def test_result_is_least_squares_optimum(self):
        rng = np.random.default_rng(5)
        k = np.arange(1024)
        data = make_sine(1024, 0.7, 0.13, 0.9, -0.1) + 0.01 * rng.standard_normal(1024)
        fit = sine_fit_four_param(data, 0.13)

        def rss(amp, freq, phase, dc):
            model = dc + amp * np.sin(2 * np.pi * freq * k + phase)
            return float(((data - model) ** 2).sum())

        best = rss(fit.amplitude, fit.freq_rel, fit.phase, fit.dc)
        for d_amp in (-1e-6, 1e-6):
            assert best <= rss(fit.amplitude + d_amp, fit.freq_rel, fit.phase, fit.dc) + 1e-12
        for d_f in (-1e-9, 1e-9):
            assert best <= rss(fit.amplitude, fit.freq_rel + d_f, fit.phase, fit.dc) + 1e-12
        for d_ph in (-1e-6, 1e-6):
            assert best <= rss(fit.amplitude, fit.freq_rel, fit.phase + d_ph, fit.dc) + 1e-12

    def test_phase_convention_range(self):
        for phase in (3.0, -3.0, 0.0, 1.5):
            data = make_sine(2048, 1.0, 0.07, phase, 0.0)
            fit = sine_fit_four_param(data, 0.07)
            assert -math.pi < fit.phase <= math.pi
            assert fit.phase == pytest.approx(phase, abs=1e-9)

    def test_negative_amplitude_normalized(self):
        # -A*sin(wn+p) == A*sin(wn+p-pi): amplitude comes back positive
        data = -0.4 * np.sin(2 * np.pi * 0.09 * np.arange(2048) + 0.5)
        fit = sine_fit_four_param(data, 0.09)
        assert fit.amplitude == pytest.approx(0.4, rel=1e-10)
        assert fit.phase == pytest.approx(0.5 - math.pi, abs=1e-9)


class TestAliasToSubrate:
    def test_low_band_two_channels(self):
        f, reflected = alias_to_subrate(0.019, 2)
        assert f == pytest.approx(0.038)
        assert not reflected

    def test_reflected_two_channels(self):
        f, reflected = alias_to_subrate(0.46, 2)
        assert f == pytest.approx(0.08)
        assert reflected

    def test_five_channels(self):
        f, reflected = alias_to_subrate(0.26, 5)
        assert f == pytest.approx(0.3)
        assert not reflected

    def test_integer_band_edges_rejected(self):
        with pytest.raises(ConfigError):
            alias_to_subrate(0.25, 2)


class TestDeriveMismatches:
    def fit(self, amp, freq, phase, dc=0.0):
        return SineFitResult(amplitude=amp, freq_rel=freq, phase=phase, dc=dc,
                             rms_residual=0.0, iterations=1)

    def test_gain_ratio(self):
        f0 = self.fit(1.0, 0.2, 0.0)
        f1 = self.fit(1.01, 0.2, 2 * math.pi * 0.1 * 1.0)
        est = derive_mismatches([f0, f1], CFG12, 0.1)
        assert est.gains[0] == 0.0
        assert est.gains[1] == pytest.approx(0.01, rel=1e-12)

    def test_skew_from_phase(self):
        f0 = self.fit(1.0, 0.2, 0.0)
        f1 = self.fit(1.0, 0.2, 2 * math.pi * 0.1 * 1.01)
        est = derive_mismatches([f0, f1], CFG12, 0.1)
        assert est.skews[1] == pytest.approx(0.01, rel=1e-9)

    def test_offset_difference(self):
        f0 = self.fit(1.0, 0.2, 0.0, dc=0.002)
        f1 = self.fit(1.0, 0.2, 2 * math.pi * 0.1, dc=0.0035)
        est = derive_mismatches([f0, f1], CFG12, 0.1)
        assert est.offsets[1] == pytest.approx(0.0015, rel=1e-12)

    def test_ambiguous_phase_rejected(self):
        # branches at f=0.2 are 5 apart; put channel 1 at 2.5, dead between
        f0 = self.fit(1.0, 0.4, 0.0)
        f1 = self.fit(1.0, 0.4, 2 * math.pi * 0.2 * (1 + 2.5))
        with pytest.raises(PhaseAmbiguityError):
            derive_mismatches([f0, f1], CFG12, 0.2)

    def test_channel_count_checked(self):
        with pytest.raises(ConfigError):
            derive_mismatches([self.fit(1, 0.2, 0)], CFG12, 0.1)


class TestEndToEnd:
    def capture(self, cfg, profile, freq, n, phase=0.9, amp=0.9):
        tone = ToneSpec(amplitude=amp, freq_rel=freq, phase=phase)
        return simulate_capture(tone, cfg, profile, n)

    def test_detect_tone_freq_fine(self):
        freq = 77 / 4096
        profile = MismatchProfile((0, 0.001), (0, 0.01), (0, 0.01))
        cap = self.capture(CFG12, profile, freq, 16384)
        assert detect_tone_freq(cap) == pytest.approx(freq, abs=1e-8)

    def test_detect_tone_freq_reflected_band(self):
        freq = 1885 / 4096  # 0.46... lands above fs/4, image below tone
        profile = MismatchProfile((0, 0.0), (0, 0.005), (0, 0.005))
        cap = self.capture(CFG16, profile, freq, 16384)
        assert detect_tone_freq(cap) == pytest.approx(freq, abs=1e-8)

    def test_estimate_recovers_profile_12bit(self):
        profile = MismatchProfile((0, 0.003), (0, 0.01), (0, 0.01))
        cap = self.capture(CFG12, profile, 77 / 4096, 16384)
        est = estimate_from_capture(cap)
        assert est.gains[1] == pytest.approx(0.01, abs=5e-4)
        assert est.skews[1] == pytest.approx(0.01, abs=5e-4)
        assert est.offsets[1] == pytest.approx(0.003, abs=5e-4)

    def test_estimate_reflected_band_16bit(self):
        profile = MismatchProfile((0, -0.002), (0, -0.008), (0, 0.007))
        cap = self.capture(CFG16, profile, 1885 / 4096, 16384)
        est = estimate_from_capture(cap)
        assert est.gains[1] == pytest.approx(-0.008, abs=1e-4)
        assert est.skews[1] == pytest.approx(0.007, abs=1e-4)
        assert est.offsets[1] == pytest.approx(-0.002, abs=1e-4)

    def test_estimate_five_channels(self):
        cfg = TiadcConfig(n_channels=5, bits=16)
        profile = MismatchProfile((0, 0.001, -0.001, 0.002, -0.002),
                                  (0, 0.01, -0.01, 0.02, -0.02),
                                  (0, 0.01, 0.02, -0.01, -0.02))
        cap = self.capture(cfg, profile, 779 / 4096, 20480)
        est = estimate_from_capture(cap)
        np.testing.assert_allclose(est.gains, profile.gains, atol=1e-4)
        np.testing.assert_allclose(est.skews, profile.skews, atol=1e-4)
        np.testing.assert_allclose(est.offsets, profile.offsets, atol=1e-4)

    def test_skew_estimate_amplitude_invariant(self):
        profile = MismatchProfile((0, 0.0), (0, 0.0), (0, 0.012))
        a = estimate_from_capture(self.capture(CFG16, profile, 77 / 4096, 16384, amp=0.9))
        b = estimate_from_capture(self.capture(CFG16, profile, 77 / 4096, 16384, amp=0.45))
        assert a.skews[1] == pytest.approx(b.skews[1], abs=1e-4)

    def test_explicit_tone_freq_accepted(self):
        profile = MismatchProfile.zero(2)
        cap = self.capture(CFG12, profile, 77 / 4096, 8192)
        est = estimate_from_capture(cap, tone_freq_rel=77 / 4096)
        assert est.gains[1] == pytest.approx(0.0, abs=5e-4)
