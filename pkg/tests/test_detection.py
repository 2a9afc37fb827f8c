"""Receiver-chain tests.

Oracles: direct numerical integration of the closed-form SFG spectrum, the
analytic Fourier series of the quantized sawtooth, and linearized homodyne
algebra under the package's stated normalization (tone of flux F integrates
to 4F in shot units).
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chaosqfc.detection import (
    DetectionSpec,
    analytic_sfg_psd,
    apply_bandpass,
    balanced_homodyne,
    decompose_coherent,
    esa_spectrum,
    peak_bin_power,
    serrodyne_shift,
    snr_formulas,
)
from chaosqfc.errors import GridError
from chaosqfc.propagation import WaveguideSpec, sfg_small_signal
from chaosqfc.signals import (
    ComplexEnvelope,
    CorrelationSpec,
    synthesize_chaotic_pair,
    synthesize_noise,
    tone_envelope,
)
from chaosqfc.units import sigma_from_fwhm_wavelength, wavelength_span_to_hz

SIGMA = 1e9
DT = 1.0 / (8.0 * SIGMA)
N = 1024
DURATION = N * DT


def det_spec(**kw):
    base = dict(electrical_rbw=1.5 / DURATION, integration_time=DURATION,
                lo_flux=1e15, shot_noise=False)
    base.update(kw)
    return DetectionSpec(**base)


class TestDecomposeCoherent:
    def test_deterministic_tone(self):
        members = [tone_envelope(2.0, 0.0, DURATION, DT) for _ in range(4)]
        d = decompose_coherent(members)
        assert d.coherent_fraction == pytest.approx(1.0, abs=1e-9)
        assert d.coherent_flux == pytest.approx(2.0, rel=1e-9)

    def test_independent_chaotic_fraction_vanishes(self):
        members = [synthesize_noise(CorrelationSpec(1e9, SIGMA), DURATION, DT, s)
                   for s in range(64)]
        d = decompose_coherent(members)
        # zero-mean process: fraction consistent with 0 at a few s.e.
        assert d.coherent_fraction < 0.01

    def test_single_member_rejected(self):
        with pytest.raises(ValueError):
            decompose_coherent([tone_envelope(1.0, 0.0, DURATION, DT)])

    def test_conjugate_pair_ratio_matches_closed_form(self):
        # oracle: closed-form spectrum integrated numerically on the grid
        flux_p = flux_r = 1e9
        wg = WaveguideSpec(1e-5, 0.05, 64 * DT / 0.05)
        members = []
        for s in range(400):
            probe, ref = synthesize_chaotic_pair(CorrelationSpec(flux_p, SIGMA),
                                                 flux_r, DURATION, DT, s)
            members.append(sfg_small_signal(probe, ref, wg))
        d = decompose_coherent(members)
        nu = np.sort(np.fft.fftfreq(N, DT))
        ana = analytic_sfg_psd(flux_p, flux_r, 0.0, SIGMA, wg, nu)
        dnu = nu[1] - nu[0]
        dc = int(np.argmin(np.abs(nu)))
        g2l2 = (wg.gamma * wg.length) ** 2
        coh_ana = g2l2 * flux_p * flux_r
        bg_ana = float(np.sum(ana.psd) * dnu) - coh_ana
        ratio_ana = bg_ana / coh_ana
        ratio_sim = d.incoherent_flux / d.coherent_flux
        assert abs(ratio_sim - ratio_ana) / ratio_ana < 0.10


class TestAnalyticSfgPsd:
    def grid(self):
        return np.sort(np.fft.fftfreq(N, DT))

    def test_zero_fluxes_zero_spectrum(self):
        wg = WaveguideSpec(1e-5, 0.05, 0.0)
        ana = analytic_sfg_psd(0.0, 1e9, 0.0, SIGMA, wg, self.grid())
        assert np.all(ana.psd == 0.0)

    def test_sinc_nulls(self):
        wg = WaveguideSpec(1e-5, 0.05, 64 * DT / 0.05)
        nu = self.grid()
        ana = analytic_sfg_psd(1e9, 1e9, 0.0, SIGMA, wg, nu)
        null = 1.0 / wg.walkoff_window
        k = int(np.argmin(np.abs(nu - null)))
        assert ana.psd[k] < 1e-6 * ana.psd.max()

    def test_background_splits_probe_and_noise(self):
        # with noise 3x probe, the background scales as (P_n + P_p)
        wg = WaveguideSpec(1e-5, 0.05, 0.0)
        nu = self.grid()
        dnu = nu[1] - nu[0]
        dc = int(np.argmin(np.abs(nu)))
        bgs = []
        for flux_n in (0.0, 3e9):
            ana = analytic_sfg_psd(1e9, 1e9, flux_n, SIGMA, wg, nu)
            psd = ana.psd.copy()
            psd[dc] -= (wg.gamma * wg.length) ** 2 * 1e9 * 1e9 / dnu
            bgs.append(np.sum(psd) * dnu)
        assert bgs[1] / bgs[0] == pytest.approx(4.0, rel=1e-9)


class TestSnrFormulas:
    def test_paper_numbers_111db(self):
        sigma = sigma_from_fwhm_wavelength(7.5e-9, 1560e-9)
        assert sigma == pytest.approx(3.92e11, rel=0.01)
        res = snr_formulas(1.0, 0.0, sigma, 10.0)
        assert abs(res.enhancement_db - 111.0) <= 1.0

    def test_unity_ratio_bandwidth(self):
        sigma = 1e9
        bw = 2.0 * math.sqrt(math.pi) * sigma
        res = snr_formulas(1.0, 1.0, sigma, bw)
        assert res.enhancement_db == pytest.approx(0.0, abs=1e-12)

    def test_no_noise_limits(self):
        sigma, bw = 2e9, 100.0
        res = snr_formulas(5e8, 0.0, sigma, bw)
        assert res.snr_dd == pytest.approx(1.0)
        assert res.snr_qfc == pytest.approx(2.0 * (2.0 * math.sqrt(math.pi) * sigma / bw))

    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            snr_formulas(0.0, 0.0, 1e9, 10.0)


class TestBandpass:
    def test_tone_inside_band_unchanged(self):
        env = tone_envelope(1.0, 32.0 / DURATION, DURATION, DT)
        out = apply_bandpass(env, 32.0 / DURATION, 16.0 / DURATION)
        assert out.mean_flux() == pytest.approx(env.mean_flux(), rel=1e-12)

    def test_flat_spectrum_fraction_exact(self):
        # rectangular mask arithmetic on an exactly flat spectrum
        n = 10000
        dt = 1e-12
        rng = np.random.default_rng(0)
        spec = np.exp(2j * np.pi * rng.uniform(size=n))  # unit magnitude all bins
        env = ComplexEnvelope(np.fft.ifft(spec) * np.sqrt(n), dt)
        full_band = 1.0 / dt
        width = 0.0324 * full_band
        out = apply_bandpass(env, 0.0, width)
        frac = out.mean_flux() / env.mean_flux()
        kept = int(round(0.0324 * n)) + 1  # symmetric band includes both edges
        assert frac == pytest.approx(kept / n, rel=1e-9)
        assert abs(frac - 0.0324) < 0.001

    def test_grating_on_isfg_background_97_percent(self):
        # 0.12 nm passband on a 3.7 nm-wide flat background at 780 nm
        width_hz = wavelength_span_to_hz(0.12e-9, 780e-9)
        full_hz = wavelength_span_to_hz(3.7e-9, 780e-9)
        n = 2**16
        dt = 1.0 / (2.5 * full_hz)
        nu = np.fft.fftfreq(n, dt)
        rng = np.random.default_rng(1)
        spec = np.where(np.abs(nu) <= full_hz / 2.0,
                        np.exp(2j * np.pi * rng.uniform(size=n)), 0.0)
        env = ComplexEnvelope(np.fft.ifft(spec) * np.sqrt(n), dt)
        out = apply_bandpass(env, 0.0, width_hz)
        transmitted = out.mean_flux() / env.mean_flux()
        assert abs(transmitted - 0.032) < 0.005  # ~97% rejection

    def test_band_outside_nyquist_rejected(self):
        env = tone_envelope(1.0, 0.0, DURATION, DT)
        with pytest.raises(GridError):
            apply_bandpass(env, 3.9e9, 1e9)

    def test_width_below_two_bins_rejected(self):
        env = tone_envelope(1.0, 0.0, DURATION, DT)
        with pytest.raises(GridError):
            apply_bandpass(env, 0.0, 0.5 / DURATION)


class TestSerrodyne:
    def test_zero_shift_identity(self):
        probe, _ = synthesize_chaotic_pair(CorrelationSpec(1e9, SIGMA), 1e9,
                                           DURATION, DT, 0)
        out = serrodyne_shift(probe, 0.0)
        assert np.array_equal(out.samples, probe.samples)

    def test_ideal_shift_moves_tone(self):
        f0 = 128.0 / DURATION
        env = tone_envelope(1.0, 0.0, DURATION, DT)
        out = serrodyne_shift(env, f0)
        spec = np.abs(np.fft.fft(out.samples)) ** 2 / out.n**2
        k = int(np.argmax(spec))
        assert np.fft.fftfreq(out.n, DT)[k] == pytest.approx(f0)
        assert out.mean_flux() == pytest.approx(env.mean_flux(), abs=1e-12)

    def test_quantized_staircase_spur_structure(self):
        # oracle: fourier series of the M-level staircase
        #   c_n = sinc(pi n / M) e^{-i pi n / M} for n = 1 mod M, else 0
        m_levels = 8
        cycles = 64
        n = 8192
        duration = n * DT
        f0 = cycles / duration
        env = tone_envelope(1.0, 0.0, duration, DT)
        out = serrodyne_shift(env, f0, levels=m_levels)
        spec = np.abs(np.fft.fft(out.samples) / n) ** 2
        freqs = np.fft.fftfreq(n, DT)

        def bin_power(f):
            return spec[int(np.argmin(np.abs(freqs - f)))]

        main = bin_power(f0)
        x = math.pi / m_levels
        expected_main = (math.sin(x) / x) ** 2
        assert main == pytest.approx(expected_main, rel=1e-3)
        # strongest spur at (1 - M) f0, power main / (M-1)^2
        spur = bin_power((1 - m_levels) * f0)
        assert spur == pytest.approx(expected_main / (m_levels - 1) ** 2, rel=1e-2)
        # ideal quantized ramp leaves no residual at the original carrier
        assert bin_power(0.0) < 1e-20

    def test_amplitude_error_leaves_residual_carrier(self):
        # oracle: geometric series for the dc coefficient of the scaled ramp
        m_levels, scale = 8, 0.95
        cycles, n = 64, 8192
        duration = n * DT
        f0 = cycles / duration
        env = tone_envelope(1.0, 0.0, duration, DT)
        out = serrodyne_shift(env, f0, levels=m_levels, amplitude_scale=scale)
        spec = np.abs(np.fft.fft(out.samples) / n) ** 2
        freqs = np.fft.fftfreq(n, DT)
        c0 = np.mean([np.exp(2j * np.pi * scale * m / m_levels)
                      for m in range(m_levels)])
        residual = spec[int(np.argmin(np.abs(freqs)))]
        assert residual == pytest.approx(abs(c0) ** 2, rel=1e-2)
        assert residual > 1e-4  # finite suppression, reportable

    def test_shift_beyond_quarter_nyquist_rejected(self):
        env = tone_envelope(1.0, 0.0, DURATION, DT)
        with pytest.raises(GridError):
            serrodyne_shift(env, 1.1e9)

    def test_composition_with_bandpass_commutes(self):
        probe, _ = synthesize_chaotic_pair(CorrelationSpec(1e9, SIGMA), 1e9,
                                           DURATION, DT, 3)
        f0 = 64.0 / DURATION
        c, w = 128.0 / DURATION, 256.0 / DURATION
        a = serrodyne_shift(apply_bandpass(probe, c, w), f0)
        b = apply_bandpass(serrodyne_shift(probe, f0), c + f0, w)
        np.testing.assert_allclose(a.samples, b.samples, atol=1e-9 * np.abs(a.samples).max())


class TestBalancedHomodyne:
    def test_shot_floor_is_unity(self):
        zero = ComplexEnvelope(np.zeros(2**16, dtype=complex), DT)
        trace = balanced_homodyne(zero, None, det_spec(shot_noise=True), seed=0)
        est = esa_spectrum(trace, rbw=256.0 * 1.5 / (2**16 * DT))
        assert abs(np.mean(est.psd) - 1.0) < 0.02

    def test_tone_power_calibration(self):
        # linearized algebra with the chosen normalization: peak = 4 F
        flux = 0.25
        f0 = 128.0 / DURATION
        env = tone_envelope(flux, f0, DURATION, DT)
        trace = balanced_homodyne(env, None, det_spec(), seed=0)
        est = esa_spectrum(trace, rbw=1.5 / DURATION)
        peak, _ = peak_bin_power(est, f0)
        assert peak == pytest.approx(4.0 * flux, rel=0.01)

    def test_common_phase_cancellation(self):
        probe, _ = synthesize_chaotic_pair(CorrelationSpec(1.0, SIGMA), 1.0,
                                           DURATION, DT, 5)
        rng = np.random.default_rng(2)
        phase = np.cumsum(rng.normal(0, 0.01, probe.n))
        noisy = probe.with_samples(probe.samples * np.exp(1j * phase))
        t1 = balanced_homodyne(noisy, phase, det_spec(), seed=0)
        t2 = balanced_homodyne(probe, None, det_spec(), seed=0)
        np.testing.assert_allclose(t1.rf_samples, t2.rf_samples, atol=1e-12)

    def test_linearity_doubling_amplitude_quadruples_peak(self):
        f0 = 64.0 / DURATION
        env = tone_envelope(1.0, f0, DURATION, DT)
        env2 = env.with_samples(2.0 * env.samples)
        peaks = []
        for e in (env, env2):
            trace = balanced_homodyne(e, None, det_spec(), seed=0)
            est = esa_spectrum(trace, rbw=1.5 / DURATION)
            peaks.append(peak_bin_power(est, f0)[0])
        assert peaks[1] / peaks[0] == pytest.approx(4.0, rel=1e-6)

    def test_zero_lo_rejected(self):
        env = tone_envelope(1.0, 0.0, DURATION, DT)
        with pytest.raises(ValueError):
            balanced_homodyne(env, None, det_spec(lo_flux=0.0), seed=0)


class TestEsaSpectrum:
    def test_pure_tone_single_bin(self):
        f0 = 256.0 / DURATION
        env = tone_envelope(1.0, f0, DURATION, DT)
        trace = balanced_homodyne(env, None, det_spec(), seed=0)
        est = esa_spectrum(trace, rbw=1.5 / DURATION)
        peak, fpk = peak_bin_power(est, f0)
        assert fpk == pytest.approx(f0)
        total = est.integrated_power()
        assert peak / total > 0.95

    def test_white_noise_bin_power(self):
        zero = ComplexEnvelope(np.zeros(2**16, dtype=complex), DT)
        trace = balanced_homodyne(zero, None, det_spec(shot_noise=True), seed=1)
        rbw = 128.0 * 1.5 / (2**16 * DT)
        est = esa_spectrum(trace, rbw)
        per_bin = est.bin_power()
        assert np.mean(per_bin) == pytest.approx(rbw, rel=0.03)

    def test_snr_grows_inverse_rbw(self):
        # tone + unit floor: peak-to-floor ratio scales ~10x per rbw decade
        n = 2**16
        duration = n * DT
        f0 = 4096.0 / duration
        env = tone_envelope(0.05, f0, duration, DT)
        trace = balanced_homodyne(env, None, det_spec(shot_noise=True,
                                                      integration_time=duration),
                                  seed=2)
        snrs = []
        for rbw in (1024.0 * 1.5 / duration, 102.4 * 1.5 / duration):
            est = esa_spectrum(trace, rbw)
            peak, _ = peak_bin_power(est, f0)
            floor = np.median(est.bin_power())
            snrs.append((peak - floor) / floor)
        ratio = snrs[1] / snrs[0]
        assert 8.0 < ratio < 12.0

    def test_rbw_below_reciprocal_duration_rejected(self):
        zero = ComplexEnvelope(np.zeros(1024, dtype=complex), DT)
        trace = balanced_homodyne(zero, None, det_spec(shot_noise=True), seed=0)
        with pytest.raises(GridError):
            esa_spectrum(trace, rbw=0.5 / trace.duration)


class TestIndistinguishableNoisePower:
    def test_total_power_equal_coherent_bin_drops(self):
        # equal-flux noise in place of the probe keeps total SFG power,
        # kills the coherent line
        flux = 1e9
        wg = WaveguideSpec(1e-5, 0.05, 0.0)
        sfg_pair, sfg_noise = [], []
        for s in range(96):
            probe, ref = synthesize_chaotic_pair(CorrelationSpec(flux, SIGMA),
                                                 flux, DURATION, DT, s)
            noise = synthesize_noise(CorrelationSpec(flux, SIGMA), DURATION, DT, s)
            sfg_pair.append(sfg_small_signal(probe, ref, wg))
            sfg_noise.append(sfg_small_signal(noise, ref, wg))
        d_pair = decompose_coherent(sfg_pair)
        d_noise = decompose_coherent(sfg_noise)
        tot_pair = d_pair.coherent_flux + d_pair.incoherent_flux
        tot_noise = d_noise.coherent_flux + d_noise.incoherent_flux
        assert abs(tot_pair - tot_noise) / tot_pair < 0.10
        assert d_pair.coherent_fraction > 0.4
        assert d_noise.coherent_fraction < 0.01


@given(st.floats(min_value=1e6, max_value=1e12),
       st.floats(min_value=0.0, max_value=1e12),
       st.floats(min_value=1e3, max_value=1e12))
@settings(max_examples=50, deadline=None)
def test_snr_enhancement_power_independent(flux_p, flux_n, sigma):
    res = snr_formulas(flux_p, flux_n, sigma, bw=10.0)
    expected = 10.0 * math.log10(2.0 * math.sqrt(math.pi) * sigma / 10.0)
    assert res.enhancement_db == pytest.approx(expected, rel=1e-12)
