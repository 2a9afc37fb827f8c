"""Split-step three-wave solver and small-signal transfer tests.

Oracles: the analytic CW conversion curve, direct numerical integration of
the closed-form spectrum on the sampling grid, and fine-step reference
solutions for the order check.
"""

import numpy as np
import pytest

from chaosqfc.detection import analytic_sfg_psd, decompose_coherent
from chaosqfc.errors import GridError
from chaosqfc.propagation import (
    WaveguideSpec,
    analytic_cw_efficiency,
    run_efficiency_sweep,
    sfg_small_signal,
    solve_three_wave,
)
from chaosqfc.signals import (
    ComplexEnvelope,
    CorrelationSpec,
    delay_envelope,
    synthesize_chaotic_pair,
    tone_envelope,
)

SIGMA = 1e9
DT = 1.0 / (8.0 * SIGMA)
N = 1024
DURATION = N * DT


def cw_fields(theta, flux_probe=1.0, n=64, dt=DT, length=0.05):
    flux_ref = flux_probe / 1e-6
    gamma = theta / (np.sqrt(flux_ref) * length)
    wg = WaveguideSpec(gamma, length, 0.0, 256)
    probe = tone_envelope(flux_probe, 0.0, n * dt, dt)
    ref = tone_envelope(flux_ref, 0.0, n * dt, dt)
    return probe, ref, wg


def chaotic_pair(seed, flux_p=1e9, flux_r=1e9):
    return synthesize_chaotic_pair(CorrelationSpec(flux_p, SIGMA), flux_r,
                                   DURATION, DT, seed)


class TestSmallSignal:
    def test_zero_input_gives_zero(self):
        probe, ref, wg = cw_fields(0.3)
        zero = probe.with_samples(np.zeros_like(probe.samples))
        out = sfg_small_signal(zero, ref, wg)
        assert np.all(out.samples == 0.0)

    def test_cw_output_flux_exact(self):
        p_p, p_r = 2.0, 3.0
        wg = WaveguideSpec(gamma=0.05, length=0.7, delta_beta=0.0)
        probe = tone_envelope(p_p, 0.0, 64 * DT, DT)
        ref = tone_envelope(p_r, 0.0, 64 * DT, DT)
        out = sfg_small_signal(probe, ref, wg)
        expected = (wg.gamma * wg.length) ** 2 * p_p * p_r
        np.testing.assert_allclose(out.mean_flux(), expected, rtol=1e-12)

    def test_grid_mismatch_rejected(self):
        probe = tone_envelope(1.0, 0.0, 64 * DT, DT)
        ref = tone_envelope(1.0, 0.0, 32 * DT, DT)
        with pytest.raises(GridError):
            sfg_small_signal(probe, ref, WaveguideSpec(0.1, 0.05))

    def test_ensemble_psd_matches_closed_form(self):
        # oracle: closed-form spectrum evaluated on the same frequency grid
        flux_p = flux_r = 1e9
        wg = WaveguideSpec(gamma=1e-5, length=0.05, delta_beta=64 * DT / 0.05)
        m = 400
        dnu = 1.0 / DURATION
        acc = None
        mean_field = 0.0j
        for s in range(m):
            probe, ref = chaotic_pair(s, flux_p, flux_r)
            out = sfg_small_signal(probe, ref, wg)
            spec = np.fft.fft(out.samples) / out.n
            p = np.abs(spec) ** 2 / dnu
            acc = p if acc is None else acc + p
            mean_field += spec[0]
        psd = acc / m
        mean_field /= m
        nu = np.fft.fftfreq(N, DT)
        ana = analytic_sfg_psd(flux_p, flux_r, 0.0, SIGMA, wg, np.sort(nu))
        order = np.argsort(nu)
        g2l2 = (wg.gamma * wg.length) ** 2

        # coherent line: dc-bin weight
        coh_sim = abs(mean_field) ** 2
        assert abs(coh_sim - g2l2 * flux_p * flux_r) / (g2l2 * flux_p * flux_r) < 0.05

        # background total power, line bin excluded on both sides
        dc = np.argmin(np.abs(np.sort(nu)))
        bg_sim = (np.sum(psd[order]) - psd[0]) * dnu
        bg_ana = (np.sum(ana.psd) - ana.psd[dc]) * dnu
        assert abs(bg_sim - bg_ana) / bg_ana < 0.05

        # sinc nulls at multiples of 1/(delta_beta L): background dies there
        null_nu = 1.0 / wg.walkoff_window
        k_null = np.argmin(np.abs(np.sort(nu) - null_nu))
        peak_bg = np.max(psd[order][dc + 2:])
        assert psd[order][k_null] < 0.02 * peak_bg


class TestThreeWaveSolver:
    def test_full_conversion_at_half_pi(self):
        probe, ref, wg = cw_fields(np.pi / 2.0)
        res = solve_three_wave(probe, ref, None, wg)
        eta = res.flux_out["sfg"] / res.flux_in["probe"]
        assert abs(eta - 1.0) < 1e-6

    def test_back_conversion_at_pi(self):
        probe, ref, wg = cw_fields(np.pi)
        res = solve_three_wave(probe, ref, None, wg)
        eta = res.flux_out["sfg"] / res.flux_in["probe"]
        assert eta < 1e-6

    def test_analytic_cw_curve(self):
        # |eta - sin^2(theta)| <= 1e-3 across [0, 2 pi]
        for theta in np.linspace(0.05, 2.0 * np.pi, 25):
            probe, ref, wg = cw_fields(theta)
            res = solve_three_wave(probe, ref, None, wg)
            eta = res.flux_out["sfg"] / res.flux_in["probe"]
            assert abs(eta - np.sin(theta) ** 2) < 1e-3

    def test_manley_rowe_conservation(self):
        probe, ref = chaotic_pair(1)
        wg = WaveguideSpec(1e-5, 0.05, 64 * DT / 0.05, 128)
        res = solve_three_wave(probe, ref, None, wg)
        assert res.manley_rowe_drift <= 1e-6
        # z record confirms the pairwise sums hold along the guide
        rec = res.z_flux_record
        bs = rec[:, 1] + rec[:, 3]
        rs = rec[:, 2] + rec[:, 3]
        assert np.max(np.abs(bs - bs[0])) / bs[0] < 1e-6
        assert np.max(np.abs(rs - rs[0])) / rs[0] < 1e-6

    def test_solver_order_fourth(self):
        # halving dz shrinks the CW error ~16x against a fine reference
        theta = 1.3
        errs = []
        for steps in (16, 32):
            probe, ref, _ = cw_fields(theta)
            flux_ref = 1.0 / 1e-6
            gamma = theta / (np.sqrt(flux_ref) * 0.05)
            wg = WaveguideSpec(gamma, 0.05, 0.0, steps)
            res = solve_three_wave(probe, ref, None, wg, tol=1.0)
            wg_fine = WaveguideSpec(gamma, 0.05, 0.0, 1024)
            ref_res = solve_three_wave(probe, ref, None, wg_fine, tol=1.0)
            errs.append(np.max(np.abs(res.sfg_out.samples - ref_res.sfg_out.samples)))
        ratio = errs[0] / errs[1]
        assert 8.0 < ratio < 40.0

    def test_small_signal_agreement(self):
        # depleted solver matches the undepleted transfer within 1% RMS
        flux_p = 1e9
        flux_r = 1e12
        gamma = 2e-6
        theta = gamma * np.sqrt(flux_r) * 0.05
        assert theta <= 0.1
        wg = WaveguideSpec(gamma, 0.05, 48 * DT / 0.05, 64)
        rms_all, scale_all = 0.0, 0.0
        for s in range(8):
            probe, ref = chaotic_pair(s, flux_p, flux_r)
            full = solve_three_wave(probe, ref, None, wg).sfg_out.samples
            small = sfg_small_signal(probe, ref, wg).samples
            rms_all += np.mean(np.abs(full - small) ** 2)
            scale_all += np.mean(np.abs(small) ** 2)
        assert np.sqrt(rms_all / scale_all) < 0.01

    def test_phase_insensitivity(self):
        # global probe phase leaves coherent output power unchanged
        wg = WaveguideSpec(1e-5, 0.05, 0.0, 64)
        probe, ref = chaotic_pair(3, 1e9, 1e10)
        outs = []
        for theta in (0.0, 1.1):
            rotated = probe.with_samples(probe.samples * np.exp(1j * theta))
            res = solve_three_wave(rotated, ref, None, wg)
            outs.append(np.abs(np.mean(res.sfg_out.samples)) ** 2)
        assert abs(outs[0] - outs[1]) / outs[0] < 1e-9

    def test_delay_envelope(self):
        # c-SFG efficiency vs imposed probe delay follows the squared
        # field correlation; fitted width within 5% of analytic
        wg = WaveguideSpec(1e-6, 0.05, 0.0, 64)
        flux_p, flux_r = 1e9, 1e12
        s_rad = 2.0 * np.pi * SIGMA
        delays = np.linspace(-1.2 / s_rad, 1.2 / s_rad, 9)
        m = 48
        coh = np.zeros(delays.size)
        for i, tau in enumerate(delays):
            mean = 0.0j
            for s in range(m):
                probe, ref = chaotic_pair(s, flux_p, flux_r)
                probe_d = delay_envelope(probe, tau)
                res = solve_three_wave(probe_d, ref, None, wg)
                mean += np.mean(res.sfg_out.samples)
            coh[i] = np.abs(mean / m) ** 2
        from scipy.optimize import curve_fit

        def model(tau, amp, w):
            return amp * np.exp(-(tau**2) / (2.0 * w**2))

        popt, _ = curve_fit(model, delays, coh, p0=[coh.max(), 1.0 / (2.0 * s_rad)])
        fitted_w = abs(popt[1])
        # exp(-(2 pi sigma)^2 tau^2) written as exp(-tau^2/(2 w^2))
        analytic_w = 1.0 / (np.sqrt(2.0) * s_rad)
        assert abs(fitted_w - analytic_w) / analytic_w < 0.05


class TestAnalyticCwEfficiency:
    def test_peak(self):
        assert analytic_cw_efficiency(np.pi / 2.0, 0.0, 1e9) == pytest.approx(1.0)

    def test_envelope_at_one_coherence_time(self):
        # power envelope exp(-(2 pi sigma)^2 tau^2): e^-1 at tau = 1/(2 pi sigma)
        sigma = 3.0e9
        tau = 1.0 / (2.0 * np.pi * sigma)
        val = analytic_cw_efficiency(np.pi / 2.0, tau, sigma)
        assert val == pytest.approx(np.exp(-1.0), rel=1e-12)

    def test_half_at_quarter_pi(self):
        assert analytic_cw_efficiency(np.pi / 4.0, 0.0, 1e6) == pytest.approx(0.5)

    def test_range(self):
        for theta in np.linspace(0, 7, 29):
            v = analytic_cw_efficiency(theta, 1e-12, 1e9)
            assert 0.0 <= v <= 1.0


class TestEfficiencySweep:
    def test_zero_reference_power(self):
        wg = WaveguideSpec(1e-5, 0.05, 0.0, 64)
        stats = run_efficiency_sweep(CorrelationSpec(1e6, SIGMA), wg, [0.0],
                                     n_trials=30, seed=0,
                                     duration=512 * DT, dt=DT)
        assert stats[0].total_sfg_efficiency == pytest.approx(0.0, abs=1e-9)
        assert stats[0].c_sfg_efficiency == 0.0

    def test_baseline_full_conversion(self):
        wg = WaveguideSpec(1e-5, 0.05, 0.0, 64)
        p_half_pi = (np.pi / 2.0 / (1e-5 * 0.05)) ** 2
        stats = run_efficiency_sweep(CorrelationSpec(1e6, SIGMA), wg, [p_half_pi],
                                     n_trials=30, seed=0,
                                     duration=512 * DT, dt=DT)
        assert abs(stats[0].baseline_cw_efficiency - 1.0) < 1e-6

    def test_einvariants_hold(self):
        wg = WaveguideSpec(1e-5, 0.05, 48 * DT / 0.05, 64)
        p = (1.2 / (1e-5 * 0.05)) ** 2
        stats = run_efficiency_sweep(CorrelationSpec(1e6, SIGMA), wg, [p],
                                     n_trials=40, seed=1,
                                     duration=1024 * DT, dt=DT)
        s = stats[0]
        slack = 3.0 * (s.total_sfg_se + s.c_sfg_se)
        assert -slack <= s.c_sfg_efficiency <= s.total_sfg_efficiency + slack
        assert s.total_sfg_efficiency <= 1.0 + slack
