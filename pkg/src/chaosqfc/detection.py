"""Receiver chain: coherent/incoherent split, closed-form spectra and SNR,
optical bandpass, serrodyne shift, balanced homodyne, and ESA analysis.

The sum-frequency output of a conjugate pair is a single-frequency coherent
line riding on a broadband incoherent background.  Everything downstream of
the waveguide exists to separate the two: phase matching and a grating reject
most of the background optically, the serrodyne shift moves the line off dc,
and a narrowband electrical measurement does the rest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import GridError
from .signals import (
    ComplexEnvelope,
    SpectrumEstimate,
    STREAM_SHOT,
    member_rng,
    require_same_grid,
)

__all__ = [
    "DetectionSpec",
    "CoherentDecomposition",
    "HomodyneTrace",
    "decompose_coherent",
    "decompose_coherent_arrays",
    "analytic_sfg_psd",
    "snr_formulas",
    "SnrFormulas",
    "apply_bandpass",
    "serrodyne_shift",
    "balanced_homodyne",
    "esa_spectrum",
    "peak_bin_power",
]


@dataclass(frozen=True)
class DetectionSpec:
    """Receiver settings after the waveguide.

    optical_bandpass_width = 0 disables the grating stage.  The electrical
    resolution bandwidth is the equivalent noise bandwidth of the ESA window
    and must be resolvable within one integration time.
    """

    electrical_rbw: float
    integration_time: float
    serrodyne_shift: float = 0.0
    optical_bandpass_center: float = 0.0
    optical_bandpass_width: float = 0.0
    lo_flux: float = 1e12
    shot_noise: bool = True

    def __post_init__(self):
        if self.electrical_rbw < 1.0 / self.integration_time:
            raise ValueError(
                "electrical_rbw must be >= 1/integration_time "
                f"({self.electrical_rbw:.3e} < {1.0/self.integration_time:.3e})")
        if self.optical_bandpass_width > 0.0 and \
                self.optical_bandpass_width <= self.electrical_rbw:
            raise ValueError("optical bandpass width must exceed the electrical rbw")


@dataclass
class CoherentDecomposition:
    coherent_flux: float
    incoherent_flux: float
    coherent_fraction: float


@dataclass
class HomodyneTrace:
    """Balanced-homodyne RF record in shot-noise units.

    With the signal off and shot noise on, the one-sided PSD of rf_samples is
    flat at 1.  A coherent tone of optical flux F integrates to 4 F.
    """

    rf_samples: np.ndarray
    dt: float

    @property
    def n(self) -> int:
        return self.rf_samples.size

    @property
    def duration(self) -> float:
        return self.n * self.dt


def decompose_coherent_arrays(fields: np.ndarray, dt: float) -> tuple[float, float, float]:
    """Coherent/incoherent flux split of an (m, n) ensemble of field records.

    The coherent flux is |time-and-ensemble mean|^2 with the finite-sample
    bias removed: the square of a mean over m records of duration T carries an
    excess S_inc(0)/(m T), with S_inc(0) the incoherent PSD at zero offset,
    estimated from the bins adjacent to dc of the ensemble periodogram.
    Returns (coherent_flux, incoherent_flux, bias_subtracted).
    """
    m, n = fields.shape
    mu = complex(fields.mean())
    total = float(np.mean(np.abs(fields) ** 2))
    spec = np.fft.fft(fields, axis=1) / n
    power_bins = np.mean(np.abs(spec) ** 2, axis=0)  # per-bin power, sums to total
    dnu = 1.0 / (n * dt)
    # incoherent PSD near dc from the neighbouring bins (dc bin holds the line)
    near = np.r_[power_bins[1:4], power_bins[-3:]]
    s_inc_0 = float(near.mean() / dnu)
    bias = s_inc_0 / (m * n * dt)
    coherent = max(abs(mu) ** 2 - bias, 0.0)
    incoherent = max(total - coherent, 0.0)
    return coherent, incoherent, bias


def decompose_coherent(ensemble: list[ComplexEnvelope]) -> CoherentDecomposition:
    """Split an SFG ensemble into its coherent line and incoherent background."""
    members = list(ensemble)
    if len(members) < 2:
        raise ValueError("need at least 2 ensemble members to separate the coherent part")
    require_same_grid(*members)
    fields = np.stack([m.samples for m in members])
    coherent, incoherent, _ = decompose_coherent_arrays(fields, members[0].dt)
    denom = coherent + incoherent
    fraction = coherent / denom if denom > 0.0 else 0.0
    return CoherentDecomposition(coherent, incoherent, fraction)


def analytic_sfg_psd(flux_probe: float, flux_reference: float, flux_noise: float,
                     sigma: float, wg, freq_grid: np.ndarray) -> SpectrumEstimate:
    """Closed-form small-signal SFG spectrum sampled on a frequency grid.

    S(nu) = gamma^2 L^2 sinc^2(delta_beta L nu) *
            [ P_p P_r delta(nu) + (P_n + P_p) P_r / (2 sqrt(pi) sigma)
              * exp(-nu^2 / (4 sigma^2)) ]

    The delta line is represented as a single bin of integrated weight
    gamma^2 L^2 P_p P_r.  The background carries the noise term and the full
    probe intensity-fluctuation term: for thermal light the incoherent product
    power equals the coherent product power, so the probe contributes with
    weight P_p (not P_p/2).
    """
    nu = np.asarray(freq_grid, dtype=float)
    if nu.size < 2:
        raise GridError("frequency grid too small")
    dnu_grid = float(np.min(np.diff(np.sort(nu))))
    span = nu.max() - nu.min() + dnu_grid
    if span < 8.0 * sigma * (1.0 - 1e-9):
        raise GridError("frequency grid must span at least +-4 sigma")
    g2l2 = (wg.gamma * wg.length) ** 2
    pm = np.sinc(wg.delta_beta * wg.length * nu) ** 2
    background = ((flux_noise + flux_probe) * flux_reference
                  / (2.0 * math.sqrt(math.pi) * sigma)
                  * np.exp(-(nu**2) / (4.0 * sigma**2)))
    psd = g2l2 * pm * background
    dnu = float(nu[1] - nu[0])
    i0 = int(np.argmin(np.abs(nu)))
    psd = psd.copy()
    psd[i0] += g2l2 * flux_probe * flux_reference / dnu
    return SpectrumEstimate(nu, psd, resolution_bandwidth=dnu, n_averages=1)


@dataclass(frozen=True)
class SnrFormulas:
    snr_qfc: float
    snr_dd: float
    enhancement_db: float


def snr_formulas(flux_probe: float, flux_noise: float, sigma: float,
                 bw: float) -> SnrFormulas:
    """Closed-form coherent-receiver and direct-detection SNR.

    snr_qfc = (2 sqrt(pi) sigma / BW) * 2 P_p / (2 P_n + P_p)
    snr_dd  = P_p / (P_n + P_p)
    enhancement_db = 10 log10(2 sqrt(pi) sigma / BW), independent of powers.
    """
    if not (bw > 0.0 and sigma > 0.0):
        raise ValueError("bw and sigma must be > 0")
    if flux_probe + flux_noise <= 0.0:
        raise ValueError("probe and noise flux cannot both be zero")
    ratio = 2.0 * math.sqrt(math.pi) * sigma / bw
    snr_qfc = ratio * 2.0 * flux_probe / (2.0 * flux_noise + flux_probe)
    snr_dd = flux_probe / (flux_noise + flux_probe)
    return SnrFormulas(snr_qfc, snr_dd, 10.0 * math.log10(ratio))


def apply_bandpass(env: ComplexEnvelope, center: float, width: float) -> ComplexEnvelope:
    """Ideal rectangular spectral mask of the given center and full width."""
    nu = env.frequencies
    dnu = 1.0 / env.duration
    if width < 2.0 * dnu:
        raise GridError(f"bandpass width {width:.3e} Hz below two grid bins ({2*dnu:.3e} Hz)")
    nyq = 0.5 / env.dt
    if center - width / 2.0 < -nyq or center + width / 2.0 > nyq:
        raise GridError("bandpass extends outside the Nyquist range")
    mask = np.abs(nu - center) <= width / 2.0 * (1.0 + 1e-12)
    spec = np.fft.fft(env.samples)
    spec[~mask] = 0.0
    return env.with_samples(np.fft.ifft(spec))


def serrodyne_shift(env: ComplexEnvelope, shift: float,
                    levels: int | None = None,
                    amplitude_scale: float = 1.0) -> ComplexEnvelope:
    """Frequency translation by sawtooth phase modulation.

    The ideal sawtooth exp(i 2 pi frac(shift t)) equals exp(i 2 pi shift t)
    exactly.  ``levels`` quantizes the ramp to an M-step staircase and
    ``amplitude_scale`` scales the ramp amplitude; both model an imperfect
    modulator (spurious harmonics, unshifted carrier leak).
    """
    if shift == 0.0 and levels is None and amplitude_scale == 1.0:
        return env.copy()
    nyq = 0.5 / env.dt
    if abs(shift) >= nyq / 4.0:
        raise GridError(f"serrodyne shift {shift:.3e} Hz must stay below Nyquist/4 ({nyq/4:.3e} Hz)")
    t = env.times
    ramp = shift * t
    frac = ramp - np.floor(ramp)
    if levels is not None:
        if levels < 2:
            raise ValueError("levels must be >= 2")
        frac = np.floor(frac * levels) / levels
    phase = 2.0 * np.pi * amplitude_scale * frac
    return env.with_samples(env.samples * np.exp(1j * phase))


def balanced_homodyne(sig: ComplexEnvelope, lo_phase_noise: np.ndarray | None,
                      det: DetectionSpec, seed: int) -> HomodyneTrace:
    """Linearized balanced homodyne against a strong local oscillator.

    Output in shot-noise units: x(t) = 2 sqrt(2) Re[A(t) e^{-i phi_LO(t)}]
    plus, when enabled, white Gaussian shot noise of one-sided PSD 1.  A phase
    process applied to both the signal and the LO cancels exactly.
    """
    if det.lo_flux <= 0.0:
        raise ValueError("local oscillator flux must be > 0")
    sig_flux = sig.mean_flux()
    if sig_flux > det.lo_flux / 10.0:
        raise ValueError(
            f"homodyne linearization needs LO flux >> signal flux "
            f"(signal {sig_flux:.3e} vs LO {det.lo_flux:.3e})")
    field = sig.samples
    if lo_phase_noise is not None:
        if lo_phase_noise.shape != field.shape:
            raise GridError("LO phase-noise record must match the signal grid")
        field = field * np.exp(-1j * lo_phase_noise)
    x = 2.0 * np.sqrt(2.0) * field.real.astype(float)
    if det.shot_noise:
        rng = member_rng(seed, STREAM_SHOT)
        x = x + rng.normal(0.0, np.sqrt(0.5 / sig.dt), size=x.shape)
    return HomodyneTrace(x, sig.dt)


def esa_spectrum(trace: HomodyneTrace, rbw: float,
                 n_averages_hint: int | None = None) -> SpectrumEstimate:
    """One-sided Welch spectrum of the RF trace at the requested resolution
    bandwidth (Hann equivalent noise bandwidth)."""
    if rbw < 1.0 / trace.duration:
        raise GridError(
            f"rbw {rbw:.3e} Hz below the reciprocal record duration "
            f"{1.0/trace.duration:.3e} Hz")
    fs = 1.0 / trace.dt
    nperseg = max(8, min(int(round(1.5 * fs / rbw)), trace.n))
    freqs, psd = sps.welch(trace.rf_samples, fs=fs, window="hann", nperseg=nperseg,
                           noverlap=nperseg // 2, detrend=False, scaling="density")
    win = sps.get_window("hann", nperseg)
    enbw = fs * np.sum(win**2) / np.sum(win) ** 2
    n_avg = max(1, (trace.n - nperseg) // (nperseg - nperseg // 2) + 1)
    return SpectrumEstimate(freqs, psd, float(enbw), n_avg)


def average_esa(traces: list[HomodyneTrace], rbw: float) -> SpectrumEstimate:
    """ESA spectrum averaged across independent trial records."""
    acc = None
    n_avg = 0
    for tr in traces:
        est = esa_spectrum(tr, rbw)
        acc = est.psd if acc is None else acc + est.psd
        n_avg += est.n_averages
    return SpectrumEstimate(est.frequencies, acc / len(traces), est.resolution_bandwidth, n_avg)


def peak_bin_power(spec: SpectrumEstimate, freq: float,
                   search_bins: int = 2) -> tuple[float, float]:
    """Peak power (PSD * rbw) in the bins around ``freq``; returns (power, f_peak)."""
    idx = int(np.argmin(np.abs(spec.frequencies - freq)))
    lo = max(0, idx - search_bins)
    hi = min(spec.psd.size, idx + search_bins + 1)
    k = lo + int(np.argmax(spec.psd[lo:hi]))
    return float(spec.psd[k] * spec.resolution_bandwidth), float(spec.frequencies[k])
