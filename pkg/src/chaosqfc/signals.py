"""Sampled complex envelopes, chaotic conjugate-pair synthesis, and estimators.

The probe/reference source is a stationary circular complex Gaussian process
with Gaussian field correlation

    <A(t) A*(t')> = P * f(t - t'),    f(tau) = exp(-tau^2 (2 pi sigma)^2 / 2),

where sigma is the spectral standard deviation in Hz and P the photon flux.
The reference is the exact sample-by-sample conjugate of the probe, which is
what makes their sum-frequency product phase-flat.

Synthesis is by spectral factorization: white circular Gaussian draws in the
frequency domain weighted by the square-rooted PSD, inverse transformed.  The
realizations are exactly (circularly) stationary; records should span many
coherence times so periodic wraparound is statistically irrelevant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import GridError

__all__ = [
    "ComplexEnvelope",
    "CorrelationSpec",
    "CorrelationEstimate",
    "SpectrumEstimate",
    "gaussian_field_correlation",
    "gaussian_flux_psd",
    "synthesize_chaotic_pair",
    "synthesize_noise",
    "estimate_autocorrelation",
    "estimate_psd",
    "member_rng",
    "tone_envelope",
    "delay_envelope",
]


def member_rng(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic per-member generator.

    Member k of an ensemble draws from ``member_rng(seed, tag, k)``; the
    stream depends only on (seed, tags), never on scheduling order.
    """
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(s) for s in stream)))


# stream tags for derived generators
STREAM_PAIR = 0x70
STREAM_NOISE = 0x6E
STREAM_VIBRATION = 0x76
STREAM_SHOT = 0x73
STREAM_CHAOTIC_MODE = 0x63


@dataclass
class ComplexEnvelope:
    """Uniformly sampled complex baseband field, |samples|^2 in photons/s.

    carrier_offset records where the envelope's reference frequency sits
    relative to its band center; it is bookkeeping only and is not touched by
    numerical transformations.
    """

    samples: np.ndarray
    dt: float
    carrier_offset: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise GridError("envelope needs at least 2 samples")
        if not (self.dt > 0.0):
            raise GridError("sample spacing dt must be positive")

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.n * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n) * self.dt

    @property
    def frequencies(self) -> np.ndarray:
        """Unshifted FFT frequency grid (spacing 1/duration)."""
        return np.fft.fftfreq(self.n, self.dt)

    def mean_flux(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))

    def with_samples(self, samples: np.ndarray) -> "ComplexEnvelope":
        return ComplexEnvelope(samples, self.dt, self.carrier_offset)

    def copy(self) -> "ComplexEnvelope":
        return ComplexEnvelope(self.samples.copy(), self.dt, self.carrier_offset)

    def same_grid(self, other: "ComplexEnvelope", rtol: float = 1e-12) -> bool:
        return self.n == other.n and abs(self.dt - other.dt) <= rtol * self.dt


def require_same_grid(*envs: ComplexEnvelope) -> None:
    first = envs[0]
    for e in envs[1:]:
        if not first.same_grid(e):
            raise GridError("envelopes do not share a common sampling grid")


@dataclass(frozen=True)
class CorrelationSpec:
    """Gaussian correlation model of a stationary chaotic field.

    flux:  photons/s
    sigma: spectral standard deviation in Hz (FWHM = 2*sqrt(2 ln2)*sigma)
    """

    flux: float
    sigma: float
    shape: str = "gaussian"

    def __post_init__(self):
        if self.flux < 0.0:
            raise ValueError("flux must be >= 0")
        if not (self.sigma > 0.0):
            raise ValueError("sigma must be > 0")
        if self.shape != "gaussian":
            raise ValueError("only the gaussian correlation shape is supported")

    def correlation(self, tau):
        return self.flux * gaussian_field_correlation(tau, self.sigma)

    def psd(self, nu):
        return gaussian_flux_psd(nu, self.flux, self.sigma)


@dataclass
class CorrelationEstimate:
    lags: np.ndarray           # s
    values: np.ndarray         # complex, photons/s
    standard_error: np.ndarray
    n_members: int = 1


@dataclass
class SpectrumEstimate:
    frequencies: np.ndarray        # Hz, ascending
    psd: np.ndarray                # photons/s per Hz (optical) or 1/Hz (RF)
    resolution_bandwidth: float    # Hz (equivalent noise bandwidth)
    n_averages: int

    def integrated_power(self) -> float:
        dnu = float(self.frequencies[1] - self.frequencies[0])
        return float(np.sum(self.psd) * dnu)

    def bin_power(self) -> np.ndarray:
        """Per-resolution-bandwidth power, the narrowband detection statistic."""
        return self.psd * self.resolution_bandwidth


def gaussian_field_correlation(tau, sigma):
    """f(tau) = exp(-tau^2 (2 pi sigma)^2 / 2); unity at tau = 0."""
    tau = np.asarray(tau, dtype=float)
    return np.exp(-0.5 * (2.0 * np.pi * sigma * tau) ** 2)


def gaussian_flux_psd(nu, flux, sigma):
    """Two-sided PSD (photons/s per Hz) paired with the Gaussian correlation."""
    nu = np.asarray(nu, dtype=float)
    return flux / (np.sqrt(2.0 * np.pi) * sigma) * np.exp(-(nu**2) / (2.0 * sigma**2))


def _check_grid(sigma: float, duration: float, dt: float) -> int:
    if dt > 1.0 / (8.0 * sigma):
        raise GridError(
            f"time step too coarse: dt={dt:.3e} s exceeds 1/(8 sigma)={1.0/(8.0*sigma):.3e} s"
        )
    if duration < 10.0 / sigma:
        raise GridError(
            f"record too short: duration={duration:.3e} s is below 10 coherence times "
            f"(10/sigma={10.0/sigma:.3e} s)"
        )
    n = int(round(duration / dt))
    if n < 2:
        raise GridError("record must contain at least 2 samples")
    return n


def _synthesize_batch(flux: float, sigma: float, n: int, dt: float,
                      rng: np.random.Generator, m: int = 1) -> np.ndarray:
    """Draw m independent stationary realizations, shape (m, n).

    Frequency bins are independent CN(0, S(nu)*dnu); weights renormalized so
    the exact grid flux equals ``flux`` (sub-1e-4 adjustment at dt <= 1/(8 sigma)).
    """
    if flux == 0.0:
        return np.zeros((m, n), dtype=np.complex128)
    nu = np.fft.fftfreq(n, dt)
    amp = np.sqrt(gaussian_flux_psd(nu, flux, sigma) / (n * dt))
    amp *= np.sqrt(flux / np.sum(amp**2))
    white = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2.0)
    return np.fft.ifft(amp * white, axis=1) * n


def synthesize_chaotic_pair(spec_p: CorrelationSpec, flux_r: float, duration: float,
                            dt: float, seed: int) -> tuple[ComplexEnvelope, ComplexEnvelope]:
    """Synthesize a conjugate probe/reference pair.

    The probe is a stationary circular Gaussian realization of ``spec_p``; the
    reference is sqrt(flux_r/flux_p) * conj(probe), exact sample by sample.
    Deterministic given (spec, seed).
    """
    if flux_r < 0.0:
        raise ValueError("reference flux must be >= 0")
    n = _check_grid(spec_p.sigma, duration, dt)
    rng = member_rng(seed, STREAM_PAIR)
    probe = _synthesize_batch(spec_p.flux, spec_p.sigma, n, dt, rng)[0]
    if spec_p.flux == 0.0:
        reference = np.zeros_like(probe)
    else:
        reference = np.sqrt(flux_r / spec_p.flux) * np.conj(probe)
    return ComplexEnvelope(probe, dt), ComplexEnvelope(reference, dt)


def synthesize_noise(spec_n: CorrelationSpec, duration: float, dt: float,
                     seed: int) -> ComplexEnvelope:
    """Independent chaotic realization, statistically matched to a probe of
    equal flux and sigma but uncorrelated with any conjugate pair."""
    n = _check_grid(spec_n.sigma, duration, dt)
    rng = member_rng(seed, STREAM_NOISE)
    return ComplexEnvelope(_synthesize_batch(spec_n.flux, spec_n.sigma, n, dt, rng)[0], dt)


def estimate_autocorrelation(env: ComplexEnvelope, max_lag: float,
                             ensemble: list[ComplexEnvelope] = ()) -> CorrelationEstimate:
    """Unbiased lag-product autocorrelation, averaged over time and ensemble.

    Standard errors come from member-to-member scatter; a single record is
    split into four blocks instead.
    """
    members = [env] + list(ensemble)
    if not members or members[0] is None:
        raise ValueError("ensemble is empty")
    require_same_grid(*members)
    dt, n = env.dt, env.n
    if not (max_lag < env.duration / 4.0):
        raise GridError("max_lag must be below a quarter of the record duration")
    k_max = int(np.floor(max_lag / dt))

    def lag_products(x: np.ndarray) -> np.ndarray:
        vals = np.empty(k_max + 1, dtype=np.complex128)
        for k in range(k_max + 1):
            vals[k] = np.mean(x[k:] * np.conj(x[: n - k]))
        return vals

    if len(members) >= 2:
        per_member = np.array([lag_products(m.samples) for m in members])
    else:
        quarters = np.array_split(env.samples, 4)
        per_member = np.array([lag_products(q) for q in quarters])

    mean_pos = per_member.mean(axis=0)
    se_pos = per_member.std(axis=0, ddof=1) / np.sqrt(per_member.shape[0])

    lags = np.concatenate([-np.arange(k_max, 0, -1) * dt, np.arange(k_max + 1) * dt])
    values = np.concatenate([np.conj(mean_pos[k_max:0:-1]), mean_pos])
    se = np.concatenate([se_pos[k_max:0:-1], se_pos])
    return CorrelationEstimate(lags, values, np.abs(se), n_members=len(members))


def _nperseg_for_rbw(rbw: float, dt: float, n: int, window: str) -> int:
    # equivalent noise bandwidth: hann 1.5/(nperseg*dt), boxcar 1/(nperseg*dt)
    enbw_factor = {"hann": 1.5, "boxcar": 1.0}[window]
    nperseg = int(round(enbw_factor / (rbw * dt)))
    return max(8, min(nperseg, n))


def estimate_psd(ensemble: list[ComplexEnvelope], resolution_bandwidth: float,
                 window: str = "hann") -> SpectrumEstimate:
    """Segment-averaged periodogram of an ensemble of envelope records.

    resolution_bandwidth is the equivalent noise bandwidth of the analysis
    window; the estimate integrates to the mean flux (Parseval).
    """
    members = list(ensemble)
    if not members:
        raise ValueError("ensemble is empty")
    require_same_grid(*members)
    dt = members[0].dt
    duration = members[0].duration
    if resolution_bandwidth < 2.0 / duration:
        raise GridError(
            f"resolution bandwidth {resolution_bandwidth:.3e} Hz unachievable: "
            f"records of {duration:.3e} s support at best {2.0/duration:.3e} Hz"
        )
    nperseg = _nperseg_for_rbw(resolution_bandwidth, dt, members[0].n, window)
    fs = 1.0 / dt
    acc = None
    n_avg = 0
    for m in members:
        freqs, p = sps.welch(m.samples, fs=fs, window=window, nperseg=nperseg,
                             noverlap=nperseg // 2, detrend=False,
                             return_onesided=False, scaling="density")
        acc = p if acc is None else acc + p
        n_avg += max(1, (m.n - nperseg) // (nperseg - nperseg // 2) + 1)
    psd = acc / len(members)
    order = np.argsort(freqs)
    win = sps.get_window(window, nperseg)
    enbw = fs * np.sum(win**2) / np.sum(win) ** 2
    return SpectrumEstimate(freqs[order], np.maximum(psd[order], 0.0), float(enbw), n_avg)


def tone_envelope(flux: float, freq: float, duration: float, dt: float,
                  phase: float = 0.0) -> ComplexEnvelope:
    """Single-frequency field of the given flux at offset ``freq``."""
    t = np.arange(int(round(duration / dt))) * dt
    return ComplexEnvelope(np.sqrt(flux) * np.exp(1j * (2.0 * np.pi * freq * t + phase)), dt)


def delay_envelope(env: ComplexEnvelope, delay: float) -> ComplexEnvelope:
    """Cyclic delay with exact sub-sample interpolation (spectral phase)."""
    if delay == 0.0:
        return env.copy()
    spec = np.fft.fft(env.samples)
    spec *= np.exp(-2j * np.pi * env.frequencies * delay)
    return env.with_samples(np.fft.ifft(spec))
