"""Chaotic-mode conversion analysis: Gaussian photon-pair amplitudes,
conjugate chaotic-mode pairs, heralding probability, mode overlap scaling.

A chaotic mode (CM) is a square-normalized realization of a nonstationary
circular Gaussian field with two-time correlation

    K(t, t') ~ exp(-(t-t')^2 / (8 sigma_minus^2) - (t+t')^2 / (8 sigma_plus^2)),

realized exactly as a stationary process of correlation width
sigma_eff = (sigma_minus^-2 - sigma_plus^-2)^(-1/2) under a deterministic
Gaussian envelope of duration sigma_plus.  The kernel is positive
semidefinite only for sigma_minus <= sigma_plus; at and beyond that boundary
it degenerates to the rank-one transform-limited pulse, which is how the
fully coherent limit is handled here.

Heralding: projecting the first photon of a Gaussian joint temporal amplitude
onto a CM leaves the partner photon in a conditional wave function phi; the
heralding probability is |<conj(CM)|phi>|^2 / <phi|phi>.  The Gaussian kernel
makes phi reducible to a one-dimensional convolution, so the computation
stays O(n log n) per realization; a direct two-dimensional quadrature is kept
for cross-validation on small grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve

from .errors import GridError
from .signals import ComplexEnvelope, STREAM_CHAOTIC_MODE, member_rng

__all__ = [
    "TimeGrid",
    "GaussianJTA",
    "ChaoticModePair",
    "HeraldingResult",
    "SelectivityEstimate",
    "sample_cm_pair",
    "heralding_probability",
    "selectivity_estimate",
    "cm_gram_matrix",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid with times centered on zero."""

    dt: float
    n: int

    def __post_init__(self):
        if not (self.dt > 0.0) or self.n < 8:
            raise GridError("grid needs dt > 0 and at least 8 samples")

    @property
    def duration(self) -> float:
        return self.n * self.dt

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.n) - (self.n - 1) / 2.0) * self.dt

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n, self.dt)
        w[0] = w[-1] = self.dt / 2.0
        return w


def grid_for_modes(sigma_plus: float, sigma_minus: float, sigma_m: float,
                   oversample: int = 8) -> TimeGrid:
    """Grid resolving the finest correlation scale and covering the envelope."""
    dt = min(sigma_m, sigma_minus) / oversample
    half_span = 5.0 * sigma_plus + 16.0 * sigma_m + 4.0 * sigma_minus
    n = 2 * int(math.ceil(half_span / dt))
    return TimeGrid(dt, n)


@dataclass(frozen=True)
class GaussianJTA:
    """Gaussian joint temporal amplitude of a photon pair.

    sigma_m: pair temporal correlation (s); sigma_p: pair duration (s).
    Square-normalized: the double integral of |psi|^2 is 1.
    """

    sigma_m: float
    sigma_p: float

    def __post_init__(self):
        if not (self.sigma_m > 0.0 and self.sigma_p > 0.0):
            raise ValueError("sigma_m and sigma_p must be > 0")

    def amplitude(self, t_p, t_r):
        c = 1.0 / math.sqrt(2.0 * math.pi * self.sigma_p * self.sigma_m)
        u = np.subtract.outer(t_p, t_r) if np.ndim(t_p) and np.ndim(t_r) else t_p - t_r
        v = np.add.outer(t_p, t_r) if np.ndim(t_p) and np.ndim(t_r) else t_p + t_r
        return c * np.exp(-(u**2) / (8.0 * self.sigma_m**2)
                          - (v**2) / (8.0 * self.sigma_p**2))


@dataclass
class ChaoticModePair:
    a_p: ComplexEnvelope   # square-normalized: integral of |a_p|^2 dt = 1
    a_r: ComplexEnvelope   # exact conjugate of a_p
    sigma_minus: float
    sigma_plus: float
    grid: TimeGrid


@dataclass
class HeraldingResult:
    probability: float
    standard_error: float
    n_realizations: int
    n_excluded: int = 0


@dataclass(frozen=True)
class SelectivityEstimate:
    efficiency_bound: float
    crosstalk_rejection: float
    transmitted_fraction: float
    filter_clips_target: bool


def _trapz(values: np.ndarray, weights: np.ndarray) -> complex:
    return complex(np.sum(values * weights))


def sample_cm_pair(sigma_plus: float, sigma_minus: float, grid: TimeGrid,
                   seed: int, realization: int = 0) -> ChaoticModePair:
    """Draw one conjugate chaotic-mode pair on the grid.

    sigma_minus >= sigma_plus saturates to the transform-limited single-mode
    pulse (Gaussian envelope times one random global phase), the coherent
    limit of the correlation family.
    """
    if not (sigma_plus > 0.0 and sigma_minus > 0.0):
        raise ValueError("sigma_plus and sigma_minus must be > 0")
    if grid.dt > sigma_minus / 4.0:
        raise GridError(f"grid cannot resolve sigma_minus: dt={grid.dt:.3e} > {sigma_minus/4.0:.3e}")
    if grid.duration < 8.0 * sigma_plus:
        raise GridError(f"grid too short for sigma_plus: {grid.duration:.3e} < {8.0*sigma_plus:.3e}")
    t = grid.times
    envelope = np.exp(-(t**2) / (4.0 * sigma_plus**2))
    rng = member_rng(seed, STREAM_CHAOTIC_MODE, realization)
    if sigma_minus >= sigma_plus:
        phase = rng.uniform(0.0, 2.0 * math.pi)
        x = np.full(grid.n, np.exp(1j * phase))
    else:
        sigma_eff = 1.0 / math.sqrt(sigma_minus**-2 - sigma_plus**-2)
        s_tau = 2.0 * sigma_eff  # correlation exp(-tau^2 / (2 s_tau^2))
        nu = np.fft.fftfreq(grid.n, grid.dt)
        psd = math.sqrt(2.0 * math.pi) * s_tau * np.exp(-2.0 * math.pi**2 * s_tau**2 * nu**2)
        amp = np.sqrt(psd / grid.duration)
        white = (rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)) / np.sqrt(2.0)
        x = np.fft.ifft(amp * white) * grid.n
    a = envelope * x
    w = grid.trapezoid_weights()
    norm = math.sqrt(float(np.sum(np.abs(a) ** 2 * w)))
    if norm == 0.0:
        raise ValueError("degenerate all-zero realization")
    a = a / norm
    return ChaoticModePair(
        a_p=ComplexEnvelope(a, grid.dt),
        a_r=ComplexEnvelope(np.conj(a), grid.dt),
        sigma_minus=sigma_minus,
        sigma_plus=sigma_plus,
        grid=grid,
    )


def _conditional_wavefunction_reduced(a_p: np.ndarray, grid: TimeGrid,
                                      jta: GaussianJTA) -> np.ndarray:
    """phi(t_r) = integral conj(a_p(t_p)) psi(t_p, t_r) dt_p via the exact
    Gaussian-kernel reduction: phi(t_r) = C e^{-kappa0 t_r^2} h(lambda t_r)
    with h the conj(a_p) smoothed by a Gaussian of the kernel's inner width."""
    a = 1.0 / (8.0 * jta.sigma_m**2)
    b = 1.0 / (8.0 * jta.sigma_p**2)
    lam = (a - b) / (a + b)
    kappa0 = 4.0 * a * b / (a + b)
    c_psi = 1.0 / math.sqrt(2.0 * math.pi * jta.sigma_p * jta.sigma_m)

    t = grid.times
    s_kernel = 1.0 / math.sqrt(2.0 * (a + b))
    half = min(int(math.ceil(8.0 * s_kernel / grid.dt)), grid.n - 1)
    u = np.arange(-half, half + 1) * grid.dt
    kernel = np.exp(-(a + b) * u**2)
    h = fftconvolve(np.conj(a_p), kernel, mode="same") * grid.dt

    spline_re = CubicSpline(t, h.real)
    spline_im = CubicSpline(t, h.imag)
    x = lam * t
    h_at = spline_re(x) + 1j * spline_im(x)
    return c_psi * np.exp(-kappa0 * t**2) * h_at


def _conditional_wavefunction_direct(a_p: np.ndarray, grid: TimeGrid,
                                     jta: GaussianJTA) -> np.ndarray:
    t = grid.times
    w = grid.trapezoid_weights()
    psi = jta.amplitude(t, t)
    return (np.conj(a_p) * w) @ psi


def heralding_probability(jta: GaussianJTA, sigma_plus: float, sigma_minus: float,
                          n_realizations: int, grid: TimeGrid, seed: int,
                          method: str = "reduced") -> HeraldingResult:
    """Probability that the partner photon is found in the conjugate CM.

    Per realization: P = |<a_r | phi>|^2 / <phi | phi>, phi the partner wave
    function conditioned on projecting the first photon onto a_p.  Averaged
    over CM realizations; realizations with vanishing projection probability
    (denominator below 1e-12) are excluded and counted, more than half
    excluded fails the run.
    """
    if n_realizations < 100:
        raise ValueError("need at least 100 realizations")
    if grid.dt > min(jta.sigma_m, sigma_minus) / 4.0:
        raise GridError("grid cannot resolve the pair correlation or the CM coherence")
    if method not in ("reduced", "direct"):
        raise ValueError("method must be 'reduced' or 'direct'")
    w = grid.trapezoid_weights()
    values = []
    excluded = 0
    for k in range(n_realizations):
        pair = sample_cm_pair(sigma_plus, sigma_minus, grid, seed, realization=k)
        a_p = pair.a_p.samples
        if method == "reduced":
            phi = _conditional_wavefunction_reduced(a_p, grid, jta)
        else:
            phi = _conditional_wavefunction_direct(a_p, grid, jta)
        denom = float(np.sum(np.abs(phi) ** 2 * w))
        if denom < 1e-12:
            excluded += 1
            continue
        # <a_r | phi> with a_r = conj(a_p)
        num = abs(_trapz(a_p * phi, w)) ** 2
        p = num / denom
        if p > 1.0 + 1e-6:
            raise RuntimeError(f"heralding probability {p} above 1; numerical failure")
        values.append(min(p, 1.0))
    if excluded > n_realizations // 2:
        raise RuntimeError(
            f"{excluded}/{n_realizations} realizations nearly orthogonal to the pair state")
    values = np.asarray(values)
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else float("nan")
    return HeraldingResult(float(values.mean()), se, n_realizations, excluded)


def selectivity_estimate(cm_duration: float, cm_bandwidth: float,
                         filter_bandwidth: float) -> SelectivityEstimate:
    """Filter-based crosstalk rejection for chaotic-mode conversion.

    The converted target mode is a transform-limited pulse of spectral width
    about 1/duration; crosstalk from other CMs spreads over the full mode
    bandwidth, so a filter of the given width transmits only
    filter/cm_bandwidth of it.  The efficiency bound is the lossless peak of
    the coherent conversion curve.
    """
    if cm_duration * cm_bandwidth < 100.0:
        raise ValueError("time-bandwidth product must be >> 1 for this estimate")
    if filter_bandwidth <= 0.0:
        raise ValueError("filter bandwidth must be > 0")
    transmitted = filter_bandwidth / cm_bandwidth
    return SelectivityEstimate(
        efficiency_bound=1.0,
        crosstalk_rejection=1.0 - transmitted,
        transmitted_fraction=transmitted,
        filter_clips_target=filter_bandwidth < 1.0 / cm_duration,
    )


def cm_gram_matrix(pairs: list[ChaoticModePair]) -> np.ndarray:
    """Pairwise inner products <a_i | a_j>; diagonal is 1 by normalization."""
    if not pairs:
        raise ValueError("no modes given")
    grid = pairs[0].grid
    for p in pairs[1:]:
        if p.grid != grid:
            raise GridError("modes do not share a common grid")
    w = grid.trapezoid_weights()
    fields = np.stack([p.a_p.samples for p in pairs])
    return (fields * w) @ np.conj(fields.T)
