"""Physical constants and unit helpers.

Field amplitudes everywhere are sqrt(photons/s), so |A|^2 is photon flux.
Spectral widths are ordinary frequency (Hz); formulas written in angular
frequency carry their 2*pi factors explicitly.
"""

import math

C_LIGHT = 299_792_458.0  # m/s
PLANCK_H = 6.626_070_15e-34  # J s

# Gaussian FWHM = 2*sqrt(2*ln 2) * sigma
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


def wavelength_span_to_hz(span_m: float, center_m: float) -> float:
    """Convert a small wavelength span around ``center_m`` to a frequency span."""
    return C_LIGHT * span_m / center_m**2


def sigma_from_fwhm_wavelength(fwhm_m: float, center_m: float) -> float:
    """Gaussian sigma (Hz) of a source specified by its FWHM in wavelength."""
    return wavelength_span_to_hz(fwhm_m, center_m) / FWHM_PER_SIGMA


def flux_to_watts(flux: float, wavelength_m: float) -> float:
    """Display helper: photon flux to optical power at the given wavelength."""
    return flux * PLANCK_H * C_LIGHT / wavelength_m


def watts_to_flux(power_w: float, wavelength_m: float) -> float:
    return power_w * wavelength_m / (PLANCK_H * C_LIGHT)


def db(ratio: float) -> float:
    return 10.0 * math.log10(ratio)
