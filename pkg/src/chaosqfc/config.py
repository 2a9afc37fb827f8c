"""Human-editable scenario configuration (INI, flat sections, SI units).

Schema (all values SI unless the key says otherwise):

    [source]      flux_probe, flux_reference, sigma_hz, center_wavelength_m
    [noise]       flux
    [target]      reflectivity, round_trip_delay_s, doppler_shift_hz,
                  vibration_rms_rad, vibration_bandwidth_hz, carrier_phase_rad
    [waveguide]   gamma, length_m, group_index_diff OR delta_beta_s_per_m,
                  n_z_steps
    [dispersion]  total_ps_per_nm, compensated
    [detection]   electrical_rbw_hz, integration_time_s, serrodyne_shift_hz,
                  optical_bandpass_center_hz, optical_bandpass_width_hz,
                  lo_flux, shot_noise
    [run]         duration_s, dt_s, reference_delay_s, n_trials, seed, solver

Unknown keys and invariant violations are reported with their field path.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .detection import DetectionSpec
from .errors import ConfigError
from .propagation import WaveguideSpec
from .scenarios import ScenarioConfig, TargetModel
from .signals import CorrelationSpec
from .units import C_LIGHT

_SCHEMA = {
    "source": {"flux_probe", "flux_reference", "sigma_hz", "center_wavelength_m"},
    "noise": {"flux"},
    "target": {"reflectivity", "round_trip_delay_s", "doppler_shift_hz",
               "vibration_rms_rad", "vibration_bandwidth_hz", "carrier_phase_rad"},
    "waveguide": {"gamma", "length_m", "group_index_diff", "delta_beta_s_per_m",
                  "n_z_steps"},
    "dispersion": {"total_ps_per_nm", "compensated"},
    "detection": {"electrical_rbw_hz", "integration_time_s", "serrodyne_shift_hz",
                  "optical_bandpass_center_hz", "optical_bandpass_width_hz",
                  "lo_flux", "shot_noise"},
    "run": {"duration_s", "dt_s", "reference_delay_s", "n_trials", "seed", "solver"},
}


class _Reader:
    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser
        self.problems: list[str] = []

    def check_keys(self):
        for section in self.parser.sections():
            if section not in _SCHEMA:
                self.problems.append(f"{section}: unknown section")
                continue
            for key in self.parser[section]:
                if key not in _SCHEMA[section]:
                    self.problems.append(f"{section}.{key}: unknown key")

    def get(self, section, key, cast, default=None, required=False):
        try:
            raw = self.parser.get(section, key, fallback=None)
        except configparser.NoSectionError:
            raw = None
        if raw is None:
            if required:
                self.problems.append(f"{section}.{key}: required key missing")
            return default
        try:
            if cast is bool:
                return raw.strip().lower() in ("1", "true", "yes", "on")
            return cast(raw)
        except ValueError:
            self.problems.append(f"{section}.{key}: cannot parse {raw!r}")
            return default


def load_scenario_config(path) -> ScenarioConfig:
    """Parse and validate a scenario file; raises ConfigError listing every
    violation with its field path."""
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with path.open() as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as e:
        raise ConfigError([f"{path}: {e}"]) from e

    r = _Reader(parser)
    r.check_keys()

    flux_probe = r.get("source", "flux_probe", float, required=True)
    flux_reference = r.get("source", "flux_reference", float, required=True)
    sigma = r.get("source", "sigma_hz", float, required=True)
    wavelength = r.get("source", "center_wavelength_m", float, default=1560e-9)
    noise_flux = r.get("noise", "flux", float, default=0.0)

    source = None
    if not r.problems or (flux_probe is not None and sigma is not None):
        try:
            source = CorrelationSpec(flux_probe or 0.0, sigma or 1.0)
        except ValueError as e:
            r.problems.append(f"source: {e}")

    try:
        target = TargetModel(
            reflectivity=r.get("target", "reflectivity", float, default=1.0),
            round_trip_delay=r.get("target", "round_trip_delay_s", float, default=0.0),
            doppler_shift=r.get("target", "doppler_shift_hz", float, default=0.0),
            vibration_rms_rad=r.get("target", "vibration_rms_rad", float, default=0.0),
            vibration_bandwidth_hz=r.get("target", "vibration_bandwidth_hz", float, default=0.0),
            carrier_phase_rad=r.get("target", "carrier_phase_rad", float, default=0.0),
        )
    except ValueError as e:
        r.problems.append(f"target: {e}")
        target = TargetModel()

    delta_beta = r.get("waveguide", "delta_beta_s_per_m", float, default=None)
    gid = r.get("waveguide", "group_index_diff", float, default=None)
    if delta_beta is None:
        delta_beta = (gid / C_LIGHT) if gid is not None else 0.0
    try:
        wg = WaveguideSpec(
            gamma=r.get("waveguide", "gamma", float, required=True) or 0.0,
            length=r.get("waveguide", "length_m", float, default=0.05),
            delta_beta=delta_beta,
            n_z_steps=r.get("waveguide", "n_z_steps", int, default=256),
        )
    except ValueError as e:
        r.problems.append(f"waveguide: {e}")
        wg = WaveguideSpec(0.0, 0.05)

    try:
        det = DetectionSpec(
            electrical_rbw=r.get("detection", "electrical_rbw_hz", float, required=True) or 1.0,
            integration_time=r.get("detection", "integration_time_s", float, required=True) or 1.0,
            serrodyne_shift=r.get("detection", "serrodyne_shift_hz", float, default=0.0),
            optical_bandpass_center=r.get("detection", "optical_bandpass_center_hz", float, default=0.0),
            optical_bandpass_width=r.get("detection", "optical_bandpass_width_hz", float, default=0.0),
            lo_flux=r.get("detection", "lo_flux", float, default=1e12),
            shot_noise=r.get("detection", "shot_noise", bool, default=True),
        )
    except ValueError as e:
        r.problems.append(f"detection: {e}")
        det = DetectionSpec(electrical_rbw=1.0, integration_time=1.0)

    if noise_flux is not None and noise_flux < 0.0:
        r.problems.append("noise.flux: must be >= 0")

    duration = r.get("run", "duration_s", float, required=True)
    dt = r.get("run", "dt_s", float, required=True)
    cfg = None
    if not r.problems:
        try:
            cfg = ScenarioConfig(
                source=source,
                flux_reference=flux_reference,
                noise_flux=noise_flux,
                target=target,
                wg=wg,
                det=det,
                duration=duration,
                dt=dt,
                reference_delay=r.get("run", "reference_delay_s", float, default=0.0),
                dispersion_ps_per_nm=r.get("dispersion", "total_ps_per_nm", float, default=0.0),
                dispersion_compensated=r.get("dispersion", "compensated", bool, default=True),
                center_wavelength=wavelength,
                n_trials=r.get("run", "n_trials", int, default=16),
                seed=r.get("run", "seed", int, default=0),
                solver=r.get("run", "solver", str, default="full"),
            )
        except ValueError as e:
            r.problems.append(f"run: {e}")
    if r.problems:
        raise ConfigError(sorted(r.problems))
    return cfg
