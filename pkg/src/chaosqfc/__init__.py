"""chaosqfc: chaotic-light frequency-conversion LiDAR simulator.

Conjugate chaotic source synthesis, three-wave sum-frequency mixing with
walk-off, narrowband coherent detection, end-to-end ranging and
noise-rejection scenarios, and chaotic-mode conversion analysis.
"""

__version__ = "0.1.0"

from .detection import (
    CoherentDecomposition,
    DetectionSpec,
    HomodyneTrace,
    analytic_sfg_psd,
    apply_bandpass,
    balanced_homodyne,
    decompose_coherent,
    esa_spectrum,
    serrodyne_shift,
    snr_formulas,
)
from .errors import ConfigError, ConvergenceError, GridError, StageError
from .propagation import (
    EfficiencyStats,
    PropagationResult,
    WaveguideSpec,
    analytic_cw_efficiency,
    run_efficiency_sweep,
    sfg_small_signal,
    solve_three_wave,
)
from .quantum import (
    ChaoticModePair,
    GaussianJTA,
    HeraldingResult,
    TimeGrid,
    cm_gram_matrix,
    heralding_probability,
    sample_cm_pair,
    selectivity_estimate,
)
from .scenarios import (
    RangingProfile,
    ScenarioConfig,
    TargetModel,
    apply_dispersion,
    apply_target,
    range_scan,
    simulate_link,
)
from .signals import (
    ComplexEnvelope,
    CorrelationEstimate,
    CorrelationSpec,
    SpectrumEstimate,
    estimate_autocorrelation,
    estimate_psd,
    synthesize_chaotic_pair,
    synthesize_noise,
)

__all__ = [name for name in dir() if not name.startswith("_")]
