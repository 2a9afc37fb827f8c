"""Exception types shared across the simulator."""


class GridError(ValueError):
    """Sampling grid is unusable for the requested operation."""


class ConvergenceError(RuntimeError):
    """Split-step solver failed its conservation tolerance.

    Carries the worst relative photon-flux drift observed so the caller can
    report how far off the run was.
    """

    def __init__(self, message: str, drift: float):
        super().__init__(message)
        self.drift = drift


class StageError(RuntimeError):
    """A link-simulation stage failed; names the stage for diagnostics."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage


class ConfigError(ValueError):
    """Scenario configuration is invalid; carries one entry per violation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
