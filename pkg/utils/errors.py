"""
Exception hierarchy shared by every linksim package
The CLI maps these onto process exit codes
"""

from typing import Optional


class LinkSimError(Exception):
    """Base class for all linksim errors"""

    exit_code = 1


class ConfigError(LinkSimError):
    """Invalid, unknown or out-of-range configuration value"""

    exit_code = 2


class InfeasibleError(LinkSimError):
    """Constraint cannot be met inside the search range"""

    exit_code = 3


class ConvergenceError(LinkSimError):
    """Numerical routine gave up before reaching its tolerance"""

    def __init__(self, message: str, estimate: float, abserr: Optional[float] = None):
        super().__init__(message)
        self.estimate = estimate
        self.abserr = abserr


class DegenerateDensityError(LinkSimError, ValueError):
    """Density does not exist for the requested parameters (beta = 1)"""


class ReplicationError(LinkSimError):
    """A single replication failed; carries its seed for reruns"""

    def __init__(self, message: str, seed: int):
        super().__init__(f"{message} (seed={seed})")
        self.seed = seed


class SweepError(LinkSimError):
    """Sweep point evaluator returned nothing usable"""
