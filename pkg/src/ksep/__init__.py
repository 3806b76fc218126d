"""Simulation and exact verification tools for K-exclusion on the integers."""
from .errors import (ConfigError, DomainError, KernelError, KsepError, NotPositiveDefinite,
                     OverlappingIntervals, ResourceExceeded, ToleranceUnreachable, TooFewSamples,
                     TooLarge, WindowExit)
from .kernel import JumpKernel, validate
from .profiles import BinomialStep, DeterministicStep, ProductPeriodic, c_nu, sample_configuration
from .scaling import ScalingMap, make_block_map, make_time_map
from .sim import (Configuration, ParticleSnapshot, order_statistics, rescaled_counts,
                  simulate_direct, simulate_stirring)

__version__ = "0.1.0"

__all__ = [
    "BinomialStep", "ConfigError", "Configuration", "DeterministicStep", "DomainError",
    "JumpKernel", "KernelError", "KsepError", "NotPositiveDefinite", "OverlappingIntervals",
    "ParticleSnapshot", "ProductPeriodic", "ResourceExceeded", "ScalingMap",
    "ToleranceUnreachable", "TooFewSamples", "TooLarge", "WindowExit", "c_nu",
    "make_block_map", "make_time_map", "order_statistics", "rescaled_counts",
    "sample_configuration", "simulate_direct", "simulate_stirring", "validate",
]
