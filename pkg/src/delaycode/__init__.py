"""Fixed-delay lossless source coding with side-information: exponents, codes, simulation."""

from .source_model import (JointDistribution, SingleDistribution, bsc_joint, conditional_entropy,
                           entropy, gallager_e0, kl_divergence, resolve_distribution,
                           tilted_conditional_entropy, tilted_distribution, ternary_source,
                           uniform_source)
from .exponents import (block_lower, block_upper, critical_rate, focusing_bound,
                        focusing_bound_direct, si_only_upper, symmetric_si_upper)
from .queue_analysis import (QueueWalkParams, delay_error_bound, scheme_exponent, stationary)

__version__ = "0.1.0"

__all__ = [
    "JointDistribution", "QueueWalkParams", "SingleDistribution", "block_lower", "block_upper",
    "bsc_joint", "conditional_entropy", "critical_rate", "delay_error_bound", "entropy",
    "focusing_bound", "focusing_bound_direct", "gallager_e0", "kl_divergence",
    "resolve_distribution", "scheme_exponent", "si_only_upper", "stationary",
    "symmetric_si_upper", "tilted_conditional_entropy", "tilted_distribution",
    "ternary_source", "uniform_source",
]
