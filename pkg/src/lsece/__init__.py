"""Exact, binned and logit-smoothed expected calibration error."""

from .binned import (BinningScheme, ReliabilityDiagram, bin_assignments, binned_ece,
                     reliability, top_class_reduce)
from .core import (DEFAULT_CLAMP_TOL, PROBIT, SIGMOID, BinaryPredictionSet,
                   CalibrationError, DegenerateWeightsError, LinkFunction,
                   MulticlassPredictionSet, NoiseKernel, PreconditionError, ValidationError,
                   clamp_probability, probs_to_logits)
from .exact import (DiscreteDistributionSpec, LevelSetPartition, discontinuity_witnesses,
                    empirical_exact_ece, level_sets, perturbation_probe, population_ece)
from .smooth import (KernelSmoother, SmoothedEstimate, SmoothReliabilityCurve, ls_ece,
                     nw_conditional_mean, smooth_reliability, smoothed_density)

__version__ = "0.1.0"
