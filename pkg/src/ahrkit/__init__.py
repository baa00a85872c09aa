"""Numerical toolkit for a two-species exclusion process with first-order
transversal fluctuations: exact contour-integral probabilities, a kinetic
Monte Carlo simulator, Fredholm-determinant reductions, and the
Tracy-Widom x Gaussian limit laws they converge to.
"""

from .core import (
    ModelParams,
    ParticleConfig,
    ScalingConstants,
    ScalingCoords,
    eigenvalue_lambda,
    macroscopic_currents,
    normal_mode_coords,
    scaled_particle_numbers,
    scaling_constants,
)
from .current import (
    CurrentQuery,
    joint_current_prob,
    joint_current_prob_reduced,
    tasep_step_prob,
)
from .fredholm import (
    DecompositionResult,
    DiscreteKernel,
    GFunctionSpec,
    decompose,
    direct_multifold,
    transform_to_fredholm,
)

__version__ = "0.1.0"

__all__ = [
    "CurrentQuery",
    "DecompositionResult",
    "DiscreteKernel",
    "GFunctionSpec",
    "ModelParams",
    "ParticleConfig",
    "ScalingConstants",
    "ScalingCoords",
    "decompose",
    "direct_multifold",
    "eigenvalue_lambda",
    "joint_current_prob",
    "joint_current_prob_reduced",
    "macroscopic_currents",
    "normal_mode_coords",
    "scaled_particle_numbers",
    "scaling_constants",
    "tasep_step_prob",
    "transform_to_fredholm",
    "__version__",
]
