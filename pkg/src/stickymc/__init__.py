"""stickymc: moderate-deviation Monte Carlo for random walks in random
environments and their sticky-Brownian / stochastic-heat-equation limits.

Hot kernels run in a compiled lane when the extension built; a pure-numpy
lane produces bit-identical results otherwise (see stickymc.backend).
"""

from .backend import BACKEND_NAME, HAVE_EXT
from .core import (
    CharacteristicMeasure,
    ModerateDeviationScaling,
    MomentEstimate,
    RunningMoments,
    derive_constants,
    derive_stream,
)
from .env import EnvModel, QuenchedKernel, evolve, kernel_tail
from .fields import TestFunction, tail_field, x_field
from .rng import RngStream

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "HAVE_EXT",
    "CharacteristicMeasure",
    "ModerateDeviationScaling",
    "MomentEstimate",
    "RunningMoments",
    "derive_constants",
    "derive_stream",
    "EnvModel",
    "QuenchedKernel",
    "evolve",
    "kernel_tail",
    "TestFunction",
    "tail_field",
    "x_field",
    "RngStream",
    "__version__",
]
