"""irelab — a desk-scale laboratory for flat-minima enhancement of
gradient-based optimizers.

The package wraps pluggable base optimizers (:mod:`irelab.optim`) so that
update components along flat directions of the loss are amplified
(:mod:`irelab.ire`), provides analytic test landscapes with known minima
manifolds (:mod:`irelab.landscapes`), dense symmetric eigensolvers with a
compiled core and a pure-python fallback (:mod:`irelab.linalg`,
:mod:`irelab._kernels`), and an effective-dynamics harness that measures
sharpness reduction, manifold drift, and stochastic limiting behavior
(:mod:`irelab.theory`).  Experiment plumbing — configs, CSV logs, sweeps,
verification suites, and the ``irelab`` command — lives in
:mod:`irelab.expcli`.
"""

from . import expcli, ire, landscapes, linalg, optim, records, rng, theory
from .ire import IreConfig, IreRuntime, build_mask, ire_step
from .landscapes import (
    DivergenceError,
    InterpolatingRegression,
    QuadraticValley,
    SoftmaxModel,
    Toy2D,
)
from .optim import OptimizerConfig
from .records import CheckResult, TrajectoryLog
from .rng import spawn_stream

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "expcli",
    "ire",
    "landscapes",
    "linalg",
    "optim",
    "records",
    "rng",
    "theory",
    "IreConfig",
    "IreRuntime",
    "build_mask",
    "ire_step",
    "DivergenceError",
    "InterpolatingRegression",
    "QuadraticValley",
    "SoftmaxModel",
    "Toy2D",
    "OptimizerConfig",
    "CheckResult",
    "TrajectoryLog",
    "spawn_stream",
]
