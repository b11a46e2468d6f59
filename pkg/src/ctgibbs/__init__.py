"""Bayesian fan-beam CT reconstruction with uncertain view angles.

The sampler alternates a local Laplace draw for the image, component-wise
Metropolis for the view angles, and gamma or Metropolis updates for the
noise precision, prior scale and angle concentration.
"""
__version__ = "0.1.0"

from .estimator import HybridGibbsReconstructor, LaggedDiffusivityMAP
from .geometry import FanBeamGeometry, Projector, back_project, forward_project, system_matrix
from .gibbs import GibbsChain, GibbsConfig, ProblemData, run

__all__ = [
    "FanBeamGeometry",
    "GibbsChain",
    "GibbsConfig",
    "HybridGibbsReconstructor",
    "LaggedDiffusivityMAP",
    "ProblemData",
    "Projector",
    "__version__",
    "back_project",
    "forward_project",
    "run",
    "system_matrix",
]
