"""Shallow neural-network source terms in parabolic PDEs, trained through a discrete adjoint."""
from .forward import PdeProblem, solve_forward
from .grid import Field, SpaceTimeGrid, inner_product_l2, norm
from .kernel import assemble_kernel, kernel_drift, kernel_spectrum
from .loss import evaluate, gradient
from .net import InitDistribution, NetParams, eval_net, init_params

__version__ = "0.1.0"

__all__ = [
    "Field", "InitDistribution", "NetParams", "PdeProblem", "SpaceTimeGrid", "assemble_kernel",
    "eval_net", "evaluate", "gradient", "init_params", "inner_product_l2", "kernel_drift", "kernel_spectrum", "norm",
    "solve_forward",
]
