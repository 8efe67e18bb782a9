"""
Low-frequency expansion of second-order linear systems.

For ``M w'' + D w' + K w = b0 u + b1 u'`` under a unit step, the response
approaches ``t**2/2 w2 + t w1 + w0``. The package computes these three
vectors by a modal (spectral) route, by a kernel-constrained linear solve
(algebraic route) and by simulation followed by least-squares regression.
"""

from .algebraic import kernel_basis, low_order_algebraic
from .core import (DimensionError, InvalidInputError, KernelBasis, LowFreqError,
                   LowOrderModel, NumericalError, PreconditionError, Route,
                   SecondOrderSystem, StepResponse, check_consistency)
from .models import (BeamConfig, PlateConfig, StringConfig, beam_fem, example_ode3,
                     plate_bfs_fem, string_fem)
from .regress import fit_trend
from .simulate import step_response
from .spectral import low_order_spectral, low_order_spectral_all, modal_decompose

__all__ = [
    "BeamConfig", "DimensionError", "InvalidInputError", "KernelBasis", "LowFreqError",
    "LowOrderModel", "NumericalError", "PlateConfig", "PreconditionError", "Route",
    "SecondOrderSystem", "StepResponse", "StringConfig", "beam_fem", "check_consistency",
    "example_ode3", "fit_trend", "kernel_basis", "low_order_algebraic",
    "low_order_spectral", "low_order_spectral_all", "modal_decompose", "plate_bfs_fem",
    "step_response", "string_fem",
]
