"""End-to-end drivers for the application formulations."""

from ._common import DriverError
from .fixtures import (Graph, MomentData, boyle3, example61_covariance, icosahedron,
                       icosahedron_complement)
from .options import expected_payoff, options_bound
from .regression import convex_regress
from .sphere import min_form_on_sphere
from .spca import Component, SpcaResult, adjusted_variance, sparse_pca
from .stableset import lifted_form, stable_set_bound

__all__ = [
    "DriverError", "Graph", "MomentData", "boyle3", "example61_covariance", "icosahedron",
    "icosahedron_complement", "expected_payoff", "options_bound", "convex_regress",
    "min_form_on_sphere", "Component", "SpcaResult", "adjusted_variance", "sparse_pca",
    "lifted_form", "stable_set_bound",
]
