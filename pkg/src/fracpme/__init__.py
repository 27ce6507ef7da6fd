"""Numerical laboratory for the 1D porous medium equation with fractional pressure.

The model is u_t = div(u^{m-1} grad p) with p = (-Delta)^{-s} u, posed for
nonnegative densities.  The package provides discrete fractional operators,
a conservative explicit solver for the regularized problem, the integrated
(cumulative-mass) solver, barrier constructions for the finite/infinite
propagation experiments, and measurement-style diagnostics.
"""

from fracpme.field import Field, FieldKind, Grid, ModelParams, Topology, cumulative, gradient, mass

__version__ = "0.1.0"

__all__ = [
    "Field",
    "FieldKind",
    "Grid",
    "ModelParams",
    "Topology",
    "cumulative",
    "gradient",
    "mass",
    "__version__",
]
