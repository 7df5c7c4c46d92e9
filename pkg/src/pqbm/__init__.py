"""Numerical verification toolkit for (p,q)-Brunn-Minkowski inequalities
of log-concave measures on symmetric convex bodies (dimensions 2-6)."""

from .bodies import (Body, GridSupport, ball, box, contains, cross_polytope,
                     ellipsoid, inradius, interpolate, lq_ball, p_combine,
                     polytope, shifted_ball, wulff)
from .densities import Density, gaussian, lebesgue, power
from .errors import DomainError, InputError, NumericError
from .measures import (MeasureEstimate, RatioEstimate, grad_v_bound_check,
                       k2_estimate, measure, restricted_moment)

__version__ = "0.1.0"

__all__ = [
    "Body", "GridSupport", "Density", "MeasureEstimate", "RatioEstimate",
    "DomainError", "InputError", "NumericError",
    "ball", "box", "contains", "cross_polytope", "ellipsoid", "gaussian",
    "grad_v_bound_check", "inradius", "interpolate", "k2_estimate",
    "lebesgue", "lq_ball", "measure", "p_combine", "polytope", "power",
    "restricted_moment", "shifted_ball", "wulff",
]
