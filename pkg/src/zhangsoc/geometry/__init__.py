"""Exact rational polytope engine and the derived symbolic machinery.

No floating point enters any predicate in this subpackage: emptiness,
containment, intersection and image computations are all decided over
Fraction.
"""

from .polytope import Constraint, Polytope
from .regions import Region, RegionSet
from .atlas import AtlasPiece, ContinuityAtlas, build_atlas
from .coding import TransitionMatrix, markov_coding, chain_statistics
from .removability import removability_certificate, RemovabilityResult
from .bifurcation import bifurcation_scan

__all__ = [
    "Constraint",
    "Polytope",
    "Region",
    "RegionSet",
    "AtlasPiece",
    "ContinuityAtlas",
    "build_atlas",
    "TransitionMatrix",
    "markov_coding",
    "chain_statistics",
    "removability_certificate",
    "RemovabilityResult",
    "bifurcation_scan",
]
