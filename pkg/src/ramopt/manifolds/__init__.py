from .base import BaseMismatchError, Geometry, GeometryError, Tangent, UnsupportedOperation, same_point
from .euclidean import Euclidean, euclidean_geometry
from .fixedrank import FixedRank, FixedRankPoint, FixedRankVector, fixedrank_geometry
from .oblique import Oblique, oblique_geometry, sphere_geometry
from .spd import SPD, spd_geometry
from .stiefel import Stiefel, stiefel_geometry

__all__ = [
    "BaseMismatchError",
    "Euclidean",
    "FixedRank",
    "FixedRankPoint",
    "FixedRankVector",
    "Geometry",
    "GeometryError",
    "Oblique",
    "SPD",
    "Stiefel",
    "Tangent",
    "UnsupportedOperation",
    "euclidean_geometry",
    "fixedrank_geometry",
    "oblique_geometry",
    "same_point",
    "sphere_geometry",
    "spd_geometry",
    "stiefel_geometry",
]
