"""High-order virtual elements on polygonal meshes with selectable internal-moment bases."""
from .errors import (
    ConditioningError,
    FitError,
    InvalidGeometryError,
    MeshFormatError,
    NonconformingMeshError,
    PolyVEMError,
    UnsupportedDegreeError,
)
from .mesh import Mesh, Polygon, collapsing_hexagon, hanging_square, read_mesh, write_mesh
from .poly import BasisKind
from .local import StabilizationKind, local_operators

__version__ = "0.1.0"
