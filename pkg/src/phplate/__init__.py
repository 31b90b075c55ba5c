"""Structure-preserving mixed finite elements for port-Hamiltonian plates.

Three discretizations of the linear plate dynamics M e' = J e + F are
provided: ``bjt`` (Mindlin, quadrilaterals, strongly symmetric stresses),
``afw`` (Mindlin, triangles, weak symmetry with a rotation multiplier) and
``hhj`` (Kirchhoff, triangles, normal-normal continuous moments).
"""

__version__ = "0.1.0"

from .assembly import (  # noqa: E402
    SCHEMES,
    MaterialParams,
    PHSystem,
    StructureError,
    apply_essential_bcs,
    assemble_system,
    default_params,
)
from .mesh import RectMesh, TriMesh, build_rect_grid, build_tri_grid  # noqa: E402
from .simulation import RunResult, simulate  # noqa: E402

__all__ = [
    "SCHEMES",
    "MaterialParams",
    "PHSystem",
    "RectMesh",
    "RunResult",
    "StructureError",
    "TriMesh",
    "apply_essential_bcs",
    "assemble_system",
    "build_rect_grid",
    "build_tri_grid",
    "default_params",
    "simulate",
]
