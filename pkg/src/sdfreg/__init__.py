"""Non-rigid mesh registration by SDF matching in an adaptive LBS subspace."""

from .energy import EnergyReport, dirichlet_energy, sdf_energy, sdf_energy_gradient, total_energy
from .errors import InvalidInputError, MeshFormatError, SdfRegError, SolverError
from .mesh import (
    TriMesh,
    joint_bounding_box,
    load_obj,
    save_obj,
    unvectorize,
    vectorize,
)
from .operators import cotan_laplacian, lumped_mass
from .optimizer import (
    OptimizerConfig,
    OptimizerTrace,
    line_search,
    register,
    stall_check,
    stall_schedule,
)
from .sdf import MeshDistanceField, QuadratureSet, make_quadrature, signed_distance
from .subspace import (
    SkinningModes,
    SubspaceBasis,
    affine_block,
    build_basis,
    compute_modes,
    project_gradient,
    reconstruct,
)

__version__ = "0.1.0"

__all__ = [
    "EnergyReport", "InvalidInputError", "MeshDistanceField", "MeshFormatError",
    "OptimizerConfig", "OptimizerTrace", "QuadratureSet", "SdfRegError",
    "SkinningModes", "SolverError", "SubspaceBasis", "TriMesh", "affine_block",
    "build_basis", "compute_modes", "cotan_laplacian", "dirichlet_energy",
    "joint_bounding_box", "line_search", "load_obj", "lumped_mass",
    "make_quadrature", "project_gradient", "reconstruct", "register", "save_obj",
    "sdf_energy", "sdf_energy_gradient", "signed_distance", "stall_check",
    "stall_schedule", "total_energy", "unvectorize", "vectorize",
]
