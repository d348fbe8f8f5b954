"""SDF-matching objective, its analytic gradient, and the Dirichlet regularizer."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .mesh import TriMesh, box_diagonal
from .sdf import MeshDistanceField

# below this distance the radial direction is ill-defined; fall back to the
# closest triangle's unit normal (times the sign)
NEAR_SURFACE_FRACTION = 1e-9


@dataclass(frozen=True)
class EnergyReport:
    """Objective value, optional full-space gradient, and per-point residuals."""

    energy: float
    gradient: np.ndarray  # (3n,) or None when only the value was requested
    residuals: np.ndarray  # (k,) f_i - g_i


def _source_field(x, triangles, workers=-1):
    mesh = TriMesh(np.asarray(x, dtype=np.float64).reshape(-1, 3), triangles)
    # the source side always signs by pseudonormal; the optimizer treats the
    # sign as locally constant
    return mesh, MeshDistanceField(mesh, sign_mode="pseudonormal", workers=workers)


def sdf_energy(x, triangles, quad, workers=-1):
    """Sum over quadrature points of squared source/target SDF differences."""
    _, field = _source_field(x, triangles, workers)
    res = field.query(quad.points).signed - quad.target_values
    return EnergyReport(float(res @ res), None, res)


def sdf_energy_gradient(x, triangles, quad, workers=-1):
    """Energy plus d(energy)/dx with the closest feature and sign held fixed.

    Each quadrature point contributes 2 (f_i - g_i) df_i/dx, where df_i/dx
    puts -s_i b_j (Q_i - c_i)/||Q_i - c_i|| on the closest triangle's vertex j.
    """
    mesh, field = _source_field(x, triangles, workers)
    rec = field.query(quad.points)
    res = rec.signed - quad.target_values
    energy = float(res @ res)

    diff = quad.points - rec.point
    eps_near = NEAR_SURFACE_FRACTION * box_diagonal(quad.box)
    near = rec.distance < eps_near
    safe = np.where(near, 1.0, rec.distance)
    direction = diff / safe[:, None]
    if near.any():
        direction[near] = rec.sign[near, None] * field.face_normals[rec.triangle[near]]

    coeff = -2.0 * res * rec.sign  # scalar factor per point
    contrib = coeff[:, None, None] * rec.barycentric[:, :, None] * direction[:, None, :]
    grad = np.zeros((mesh.num_vertices, 3))
    np.add.at(grad, triangles[rec.triangle], contrib)
    return EnergyReport(energy, grad.reshape(-1), res)


def dirichlet_energy(x, x0, L):
    """Smoothness quadratic 1/2 d^T L d on the displacement, applied per axis.

    Returns (value, gradient) with the gradient laid out like x.
    """
    x = np.asarray(x, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    n = L.shape[0]
    if x.shape != (3 * n,) or x0.shape != (3 * n,):
        raise InvalidInputError(
            f"expected flat coordinates of length {3 * n}, got {x.shape} / {x0.shape}"
        )
    d = (x - x0).reshape(n, 3)
    Ld = L @ d
    value = 0.5 * float(np.einsum("ij,ij->", d, Ld))
    return value, Ld.reshape(-1)


def total_energy(x, triangles, quad, reg_lambda=0.0, L=None, x0=None,
                 with_gradient=True, workers=-1):
    """E_sdf + reg_lambda * E_dirichlet with summed gradients (default reg off)."""
    if reg_lambda < 0:
        raise InvalidInputError(f"reg_lambda must be >= 0, got {reg_lambda}")
    if reg_lambda > 0 and (L is None or x0 is None):
        raise InvalidInputError("regularized energy needs L and x0")
    if with_gradient:
        report = sdf_energy_gradient(x, triangles, quad, workers)
    else:
        report = sdf_energy(x, triangles, quad, workers)
    if reg_lambda == 0:
        return report
    value, grad = dirichlet_energy(x, x0, L)
    total_grad = None
    if with_gradient:
        total_grad = report.gradient + reg_lambda * grad
    return EnergyReport(report.energy + reg_lambda * value, total_grad, report.residuals)
