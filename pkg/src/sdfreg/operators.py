"""Cotangent Laplacian and lumped (barycentric) mass matrix assembly."""

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError
from .mesh import box_diagonal

# survives sliver triangles without blowing up the stiffness
COT_CLAMP = 1e6


def triangle_areas(mesh):
    v = mesh.vertices
    t = mesh.triangles
    e1 = v[t[:, 1]] - v[t[:, 0]]
    e2 = v[t[:, 2]] - v[t[:, 0]]
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


def cotan_laplacian(mesh):
    """Positive semi-definite cotangent Laplacian (CSR, symmetric).

    Off-diagonal L_ij = -1/2 * sum of cotangents of the angles opposite edge
    ij; diagonal makes rows sum to zero. Cotangents are clamped and triangle
    areas floored to keep degenerate triangles from poisoning the matrix.
    """
    v = mesh.vertices
    t = mesh.triangles
    n = mesh.num_vertices
    area_floor = 1e-12 * box_diagonal(mesh.bounding_box()) ** 2

    areas = triangle_areas(mesh)
    if np.all(areas <= area_floor):
        raise InvalidInputError("all triangles degenerate; cannot assemble Laplacian")
    areas = np.maximum(areas, area_floor)

    # cot of the angle at corner c equals dot(e1, e2) / (2 * area)
    cots = np.empty((t.shape[0], 3))
    for c in range(3):
        a, b = (c + 1) % 3, (c + 2) % 3
        e1 = v[t[:, a]] - v[t[:, c]]
        e2 = v[t[:, b]] - v[t[:, c]]
        cots[:, c] = np.einsum("ij,ij->i", e1, e2) / (2.0 * areas)
    np.clip(cots, -COT_CLAMP, COT_CLAMP, out=cots)

    # corner c contributes -cot/2 to the edge (a, b) opposite it
    rows, cols, vals = [], [], []
    for c in range(3):
        a, b = (c + 1) % 3, (c + 2) % 3
        w = 0.5 * cots[:, c]
        rows += [t[:, a], t[:, b], t[:, a], t[:, b]]
        cols += [t[:, b], t[:, a], t[:, a], t[:, b]]
        vals += [-w, -w, w, w]
    L = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    L.sum_duplicates()
    return L


def lumped_mass(mesh):
    """Diagonal barycentric mass matrix: M_ii = sum of incident areas / 3."""
    t = mesh.triangles
    n = mesh.num_vertices
    areas = triangle_areas(mesh)
    if areas.sum() <= 0.0:
        raise InvalidInputError("mesh has zero total area; cannot assemble mass matrix")
    diag = np.zeros(n)
    np.add.at(diag, t.reshape(-1), np.repeat(areas / 3.0, 3))
    if np.any(diag <= 0.0):
        # isolated vertices would make M singular; give them a tiny mass
        diag[diag <= 0.0] = 1e-12 * areas.sum() / n
    return sp.dia_matrix((diag[None, :], [0]), shape=(n, n)).tocsr()
