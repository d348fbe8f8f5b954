"""Skinning-weight eigenmodes and the truncatable linear blend skinning basis.

Reduced coordinate layout: each active mode k owns 12 consecutive entries of
z. Viewing the mode's handle as a 3x4 affine matrix A (linear part | offset,
acting on homogeneous rest positions), entry z[12*k + 3*j + a] is A[a, j],
i.e. the per-mode block is A flattened column by column. With per-vertex
weights w_k this gives displacement(v) = sum_k w_k(v) * A_k @ [x0_v, 1].
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .errors import InvalidInputError, SolverError

DENSE_EIG_LIMIT = 300


@dataclass(frozen=True)
class SkinningModes:
    """Generalized eigenpairs of (L, M): weight columns W and eigenvalues lam."""

    weights: np.ndarray  # (n, m_max), M-orthonormal columns
    eigenvalues: np.ndarray  # (m_max,), ascending

    @property
    def num_modes(self):
        return self.weights.shape[1]


def compute_modes(L, M, m_max):
    """Smallest m_max generalized eigenpairs of L w = lam M w.

    Dense solve for small meshes, shift-invert Lanczos otherwise. Column signs
    are fixed (largest-magnitude entry positive) for reproducibility.
    """
    n = L.shape[0]
    if not (1 <= m_max <= n):
        raise InvalidInputError(f"m_max must be in [1, {n}], got {m_max}")
    if n <= DENSE_EIG_LIMIT:
        vals, vecs = scipy.linalg.eigh(
            L.toarray(), M.toarray(), subset_by_index=[0, m_max - 1]
        )
    else:
        sigma = -1e-8 * L.diagonal().sum() / n
        v0 = np.full(n, 1.0 / np.sqrt(n))  # fixed start vector for determinism
        try:
            vals, vecs = spla.eigsh(L, k=m_max, M=M, sigma=sigma, which="LM", v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise SolverError(
                f"eigensolver converged only {len(exc.eigenvalues)} of {m_max} modes"
            ) from exc
    order = np.argsort(vals)
    vals = vals[order]
    vecs = vecs[:, order]
    flip = vecs[np.abs(vecs).argmax(axis=0), np.arange(vecs.shape[1])] < 0
    vecs[:, flip] *= -1.0
    return SkinningModes(np.ascontiguousarray(vecs), vals)


@dataclass(frozen=True)
class SubspaceBasis:
    """Materialized LBS basis B (3n x 12*m_max) over homogeneous rest coords."""

    matrix: np.ndarray  # (3n, 12*m_max)
    rest_homogeneous: np.ndarray  # (n, 4), fourth column 1

    @property
    def max_modes(self):
        return self.matrix.shape[1] // 12

    def columns(self, m):
        if not (1 <= m <= self.max_modes):
            raise InvalidInputError(f"mode count {m} outside [1, {self.max_modes}]")
        return self.matrix[:, : 12 * m]


def build_basis(modes, rest):
    """LBS basis from skinning weights and rest positions.

    Column block k holds, per vertex v and axis a, the products
    w_k(v) * [x0_v, 1][j] laid out as described in the module docstring.
    """
    W = modes.weights
    n = rest.num_vertices
    if W.shape[0] != n:
        raise InvalidInputError(
            f"weights have {W.shape[0]} rows but mesh has {n} vertices"
        )
    xbar = np.concatenate([rest.vertices, np.ones((n, 1))], axis=1)
    inner = (W[:, :, None] * xbar[:, None, :]).reshape(n, -1)  # (n, 4m)
    B = np.kron(inner, np.eye(3))  # (3n, 12m)
    return SubspaceBasis(B, xbar)


def reconstruct(basis, z, x0):
    """Deformed flat coordinates x = B[:, :12m] z + x0."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.size % 12 != 0:
        raise InvalidInputError(f"z must have length 12m, got {z.shape}")
    m = z.size // 12
    if m > basis.max_modes:
        raise InvalidInputError(f"{m} modes requested, basis holds {basis.max_modes}")
    if x0.shape != (basis.matrix.shape[0],):
        raise InvalidInputError("x0 length does not match the basis")
    if m == 0:
        return x0.copy()
    return basis.columns(m) @ z + x0


def project_gradient(basis, grad_x, m):
    """Reduced gradient B[:, :12m]^T grad_x."""
    grad_x = np.asarray(grad_x, dtype=np.float64)
    if grad_x.shape != (basis.matrix.shape[0],):
        raise InvalidInputError("gradient length does not match the basis")
    return basis.columns(m).T @ grad_x


def affine_block(linear, offset, weight_value=1.0):
    """z block realizing x -> linear @ x + offset through one constant-weight mode.

    With the mode's weight equal to weight_value everywhere, packing
    A = [(linear - I) | offset] / weight_value reproduces the affine map.
    """
    A = np.concatenate(
        [np.asarray(linear, dtype=np.float64) - np.eye(3),
         np.asarray(offset, dtype=np.float64).reshape(3, 1)],
        axis=1,
    ) / float(weight_value)
    return A.T.reshape(-1)  # column-major flattening, see module docstring


def dump_weights_csv(modes, path):
    """Debug dump: one row per (vertex, mode) with the skinning weight."""
    W = modes.weights
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("vertex,mode,weight\n")
        for k in range(W.shape[1]):
            for v in range(W.shape[0]):
                fh.write(f"{v},{k},{W[v, k]:.17g}\n")
