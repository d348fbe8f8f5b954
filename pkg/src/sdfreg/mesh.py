"""Triangle mesh container, OBJ IO, vectorization, and bounding boxes."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, MeshFormatError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TriMesh:
    """Immutable triangle surface mesh.

    vertices: (n, 3) float positions.
    triangles: (T, 3) int vertex indices, counterclockwise = outward normal.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 3:
            raise InvalidInputError(f"vertices must be (n>=3, 3), got {v.shape}")
        if t.ndim != 2 or t.shape[1] != 3 or t.shape[0] < 1:
            raise InvalidInputError(f"triangles must be (T>=1, 3), got {t.shape}")
        if not np.isfinite(v).all():
            raise InvalidInputError("vertices contain non-finite values")
        if t.min() < 0 or t.max() >= v.shape[0]:
            raise InvalidInputError(
                f"triangle index out of range [0, {v.shape[0]}): "
                f"min {t.min()}, max {t.max()}"
            )
        degenerate = (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])
        if degenerate.any():
            raise InvalidInputError(
                f"{degenerate.sum()} triangle(s) repeat a vertex index"
            )
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    def bounding_box(self):
        """(2, 3) array [min corner; max corner]."""
        return np.array([self.vertices.min(axis=0), self.vertices.max(axis=0)])

    def with_vertices(self, vertices):
        """Same connectivity, new positions."""
        return TriMesh(vertices, self.triangles)


def vectorize(mesh):
    """Stack vertex rows into a length-3n vector (vertex-major x,y,z blocks)."""
    return mesh.vertices.reshape(-1).copy()


def unvectorize(x, triangles):
    """Inverse of vectorize: rebuild a TriMesh from a flat coordinate vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size % 3 != 0:
        raise InvalidInputError(f"flat coordinates must have length 3n, got {x.shape}")
    return TriMesh(x.reshape(-1, 3), triangles)


def joint_bounding_box(source, target, pad_fraction):
    """Smallest box containing both meshes, padded on every side.

    The pad is pad_fraction times the longest edge of the unpadded box,
    applied to all six faces.
    """
    if pad_fraction < 0:
        raise InvalidInputError(f"pad_fraction must be >= 0, got {pad_fraction}")
    lo = np.minimum(source.vertices.min(axis=0), target.vertices.min(axis=0))
    hi = np.maximum(source.vertices.max(axis=0), target.vertices.max(axis=0))
    pad = pad_fraction * (hi - lo).max()
    return np.array([lo - pad, hi + pad])


def box_diagonal(box):
    return float(np.linalg.norm(box[1] - box[0]))


def _parse_face_vertex(token, line_no):
    # "i", "i/j", "i//k", "i/j/k" — only the position index is used
    head = token.split("/")[0]
    try:
        idx = int(head)
    except ValueError:
        raise MeshFormatError(f"bad face index {token!r}", line=line_no) from None
    if idx < 1:
        raise MeshFormatError(
            f"face index {idx} not positive (1-based indices required)", line=line_no
        )
    return idx - 1


def load_obj(path):
    """Read an ASCII OBJ file; polygons with more than 3 sides are fan-triangulated."""
    vertices = []
    triangles = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for line_no, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshFormatError("vertex needs 3 coordinates", line=line_no)
                try:
                    vertices.append([float(p) for p in parts[1:4]])
                except ValueError:
                    raise MeshFormatError(
                        f"bad vertex coordinate in {raw.strip()!r}", line=line_no
                    ) from None
            elif tag == "f":
                if len(parts) < 4:
                    raise MeshFormatError("face needs at least 3 indices", line=line_no)
                idx = [_parse_face_vertex(p, line_no) for p in parts[1:]]
                for k in range(1, len(idx) - 1):
                    triangles.append([idx[0], idx[k], idx[k + 1]])
            # every other record type (vn, vt, usemtl, ...) is ignored
    if not vertices or not triangles:
        raise InvalidInputError(f"{path}: no usable geometry (empty mesh)")
    try:
        mesh = TriMesh(np.array(vertices), np.array(triangles))
    except InvalidInputError as exc:
        raise InvalidInputError(f"{path}: {exc}") from exc
    _warn_if_open(mesh, path)
    return mesh


def _warn_if_open(mesh, path):
    # Non-watertight inputs are accepted; this is informational only.
    t = mesh.triangles
    edges = np.sort(
        np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1
    )
    _, counts = np.unique(edges, axis=0, return_counts=True)
    boundary = int((counts == 1).sum())
    if boundary:
        logger.warning("%s: mesh is not watertight (%d boundary edges)", path, boundary)


def save_obj(mesh, path):
    """Write an ASCII OBJ with 17-significant-digit coordinates (exact round trip)."""
    lines = []
    for x, y, z in mesh.vertices:
        lines.append(f"v {x:.17g} {y:.17g} {z:.17g}")
    for i, j, k in mesh.triangles:
        lines.append(f"f {i + 1} {j + 1} {k + 1}")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write mesh to {path}: {exc}") from exc
