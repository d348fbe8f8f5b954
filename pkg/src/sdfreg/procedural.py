"""Procedural test meshes: icospheres, boxes, and bendable bars.

These stand in for external assets in the self-test and the test suite.
"""

import numpy as np

from .mesh import TriMesh


def icosphere(subdivisions=2, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Subdivided icosahedron projected to a sphere.

    Vertex counts: 12, 42, 162, 642, 2562 for subdivisions 0..4.
    """
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    for _ in range(subdivisions):
        verts, faces = _subdivide(verts, faces)
        verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    return TriMesh(verts * radius + np.asarray(center, dtype=np.float64), faces)


def _subdivide(verts, faces):
    verts = list(map(tuple, verts))
    midpoint_cache = {}

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key not in midpoint_cache:
            m = (np.array(verts[i]) + np.array(verts[j])) / 2.0
            midpoint_cache[key] = len(verts)
            verts.append(tuple(m))
        return midpoint_cache[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        new_faces += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
    return np.array(verts), np.array(new_faces, dtype=np.int64)


def box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0), segments=(1, 1, 1)):
    """Closed axis-aligned box surface with a quad grid per face, triangulated.

    Outward orientation; shared edge/corner vertices are welded.
    """
    size = np.asarray(size, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    seg = np.asarray(segments, dtype=np.int64)
    lo = center - size / 2.0
    vert_index = {}
    verts = []
    tris = []

    def node(i, j, k):
        key = (int(i), int(j), int(k))
        if key not in vert_index:
            vert_index[key] = len(verts)
            verts.append(lo + size * np.array(key) / seg)
        return vert_index[key]

    # (fixed axis, fixed lattice value, in-plane axes, flip orientation)
    faces = [
        (0, 0, 1, 2, True), (0, seg[0], 1, 2, False),
        (1, 0, 2, 0, True), (1, seg[1], 2, 0, False),
        (2, 0, 0, 1, True), (2, seg[2], 0, 1, False),
    ]
    for axis, level, ua, va, flip in faces:
        for u in range(seg[ua]):
            for v in range(seg[va]):
                idx = np.zeros(3, dtype=np.int64)
                idx[axis] = level

                def corner(du, dv):
                    c = idx.copy()
                    c[ua] = u + du
                    c[va] = v + dv
                    return node(*c)

                n00, n10 = corner(0, 0), corner(1, 0)
                n01, n11 = corner(0, 1), corner(1, 1)
                quad = [[n00, n10, n11], [n00, n11, n01]]
                if flip:
                    quad = [[n00, n11, n10], [n00, n01, n11]]
                tris += quad
    return TriMesh(np.array(verts), np.array(tris, dtype=np.int64))


def open_box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0), segments=(4, 4, 4)):
    """Box surface with the +z face removed: a non-watertight test target."""
    closed = box(size=size, center=center, segments=segments)
    top = center[2] + size[2] / 2.0
    tri_z = closed.vertices[closed.triangles, 2]
    keep = ~np.all(np.abs(tri_z - top) < 1e-12, axis=1)
    tris = closed.triangles[keep]
    used = np.unique(tris)
    remap = np.full(closed.num_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    return TriMesh(closed.vertices[used], remap[tris])


def bar(length=4.0, width=0.5, height=0.5, segments=(36, 4, 4)):
    """Straight bar along +x, centered at the origin (~610 vertices by default)."""
    return box(size=(length, width, height), segments=segments)


def bend_bar(mesh, angle_deg, length=4.0):
    """Analytic circular bend of a bar about the z axis.

    Maps arclength along x onto a circular arc of total angle angle_deg in the
    x-y plane; the map is the identity at angle 0 (limit) and preserves
    connectivity, so vertices correspond one-to-one with the straight bar.
    """
    theta_total = np.deg2rad(angle_deg)
    v = mesh.vertices.copy()
    x, y = v[:, 0], v[:, 1]
    if abs(theta_total) < 1e-12:
        return mesh.with_vertices(v)
    radius = length / theta_total
    theta = theta_total * (x / length)
    v[:, 0] = (radius - y) * np.sin(theta)
    v[:, 1] = radius - (radius - y) * np.cos(theta)
    return mesh.with_vertices(v)


def rotated(mesh, axis, angle_deg, center=(0.0, 0.0, 0.0)):
    """Rotate a mesh about an axis through `center` by `angle_deg` degrees."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    a = np.deg2rad(angle_deg)
    K = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    R = np.eye(3) + np.sin(a) * K + (1 - np.cos(a)) * (K @ K)
    c = np.asarray(center, dtype=np.float64)
    return mesh.with_vertices((mesh.vertices - c) @ R.T + c)
