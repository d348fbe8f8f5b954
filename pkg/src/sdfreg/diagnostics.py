"""Built-in oracle checks: finite differences, eigen residuals, SDF equivalence.

These back the `--selftest` CLI mode and are reused by the test suite.
"""

import time

import numpy as np

from .energy import sdf_energy, sdf_energy_gradient
from .mesh import box_diagonal, vectorize
from .operators import cotan_laplacian, lumped_mass
from .procedural import icosphere, open_box
from .sdf import MeshDistanceField, make_quadrature
from .subspace import build_basis, compute_modes, project_gradient, reconstruct


def eigen_residuals(L, M, modes):
    """(relative eigen residual, M-orthonormality error) for a mode set."""
    W = modes.weights
    lam = modes.eigenvalues
    LW = L @ W
    resid = np.linalg.norm(LW - (M @ W) * lam[None, :], ord="fro")
    resid /= max(1.0, np.linalg.norm(LW, ord="fro"))
    gram = W.T @ (M @ W)
    ortho = np.linalg.norm(gram - np.eye(W.shape[1]), ord="fro")
    return resid, ortho


def _closest_assignment(x, triangles, quad):
    from .mesh import TriMesh

    field = MeshDistanceField(TriMesh(x.reshape(-1, 3), triangles))
    rec = field.query(quad.points)
    return rec.triangle, rec.sign


def fd_subspace_gradient_check(source, quad, num_modes, trials=20, seed=0,
                               h_rel=1e-6, z_scale=0.02, max_rerolls=200,
                               corrupt_gradient=False):
    """Central-difference check of the reduced gradient along random directions.

    The objective is only piecewise smooth where a quadrature point's closest
    triangle or sign flips, so each trial compares the derivative restricted
    to the points whose assignment is stable across the stencil. Trials where
    fewer than half the points are stable are re-rolled. Returns the list of
    relative errors, one per kept trial.
    """
    from .sdf import QuadratureSet

    rng = np.random.default_rng(seed)
    L = cotan_laplacian(source)
    M = lumped_mass(source)
    modes = compute_modes(L, M, num_modes)
    basis = build_basis(modes, source)
    x0 = vectorize(source)
    tris = source.triangles
    h = h_rel * box_diagonal(quad.box)

    errors = []
    rerolls = 0
    while len(errors) < trials:
        if rerolls > max_rerolls:
            raise RuntimeError("too many closest-feature re-rolls in FD check")
        z = z_scale * rng.standard_normal(12 * num_modes)
        dz = rng.standard_normal(12 * num_modes)
        dz /= np.linalg.norm(dz)

        x_plus = reconstruct(basis, z + h * dz, x0)
        x_minus = reconstruct(basis, z - h * dz, x0)
        tri_p, sign_p = _closest_assignment(x_plus, tris, quad)
        tri_m, sign_m = _closest_assignment(x_minus, tris, quad)
        stable = (tri_p == tri_m) & (sign_p == sign_m)
        if stable.sum() < quad.num_points // 2:
            rerolls += 1
            continue
        sub = QuadratureSet(quad.points[stable], quad.target_values[stable],
                            quad.resolution, quad.box)

        x = reconstruct(basis, z, x0)
        report = sdf_energy_gradient(x, tris, sub)
        grad_z = project_gradient(basis, report.gradient, num_modes)
        if corrupt_gradient:
            grad_z = grad_z * 1.05 + 0.1 * np.abs(grad_z).max()
        analytic = float(grad_z @ dz)

        e_plus = sdf_energy(x_plus, tris, sub).energy
        e_minus = sdf_energy(x_minus, tris, sub).energy
        fd = (e_plus - e_minus) / (2.0 * h)
        denom = max(abs(fd), abs(analytic), 1e-12)
        errors.append(abs(analytic - fd) / denom)
    return errors


def sdf_equivalence_check(mesh, num_points=1000, seed=0, margin=0.5):
    """Accelerated vs brute-force signed distance on random points.

    Returns (max absolute distance gap, number of sign mismatches).
    """
    rng = np.random.default_rng(seed)
    box = mesh.bounding_box()
    pad = margin * (box[1] - box[0]).max()
    pts = rng.uniform(box[0] - pad, box[1] + pad, size=(num_points, 3))
    field = MeshDistanceField(mesh)
    fast = field.query(pts)
    slow = field.query_brute(pts)
    gap = float(np.abs(fast.distance - slow.distance).max())
    sign_mismatch = int((fast.sign != slow.sign).sum())
    return gap, sign_mismatch


def selftest(corrupt_gradient=False, stream=None):
    """Run the embedded oracle suite on procedural meshes.

    Prints a pass/fail table and returns 0 iff every check passed.
    """
    import sys

    stream = stream or sys.stdout
    checks = []
    t_start = time.perf_counter()

    sphere = icosphere(2)  # 162 vertices
    L = cotan_laplacian(sphere)
    M = lumped_mass(sphere)
    modes = compute_modes(L, M, 8)
    resid, ortho = eigen_residuals(L, M, modes)
    checks.append(("eigen residual <= 1e-8", resid <= 1e-8, f"{resid:.3e}"))
    checks.append(("eigen M-orthonormality <= 1e-8", ortho <= 1e-8, f"{ortho:.3e}"))

    gap, mismatches = sdf_equivalence_check(sphere, num_points=500)
    checks.append(("SDF brute-force gap <= 1e-12 (icosphere)", gap <= 1e-12,
                   f"{gap:.3e}"))
    checks.append(("SDF sign agreement (icosphere)", mismatches == 0,
                   f"{mismatches} mismatches"))
    holey = open_box(segments=(4, 4, 4))
    gap, mismatches = sdf_equivalence_check(holey, num_points=500)
    checks.append(("SDF brute-force gap <= 1e-12 (open box)", gap <= 1e-12,
                   f"{gap:.3e}"))
    checks.append(("SDF sign agreement (open box)", mismatches == 0,
                   f"{mismatches} mismatches"))

    target = icosphere(2, radius=1.15, center=(0.12, -0.05, 0.08))
    quad = make_quadrature(sphere, target, (10, 10, 10), 0.05)
    errs = fd_subspace_gradient_check(sphere, quad, num_modes=4, trials=8,
                                      corrupt_gradient=corrupt_gradient)
    worst = max(errs)
    checks.append(("FD gradient relative error < 1e-4", worst < 1e-4,
                   f"worst {worst:.3e}"))

    elapsed = time.perf_counter() - t_start
    width = max(len(name) for name, _, _ in checks)
    all_ok = True
    for name, ok, detail in checks:
        all_ok &= ok
        stream.write(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}\n")
    stream.write(f"selftest {'passed' if all_ok else 'FAILED'} in {elapsed:.1f}s\n")
    return 0 if all_ok else 1
