import io

import pytest

from sdfreg.diagnostics import (
    eigen_residuals,
    fd_subspace_gradient_check,
    sdf_equivalence_check,
    selftest,
)
from sdfreg.operators import cotan_laplacian, lumped_mass
from sdfreg.procedural import icosphere
from sdfreg.sdf import make_quadrature
from sdfreg.subspace import compute_modes


class TestOracles:
    def test_eigen_residuals_small(self, sphere162):
        L = cotan_laplacian(sphere162)
        M = lumped_mass(sphere162)
        modes = compute_modes(L, M, 6)
        resid, ortho = eigen_residuals(L, M, modes)
        assert resid < 1e-9
        assert ortho < 1e-9

    def test_sdf_equivalence(self, holey_box):
        gap, mismatches = sdf_equivalence_check(holey_box, num_points=300)
        assert gap == 0.0
        assert mismatches == 0

    def test_fd_check_passes(self, sphere162):
        target = icosphere(2, radius=1.1)
        quad = make_quadrature(sphere162, target, (8, 8, 8))
        errs = fd_subspace_gradient_check(sphere162, quad, num_modes=3, trials=6)
        assert len(errs) == 6
        assert max(errs) < 1e-4

    def test_fd_check_catches_corruption(self, sphere162):
        # Negative control: a deliberately wrong gradient must fail the check,
        # proving the oracle has teeth.
        target = icosphere(2, radius=1.1)
        quad = make_quadrature(sphere162, target, (8, 8, 8))
        errs = fd_subspace_gradient_check(sphere162, quad, num_modes=3, trials=6,
                                          corrupt_gradient=True)
        assert max(errs) > 1e-2


class TestSelftest:
    def test_passes(self):
        buf = io.StringIO()
        assert selftest(stream=buf) == 0
        out = buf.getvalue()
        assert "FAIL" not in out
        assert out.count("PASS") >= 7

    def test_negative_control(self):
        buf = io.StringIO()
        assert selftest(corrupt_gradient=True, stream=buf) == 1
        assert "FAIL" in buf.getvalue()
