import math

import numpy as np
import pytest

from sldg.errors import MeshMismatch
from sldg.mesh import (DGField, Mesh2D, QuadratureRule, basis_index_pairs,
                       basis_norms, basis_values, dump_field, error_norm,
                       load_field, project_l2, total_mass)

from conftest import tensor_gauss_box


def unit_mesh(n=4):
    return Mesh2D(0.0, 1.0, 0.0, 1.0, n, n)


class TestBasis:
    def test_gram_matrix_diagonal(self):
        # Gram matrix under the element-local inner product is diagonal
        # with the analytic entries, e.g. int (xi^2 - 1/12)^2 = 1/180
        for degree in (1, 2, 3):
            rule = QuadratureRule(degree + 3, degree + 3)
            psi = basis_values(degree, rule.xi, rule.eta)
            gram = np.einsum("ab,abm,abn->mn", rule.weights, psi, psi)
            np.testing.assert_allclose(gram, np.diag(basis_norms(degree)),
                                       atol=1e-15)

    def test_analytic_norm_values(self):
        norms = basis_norms(2)
        assert norms[0] == 1.0
        assert abs(norms[1] - 1.0 / 12.0) < 1e-16
        assert abs(norms[3] - 1.0 / 180.0) < 1e-16
        assert abs(norms[4] - 1.0 / 144.0) < 1e-16

    def test_quadrature_rule_exactness(self):
        # n points integrate degree 2n-1 exactly per direction
        rule = QuadratureRule(3, 3)
        val = float(np.sum(rule.weights * rule.xi ** 4 * rule.eta ** 2))
        assert abs(val - (1.0 / 80.0) * (1.0 / 12.0)) < 1e-16
        assert abs(rule.weights.sum() - 1.0) < 1e-15


class TestProjection:
    def test_constant_reproduction(self):
        u = project_l2(lambda x, y: np.ones_like(x), unit_mesh(), 1)
        np.testing.assert_allclose(u.coeffs[:, :, 0], 1.0, atol=1e-14)
        np.testing.assert_allclose(u.coeffs[:, :, 1:], 0.0, atol=1e-14)

    def test_basis_reproduction(self):
        # f = xi on one element: that coefficient is 1, the rest 0
        mesh = Mesh2D(0.0, 1.0, 0.0, 1.0, 1, 1)
        u = project_l2(lambda x, y: (x - 0.5) / 1.0, mesh, 1)
        np.testing.assert_allclose(u.coeffs[0, 0], [0.0, 1.0, 0.0],
                                   atol=1e-15)

    def test_projection_convergence_order3(self):
        # quadratic space: projection error of a smooth function decays
        # at third order, measured against a fine-quadrature oracle
        errs = []
        for n in (20, 40):
            mesh = Mesh2D(0.0, 2 * np.pi, 0.0, 2 * np.pi, n, n)
            u = project_l2(lambda x, y: np.sin(x) * np.sin(y), mesh, 2)
            errs.append(error_norm(u, lambda x, y: np.sin(x) * np.sin(y),
                                   2, n_quad=10))
        order = np.log2(errs[0] / errs[1])
        assert 2.8 < order < 3.2

    def test_idempotence(self):
        mesh = unit_mesh(3)
        u = project_l2(lambda x, y: np.sin(2 * np.pi * x) + y * y, mesh, 2)
        again = project_l2(lambda x, y: u.evaluate(x, y, average=False),
                           mesh, 2)
        np.testing.assert_allclose(again.coeffs, u.coeffs, atol=1e-13)


class TestEvaluate:
    def test_constant(self):
        u = project_l2(lambda x, y: np.ones_like(x), unit_mesh(), 1)
        assert abs(u.evaluate(0.37, 0.81) - 1.0) < 1e-14

    def test_odd_basis_at_center(self):
        mesh = Mesh2D(0.0, 1.0, 0.0, 1.0, 1, 1)
        u = project_l2(lambda x, y: (x - 0.5), mesh, 1)
        assert abs(u.evaluate(0.5, 0.5)) < 1e-15

    def test_interface_two_sided_average(self):
        # projection of x reproduces x exactly; both one-sided limits at
        # the interface x = 0.5 equal 0.5
        mesh = Mesh2D(0.0, 1.0, 0.0, 1.0, 4, 1)
        u = project_l2(lambda x, y: x, mesh, 1)
        assert abs(u.evaluate(0.5, 0.3) - 0.5) < 1e-14

    def test_periodic_wrapping(self):
        mesh = unit_mesh(4)
        u = project_l2(lambda x, y: np.sin(2 * np.pi * x), mesh, 2)
        a = u.evaluate(0.3, 0.3)
        b = u.evaluate(0.3 + 1.0, 0.3 - 1.0)
        assert abs(a - b) < 1e-13


class TestNorms:
    def test_zero_for_identical(self):
        mesh = unit_mesh()
        u = project_l2(lambda x, y: np.cos(2 * np.pi * x * y), mesh, 2)
        for p in (1, 2, np.inf):
            assert error_norm(u, u, p) == 0.0

    def test_mesh_mismatch(self):
        u = project_l2(lambda x, y: x, unit_mesh(4), 1)
        v = project_l2(lambda x, y: x, unit_mesh(8), 1)
        with pytest.raises(MeshMismatch):
            error_norm(u, v, 1)

    def test_triangle_inequality(self, rng):
        mesh = unit_mesh(3)
        fields = [DGField(mesh, 1, rng.standard_normal((3, 3, 3)))
                  for _ in range(3)]
        zero = DGField(mesh, 1)
        for p in (1, 2):
            dab = error_norm(fields[0], fields[1], p)
            dbc = error_norm(fields[1], fields[2], p)
            dac = error_norm(fields[0], fields[2], p)
            assert dac <= dab + dbc + 1e-12
            assert error_norm(fields[0], zero, p) >= 0.0

    def test_sin_projection_order2(self):
        errs = []
        for n in (64, 128):
            mesh = Mesh2D(0.0, 2 * np.pi, 0.0, 1.0, n, 1)
            u = project_l2(lambda x, y: np.sin(x), mesh, 1)
            errs.append(error_norm(u, lambda x, y: np.sin(x), 1))
        order = np.log2(errs[0] / errs[1])
        assert 1.8 < order < 2.2


class TestMass:
    def test_constant(self):
        mesh = Mesh2D(-1.0, 3.0, 0.0, 2.0, 5, 3)
        u = project_l2(lambda x, y: 2.5 + 0 * x, mesh, 1)
        assert abs(total_mass(u) - 2.5 * mesh.area) < 1e-12

    def test_odd_integral_vanishes(self):
        mesh = Mesh2D(0.0, 2 * np.pi, 0.0, 2 * np.pi, 16, 16)
        u = project_l2(lambda x, y: np.sin(x), mesh, 1)
        assert abs(total_mass(u)) < 1e-13

    def test_landau_mass_vs_erf_oracle(self):
        # perturbed Maxwellian: the cosine integrates away and the
        # truncated-Gaussian mass is erf(2 pi / sqrt(2)) per unit length
        mesh = Mesh2D(0.0, 4 * np.pi, -2 * np.pi, 2 * np.pi, 32, 32)

        def f0(x, v):
            return (1 + 0.5 * np.cos(0.5 * x)) * np.exp(-0.5 * v * v) \
                / np.sqrt(2 * np.pi)
        u = project_l2(f0, mesh, 2)
        oracle = tensor_gauss_box(f0, 0.0, 4 * np.pi, -2 * np.pi, 2 * np.pi,
                                  n=40)
        expected = 4 * np.pi * math.erf(2 * np.pi / math.sqrt(2.0))
        assert abs(oracle - expected) < 1e-10
        assert abs(total_mass(u) - oracle) < 1e-10

    def test_mass_matches_projection_quadrature(self):
        mesh = unit_mesh(5)
        f = lambda x, y: np.exp(x) * np.cos(3 * y)
        u = project_l2(f, mesh, 2)
        oracle = tensor_gauss_box(f, 0, 1, 0, 1, n=20)
        assert abs(total_mass(u) - oracle) < 1e-9


class TestDump:
    def test_roundtrip_byte_identical(self, tmp_path, rng):
        mesh = Mesh2D(0.0, 2 * np.pi, -1.0, 1.0, 6, 4)
        u = DGField(mesh, 2, rng.standard_normal((6, 4, 6)))
        p1 = tmp_path / "a.txt"
        p2 = tmp_path / "b.txt"
        dump_field(u, p1)
        v = load_field(p1)
        np.testing.assert_array_equal(u.coeffs, v.coeffs)
        dump_field(v, p2)
        assert p1.read_bytes() == p2.read_bytes()
