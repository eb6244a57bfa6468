import numpy as np
import pytest

from sldg.errors import DegenerateCell, DegenerateEdge
from sldg.geometry import (ParabolicEdge, _parabolic_record, build_quad,
                           build_quad_curved, cell_area, cell_from_edges,
                           clip, green_integral, segments_to_polylines)
from sldg.mesh import Mesh2D

from conftest import gauss_quad_over_quad, shoelace


def unit_cells_mesh():
    return Mesh2D(0.0, 4.0, 0.0, 4.0, 4, 4)


def constant_integrand(mesh):
    def f(ix, iy):
        xc = mesh.x_min + (ix + 0.5) * mesh.dx
        yc = mesh.y_min + (iy + 0.5) * mesh.dy
        return np.array([[1.0]]), (xc, yc)
    return f


class TestBuildQuad:
    def test_eulerian_cell(self):
        cell = build_quad([(1, 1), (2, 1), (2, 2), (1, 2)])
        assert abs(cell_area(cell) - 1.0) < 1e-15

    def test_rigid_translation(self):
        cell = build_quad([(1.3, 1.7), (2.3, 1.7), (2.3, 2.7), (1.3, 2.7)])
        assert abs(cell_area(cell) - 1.0) < 1e-14

    def test_shoelace_example(self):
        # trapezoid with parallel sides 1 and 1.4: the shoelace oracle
        # gives 1.2, and the contour-integral area must match it
        verts = [(0, 0), (1, 0), (1.2, 1), (-0.2, 1)]
        cell = build_quad(verts)
        oracle = shoelace(verts)
        assert abs(oracle - 1.2) < 1e-14
        assert abs(cell_area(cell) - oracle) < 1e-14

    def test_orientation_normalized(self):
        cw = build_quad([(0, 0), (0, 1), (1, 1), (1, 0)])
        assert cell_area(cw) > 0.0

    def test_degenerate_raises(self):
        with pytest.raises(DegenerateCell):
            build_quad([(0, 0), (1, 0), (2, 0), (3, 0)])

    def test_self_intersection_raises(self):
        with pytest.raises(DegenerateCell):
            build_quad([(0, 0), (1, 1), (1, 0), (0, 1)])


class TestParabolicEdge:
    def test_transform_coefficients_example(self):
        # endpoints (0,0),(2,0), midpoint (1,0.2): a=1, b=0, c=-1, d=0,
        # local midpoint (0, -0.2)
        pe = _parabolic_record((0, 0), (1, 0.2), (2, 0))
        assert abs(pe.a - 1.0) < 1e-15
        assert abs(pe.b) < 1e-15
        assert abs(pe.c + 1.0) < 1e-15
        assert abs(pe.d) < 1e-15
        assert abs(pe.xi2) < 1e-15
        assert abs(pe.eta2 + 0.2) < 1e-15
        # the parabola passes through the midpoint image at xi = 0
        x, y = pe.point(0.0)
        assert abs(x - 1.0) < 1e-14 and abs(y - 0.2) < 1e-14

    def test_forward_reverse_roundtrip(self, rng):
        for _ in range(50):
            p1, p2, p3 = rng.standard_normal((3, 2)) * 2.0
            pe = _parabolic_record(p1, p2, p3)
            for pt in (p1, p2, p3, rng.standard_normal(2)):
                xi, eta = pe.forward(pt[0], pt[1])
                x, y = pe.reverse(xi, eta)
                assert abs(x - pt[0]) < 1e-13 and abs(y - pt[1]) < 1e-13

    def test_defining_points_map_to_canonical(self, rng):
        for _ in range(50):
            p1, p2, p3 = rng.standard_normal((3, 2)) * 3.0
            pe = _parabolic_record(p1, p2, p3)
            xi1, eta1 = pe.forward(*p1)
            xi3, eta3 = pe.forward(*p3)
            assert abs(xi1 + 1.0) < 1e-12 and abs(eta1) < 1e-12
            assert abs(xi3 - 1.0) < 1e-12 and abs(eta3) < 1e-12

    def test_collinear_midpoint_degenerates_to_chord(self):
        p9 = np.array([(0, 0), (1, 0), (1, 1), (0, 1),
                       (0.6, 0.0), (1, 0.5), (0.5, 1), (0, 0.5),
                       (0.5, 0.5)], dtype=float)
        cell = build_quad_curved(p9)
        # collinear bottom edge: parameterization stays on the chord
        x, y = cell.edge_point(0, np.linspace(-1, 1, 7))
        assert np.abs(y).max() < 1e-14
        assert abs(cell_area(cell) - 1.0) < 1e-14

    def test_coincident_endpoints_raise(self):
        with pytest.raises(DegenerateEdge):
            _parabolic_record((0, 0), (1, 1), (0, 0))


class TestClip:
    def test_coincident_cell(self):
        mesh = unit_cells_mesh()
        cell = build_quad([(1, 1), (2, 1), (2, 2), (1, 2)])
        res = clip(cell, mesh)
        assert len(res.outer) == 4
        assert len(res.inner) == 0
        assert res.cells == frozenset({(1, 1)})

    def test_half_cell_shift(self):
        # shifted by dx/2: 2 background elements, one vertical inner
        # segment of length dy, edges split 2+1+2+1
        mesh = unit_cells_mesh()
        cell = build_quad([(1.5, 1), (2.5, 1), (2.5, 2), (1.5, 2)])
        res = clip(cell, mesh)
        assert res.cells == frozenset({(1, 1), (2, 1)})
        inner_v = [s for s in res.inner if s.axis == "v"]
        assert len(inner_v) == 1
        assert abs(inner_v[0].hi - inner_v[0].lo - 1.0) < 1e-14
        assert len(res.outer) == 6
        per_edge = sorted(sum(1 for s in res.outer if s.edge == e)
                          for e in range(4))
        assert per_edge == [1, 1, 2, 2]

    def test_partition_of_unity_random_quads(self, rng):
        mesh = unit_cells_mesh()
        one = constant_integrand(mesh)
        for _ in range(200):
            center = rng.uniform(0.5, 3.5, 2)
            angles = 0.5 * np.pi * (np.arange(4)
                                    + rng.uniform(0.1, 0.9, 4))
            radii = rng.uniform(0.3, 1.1, 4)
            verts = center + np.stack([radii * np.cos(angles),
                                       radii * np.sin(angles)], axis=1)
            cell = build_quad(verts)
            res = clip(cell, mesh, include_horizontal=False)
            area = green_integral(cell, res, one, mesh)
            ref = shoelace(cell.points)
            assert abs(area - ref) < 1e-12 * abs(ref)

    def test_translation_equivariance(self):
        # clipping a cell and its one-period image gives equal measures
        mesh = unit_cells_mesh()
        one = constant_integrand(mesh)
        verts = np.array([(0.9, 1.1), (2.2, 0.8), (2.4, 2.3), (1.2, 2.2)])
        c1 = build_quad(verts)
        c2 = build_quad(verts + np.array([4.0, 0.0]))
        r1 = clip(c1, mesh, include_horizontal=False)
        r2 = clip(c2, mesh, include_horizontal=False)
        assert len(r1.outer) == len(r2.outer)
        assert len(r1.inner) == len(r2.inner)
        a1 = green_integral(c1, r1, one, mesh)
        a2 = green_integral(c2, r2, one, mesh)
        assert abs(a1 - a2) < 1e-13 * abs(a1)
        folded1 = {(ix % 4, iy % 4) for ix, iy in
                   (s.owner for s in r1.outer)}
        folded2 = {(ix % 4, iy % 4) for ix, iy in
                   (s.owner for s in r2.outer)}
        assert folded1 == folded2


class TestGreenIntegral:
    def test_unit_square_area(self):
        mesh = Mesh2D(0.0, 1.0, 0.0, 1.0, 1, 1)
        cell = build_quad([(0, 0), (1, 0), (1, 1), (0, 1)])
        res = clip(cell, mesh)
        val = green_integral(cell, res, constant_integrand(mesh), mesh)
        assert abs(val - 1.0) < 1e-14

    def test_xy_over_unit_square(self):
        mesh = Mesh2D(0.0, 1.0, 0.0, 1.0, 1, 1)
        cell = build_quad([(0, 0), (1, 0), (1, 1), (0, 1)])
        res = clip(cell, mesh)

        def integrand(ix, iy):
            xc, yc = 0.5, 0.5
            c = np.zeros((2, 2))
            c[1, 1] = 1.0
            c[1, 0] = yc
            c[0, 1] = xc
            c[0, 0] = xc * yc
            return c, (xc, yc)
        val = green_integral(cell, res, integrand, mesh)
        oracle = gauss_quad_over_quad(lambda x, y: x * y, cell.points)
        assert abs(val - 0.25) < 1e-14
        assert abs(val - oracle) < 1e-13

    def test_green_exactness_degree4(self, rng):
        # degree <= 4 polynomial integrands over straight-edged cells
        # match the bilinear-map Gauss oracle with 3-point edge rules
        mesh = unit_cells_mesh()
        for _ in range(25):
            center = rng.uniform(1.0, 3.0, 2)
            angles = 0.5 * np.pi * (np.arange(4)
                                    + rng.uniform(0.1, 0.9, 4))
            radii = rng.uniform(0.4, 1.0, 4)
            verts = center + np.stack([radii * np.cos(angles),
                                       radii * np.sin(angles)], axis=1)
            cell = build_quad(verts)
            res = clip(cell, mesh, include_horizontal=False)
            cmono = rng.standard_normal((3, 3))
            x0, y0 = center

            def poly(x, y):
                acc = np.zeros_like(x)
                for i in range(3):
                    for j in range(3):
                        acc = acc + cmono[i, j] * (x - x0) ** i * (y - y0) ** j
                return acc

            def integrand(ix, iy):
                xc = mesh.x_min + (ix + 0.5) * mesh.dx
                yc = mesh.y_min + (iy + 0.5) * mesh.dy
                # re-center the fixed polynomial on each cell
                shifted = np.zeros((3, 3))
                ax, by = xc - x0, yc - y0
                from math import comb
                for i in range(3):
                    for j in range(3):
                        v = cmono[i, j]
                        for p in range(i + 1):
                            for q in range(j + 1):
                                shifted[p, q] += v * comb(i, p) * comb(j, q) \
                                    * ax ** (i - p) * by ** (j - q)
                return shifted, (xc, yc)
            val = green_integral(cell, res, integrand, mesh)
            oracle = gauss_quad_over_quad(poly, cell.points)
            assert abs(val - oracle) < 1e-12 * max(1.0, abs(oracle))

    def test_parabolic_region_exact_area(self):
        # region between y = x^2 and y = 1 over [-1, 1]: one curved edge
        # whose frame axis is perpendicular to the chord, area 4/3
        cell = cell_from_edges([
            ("parabola", (-1, 1), (0, 0), (1, 1)),
            ("line", (1, 1), (1 / 3, 1)),
            ("line", (1 / 3, 1), (-1 / 3, 1)),
            ("line", (-1 / 3, 1), (-1, 1)),
        ])
        assert abs(cell_area(cell) - 4.0 / 3.0) < 1e-14
        mesh = Mesh2D(-2.0, 2.0, -2.0, 2.0, 4, 4)
        res = clip(cell, mesh, include_horizontal=False)
        val = green_integral(cell, res, constant_integrand(mesh), mesh)
        assert abs(val - 4.0 / 3.0) < 1e-13

    def test_curved_area_vs_dense_polyline(self, rng):
        # cell_area of bulged cells against a 10^4-point shoelace oracle
        for _ in range(10):
            base = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float)
            mids = np.array([(0.5, 0), (1, 0.5), (0.5, 1), (0, 0.5)])
            normals = np.array([(0, -1), (1, 0), (0, 1), (-1, 0)])
            bulge = rng.uniform(-0.15, 0.15, 4)
            p9 = np.vstack([base, mids + bulge[:, None] * normals,
                            [(0.5, 0.5)]])
            cell = build_quad_curved(p9)
            x, y = cell.boundary_polyline(2500)
            oracle = shoelace(np.stack([x, y], axis=1))
            assert abs(cell_area(cell) - oracle) < 2e-7

    def test_curved_partition_of_unity(self, rng):
        mesh = unit_cells_mesh()
        one = constant_integrand(mesh)
        for _ in range(40):
            center = rng.uniform(1.0, 3.0, 2)
            base = center + np.array([(-0.5, -0.5), (0.5, -0.5),
                                      (0.5, 0.5), (-0.5, 0.5)])
            mids = 0.5 * (base + np.roll(base, -1, axis=0))
            mids += rng.uniform(-0.08, 0.08, (4, 2))
            p9 = np.vstack([base, mids, center[None, :]])
            cell = build_quad_curved(p9)
            res = clip(cell, mesh, include_horizontal=False)
            val = green_integral(cell, res, one, mesh)
            ref = cell_area(cell)
            assert abs(val - ref) < 1e-12 * abs(ref)


class TestDebugDump:
    def test_polyline_dump(self):
        mesh = unit_cells_mesh()
        cell = build_quad([(1.5, 1), (2.5, 1), (2.5, 2), (1.5, 2)])
        res = clip(cell, mesh)
        text = segments_to_polylines(cell, res)
        assert "# outer edge=0" in text
        assert "# inner axis=v" in text
