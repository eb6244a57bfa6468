"""Upstream cells, grid clipping, and Green's-theorem line integrals.

An upstream cell is the backward-traced image of a mesh element: either
a straight-edged quadrilateral from 4 traced vertices, or a
quadratic-curved quadrilateral from 9 traced vertices where each side
is the parabola through its three traced points, built in a rotated
local frame whose axis is perpendicular to the chord.

Area integrals of piecewise polynomials over the cell are evaluated as
line integrals with P = 0 and Q the x-antiderivative of the integrand
anchored at each background cell's left edge; see `_kernels` for the
segment conventions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from . import _kernels as K
from .errors import ClipFailure, DegenerateCell, DegenerateEdge
from .mesh import Mesh2D


@dataclass(frozen=True)
class ParabolicEdge:
    """One curved side: endpoints, midpoint image, and the local frame.

    The forward map xi = a x + b y + c, eta = b x - a y + d sends the
    endpoints to (-1, 0) and (1, 0); the side is the parabola
    eta = eta2 / (xi2^2 - 1) * (xi^2 - 1) through the midpoint image.
    """

    p1: Tuple[float, float]
    p2: Tuple[float, float]
    p3: Tuple[float, float]
    a: float
    b: float
    c: float
    d: float
    xi2: float
    eta2: float

    def forward(self, x, y):
        xi = self.a * x + self.b * y + self.c
        eta = self.b * x - self.a * y + self.d
        return xi, eta

    def reverse(self, xi, eta):
        x1, y1 = self.p1
        x3, y3 = self.p3
        x = 0.5 * (x3 - x1) * xi + 0.5 * (y3 - y1) * eta + 0.5 * (x3 + x1)
        y = 0.5 * (y3 - y1) * xi - 0.5 * (x3 - x1) * eta + 0.5 * (y3 + y1)
        return x, y

    def point(self, xi):
        """Point on the parabola at parameter xi in [-1, 1]."""
        if abs(self.xi2) >= 1.0:
            eta = 0.0 * np.asarray(xi)
        else:
            eta = self.eta2 / (self.xi2 ** 2 - 1.0) * (np.asarray(xi) ** 2 - 1.0)
        return self.reverse(xi, eta)


@dataclass(frozen=True)
class Segment:
    """A piece of the cell boundary (outer) or of a grid line (inner)."""

    kind: str                       # "outer" | "inner"
    edge: Optional[int] = None      # outer: edge id 0..3
    s0: float = 0.0                 # outer: parameter range on the edge
    s1: float = 0.0
    owner: Optional[Tuple[int, int]] = None   # outer: background element
    axis: Optional[str] = None      # inner: "v" (x = const) or "h"
    line_index: Optional[int] = None
    line_coord: Optional[float] = None
    lo: float = 0.0                 # inner: endpoint range along the line
    hi: float = 0.0
    left: Optional[Tuple[int, int]] = None    # inner: left/below element
    right: Optional[Tuple[int, int]] = None   # inner: right/above element


@dataclass(frozen=True)
class ClipResult:
    outer: Tuple[Segment, ...]
    inner: Tuple[Segment, ...]
    cells: frozenset                # folded background-element index set


class UpstreamCell:
    """Traced cell: 4 directed quadratic edges forming a CCW loop."""

    def __init__(self, kind, points, edges, parabolic_edges=None, owner=None):
        self.kind = kind            # "quad" | "quad_curved"
        self.points = np.asarray(points, dtype=float)
        self.edges = np.asarray(edges, dtype=float)
        self.parabolic_edges = parabolic_edges
        self.owner = owner

    def edge_point(self, e, s):
        ax, bx, cx, ay, by, cy = self.edges[e]
        s = np.asarray(s)
        return (ax * s + bx) * s + cx, (ay * s + by) * s + cy

    def boundary_polyline(self, n_per_edge=64):
        """Dense CCW polyline along the boundary (debug / oracles)."""
        ss = np.linspace(-1.0, 1.0, n_per_edge, endpoint=False)
        xs, ys = [], []
        for e in range(4):
            x, y = self.edge_point(e, ss)
            xs.append(x)
            ys.append(y)
        return np.concatenate(xs), np.concatenate(ys)


def _signed_area_of_points(pts):
    x = pts[:, 0]
    y = pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _cross2(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _segments_intersect(p, q, r, s):
    """Proper intersection test for open segments pq and rs."""
    d1 = _cross2(q - p, r - p)
    d2 = _cross2(q - p, s - p)
    d3 = _cross2(s - r, p - r)
    d4 = _cross2(s - r, q - r)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def build_quad(vertices, ref_area=None, area_tol=1e-12):
    """Straight-edged upstream cell from 4 traced vertices.

    Vertex order may be either orientation; the cell is normalized to
    CCW.  Raises DegenerateCell when |area| <= area_tol * ref_area
    (default: bounding-box area) or when the quadrilateral
    self-intersects.
    """
    pts = np.asarray(vertices, dtype=float).reshape(4, 2)
    if ref_area is None:
        span = pts.max(axis=0) - pts.min(axis=0)
        ref_area = max(float(span[0] * span[1]), 1e-300)
    area = _signed_area_of_points(pts)
    if abs(area) <= area_tol * ref_area:
        raise DegenerateCell(f"quad area {area:.3e} below tolerance")
    if area < 0.0:
        pts = pts[[0, 3, 2, 1]]
    if _segments_intersect(pts[0], pts[1], pts[2], pts[3]) or \
            _segments_intersect(pts[1], pts[2], pts[3], pts[0]):
        raise DegenerateCell("self-intersecting quad")
    p9 = np.zeros((9, 2))
    p9[:4] = pts
    edges = np.empty((4, 6))
    K._build_edges(p9, False, False, 0.0, edges)
    return UpstreamCell("quad", pts, edges)


def _parabolic_record(p1, p2, p3):
    x1, y1 = p1
    x2, y2 = p2
    x3, y3 = p3
    dd = (x1 - x3) ** 2 + (y1 - y3) ** 2
    if dd == 0.0:
        raise DegenerateEdge("coincident edge endpoints")
    a = 2.0 * (x3 - x1) / dd
    b = 2.0 * (y3 - y1) / dd
    c = ((x1 - x3) * (x1 + x3) + (y1 - y3) * (y1 + y3)) / dd
    d = 2.0 * (x3 * y1 - x1 * y3) / dd
    xi2 = a * x2 + b * y2 + c
    eta2 = b * x2 - a * y2 + d
    return ParabolicEdge(tuple(p1), tuple(p2), tuple(p3), a, b, c, d,
                         xi2, eta2)


def build_quad_curved(points, ref_area=None, area_tol=1e-12):
    """Quadratic-curved upstream cell from 9 traced points.

    Point layout: 4 corners CCW, then the 4 edge midpoints (midpoint i
    on the side from corner i to corner i+1), then the cell center.
    The center participates in the test-function fit but not in the
    edge construction.
    """
    pts = np.asarray(points, dtype=float).reshape(9, 2)
    corners = pts[:4]
    if ref_area is None:
        span = pts.max(axis=0) - pts.min(axis=0)
        ref_area = max(float(span[0] * span[1]), 1e-300)
    if _signed_area_of_points(corners) < 0.0:
        pts = pts[[0, 3, 2, 1, 7, 6, 5, 4, 8]]
    edges = np.empty((4, 6))
    st = K._build_edges(pts, True, True, 1e-12 * np.sqrt(ref_area), edges)
    if st == K.STATUS_BAD_EDGE:
        raise DegenerateEdge("parabolic edge construction failed")
    area = K._edges_area(edges)
    if abs(area) <= area_tol * ref_area:
        raise DegenerateCell(f"curved cell area {area:.3e} below tolerance")
    if area < 0.0:
        raise DegenerateCell("curved cell is inverted after normalization")
    records = tuple(
        _parabolic_record(pts[e], pts[4 + e], pts[(e + 1) % 4])
        for e in range(4)
    )
    return UpstreamCell("quad_curved", pts, edges, parabolic_edges=records)


def cell_from_edges(edge_specs):
    """Cell from explicit edge descriptions (testing aid).

    Each spec is either ("line", p0, p1) or ("parabola", p1, pmid, p3);
    the four edges must chain head to tail into a CCW loop.
    """
    edges = np.empty((4, 6))
    pts = np.zeros((9, 2))
    for e, spec in enumerate(edge_specs):
        if spec[0] == "line":
            (x0, y0), (x1, y1) = spec[1], spec[2]
            K._edge_straight(x0, y0, x1, y1, edges, e)
            pts[e] = (x0, y0)
        else:
            (x1, y1), (xm, ym), (x3, y3) = spec[1], spec[2], spec[3]
            st = K._edge_curved(x1, y1, xm, ym, x3, y3, 1e-14, edges, e)
            if st != K.STATUS_OK:
                raise DegenerateEdge("parabolic edge construction failed")
            pts[e] = (x1, y1)
    return UpstreamCell("quad_curved", pts, edges)


def cell_area(cell):
    """Signed area of the cell: the contour integral of x dy."""
    return float(K._edges_area(np.ascontiguousarray(cell.edges)))


def _clip_buffers(cell, mesh):
    xs = [K._edge_x_range(cell.edges, e) for e in range(4)]
    ys = [K._edge_y_range(cell.edges, e) for e in range(4)]
    nvg = int((max(h for _, h in xs) - min(l for l, _ in xs)) / mesh.dx) + 3
    nhg = int((max(h for _, h in ys) - min(l for l, _ in ys)) / mesh.dy) + 3
    maxbp = 2 * (nvg + nhg) + 8
    maxo = 4 * maxbp
    maxi = 4 * (nvg + 2) * (nhg + 4)
    return maxo, maxi, maxbp


def _clip_arrays(cell, mesh):
    maxo, maxi, maxbp = _clip_buffers(cell, mesh)
    out_f = np.empty((maxo, 2))
    out_i = np.empty((maxo, 3), dtype=np.int64)
    inn_f = np.empty((maxi, 2))
    inn_i = np.empty((maxi, 2), dtype=np.int64)
    bp = np.empty(maxbp)
    cy_buf = np.empty(64)
    cs_buf = np.empty(64, dtype=np.int64)
    n_out, n_inn, st = K._clip_cell(
        np.ascontiguousarray(cell.edges), mesh.x_min, mesh.dx,
        mesh.y_min, mesh.dy, out_f, out_i, inn_f, inn_i, bp, cy_buf, cs_buf)
    if st == K.STATUS_OVERFLOW:
        raise ClipFailure("segment buffers overflowed")
    if st == K.STATUS_CLIP:
        raise ClipFailure("inconsistent boundary winding during clipping")
    return (out_f[:n_out].copy(), out_i[:n_out].copy(),
            inn_f[:n_inn].copy(), inn_i[:n_inn].copy())


def _transposed_cell(cell):
    """Swap x and y; edge order and parameters reverse to stay CCW."""
    e = cell.edges
    t = np.empty_like(e)
    for k in range(4):
        src = e[3 - k]
        t[k, 0] = src[3]
        t[k, 1] = -src[4]
        t[k, 2] = src[5]
        t[k, 3] = src[0]
        t[k, 4] = -src[1]
        t[k, 5] = src[2]
    return UpstreamCell(cell.kind, cell.points[:, ::-1], t)


def clip(cell, mesh, include_horizontal=True):
    """Decompose the cell boundary against the background grid.

    Returns outer segments (pieces of the 4 edges tagged with the
    background element that borders them from inside), inner segments
    (pieces of grid lines inside the cell, vertical and, when
    include_horizontal, horizontal), and the folded index set of
    overlapped background elements.
    """
    out_f, out_i, inn_f, inn_i = _clip_arrays(cell, mesh)
    outer = []
    cells = set()
    for k in range(out_f.shape[0]):
        own = (int(out_i[k, 1]), int(out_i[k, 2]))
        outer.append(Segment(kind="outer", edge=int(out_i[k, 0]),
                             s0=float(out_f[k, 0]), s1=float(out_f[k, 1]),
                             owner=own))
        cells.add((own[0] % mesh.nx, own[1] % mesh.ny))
    inner = []
    for k in range(inn_f.shape[0]):
        gi = int(inn_i[k, 0])
        iy = int(inn_i[k, 1])
        inner.append(Segment(kind="inner", axis="v", line_index=gi,
                             line_coord=mesh.x_min + gi * mesh.dx,
                             lo=float(inn_f[k, 0]), hi=float(inn_f[k, 1]),
                             left=(gi - 1, iy), right=(gi, iy)))
    if include_horizontal:
        tcell = _transposed_cell(cell)
        tmesh = Mesh2D(mesh.y_min, mesh.y_max, mesh.x_min, mesh.x_max,
                       mesh.ny, mesh.nx)
        _, _, tin_f, tin_i = _clip_arrays(tcell, tmesh)
        for k in range(tin_f.shape[0]):
            gj = int(tin_i[k, 0])
            ix = int(tin_i[k, 1])
            inner.append(Segment(kind="inner", axis="h", line_index=gj,
                                 line_coord=mesh.y_min + gj * mesh.dy,
                                 lo=float(tin_f[k, 0]), hi=float(tin_f[k, 1]),
                                 left=(ix, gj - 1), right=(ix, gj)))
    return ClipResult(tuple(outer), tuple(inner), frozenset(cells))


def green_integral(cell, segments, integrand, mesh, n_gauss=3):
    """Integral of a per-background-element polynomial family over the cell.

    integrand(ix, iy) must return (coeffs, (xc, yc)): the dense monomial
    table c[i, j] of sum c[i,j] (x - xc)^i (y - yc)^j valid on the
    (unwrapped) background element (ix, iy).  Outer segments contribute
    the line integral of Q dy along the boundary; vertical inner
    segments contribute the left cell's Q across the full cell width;
    horizontal inner segments carry no contribution and are skipped.
    """
    gs, gw = np.polynomial.legendre.leggauss(n_gauss)
    total = 0.0
    for seg in segments.outer:
        ix, iy = seg.owner
        coeffs, (xc, yc) = integrand(ix, iy)
        qc = _x_antiderivative(coeffs, mesh.x_min + ix * mesh.dx - xc)
        ax, bx, cx, ay, by, cy = cell.edges[seg.edge]
        mid = 0.5 * (seg.s0 + seg.s1)
        half = 0.5 * (seg.s1 - seg.s0)
        s = mid + half * gs
        x = (ax * s + bx) * s + cx
        y = (ay * s + by) * s + cy
        yp = 2.0 * ay * s + by
        total += half * np.sum(gw * yp * _eval_mono(qc, x - xc, y - yc))
    for seg in segments.inner:
        if seg.axis != "v":
            continue
        ix, iy = seg.left
        coeffs, (xc, yc) = integrand(ix, iy)
        qc = _x_antiderivative(coeffs, mesh.x_min + ix * mesh.dx - xc)
        mid = 0.5 * (seg.lo + seg.hi)
        half = 0.5 * (seg.hi - seg.lo)
        y = mid + half * gs
        xrel = seg.line_coord - xc
        total += half * np.sum(gw * _eval_mono(qc, xrel, y - yc))
    return float(total)


def _x_antiderivative(coeffs, x_left_rel):
    """Antiderivative in x of a monomial table, zero at x_left_rel."""
    c = np.asarray(coeffs, dtype=float)
    n, m = c.shape
    q = np.zeros((n + 1, m))
    for i in range(n):
        q[i + 1] = c[i] / (i + 1.0)
    for j in range(m):
        q[0, j] -= sum(q[i, j] * x_left_rel ** i for i in range(1, n + 1))
    return q


def _eval_mono(c, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    res = np.zeros(np.broadcast(x, y).shape)
    for i in range(c.shape[0] - 1, -1, -1):
        row = np.zeros_like(res)
        for j in range(c.shape[1] - 1, -1, -1):
            row = row * y + c[i, j]
        res = res * x + row
    return res


def segments_to_polylines(cell, segments, n=16):
    """Plain-text polyline dump of a clip result (debug aid)."""
    lines = []
    ss = np.linspace(0.0, 1.0, n)
    for seg in segments.outer:
        s = seg.s0 + (seg.s1 - seg.s0) * ss
        x, y = cell.edge_point(seg.edge, s)
        lines.append("# outer edge=%d owner=%s" % (seg.edge, seg.owner))
        lines.extend("%.17g %.17g" % (xi, yi) for xi, yi in zip(x, y))
    for seg in segments.inner:
        lines.append("# inner axis=%s line=%.17g" % (seg.axis, seg.line_coord))
        if seg.axis == "v":
            lines.append("%.17g %.17g" % (seg.line_coord, seg.lo))
            lines.append("%.17g %.17g" % (seg.line_coord, seg.hi))
        else:
            lines.append("%.17g %.17g" % (seg.lo, seg.line_coord))
            lines.append("%.17g %.17g" % (seg.hi, seg.line_coord))
    return "\n".join(lines) + "\n"
