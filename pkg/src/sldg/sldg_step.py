"""One conservative SLDG update for a frozen-coefficient transport field.

The update of each element integrates the old solution against a
transported test function over the element's upstream cell:

    int_{A_j} u^{n+1} Psi = int_{A_j*} u^n Psi*

Steps: trace the element vertices backward along characteristics (RK5),
approximate the upstream cell by a straight or quadratic-curved
quadrilateral, fit Psi* by least squares from the traced points, clip
the cell against the background grid, and evaluate the integrals as
Green's-theorem line integrals.  Shared vertices and edge midpoints are
traced once and reused by both neighbors, which makes the decomposition
telescope and conserves mass to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .errors import ClipFailure, DegenerateCell, DegenerateEdge, \
    NegativeAverage, SingularFit
from .mesh import DGField, basis_index_pairs, basis_norms, basis_values

# Butcher's classical 6-stage fifth-order explicit Runge-Kutta scheme.
_RK5_A = (
    (),
    (0.25,),
    (0.125, 0.125),
    (0.0, -0.5, 1.0),
    (3.0 / 16.0, 0.0, 0.0, 9.0 / 16.0),
    (-3.0 / 7.0, 2.0 / 7.0, 12.0 / 7.0, -12.0 / 7.0, 8.0 / 7.0),
)
_RK5_B = (7.0 / 90.0, 0.0, 32.0 / 90.0, 12.0 / 90.0, 32.0 / 90.0, 7.0 / 90.0)


def trace_backward(points, field, dt, substeps=1):
    """Trace points backward in time along the characteristics of field.

    Integrates dx/dt = P(x) from t^{n+1} to t^n (the frozen fields are
    autonomous) with `substeps` fifth-order Runge-Kutta steps.
    """
    p = np.array(points, dtype=float)
    h = -float(dt) / substeps
    for _ in range(substeps):
        stages = []
        for r in range(6):
            q = p
            for c, kst in zip(_RK5_A[r], stages):
                if c != 0.0:
                    q = q + (h * c) * kst
            vx, vy = field.velocity(q[..., 0], q[..., 1])
            stages.append(np.stack([vx, vy], axis=-1))
        acc = np.zeros_like(p)
        for c, kst in zip(_RK5_B, stages):
            if c != 0.0:
                acc += c * kst
        p = p + h * acc
    return p


def reference_points(degree):
    """Local (xi, eta) layout of the traced points of one element.

    4 corners CCW for degree 1; corners, edge midpoints and center
    (9 points) for degree >= 2.
    """
    corners = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)]
    if degree == 1:
        return np.array(corners)
    mids = [(0.0, -0.5), (0.5, 0.0), (0.0, 0.5), (-0.5, 0.0)]
    return np.array(corners + mids + [(0.0, 0.0)])


@dataclass
class UpstreamTrace:
    """Traced element points for one exponential step."""

    mesh: object
    degree: int
    dt: float
    points: np.ndarray          # (nx, ny, 9, 2), unwrapped coordinates
    n_points: int               # 4 or 9


def trace_upstream(mesh, field, dt, degree, substeps=1):
    """Trace the unique mesh points and assemble per-element point sets.

    Grid nodes (and, for degree >= 2, edge midpoints and centers) are
    traced once; elements gather them with the periodic offset, so the
    two elements sharing an edge see bitwise-identical traced geometry.
    """
    nx, ny = mesh.nx, mesh.ny
    dx, dy = mesh.dx, mesh.dy
    xs = mesh.x_min + np.arange(nx) * dx
    ys = mesh.y_min + np.arange(ny) * dy
    node = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    sets = [node.reshape(-1, 2)]
    if degree >= 2:
        midx = np.stack(np.meshgrid(xs + 0.5 * dx, ys, indexing="ij"), axis=-1)
        midy = np.stack(np.meshgrid(xs, ys + 0.5 * dy, indexing="ij"), axis=-1)
        cent = np.stack(np.meshgrid(xs + 0.5 * dx, ys + 0.5 * dy,
                                    indexing="ij"), axis=-1)
        sets += [midx.reshape(-1, 2), midy.reshape(-1, 2), cent.reshape(-1, 2)]
    allpts = np.concatenate(sets, axis=0)
    traced = trace_backward(allpts, field, dt, substeps=substeps)

    n = nx * ny
    tnode = traced[:n].reshape(nx, ny, 2)
    pts = np.zeros((nx, ny, 9, 2))
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ip = (ii + 1) % nx
    jp = (jj + 1) % ny
    ox = ((ii + 1) // nx)[..., None] * np.array([mesh.lx, 0.0])
    oy = ((jj + 1) // ny)[..., None] * np.array([0.0, mesh.ly])
    pts[:, :, 0] = tnode[ii, jj]
    pts[:, :, 1] = tnode[ip, jj] + ox
    pts[:, :, 2] = tnode[ip, jp] + ox + oy
    pts[:, :, 3] = tnode[ii, jp] + oy
    npts = 4
    if degree >= 2:
        tmx = traced[n:2 * n].reshape(nx, ny, 2)
        tmy = traced[2 * n:3 * n].reshape(nx, ny, 2)
        tc = traced[3 * n:4 * n].reshape(nx, ny, 2)
        pts[:, :, 4] = tmx[ii, jj]
        pts[:, :, 5] = tmy[ip, jj] + ox
        pts[:, :, 6] = tmx[ii, jp] + oy
        pts[:, :, 7] = tmy[ii, jj]
        pts[:, :, 8] = tc[ii, jj]
        npts = 9
    return UpstreamTrace(mesh, degree, float(dt), pts, npts)


def upstream_areas(trace, mode="quad"):
    """Signed areas of all upstream cells (cheap; no clipping)."""
    mesh = trace.mesh
    areas = np.empty((mesh.nx, mesh.ny))
    st, bi, bj = K._areas_sweep(trace.points, trace.n_points == 9,
                                mode == "quad_curved",
                                mesh.nx, mesh.ny, mesh.dx, mesh.dy, areas)
    if st == K.STATUS_BAD_EDGE:
        raise DegenerateEdge(f"edge construction failed in element "
                             f"({bi}, {bj})")
    return areas


def area_deviation(trace, mode="quad"):
    """Max relative deviation of upstream-cell areas from the cell area."""
    mesh = trace.mesh
    areas = upstream_areas(trace, mode)
    return float(np.max(np.abs(areas - mesh.dx * mesh.dy))
                 / (mesh.dx * mesh.dy))


@dataclass
class TestFunctionStar:
    """Transported test functions of one element in global coordinates.

    coeffs[m, i, j] multiplies (x - cx)^i (y - cy)^j for basis row m.
    """

    center: tuple
    coeffs: np.ndarray

    def evaluate(self, m, x, y):
        cx, cy = self.center
        c = self.coeffs[m]
        xl = np.asarray(x, dtype=float) - cx
        yl = np.asarray(y, dtype=float) - cy
        res = np.zeros(np.broadcast(xl, yl).shape)
        for i in range(c.shape[0] - 1, -1, -1):
            row = np.zeros_like(res)
            for j in range(c.shape[1] - 1, -1, -1):
                row = row * yl + c[i, j]
            res = res * xl + row
        return res


def reconstruct_test_function(traced_points, degree, dx=1.0, dy=1.0):
    """Least-squares fit of all transported test functions of one element.

    Solves min sum_q (Psi*(c_q*) - Psi(c_q))^2 over P^degree for every
    basis function Psi; exact (zero residual) whenever the traced map
    is affine.  dx, dy only condition the fit; the polynomials returned
    are in unscaled offsets from the traced corner centroid.
    """
    pts = np.asarray(traced_points, dtype=float)
    ref = reference_points(degree)
    if pts.shape[0] != ref.shape[0]:
        raise ValueError(f"expected {ref.shape[0]} traced points for "
                         f"degree {degree}, got {pts.shape[0]}")
    psi_ref = basis_values(degree, ref[:, 0], ref[:, 1])
    pairs = basis_index_pairs(degree)
    cx, cy = pts[:4, 0].mean(), pts[:4, 1].mean()
    cols = [((pts[:, 0] - cx) / dx) ** i * ((pts[:, 1] - cy) / dy) ** j
            for i, j in pairs]
    a = np.stack(cols, axis=1)
    sol, _, rank, _ = np.linalg.lstsq(a, psi_ref, rcond=1e-10)
    if rank < len(pairs):
        raise SingularFit("traced points do not determine the fit "
                          f"(rank {rank} < {len(pairs)})")
    d = degree + 1
    coeffs = np.zeros((len(pairs), d, d))
    for t, (i, j) in enumerate(pairs):
        coeffs[:, i, j] = sol[t] / (dx ** i * dy ** j)
    return TestFunctionStar((cx, cy), coeffs)


def _sweep_buffer_sizes(trace, mesh):
    pts = trace.points[:, :, :trace.n_points]
    w = pts[..., 0].max(axis=2) - pts[..., 0].min(axis=2)
    h = pts[..., 1].max(axis=2) - pts[..., 1].min(axis=2)
    nvg = int(np.ceil(w.max() / mesh.dx)) + 3
    nhg = int(np.ceil(h.max() / mesh.dy)) + 3
    maxbp = 2 * (nvg + nhg) + 8
    maxo = 4 * maxbp
    maxi = 4 * (nvg + 2) * (nhg + 4)
    maxcells = (nvg + 3) * (nhg + 3)
    return maxo, maxi, maxbp, maxcells


_STATUS_RAISE = {
    K.STATUS_DEGENERATE: (DegenerateCell, "upstream cell degenerate or "
                                          "inverted"),
    K.STATUS_CLIP: (ClipFailure, "inconsistent boundary winding"),
    K.STATUS_SINGULAR: (SingularFit, "singular test-function fit"),
    K.STATUS_OVERFLOW: (ClipFailure, "segment buffers overflowed"),
    K.STATUS_BAD_EDGE: (DegenerateEdge, "parabolic edge construction failed"),
}


def sldg_linear_step(u, field, dt, mode="quad", n_edge_gauss=3,
                     substeps=1, trace=None, return_info=False):
    """Advance u by one conservative SLDG step under a frozen field.

    mode "quad" uses straight-edged upstream cells; "quad_curved" the
    quadratic-curved reconstruction (requires degree 2).  A precomputed
    UpstreamTrace may be passed to reuse the characteristic tracing.
    """
    mesh = u.mesh
    k = u.degree
    if mode == "quad_curved" and k < 2:
        raise ValueError("quad_curved upstream cells require degree 2")
    if trace is None:
        trace = trace_upstream(mesh, field, dt, k, substeps=substeps)

    ref = reference_points(k)
    psi_ref = np.ascontiguousarray(basis_values(k, ref[:, 0], ref[:, 1]))
    pairs = np.ascontiguousarray(np.array(basis_index_pairs(k),
                                          dtype=np.int64))
    norms = np.ascontiguousarray(basis_norms(k))
    u_mono = np.ascontiguousarray(u.monomial_coefficients())
    gs, gw = np.polynomial.legendre.leggauss(n_edge_gauss)

    maxo, maxi, maxbp, maxcells = _sweep_buffer_sizes(trace, mesh)
    out = np.empty_like(u.coeffs)
    areas = np.empty((mesh.nx, mesh.ny))
    st, bi, bj = K._sldg_sweep(
        trace.points, trace.n_points == 9, mode == "quad_curved",
        u_mono, k + 1, psi_ref, pairs, u.n_basis,
        mesh.x_min, mesh.dx, mesh.y_min, mesh.dy, mesh.nx, mesh.ny,
        np.ascontiguousarray(gs), np.ascontiguousarray(gw),
        norms, 1e-12, maxo, maxi, maxbp, maxcells, out, areas)
    if st != K.STATUS_OK:
        exc, msg = _STATUS_RAISE[st]
        err = exc(f"{msg} in element ({bi}, {bj})")
        err.element = (bi, bj)
        raise err
    result = DGField(mesh, k, out)
    if return_info:
        theta = float(np.max(np.abs(areas - mesh.dx * mesh.dy))
                      / (mesh.dx * mesh.dy))
        return result, {"areas": areas, "theta": theta, "trace": trace}
    return result


def element_minima(u):
    """Exact per-element minimum of the solution polynomial.

    Degree 1 polynomials attain their extrema at the corners; degree 2
    adds the four edge vertices and the interior critical point, all in
    closed form.  A (k+2)^2 sample grid (edges and corners included) is
    folded in as well, so the result never exceeds the sampled minimum.
    """
    k = u.degree
    s = np.linspace(-0.5, 0.5, k + 2)
    xi, eta = np.meshgrid(s, s, indexing="ij")
    psi = basis_values(k, xi, eta)
    vals = np.einsum("xym,abm->xyab", u.coeffs, psi)
    mins = vals.min(axis=(2, 3))
    if k < 2:
        return mins

    c = u.coeffs

    def q(xi_, eta_):
        return (c[:, :, 0] + c[:, :, 1] * xi_ + c[:, :, 2] * eta_
                + c[:, :, 3] * (xi_ ** 2 - 1.0 / 12.0)
                + c[:, :, 4] * xi_ * eta_
                + c[:, :, 5] * (eta_ ** 2 - 1.0 / 12.0))

    big = np.inf
    # interior critical point of the quadratic
    det = 4.0 * c[:, :, 3] * c[:, :, 5] - c[:, :, 4] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        xi_c = (-2.0 * c[:, :, 1] * c[:, :, 5] + c[:, :, 2] * c[:, :, 4]) / det
        eta_c = (-2.0 * c[:, :, 2] * c[:, :, 3] + c[:, :, 1] * c[:, :, 4]) / det
    ok = (np.abs(det) > 0) & (np.abs(xi_c) < 0.5) & (np.abs(eta_c) < 0.5)
    cand = np.where(ok, q(np.where(ok, xi_c, 0.0), np.where(ok, eta_c, 0.0)),
                    big)
    mins = np.minimum(mins, cand)
    # vertices of the edge-restricted 1D quadratics
    for xi_f in (-0.5, 0.5):
        a2 = c[:, :, 5]
        a1 = c[:, :, 2] + c[:, :, 4] * xi_f
        with np.errstate(divide="ignore", invalid="ignore"):
            eta_v = -a1 / (2.0 * a2)
        ok = (a2 != 0.0) & (np.abs(eta_v) < 0.5)
        cand = np.where(ok, q(xi_f, np.where(ok, eta_v, 0.0)), big)
        mins = np.minimum(mins, cand)
    for eta_f in (-0.5, 0.5):
        a2 = c[:, :, 3]
        a1 = c[:, :, 1] + c[:, :, 4] * eta_f
        with np.errstate(divide="ignore", invalid="ignore"):
            xi_v = -a1 / (2.0 * a2)
        ok = (a2 != 0.0) & (np.abs(xi_v) < 0.5)
        cand = np.where(ok, q(np.where(ok, xi_v, 0.0), eta_f), big)
        mins = np.minimum(mins, cand)
    return mins


def pp_limiter(u, avg_tol=1e-13):
    """Positivity-preserving rescaling about the cell averages.

    Each element's polynomial is shrunk toward its average by
    theta = min(|avg / (m' - avg)|, 1) with m' the element minimum of
    the polynomial, so the limited solution is non-negative pointwise
    (which is what keeps downstream cell averages non-negative).  Cell
    averages, and therefore mass, are untouched.
    """
    k = u.degree
    mprime = element_minima(u)
    avg = u.coeffs[:, :, 0]
    if np.any(avg < -avg_tol):
        worst = float(avg.min())
        raise NegativeAverage(f"cell average {worst:.3e} below zero")
    denom = avg - mprime
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(denom > 0.0, np.abs(avg) / denom, np.inf)
    theta = np.minimum(theta, 1.0)
    coeffs = u.coeffs * theta[:, :, None]
    coeffs[:, :, 0] = avg
    return DGField(u.mesh, k, coeffs)
