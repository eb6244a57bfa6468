"""Numba kernels: upstream-cell clipping and weak-form assembly.

Conventions shared by every routine here:

* An upstream cell is 4 directed edges forming a CCW loop.  Edge e is the
  quadratic curve x(s) = Ax s^2 + Bx s + Cx, y(s) = Ay s^2 + By s + Cy
  with s in [-1, 1]; straight edges simply have Ax = Ay = 0.
* Grid-line ownership is half-open: a point exactly on a vertical line
  belongs to the cell on the right, on a horizontal line to the cell
  above.  Equivalently, every scan line is nudged infinitesimally toward
  -x / -y.  All sign conventions below follow from that single rule,
  which is what makes the decomposition exact for cells whose edges lie
  on grid lines.
* Green's theorem is applied with P = 0 and Q the x-antiderivative of
  the integrand anchored at each background cell's left edge, so
  horizontal scan-line pieces drop out and a piece of a vertical grid
  line contributes only through the cell on its left.
"""

import math

import numpy as np
from numba import njit

# One tolerance rules the kernels: 1e-12 of a cell, used both for
# geometric snapping (absolute: TOL_S * min(dx, dy)) and for index
# decisions (relative: IDX_SNAP in cell units).  Keeping the two
# consistent is what makes neighboring elements agree about geometry
# near grid lines; disagreement there leaks conservation.
TOL_S = 1e-12
IDX_SNAP = 1e-12

STATUS_OK = 0
STATUS_DEGENERATE = 1
STATUS_CLIP = 2
STATUS_SINGULAR = 3
STATUS_OVERFLOW = 4
STATUS_BAD_EDGE = 5


@njit(cache=True)
def _solve_quadratic(a, b, c, out):
    """Real roots of a s^2 + b s + c, ascending; returns the root count.

    Falls back to the linear formula when |a| is negligible against |b|
    (near-straight edges), keeping roots stable.
    """
    aa = abs(a)
    ab = abs(b)
    if aa <= 1e-14 * ab or aa == 0.0:
        if ab == 0.0:
            return 0
        out[0] = -c / b
        return 1
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return 0
    sd = math.sqrt(disc)
    if b >= 0.0:
        q = -0.5 * (b + sd)
    else:
        q = -0.5 * (b - sd)
    r1 = q / a
    if q != 0.0:
        r2 = c / q
    else:
        r2 = r1
    if r1 <= r2:
        out[0] = r1
        out[1] = r2
    else:
        out[0] = r2
        out[1] = r1
    return 2


@njit(cache=True)
def _edge_straight(x0, y0, x1, y1, edges, e):
    edges[e, 0] = 0.0
    edges[e, 1] = 0.5 * (x1 - x0)
    edges[e, 2] = 0.5 * (x1 + x0)
    edges[e, 3] = 0.0
    edges[e, 4] = 0.5 * (y1 - y0)
    edges[e, 5] = 0.5 * (y1 + y0)


@njit(cache=True)
def _edge_curved(x1, y1, xm, ym, x3, y3, tolg, edges, e):
    """Parabolic edge through (x1,y1) -> (xm,ym) -> (x3,y3).

    Local frame: xi = a x + b y + c, eta = b x - a y + d maps the
    endpoints to (-1, 0) and (1, 0); the edge is eta = lam (xi^2 - 1)
    with lam = eta_m / (xi_m^2 - 1).  The factored forms below negate
    bitwise under endpoint swap, so the two elements sharing an edge
    build the identical curve (conservation depends on this).
    """
    ux = x3 - x1
    uy = y3 - y1
    dd = ux * ux + uy * uy
    if dd < tolg * tolg:
        return STATUS_BAD_EDGE
    a = 2.0 * ux / dd
    b = 2.0 * uy / dd
    # (x1^2 - x3^2 + y1^2 - y3^2)/dd, factored so it negates exactly when
    # the endpoints swap (the neighbor element builds the mirror edge)
    c = ((x1 - x3) * (x1 + x3) + (y1 - y3) * (y1 + y3)) / dd
    d = 2.0 * (x3 * y1 - x1 * y3) / dd
    xi_m = a * xm + b * ym + c
    eta_m = b * xm - a * ym + d
    if abs(eta_m) < 1e-14:
        lam = 0.0
    else:
        den = xi_m * xi_m - 1.0
        if abs(den) < 1e-10:
            return STATUS_BAD_EDGE
        lam = eta_m / den
    ax = 0.5 * uy * lam
    ay = -0.5 * ux * lam
    edges[e, 0] = ax
    edges[e, 1] = 0.5 * ux
    edges[e, 2] = 0.5 * (x3 + x1) - ax
    edges[e, 3] = ay
    edges[e, 4] = 0.5 * uy
    edges[e, 5] = 0.5 * (y3 + y1) - ay
    return STATUS_OK


@njit(cache=True)
def _build_edges(pts, use9, curved, tolg, edges):
    """Fill the (4, 6) edge array from traced points.

    pts rows: 4 corners CCW, then 4 edge midpoints (midpoint i sits on
    the edge from corner i to corner i+1), then the center.
    """
    for e in range(4):
        e1 = e
        e3 = (e + 1) % 4
        if curved:
            st = _edge_curved(pts[e1, 0], pts[e1, 1],
                              pts[4 + e, 0], pts[4 + e, 1],
                              pts[e3, 0], pts[e3, 1], tolg, edges, e)
            if st != STATUS_OK:
                return st
        else:
            _edge_straight(pts[e1, 0], pts[e1, 1], pts[e3, 0], pts[e3, 1],
                           edges, e)
    return STATUS_OK


@njit(cache=True)
def _edges_area(edges):
    """Signed area of the closed edge loop, contour integral of x dy."""
    area = 0.0
    for e in range(4):
        ax = edges[e, 0]
        bx = edges[e, 1]
        cx = edges[e, 2]
        ay = edges[e, 3]
        by = edges[e, 4]
        # int_{-1}^{1} x(s) y'(s) ds for quadratic x, y
        area += (2.0 / 3.0) * (ax * by + 2.0 * bx * ay) + 2.0 * cx * by
    return area


@njit(cache=True)
def _edge_x_range(edges, e):
    ax = edges[e, 0]
    bx = edges[e, 1]
    cx = edges[e, 2]
    xa = ax - bx + cx
    xb = ax + bx + cx
    lo = min(xa, xb)
    hi = max(xa, xb)
    if abs(ax) > 0.0:
        sv = -bx / (2.0 * ax)
        if -1.0 < sv < 1.0:
            xv = (ax * sv + bx) * sv + cx
            lo = min(lo, xv)
            hi = max(hi, xv)
    return lo, hi


@njit(cache=True)
def _edge_y_range(edges, e):
    ay = edges[e, 3]
    by = edges[e, 4]
    cy = edges[e, 5]
    ya = ay - by + cy
    yb = ay + by + cy
    lo = min(ya, yb)
    hi = max(ya, yb)
    if abs(ay) > 0.0:
        sv = -by / (2.0 * ay)
        if -1.0 < sv < 1.0:
            yv = (ay * sv + by) * sv + cy
            lo = min(lo, yv)
            hi = max(hi, yv)
    return lo, hi


@njit(cache=True)
def _insert_sorted(buf, n, v):
    i = n
    while i > 0 and buf[i - 1] > v:
        buf[i] = buf[i - 1]
        i -= 1
    buf[i] = v
    return n + 1


@njit(cache=True)
def _emit_minus_runs(ylo, yhi, runs, nruns, tolg, y0, dy, gi,
                     inn_f, inn_i, n_inn, maxi):
    """Append (ylo, yhi) minus the collinear runs, split per y-cell row."""
    cur = ylo
    for t in range(nruns + 1):
        if t < nruns:
            rlo = runs[t, 0]
            rhi = runs[t, 1]
        else:
            rlo = yhi
            rhi = yhi
        if rlo >= yhi - tolg:
            rlo = yhi
        seg_lo = cur
        seg_hi = min(rlo, yhi)
        if seg_hi - seg_lo > tolg:
            jcell = int(math.floor((seg_lo - y0) / dy + IDX_SNAP))
            ya = seg_lo
            while ya < seg_hi - tolg:
                ynext = y0 + (jcell + 1) * dy
                yb = ynext if ynext < seg_hi - tolg else seg_hi
                if yb - ya > tolg:
                    if n_inn >= maxi:
                        return n_inn, STATUS_OVERFLOW
                    inn_f[n_inn, 0] = ya
                    inn_f[n_inn, 1] = yb
                    inn_i[n_inn, 0] = gi
                    inn_i[n_inn, 1] = jcell
                    n_inn += 1
                ya = yb
                jcell += 1
        if t < nruns:
            cur = max(cur, rhi)
        if cur >= yhi - tolg:
            break
    return n_inn, STATUS_OK


@njit(cache=True)
def _clip_cell(edges, x0, dx, y0, dy,
               out_f, out_i, inn_f, inn_i, bp, cy_buf, cs_buf):
    """Split the cell boundary into outer segments and find inner segments.

    out_f[k] = (s0, s1); out_i[k] = (edge, ix_owner, iy_owner) with
    unwrapped owner indices.  Owners are half-open except for pieces
    lying exactly on a grid line, which belong to the cell on their
    interior side (so a cell coincident with a grid element is owned
    entirely by that element and needs no inner segments).

    inn_f[k] = (y_lo, y_hi); inn_i[k] = (gi, iy) for a piece of the
    vertical line x = x0 + gi dx strictly inside the cell, whose left
    background cell is (gi - 1, iy).  Pieces where the boundary itself
    runs along the line are excluded; horizontal inner pieces carry no
    Green contribution with the P = 0 gauge and are not emitted.

    Returns (n_outer, n_inner, status).
    """
    tolg = TOL_S * min(dx, dy)
    roots = np.empty(2)
    runs = np.empty((8, 2))
    n_out = 0
    n_inn = 0
    maxo = out_f.shape[0]
    maxi = inn_f.shape[0]
    maxbp = bp.shape[0]
    maxc = cy_buf.shape[0]

    bxmin = 1e300
    bxmax = -1e300

    # ---- outer segments: subdivide each edge at every grid-line root ----
    for e in range(4):
        ax = edges[e, 0]
        bx = edges[e, 1]
        cx = edges[e, 2]
        ay = edges[e, 3]
        by = edges[e, 4]
        cy = edges[e, 5]
        exlo, exhi = _edge_x_range(edges, e)
        eylo, eyhi = _edge_y_range(edges, e)
        bxmin = min(bxmin, exlo)
        bxmax = max(bxmax, exhi)

        nbp = 0
        bp[nbp] = -1.0
        nbp += 1
        i_lo = int(math.ceil((exlo - x0) / dx - IDX_SNAP))
        i_hi = int(math.floor((exhi - x0) / dx + IDX_SNAP))
        for gi in range(i_lo, i_hi + 1):
            xg = x0 + gi * dx
            nr = _solve_quadratic(ax, bx, cx - xg, roots)
            for r in range(nr):
                s = roots[r]
                if -1.0 + TOL_S < s < 1.0 - TOL_S:
                    if nbp >= maxbp:
                        return n_out, n_inn, STATUS_OVERFLOW
                    nbp = _insert_sorted(bp, nbp, s)
        j_lo = int(math.ceil((eylo - y0) / dy - IDX_SNAP))
        j_hi = int(math.floor((eyhi - y0) / dy + IDX_SNAP))
        for gj in range(j_lo, j_hi + 1):
            yg = y0 + gj * dy
            nr = _solve_quadratic(ay, by, cy - yg, roots)
            for r in range(nr):
                s = roots[r]
                if -1.0 + TOL_S < s < 1.0 - TOL_S:
                    if nbp >= maxbp:
                        return n_out, n_inn, STATUS_OVERFLOW
                    nbp = _insert_sorted(bp, nbp, s)
        if nbp >= maxbp:
            return n_out, n_inn, STATUS_OVERFLOW
        bp[nbp] = 1.0
        nbp += 1

        for p in range(nbp - 1):
            s0 = bp[p]
            s1 = bp[p + 1]
            if s1 - s0 <= TOL_S:
                continue
            sm = 0.5 * (s0 + s1)
            xm = (ax * sm + bx) * sm + cx
            ym = (ay * sm + by) * sm + cy
            if n_out >= maxo:
                return n_out, n_inn, STATUS_OVERFLOW
            # Ownership must match the winding scan's view of this piece:
            # a piece running ALONG a grid line (all three samples within
            # tolerance) belongs to its interior side; any other piece
            # belongs to the strict geometric side of its midpoint, even
            # when the midpoint is within tolerance of the line.
            gxm = (xm - x0) / dx
            gym = (ym - y0) / dy
            rx = math.floor(gxm + 0.5)
            ry = math.floor(gym + 0.5)
            xline = x0 + rx * dx
            x_0 = (ax * s0 + bx) * s0 + cx
            x_1 = (ax * s1 + bx) * s1 + cx
            if abs(xm - xline) <= tolg and abs(x_0 - xline) <= tolg \
                    and abs(x_1 - xline) <= tolg:
                yp = 2.0 * ay * sm + by
                ixo = int(rx) - 1 if yp > 0.0 else int(rx)
            else:
                ixo = int(math.floor(gxm))
                if xm - (x0 + ixo * dx) >= dx:
                    ixo += 1
            yline = y0 + ry * dy
            y_0 = (ay * s0 + by) * s0 + cy
            y_1 = (ay * s1 + by) * s1 + cy
            if abs(ym - yline) <= tolg and abs(y_0 - yline) <= tolg \
                    and abs(y_1 - yline) <= tolg:
                xp = 2.0 * ax * sm + bx
                iyo = int(ry) if xp > 0.0 else int(ry) - 1
            else:
                iyo = int(math.floor(gym))
                if ym - (y0 + iyo * dy) >= dy:
                    iyo += 1
            out_f[n_out, 0] = s0
            out_f[n_out, 1] = s1
            out_i[n_out, 0] = e
            out_i[n_out, 1] = ixo
            out_i[n_out, 2] = iyo
            n_out += 1

    # ---- inner segments: winding scan of every vertical grid line ----
    i_lo = int(math.ceil((bxmin - x0) / dx - IDX_SNAP))
    i_hi = int(math.floor((bxmax - x0) / dx + IDX_SNAP))
    for gi in range(i_lo, i_hi + 1):
        xg = x0 + gi * dx
        ncr = 0
        nruns = 0
        prev_sign = 0
        first_sign = 0
        for e in range(4):
            ax = edges[e, 0]
            bx = edges[e, 1]
            cx = edges[e, 2]
            ay = edges[e, 3]
            by = edges[e, 4]
            cy = edges[e, 5]
            nbp = 0
            bp[nbp] = -1.0
            nbp += 1
            nr = _solve_quadratic(ax, bx, cx - xg, roots)
            for r in range(nr):
                s = roots[r]
                if -1.0 + TOL_S < s < 1.0 - TOL_S:
                    nbp = _insert_sorted(bp, nbp, s)
            bp[nbp] = 1.0
            nbp += 1
            for p in range(nbp - 1):
                s0 = bp[p]
                s1 = bp[p + 1]
                if s1 - s0 <= TOL_S:
                    continue
                sm = 0.5 * (s0 + s1)
                fm = (ax * sm + bx) * sm + cx - xg
                f0 = (ax * s0 + bx) * s0 + cx - xg
                f1 = (ax * s1 + bx) * s1 + cx - xg
                # strict midpoint side; only a piece running along the
                # line (a "run") is treated as on it
                sgn = -1 if fm < 0.0 else 1
                if abs(fm) <= tolg and abs(f0) <= tolg and abs(f1) <= tolg:
                    sgn = 1
                    # record the run's y-extent so the scan does not
                    # call the line interior there
                    ya = (ay * s0 + by) * s0 + cy
                    yb = (ay * s1 + by) * s1 + cy
                    rlo = min(ya, yb)
                    rhi = max(ya, yb)
                    if abs(ay) > 0.0:
                        sv = -by / (2.0 * ay)
                        if s0 < sv < s1:
                            yv = (ay * sv + by) * sv + cy
                            rlo = min(rlo, yv)
                            rhi = max(rhi, yv)
                    if nruns < 8 and rhi - rlo > tolg:
                        runs[nruns, 0] = rlo
                        runs[nruns, 1] = rhi
                        nruns += 1
                if prev_sign == 0:
                    first_sign = sgn
                elif sgn != prev_sign:
                    if ncr >= maxc:
                        return n_out, n_inn, STATUS_OVERFLOW
                    cy_buf[ncr] = (ay * s0 + by) * s0 + cy
                    cs_buf[ncr] = sgn
                    ncr += 1
                prev_sign = sgn
        if first_sign != 0 and prev_sign != first_sign:
            if ncr >= maxc:
                return n_out, n_inn, STATUS_OVERFLOW
            cy_buf[ncr] = edges[0, 3] - edges[0, 4] + edges[0, 5]
            cs_buf[ncr] = first_sign
            ncr += 1
        if ncr == 0:
            continue

        # sort crossings by y descending, runs by y ascending
        for i in range(1, ncr):
            yv = cy_buf[i]
            sv = cs_buf[i]
            j = i
            while j > 0 and cy_buf[j - 1] < yv:
                cy_buf[j] = cy_buf[j - 1]
                cs_buf[j] = cs_buf[j - 1]
                j -= 1
            cy_buf[j] = yv
            cs_buf[j] = sv
        for i in range(1, nruns):
            rl = runs[i, 0]
            rh = runs[i, 1]
            j = i
            while j > 0 and runs[j - 1, 0] > rl:
                runs[j, 0] = runs[j - 1, 0]
                runs[j, 1] = runs[j - 1, 1]
                j -= 1
            runs[j, 0] = rl
            runs[j, 1] = rh

        wind = 0
        for cidx in range(ncr):
            wind -= cs_buf[cidx]
            if wind < 0 or wind > 1:
                # a simple CCW boundary keeps the winding in {0, 1};
                # excursions over a finite span mean the upstream cell
                # folded over itself (time step too large)
                if wind < -1 or wind > 2:
                    return n_out, n_inn, STATUS_CLIP
                if cidx < ncr - 1 and cy_buf[cidx] - cy_buf[cidx + 1] > tolg:
                    return n_out, n_inn, STATUS_DEGENERATE
            if wind == 1 and cidx < ncr - 1:
                yhi = cy_buf[cidx]
                ylo = cy_buf[cidx + 1]
                if yhi - ylo <= tolg:
                    continue
                n_inn, st = _emit_minus_runs(ylo, yhi, runs, nruns, tolg,
                                             y0, dy, gi, inn_f, inn_i,
                                             n_inn, maxi)
                if st != STATUS_OK:
                    return n_out, n_inn, st
        if wind != 0:
            return n_out, n_inn, STATUS_CLIP
    return n_out, n_inn, STATUS_OK


@njit(cache=True)
def _shift_poly2(src, deg, a, b, dst):
    """dst(X, Y) = src(X + a, Y + b) for a dense (deg+1)^2 table."""
    n = deg + 1
    for p in range(n):
        for q in range(n):
            acc = 0.0
            for i in range(p, n):
                cb_i = 1.0
                # binomial C(i, p) * a^(i-p)
                num = 1.0
                den = 1.0
                for t in range(i - p):
                    num *= (i - t)
                    den *= (t + 1.0)
                    cb_i *= a
                ci = num / den * cb_i
                for j in range(q, n):
                    cb_j = 1.0
                    num2 = 1.0
                    den2 = 1.0
                    for t in range(j - q):
                        num2 *= (j - t)
                        den2 *= (t + 1.0)
                        cb_j *= b
                    cj = num2 / den2 * cb_j
                    acc += src[i, j] * ci * cj
            dst[p, q] = acc


@njit(cache=True)
def _conv2(a, na, b, nb_, out):
    n = na + nb_ - 1
    for i in range(n):
        for j in range(n):
            out[i, j] = 0.0
    for i in range(na):
        for j in range(na):
            v = a[i, j]
            if v == 0.0:
                continue
            for p in range(nb_):
                for q in range(nb_):
                    out[i + p, j + q] += v * b[p, q]


@njit(cache=True)
def _eval_poly2(c, nx_, ny_, x, y):
    res = 0.0
    for i in range(nx_ - 1, -1, -1):
        row = 0.0
        for j in range(ny_ - 1, -1, -1):
            row = row * y + c[i, j]
        res = res * x + row
    return res


@njit(cache=True)
def _chol_solve(g, rhs, n, nrhs, w):
    """Solve the SPD system g w = rhs by Cholesky; False if near singular."""
    for i in range(n):
        for j in range(i):
            s = g[i, j]
            for t in range(j):
                s -= g[i, t] * g[j, t]
            g[i, j] = s / g[j, j]
        s = g[i, i]
        for t in range(i):
            s -= g[i, t] * g[i, t]
        if s <= 1e-12:
            return False
        g[i, i] = math.sqrt(s)
    for m in range(nrhs):
        for i in range(n):
            s = rhs[i, m]
            for t in range(i):
                s -= g[i, t] * w[t, m]
            w[i, m] = s / g[i, i]
        for i in range(n - 1, -1, -1):
            s = w[i, m]
            for t in range(i + 1, n):
                s -= g[t, i] * w[t, m]
            w[i, m] = s / g[i, i]
    return True


@njit(cache=True)
def _fit_psistar(pts, npts, cx, cy, dx, dy, pairs, nb, psi_ref, gbuf, rbuf,
                 wbuf):
    """Least-squares fit of the transported test functions.

    Solves min sum_q (Psi*(c_q^star) - Psi(c_q))^2 over polynomials in
    the monomials ((x-cx)/dx)^i ((y-cy)/dy)^j; wbuf[:, m] receives the
    scaled-monomial coefficients of Psi*_m.
    """
    for i in range(nb):
        for j in range(nb):
            gbuf[i, j] = 0.0
        for m in range(nb):
            rbuf[i, m] = 0.0
    for q in range(npts):
        xs = (pts[q, 0] - cx) / dx
        ys = (pts[q, 1] - cy) / dy
        # monomial row
        for t in range(nb):
            it = pairs[t, 0]
            jt = pairs[t, 1]
            v = 1.0
            for _ in range(it):
                v *= xs
            for _ in range(jt):
                v *= ys
            wbuf[t, nb] = v  # scratch column
        for i in range(nb):
            vi = wbuf[i, nb]
            for j in range(nb):
                gbuf[i, j] += vi * wbuf[j, nb]
            for m in range(nb):
                rbuf[i, m] += vi * psi_ref[q, m]
    return _chol_solve(gbuf, rbuf, nb, nb, wbuf)


@njit(cache=True)
def _areas_sweep(pts, use9, curved, nx, ny, dxm, dym, out_area):
    """Signed upstream-cell areas for every element; first bad element."""
    edges = np.empty((4, 6))
    tolg = TOL_S * min(dxm, dym)
    for ei in range(nx):
        for ej in range(ny):
            st = _build_edges(pts[ei, ej], use9, curved, tolg, edges)
            if st != STATUS_OK:
                return st, ei, ej
            out_area[ei, ej] = _edges_area(edges)
    return STATUS_OK, -1, -1


@njit(cache=True)
def _sldg_sweep(pts, use9, curved,
                u_mono, du,
                psi_ref, pairs, nb,
                x0, dxm, y0, dym, nx, ny,
                gs, gw,
                norms, min_area_frac,
                maxo, maxi, maxbp, maxcells,
                out_coeffs, out_area):
    """One linear SLDG update: all elements, all basis rows.

    pts: (nx, ny, 9, 2) traced points (unwrapped coordinates).
    u_mono: (nx, ny, du, du) monomials of u about each cell center.
    psi_ref: (npts, nb) basis values at the untraced reference points.
    Returns (status, bad_i, bad_j).
    """
    npts = 9 if use9 else 4
    ng = gs.shape[0]
    tolg = TOL_S * min(dxm, dym)
    cell_area = dxm * dym
    dprod = 2 * du - 1          # product polynomial size (per axis)
    dq = dprod + 1              # + x-antiderivative

    edges = np.empty((4, 6))
    out_f = np.empty((maxo, 2))
    out_i = np.empty((maxo, 3), dtype=np.int64)
    inn_f = np.empty((maxi, 2))
    inn_i = np.empty((maxi, 2), dtype=np.int64)
    bp = np.empty(maxbp)
    cy_buf = np.empty(64)
    cs_buf = np.empty(64, dtype=np.int64)

    gbuf = np.empty((nb, nb))
    rbuf = np.empty((nb, nb))
    wbuf = np.empty((nb, nb + 1))
    psim = np.empty((nb, du, du))       # Psi* monomials about (cx, cy)
    shifted = np.empty((du, du))
    prod = np.empty((dprod, dprod))

    ckey = np.empty((maxcells, 2), dtype=np.int64)
    cqc = np.empty((maxcells, nb, dq, dprod))
    acc = np.empty(nb)

    xrel_left = -0.5 * dxm
    xrel_right = 0.5 * dxm

    for ei in range(nx):
        for ej in range(ny):
            p9 = pts[ei, ej]
            st = _build_edges(p9, use9, curved, tolg, edges)
            if st != STATUS_OK:
                return st, ei, ej
            area = _edges_area(edges)
            out_area[ei, ej] = area
            if area <= min_area_frac * cell_area:
                return STATUS_DEGENERATE, ei, ej

            # --- transported test functions, centered on the 4 corners ---
            cx = 0.25 * (p9[0, 0] + p9[1, 0] + p9[2, 0] + p9[3, 0])
            cy = 0.25 * (p9[0, 1] + p9[1, 1] + p9[2, 1] + p9[3, 1])
            ok = _fit_psistar(p9, npts, cx, cy, dxm, dym, pairs, nb,
                              psi_ref, gbuf, rbuf, wbuf)
            if not ok:
                return STATUS_SINGULAR, ei, ej
            for m in range(nb):
                for i in range(du):
                    for j in range(du):
                        psim[m, i, j] = 0.0
            for t in range(nb):
                it = pairs[t, 0]
                jt = pairs[t, 1]
                sc = 1.0
                for _ in range(it):
                    sc /= dxm
                for _ in range(jt):
                    sc /= dym
                for m in range(nb):
                    psim[m, it, jt] = wbuf[t, m] * sc
            # the average row transports to exactly 1 (conservation)
            for i in range(du):
                for j in range(du):
                    psim[0, i, j] = 0.0
            psim[0, 0, 0] = 1.0

            n_out, n_inn, st = _clip_cell(edges, x0, dxm, y0, dym,
                                          out_f, out_i, inn_f, inn_i,
                                          bp, cy_buf, cs_buf)
            if st != STATUS_OK:
                return st, ei, ej

            ncache = 0
            for m in range(nb):
                acc[m] = 0.0

            for seg in range(n_out + n_inn):
                if seg < n_out:
                    own_x = out_i[seg, 1]
                    own_y = out_i[seg, 2]
                else:
                    own_x = inn_i[seg - n_out, 0] - 1
                    own_y = inn_i[seg - n_out, 1]

                # owner cache lookup
                ci = -1
                for t in range(ncache):
                    if ckey[t, 0] == own_x and ckey[t, 1] == own_y:
                        ci = t
                        break
                if ci == -1:
                    if ncache >= maxcells:
                        return STATUS_OVERFLOW, ei, ej
                    ci = ncache
                    ncache += 1
                    ckey[ci, 0] = own_x
                    ckey[ci, 1] = own_y
                    xcl = x0 + (own_x + 0.5) * dxm
                    ycl = y0 + (own_y + 0.5) * dym
                    ul = u_mono[own_x % nx, own_y % ny]
                    for m in range(nb):
                        # re-center Psi*: (x - cx) = (x - xcl) + (xcl - cx)
                        _shift_poly2(psim[m], du - 1, xcl - cx, ycl - cy,
                                     shifted)
                        _conv2(ul, du, shifted, du, prod)
                        # x-antiderivative anchored at the cell's left edge
                        for j in range(dprod):
                            cqc[ci, m, 0, j] = 0.0
                        for i in range(dprod):
                            for j in range(dprod):
                                cqc[ci, m, i + 1, j] = prod[i, j] / (i + 1.0)
                        for j in range(dprod):
                            bterm = 0.0
                            xp = 1.0
                            for i in range(1, dq):
                                xp *= xrel_left
                                bterm += cqc[ci, m, i, j] * xp
                            cqc[ci, m, 0, j] -= bterm

                xcl = x0 + (own_x + 0.5) * dxm
                ycl = y0 + (own_y + 0.5) * dym
                if seg < n_out:
                    e = out_i[seg, 0]
                    ax = edges[e, 0]
                    bx = edges[e, 1]
                    cxe = edges[e, 2]
                    ay = edges[e, 3]
                    by = edges[e, 4]
                    cye = edges[e, 5]
                    mid = 0.5 * (out_f[seg, 0] + out_f[seg, 1])
                    half = 0.5 * (out_f[seg, 1] - out_f[seg, 0])
                    for g in range(ng):
                        s = mid + half * gs[g]
                        xg = (ax * s + bx) * s + cxe
                        yg = (ay * s + by) * s + cye
                        yp = 2.0 * ay * s + by
                        wgt = gw[g] * half * yp
                        xl = xg - xcl
                        yl = yg - ycl
                        for m in range(nb):
                            acc[m] += wgt * _eval_poly2(cqc[ci, m], dq,
                                                        dprod, xl, yl)
                else:
                    ylo = inn_f[seg - n_out, 0]
                    yhi = inn_f[seg - n_out, 1]
                    mid = 0.5 * (ylo + yhi)
                    half = 0.5 * (yhi - ylo)
                    for g in range(ng):
                        yg = mid + half * gs[g]
                        wgt = gw[g] * half
                        yl = yg - ycl
                        for m in range(nb):
                            acc[m] += wgt * _eval_poly2(cqc[ci, m], dq,
                                                        dprod, xrel_right, yl)

            for m in range(nb):
                out_coeffs[ei, ej, m] = acc[m] / (norms[m] * cell_area)
    return STATUS_OK, -1, -1
