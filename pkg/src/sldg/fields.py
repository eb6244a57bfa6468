"""Frozen velocity fields and the problem-specific field solves.

Freezing the transport coefficient at a stage solution turns the
nonlinear models into linear transport problems: the Vlasov-Poisson
field (v, E(x)) from the 1D Poisson solve, the guiding-center
perpendicular field (-Phi_y, Phi_x) from the 2D Poisson solve, and the
Burgers coefficient P(u) = u/2.  All fields evaluate anywhere in the
periodic domain; at element interfaces, discontinuous fields return the
mean of the one-sided values.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import MeshMismatch
from .mesh import IDX_SNAP, DGField, QuadratureRule, basis_norms, basis_values

logger = logging.getLogger(__name__)

_INTERFACE_TOL = 1e-9


def _eval_mono_cells(mesh, mono, ix, iy, x, y):
    """Evaluate per-cell monomials for given (unwrapped) cell indices."""
    xc = mesh.x_min + (np.asarray(ix) + 0.5) * mesh.dx
    yc = mesh.y_min + (np.asarray(iy) + 0.5) * mesh.dy
    xl = np.asarray(x) - xc
    yl = np.asarray(y) - yc
    c = mono[np.mod(ix, mesh.nx), np.mod(iy, mesh.ny)]
    res = np.zeros(np.broadcast(xl, yl).shape)
    for i in range(c.shape[-2] - 1, -1, -1):
        row = np.zeros_like(res)
        for j in range(c.shape[-1] - 1, -1, -1):
            row = row * yl + c[..., i, j]
        res = res * xl + row
    return res


def _averaged_eval(mesh, mono, x, y, avg_x=True, avg_y=True):
    """Pointwise evaluation with two-sided averaging on interfaces."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    gx = (x - mesh.x_min) / mesh.dx
    gy = (y - mesh.y_min) / mesh.dy
    ix = np.floor(gx + IDX_SNAP).astype(np.int64)
    iy = np.floor(gy + IDX_SNAP).astype(np.int64)
    on_x = (np.abs(gx - np.round(gx)) < _INTERFACE_TOL) if avg_x else False
    on_y = (np.abs(gy - np.round(gy)) < _INTERFACE_TOL) if avg_y else False
    total = np.zeros(np.broadcast(x, y).shape)
    for sx in (0, -1):
        wx = np.where(on_x, 0.5, 1.0 if sx == 0 else 0.0)
        if not np.any(wx):
            continue
        for sy in (0, -1):
            wy = np.where(on_y, 0.5, 1.0 if sy == 0 else 0.0)
            w = wx * wy
            if not np.any(w):
                continue
            total = total + w * _eval_mono_cells(mesh, mono, ix + sx, iy + sy,
                                                 x, y)
    return total


def _eval_mono_1d(mesh, coeffs, x, average=False):
    """Per-x-cell 1D monomial evaluation, optional interface averaging."""
    x = np.asarray(x, dtype=float)
    gx = (x - mesh.x_min) / mesh.dx
    ix = np.floor(gx + IDX_SNAP).astype(np.int64)

    def one(ixc):
        xc = mesh.x_min + (ixc + 0.5) * mesh.dx
        xl = x - xc
        c = coeffs[np.mod(ixc, mesh.nx)]
        res = np.zeros_like(xl)
        for a in range(c.shape[-1] - 1, -1, -1):
            res = res * xl + c[..., a]
        return res

    if not average:
        return one(ix)
    on_x = np.abs(gx - np.round(gx)) < _INTERFACE_TOL
    return np.where(on_x, 0.5 * (one(ix) + one(ix - 1)), one(ix))


class FrozenField:
    """A u-independent velocity field, evaluable at arbitrary points."""

    kind = "abstract"
    mesh = None

    def velocity(self, x, y):
        raise NotImplementedError

    def max_speeds(self, n_sample=4):
        """(a, b): max |velocity| per direction, from a per-cell sample."""
        mesh = self.mesh
        if mesh is None:
            raise NotImplementedError("analytic fields need explicit bounds")
        sx = np.linspace(mesh.x_min, mesh.x_max, mesh.nx * n_sample + 1)
        sy = np.linspace(mesh.y_min, mesh.y_max, mesh.ny * n_sample + 1)
        xg, yg = np.meshgrid(sx, sy, indexing="ij")
        vx, vy = self.velocity(xg, yg)
        return float(np.max(np.abs(vx))), float(np.max(np.abs(vy)))


class AnalyticField(FrozenField):
    """Closed-form velocity field (tests and linear-advection runs).

    When a mesh is attached, coordinates are folded into the periodic
    domain before evaluation, so the field is the periodic extension of
    the closed form (the transport problems here are all periodic).
    """

    kind = "analytic"

    def __init__(self, fx, fy, mesh=None, speed_bounds=None):
        self.fx = fx
        self.fy = fy
        self.mesh = mesh
        self.speed_bounds = speed_bounds

    def velocity(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.mesh is not None:
            x, y = self.mesh.fold(x, y)
        shape = np.broadcast(x, y).shape
        vx = np.broadcast_to(np.asarray(self.fx(x, y), dtype=float), shape)
        vy = np.broadcast_to(np.asarray(self.fy(x, y), dtype=float), shape)
        return vx.copy(), vy.copy()

    def max_speeds(self, n_sample=4):
        if self.speed_bounds is not None:
            return self.speed_bounds
        return super().max_speeds(n_sample)


class VPField(FrozenField):
    """Vlasov-Poisson transport field (v_scale * v, E(x)).

    E is a continuous per-x-cell polynomial of degree k + 1 stored as
    monomials about the cell centers; the v-advection carries an
    explicit scale so that linear combinations of stage fields scale
    the v-coordinate part correctly.
    """

    kind = "vp"

    def __init__(self, mesh, e_coeffs, v_scale=1.0):
        self.mesh = mesh
        self.e_coeffs = np.asarray(e_coeffs, dtype=float)
        self.v_scale = float(v_scale)

    def e_values(self, x):
        return _eval_mono_1d(self.mesh, self.e_coeffs, x)

    def velocity(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        vx = self.v_scale * y
        xf = self.mesh.x_min + np.mod(x - self.mesh.x_min, self.mesh.lx)
        vy = np.broadcast_to(self.e_values(xf), vx.shape)
        return vx.copy(), vy.copy()

    def max_speeds(self, n_sample=4):
        mesh = self.mesh
        a = abs(self.v_scale) * max(abs(mesh.y_min), abs(mesh.y_max))
        sx = np.linspace(mesh.x_min, mesh.x_max, mesh.nx * n_sample + 1)
        b = float(np.max(np.abs(self.e_values(mesh.fold(sx, 0.0)[0]))))
        return a, b


class GuidingCenterField(FrozenField):
    """Perpendicular electric field (-Phi_y, Phi_x) as per-cell polynomials."""

    kind = "gc"

    def __init__(self, mesh, e1_mono, e2_mono):
        self.mesh = mesh
        self.e1_mono = np.asarray(e1_mono, dtype=float)
        self.e2_mono = np.asarray(e2_mono, dtype=float)

    def velocity(self, x, y):
        xf, yf = self.mesh.fold(x, y)
        vx = _averaged_eval(self.mesh, self.e1_mono, xf, yf)
        vy = _averaged_eval(self.mesh, self.e2_mono, xf, yf)
        return vx, vy


class Burgers1DField(FrozenField):
    """Burgers advective coefficient P(u) = u/2, one-dimensional in x."""

    kind = "burgers"

    def __init__(self, mesh, p_coeffs):
        self.mesh = mesh
        self.p_coeffs = np.asarray(p_coeffs, dtype=float)

    def velocity(self, x, y):
        x = np.asarray(x, dtype=float)
        xf = self.mesh.x_min + np.mod(x - self.mesh.x_min, self.mesh.lx)
        vx = _eval_mono_1d(self.mesh, self.p_coeffs, xf, average=True)
        vx = np.broadcast_to(vx, np.broadcast(x, np.asarray(y)).shape)
        return vx.copy(), np.zeros(vx.shape)


class LinearComboField(FrozenField):
    """Pointwise linear combination of fields (mixed-kind fallback)."""

    kind = "combo"

    def __init__(self, coeffs, fields):
        self.coeffs = tuple(float(c) for c in coeffs)
        self.fields = tuple(fields)
        self.mesh = next((f.mesh for f in fields if f.mesh is not None), None)

    def velocity(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        vx = np.zeros(np.broadcast(x, y).shape)
        vy = np.zeros_like(vx)
        for c, f in zip(self.coeffs, self.fields):
            fx, fy = f.velocity(x, y)
            vx += c * fx
            vy += c * fy
        return vx, vy


def combine_frozen(coeffs, fields):
    """Linear combination of frozen fields.

    Polynomial-backed fields of one kind combine coefficient-wise, so
    the result is again polynomial-backed (one field build per
    exponential, as the stage combinations require).
    """
    if len(coeffs) != len(fields):
        raise ValueError("coefficient/field count mismatch")
    if len(fields) == 0:
        raise ValueError("empty combination")
    mesh = next((f.mesh for f in fields if f.mesh is not None), None)
    for f in fields:
        if f.mesh is not None and mesh is not None \
                and not f.mesh.compatible(mesh):
            raise MeshMismatch("combined fields live on different meshes")
    kinds = {type(f) for f in fields}
    if kinds == {VPField}:
        e = sum(c * f.e_coeffs for c, f in zip(coeffs, fields))
        vs = sum(c * f.v_scale for c, f in zip(coeffs, fields))
        return VPField(mesh, e, v_scale=vs)
    if kinds == {GuidingCenterField}:
        e1 = sum(c * f.e1_mono for c, f in zip(coeffs, fields))
        e2 = sum(c * f.e2_mono for c, f in zip(coeffs, fields))
        return GuidingCenterField(mesh, e1, e2)
    if kinds == {Burgers1DField}:
        p = sum(c * f.p_coeffs for c, f in zip(coeffs, fields))
        return Burgers1DField(mesh, p)
    return LinearComboField(coeffs, fields)


class ChargeDensity1D:
    """Per-x-cell polynomial rho(x) = int f dv - 1."""

    def __init__(self, mesh, coeffs):
        self.mesh = mesh
        self.coeffs = np.asarray(coeffs, dtype=float)  # (nx, degree+1)

    def evaluate(self, x):
        xf = self.mesh.x_min + np.mod(np.asarray(x, dtype=float)
                                      - self.mesh.x_min, self.mesh.lx)
        return _eval_mono_1d(self.mesh, self.coeffs, xf)

    def integral(self):
        """Exact integral over the x-domain (even-power moments only)."""
        dx = self.mesh.dx
        total = 0.0
        for a in range(self.coeffs.shape[1]):
            if a % 2 == 0:
                total += np.sum(self.coeffs[:, a]) * 2.0 \
                    * (0.5 * dx) ** (a + 1) / (a + 1)
        return float(total)


def charge_density(f):
    """Charge density of a phase-space distribution on an (x, v) mesh.

    Integrates f exactly in v (modal moments; odd-in-v terms drop) and
    subtracts the uniform ion background (density 1).
    """
    mesh = f.mesh
    mono = f.monomial_coefficients()  # (nx, ny, d+1, d+1)
    d = f.degree
    dy = mesh.dy
    # int over one v-cell of (v - v_j)^b dv
    ymom = np.array([2.0 * (0.5 * dy) ** (b + 1) / (b + 1) if b % 2 == 0
                     else 0.0 for b in range(d + 1)])
    coeffs = np.einsum("xyab,b->xa", mono, ymom)
    coeffs[:, 0] -= 1.0
    return ChargeDensity1D(mesh, coeffs)


def electric_field_1d(rho, v_scale=1.0, mean_tol=1e-10):
    """Electrostatic field E with E_x = rho, periodic, zero mean.

    The exact piecewise antiderivative of the polynomial charge density,
    made continuous across interfaces; the compatibility condition
    int rho dx = 0 is enforced by subtracting the mean (logged if it
    exceeds mean_tol).
    """
    mesh = rho.mesh
    nx = mesh.nx
    dx = mesh.dx
    c = rho.coeffs.copy()
    mean = rho.integral() / mesh.lx
    if abs(mean) > mean_tol:
        # velocity-domain truncation of a Maxwellian leaves ~1e-9 here,
        # so this fires every stage of a normal VP run; keep it quiet
        logger.debug("charge density mean %.3e exceeds %.1e; subtracting",
                     mean, mean_tol)
    c[:, 0] -= mean

    d = c.shape[1]
    e = np.zeros((nx, d + 1))
    for a in range(d):
        e[:, a + 1] = c[:, a] / (a + 1)
    # continuity: cumulate jumps R_i(+dx/2) - R_{i+1}(-dx/2)
    h = 0.5 * dx
    right = sum(e[:, a] * h ** a for a in range(1, d + 1))
    left = sum(e[:, a] * (-h) ** a for a in range(1, d + 1))
    kappa = np.zeros(nx)
    for i in range(1, nx):
        kappa[i] = kappa[i - 1] + right[i - 1] - left[i]
    e[:, 0] = kappa
    # zero-mean gauge
    cell_int = np.zeros(nx)
    for a in range(0, d + 1, 2):
        cell_int += e[:, a] * 2.0 * h ** (a + 1) / (a + 1)
    e[:, 0] -= np.sum(cell_int) / mesh.lx
    return VPField(mesh, e, v_scale=v_scale)


def electric_field_2d(rho, n_sample=None, n_quad=None):
    """Guiding-center field from the periodic Poisson solve -Lap(Phi) = rho.

    The density is sampled on a uniform per-cell sub-lattice, solved
    spectrally (zero-mean gauge), and the spectral derivatives
    (-Phi_y, Phi_x) are L2-projected onto per-cell polynomials of
    degree k + 1.
    """
    mesh = rho.mesh
    k = rho.degree
    if n_sample is None:
        n_sample = k + 2
    if n_quad is None:
        n_quad = k + 3
    nx, ny = mesh.nx, mesh.ny
    mx, my = nx * n_sample, ny * n_sample

    # cell-centered uniform sample lattice (never touches interfaces)
    off = (np.arange(n_sample) + 0.5) / n_sample - 0.5
    xs = (mesh.x_centers()[:, None] + off[None, :] * mesh.dx).ravel()
    ys = (mesh.y_centers()[:, None] + off[None, :] * mesh.dy).ravel()
    ixs = np.repeat(np.arange(nx), n_sample)
    iys = np.repeat(np.arange(ny), n_sample)
    vals = rho.eval_cell(ixs[:, None], iys[None, :], xs[:, None], ys[None, :])
    vals = vals - vals.mean()

    kx = 2.0 * np.pi * np.fft.fftfreq(mx, d=mesh.lx / mx)
    ky = 2.0 * np.pi * np.fft.fftfreq(my, d=mesh.ly / my)
    rho_hat = np.fft.fft2(vals)
    k2 = kx[:, None] ** 2 + ky[None, :] ** 2
    k2[0, 0] = 1.0
    phi_hat = rho_hat / k2
    phi_hat[0, 0] = 0.0
    e1_hat = -1j * ky[None, :] * phi_hat   # -Phi_y
    e2_hat = 1j * kx[:, None] * phi_hat    # +Phi_x

    # evaluate the trig polynomials at per-cell Gauss points (separable)
    rule = QuadratureRule(n_quad, n_quad)
    gx = rule.xi[:, 0]
    gy = rule.eta[0, :]
    xg = (mesh.x_centers()[:, None] + gx[None, :] * mesh.dx).ravel()
    yg = (mesh.y_centers()[:, None] + gy[None, :] * mesh.dy).ravel()
    wx_mat = np.exp(1j * np.outer(xg - mesh.x_min, kx)) / mx
    wy_mat = np.exp(1j * np.outer(yg - mesh.y_min, ky)) / my
    e1 = np.real(wx_mat @ e1_hat @ wy_mat.T)
    e2 = np.real(wx_mat @ e2_hat @ wy_mat.T)
    shape = (nx, n_quad, ny, n_quad)
    e1 = e1.reshape(shape).transpose(0, 2, 1, 3)
    e2 = e2.reshape(shape).transpose(0, 2, 1, 3)

    deg = k + 1
    psi = basis_values(deg, rule.xi, rule.eta)
    wpsi = rule.weights[..., None] * psi
    norms = basis_norms(deg)
    from .mesh import modal_to_monomial
    c1 = np.einsum("xyab,abm->xym", e1, wpsi) / norms
    c2 = np.einsum("xyab,abm->xym", e2, wpsi) / norms
    m1 = modal_to_monomial(c1, deg, mesh.dx, mesh.dy)
    m2 = modal_to_monomial(c2, deg, mesh.dx, mesh.dy)
    return GuidingCenterField(mesh, m1, m2)


def burgers_field(u):
    """Frozen Burgers coefficient P(u) = u/2 for a 1D (ny = 1) field."""
    mono = u.monomial_coefficients()
    p = 0.5 * mono[:, 0, :, 0]
    return Burgers1DField(u.mesh, p)
