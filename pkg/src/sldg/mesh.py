"""Cartesian tensor-product mesh and the modal DG space.

The DG space uses scaled Legendre monomials per rectangular element
A_j = [x^l, x^r] x [y^b, y^t], written in the local coordinates
xi = (x - x_j)/dx, eta = (y - y_j)/dy with xi, eta in [-1/2, 1/2]:

    degree 1: {1, xi, eta}
    degree 2: {1, xi, eta, xi^2 - 1/12, xi*eta, eta^2 - 1/12}

The family is L2-orthogonal on the element, so the mass matrix is
diagonal and the first coefficient of every element is its cell average.
Degree 3 members (used for velocity fields of degree k+1) extend the
family with {xi^3 - (3/20) xi, (xi^2 - 1/12) eta, xi (eta^2 - 1/12),
eta^3 - (3/20) eta}.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import MeshMismatch

# Index snapping: coordinates within ~1e-10 of a grid line (relative to the
# cell size) are treated as lying on it, with half-open ownership (points on
# a line belong to the cell on its right/upper side).
IDX_SNAP = 1e-10

# 1D orthogonal family on [-1/2, 1/2]: polynomial coefficients (monomial,
# ascending) and squared L2 norms h_i = int l_i(s)^2 ds.
_POLY_1D = (
    np.array([1.0]),
    np.array([0.0, 1.0]),
    np.array([-1.0 / 12.0, 0.0, 1.0]),
    np.array([0.0, -3.0 / 20.0, 0.0, 1.0]),
)
_NORM_1D = (1.0, 1.0 / 12.0, 1.0 / 180.0, 1.0 / 2800.0)


def basis_index_pairs(degree):
    """(i, j) exponent pairs of the total-degree basis, graded order."""
    pairs = []
    for d in range(degree + 1):
        for i in range(d, -1, -1):
            pairs.append((i, d - i))
    return pairs


def n_basis(degree):
    return (degree + 1) * (degree + 2) // 2


def basis_norms(degree):
    """Squared L2 norms of the basis over the reference cell (area 1)."""
    return np.array([_NORM_1D[i] * _NORM_1D[j] for i, j in basis_index_pairs(degree)])


def _eval_1d(i, s):
    c = _POLY_1D[i]
    out = np.zeros_like(s) + c[-1]
    for a in c[-2::-1]:
        out = out * s + a
    return out


def basis_values(degree, xi, eta):
    """Basis values at local coordinates; output shape xi.shape + (nb,)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    pairs = basis_index_pairs(degree)
    out = np.empty(xi.shape + (len(pairs),))
    for m, (i, j) in enumerate(pairs):
        out[..., m] = _eval_1d(i, xi) * _eval_1d(j, eta)
    return out


def gauss_rule(n):
    """n-point Gauss-Legendre nodes/weights on [-1/2, 1/2] (weights sum 1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * x, 0.5 * w


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Legendre rule on the reference cell [-1/2, 1/2]^2."""

    npx: int
    npy: int
    xi: np.ndarray = dataclass_field(init=False, repr=False)
    eta: np.ndarray = dataclass_field(init=False, repr=False)
    weights: np.ndarray = dataclass_field(init=False, repr=False)

    def __post_init__(self):
        gx, wx = gauss_rule(self.npx)
        gy, wy = gauss_rule(self.npy)
        xi, eta = np.meshgrid(gx, gy, indexing="ij")
        w = np.outer(wx, wy)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class Mesh2D:
    """Uniform periodic rectangular mesh with nx x ny elements."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int
    periodic_x: bool = True
    periodic_y: bool = True

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("domain bounds must be increasing")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("element counts must be positive")

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self):
        return (self.y_max - self.y_min) / self.ny

    @property
    def lx(self):
        return self.x_max - self.x_min

    @property
    def ly(self):
        return self.y_max - self.y_min

    @property
    def area(self):
        return self.lx * self.ly

    def x_centers(self):
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    def y_centers(self):
        return self.y_min + (np.arange(self.ny) + 0.5) * self.dy

    def fold(self, x, y):
        """Wrap coordinates into the periodic fundamental domain."""
        xf = self.x_min + np.mod(x - self.x_min, self.lx)
        yf = self.y_min + np.mod(y - self.y_min, self.ly)
        return xf, yf

    def cell_of(self, x, y):
        """Half-open cell indices of (possibly unwrapped) coordinates."""
        gx = (np.asarray(x) - self.x_min) / self.dx
        gy = (np.asarray(y) - self.y_min) / self.dy
        ix = np.floor(gx + IDX_SNAP).astype(np.int64)
        iy = np.floor(gy + IDX_SNAP).astype(np.int64)
        return np.mod(ix, self.nx), np.mod(iy, self.ny)

    def compatible(self, other):
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and np.isclose(self.x_min, other.x_min)
            and np.isclose(self.x_max, other.x_max)
            and np.isclose(self.y_min, other.y_min)
            and np.isclose(self.y_max, other.y_max)
        )


class DGField:
    """Piecewise-polynomial field: modal coefficients per element.

    coeffs has shape (nx, ny, n_basis); coeffs[..., 0] is the cell
    average. Instances are treated as immutable once built.
    """

    def __init__(self, mesh, degree, coeffs=None):
        self.mesh = mesh
        self.degree = int(degree)
        nb = n_basis(self.degree)
        if coeffs is None:
            coeffs = np.zeros((mesh.nx, mesh.ny, nb))
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (mesh.nx, mesh.ny, nb):
            raise ValueError(
                f"coefficient array must have shape {(mesh.nx, mesh.ny, nb)}, "
                f"got {coeffs.shape}"
            )
        self.coeffs = coeffs

    @property
    def n_basis(self):
        return self.coeffs.shape[-1]

    def copy(self):
        return DGField(self.mesh, self.degree, self.coeffs.copy())

    def cell_averages(self):
        return self.coeffs[:, :, 0]

    def eval_cell(self, ix, iy, x, y):
        """Evaluate the polynomial of cells (ix, iy) at global points."""
        mesh = self.mesh
        xc = mesh.x_min + (np.asarray(ix) + 0.5) * mesh.dx
        yc = mesh.y_min + (np.asarray(iy) + 0.5) * mesh.dy
        xi = (np.asarray(x) - xc) / mesh.dx
        eta = (np.asarray(y) - yc) / mesh.dy
        psi = basis_values(self.degree, xi, eta)
        c = self.coeffs[np.mod(ix, mesh.nx), np.mod(iy, mesh.ny)]
        return np.sum(c * psi, axis=-1)

    def evaluate(self, x, y, average=True):
        """Point values; on element interfaces return the two-sided mean.

        With average=False, points on an interface use the half-open
        owner (the cell on the right/upper side of the line).
        """
        mesh = self.mesh
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gx = (x - mesh.x_min) / mesh.dx
        gy = (y - mesh.y_min) / mesh.dy
        ix = np.floor(gx + IDX_SNAP).astype(np.int64)
        iy = np.floor(gy + IDX_SNAP).astype(np.int64)
        if not average:
            return self.eval_cell(ix, iy, x, y)
        on_x = np.abs(gx - np.round(gx)) < 10 * IDX_SNAP
        on_y = np.abs(gy - np.round(gy)) < 10 * IDX_SNAP
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
                total = total + w * self.eval_cell(ix + sx, iy + sy, x, y)
        return total

    def monomial_coefficients(self):
        """Per-cell coefficients of (x - x_j)^i (y - y_j)^j monomials.

        Returns an (nx, ny, d+1, d+1) array with entries beyond total
        degree d equal to zero; used by the integration kernels.
        """
        return modal_to_monomial(self.coeffs, self.degree,
                                 self.mesh.dx, self.mesh.dy)


def modal_to_monomial(coeffs, degree, dx, dy):
    """Modal coefficients -> monomials in the unscaled local offsets.

    coeffs has shape (..., n_basis); the result has shape
    (..., degree+1, degree+1) with entry (a, b) multiplying
    (x - x_j)^a (y - y_j)^b.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    lead = coeffs.shape[:-1]
    out = np.zeros(lead + (degree + 1, degree + 1))
    for m, (i, j) in enumerate(basis_index_pairs(degree)):
        c = coeffs[..., m]
        pi, pj = _POLY_1D[i], _POLY_1D[j]
        for a in range(len(pi)):
            if pi[a] == 0.0:
                continue
            for b in range(len(pj)):
                if pj[b] == 0.0:
                    continue
                out[..., a, b] += c * pi[a] * pj[b]
    sx = dx ** np.arange(degree + 1)
    sy = dy ** np.arange(degree + 1)
    out /= sx[:, None] * sy[None, :]
    return out


def project_l2(f, mesh, degree, n_quad=None):
    """L2 projection of a pointwise function onto the modal DG space.

    Uses an (n_quad)^2 tensor Gauss rule per element; the default
    degree+2 points integrate the products exactly for polynomial f of
    total degree <= degree, making the projection exact there.
    """
    if n_quad is None:
        n_quad = degree + 2
    rule = QuadratureRule(n_quad, n_quad)
    xq = mesh.x_centers()[:, None, None, None] + rule.xi[None, None] * mesh.dx
    yq = mesh.y_centers()[None, :, None, None] + rule.eta[None, None] * mesh.dy
    xq, yq = np.broadcast_arrays(xq, yq)
    fv = np.asarray(f(xq, yq), dtype=float)
    psi = basis_values(degree, rule.xi, rule.eta)  # (q, q, nb)
    wpsi = rule.weights[..., None] * psi
    coeffs = np.einsum("xyab,abm->xym", fv, wpsi) / basis_norms(degree)
    return DGField(mesh, degree, coeffs)


def project_field(field, degree=None):
    """Re-project a DGField onto (possibly different) degree; exact when
    the target degree is >= the source degree."""
    if degree is None:
        degree = field.degree
    return project_l2(lambda x, y: field.evaluate(x, y, average=False),
                      field.mesh, degree, n_quad=max(field.degree, degree) + 2)


def total_mass(field):
    """Integral of the field over the domain (exact, from cell averages)."""
    mesh = field.mesh
    return float(np.sum(field.coeffs[:, :, 0])) * mesh.dx * mesh.dy


def quadrature_grid(mesh, n_quad):
    """Tensor Gauss points for every element.

    Returns (xq, yq, ix, iy, w): coordinate arrays of shape
    (nx, ny, n, n), matching cell indices, and physical weights.
    """
    rule = QuadratureRule(n_quad, n_quad)
    xq = mesh.x_centers()[:, None, None, None] + rule.xi[None, None] * mesh.dx
    yq = mesh.y_centers()[None, :, None, None] + rule.eta[None, None] * mesh.dy
    xq, yq = np.broadcast_arrays(xq, yq)
    ix = np.broadcast_to(np.arange(mesh.nx)[:, None, None, None], xq.shape)
    iy = np.broadcast_to(np.arange(mesh.ny)[None, :, None, None], xq.shape)
    w = rule.weights[None, None] * (mesh.dx * mesh.dy)
    return xq, yq, ix, iy, w


def error_norm(field, reference, p=1, n_quad=None):
    """L1 / L2 / Linf norm of (field - reference) by tensor quadrature.

    reference may be a callable f(x, y) or a DGField on the same mesh.
    Linf is the max over all quadrature nodes.
    """
    mesh = field.mesh
    if n_quad is None:
        n_quad = field.degree + 3
    if isinstance(reference, DGField):
        if not mesh.compatible(reference.mesh):
            raise MeshMismatch("error_norm requires fields on the same mesh")
        ref_cellwise = reference
    else:
        ref_cellwise = None

    rule = QuadratureRule(n_quad, n_quad)
    xc = mesh.x_centers()[:, None, None, None]
    yc = mesh.y_centers()[None, :, None, None]
    xq = xc + rule.xi[None, None] * mesh.dx
    yq = yc + rule.eta[None, None] * mesh.dy
    xq, yq = np.broadcast_arrays(xq, yq)

    ix = np.broadcast_to(np.arange(mesh.nx)[:, None, None, None], xq.shape)
    iy = np.broadcast_to(np.arange(mesh.ny)[None, :, None, None], xq.shape)
    fv = field.eval_cell(ix, iy, xq, yq)
    if ref_cellwise is not None:
        rv = ref_cellwise.eval_cell(ix, iy, xq, yq)
    else:
        rv = np.asarray(reference(xq, yq), dtype=float)
    diff = fv - rv

    if p == np.inf or p == "inf":
        return float(np.max(np.abs(diff)))
    w = rule.weights[None, None] * (mesh.dx * mesh.dy)
    if p == 1:
        return float(np.sum(w * np.abs(diff)))
    if p == 2:
        return float(np.sqrt(np.sum(w * diff * diff)))
    raise ValueError("p must be 1, 2 or inf")


_DUMP_MAGIC = "# sldg-field v1"


def dump_field(field, path):
    """Write a plain-text dump: header plus one coefficient line per element.

    Elements appear in row-major order (ix outer loop, iy inner);
    numbers use repr-exact %.17g formatting, so identical inputs give
    byte-identical files.
    """
    mesh = field.mesh
    lines = [_DUMP_MAGIC]
    lines.append("%.17g %.17g %.17g %.17g" % (mesh.x_min, mesh.x_max,
                                              mesh.y_min, mesh.y_max))
    lines.append("%d %d %d" % (mesh.nx, mesh.ny, field.degree))
    flat = field.coeffs.reshape(mesh.nx * mesh.ny, -1)
    for row in flat:
        lines.append(" ".join("%.17g" % v for v in row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _DUMP_MAGIC:
        raise ValueError(f"{path}: not a field dump")
    x_min, x_max, y_min, y_max = map(float, lines[1].split())
    nx, ny, degree = map(int, lines[2].split())
    mesh = Mesh2D(x_min, x_max, y_min, y_max, nx, ny)
    nb = n_basis(degree)
    data = np.array([[float(v) for v in line.split()] for line in lines[3:3 + nx * ny]])
    if data.shape != (nx * ny, nb):
        raise ValueError(f"{path}: expected {nx * ny} x {nb} coefficients")
    return DGField(mesh, degree, data.reshape(nx, ny, nb))
