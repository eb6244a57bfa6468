"""Shared oracles for the test suite.

The oracles here are deliberately independent of the library's own
integration paths: plain tensor Gauss quadrature on boxes, shoelace
areas of dense polygon samplings, and a bilinear-map quadrature for
straight-sided quadrilaterals.
"""

import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss


def tensor_gauss_box(f, xa, xb, ya, yb, n=12):
    """Tensor Gauss-Legendre integral of f over [xa, xb] x [ya, yb]."""
    g, w = leggauss(n)
    xm, xh = 0.5 * (xa + xb), 0.5 * (xb - xa)
    ym, yh = 0.5 * (ya + yb), 0.5 * (yb - ya)
    xx, yy = np.meshgrid(xm + xh * g, ym + yh * g, indexing="ij")
    return xh * yh * float(np.sum(np.outer(w, w) * f(xx, yy)))


def gauss_quad_over_quad(f, vertices, n=10):
    """Integral of f over a straight-sided quadrilateral (bilinear map)."""
    v = np.asarray(vertices, dtype=float)
    g, w = leggauss(n)
    a, b = np.meshgrid(0.5 * (g + 1.0), 0.5 * (g + 1.0), indexing="ij")
    ww = np.outer(w, w) * 0.25
    # bilinear map from the unit square
    p = (v[0][:, None, None] * (1 - a) * (1 - b)
         + v[1][:, None, None] * a * (1 - b)
         + v[2][:, None, None] * a * b
         + v[3][:, None, None] * (1 - a) * b)
    dpa = (-v[0][:, None, None] * (1 - b) + v[1][:, None, None] * (1 - b)
           + v[2][:, None, None] * b - v[3][:, None, None] * b)
    dpb = (-v[0][:, None, None] * (1 - a) - v[1][:, None, None] * a
           + v[2][:, None, None] * a + v[3][:, None, None] * (1 - a))
    jac = dpa[0] * dpb[1] - dpa[1] * dpb[0]
    return float(np.sum(ww * f(p[0], p[1]) * jac))


def shoelace(points):
    """Signed polygon area."""
    p = np.asarray(points, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
