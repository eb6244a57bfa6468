"""Conserved-quantity diagnostics for the transport scenarios.

The Vlasov-Poisson system conserves every L^p norm of f, the total
(kinetic + field) energy and the entropy; the guiding-center model
conserves mass, the field energy ||E||^2 and the enstrophy ||rho||^2.
Tracking their relative deviations measures solution quality.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from .mesh import basis_norms, quadrature_grid

ENTROPY_FLOOR = 1e-14


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One per-step snapshot; `entropy` holds the entropy (VP) or the
    enstrophy (guiding center)."""

    t: float
    mass: float
    l1: float
    l2: float
    energy: float
    entropy: float
    theta: float = 0.0
    cfl: float = 0.0
    dev_mass: float = 0.0
    dev_l1: float = 0.0
    dev_l2: float = 0.0
    dev_energy: float = 0.0
    dev_entropy: float = 0.0


def _l2_modal(field):
    """Exact L2 norm from the orthogonal modal expansion."""
    mesh = field.mesh
    norms = basis_norms(field.degree) * mesh.dx * mesh.dy
    return float(np.sqrt(np.sum(field.coeffs ** 2 * norms)))


def _field_values(field, n_quad):
    xq, yq, ix, iy, w = quadrature_grid(field.mesh, n_quad)
    return field.eval_cell(ix, iy, xq, yq), xq, yq, w


def vp_diagnostics(f, efield, t=0.0, theta=0.0, cfl=0.0):
    """Mass, L1, L2, kinetic + field energy, and entropy of a VP state.

    L2 and the v^2 moment are exact on the modal data (quadrature at
    degree+3 points is exact for these polynomial integrands); entropy
    clamps the integrand at f = 1e-14 with 0 log 0 := 0.
    """
    mesh = f.mesh
    vals, xq, yq, w = _field_values(f, f.degree + 3)
    mass = float(np.sum(f.coeffs[:, :, 0])) * mesh.dx * mesh.dy
    l1 = float(np.sum(w * np.abs(vals)))
    kinetic = float(np.sum(w * vals * yq * yq))

    gx, gwx = np.polynomial.legendre.leggauss(f.degree + 3)
    xs = (mesh.x_centers()[:, None] + 0.5 * gx[None, :] * mesh.dx)
    ev = efield.e_values(xs)
    e2 = float(np.sum(gwx[None, :] * ev * ev) * 0.5 * mesh.dx)

    clamped = np.maximum(vals, ENTROPY_FLOOR)
    ent_integrand = np.where(vals > 0.0, vals * np.log(clamped),
                             vals * np.log(ENTROPY_FLOOR))
    ent_integrand = np.where(vals == 0.0, 0.0, ent_integrand)
    entropy = float(np.sum(w * ent_integrand))
    return DiagnosticsRecord(t=t, mass=mass, l1=l1, l2=_l2_modal(f),
                             energy=kinetic + e2, entropy=entropy,
                             theta=theta, cfl=cfl)


def gc_diagnostics(rho, efield, t=0.0, theta=0.0, cfl=0.0):
    """Mass, L1, L2, field energy ||E||^2 and enstrophy ||rho||^2."""
    mesh = rho.mesh
    vals, xq, yq, w = _field_values(rho, rho.degree + 3)
    mass = float(np.sum(rho.coeffs[:, :, 0])) * mesh.dx * mesh.dy
    l1 = float(np.sum(w * np.abs(vals)))
    e1, e2 = efield.velocity(xq, yq)
    energy = float(np.sum(w * (e1 * e1 + e2 * e2)))
    l2 = _l2_modal(rho)
    return DiagnosticsRecord(t=t, mass=mass, l1=l1, l2=l2, energy=energy,
                             entropy=l2 * l2, theta=theta, cfl=cfl)


def generic_diagnostics(u, t=0.0, theta=0.0, cfl=0.0):
    """Mass and norms for Burgers / linear-advection states."""
    mesh = u.mesh
    vals, _, _, w = _field_values(u, u.degree + 3)
    l2 = _l2_modal(u)
    return DiagnosticsRecord(
        t=t, mass=float(np.sum(u.coeffs[:, :, 0])) * mesh.dx * mesh.dy,
        l1=float(np.sum(w * np.abs(vals))), l2=l2, energy=l2 * l2,
        entropy=0.0, theta=theta, cfl=cfl)


def relative_deviation(values, baseline=None):
    """(q(t) - q(0)) / |q(0)|; falls back to absolute deviation (with a
    flag) when the baseline vanishes."""
    values = np.asarray(values, dtype=float)
    q0 = values[0] if baseline is None else baseline
    if q0 == 0.0:
        return values - values[0], True
    return (values - q0) / abs(q0), False


def attach_deviations(records: List[DiagnosticsRecord]):
    """Fill the dev_* fields of a record series against its first entry."""
    if not records:
        return records
    base = records[0]
    out = []
    for r in records:
        def dev(v, v0):
            return (v - v0) / abs(v0) if v0 != 0.0 else v - v0
        out.append(replace(r,
                           dev_mass=dev(r.mass, base.mass),
                           dev_l1=dev(r.l1, base.l1),
                           dev_l2=dev(r.l2, base.l2),
                           dev_energy=dev(r.energy, base.energy),
                           dev_entropy=dev(r.entropy, base.entropy)))
    return out
