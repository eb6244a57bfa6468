"""Commutator-free Runge-Kutta exponential integrators.

A tableau lists, for each stage r and for the final update, one or more
exponential rows; row l is a coefficient vector over the stage
generators, and the stage value is the product of the exponentials
applied in row order:

    Y_r = exp(dt * sum_k alpha_{r,J}^k C(Y_k)) ... exp(dt * sum_k alpha_{r,1}^k C(Y_k)) Y^n

Each exponential of a frozen linear generator is evaluated exactly by
the propagator: a matrix exponential in ODE mode, or one conservative
semi-Lagrangian transport step in PDE mode.  High temporal order comes
from the composition alone, with no commutator terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np

from .errors import UnknownTableau


@dataclass(frozen=True)
class RKEITableau:
    """Stage structure of a commutator-free exponential integrator.

    stage_rows[r] is the tuple of exponential rows of stage r+1 in
    application order (first row applied first); each row is a length-s
    coefficient vector over the stage generators.  final_rows are the
    rows of the final update.  Explicitness requires stage r's rows to
    reference only generators k < r.
    """

    name: str
    c: Tuple[float, ...]
    stage_rows: Tuple[Tuple[Tuple[float, ...], ...], ...]
    final_rows: Tuple[Tuple[float, ...], ...]

    @property
    def n_stages(self):
        return len(self.c)

    def a_matrix(self):
        """Collapsed Butcher matrix a_{ik} = sum_l alpha_{i,l}^k."""
        s = self.n_stages
        a = np.zeros((s, s))
        for r, rows in enumerate(self.stage_rows):
            for row in rows:
                a[r] += np.asarray(row)
        return a

    def b_vector(self):
        """Collapsed weights b_k = sum_l beta_l^k."""
        b = np.zeros(self.n_stages)
        for row in self.final_rows:
            b += np.asarray(row)
        return b

    @property
    def n_exponentials(self):
        return sum(len(rows) for rows in self.stage_rows) \
            + len(self.final_rows)

    def validate(self):
        s = self.n_stages
        if len(self.stage_rows) != s:
            raise ValueError(f"{self.name}: stage row count != {s}")
        for r, rows in enumerate(self.stage_rows):
            for row in rows:
                if len(row) != s:
                    raise ValueError(f"{self.name}: stage {r + 1} row "
                                     f"length != {s}")
                if any(row[k] != 0.0 for k in range(r, s)):
                    raise ValueError(f"{self.name}: stage {r + 1} uses "
                                     "a not-yet-available generator")
        if abs(sum(self.b_vector()) - 1.0) > 1e-14:
            raise ValueError(f"{self.name}: weights do not sum to 1")
        return self


def _builtins():
    sqrt2 = math.sqrt(2.0)
    sqrt3 = math.sqrt(3.0)
    g2l = (2.0 - sqrt2) / 2.0
    d2l = -2.0 * sqrt2 / 3.0
    g3 = (3.0 + sqrt3) / 6.0
    phi = 1.0 / (6.0 * (2.0 * g3 - 1.0))
    alpha = 0.5
    beta = 1.0 / 6.0
    sigma = (alpha + beta * (1.0 - 2.0 * g3) - 1.0 / 3.0) / (1.0 - 2.0 * g3)
    return {
        "CF1": RKEITableau(
            "CF1", (0.0,),
            ((),),
            ((1.0,),)),
        "CF2": RKEITableau(
            "CF2", (0.0, 0.5),
            ((), ((0.5, 0.0),)),
            ((0.0, 1.0),)),
        "CF2L": RKEITableau(
            "CF2L", (0.0, g2l, 1.0),
            ((), ((g2l, 0.0, 0.0),), ((d2l, 1.0 - d2l, 0.0),)),
            ((0.0, 1.0 - g2l, g2l),)),
        "CF3": RKEITableau(
            "CF3", (0.0, g3, 1.0 - g3),
            ((), ((g3, 0.0, 0.0),), ((g3 - 1.0, 2.0 * (1.0 - g3), 0.0),)),
            ((0.0, 0.5 - phi, 0.5 + phi),
             (0.0, phi, -phi))),
        "CF3G": RKEITableau(
            "CF3G", (0.0, 0.5, 1.0),
            ((), ((0.5, 0.0, 0.0),), ((-1.0, 2.0, 0.0),)),
            ((1.0 / 12.0, 1.0 / 3.0, -0.25),
             (1.0 / 12.0, 1.0 / 3.0, 5.0 / 12.0))),
        "CF3C09": RKEITableau(
            "CF3C09", (0.0, g3, 1.0 - g3),
            ((), ((g3, 0.0, 0.0),), ((g3 - 1.0, 2.0 * (1.0 - g3), 0.0),)),
            ((alpha, beta, sigma),
             (-alpha, 0.5 - beta, 0.5 - sigma))),
        "CF3C03": RKEITableau(
            "CF3C03", (0.0, 1.0 / 3.0, 2.0 / 3.0),
            ((), ((1.0 / 3.0, 0.0, 0.0),), ((0.0, 2.0 / 3.0, 0.0),)),
            ((1.0 / 3.0, 0.0, 0.0),
             (-1.0 / 12.0, 0.0, 0.75))),
    }


_BUILTINS = {name: tab.validate() for name, tab in _builtins().items()}

TABLEAU_NAMES = tuple(sorted(_BUILTINS))


def builtin_tableau(name):
    """Look up a builtin tableau by name (CF1, CF2, CF2L, CF3, CF3G,
    CF3C09, CF3C03)."""
    key = str(name).upper()
    if key not in _BUILTINS:
        raise UnknownTableau(
            f"unknown tableau {name!r}; available: {', '.join(TABLEAU_NAMES)}")
    return _BUILTINS[key]


def _combine_matrices(coeffs, generators):
    out = coeffs[0] * generators[0]
    for c, g in zip(coeffs[1:], generators[1:]):
        out = out + c * g
    return out


def rkei_step(state, dt, tableau, generator_builder, propagator,
              combine=_combine_matrices):
    """One step of the commutator-free exponential integrator.

    generator_builder maps a stage state to its frozen generator (a
    matrix, or a frozen velocity field in PDE mode); propagator(g, dt,
    state) applies exp(dt g); combine(coeffs, generators) forms the
    linear combination for one exponential (built once per
    exponential).  Stage 1 carries no exponentials, so its generator is
    built from the initial state.
    """
    generators = []
    for r in range(tableau.n_stages):
        y = state
        for row in tableau.stage_rows[r]:
            coeffs = row[:len(generators)]
            y = propagator(combine(coeffs, generators), dt, y)
        generators.append(generator_builder(y))
    y = state
    for row in tableau.final_rows:
        y = propagator(combine(row, generators), dt, y)
    return y


def matrix_exponential(a, tol=1e-16):
    """exp(a) by scaling and squaring with a truncated Taylor series.

    Verification-scale helper (matrices up to ~64x64); the Taylor
    series is summed to machine precision after scaling the norm
    below 1/2.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix_exponential expects a square matrix")
    norm = np.linalg.norm(a, np.inf)
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5))) if norm > 0.5
                    else 0)
    b = a / (2.0 ** squarings)
    n = a.shape[0]
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 40):
        term = term @ b / k
        result = result + term
        if np.linalg.norm(term, np.inf) < tol * max(1.0, np.linalg.norm(
                result, np.inf)):
            break
    for _ in range(squarings):
        result = result @ result
    return result


def ode_propagator(generator, dt, state):
    """Exact linear propagator for ODE verification: exp(dt C) @ state."""
    return matrix_exponential(dt * np.asarray(generator, dtype=float)) @ state
