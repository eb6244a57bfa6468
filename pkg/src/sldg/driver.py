"""Time integration of the nonlinear transport scenarios.

One step freezes the velocity field at each stage solution and composes
conservative semi-Lagrangian transport solves according to the chosen
exponential-integrator tableau.  The step size comes from

    dt = CFL / (a/dx + b/dy)

with a, b the maximum transport speeds per direction; the adaptive
controller watches the relative deviation of upstream-cell areas and
rescales the CFL number, restarting the step when the deviation leaves
the prescribed band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field, replace
from typing import Callable, List, Optional

import numpy as np

from .diagnostics import (DiagnosticsRecord, attach_deviations,
                          gc_diagnostics, generic_diagnostics,
                          vp_diagnostics)
from .errors import DegenerateCell, ZeroSpeed
from .fields import (AnalyticField, burgers_field, charge_density,
                     combine_frozen, electric_field_1d, electric_field_2d)
from .mesh import DGField, Mesh2D, error_norm, project_l2
from .rkei import builtin_tableau, rkei_step
from .sldg_step import (area_deviation, pp_limiter, sldg_linear_step,
                        trace_upstream)

SCENARIOS = ("vp", "guiding_center", "burgers", "advection")

RESTART_LOWER = "restart_lower"
RESTART_HIGHER = "restart_higher"
CONTINUE = "continue"

_MAX_RESTARTS = 3


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce one simulation."""

    scenario: str
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int
    degree: int = 1
    mode: str = "quad"              # "quad" | "quad_curved"
    tableau: str = "CF3C03"
    cfl: float = 1.0
    t_final: float = 1.0
    limiter: Optional[bool] = None  # default: on for VP, off otherwise
    adaptive: bool = False
    cfl_min: float = 1.0
    cfl_max: float = 1.0
    delta_max: float = 0.01
    delta_min: float = 0.0005
    alpha: float = 0.5              # perturbation amplitude
    wavenumber: float = 0.5
    ic: Optional[str] = None        # scenario-specific named initial state
    advect_a: float = 1.0
    advect_b: float = 0.0
    n_edge_gauss: int = 3
    trace_substeps: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.mode == "quad_curved" and self.degree < 2:
            raise ValueError("quad_curved upstream cells require degree 2")
        if self.adaptive and not (self.cfl_min <= self.cfl <= self.cfl_max):
            raise ValueError("adaptive runs need cfl_min <= cfl <= cfl_max")
        if self.t_final <= 0.0:
            raise ValueError("t_final must be positive")
        if self.ic is None:
            self.ic = {"vp": "landau", "guiding_center": "stationary_vortex",
                       "burgers": "smooth_sine",
                       "advection": "sine_diagonal"}[self.scenario]

    @property
    def mesh(self):
        return Mesh2D(self.x_min, self.x_max, self.y_min, self.y_max,
                      self.nx, self.ny)

    @property
    def limiter_on(self):
        if self.limiter is None:
            return self.scenario == "vp"
        return self.limiter


def landau_config(nx=64, ny=64, alpha=0.5, wavenumber=0.5, **kw):
    """Perturbed-Maxwellian configuration on [0, 2 pi / k] x [-2 pi, 2 pi]."""
    lx = 2.0 * math.pi / wavenumber
    defaults = dict(scenario="vp", x_min=0.0, x_max=lx,
                    y_min=-2.0 * math.pi, y_max=2.0 * math.pi,
                    nx=nx, ny=ny, alpha=alpha, wavenumber=wavenumber)
    defaults.update(kw)
    return ScenarioConfig(**defaults)


def initial_condition(config):
    """Project the scenario's initial state onto the DG space."""
    mesh = config.mesh
    k0 = config.wavenumber
    a = config.alpha
    if config.scenario == "vp":
        if config.ic != "landau":
            raise ValueError(f"unknown VP initial state {config.ic!r}")
        def f0(x, v):
            return (1.0 + a * np.cos(k0 * x)) * np.exp(-0.5 * v * v) \
                / math.sqrt(2.0 * math.pi)
        return project_l2(f0, mesh, config.degree)
    if config.scenario == "guiding_center":
        if config.ic == "stationary_vortex":
            return project_l2(lambda x, y: -2.0 * np.sin(x) * np.sin(y),
                              mesh, config.degree)
        if config.ic == "kelvin_helmholtz":
            return project_l2(lambda x, y: np.sin(y) + a * np.cos(k0 * x),
                              mesh, config.degree)
        raise ValueError(f"unknown guiding-center initial state {config.ic!r}")
    if config.scenario == "burgers":
        if config.ic == "smooth_sine":
            return project_l2(lambda x, y: 0.5 + np.sin(np.pi * x),
                              mesh, config.degree)
        if config.ic == "riemann":
            return project_l2(lambda x, y: np.where(x < 0.0, 1.0, 0.0),
                              mesh, config.degree,
                              n_quad=config.degree + 3)
        raise ValueError(f"unknown Burgers initial state {config.ic!r}")
    # linear advection
    if config.ic == "sine_diagonal":
        return project_l2(lambda x, y: np.sin(x + y), mesh, config.degree)
    raise ValueError(f"unknown advection initial state {config.ic!r}")


def build_generator(config, u):
    """Frozen velocity field of the scenario at the state u."""
    if config.scenario == "vp":
        return electric_field_1d(charge_density(u))
    if config.scenario == "guiding_center":
        return electric_field_2d(u)
    if config.scenario == "burgers":
        return burgers_field(u)
    ax, bx = config.advect_a, config.advect_b
    return AnalyticField(lambda x, y: np.full_like(x, ax),
                         lambda x, y: np.full_like(y, bx),
                         mesh=config.mesh, speed_bounds=(abs(ax), abs(bx)))


def max_speeds(config, u, generator):
    """Per-direction speed bounds (a, b) feeding the CFL step size.

    Burgers follows the conservation-law convention a = max |f'(u)|
    = max |u| rather than the advective coefficient u/2.
    """
    if config.scenario == "burgers":
        return 2.0 * generator.max_speeds()[0], 0.0
    return generator.max_speeds()


def compute_dt(cfl, a, b, dx, dy):
    """dt = CFL / (a/dx + b/dy); raises ZeroSpeed when a = b = 0."""
    if a < 0.0 or b < 0.0:
        raise ValueError("speeds must be non-negative")
    denom = a / dx + b / dy
    if denom == 0.0:
        raise ZeroSpeed("both transport speeds vanish")
    return cfl / denom


def adaptive_controller(theta, cfl, delta_max=0.01, delta_min=0.0005,
                        cfl_min=1.0, cfl_max=1.0):
    """Area-deviation CFL controller.

    theta > delta_max lowers the CFL by 1 (floored at cfl_min), theta <
    delta_min raises it by 1 (capped at cfl_max); both restart the
    step.  At the floor or cap the decision degenerates to continue.
    """
    if not delta_min < delta_max:
        raise ValueError("delta_min must be below delta_max")
    if theta > delta_max:
        new = max(cfl - 1.0, cfl_min)
        return (RESTART_LOWER, new) if new < cfl else (CONTINUE, cfl)
    if theta < delta_min:
        new = min(cfl + 1.0, cfl_max)
        return (RESTART_HIGHER, new) if new > cfl else (CONTINUE, cfl)
    return CONTINUE, cfl


@dataclass
class StepOutcome:
    state: DGField
    theta: float
    accepted: bool
    cfl: float
    dt: float
    restarts: int = 0
    rejected_cfls: tuple = ()


class _StepRestart(Exception):
    def __init__(self, new_cfl):
        self.new_cfl = new_cfl


def _algorithm2_step(state, config, tableau, dt, gen0, on_first_theta):
    """One tableau step: stage loop of frozen-field transport solves."""
    mode = config.mode
    counter = {"n": 0}

    def generator_builder(u):
        if u is state and gen0 is not None:
            return gen0
        return build_generator(config, u)

    def propagator(fld, dt_, u):
        trace = trace_upstream(u.mesh, fld, dt_, u.degree,
                               substeps=config.trace_substeps)
        if counter["n"] == 0:
            theta = area_deviation(trace, mode)
            counter["theta"] = theta
            if on_first_theta is not None:
                on_first_theta(theta)
        counter["n"] += 1
        return sldg_linear_step(u, fld, dt_, mode=mode,
                                n_edge_gauss=config.n_edge_gauss,
                                trace=trace)

    new_state = rkei_step(state, dt, tableau, generator_builder, propagator,
                          combine=combine_frozen)
    return new_state, counter.get("theta", 0.0), counter["n"]


def advance_step(state, config, t_remaining=math.inf, cfl=None, gen0=None,
                 tableau=None):
    """Advance one time step, honoring the adaptive CFL controller.

    The area-deviation indicator is measured on the first exponential
    of the step (the cheapest early-exit point); a restart decision
    rebuilds the whole step at the new CFL.  Consecutive restarts are
    capped at 3 to guarantee progress.  In adaptive mode a degenerate
    upstream cell is treated like an over-deformed step and retried at
    a lower CFL.
    """
    if tableau is None:
        tableau = builtin_tableau(config.tableau)
    if cfl is None:
        cfl = config.cfl
    mesh = config.mesh
    restarts = 0
    rejected = []
    if gen0 is None:
        gen0 = build_generator(config, state)

    while True:
        a, b = max_speeds(config, state, gen0)
        try:
            dt = compute_dt(cfl, a, b, mesh.dx, mesh.dy)
        except ZeroSpeed:
            if math.isinf(t_remaining):
                raise
            dt = t_remaining
        dt = min(dt, t_remaining)

        def on_theta(theta, _cfl=cfl, _restarts=restarts):
            if not config.adaptive or _restarts >= _MAX_RESTARTS:
                return
            decision, new_cfl = adaptive_controller(
                theta, _cfl, config.delta_max, config.delta_min,
                config.cfl_min, config.cfl_max)
            if decision != CONTINUE and new_cfl != _cfl:
                raise _StepRestart(new_cfl)

        try:
            new_state, theta, _ = _algorithm2_step(state, config, tableau,
                                                   dt, gen0, on_theta)
        except _StepRestart as r:
            rejected.append(cfl)
            cfl = r.new_cfl
            restarts += 1
            continue
        except DegenerateCell:
            if config.adaptive and cfl > config.cfl_min \
                    and restarts < _MAX_RESTARTS:
                rejected.append(cfl)
                cfl = max(cfl - 1.0, config.cfl_min)
                restarts += 1
                continue
            raise
        break

    if config.limiter_on:
        new_state = pp_limiter(new_state)
    return StepOutcome(state=new_state, theta=theta, accepted=True, cfl=cfl,
                       dt=dt, restarts=restarts,
                       rejected_cfls=tuple(rejected))


def make_record(config, u, gen, t, theta, cfl):
    if config.scenario == "vp":
        return vp_diagnostics(u, gen, t=t, theta=theta, cfl=cfl)
    if config.scenario == "guiding_center":
        return gc_diagnostics(u, gen, t=t, theta=theta, cfl=cfl)
    return generic_diagnostics(u, t=t, theta=theta, cfl=cfl)


@dataclass
class RunResult:
    config: ScenarioConfig
    records: List[DiagnosticsRecord]
    final: DGField
    n_steps: int


def run(config, state=None, t0=0.0, t_final=None, step_callback=None):
    """Integrate the scenario to t_final, emitting diagnostics per step.

    Deterministic: identical configs produce bit-identical series.  An
    optional step_callback(t, state, outcome) observes every accepted
    step (positivity checks, dumps).
    """
    tableau = builtin_tableau(config.tableau)
    if t_final is None:
        t_final = config.t_final
    if state is None:
        state = initial_condition(config)
        if config.limiter_on:
            # projection undershoots of non-negative data are clipped
            # before stepping, so downstream averages stay non-negative
            state = pp_limiter(state)
    gen = build_generator(config, state)
    cfl = config.cfl
    t = t0
    records = [make_record(config, state, gen, t, 0.0, cfl)]
    n_steps = 0
    horizon = t_final - 1e-12 * max(1.0, abs(t_final))
    while t < horizon:
        outcome = advance_step(state, config, t_remaining=t_final - t,
                               cfl=cfl, gen0=gen, tableau=tableau)
        state = outcome.state
        t += outcome.dt
        cfl = outcome.cfl
        gen = build_generator(config, state)
        records.append(make_record(config, state, gen, t, outcome.theta,
                                   outcome.cfl))
        n_steps += 1
        if step_callback is not None:
            step_callback(t, state, outcome)
    return RunResult(config=config, records=attach_deviations(records),
                     final=state, n_steps=n_steps)


def v_reflect(field):
    """Mirror a phase-space distribution in v (cells flip, odd-in-v
    basis coefficients change sign); an involution."""
    coeffs = field.coeffs[:, ::-1, :].copy()
    from .mesh import basis_index_pairs
    for m, (i, j) in enumerate(basis_index_pairs(field.degree)):
        if j % 2 == 1:
            coeffs[:, :, m] *= -1.0
    return DGField(field.mesh, field.degree, coeffs)


def reversibility_harness(config, t_half=None):
    """Forward to T, reflect v, forward to 2T; compare with the
    v-reflected initial state.  Returns the error norms and the states.
    """
    if config.scenario != "vp":
        raise ValueError("reversibility harness applies to the VP scenario")
    if t_half is None:
        t_half = config.t_final
    u0 = initial_condition(config)
    if config.limiter_on:
        u0 = pp_limiter(u0)
    if t_half == 0.0:
        ref = v_reflect(u0)
        return {"l1": 0.0, "l2": 0.0, "linf": 0.0, "final": v_reflect(u0),
                "reference": ref, "records": []}
    fwd = run(config, state=u0, t_final=t_half)
    turned = v_reflect(fwd.final)
    back = run(config, state=turned, t_final=t_half)
    reference = v_reflect(u0)
    return {
        "l1": error_norm(back.final, reference, 1),
        "l2": error_norm(back.final, reference, 2),
        "linf": error_norm(back.final, reference, np.inf),
        "final": back.final,
        "reference": reference,
        "records": fwd.records + back.records,
    }


def observed_orders(errors, factors):
    """log-ratio convergence orders for successive refinement factors."""
    orders = []
    for i in range(len(errors) - 1):
        if errors[i + 1] == 0.0 or errors[i] == 0.0:
            orders.append(float("nan"))
        else:
            orders.append(math.log(errors[i] / errors[i + 1])
                          / math.log(factors[i + 1] / factors[i]))
    return orders


def burgers_exact(ic, x, t, newton_iters=50):
    """Pre-shock Burgers solution u = ic(x - u t) by Newton iteration.

    ic must be smooth and provide ic_prime via numerical differences.
    """
    x = np.asarray(x, dtype=float)
    u = ic(x)
    h = 1e-7
    for _ in range(newton_iters):
        x0 = x - u * t
        g = u - ic(x0)
        gp = 1.0 + t * (ic(x0 + h) - ic(x0 - h)) / (2.0 * h)
        du = g / gp
        u = u - du
        if np.max(np.abs(du)) < 1e-14:
            break
    return u


def refinement_study(base_config, meshes=None, cfls=None, reference="auto",
                     reference_cfl=0.1, norm=1):
    """Error table over a mesh or CFL refinement sequence.

    Mesh mode: runs the scenario per resolution and measures the error
    against the scenario's natural reference (exact translate for
    advection, the initial state for the stationary vortex, the
    characteristic solution for smooth Burgers, the v-reflected initial
    state for VP reversibility).  CFL mode: fixed mesh, errors of each
    CFL against a small-CFL run of the same scheme.  Returns a list of
    dict rows including observed orders.
    """
    rows = []
    if meshes is not None:
        errors = []
        for n in meshes:
            cfg = replace(base_config, nx=n,
                          ny=n if base_config.ny > 1 else 1)
            err = _reference_error(cfg, reference, norm)
            errors.append(err)
            rows.append({"n": n, "error": err})
        orders = observed_orders(errors, [float(m) for m in meshes])
        for i, o in enumerate(orders):
            rows[i + 1]["order"] = o
        return rows
    if cfls is None:
        raise ValueError("provide either meshes or cfls")
    ref_cfg = replace(base_config, cfl=reference_cfl)
    ref = run(ref_cfg).final
    errors = []
    for c in cfls:
        cfg = replace(base_config, cfl=float(c))
        res = run(cfg)
        err = error_norm(res.final, ref, norm)
        errors.append(err)
        rows.append({"cfl": float(c), "error": err})
    orders = observed_orders(errors, [1.0 / c for c in cfls])
    for i, o in enumerate(orders):
        rows[i + 1]["order"] = o
    return rows


def _reference_error(config, reference, norm):
    if reference == "auto":
        reference = {"advection": "exact", "guiding_center": "initial",
                     "burgers": "exact", "vp": "reversibility"}[
                         config.scenario]
    if reference == "reversibility":
        out = reversibility_harness(config)
        return {1: out["l1"], 2: out["l2"], np.inf: out["linf"]}[norm]
    res = run(config)
    if reference == "initial":
        return error_norm(res.final, initial_condition(config), norm)
    if reference == "exact":
        if config.scenario == "advection":
            t = config.t_final
            ax, bx = config.advect_a, config.advect_b
            if config.ic != "sine_diagonal":
                raise ValueError("exact advection reference needs the "
                                 "sine initial state")
            return error_norm(
                res.final,
                lambda x, y: np.sin((x - ax * t) + (y - bx * t)),
                norm)
        if config.scenario == "burgers":
            if config.ic != "smooth_sine":
                raise ValueError("exact Burgers reference needs smooth data")
            ic = lambda x: 0.5 + np.sin(np.pi * x)
            return error_norm(
                res.final,
                lambda x, y: burgers_exact(ic, x, config.t_final),
                norm)
    raise ValueError(f"unknown reference {reference!r}")
