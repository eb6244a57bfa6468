"""Run configuration files and output artifacts.

Configurations are INI files with four sections ([scenario], [mesh],
[time], [output]); '#' starts a comment.  Unknown sections or keys are
rejected with their location, so typos fail fast.  Every artifact is
plain text: a diagnostics time-series CSV, solution dumps, and
convergence tables.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field as dataclass_field
from typing import List, Optional

from .driver import SCENARIOS, ScenarioConfig
from .errors import ParseError, ValidationError
from .rkei import TABLEAU_NAMES

TIMESERIES_HEADER = ("t,mass,L1,L2,energy,entropy_or_enstrophy,theta,cfl,"
                     "dev_mass,dev_L1,dev_L2,dev_energy,dev_entropy")

_DOMAIN_DEFAULTS = {
    ("vp", "landau"): None,  # derived from the wavenumber
    ("guiding_center", "stationary_vortex"):
        (0.0, 2.0 * math.pi, 0.0, 2.0 * math.pi),
    ("guiding_center", "kelvin_helmholtz"):
        (0.0, 4.0 * math.pi, 0.0, 2.0 * math.pi),
    ("burgers", "smooth_sine"): (0.0, 2.0, 0.0, 1.0),
    ("burgers", "riemann"): (-1.0, 1.0, 0.0, 1.0),
    ("advection", "sine_diagonal"): (0.0, 2.0 * math.pi, 0.0, 2.0 * math.pi),
}

_IC_DEFAULTS = {"vp": "landau", "guiding_center": "stationary_vortex",
                "burgers": "smooth_sine", "advection": "sine_diagonal"}

_ALPHA_DEFAULTS = {("guiding_center", "kelvin_helmholtz"): 0.015,
                   ("vp", "landau"): 0.5}

_KEYS = {
    "scenario": {"name", "degree", "mode", "tableau", "limiter", "alpha",
                 "wavenumber", "ic", "advect_a", "advect_b"},
    "mesh": {"nx", "ny", "x_min", "x_max", "y_min", "y_max", "mesh_list"},
    "time": {"cfl", "t_final", "adaptive", "cfl_min", "cfl_max",
             "delta_max", "delta_min", "cfl_list", "reference_cfl",
             "n_edge_gauss", "trace_substeps"},
    "output": {"outdir", "dump_every", "seed"},
}


@dataclass
class RunManifest:
    """Validated configuration plus output policy."""

    config: ScenarioConfig
    outdir: str = "out"
    dump_every: int = 0           # 0: dump the final state only
    seed: int = 0                 # reserved; the solver is deterministic
    mesh_list: Optional[List[int]] = None
    cfl_list: Optional[List[float]] = None
    reference_cfl: float = 0.1


def _get(parser, section, key, conv, default=None, required=False):
    if not parser.has_option(section, key):
        if required:
            raise ValidationError(f"missing required key [{section}] {key}",
                                  key=f"{section}.{key}")
        return default
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ValidationError(
            f"invalid value for [{section}] {key}: {raw!r} ({exc})",
            key=f"{section}.{key}") from None


def _boolean(raw):
    val = raw.strip().lower()
    if val in ("true", "yes", "on", "1"):
        return True
    if val in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _int_list(raw):
    return [int(v) for v in raw.replace(",", " ").split()]


def _float_list(raw):
    return [float(v) for v in raw.replace(",", " ").split()]


def parse_config(text, overrides=None):
    """Parse and validate an INI configuration into a RunManifest.

    overrides is an optional list of "section.key=value" strings applied
    after parsing (the CLI  --override flag).  Every malformed input
    raises ParseError (syntax, with line number) or ValidationError
    (semantic, naming the key).
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",),
                                       interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise ParseError(f"configuration syntax error: {exc}",
                         line=line) from None

    for ov in overrides or ():
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ValidationError(
                f"override {ov!r} must look like section.key=value")
        target, value = ov.split("=", 1)
        section, key = target.split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section.strip(), key.strip(), value.strip())

    for section in parser.sections():
        if section not in _KEYS:
            raise ValidationError(f"unknown section [{section}]",
                                  key=section)
        for key in parser.options(section):
            if key not in _KEYS[section]:
                raise ValidationError(
                    f"unknown key {key!r} in section [{section}]",
                    key=f"{section}.{key}")

    scenario = _get(parser, "scenario", "name", str, required=True)
    if scenario not in SCENARIOS:
        raise ValidationError(f"unknown scenario {scenario!r}",
                              key="scenario.name")
    ic = _get(parser, "scenario", "ic", str, _IC_DEFAULTS[scenario])
    tableau = _get(parser, "scenario", "tableau", str, "CF3C03")
    if tableau.upper() not in TABLEAU_NAMES:
        raise ValidationError(f"unknown tableau {tableau!r}",
                              key="scenario.tableau")
    degree = _get(parser, "scenario", "degree", int, 1)
    if degree not in (1, 2):
        raise ValidationError("degree must be 1 or 2", key="scenario.degree")
    mode = _get(parser, "scenario", "mode", str,
                "quad_curved" if degree == 2 else "quad")
    if mode not in ("quad", "quad_curved"):
        raise ValidationError(f"unknown upstream mode {mode!r}",
                              key="scenario.mode")
    wavenumber = _get(parser, "scenario", "wavenumber", float, 0.5)
    alpha = _get(parser, "scenario", "alpha", float,
                 _ALPHA_DEFAULTS.get((scenario, ic), 0.5))

    domain = _DOMAIN_DEFAULTS.get((scenario, ic))
    if scenario == "vp":
        lx = 2.0 * math.pi / wavenumber
        domain = (0.0, lx, -2.0 * math.pi, 2.0 * math.pi)
    if domain is None:
        raise ValidationError(f"no default domain for {scenario}/{ic}; "
                              "set [mesh] bounds", key="scenario.ic")
    x_min = _get(parser, "mesh", "x_min", float, domain[0])
    x_max = _get(parser, "mesh", "x_max", float, domain[1])
    y_min = _get(parser, "mesh", "y_min", float, domain[2])
    y_max = _get(parser, "mesh", "y_max", float, domain[3])
    nx = _get(parser, "mesh", "nx", int, required=True)
    default_ny = 1 if scenario == "burgers" else nx
    ny = _get(parser, "mesh", "ny", int, default_ny)

    adaptive = _get(parser, "time", "adaptive", _boolean, False)
    cfl = _get(parser, "time", "cfl", float, required=True)
    if adaptive:
        if not parser.has_option("time", "cfl_max"):
            raise ValidationError("adaptive runs require [time] cfl_max",
                                  key="time.cfl_max")
        cfl_min = _get(parser, "time", "cfl_min", float, 1.0)
        cfl_max = _get(parser, "time", "cfl_max", float, required=True)
    else:
        cfl_min = _get(parser, "time", "cfl_min", float, cfl)
        cfl_max = _get(parser, "time", "cfl_max", float, cfl)

    try:
        config = ScenarioConfig(
            scenario=scenario,
            x_min=x_min, x_max=x_max, y_min=y_min, y_max=y_max,
            nx=nx, ny=ny,
            degree=degree, mode=mode, tableau=tableau.upper(),
            cfl=cfl,
            t_final=_get(parser, "time", "t_final", float, required=True),
            limiter=_get(parser, "scenario", "limiter", _boolean, None),
            adaptive=adaptive, cfl_min=cfl_min, cfl_max=cfl_max,
            delta_max=_get(parser, "time", "delta_max", float, 0.01),
            delta_min=_get(parser, "time", "delta_min", float, 0.0005),
            alpha=alpha, wavenumber=wavenumber, ic=ic,
            advect_a=_get(parser, "scenario", "advect_a", float, 1.0),
            advect_b=_get(parser, "scenario", "advect_b", float, 0.0),
            n_edge_gauss=_get(parser, "time", "n_edge_gauss", int, 3),
            trace_substeps=_get(parser, "time", "trace_substeps", int, 1),
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from None

    return RunManifest(
        config=config,
        outdir=_get(parser, "output", "outdir", str, "out"),
        dump_every=_get(parser, "output", "dump_every", int, 0),
        seed=_get(parser, "output", "seed", int, 0),
        mesh_list=_get(parser, "mesh", "mesh_list", _int_list, None),
        cfl_list=_get(parser, "time", "cfl_list", _float_list, None),
        reference_cfl=_get(parser, "time", "reference_cfl", float, 0.1),
    )


def load_config(path, overrides=None):
    with open(path) as fh:
        return parse_config(fh.read(), overrides=overrides)


def write_timeseries(records, path):
    """Diagnostics series as CSV: 17 significant digits, LF endings."""
    if not records:
        raise ValueError("empty record series")
    lines = [TIMESERIES_HEADER]
    for r in records:
        lines.append(",".join("%.17g" % v for v in (
            r.t, r.mass, r.l1, r.l2, r.energy, r.entropy, r.theta, r.cfl,
            r.dev_mass, r.dev_l1, r.dev_l2, r.dev_energy, r.dev_entropy)))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_timeseries(path):
    """Parse a time-series CSV back into rows of floats (round-trip)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != TIMESERIES_HEADER:
        raise ValueError(f"{path}: not a diagnostics time series")
    return [tuple(float(v) for v in line.split(",")) for line in lines[1:]]


def write_convergence(rows, path):
    """Refinement-study rows as CSV (mesh or CFL mode)."""
    if not rows:
        raise ValueError("empty convergence table")
    key = "n" if "n" in rows[0] else "cfl"
    lines = [f"{key},error,order"]
    for row in rows:
        order = row.get("order")
        lines.append("%.17g,%.17g,%s" % (
            row[key], row["error"],
            "%.17g" % order if order is not None else ""))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
