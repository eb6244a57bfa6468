"""Conservative semi-Lagrangian DG transport with exponential integrators.

A library for nonlinear transport problems of the form
u_t + div(P(u) u) = 0 on periodic rectangles: Vlasov-Poisson phase-space
dynamics, the guiding-center model, 1D Burgers, and linear advection.
Each time step composes exact linear transport solves (conservative
semi-Lagrangian DG steps over characteristic-traced upstream cells)
according to a commutator-free Runge-Kutta exponential integrator.
"""

from .diagnostics import (DiagnosticsRecord, gc_diagnostics,
                          generic_diagnostics, relative_deviation,
                          vp_diagnostics)
from .driver import (ScenarioConfig, StepOutcome, adaptive_controller,
                     advance_step, build_generator, compute_dt,
                     initial_condition, landau_config, refinement_study,
                     reversibility_harness, run, v_reflect)
from .errors import (ClipFailure, ConfigError, DegenerateCell,
                     DegenerateEdge, MeshMismatch, NegativeAverage,
                     ParseError, SingularFit, SLDGError, UnknownTableau,
                     ValidationError, ZeroSpeed)
from .fields import (AnalyticField, Burgers1DField, ChargeDensity1D,
                     FrozenField, GuidingCenterField, LinearComboField,
                     VPField, burgers_field, charge_density, combine_frozen,
                     electric_field_1d, electric_field_2d)
from .geometry import (ClipResult, ParabolicEdge, Segment, UpstreamCell,
                       build_quad, build_quad_curved, cell_area,
                       cell_from_edges, clip, green_integral)
from .mesh import (DGField, Mesh2D, QuadratureRule, dump_field, error_norm,
                   load_field, project_l2, total_mass)
from .rkei import (RKEITableau, TABLEAU_NAMES, builtin_tableau,
                   matrix_exponential, ode_propagator, rkei_step)
from .sldg_step import (TestFunctionStar, UpstreamTrace, area_deviation,
                        pp_limiter, reconstruct_test_function,
                        sldg_linear_step, trace_backward, trace_upstream,
                        upstream_areas)

__version__ = "0.1.0"
