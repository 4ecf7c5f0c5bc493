"""Obstacle problems for linearly elastic elliptic membrane shells: the
membrane limit, Koiter's model with a normal-compliance gap, their thickness
asymptotics, and discrete regularity tools."""

from .errors import *  # noqa: F401,F403
from .fieldexpr import ExprError, ParseError, EvalError, FieldExpr, parse_expr, eval_expr
from .geometry import (Chart, eval_geometry, eval_geometry_derivatives, assert_elliptic,
                       eval_scaled_tensors)
from .shell import LameConstants, elasticity_tensor, gamma_ab, rho_ab, energy_densities
from .fem import (MEMBRANE, KOITER, BoxQP, build_mesh, build_dofmap, assemble_membrane,
                  assemble_flexural, assemble_load, assemble_gap_bounds, make_gap_field)
from .solvers import (SolveReport, solve_box_qp_pdas, solve_box_qp_psor,
                      solve_box_qp_enumerate, kkt_residual, solve_cg, random_box_qp)
from .asymptotics import (solve_membrane_limit, solve_koiter, epsilon_sweep, korn_constant,
                          error_norms)
from .regularity import (GridField, feasible_perturbation, build_convexifier,
                         density_approximant, interior_regularity_probe)
from .config import RunConfig, load_config, parse_config_text
from .cli import run_command, main

__version__ = "0.1.0"
