"""Controllers and optimization diagnostics."""

from .common import (BoxSet, CostSpec, GDConfig, InfeasibleError, RobustConfig, SolveResult,
                     SolverDivergence, SolverError, project_box, shift_warm_start)
from .rokdeepc import (GStepMatrices, KernelMPC, RoKDeePC, eval_cost_quad, eval_cost_socp,
                       grad_g_quad, grad_u, output_constraint_margin, rokdeepc_solve,
                       solve_g_closed_form, solve_g_constrained)
from .diagnostics import (EquivalentParams, WorstCaseReport, equivalent_params,
                          kkt_residual_socp, lambda_k_threshold, refine_g, socp_subgradients,
                          worst_case_verify)
from .baselines import DeePC, KoopmanMPC

__all__ = [
    "BoxSet", "CostSpec", "GDConfig", "InfeasibleError", "RobustConfig", "SolveResult",
    "SolverDivergence", "SolverError", "project_box", "shift_warm_start",
    "GStepMatrices", "KernelMPC", "RoKDeePC", "eval_cost_quad", "eval_cost_socp",
    "grad_g_quad", "grad_u", "output_constraint_margin", "rokdeepc_solve",
    "solve_g_closed_form", "solve_g_constrained",
    "EquivalentParams", "WorstCaseReport", "equivalent_params", "kkt_residual_socp",
    "lambda_k_threshold", "refine_g", "socp_subgradients", "worst_case_verify",
    "DeePC", "KoopmanMPC",
]
