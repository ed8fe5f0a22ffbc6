"""Differentially private uncapacitated facility location on hierarchically well-separated trees."""

__version__ = "0.1.0"

from .instance import (CostBreakdown, Metric, UflInstance, Violation, assignment_cost, eval_cost,
                       nearest_in_set, validate_metric)
from .hst import (DeltaCase, HstTree, antichain_lower_bound, b_value, canonical_leaf, extend_root,
                  is_antichain, min_set, min_set_delta, star_tree, subtree_counts, tree_distance,
                  validate_hst)
from .frt import EmbeddingResult, ExpansionStats, expansion_stats, frt_embed, rescale_metric
from .tree_solver import (MarkedSet, Solution, SolverParams, TreeSolver, closest_facility_rule,
                          compute_L_prime, laplace_scale, mark_base, mark_noisy, project_to_leaves,
                          sample_laplace, select_superset, solve_tree_base, solve_tree_dp)
from .general import GeneralSolution, solve_general, solve_general_base
from .oracle import OptResult, approx_ratio, opt_exhaustive, opt_tree_dp
from .privacy import AuditReport, PrivacyLedger, analytic_epsilon, audit, marking_prob, neighbor_ratio_check
from .lowerbound import (Policy, PolicyOutcome, StarFamily, evaluate_policy, expected_opt_per_leaf,
                         make_star_instance, sample_client_vector, star_exact_opt, two_point_cost_table)
from .serialize import (ParseError, parse_instance, parse_solution, parse_tree, serialize_instance,
                        serialize_solution, serialize_tree)
from .generators import random_clients, random_euclidean, random_hst
