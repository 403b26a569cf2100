"""Maximum weight bipartite matching by max-product / min-sum message passing,
with exact certifiers and auction-style solvers."""

from .auction import auction_run, extract_dual, msa1_run, msa2_run, price_monotonicity_probe
from .comptree import build_tree, check_belief_tree_identity, check_message_tree_difference, max_t_matching
from .convergence import ConvergenceReport, StopPolicy
from .dense import MAX_PRODUCT, MIN_SUM, run_dense
from .instance import (Assignment, Instance, InstanceFormatError, Matching, gen_random_instance,
                       is_matching, load_instance, matching_weight, parse_instance, save_instance,
                       serialize_instance)
from .oracle import (DualSolution, TieError, brute_force_top2, check_cs, check_dual_feasible,
                     hungarian, instance_stats, iteration_bound)
from .scalar import SIMPLIFIED, sms_run, sms_step, sms_step_fast

__version__ = "0.1.0"

__all__ = [
    "Assignment", "ConvergenceReport", "DualSolution", "Instance", "InstanceFormatError",
    "MAX_PRODUCT", "MIN_SUM", "Matching", "SIMPLIFIED", "StopPolicy", "TieError",
    "auction_run", "brute_force_top2", "build_tree", "check_belief_tree_identity", "check_cs",
    "check_dual_feasible", "check_message_tree_difference", "extract_dual", "gen_random_instance",
    "hungarian", "instance_stats", "is_matching", "iteration_bound", "load_instance",
    "matching_weight", "max_t_matching", "msa1_run", "msa2_run", "parse_instance",
    "price_monotonicity_probe", "run_dense", "save_instance", "serialize_instance", "sms_run",
    "sms_step", "sms_step_fast",
]
