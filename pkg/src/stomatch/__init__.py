"""Online stochastic matching with the natural LP and pair-sampling algorithms."""

from .instance import (BOT, GENERAL, UNWEIGHTED, VERTEX_WEIGHTED, Instance, OfflineVertex,
                       OnlineType, ValidationError, gen_random_instance, gen_structured_instance,
                       load_instance, save_instance, with_vertex_weights)
from .natural_lp import FractionalSolution, check_feasible_natural, separation_oracle, solve_jaillet_lu, solve_natural
from .sampling import SamplingPlan, build_amortized, build_beta, build_limit, build_plan, build_wasteful
from .simulator import draw_arrivals, monte_carlo, offline_optimum, run_pair_sampling

__version__ = "0.1.0"

__all__ = [
    "BOT", "GENERAL", "UNWEIGHTED", "VERTEX_WEIGHTED", "Instance", "OfflineVertex", "OnlineType",
    "ValidationError", "gen_random_instance", "gen_structured_instance", "load_instance",
    "save_instance", "with_vertex_weights", "FractionalSolution", "check_feasible_natural",
    "separation_oracle", "solve_jaillet_lu", "solve_natural", "SamplingPlan", "build_amortized",
    "build_beta", "build_limit", "build_plan", "build_wasteful", "draw_arrivals", "monte_carlo",
    "offline_optimum", "run_pair_sampling",
]
