"""Online caching and routing in bipartite cache networks."""

from .baselines import (LFUCache, LRUCache, MultiLRU, hindsight_network, hindsight_single_cache)
from .bounds import (BoundInputs, best_pairing, lower_bound_uniform, lower_bound_weighted,
                     upper_bound_bsca, upper_bound_diminishing)
from .domain import (GeneralGraph, Request, Topology, UtilityModel, feasible_initial_cache, is_feasible,
                     reduce_general_graph)
from .harness import ExperimentConfig, MetricsSeries, load_config, parse_config, regret_series, run
from .policy import BSCA, StepSchedule, step_size
from .projection import oracle_project, oracle_project_enum, project_cache, project_capped_simplex
from .routing import RoutingOutcome, route
from .workloads import RequestTrace, WorkloadSpec, generate, parse_trace

__version__ = "0.1.0"
