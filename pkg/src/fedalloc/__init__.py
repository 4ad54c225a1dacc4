"""Resource allocation for compression-aided federated learning over an OFDMA uplink."""

from .allocation import (
    AllocationOutcome,
    Assignment,
    coalition_game,
    exhaustive_optimum,
    fairness_assignment,
    initial_assignment,
    t_comp,
)
from .bound import (
    BoundTerms,
    FlBoundParams,
    bound_terms,
    learning_rate,
    optimal_kse,
    r_min,
    r_min_oracle,
)
from .kernels import BACKEND
from .radio import LinkBudget, PathLoss, RateTable, Topology, dbm_to_watts, rate, rate_table, sample_topology

__version__ = "0.1.0"
