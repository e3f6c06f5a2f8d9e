"""High-dimensional Bayesian optimization in adaptively expanding sparse
subspaces, plus exact analysis of embedding success probabilities."""

from .analysis import (
    convergence_table,
    enumerate_success_fraction,
    mc_success_fraction,
    p_baxus,
    p_general,
    p_hesbo,
)
from .benchmarks import Benchmark, make_benchmark
from .embedding import (
    ObservationSet,
    SparseEmbedding,
    new_baxus_embedding,
    new_hesbo_embedding,
    target_dim_after_splits,
)
from .optimizer import (
    RunConfig,
    RunTrace,
    SplitSchedule,
    plan_schedule,
    run,
    run_baxus,
    run_fixed_embedding,
    run_random_search,
)
from .surrogate import (
    GPHyperparameters,
    SurrogateModel,
    candidate_count,
    fit,
    thompson_select,
)
from .trust_region import TrustRegionState, record_result, tr_box

__version__ = "0.1.0"
