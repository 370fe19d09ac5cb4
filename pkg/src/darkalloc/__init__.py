"""Online share allocation across dark venues under censored feedback."""

from .core import (
    CONSUMED_ATOL,
    FractionalAllocation,
    IntegralAllocation,
    ProblemDims,
    Rng,
    RoundOutcome,
    WeightMatrix,
    censor_feedback,
    make_rng,
    subgradient_bits,
    substream,
    trial_streams,
)
from .rounding import MarginalVector, SubsetDistribution, greedy_distribution, mix_exploration, sample_subset
from .liquidity import TwoPointParams, ZbplParams
from .simulator import (
    BUILTIN_SCENARIOS,
    EnvironmentStream,
    Scenario,
    Segment,
    load_scenario,
    make_experts_reduction,
    make_five_venue,
    make_iid48,
    make_lower_bound,
    make_two_armed,
    make_two_venue_switch,
    resolve_scenario,
    save_scenario,
)
from .harness import (
    ComparatorValue,
    Trace,
    emit_csv,
    emit_plot,
    hindsight_comparator,
    run_experiment,
)

__all__ = [
    "CONSUMED_ATOL",
    "BUILTIN_SCENARIOS",
    "ComparatorValue",
    "EnvironmentStream",
    "FractionalAllocation",
    "IntegralAllocation",
    "MarginalVector",
    "ProblemDims",
    "Rng",
    "RoundOutcome",
    "Scenario",
    "Segment",
    "SubsetDistribution",
    "Trace",
    "TwoPointParams",
    "WeightMatrix",
    "ZbplParams",
    "censor_feedback",
    "emit_csv",
    "emit_plot",
    "greedy_distribution",
    "hindsight_comparator",
    "load_scenario",
    "make_experts_reduction",
    "make_five_venue",
    "make_iid48",
    "make_lower_bound",
    "make_rng",
    "make_two_armed",
    "make_two_venue_switch",
    "mix_exploration",
    "resolve_scenario",
    "run_experiment",
    "sample_subset",
    "save_scenario",
    "subgradient_bits",
    "substream",
    "trial_streams",
]

__version__ = "0.1.0"
