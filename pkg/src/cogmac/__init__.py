"""Queue and throughput analysis of a cognitive-radio pair with multipacket reception."""

from .chain import (
    ProtocolParams,
    QueueDistribution,
    ServiceRates,
    is_stable,
    prob_band,
    prob_empty,
    service_rates,
    stationary_distribution,
    truncated_solve_oracle,
)
from .errors import DegenerateModelError, NumericalError, ParameterError, StabilityError
from .phy import LinkSuccessProfile, PhyScenario, derive_link_profile, success_probability
from .simulator import SimConfig, SimStats, replicate, run
from .throughput import ThroughputReport, aggregate_throughput, secondary_throughput

__version__ = "0.1.0"
