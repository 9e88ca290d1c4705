"""Outage analysis and transport-capacity optimization for barrage relay networks."""

from .channel import (
    ChannelParams,
    FarFieldError,
    LineTopology,
    LinkSet,
    OutageValue,
    db_to_linear,
    linear_to_db,
    outage_probability,
    path_loss,
    relative_gains,
)
from .markov import (
    AbsorptionResult,
    StateSpace,
    TransmitSchedule,
    absorption,
    build_transition_matrix,
    enumerate_states,
    transmit_probabilities,
)
from .interference import CascadeScenario, FixedPointReport, fixed_point, interference_view
from .montecarlo import SimEstimate, simulate_cbr, simulate_outage
from .optimizer import (
    CandidateConfig,
    OptResult,
    evaluate,
    mutate_placement,
    optimize,
    transport_capacity,
)

__all__ = [
    "AbsorptionResult",
    "CandidateConfig",
    "CascadeScenario",
    "ChannelParams",
    "FarFieldError",
    "FixedPointReport",
    "LineTopology",
    "LinkSet",
    "OptResult",
    "OutageValue",
    "SimEstimate",
    "StateSpace",
    "TransmitSchedule",
    "absorption",
    "build_transition_matrix",
    "db_to_linear",
    "enumerate_states",
    "evaluate",
    "fixed_point",
    "interference_view",
    "linear_to_db",
    "mutate_placement",
    "optimize",
    "outage_probability",
    "path_loss",
    "relative_gains",
    "simulate_cbr",
    "simulate_outage",
    "transmit_probabilities",
    "transport_capacity",
]
