"""Deterministic simulator of peer-to-peer information dissemination in
wireless ad hoc networks: copy migration by random-walk or
random-direction policies, a flooding query application, and an adaptive
replication/drop loop."""

from .adaptation import (AdaptationParams, Decision, compute_mu_ref,
                         expiry_decision, ideal_provider_count)
from .core import (ClusterLayout, DemandSegment, Position, Scenario,
                   ScenarioError, constant_demand, derive_stream,
                   load_scenario, validate_scenario)
from .engine import BatchResult, RunResult, run, run_batch

__version__ = "0.1.0"

__all__ = [
    "AdaptationParams", "BatchResult", "ClusterLayout", "Decision",
    "DemandSegment", "Position", "RunResult", "Scenario", "ScenarioError",
    "compute_mu_ref", "constant_demand", "derive_stream", "expiry_decision",
    "ideal_provider_count", "load_scenario", "run", "run_batch",
    "validate_scenario", "__version__",
]
