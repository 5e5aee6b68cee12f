"""Replication/drop control loop: reference load, ideal provider count and
the per-expiry decision rule."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class Decision(enum.Enum):
    REPLICATE = "replicate"
    DROP = "drop"
    HANDOVER = "handover"


@dataclass(frozen=True)
class AdaptationParams:
    """Tuning of the expiry-time decision band.

    ``epsilon`` is either an absolute rate (req/s) or a fraction of the
    reference load, depending on ``epsilon_mode`` ("absolute" | "relative").
    ``mu_ref`` may be None, in which case the engine derives it from the
    scenario via compute_mu_ref at run start.
    """

    mu_ref: float | None = None
    epsilon: float = 0.2
    epsilon_mode: str = "relative"

    def effective_epsilon(self, mu_ref: float) -> float:
        if self.epsilon_mode == "absolute":
            return self.epsilon
        return self.epsilon * mu_ref


def compute_mu_ref(n_nodes: int, c0: int, lambda0: float) -> float:
    """Reference per-provider query load for c0 providers and an initial
    per-node rate lambda0: (n_nodes - c0) * lambda0 / c0."""
    if c0 <= 0 or c0 >= n_nodes:
        raise ValueError(f"provider count must satisfy 0 < c0 < n_nodes, got c0={c0}, n_nodes={n_nodes}")
    return (n_nodes - c0) * lambda0 / c0


def ideal_provider_count(n_nodes: int, lambda_t: float, mu_ref: float) -> float:
    """Provider count at which the per-provider load settles on mu_ref:
    n_nodes * lambda_t / (lambda_t + mu_ref)."""
    if mu_ref <= 0:
        raise ValueError(f"mu_ref must be positive, got {mu_ref}")
    if lambda_t < 0:
        raise ValueError(f"query rate must be non-negative, got {lambda_t}")
    return n_nodes * lambda_t / (lambda_t + mu_ref)


def expiry_decision(served_count: int, tau: float, params: AdaptationParams, mu_ref: float | None = None) -> Decision:
    """Compare the measured load served_count/tau against the reference band.

    Above the band the copy is replicated, below it is dropped, inside it
    the legacy handover applies. The band is [mu_ref - eps, mu_ref + eps],
    boundaries included.
    """
    ref = params.mu_ref if mu_ref is None else mu_ref
    if ref is None:
        raise ValueError("mu_ref is not set")
    eps = params.effective_epsilon(ref)
    mu_j = served_count / tau
    if mu_j > ref + eps:
        return Decision.REPLICATE
    if mu_j < ref - eps:
        return Decision.DROP
    return Decision.HANDOVER


def apply_count_floor(decision: Decision, current_count: int, c_min: int) -> Decision:
    """Never drop below c_min copies: a Drop at the floor degrades to Handover."""
    if decision is Decision.DROP and current_count <= c_min:
        return Decision.HANDOVER
    return decision
