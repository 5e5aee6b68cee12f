"""Shared domain types, scenario configuration and the deterministic
random-stream contract used by every other module.

A scenario bundles everything one simulation needs: deployment, mobility,
dissemination policy, demand profile, adaptation parameters and seeds.
Scenarios are immutable; a validated scenario plus a run index fully
determines every random draw of a run.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .adaptation import AdaptationParams

DEPLOYMENTS = ("uniform", "stationary", "clustered")
MOBILITIES = ("static", "srwp", "random_trip")
POLICIES = ("rwd", "rdd")

# Aliases accepted in config files for the canonical names above.
_MOBILITY_ALIASES = {
    "stationaryrandomwaypoint": "srwp",
    "stationary_random_waypoint": "srwp",
    "randomtrip": "random_trip",
}


class ScenarioError(ValueError):
    """Configuration rejected by validation; ``field`` names the offender."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class ClusterLayout:
    """Four cluster centers plus the fraction of nodes bridging them."""

    centers: tuple[tuple[float, float], ...]
    cluster_radius: float
    bridge_fraction: float

    @staticmethod
    def default(area_side: float) -> "ClusterLayout":
        quarter, three_quarter = area_side / 4.0, 3.0 * area_side / 4.0
        return ClusterLayout(
            centers=(
                (quarter, quarter),
                (three_quarter, quarter),
                (quarter, three_quarter),
                (three_quarter, three_quarter),
            ),
            cluster_radius=area_side / 8.0,
            bridge_fraction=0.15,
        )


@dataclass(frozen=True)
class DemandSegment:
    """One piece of the per-node query rate profile over [t_start, t_end).

    A constant segment has rate_from == rate_to; a ramp interpolates
    linearly between the two endpoint rates.
    """

    t_start: float
    t_end: float
    rate_from: float
    rate_to: float

    @staticmethod
    def constant(t_start: float, t_end: float, rate: float) -> "DemandSegment":
        return DemandSegment(t_start, t_end, rate, rate)

    @staticmethod
    def ramp(t_start: float, t_end: float, rate_from: float, rate_to: float) -> "DemandSegment":
        return DemandSegment(t_start, t_end, rate_from, rate_to)


DemandProfile = tuple[DemandSegment, ...]


def constant_demand(rate: float, sim_time: float) -> DemandProfile:
    return (DemandSegment.constant(0.0, sim_time, rate),)


@dataclass(frozen=True)
class Scenario:
    n_nodes: int = 2000
    area_side: float = 500.0
    radio_range: float = 20.0
    deployment: str = "uniform"
    mobility: str = "static"
    policy: str = "rdd"
    initial_providers: int = 200
    cache_time: float = 10.0
    demand: DemandProfile = ()
    adaptation: AdaptationParams | None = None
    h_max: int = 5
    sim_time: float = 10_000.0
    obs_interval: float = 10.0
    seed: int = 1
    runs: int = 10

    # Declared defaults not pinned by the experiment tables.
    speed_min: float = 1.0
    speed_max: float = 5.0
    pause_time: float = 10.0
    warmup: float = 5000.0
    cluster: ClusterLayout | None = None
    inter_cluster_prob: float = 0.3
    move_distance_mean: float = 100.0
    max_reflections: int = 3
    hop_latency: float = 0.005
    reply_scale: float = 1.0
    c_min: int = 1
    mobility_dt: float = 1.0
    n_bins: int = 20
    content_size_kb: float = 1.0  # metadata only; links are ideal


def derive_stream(seed: int, stream_id: str, run_index: int = 0) -> np.random.Generator:
    """Independent, reproducible generator for one stochastic concern.

    The same (seed, stream_id, run_index) always yields the same draw
    sequence; distinct labels or run indices give statistically
    independent streams. Labels are hashed with a fixed algorithm so the
    mapping is stable across platforms and processes.
    """
    label = int.from_bytes(hashlib.blake2s(stream_id.encode("utf-8"), digest_size=8).digest(), "little")
    ss = np.random.SeedSequence(entropy=(int(seed) & 0xFFFFFFFFFFFFFFFF, label, int(run_index)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream; mostly a labelled handle around derive_stream."""

    seed: int
    stream_id: str
    run_index: int = 0

    def generator(self) -> np.random.Generator:
        return derive_stream(self.seed, self.stream_id, self.run_index)


def _require(cond: bool, field_name: str, message: str) -> None:
    if not cond:
        raise ScenarioError(field_name, message)


def validate_demand(demand: DemandProfile, sim_time: float) -> None:
    _require(len(demand) > 0, "demand", "profile has no segments")
    prev_end = 0.0
    for i, seg in enumerate(demand):
        _require(seg.t_end > seg.t_start, "demand", f"segment {i} is empty or reversed")
        _require(abs(seg.t_start - prev_end) < 1e-9, "demand", f"segment {i} does not start where the previous ended")
        _require(seg.rate_from >= 0 and seg.rate_to >= 0, "demand", f"segment {i} has a negative rate")
        prev_end = seg.t_end
    _require(abs(prev_end - sim_time) < 1e-9, "demand", f"profile ends at {prev_end}, expected sim_time={sim_time}")


def validate_scenario(raw: Scenario) -> Scenario:
    """Check every invariant and fill derived defaults.

    Returns a normalized scenario; raises ScenarioError naming the first
    offending field otherwise.
    """
    s = raw
    _require(s.n_nodes >= 1, "n_nodes", "need at least one node")
    _require(s.area_side > 0, "area_side", "must be positive")
    _require(0 < s.radio_range, "radio_range", "must be positive")
    _require(s.radio_range < s.area_side, "radio_range", "range exceeds area")
    _require(s.deployment in DEPLOYMENTS, "deployment", f"unknown deployment {s.deployment!r}")
    _require(s.mobility in MOBILITIES, "mobility", f"unknown mobility {s.mobility!r}")
    _require(s.policy in POLICIES, "policy", f"unknown policy {s.policy!r}")
    _require(0 < s.initial_providers <= s.n_nodes, "initial_providers", "initial_providers out of range")
    _require(s.cache_time > 0, "cache_time", "must be positive")
    _require(s.h_max >= 1, "h_max", "must be at least 1")
    _require(s.sim_time > 0, "sim_time", "must be positive")
    _require(s.obs_interval > 0, "obs_interval", "must be positive")
    _require(s.runs >= 1, "runs", "must be at least 1")
    _require(0 < s.speed_min <= s.speed_max, "speed_min", "need 0 < speed_min <= speed_max")
    _require(s.pause_time >= 0, "pause_time", "must be non-negative")
    _require(s.warmup >= 0, "warmup", "must be non-negative")
    _require(0 <= s.inter_cluster_prob <= 1, "inter_cluster_prob", "must be a probability")
    _require(s.move_distance_mean > 0, "move_distance_mean", "must be positive")
    _require(s.max_reflections >= 0, "max_reflections", "must be non-negative")
    _require(s.hop_latency >= 0, "hop_latency", "must be non-negative")
    _require(s.reply_scale > 0, "reply_scale", "must be positive")
    _require(s.c_min >= 1, "c_min", "must be at least 1")
    _require(s.mobility_dt > 0, "mobility_dt", "must be positive")
    _require(s.n_bins >= 2, "n_bins", "need at least two bins")

    if not s.demand:
        s = replace(s, demand=constant_demand(0.0025, s.sim_time))
    validate_demand(s.demand, s.sim_time)
    peak = max(max(seg.rate_from, seg.rate_to) for seg in s.demand)
    _require(peak * s.mobility_dt < 1.0, "demand",
             "per-node query probability rate*mobility_dt must stay below 1")

    if s.adaptation is not None:
        a = s.adaptation
        _require(a.mu_ref is None or a.mu_ref > 0, "adaptation.mu_ref", "must be positive when given")
        _require(a.epsilon >= 0, "adaptation.epsilon", "must be non-negative")
        _require(a.epsilon_mode in ("absolute", "relative"), "adaptation.epsilon_mode", "must be 'absolute' or 'relative'")

    needs_cluster = s.deployment == "clustered" or s.mobility == "random_trip"
    if needs_cluster and s.cluster is None:
        s = replace(s, cluster=ClusterLayout.default(s.area_side))
    if s.cluster is not None:
        c = s.cluster
        _require(len(c.centers) == 4, "cluster.centers", "exactly four centers required")
        for cx, cy in c.centers:
            _require(0 <= cx <= s.area_side and 0 <= cy <= s.area_side, "cluster.centers", "center outside area")
        _require(c.cluster_radius > 0, "cluster.cluster_radius", "must be positive")
        _require(0 <= c.bridge_fraction < 1, "cluster.bridge_fraction", "must be in [0, 1)")
    if s.mobility == "random_trip":
        _require(s.deployment == "clustered", "mobility", "random_trip requires the clustered deployment")
    return s


# ---------------------------------------------------------------------------
# Config file round trip (JSON: nested sections, one key per field)

def _segment_to_dict(seg: DemandSegment) -> dict[str, Any]:
    if seg.rate_from == seg.rate_to:
        return {"t_start": seg.t_start, "t_end": seg.t_end, "shape": "constant", "rate": seg.rate_from}
    return {
        "t_start": seg.t_start,
        "t_end": seg.t_end,
        "shape": "ramp",
        "rate_from": seg.rate_from,
        "rate_to": seg.rate_to,
    }


def _segment_from_dict(d: dict[str, Any]) -> DemandSegment:
    shape = d.get("shape", "constant")
    if shape == "constant":
        return DemandSegment.constant(float(d["t_start"]), float(d["t_end"]), float(d["rate"]))
    if shape == "ramp":
        return DemandSegment.ramp(float(d["t_start"]), float(d["t_end"]), float(d["rate_from"]), float(d["rate_to"]))
    raise ScenarioError("demand", f"unknown segment shape {shape!r}")


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    d: dict[str, Any] = {
        "n_nodes": s.n_nodes,
        "area_side": s.area_side,
        "radio_range": s.radio_range,
        "deployment": s.deployment,
        "mobility": s.mobility,
        "policy": s.policy,
        "initial_providers": s.initial_providers,
        "cache_time": s.cache_time,
        "demand": {"segments": [_segment_to_dict(seg) for seg in s.demand]},
        "adaptation": None,
        "h_max": s.h_max,
        "sim_time": s.sim_time,
        "obs_interval": s.obs_interval,
        "seed": s.seed,
        "runs": s.runs,
        "speed_min": s.speed_min,
        "speed_max": s.speed_max,
        "pause_time": s.pause_time,
        "warmup": s.warmup,
        "cluster": None,
        "inter_cluster_prob": s.inter_cluster_prob,
        "move_distance_mean": s.move_distance_mean,
        "max_reflections": s.max_reflections,
        "hop_latency": s.hop_latency,
        "reply_scale": s.reply_scale,
        "c_min": s.c_min,
        "mobility_dt": s.mobility_dt,
        "n_bins": s.n_bins,
        "content_size_kb": s.content_size_kb,
    }
    if s.adaptation is not None:
        d["adaptation"] = {
            "mu_ref": s.adaptation.mu_ref,
            "epsilon": s.adaptation.epsilon,
            "epsilon_mode": s.adaptation.epsilon_mode,
        }
    if s.cluster is not None:
        d["cluster"] = {
            "centers": [list(c) for c in s.cluster.centers],
            "cluster_radius": s.cluster.cluster_radius,
            "bridge_fraction": s.cluster.bridge_fraction,
        }
    return d


def scenario_from_dict(d: dict[str, Any]) -> Scenario:
    d = dict(d)
    known = set(Scenario.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise ScenarioError(sorted(unknown)[0], "unknown configuration key")

    if "mobility" in d:
        m = str(d["mobility"]).lower()
        d["mobility"] = _MOBILITY_ALIASES.get(m, m)
    for key in ("deployment", "policy"):
        if key in d:
            d[key] = str(d[key]).lower()

    if "demand" in d and d["demand"] is not None:
        segs = d["demand"]["segments"] if isinstance(d["demand"], dict) else d["demand"]
        d["demand"] = tuple(_segment_from_dict(x) for x in segs)
    else:
        d.pop("demand", None)

    if d.get("adaptation") is not None:
        a = d["adaptation"]
        d["adaptation"] = AdaptationParams(
            mu_ref=a.get("mu_ref"),
            epsilon=float(a.get("epsilon", 0.2)),
            epsilon_mode=str(a.get("epsilon_mode", "relative")),
        )

    if d.get("cluster") is not None:
        c = d["cluster"]
        d["cluster"] = ClusterLayout(
            centers=tuple(tuple(float(v) for v in ctr) for ctr in c["centers"]),
            cluster_radius=float(c["cluster_radius"]),
            bridge_fraction=float(c["bridge_fraction"]),
        )
    return Scenario(**d)


def load_scenario(path: str) -> Scenario:
    """Read a JSON scenario file and return the validated result."""
    with open(path, "r", encoding="utf-8") as fh:
        return validate_scenario(scenario_from_dict(json.load(fh)))


def dump_scenario(s: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(s), fh, indent=2, sort_keys=True)
        fh.write("\n")


def apply_overrides(d: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Apply dotted-path overrides ("adaptation.epsilon" -> value) to a
    scenario dict, creating intermediate sections as needed."""
    out = json.loads(json.dumps(d))  # deep copy, keeps plain types
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = out
        for p in parts[:-1]:
            if node.get(p) is None:
                node[p] = {}
            node = node[p]
        node[parts[-1]] = value
    return out
