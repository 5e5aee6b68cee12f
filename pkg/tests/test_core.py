import json

import numpy as np
import pytest

from infospread.core import (ClusterLayout, DemandSegment, Scenario, ScenarioError,
                             apply_overrides, constant_demand, derive_stream,
                             dump_scenario, load_scenario, scenario_from_dict,
                             scenario_to_dict, validate_scenario)


def test_default_parameter_space_accepted():
    s = validate_scenario(Scenario(n_nodes=2000, initial_providers=200,
                                   cache_time=10.0, area_side=500.0))
    assert s.n_nodes == 2000
    assert s.demand  # default profile filled in
    assert s.demand[0].rate_from == 0.0025


def test_zero_providers_rejected():
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(Scenario(initial_providers=0))
    assert exc.value.field == "initial_providers"
    assert "out of range" in str(exc.value)


def test_range_exceeding_area_rejected():
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(Scenario(radio_range=600.0, area_side=500.0))
    assert exc.value.field == "radio_range"
    assert "range exceeds area" in str(exc.value)


@pytest.mark.parametrize("kwargs,field", [
    (dict(cache_time=0.0), "cache_time"),
    (dict(h_max=0), "h_max"),
    (dict(initial_providers=3000), "initial_providers"),
    (dict(policy="flood"), "policy"),
    (dict(mobility="teleport"), "mobility"),
    (dict(runs=0), "runs"),
])
def test_invariant_violations_name_the_field(kwargs, field):
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(Scenario(**kwargs))
    assert exc.value.field == field


def test_demand_must_cover_sim_time():
    partial = (DemandSegment.constant(0.0, 5000.0, 0.001),)
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(Scenario(demand=partial, sim_time=10_000.0))
    assert exc.value.field == "demand"


def test_demand_must_be_contiguous():
    gap = (DemandSegment.constant(0.0, 100.0, 0.001),
           DemandSegment.constant(200.0, 1000.0, 0.001))
    with pytest.raises(ScenarioError):
        validate_scenario(Scenario(demand=gap, sim_time=1000.0))


def test_cluster_layout_default_filled_for_clustered():
    s = validate_scenario(Scenario(deployment="clustered"))
    assert s.cluster is not None
    assert len(s.cluster.centers) == 4
    assert s.cluster.cluster_radius == 500.0 / 8.0


def test_stream_determinism():
    a = derive_stream(42, "mobility", 0)
    b = derive_stream(42, "mobility", 0)
    assert np.array_equal(a.random(100), b.random(100))


def test_stream_separation_by_label():
    a = derive_stream(42, "mobility", 0).random(100)
    b = derive_stream(42, "queries", 0).random(100)
    assert not np.array_equal(a, b)


def test_stream_separation_by_run_index():
    a = derive_stream(42, "mobility", 0).random(100)
    b = derive_stream(42, "mobility", 1).random(100)
    assert not np.array_equal(a, b)


def test_scenario_dict_round_trip():
    s = validate_scenario(Scenario(
        deployment="clustered", mobility="random_trip",
        demand=(DemandSegment.ramp(0.0, 500.0, 0.001, 0.01),
                DemandSegment.constant(500.0, 1000.0, 0.01)),
        sim_time=1000.0))
    again = scenario_from_dict(scenario_to_dict(s))
    assert again == s


def test_scenario_file_round_trip(tmp_path):
    s = validate_scenario(Scenario(seed=99, sim_time=500.0,
                                   demand=constant_demand(0.002, 500.0)))
    path = tmp_path / "scenario.json"
    dump_scenario(s, str(path))
    assert load_scenario(str(path)) == s


def test_unknown_config_key_rejected():
    with pytest.raises(ScenarioError):
        scenario_from_dict({"n_nodez": 5})


def test_mobility_aliases_accepted():
    s = scenario_from_dict({"mobility": "StationaryRandomWaypoint", "deployment": "stationary"})
    assert s.mobility == "srwp"


def test_dotted_overrides():
    d = scenario_to_dict(Scenario())
    out = apply_overrides(d, {"adaptation.epsilon": 0.3, "policy": "rwd"})
    assert out["adaptation"]["epsilon"] == 0.3
    assert out["policy"] == "rwd"
    assert d["adaptation"] is None  # original untouched


def test_position_array_view():
    from infospread.core import Position
    p = Position(12.5, 430.0)
    assert p.as_array().tolist() == [12.5, 430.0]


def test_rng_stream_handle_matches_derive():
    from infospread.core import RngStream
    handle = RngStream(seed=42, stream_id="mobility", run_index=3)
    assert np.array_equal(handle.generator().random(10),
                          derive_stream(42, "mobility", 3).random(10))
