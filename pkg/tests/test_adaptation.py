import pytest

from infospread.adaptation import (AdaptationParams, Decision, apply_count_floor,
                                   compute_mu_ref, expiry_decision,
                                   ideal_provider_count)


def test_reference_load_from_initial_split():
    assert compute_mu_ref(2000, 200, 0.0025) == 0.0225


def test_reference_load_symmetric_half_split():
    assert compute_mu_ref(100, 50, 1.0) == 1.0


@pytest.mark.parametrize("c0", [0, 2000, 2500])
def test_reference_load_rejects_degenerate_counts(c0):
    with pytest.raises(ValueError):
        compute_mu_ref(2000, c0, 0.0025)


def test_ideal_count_tracks_demand():
    assert ideal_provider_count(2000, 0.01, 0.0225) == pytest.approx(615.3846153846154, abs=1e-12)
    assert ideal_provider_count(2000, 0.005, 0.0225) == pytest.approx(363.6363636363636, abs=1e-12)


def test_ideal_count_rounds_to_reported_targets():
    assert round(ideal_provider_count(2000, 0.01, 0.0225)) in (615, 616)
    assert round(ideal_provider_count(2000, 0.005, 0.0225)) == 364


def test_ideal_count_zero_demand():
    assert ideal_provider_count(2000, 0.0, 0.0225) == 0.0


def test_high_load_replicates():
    params = AdaptationParams(mu_ref=0.0225, epsilon=0.2, epsilon_mode="relative")
    # 5 served over 100 s -> 0.05 req/s, above 0.0225 * 1.2 = 0.027
    assert expiry_decision(5, 100.0, params) is Decision.REPLICATE


def test_zero_load_drops():
    params = AdaptationParams(mu_ref=0.0225, epsilon=0.2, epsilon_mode="relative")
    assert expiry_decision(0, 100.0, params) is Decision.DROP


def test_exact_reference_load_hands_over():
    params = AdaptationParams(mu_ref=0.0225, epsilon=0.2, epsilon_mode="relative")
    # 9 served over 400 s -> exactly 0.0225 req/s, inside the band
    assert expiry_decision(9, 400.0, params) is Decision.HANDOVER


def test_absolute_epsilon_mode():
    params = AdaptationParams(mu_ref=0.1, epsilon=0.05, epsilon_mode="absolute")
    assert expiry_decision(16, 100.0, params) is Decision.REPLICATE   # 0.16 > 0.15
    assert expiry_decision(15, 100.0, params) is Decision.HANDOVER    # boundary inside
    assert expiry_decision(4, 100.0, params) is Decision.DROP         # 0.04 < 0.05


def test_decision_monotone_in_served_count():
    params = AdaptationParams(mu_ref=0.0225, epsilon=0.2, epsilon_mode="relative")
    rank = {Decision.DROP: 0, Decision.HANDOVER: 1, Decision.REPLICATE: 2}
    decisions = [rank[expiry_decision(k, 100.0, params)] for k in range(50)]
    assert decisions == sorted(decisions)


def test_count_floor_degrades_drop_to_handover():
    assert apply_count_floor(Decision.DROP, 1, 1) is Decision.HANDOVER
    assert apply_count_floor(Decision.DROP, 2, 1) is Decision.DROP
    assert apply_count_floor(Decision.REPLICATE, 1, 1) is Decision.REPLICATE
