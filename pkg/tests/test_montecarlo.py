import math
from dataclasses import replace

import numpy as np
import pytest

from lpwa_plan import montecarlo as mc
from lpwa_plan.interference import laplace_outer
from lpwa_plan.reliability import SuccessMethod, p_success_at
from lpwa_plan.scenario import reference_scenario


@pytest.fixture
def small_area():
    sc = reference_scenario((1.6, 3.2))
    sc = replace(sc, cost=replace(sc.cost, area=16e6))
    return sc.with_network(ap_density=1e-6)


def test_zero_truncated_poisson_mean():
    rng = np.random.default_rng(0)
    for mu in (0.05, 1.3, 40.0):
        x = mc._ztp(mu, rng, 200_000)
        assert x.min() >= 1
        assert x.mean() == pytest.approx(mu / -math.expm1(-mu), rel=0.01)


def test_binomial_se_and_workers(monkeypatch):
    assert mc.binomial_se(0.5, 100) == pytest.approx(0.05)
    assert math.isnan(mc.binomial_se(0.5, 0))
    monkeypatch.setenv("LPWA_PLAN_THREADS", "3")
    assert mc.worker_count() == 3
    assert mc.worker_count(2) == 2


def test_fractional_weights_lie_in_unit_interval(reference, focus):
    rng = np.random.default_rng(1)
    w = mc._overlap_weights(focus, focus, reference, mc.OverlapModel.FractionalOverlap, rng, 10_000)
    assert w.min() >= 0 and w.max() <= 1
    # time overlap of two equal packets, uniform offset: mean 1/2 in time and 1/2 in frequency
    assert w.mean() == pytest.approx(0.25, abs=0.01)


def test_point_sample_matches_exact_success(reference, focus):
    z = [300.0, 1500.0]
    est = mc.probe_success(reference, focus, z, episodes=40_000, seed=4)
    for e in est:
        exact = p_success_at(focus, e.z, reference, SuccessMethod.ExactNumericM1)
        assert abs(e.p - exact) < 4 * e.se


def test_probe_reproducible_across_workers(reference, focus):
    a = mc.probe_success(reference, focus, [500.0, 2000.0], episodes=5_000, seed=9, workers=1)
    b = mc.probe_success(reference, focus, [500.0, 2000.0], episodes=5_000, seed=9, workers=4)
    assert a == b
    c = mc.probe_success(reference, focus, [500.0, 2000.0], episodes=5_000, seed=10, workers=1)
    assert a != c


def test_hard_collisions_hurt_more_than_fractional(reference, focus):
    kw = dict(episodes=30_000, seed=2)
    frac = mc.probe_success(reference, focus, [2000.0], overlap_model=mc.OverlapModel.FractionalOverlap, **kw)[0]
    hard = mc.probe_success(reference, focus, [2000.0], overlap_model=mc.OverlapModel.HardCollision, **kw)[0]
    assert hard.p < frac.p + 3 * math.hypot(hard.se, frac.se)


def test_field_laplace_matches_outer(reference):
    s_grid = [3e13, 3e14]
    est = mc.estimate_laplace(reference, s_grid, episodes=40_000, seed=3, own_cluster=False)
    for e in est:
        assert abs(e.value - laplace_outer(e.s, reference)) < 4 * e.se + 1e-12


def test_replay_counts(reference):
    t = replace(reference.types[0], replicas=2, retx_bound=3)
    sc = reference.with_type(1, replicas=2, retx_bound=3)
    r = mc.replay_retransmissions(sc, t, 2000.0, episodes=20_000, seed=1)
    assert 0 < r.outage < 1
    assert 1.0 <= r.attempts_mean <= 3.0
    assert r.attempts_verbatim <= r.attempts_mean
    shared = mc.replay_retransmissions(sc, t, 2000.0, episodes=20_000, seed=1, correlation="shared_geometry")
    # a shared interference snapshot correlates the replicas, so outage cannot improve
    assert shared.outage >= r.outage - 3 * math.hypot(r.outage_se, shared.outage_se)
    with pytest.raises(ValueError):
        mc.replay_retransmissions(sc, t, 2000.0, episodes=10, correlation="other")


def test_deployment_counts(small_area):
    rng = np.random.default_rng(7)
    counts = []
    for _ in range(20):
        dep = mc.sample_deployment(small_area, rng)
        counts.append(len(dep.devices[1]))
        assert np.all((dep.ap_positions >= 0) & (dep.ap_positions < dep.side))
    expected = small_area.types[0].parent_density * small_area.cost.area * 200
    assert np.mean(counts) == pytest.approx(expected, rel=0.25)


def test_campaign_spec_validation(small_area):
    with pytest.raises(ValueError):
        mc.CampaignSpec(replications=0).validate(small_area)
    with pytest.raises(ValueError):
        mc.CampaignSpec(horizon=10.0).validate(small_area)
    with pytest.raises(ValueError):
        mc.CampaignSpec(z_bins=(0.0,)).validate(small_area)


def test_campaign_stats_and_determinism(small_area):
    spec = mc.CampaignSpec(replications=2, seed=1, workers=1)
    r1 = mc.run_campaign(small_area, spec)
    r4 = mc.run_campaign(small_area, replace(spec, workers=4))
    s1, s4 = r1.for_type(1), r4.for_type(1)
    assert s1.replicas == s4.replicas and s1.replica_successes == s4.replica_successes
    assert np.array_equal(s1.lifetime_samples, s4.lifetime_samples)
    assert 0 < s1.P_s < 1 and s1.P_o == pytest.approx(1 - s1.P_s, abs=0.02)
    p = s1.p_s_bins
    seen = ~np.isnan(p)
    assert seen.sum() >= 3
    # success falls off with distance to the serving AP
    assert p[seen][0] > p[seen][-1]
