import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lpwa_plan.errors import DomainError, MissingPopulation
from lpwa_plan.lifetime import (
    LifetimeDefinition,
    ap_energy_per_time,
    application_lifetime,
    device_lifetime,
    expected_trials,
    lifetime_from_trials,
    network_cost,
    trials_from_failure,
)
from lpwa_plan.scenario import reference_scenario


def test_expected_trials_anchors():
    assert expected_trials(0.5, 1, 2) == pytest.approx(1.0)
    assert expected_trials(0.0, 3, 4) == 0.0
    assert expected_trials(1.0, 1, 5) == 1.0
    with pytest.raises(DomainError):
        expected_trials(0.5, 0, 1)


def test_expected_trials_against_protocol_replay():
    p, n, B = 0.3, 2, 3
    rng = np.random.default_rng(5)
    episodes = 1_000_000
    ok = (rng.random((episodes, B, n)) < p).any(axis=2)
    delivered = ok.any(axis=1)
    first = ok.argmax(axis=1) + 1
    stat = np.where(delivered, first, 0)
    se = stat.std(ddof=1) / math.sqrt(episodes)
    assert abs(stat.mean() - expected_trials(p, n, B)) < 3 * se


@settings(max_examples=50)
@given(st.floats(0.0, 1.0), st.integers(1, 6))
def test_trials_bounded_by_retry_budget(fail, B):
    beta = trials_from_failure(fail, B)
    assert 0.0 <= beta <= B + 1e-12


def test_lifetime_with_perfect_link(reference, focus):
    L = lifetime_from_trials(focus, 1.0, reference)
    assert L == pytest.approx(9.76e5, rel=1e-3)
    res = application_lifetime(focus, reference, P_s=1.0)
    assert res.app_lifetime == pytest.approx(L)
    assert res.expected_trials == 1.0


@settings(max_examples=30)
@given(st.floats(1e-3, 0.5), st.floats(1e-3, 0.5), st.floats(0.0, 3.0))
def test_lifetime_falls_with_power(a, b, beta):
    sc = reference_scenario()
    lo, hi = sorted((a, b))
    t = sc.types[0]
    assert lifetime_from_trials(replace(t, tx_power=hi), beta, sc) <= lifetime_from_trials(
        replace(t, tx_power=lo), beta, sc)


def test_device_lifetime_close_ap_beats_far_ap(reference, focus):
    near = device_lifetime(focus, [200.0], reference)
    far = device_lifetime(focus, [4000.0], reference)
    assert near.expected_trials > far.expected_trials
    # with B = 1 more expected delivered attempts means more energy spent
    assert near.device_lifetime < far.device_lifetime
    with pytest.raises(DomainError):
        device_lifetime(focus, [], reference)


def test_population_definitions(reference, focus):
    pop = [8e5, 9e5, 9.5e5]
    short = application_lifetime(focus, reference, LifetimeDefinition.SIBL, population=pop)
    long_ = application_lifetime(focus, reference, LifetimeDefinition.LIBL, population=pop)
    assert short.app_lifetime == 8e5 and long_.app_lifetime == 9.5e5
    # the recovered trial count reproduces the population value
    assert lifetime_from_trials(focus, short.expected_trials, reference) == pytest.approx(8e5)
    with pytest.raises(MissingPopulation):
        application_lifetime(focus, reference, LifetimeDefinition.SIBL)


def test_cost_reduces_to_its_parts(reference):
    sc = replace(reference, cost=replace(reference.cost, c2=0.0, c3=0.0, c1=1.0))
    sc = sc.with_network(ap_density=10.0 / sc.cost.area)
    assert network_cost(sc) == pytest.approx(10.0)
    sc = replace(reference, cost=replace(reference.cost, c1=0.0, c2=0.0))
    assert network_cost(sc) == pytest.approx(reference.cost.c3 * reference.network.system_bandwidth)


def test_ap_power_grows_with_load(reference):
    base = ap_energy_per_time(reference)
    assert base > reference.cost.P_r
    assert ap_energy_per_time(reference.with_type(1, daughters_per_parent=400.0)) > base
    with pytest.raises(DomainError):
        ap_energy_per_time(reference.with_network(ap_density=0.0))
