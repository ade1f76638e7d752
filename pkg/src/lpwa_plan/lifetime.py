"""Battery lifetime of devices and applications, AP energy and network cost."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, MissingPopulation
from .reliability import SuccessMethod, p_success_at, p_success_spatial
from .scenario import IoTTypeSpec, Scenario


class LifetimeDefinition(enum.Enum):
    SIBL = "shortest"
    AIBL = "average"
    LIBL = "longest"


@dataclass(frozen=True)
class LifetimeResult:
    device_lifetime: float
    app_lifetime: float
    expected_trials: float
    definition: LifetimeDefinition | None = None


def trials_from_failure(fail, B):
    """Σ_{j=1}^{B} j (1 − x) x^(j−1), with x the probability that one attempt fails."""
    if not 0.0 <= fail <= 1.0:
        raise DomainError("failure probability must lie in [0, 1]")
    j = np.arange(1, B + 1)
    return float(np.sum(j * (1.0 - fail) * fail ** (j - 1)))


def expected_trials(p_per_attempt, n, B):
    """Expected attempt count as a truncated sum; the all-fail event carries no weight."""
    if not 0.0 <= p_per_attempt <= 1.0:
        raise DomainError("p must lie in [0, 1]")
    if n < 1 or B < 1:
        raise DomainError("n and B must be >= 1")
    return trials_from_failure((1.0 - p_per_attempt) ** n, B)


def lifetime_from_trials(i: IoTTypeSpec, beta, scenario: Scenario):
    e = scenario.device_energy
    per_packet = e.E_st + beta * e.E_c + beta * i.replicas * (e.eta * i.tx_power + e.P_c) * i.packet_time
    return e.E0 * i.reporting_period / per_packet


def device_lifetime(i: IoTTypeSpec, ap_distances, scenario: Scenario,
                    method=SuccessMethod.ClosedApprox) -> LifetimeResult:
    """Lifetime of one device whose nearest APs sit at ``ap_distances``."""
    ap_distances = list(ap_distances)
    if not ap_distances:
        raise DomainError("at least one AP distance is required")
    fail_one = 1.0
    for d in ap_distances:
        fail_one *= 1.0 - p_success_at(i, d, scenario, method)
    beta = trials_from_failure(fail_one ** i.replicas, i.retx_bound)
    L = lifetime_from_trials(i, beta, scenario)
    return LifetimeResult(L, L, beta)


def application_lifetime(i: IoTTypeSpec, scenario: Scenario, definition=LifetimeDefinition.AIBL,
                         population=None, method=SuccessMethod.ClosedApprox, P_s=None) -> LifetimeResult:
    """Application lifetime under one of the three definitions.

    AIBL is analytic. SIBL and LIBL need ``population``: a sequence of
    per-device lifetimes in seconds, for instance from a simulation campaign.
    """
    if definition is LifetimeDefinition.AIBL:
        if P_s is None:
            P_s = p_success_spatial(i, scenario, method)
        beta = expected_trials(P_s, i.replicas, i.retx_bound)
        L = lifetime_from_trials(i, beta, scenario)
        return LifetimeResult(L, L, beta, definition)
    if population is None or len(population) == 0:
        raise MissingPopulation(f"{definition.name} needs a simulated device population")
    pop = np.asarray(population, dtype=float)
    idx = int(np.argmin(pop)) if definition is LifetimeDefinition.SIBL else int(np.argmax(pop))
    val = float(pop[idx])
    e = scenario.device_energy
    # invert the lifetime expression to recover that device's expected trials
    per_packet = e.E0 * i.reporting_period / val
    beta = (per_packet - e.E_st) / (e.E_c + i.replicas * (e.eta * i.tx_power + e.P_c) * i.packet_time)
    return LifetimeResult(val, val, beta, definition)


def ap_energy_per_time(scenario: Scenario):
    """Power drawn by one AP: fixed part plus a load term from the served traffic."""
    cost = scenario.cost
    lam_a = scenario.network.ap_density
    if not lam_a > 0:
        raise DomainError("AP density must be > 0")
    load = sum(k.parent_density * k.daughters_per_parent / (lam_a * k.reporting_period) for k in scenario.served)
    return cost.P_r + cost.P_a * load


def network_cost(scenario: Scenario):
    cost = scenario.cost
    lam_a = scenario.network.ap_density
    aps = lam_a * cost.area
    return cost.c1 * aps + cost.c2 * aps * ap_energy_per_time(scenario) + cost.c3 * scenario.network.system_bandwidth

