"""Domain types shared by every module, plus invariant checking.

All quantities are stored in SI units (meters, seconds, watts, hertz).
Densities are per square meter; conversion from per-km² and from dB/dBm
happens in :mod:`lpwa_plan.config` at parse time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

KM2 = 1.0e6  # m² per km²


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts):
    return 10.0 * math.log10(watts) + 30.0


@dataclass(frozen=True)
class NormalScattering:
    """Isotropic 2-D Gaussian offsets, per-coordinate standard deviation ``sigma``."""

    sigma: float

    @property
    def scale(self):
        return self.sigma


@dataclass(frozen=True)
class UniformScattering:
    """Offsets uniform on a disc of radius ``radius``."""

    radius: float

    @property
    def scale(self):
        return self.radius


ScatteringDensity = Union[NormalScattering, UniformScattering]


@dataclass(frozen=True)
class PathlossModel:
    """Gain ``g(d) = 1 / (alpha1 + alpha2 * d**delta)``."""

    alpha1: float
    alpha2: float
    delta: float

    @classmethod
    def from_db_law(cls, intercept_db, slope_db, ref_distance=1.0):
        """Build from a loss law ``A + B*log10(d/d0)`` given in dB.

        The result is a pure power law (``alpha1 = 0``) with exponent ``B/10``.
        """
        delta = slope_db / 10.0
        alpha2 = db_to_linear(intercept_db) * ref_distance ** (-delta)
        return cls(0.0, alpha2, delta)

    @property
    def is_power_law(self):
        return self.alpha1 == 0.0

    @property
    def alpha(self):
        """Coefficient of the power-law form ``g = alpha * d**-delta``."""
        return 1.0 / self.alpha2


@dataclass(frozen=True)
class ChannelModel:
    pathloss: PathlossModel
    nakagami_m: int = 1
    nakagami_omega: float = 1.0
    sinr_threshold: float = 1.0


@dataclass(frozen=True)
class IoTTypeSpec:
    id: int
    parent_density: float
    daughters_per_parent: float
    scattering: ScatteringDensity
    reporting_period: float
    packet_time: float
    signal_bandwidth: float
    replicas: int
    tx_power: float
    retx_bound: int = 1
    in_phi: bool = True

    @property
    def duty_cycle(self):
        return self.replicas * self.packet_time / self.reporting_period


@dataclass(frozen=True)
class NetworkConfig:
    ap_density: float
    system_bandwidth: float
    code_count: int
    rejection_factor: float
    noise_density: float
    channel: ChannelModel
    ell_max: int = 1


@dataclass(frozen=True)
class CostCoefficients:
    c1: float
    c2: float
    c3: float
    P_r: float
    P_a: float
    area: float


@dataclass(frozen=True)
class DeviceEnergyModel:
    E0: float
    E_st: float
    E_c: float
    P_c: float
    eta: float


@dataclass(frozen=True)
class Scenario:
    types: tuple
    network: NetworkConfig
    cost: CostCoefficients
    device_energy: DeviceEnergyModel
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))

    def type_by_id(self, k):
        for t in self.types:
            if t.id == k:
                return t
        raise KeyError(f"no IoT type with id {k}")

    def noise_power(self, t):
        """Receiver noise power over the signal bandwidth of type ``t``."""
        return self.network.noise_density * t.signal_bandwidth

    def with_type(self, k, **changes):
        types = tuple(replace(t, **changes) if t.id == k else t for t in self.types)
        return replace(self, types=types)

    def with_network(self, **changes):
        return replace(self, network=replace(self.network, **changes))

    def with_channel(self, **changes):
        channel = replace(self.network.channel, **changes)
        return self.with_network(channel=channel)

    @property
    def served(self):
        return tuple(t for t in self.types if t.in_phi)


@dataclass(frozen=True)
class Violation:
    path: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = field(default_factory=tuple)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok


def _positive(value):
    return isinstance(value, (int, float)) and math.isfinite(value) and value > 0


def _check_type(t: IoTTypeSpec, idx: int, net: NetworkConfig) -> list:
    p = f"types[{idx}]"
    out = []
    if not _positive(t.parent_density):
        out.append(Violation(f"{p}.parent_density", "parent density must be > 0"))
    if not _positive(t.daughters_per_parent):
        out.append(Violation(f"{p}.daughters_per_parent", "daughters per parent must be > 0"))
    s = t.scattering
    if not isinstance(s, (NormalScattering, UniformScattering)):
        out.append(Violation(f"{p}.scattering", "unknown scattering density"))
    elif not _positive(s.scale):
        out.append(Violation(f"{p}.scattering", "scattering scale must be > 0"))
    if not _positive(t.packet_time):
        out.append(Violation(f"{p}.packet_time", "packet time must be > 0"))
    if not _positive(t.reporting_period):
        out.append(Violation(f"{p}.reporting_period", "reporting period must be > 0"))
    if not isinstance(t.replicas, int) or t.replicas < 1:
        out.append(Violation(f"{p}.replicas", "replica count must be a positive integer"))
    elif _positive(t.packet_time) and _positive(t.reporting_period) and t.duty_cycle >= 1:
        out.append(Violation(f"{p}.replicas", "duty cycle >= 1 (n*tau must be below T)"))
    if not _positive(t.signal_bandwidth):
        out.append(Violation(f"{p}.signal_bandwidth", "signal bandwidth must be > 0"))
    elif _positive(net.system_bandwidth) and t.signal_bandwidth > net.system_bandwidth:
        out.append(Violation(f"{p}.signal_bandwidth", "signal_bandwidth exceeds system bandwidth"))
    if not _positive(t.tx_power):
        out.append(Violation(f"{p}.tx_power", "transmit power must be > 0"))
    if not isinstance(t.retx_bound, int) or t.retx_bound < 1:
        out.append(Violation(f"{p}.retx_bound", "retransmission bound must be >= 1"))
    return out


def validate(scenario: Scenario) -> ValidationReport:
    """Collect every violated invariant; never raises, never mutates."""
    out = []
    net = scenario.network
    if not _positive(net.ap_density):
        out.append(Violation("network.ap_density", "AP density must be > 0"))
    if not _positive(net.system_bandwidth):
        out.append(Violation("network.system_bandwidth", "system bandwidth must be > 0"))
    if not isinstance(net.code_count, int) or net.code_count < 1:
        out.append(Violation("network.code_count", "code count must be >= 1"))
    if not (0.0 <= net.rejection_factor <= 1.0):
        out.append(Violation("network.rejection_factor", "rejection factor must lie in [0, 1]"))
    if not (net.noise_density >= 0.0 and math.isfinite(net.noise_density)):
        out.append(Violation("network.noise_density", "noise density must be >= 0"))
    if not isinstance(net.ell_max, int) or net.ell_max < 1:
        out.append(Violation("network.ell_max", "ell_max must be >= 1"))

    ch = net.channel
    if not isinstance(ch.nakagami_m, int) or ch.nakagami_m < 1:
        out.append(Violation("network.channel.nakagami_m", "Nakagami m must be a positive integer"))
    if not _positive(ch.nakagami_omega):
        out.append(Violation("network.channel.nakagami_omega", "Omega must be > 0"))
    if not _positive(ch.sinr_threshold):
        out.append(Violation("network.channel.sinr_threshold", "SINR threshold must be > 0"))
    pl = ch.pathloss
    if not _positive(pl.alpha2):
        out.append(Violation("network.channel.pathloss.alpha2", "alpha2 must be > 0"))
    if not _positive(pl.delta):
        out.append(Violation("network.channel.pathloss.delta", "pathloss exponent must be > 0"))
    if pl.alpha1 < 0:
        out.append(Violation("network.channel.pathloss.alpha1", "alpha1 must be >= 0"))

    c = scenario.cost
    for name in ("c1", "c2", "c3", "P_r", "P_a"):
        if not getattr(c, name) >= 0:
            out.append(Violation(f"cost.{name}", f"{name} must be >= 0"))
    if not _positive(c.area):
        out.append(Violation("cost.area", "service area must be > 0"))

    e = scenario.device_energy
    for name in ("E0", "E_st", "E_c", "P_c", "eta"):
        if not _positive(getattr(e, name)):
            out.append(Violation(f"device_energy.{name}", f"{name} must be > 0"))

    ids = [t.id for t in scenario.types]
    if len(set(ids)) != len(ids):
        out.append(Violation("types", "type ids must be unique"))
    if not any(t.in_phi for t in scenario.types):
        out.append(Violation("types", "at least one type must be served (in_phi)"))
    for idx, t in enumerate(scenario.types):
        out.extend(_check_type(t, idx, net))
    return ValidationReport(tuple(out))


def reference_scenario(parent_density_km2: Sequence[float] = (1.6,), retx_bound: int = 1) -> Scenario:
    """Default single- or multi-type deployment with the reference parameter values.

    ``parent_density_km2`` gives λ_k per km² for each type; every type uses
    the default communication parameters.
    """
    types = tuple(
        IoTTypeSpec(
            id=k + 1,
            parent_density=lam / KM2,
            daughters_per_parent=200.0,
            scattering=NormalScattering(100.0),
            reporting_period=300.0,
            packet_time=0.1,
            signal_bandwidth=10e3,
            replicas=1,
            tx_power=dbm_to_watts(21.0),
            retx_bound=retx_bound,
            in_phi=True,
        )
        for k, lam in enumerate(parent_density_km2)
    )
    channel = ChannelModel(
        pathloss=PathlossModel.from_db_law(133.0, 38.3, 1000.0),
        nakagami_m=1,
        nakagami_omega=1.0,
        sinr_threshold=1.0,
    )
    network = NetworkConfig(
        ap_density=5.5e-8,
        system_bandwidth=100e3,
        code_count=1,
        rejection_factor=0.0,
        noise_density=dbm_to_watts(-174.0),
        channel=channel,
        ell_max=1,
    )
    cost = CostCoefficients(c1=1.0, c2=1.0 / 2000, c3=1.0 / 2270, P_r=0.5, P_a=1.5, area=400.0 * KM2)
    energy = DeviceEnergyModel(E0=1000.0, E_st=0.1, E_c=0.2, P_c=10e-3, eta=0.5)
    return Scenario(types=types, network=network, cost=cost, device_energy=energy, rng_seed=0)
