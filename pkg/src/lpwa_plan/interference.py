"""Activity factors and the Laplace functional of aggregate interference.

The receiving AP sits at the origin. Interferers form one Poisson cluster
process per IoT type, thinned by their time/frequency/code activity. The
Laplace functional factorizes into a term for all clusters (``outer``) and a
term for the cluster the probe transmitter belongs to (``inner``).

Two integration paths are provided. The default evaluates the per-parent
miss integral at the nodes of a composite Gauss-Legendre rule on the parent
radius, so no interpolation is involved. ``reference=True`` switches to
nested adaptive quadrature, which is slow but independent of the node
layout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import (
    _NORMAL_SUPPORT,
    D_MIN,
    offset_distance_breaks,
    offset_distance_pdf,
    offset_distance_support,
    pathloss_clamped,
)
from .numerics import DEFAULT_QUADRATURE, QuadratureSpec, gauss_legendre, integrate_1d
from .scenario import IoTTypeSpec, NetworkConfig, NormalScattering, Scenario

_INNER_NODES = 12
_OUTER_NODES = 10
_OUTER_PANELS = 32


@dataclass(frozen=True)
class ActivityFactors:
    """Mean active interferers per cluster on the same code and on other codes."""

    same_code: float
    cross_code: float

    @property
    def total(self):
        return self.same_code + self.cross_code


def activity_factors(k: IoTTypeSpec, net: NetworkConfig) -> ActivityFactors:
    base = k.daughters_per_parent * k.duty_cycle * (k.signal_bandwidth / net.system_bandwidth)
    if not k.in_phi:
        return ActivityFactors(0.0, base)
    codes = net.code_count
    return ActivityFactors(base / codes, base * (codes - 1) / codes)


def interferer_classes(k: IoTTypeSpec, net: NetworkConfig):
    """(activity, rejection factor Q_j) pairs with nonzero contribution."""
    act = activity_factors(k, net)
    out = []
    if act.same_code > 0:
        out.append((act.same_code, 1.0))
    if act.cross_code > 0 and net.rejection_factor > 0:
        out.append((act.cross_code, net.rejection_factor))
    return out


def resolve_radius(spec: QuadratureSpec, scenario: Scenario) -> float:
    """Parent-truncation radius: explicit, or the service-area diagonal."""
    if spec.truncation_radius is not None:
        return spec.truncation_radius
    return math.sqrt(2.0 * scenario.cost.area)


def _miss_fn(scenario: Scenario, c: float):
    """1 - u(d): probability-like loss from one interferer at distance d.

    ``c = Omega * s * Q_j * P_k``; u is the Nakagami-m Laplace transform.
    """
    ch = scenario.network.channel
    m = ch.nakagami_m
    pl = ch.pathloss

    if m == 1:
        def miss(d):
            x = c * pathloss_clamped(pl, d)
            return x / (1.0 + x)
    else:
        def miss(d):
            x = c * pathloss_clamped(pl, d) / m
            return -np.expm1(-m * np.log1p(x))
    return miss


def _transition_distance(scenario: Scenario, c: float):
    # distance where c*g(d) = 1, i.e. where the miss function drops through 1/2
    pl = scenario.network.channel.pathloss
    val = (c - pl.alpha1) / pl.alpha2
    if val <= 0:
        return None
    return val ** (1.0 / pl.delta)


def _edge_matrix(scattering, rhos, d0):
    """Per-row panel edges for the offset-distance integral, shape (len(rhos), E)."""
    rhos = np.asarray(rhos, dtype=float)[:, None]
    if isinstance(scattering, NormalScattering):
        k = _NORMAL_SUPPORT * scattering.sigma
        lo, hi = np.maximum(rhos - k, 0.0), rhos + k
        tmpl = rhos + scattering.sigma * np.array([-6.0, -3.0, -1.5, 0.0, 1.5, 3.0, 6.0])
    else:
        R = scattering.radius
        lo, hi = np.maximum(rhos - R, 0.0), rhos + R
        tmpl = np.hstack((np.abs(R - rhos), rhos))
    extra = [D_MIN * 2.0]
    if d0 is not None:
        extra += [0.5 * d0, d0, 2.0 * d0]
    extra = np.broadcast_to(np.array(extra), (rhos.shape[0], len(extra)))
    edges = np.hstack((lo, hi, tmpl, extra))
    return np.sort(np.clip(edges, lo, hi), axis=1)


def _cluster_miss(rhos, scattering, miss, d0):
    """U(rho) = E[1 - u(|c + X|)] for parent distances ``rhos``; X ~ scattering."""
    x, w = gauss_legendre(_INNER_NODES)
    edges = _edge_matrix(scattering, rhos, d0)
    a, b = edges[:, :-1, None], edges[:, 1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x
    rho = np.asarray(rhos, dtype=float)[:, None, None]
    dens = offset_distance_pdf(scattering, rho, nodes)
    out = np.sum(half * w * miss(nodes) * dens, axis=(1, 2))
    return np.clip(out, 0.0, 1.0)


def _cluster_miss_reference(rho, scattering, miss, d0, spec):
    lo, hi = offset_distance_support(scattering, rho)
    pts = offset_distance_breaks(scattering, rho)
    if d0 is not None:
        pts += [p for p in (0.5 * d0, d0, 2.0 * d0) if lo < p < hi]
    f = lambda d: float(miss(d) * offset_distance_pdf(scattering, rho, d))
    return integrate_1d(f, lo, hi, spec, points=sorted(pts))


@lru_cache(maxsize=64)
def _outer_nodes(scale, d0, radius):
    lo = max(min(scale, d0 if d0 else scale) / 50.0, 1e-3)
    breaks = np.geomspace(lo, radius, _OUTER_PANELS)
    extra = [scale * k for k in (1.0, 3.0, 10.0)]
    if d0:
        extra += [d0 * k for k in (0.5, 1.0, 2.0)]
    breaks = np.unique(np.concatenate(([0.0], breaks, [e for e in extra if e < radius])))
    x, w = gauss_legendre(_OUTER_NODES)
    a, b = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (b - a)
    return ((a + b) * 0.5 + half * x).ravel(), (half * w).ravel()


def outer_exponents(s, scenario: Scenario, spec: QuadratureSpec = DEFAULT_QUADRATURE, reference=False):
    """Per-(type, code class) exponents of the all-clusters Laplace term.

    Returns a list of ``(type_id, Q_j, exponent)`` with
    ``L_outer = exp(-sum(exponent))``.
    """
    net = scenario.network
    omega = net.channel.nakagami_omega
    radius = resolve_radius(spec, scenario)
    terms = []
    for k in scenario.types:
        if k.parent_density <= 0 or s <= 0:
            continue
        for act, q in interferer_classes(k, net):
            c = omega * s * q * k.tx_power
            miss = _miss_fn(scenario, c)
            d0 = _transition_distance(scenario, c)
            sc = k.scattering
            if reference:
                def integrand(rho):
                    u = _cluster_miss_reference(rho, sc, miss, d0, spec)
                    return rho * -math.expm1(-act * u)
                pts = [p for p in (sc.scale, 10 * sc.scale, d0) if p and p < radius]
                val = 2 * math.pi * integrate_1d(integrand, 0.0, radius, spec, points=pts)
            else:
                nodes, weights = _outer_nodes(sc.scale, d0, radius)
                u = _cluster_miss(nodes, sc, miss, d0)
                val = 2 * math.pi * np.sum(weights * nodes * -np.expm1(-act * u))
            terms.append((k.id, q, k.parent_density * float(val)))
    return terms


def laplace_outer(s, scenario: Scenario, spec: QuadratureSpec = DEFAULT_QUADRATURE, reference=False):
    """Laplace functional of interference from all clusters at the origin AP."""
    if s == 0:
        return 1.0
    total = sum(e for _, _, e in outer_exponents(s, scenario, spec, reference))
    return math.exp(-total)


def laplace_inner(
    s,
    i: IoTTypeSpec,
    scenario: Scenario,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    z=0.0,
    reference=False,
):
    """Laplace functional of interference from the probe transmitter's own cluster.

    ``z`` is the transmitter's distance from the AP. ``z=0`` places the
    cluster around the receiver, which is the closed-form intra-cluster
    geometry; a positive ``z`` centers it on the actual transmitter location.
    """
    if s == 0:
        return 1.0
    net = scenario.network
    omega = net.channel.nakagami_omega
    classes = interferer_classes(i, net)
    if not classes:
        return 1.0
    misses = []
    for act, q in classes:
        c = omega * s * q * i.tx_power
        misses.append((act, _miss_fn(scenario, c), _transition_distance(scenario, c)))
    sc = i.scattering

    def exponent_at(rhos):
        total = np.zeros(len(rhos))
        for act, miss, d0 in misses:
            if reference:
                u = np.array([_cluster_miss_reference(r, sc, miss, d0, spec) for r in rhos])
            else:
                u = _cluster_miss(rhos, sc, miss, d0)
            total += act * u
        return total

    lo, hi = offset_distance_support(sc, z)
    pts = offset_distance_breaks(sc, z)
    if reference:
        f = lambda r: float(np.exp(-exponent_at([r]))[0] * offset_distance_pdf(sc, z, r))
        return integrate_1d(f, lo, hi, spec, points=pts)
    x, w = gauss_legendre(_INNER_NODES)
    br = np.array(sorted(set([lo, hi] + pts)))
    a, b = br[:-1, None], br[1:, None]
    half = 0.5 * (b - a)
    nodes = ((a + b) * 0.5 + half * x).ravel()
    weights = (half * w).ravel()
    val = np.sum(weights * np.exp(-exponent_at(nodes)) * offset_distance_pdf(sc, z, nodes))
    return float(min(max(val, 0.0), 1.0))


def laplace_total(
    s,
    i: IoTTypeSpec,
    scenario: Scenario,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    z=0.0,
    reference=False,
):
    """Product of the outer and inner terms."""
    return laplace_outer(s, scenario, spec, reference) * laplace_inner(s, i, scenario, spec, z, reference)
