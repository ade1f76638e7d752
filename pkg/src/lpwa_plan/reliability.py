"""Success probability at a fixed distance, spatial success and outage."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import special

from .errors import DomainError, UnsupportedFading
from .geometry import D_MIN, pathloss, pathloss_clamped, self_convolution_pdf, self_convolution_support
from .interference import interferer_classes, laplace_inner, laplace_outer, resolve_radius
from .numerics import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    cosine_integral,
    gauss_legendre,
    gaussian_tail_moment_scaled,
    integrate_1d,
    sine_integral,
)
from .scenario import IoTTypeSpec, NormalScattering, Scenario

SATURATION_CUTOFF = 20.0


class SuccessMethod(enum.Enum):
    ClosedApprox = "closed"
    ExactNumericM1 = "numeric"
    RemarkApprox = "remark"


@dataclass(frozen=True)
class ReliabilityResult:
    type_id: int
    method: SuccessMethod
    z_grid: tuple
    p_s: tuple
    P_s: float
    P_o: float
    error_estimate: float = 0.0
    notes: dict = field(default_factory=dict)


def h_field(z, xi, delta):
    """Closed field term for a pure power law: ∫ g(x)/(g(x)+g(z)/ξ) dx over the plane."""
    if not delta > 2:
        raise DomainError("field term diverges for pathloss exponent <= 2")
    if xi < 0:
        raise DomainError("xi must be >= 0")
    return z * z * xi ** (2.0 / delta) * 2.0 * math.pi**2 / (delta * math.sin(2.0 * math.pi / delta))


def cluster_argument(z, xi, sigma):
    return math.sqrt(xi) * z * z / (4.0 * sigma * sigma)


def h_cluster(z, xi, sigma, saturation_cutoff=SATURATION_CUTOFF):
    """Own-cluster term for exponent-4 power law and normal scattering.

    Uses u·[ci(u) sin u − si(u) cos u] with u = √ξ z²/(4σ²); returns 1 once
    ``u`` reaches ``saturation_cutoff`` (pass ``math.inf`` to disable).
    Accepts an array of distances.
    """
    if xi < 0:
        raise DomainError("xi must be >= 0")
    z = np.asarray(z, dtype=float)
    u = np.sqrt(xi) * z * z / (4.0 * sigma * sigma)
    safe = np.where(u > 0, u, 1.0)
    si, ci = special.sici(safe)
    val = safe * (ci * np.sin(safe) - (si - math.pi / 2) * np.cos(safe))
    out = np.where(u >= saturation_cutoff, 1.0, np.where(u > 0, val, 0.0))
    return float(out) if out.ndim == 0 else out


def h_cluster_sqrt_xi(z, xi, sigma):
    """Same form with the argument z²/(4σ²√ξ) instead of the ξ-scaled one."""
    u = z * z / (4.0 * sigma * sigma * math.sqrt(xi))
    return u * (cosine_integral(u) * math.sin(u) - sine_integral(u) * math.cos(u))


def h_numeric(z, xi, scenario: Scenario, scattering=None, spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """Quadrature of ∫ g(x)/(g(x)+g(z)/ξ) w(x) dx for a general pathloss.

    ``scattering=None`` takes w ≡ 1 (the field term, truncated at the
    resolved radius); otherwise w is the self-convolved scattering density.
    """
    if xi == 0:
        return 0.0
    pl = scenario.network.channel.pathloss
    gz = pathloss(pl, z)

    def ratio(r):
        g = pathloss_clamped(pl, r)
        return g / (g + gz / xi)

    if scattering is None:
        R = resolve_radius(spec, scenario)
        pts = [p for p in (z, 10 * z) if p < R]
        return 2 * math.pi * integrate_1d(lambda r: r * ratio(r), 0.0, R, spec, points=pts)
    hi = self_convolution_support(scattering)
    pts = [p for p in (z, scattering.scale, 3 * scattering.scale) if p < hi]
    f = lambda r: r * ratio(r) * self_convolution_pdf(scattering, r)
    return 2 * math.pi * integrate_1d(f, 0.0, hi, spec, points=pts)


def h_cluster_panels(z, xi, scenario: Scenario, scattering, nodes=16):
    """Own-cluster term for any pathloss by composite Gauss-Legendre, vectorized over ``z``.

    Agrees with :func:`h_numeric` to ~1e-10; used on the hot path.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if xi == 0:
        return np.zeros(z.shape)
    pl = scenario.network.channel.pathloss
    gz = pathloss(pl, z)[:, None] if z.size > 1 else np.atleast_1d(pathloss(pl, z))[:, None]
    hi = self_convolution_support(scattering)
    sc = scattering.scale
    # gain-ratio transition where g(r) = g(z)/xi
    t = np.maximum((1.0 / (gz[:, 0] / xi) - pl.alpha1) / pl.alpha2, 0.0) ** (1.0 / pl.delta)
    fixed = list(np.geomspace(D_MIN, sc, 8)) + [k * sc for k in (2.0, 4.0)]
    if not isinstance(scattering, NormalScattering):
        fixed += [0.8 * hi, 0.95 * hi, 0.99 * hi]
    edges = np.column_stack([np.zeros_like(z), np.full_like(z, hi), 0.5 * t, t, 2.0 * t]
                            + [np.full_like(z, v) for v in fixed])
    edges = np.sort(np.clip(edges, 0.0, hi), axis=1)
    x, w = gauss_legendre(nodes)
    a, b = edges[:, :-1, None], edges[:, 1:, None]
    half = 0.5 * (b - a)
    r = (a + b) * 0.5 + half * x
    g = pathloss_clamped(pl, r)
    integrand = r * g / (g + gz[:, :, None] / xi) * self_convolution_pdf(scattering, r)
    return 2 * math.pi * np.sum(half * w * integrand, axis=(1, 2))


def _closed_field_ok(scenario):
    pl = scenario.network.channel.pathloss
    return pl.is_power_law and pl.delta > 2


def _cluster_term(z, xi, i: IoTTypeSpec, scenario, spec):
    pl = scenario.network.channel.pathloss
    sc = i.scattering
    if pl.is_power_law and pl.delta == 4 and isinstance(sc, NormalScattering):
        return h_cluster(z, xi, sc.sigma)
    out = h_cluster_panels(z, xi, scenario, sc)
    return float(out[0]) if np.ndim(z) == 0 else out


def noise_factor(i: IoTTypeSpec, z, scenario: Scenario, clamped=False):
    """Probability that noise alone does not push the SINR below threshold."""
    return float(np.exp(-_noise_exponent(i, z, scenario, clamped)))


def intra_factor_full_collision(i: IoTTypeSpec, scenario: Scenario):
    """Own-cluster factor with every active code class counted as one full collision."""
    return math.exp(-sum(act for act, _ in interferer_classes(i, scenario.network)))


def field_exponent(i: IoTTypeSpec, z, scenario: Scenario, spec=DEFAULT_QUADRATURE):
    ch = scenario.network.channel
    z = np.asarray(z, dtype=float)
    total = np.zeros_like(z)
    for k in scenario.types:
        for act, q in interferer_classes(k, scenario.network):
            xi = ch.sinr_threshold * q * k.tx_power / (ch.nakagami_omega * i.tx_power)
            if _closed_field_ok(scenario):
                h = h_field(z, xi, ch.pathloss.delta)
            else:
                h = np.vectorize(lambda zz: h_numeric(zz, xi, scenario, None, spec))(z)
            total = total + k.parent_density * act * h
    return total


def _noise_exponent(i, z, scenario, clamped=False):
    ch = scenario.network.channel
    g = pathloss_clamped(ch.pathloss, z) if clamped else pathloss(ch.pathloss, z)
    return scenario.noise_power(i) * ch.sinr_threshold / (ch.nakagami_omega * i.tx_power * g)


def p_success_many(i: IoTTypeSpec, z, scenario: Scenario, method=SuccessMethod.ClosedApprox,
                   spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """Vector form of :func:`p_success_at` over an array of distances."""
    ch = scenario.network.channel
    if ch.nakagami_m != 1:
        raise UnsupportedFading("analytic success probability is available for Rayleigh fading (m=1) only")
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise DomainError("distance must be > 0")
    if method is SuccessMethod.ExactNumericM1:
        out = np.empty(z.shape)
        flat = out.reshape(-1)
        for idx, zz in enumerate(z.reshape(-1)):
            zz = float(zz)
            s = ch.sinr_threshold / (ch.nakagami_omega * i.tx_power * pathloss_clamped(ch.pathloss, zz))
            val = math.exp(-_noise_exponent(i, zz, scenario, clamped=True)) * laplace_outer(s, scenario, spec) \
                * laplace_inner(s, i, scenario, spec, z=zz)
            flat[idx] = min(max(val, 0.0), 1.0)
        return out
    expo = _noise_exponent(i, z, scenario) + field_exponent(i, z, scenario, spec)
    if method is SuccessMethod.RemarkApprox:
        return np.exp(-expo) * intra_factor_full_collision(i, scenario)
    for act, q in interferer_classes(i, scenario.network):
        xi = q * ch.sinr_threshold / ch.nakagami_omega
        expo = expo + act * _cluster_term(z, xi, i, scenario, spec)
    return np.exp(-expo)


def p_success_at(i: IoTTypeSpec, z, scenario: Scenario, method=SuccessMethod.ClosedApprox,
                 spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """Probability that one replica from distance ``z`` is decoded at a given AP."""
    return float(p_success_many(i, float(z), scenario, method, spec))


def nearest_ap_cdf(ell, ap_density, r):
    """CDF of the distance from a fixed point to its ``ell``-th nearest AP."""
    if ell < 1:
        raise DomainError("ell must be >= 1")
    if r < 0:
        raise DomainError("r must be >= 0")
    return float(mpmath.gammainc(ell, 0, ap_density * math.pi * r * r, regularized=True))


def nearest_ap_pdf(ell, ap_density, r):
    r = np.asarray(r, dtype=float)
    x = ap_density * math.pi * r * r
    with np.errstate(divide="ignore"):
        logp = math.log(2.0) + ell * np.log(x) - x - np.log(r) - math.lgamma(ell)
    out = np.where(r > 0, np.exp(logp), 0.0)
    return float(out) if out.ndim == 0 else out


def _distance_nodes(ell, ap_density, n=12):
    # composite Gauss-Legendre in x = λπr² over [0, ell+40]; mass beyond is < 1e-14
    top = ell + 40.0 + 6.0 * math.sqrt(ell)
    breaks = np.concatenate(([0.0], np.geomspace(1e-6, top, 16)))
    x, w = gauss_legendre(n)
    a, b = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (b - a)
    xs = ((a + b) * 0.5 + half * x).ravel()
    ws = (half * w).ravel() * np.exp((ell - 1) * np.log(xs) - xs - math.lgamma(ell))
    return np.sqrt(xs / (ap_density * math.pi)), ws


def spatial_failure_numeric(i, scenario, method, ell, spec=DEFAULT_QUADRATURE, nodes=12):
    """∫ (1 − p_s(i, r)) dP_{d_ell}(r) by composite Gauss-Legendre in λπr²."""
    r, w = _distance_nodes(ell, scenario.network.ap_density, nodes)
    ps = p_success_many(i, r, scenario, method, spec)
    return float(np.sum(w * (1.0 - ps)))


def _closed_form_ok(i: IoTTypeSpec, scenario: Scenario):
    pl = scenario.network.channel.pathloss
    return (scenario.network.channel.nakagami_m == 1 and pl.is_power_law and pl.delta == 4
            and isinstance(i.scattering, NormalScattering))


def spatial_coefficients(i: IoTTypeSpec, scenario: Scenario, ell):
    """(X0, X1, X2, X3) of the exponent-4 spatial closed form."""
    net = scenario.network
    ch = net.channel
    alpha = ch.pathloss.alpha
    lam_a = net.ap_density
    x0 = (lam_a * math.pi) ** ell / math.factorial(ell - 1) * intra_factor_full_collision(i, scenario)
    x1 = scenario.noise_power(i) * ch.sinr_threshold / (ch.nakagami_omega * i.tx_power * alpha)
    x2 = lam_a * math.pi
    for k in scenario.types:
        for act, q in interferer_classes(k, net):
            xi = ch.sinr_threshold * q * k.tx_power / (ch.nakagami_omega * i.tx_power)
            x2 += k.parent_density * act * math.sqrt(xi) * math.pi**2 / 2.0
    x3 = x2 / (2.0 * math.sqrt(x1)) if x1 > 0 else math.inf
    return x0, x1, x2, x3


def spatial_success_term_closed(i, scenario, ell):
    """∫ p_s(i, r) dP_{d_ell}(r) in closed form (full-collision per-distance success)."""
    x0, x1, x2, x3 = spatial_coefficients(i, scenario, ell)
    if x1 == 0:
        return x0 * math.factorial(ell - 1) / x2**ell
    return x0 * x1 ** (-ell / 2.0) * gaussian_tail_moment_scaled(x3, ell)


def spatial_success_term_alt_limit(i, scenario, ell, dps=50):
    """Variant with exp(X2²/(4X1²)), 1/√(X1^(ell−1)), lower limit X2²/(2X1).

    Evaluated with mpmath because the exponent overflows doubles.
    """
    x0, x1, x2, x3 = spatial_coefficients(i, scenario, ell)
    with mpmath.workdps(dps):
        x1m, x2m, x3m = mpmath.mpf(x1), mpmath.mpf(x2), mpmath.mpf(x3)
        lower = x2m**2 / (2 * x1m)
        g = mpmath.quad(lambda t: (t - x3m) ** (ell - 1) * mpmath.exp(-t * t), [lower, mpmath.inf])
        val = x0 / mpmath.sqrt(x1m ** (ell - 1)) * mpmath.exp(x2m**2 / (4 * x1m**2)) * g
        return float(val)


def p_success_spatial(i: IoTTypeSpec, scenario: Scenario, method=SuccessMethod.ClosedApprox,
                      closed_form="auto", spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """Success probability from a random location, over the ell_max nearest APs.

    ``closed_form``: "auto" uses the corrected closed form for the
    approximate methods when the exponent-4 / normal-scattering conditions
    hold, "corrected" requires it, "alternate" uses the alt-limit variant, and
    "none" forces quadrature of the per-distance success.
    """
    ell_max = scenario.network.ell_max
    use_closed = closed_form in ("corrected", "alternate") or (
        closed_form == "auto" and method is not SuccessMethod.ExactNumericM1 and _closed_form_ok(i, scenario)
    )
    if use_closed and not _closed_form_ok(i, scenario):
        raise DomainError("closed spatial form needs exponent-4 power law, normal scattering and m=1")
    fail = 1.0
    for ell in range(1, ell_max + 1):
        if use_closed:
            term = (spatial_success_term_alt_limit if closed_form == "alternate" else spatial_success_term_closed)(
                i, scenario, ell)
            fail *= 1.0 - term
        else:
            fail *= spatial_failure_numeric(i, scenario, method, ell, spec)
    return min(max(1.0 - fail, 0.0), 1.0)


def outage(i: IoTTypeSpec, P_s):
    """Probability that all n·B replica transmissions fail."""
    if not 0.0 <= P_s <= 1.0:
        raise DomainError("P_s must lie in [0, 1]")
    return (1.0 - P_s) ** (i.replicas * i.retx_bound)


def reliability(i: IoTTypeSpec, scenario: Scenario, z_grid, method=SuccessMethod.ClosedApprox,
                spec: QuadratureSpec = DEFAULT_QUADRATURE) -> ReliabilityResult:
    ps = tuple(p_success_at(i, float(z), scenario, method, spec) for z in z_grid)
    P_s = p_success_spatial(i, scenario, method, spec=spec)
    return ReliabilityResult(i.id, method, tuple(float(z) for z in z_grid), ps, P_s, outage(i, P_s))
