"""Pathloss, fading, scattering densities and small geometric helpers."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, SingularityError
from .numerics import normal_self_convolution
from .scenario import ChannelModel, NormalScattering, PathlossModel, UniformScattering

D_MIN = 1.0  # meters; power-law gains are evaluated at max(d, D_MIN)

# Rician/Gaussian mass beyond this many sigmas is below 1e-21
_NORMAL_SUPPORT = 10.0


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError("Point2D coordinates must be finite")

    @property
    def norm(self):
        return math.hypot(self.x, self.y)


def pathloss(model: PathlossModel, distance):
    """g(d) = 1/(alpha1 + alpha2 d^delta); raises at d=0 for a pure power law."""
    d = np.asarray(distance, dtype=float)
    if np.any(d < 0):
        raise DomainError("distance must be >= 0")
    if model.alpha1 == 0.0 and np.any(d == 0):
        raise SingularityError("power-law pathloss is singular at zero distance")
    g = 1.0 / (model.alpha1 + model.alpha2 * d**model.delta)
    return float(g) if g.ndim == 0 else g


def pathloss_clamped(model: PathlossModel, distance):
    """Pathloss with distances floored at D_MIN for the pure power law."""
    d = np.asarray(distance, dtype=float)
    if model.alpha1 == 0.0:
        d = np.maximum(d, D_MIN)
    g = 1.0 / (model.alpha1 + model.alpha2 * d**model.delta)
    return float(g) if g.ndim == 0 else g


def fading_pdf(channel: ChannelModel, q):
    """Nakagami-m power fading (Gamma) density with mean Omega."""
    m, omega = channel.nakagami_m, channel.nakagami_omega
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise DomainError("fading power must be >= 0")
    rate = m / omega
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = m * math.log(rate) - special.gammaln(m) + (m - 1) * np.log(q) - rate * q
        out = np.exp(logp)
    out = np.where(q == 0, rate if m == 1 else 0.0, out)
    return float(out) if out.ndim == 0 else out


def sample_fading(channel: ChannelModel, rng: np.random.Generator, size=None):
    """I.i.d. power fading draws from the Gamma(m, Omega/m) law."""
    m, omega = channel.nakagami_m, channel.nakagami_omega
    if m == 1:
        return rng.exponential(omega, size)
    return rng.gamma(m, omega / m, size)


def scattering_pdf(s, offset):
    """Density of a daughter offset; ``offset`` is a Point2D, a radius, or array of radii.

    The normal density is the unit-mass 2-D form exp(-r²/(2σ²))/(2πσ²).
    """
    r = offset.norm if isinstance(offset, Point2D) else np.asarray(offset, dtype=float)
    if isinstance(s, NormalScattering):
        out = np.exp(-(r**2) / (2 * s.sigma**2)) / (2 * math.pi * s.sigma**2)
    elif isinstance(s, UniformScattering):
        out = np.where(r <= s.radius, 1.0 / (math.pi * s.radius**2), 0.0)
    else:
        raise TypeError(f"unknown scattering density {s!r}")
    return float(out) if np.ndim(out) == 0 else out


def scattering_pdf_1d_norm(s: NormalScattering, offset):
    """Normal scattering with the 1-D normalization 1/sqrt(2πσ²), kept for comparison only."""
    r = offset.norm if isinstance(offset, Point2D) else np.asarray(offset, dtype=float)
    out = np.exp(-(r**2) / (2 * s.sigma**2)) / math.sqrt(2 * math.pi * s.sigma**2)
    return float(out) if np.ndim(out) == 0 else out


def self_convolution_pdf(s, r):
    """Density at radius ``r`` of the difference of two independent offsets."""
    r = np.asarray(r, dtype=float)
    if isinstance(s, NormalScattering):
        return scattering_pdf(normal_self_convolution(s.sigma), r)
    if isinstance(s, UniformScattering):
        R = s.radius
        v = np.clip(r, 0.0, 2 * R)
        lens = 2 * R**2 * np.arccos(v / (2 * R)) - 0.5 * v * np.sqrt(np.maximum(4 * R**2 - v**2, 0.0))
        out = np.where(r < 2 * R, lens / (math.pi * R**2) ** 2, 0.0)
        return float(out) if out.ndim == 0 else out
    raise TypeError(f"unknown scattering density {s!r}")


def self_convolution_support(s):
    if isinstance(s, NormalScattering):
        return _NORMAL_SUPPORT * math.sqrt(2.0) * s.sigma
    return 2.0 * s.radius


def sample_offsets(s, rng: np.random.Generator, n):
    """``n`` i.i.d. daughter offsets as an (n, 2) array."""
    if isinstance(s, NormalScattering):
        return rng.normal(0.0, s.sigma, size=(n, 2))
    if isinstance(s, UniformScattering):
        r = s.radius * np.sqrt(rng.random(n))
        th = rng.uniform(0.0, 2 * math.pi, n)
        return np.column_stack((r * np.cos(th), r * np.sin(th)))
    raise TypeError(f"unknown scattering density {s!r}")


def offset_distance_support(s, rho):
    """Interval outside which ``offset_distance_pdf`` vanishes (to 1e-21 for normal)."""
    if isinstance(s, NormalScattering):
        k = _NORMAL_SUPPORT * s.sigma
        return max(0.0, rho - k), rho + k
    return max(0.0, rho - s.radius), rho + s.radius


def offset_distance_breaks(s, rho):
    """Interior points where ``offset_distance_pdf`` changes character."""
    lo, hi = offset_distance_support(s, rho)
    if isinstance(s, NormalScattering):
        pts = rho + s.sigma * np.array([-6.0, -3.0, -1.5, 0.0, 1.5, 3.0, 6.0])
    else:
        pts = np.array([abs(s.radius - rho), rho])
    return [float(p) for p in pts if lo < p < hi]


def offset_distance_pdf(s, rho, d):
    """Density of |c + X| where |c| = rho and X is a scattering offset.

    Rician for the normal density; arc-length formula for the uniform disc.
    """
    d = np.asarray(d, dtype=float)
    if isinstance(s, NormalScattering):
        s2 = s.sigma**2
        with np.errstate(over="ignore", invalid="ignore"):
            out = (d / s2) * np.exp(-((d - rho) ** 2) / (2 * s2)) * special.i0e(d * rho / s2)
        out = np.where(d > 0, out, 0.0)
    elif isinstance(s, UniformScattering):
        R = s.radius
        area = math.pi * R**2
        with np.errstate(divide="ignore", invalid="ignore"):
            cosang = (d**2 + rho**2 - R**2) / (2 * d * rho)
            ang = 2.0 * np.arccos(np.clip(cosang, -1.0, 1.0))
        inside = d <= R - rho
        ang = np.where(inside, 2 * math.pi, ang)
        ang = np.where((d > rho + R) | (d < abs(rho - R)) & ~inside, 0.0, ang)
        out = d * ang / area
    else:
        raise TypeError(f"unknown scattering density {s!r}")
    return float(out) if out.ndim == 0 else out


def cell_edge_distance(ap_density):
    """Radius of a disc holding one AP on average, sqrt(1/(π λ_a))."""
    if not ap_density > 0:
        raise DomainError("AP density must be > 0")
    return math.sqrt(1.0 / (math.pi * ap_density))
