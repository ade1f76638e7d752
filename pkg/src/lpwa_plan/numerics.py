"""Quadrature and special functions used by the analytic formulas."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NonConvergence
from .scenario import NormalScattering

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and truncation for numeric integrals.

    ``truncation_radius=None`` means "use the service-area diagonal" and is
    resolved by callers that know the scenario.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    truncation_radius: float | None = None
    max_subdivisions: int = 2**20

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("quadrature tolerances must be > 0")
        if self.truncation_radius is not None and not self.truncation_radius > 0:
            raise DomainError("truncation radius must be > 0")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


DEFAULT_QUADRATURE = QuadratureSpec()


def integrate_1d(f, a, b, spec: QuadratureSpec = DEFAULT_QUADRATURE, points=None):
    """Adaptive Gauss-Kronrod integral of ``f`` over ``[a, b]``; ``b`` may be ``inf``.

    Raises NonConvergence when the subdivision budget is exhausted or the
    reported error exceeds the requested tolerance.
    """
    if a == b:
        return 0.0
    kw = dict(epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_subdivisions, full_output=1)
    if points is not None and math.isfinite(b):
        pts = [p for p in points if a < p < b]
        if pts:
            kw["points"] = pts
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, **kw)
    value, err = out[0], out[1]
    if len(out) > 3:
        bound = max(spec.abs_tol, spec.rel_tol * abs(value))
        ier_msg = out[3]
        # ier=2 (roundoff) is routinely benign when the error estimate is small
        if out[2].get("last", 0) >= spec.max_subdivisions or err > 100 * bound:
            raise NonConvergence(f"integral over [{a}, {b}] did not converge: {ier_msg}")
    return value


def integrate_radial_2d(f, spec: QuadratureSpec = DEFAULT_QUADRATURE, isotropic=False, points=None):
    """Integral over the disc of radius ``spec.truncation_radius`` (all of R² if None).

    ``f(r, theta)`` in general; with ``isotropic=True`` ``f(r)`` only, and the
    angular integral collapses to a factor 2π.
    """
    R = spec.truncation_radius if spec.truncation_radius is not None else math.inf
    if isotropic:
        return 2.0 * math.pi * integrate_1d(lambda r: f(r) * r, 0.0, R, spec, points)

    def ring(r):
        return r * integrate_1d(lambda th: f(r, th), 0.0, 2.0 * math.pi, spec)

    return integrate_1d(ring, 0.0, R, spec, points)


def sine_integral(x):
    """si(x) = -∫_x^∞ sin(t)/t dt, i.e. Si(x) - π/2."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("sine_integral requires x >= 0")
    si, _ = special.sici(x)
    out = si - math.pi / 2
    return float(out) if out.ndim == 0 else out


def cosine_integral(x):
    """ci(x) = -∫_x^∞ cos(t)/t dt (defined for x > 0)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("cosine_integral requires x > 0")
    _, ci = special.sici(x)
    return float(ci) if ci.ndim == 0 else ci


def erf(x):
    out = special.erf(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def _tail_moment_scaled_closed(a, n):
    # I_n(a) = ∫_0^∞ t^n exp(-t² - 2at) dt, via 2 I_{n+1} + 2a I_n = n I_{n-1}
    i0 = 0.5 * SQRT_PI * special.erfcx(a)
    if n == 0:
        return i0
    i1 = 0.5 - a * i0
    vals = [i0, i1]
    for k in range(1, n):
        vals.append((k * vals[k - 1] - 2.0 * a * vals[k]) / 2.0)
    return vals[n]


def gaussian_tail_moment_scaled(x3, ell, spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """exp(x3²) · ∫_{x3}^∞ (z - x3)^(ell-1) exp(-z²) dz, free of over/underflow."""
    if ell < 1:
        raise DomainError("ell must be >= 1")
    n = ell - 1
    # the recursion loses digits as x3 grows; past 8 it drops below ~1e-11
    if n == 0 or (n <= 3 and x3 < 8.0):
        return float(_tail_moment_scaled_closed(float(x3), n))
    # values can sit far below the default absolute tolerance, so only the relative one applies
    rel = QuadratureSpec(spec.rel_tol, 1e-300, None, spec.max_subdivisions)
    f = lambda t: t**n * math.exp(-t * t - 2.0 * x3 * t)  # noqa: E731
    if x3 < 0:
        return integrate_1d(f, 0.0, math.inf, rel)
    h = 1.0 / (1.0 + x3)
    edges = (0.0, h, 8.0 * h * (n + 1), math.inf)
    return sum(integrate_1d(f, a, b, rel) for a, b in zip(edges, edges[1:]))


def gaussian_tail_moment(x3, ell, lower=None, spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """∫_L^∞ (z - x3)^(ell-1) exp(-z²) dz with lower limit ``L`` (default ``x3``).

    Closed form through erfc/exp for ell <= 4 when ``L = x3``; otherwise
    adaptive quadrature.
    """
    if ell < 1:
        raise DomainError("ell must be >= 1")
    if lower is None or lower == x3:
        if ell <= 4:
            # the unscaled recursion cancels for positive x3 once ell >= 2
            if x3 > 26.0 or (ell > 1 and x3 > 0.5):
                return gaussian_tail_moment_scaled(x3, ell, spec) * math.exp(-x3 * x3)
            n = ell - 1
            e = math.exp(-x3 * x3)
            g0 = 0.5 * SQRT_PI * math.erfc(x3)
            if n == 0:
                return g0
            g = [g0, 0.5 * e - x3 * g0]
            for k in range(1, n):
                g.append((k * g[k - 1] - 2.0 * x3 * g[k]) / 2.0)
            return g[n]
        return gaussian_tail_moment_scaled(x3, ell, spec) * math.exp(-x3 * x3)
    n = ell - 1
    return integrate_1d(lambda z: (z - x3) ** n * math.exp(-z * z), lower, math.inf, spec)


def normal_self_convolution(sigma):
    """Density of the difference of two independent normal offsets.

    Per-coordinate variance doubles, so the result is Normal(σ√2), i.e.
    exp(-|x|²/(4σ²)) / (4πσ²).
    """
    if not sigma > 0:
        raise DomainError("sigma must be > 0")
    return NormalScattering(sigma * math.sqrt(2.0))


@lru_cache(maxsize=None)
def gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


def panel_nodes(breaks, n=24):
    """Nodes and weights of composite n-point Gauss-Legendre over consecutive breaks."""
    x, w = gauss_legendre(n)
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()
