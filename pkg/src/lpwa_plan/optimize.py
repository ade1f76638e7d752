"""Cost-minimal provisioning of AP density and bandwidth, and lifetime-maximal
operation control of transmit power and replica count.

Every solution returned here is re-checked against the quadrature path of
the reliability module, whichever solver produced it.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, Infeasible, InfeasibleBandwidth, Unsatisfiable
from .geometry import cell_edge_distance
from .interference import activity_factors
from .lifetime import application_lifetime, network_cost
from .reliability import SuccessMethod, intra_factor_full_collision, outage, p_success_at, p_success_spatial
from .scenario import IoTTypeSpec, Scenario

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class ProvisioningSolver(enum.Enum):
    ClosedForm = "closed"
    NumericBisection = "numeric"


@dataclass(frozen=True)
class ProvisioningSolution:
    ap_density: float
    bandwidth: float
    cost: float
    feasible: bool
    method: ProvisioningSolver
    constraint_slack: dict = field(default_factory=dict)
    curve: tuple = ()


@dataclass(frozen=True)
class OperatingPoint:
    type_id: int
    replicas: int
    tx_power: float
    lifetime: float
    P_s: float
    P_o: float
    feasible: bool


@dataclass(frozen=True)
class OperationSolution:
    points: tuple
    feasible: bool
    rounds: int = 1
    scenario: Scenario | None = None

    def for_type(self, k):
        for p in self.points:
            if p.type_id == k:
                return p
        raise KeyError(k)


def golden_section(f, a, b, tol=1e-6, max_iter=200):
    """Minimizer of a quasi-convex ``f`` on [a, b]; returns (x, f(x))."""
    if a > b:
        a, b = b, a
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def required_success(P_o_req, n, B):
    """Per-replica success needed so that n·B independent replicas meet the outage target."""
    if not 0.0 < P_o_req < 1.0:
        raise DomainError("P_o_req must lie in (0, 1)")
    return 1.0 - P_o_req ** (1.0 / (n * B))


# ---------------------------------------------------------------------------
# provisioning


def _code_factor_terms(scenario: Scenario, verbatim):
    """Weights turning a type's total activity into the A1 and A2 code factors."""
    net = scenario.network
    codes = net.code_count
    if verbatim:
        f = (codes - 1) / codes
        return f, f
    same, cross = 1.0 / codes, (codes - 1) / codes
    own = same + (cross if net.rejection_factor > 0 else 0.0)
    field_w = same + cross * math.sqrt(net.rejection_factor)
    return own, field_w


def tradeoff_coefficients(i: IoTTypeSpec, scenario: Scenario, verbatim=False):
    """(noise term, A1, A2) of the closed bandwidth/AP-density expression.

    ``verbatim`` keeps the alternate factors as written, including the
    (ϖ−1)/ϖ code factor and the type-i density and packet time inside A2.
    """
    ch = scenario.network.channel
    alpha = ch.pathloss.alpha
    noise = scenario.noise_power(i) * ch.sinr_threshold / (math.pi * ch.nakagami_omega * i.tx_power * alpha)
    own_w, field_w = _code_factor_terms(scenario, verbatim)
    a1 = i.daughters_per_parent * i.duty_cycle * own_w * i.signal_bandwidth
    a2 = 0.0
    for k in scenario.types:
        tau = i.packet_time if verbatim else k.packet_time
        lam = i.parent_density if verbatim else k.parent_density
        ratio = math.sqrt(k.tx_power * ch.sinr_threshold / (i.tx_power * ch.nakagami_omega))
        share = k.daughters_per_parent * k.replicas * tau / k.reporting_period * k.signal_bandwidth
        w = field_w if k.in_phi else (1.0 if verbatim else math.sqrt(scenario.network.rejection_factor))
        a2 += share * w * lam * ratio * math.pi / 2.0
    return noise, a1, a2


def min_bandwidth(i: IoTTypeSpec, scenario: Scenario, P_s_req, verbatim=False):
    _, a1, _ = tradeoff_coefficients(i, scenario, verbatim)
    ratio = 0.5 * math.sqrt(math.pi) / P_s_req
    if ratio <= 1.0:
        raise InfeasibleBandwidth("required success too high for the closed tradeoff expression")
    return a1 / math.log(ratio)


def lambda_a_of_W(W, i: IoTTypeSpec, scenario: Scenario, P_s_req, verbatim=False):
    """AP density that meets ``P_s_req`` at system bandwidth ``W`` (closed expression)."""
    noise, a1, a2 = tradeoff_coefficients(i, scenario, verbatim)
    w_min = min_bandwidth(i, scenario, P_s_req, verbatim)
    if W <= w_min:
        raise InfeasibleBandwidth(f"bandwidth {W:g} Hz is at or below the minimum {w_min:g} Hz")
    denom = 0.5 * math.sqrt(math.pi) / P_s_req * math.exp(-a1 / W) - 1.0
    return (noise + a2 / W) / denom


def _constraint_fn(scenario: Scenario, constraint, targets, method, closed_form):
    """Returns check(sc) -> dict of slack per served type (>= 0 means satisfied)."""

    def check(sc):
        out = {}
        for t in sc.served:
            if constraint == "cell_edge":
                d = cell_edge_distance(sc.network.ap_density)
                out[t.id] = p_success_at(t, d, sc, method) - targets[t.id]
            else:
                P_s = p_success_spatial(t, sc, method, closed_form=closed_form)
                out[t.id] = targets[t.id] - outage(t, P_s)
        return out

    return check


def _targets(scenario, P_o_req, constraint, target):
    if constraint == "cell_edge":
        if target is None:
            raise DomainError("cell_edge constraint needs a target success probability")
        return {t.id: float(target) for t in scenario.served}
    if P_o_req is None:
        raise DomainError("outage constraint needs P_o_req")
    if isinstance(P_o_req, dict):
        return {t.id: float(P_o_req[t.id]) for t in scenario.served}
    return {t.id: float(P_o_req) for t in scenario.served}


def min_ap_density(scenario: Scenario, check, lam_lo=1e-10, lam_hi=1e-4, rel_tol=1e-7):
    """Smallest AP density meeting every constraint, by bisection in log density."""
    if min(check(scenario.with_network(ap_density=lam_hi)).values()) < 0:
        return None
    if min(check(scenario.with_network(ap_density=lam_lo)).values()) >= 0:
        return lam_lo
    lo, hi = math.log(lam_lo), math.log(lam_hi)
    while hi - lo > rel_tol:
        mid = 0.5 * (lo + hi)
        if min(check(scenario.with_network(ap_density=math.exp(mid))).values()) >= 0:
            hi = mid
        else:
            lo = mid
    return math.exp(hi)


def _w_grid(W_range, per_decade):
    lo, hi = W_range
    n = max(2, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, n)


def provision_curve(scenario: Scenario, W_grid, solver=ProvisioningSolver.NumericBisection, P_o_req=None,
                    constraint="outage", target=None, method=SuccessMethod.ClosedApprox,
                    closed_form="none", verbatim=False):
    """(W, λ_a*, cost, feasible) rows for each bandwidth in ``W_grid``."""
    targets = _targets(scenario, P_o_req, constraint, target)
    check = _constraint_fn(scenario, constraint, targets, method, closed_form)
    rows = []
    for W in W_grid:
        sc = scenario.with_network(system_bandwidth=float(W))
        lam = _lambda_for(sc, solver, targets, constraint, check, verbatim)
        if lam is None:
            rows.append((float(W), math.nan, math.nan, False))
        else:
            rows.append((float(W), lam, network_cost(sc.with_network(ap_density=lam)), True))
    return rows


def _lambda_for(sc, solver, targets, constraint, check, verbatim):
    if solver is ProvisioningSolver.ClosedForm:
        lam = 0.0
        for t in sc.served:
            if constraint == "cell_edge":
                p_req = targets[t.id]
            else:
                p_req = required_success(targets[t.id], t.replicas, t.retx_bound)
            try:
                lam = max(lam, lambda_a_of_W(sc.network.system_bandwidth, t, sc, p_req, verbatim))
            except InfeasibleBandwidth:
                return None
        return lam
    return min_ap_density(sc, check)


def provision_optimize(scenario: Scenario, P_o_req=None, W_range=(10e3, 1e6),
                       solver=ProvisioningSolver.NumericBisection, constraint="outage", target=None,
                       method=SuccessMethod.ClosedApprox, closed_form="none", per_decade=64,
                       verbatim=False) -> ProvisioningSolution:
    """Minimize network cost over (λ_a, W) subject to the reliability constraint.

    ``constraint="outage"`` bounds each served type's outage by ``P_o_req``;
    ``constraint="cell_edge"`` requires success ``target`` at the cell-edge
    distance. The result is always re-verified with the quadrature path.
    """
    targets = _targets(scenario, P_o_req, constraint, target)
    check = _constraint_fn(scenario, constraint, targets, method, closed_form)
    grid = _w_grid(W_range, per_decade)
    rows = provision_curve(scenario, grid, solver, P_o_req, constraint, target, method, closed_form, verbatim)
    feas = [r for r in rows if r[3]]
    if not feas:
        raise Infeasible("no bandwidth in range admits a feasible AP density")

    def cost_at(logW):
        sc = scenario.with_network(system_bandwidth=math.exp(logW))
        lam = _lambda_for(sc, solver, targets, constraint, check, verbatim)
        if lam is None:
            return math.inf
        return network_cost(sc.with_network(ap_density=lam))

    best = min(range(len(rows)), key=lambda j: rows[j][2] if rows[j][3] else math.inf)
    lo = math.log(rows[max(best - 1, 0)][0])
    hi = math.log(rows[min(best + 1, len(rows) - 1)][0])
    logW, cost = golden_section(cost_at, lo, hi, tol=1e-7)
    if not cost <= rows[best][2]:
        logW, cost = math.log(rows[best][0]), rows[best][2]
    W = math.exp(logW)
    sc = scenario.with_network(system_bandwidth=W)
    lam = _lambda_for(sc, solver, targets, constraint, check, verbatim)
    final = sc.with_network(ap_density=lam)
    # verification always uses quadrature of the per-distance success
    verify = _constraint_fn(scenario, constraint, targets, method, "none")
    slack = verify(final)
    feasible = min(slack.values()) >= -1e-9
    return ProvisioningSolution(lam, W, network_cost(final), feasible, solver, slack, tuple(rows))


# ---------------------------------------------------------------------------
# operation control


def operation_coefficients(i: IoTTypeSpec, scenario: Scenario):
    """(D0, D1, noise coefficient) of the closed success-vs-power expression."""
    net = scenario.network
    ch = net.channel
    lam_a = net.ap_density
    d0 = 0.5 * math.sqrt(math.pi) * lam_a * math.pi * intra_factor_full_collision(i, scenario)
    d1 = 0.0
    for k in scenario.types:
        act = activity_factors(k, net)
        mass = act.same_code + act.cross_code * math.sqrt(net.rejection_factor)
        d1 += k.parent_density * mass * math.sqrt(k.tx_power * ch.sinr_threshold / ch.nakagami_omega) * math.pi**2 / 2
    noise = scenario.noise_power(i) * ch.sinr_threshold / (ch.nakagami_omega * ch.pathloss.alpha)
    return d0, d1, noise


def success_of_power(P, i: IoTTypeSpec, scenario: Scenario):
    d0, d1, noise = operation_coefficients(i, scenario)
    return d0 / (d1 / math.sqrt(P) + scenario.network.ap_density * math.pi + noise / P)


def n_of_P(P, i: IoTTypeSpec, scenario: Scenario, P_o_req, B=None, n_max=None, P_s=None):
    """Smallest replica count meeting the outage target at power ``P``.

    ``P_s`` defaults to the closed success-vs-power expression.
    """
    B = i.retx_bound if B is None else B
    if P_s is None:
        P_s = success_of_power(P, i, scenario)
    if not 0.0 < P_s:
        raise Unsatisfiable("success probability is zero at this power")
    if P_s >= 1.0:
        return 1
    n = max(1, math.ceil(math.log(P_o_req ** (1.0 / B)) / math.log(1.0 - P_s) - 1e-12))
    if n_max is not None and n > n_max:
        raise Unsatisfiable(f"{n} replicas needed at {P:g} W, above the cap {n_max}")
    return n


def p_min(i: IoTTypeSpec, scenario: Scenario, P_o_req, n_max, B=None, alternate_root=False):
    """Lowest power at which n_max replicas meet the outage target (closed expression).

    Solves c·t² + D1·t + N = 0 for t = √P with c = λ_aπ − D0/P_s^req < 0.
    ``alternate_root=True`` evaluates the other root sign with the noise constant
    lacking the exponent factor, kept for comparison.
    """
    B = i.retx_bound if B is None else B
    d0, d1, noise = operation_coefficients(i, scenario)
    ps_req = required_success(P_o_req, n_max, B)
    c = scenario.network.ap_density * math.pi - d0 / ps_req
    if alternate_root:
        ch = scenario.network.channel
        n_pr = scenario.noise_power(i) * ch.sinr_threshold / (ch.nakagami_omega * math.pi)
        disc = d1 * d1 - 4 * n_pr * c
        return ((-d1 + math.sqrt(disc)) / (2 * c)) ** 2
    if c >= 0:
        raise Infeasible("required success exceeds the interference-free limit of the closed expression")
    disc = d1 * d1 - 4.0 * noise * c
    t = (d1 + math.sqrt(disc)) / (-2.0 * c)
    return t * t


def _evaluate_point(scenario, i_id, P, n, P_o_req, method, closed_form, success_model="spatial"):
    sc = scenario.with_type(i_id, tx_power=float(P), replicas=int(n))
    t = sc.type_by_id(i_id)
    if success_model == "power_closed":
        P_s = min(success_of_power(P, t, sc), 1.0)
    else:
        P_s = p_success_spatial(t, sc, method, closed_form=closed_form)
    P_o = outage(t, P_s)
    life = application_lifetime(t, sc, P_s=P_s).app_lifetime
    return OperatingPoint(i_id, int(n), float(P), life, P_s, P_o, P_o <= P_o_req + 1e-12)


def lifetime_grid(scenario, i_id, P_grid, n_values, P_o_req, method=SuccessMethod.ClosedApprox,
                  closed_form="none"):
    return [[_evaluate_point(scenario, i_id, P, n, P_o_req, method, closed_form) for n in n_values]
            for P in P_grid]


def replicas_for_power(scenario, i_id, P, P_o_req, n_max, method=SuccessMethod.ClosedApprox, closed_form="none",
                       success_model="spatial"):
    """Operating point with the smallest replica count meeting the outage target at power ``P``.

    Success is re-evaluated at each candidate count, since extra replicas
    also raise the type's own activity. Returns None when no count up to
    ``n_max`` is enough.
    """
    for n in range(1, n_max + 1):
        pt = _evaluate_point(scenario, i_id, P, n, P_o_req, method, closed_form, success_model)
        if pt.feasible:
            return pt
    return None


def power_grid(P_lo, P_max, step_db):
    if P_lo >= P_max:
        return np.array([P_max])
    npts = max(2, int(round(10 * math.log10(P_max / P_lo) / step_db)) + 1)
    return np.geomspace(P_lo, P_max, npts)


def _replica_segments(count_at, lo, hi, rel_tol=1e-9):
    """Split [lo, hi] into pieces on which ``count_at`` is constant, by bisection in log P."""
    out = []
    n_lo = count_at(lo)
    while True:
        n_hi = count_at(hi)
        if n_hi == n_lo:
            out.append((lo, hi, n_lo))
            return out
        a, b = math.log(lo), math.log(hi)
        while b - a > rel_tol:
            m = 0.5 * (a + b)
            if count_at(math.exp(m)) == n_lo:
                a = m
            else:
                b = m
        out.append((lo, math.exp(a), n_lo))
        lo, n_lo = math.exp(b), count_at(math.exp(b))


def _optimize_one(scenario, i_id, P_o_req, n_max, P_max, P_lo, step_db, method, closed_form, success_model):
    P_grid = power_grid(P_lo, P_max, step_db)
    pts = [replicas_for_power(scenario, i_id, P, P_o_req, n_max, method, closed_form, success_model)
           for P in P_grid]
    feas = [(pt, a) for a, pt in enumerate(pts) if pt is not None]
    if not feas:
        raise Infeasible(f"no power in [{P_lo:g}, {P_max:g}] W meets the outage target for type {i_id}")
    best, a = max(feas, key=lambda x: x[0].lifetime)
    lo, hi = P_grid[max(a - 1, 0)], P_grid[min(a + 1, len(P_grid) - 1)]
    if not hi > lo:
        return best

    def count_at(P):
        pt = replicas_for_power(scenario, i_id, P, P_o_req, n_max, method, closed_form, success_model)
        return None if pt is None else pt.replicas

    # lifetime jumps where the replica count changes, so refine each constant-count piece on its own
    for seg_lo, seg_hi, n in _replica_segments(count_at, lo, hi):
        if n is None:
            continue
        at = lambda logP: _evaluate_point(scenario, i_id, math.exp(logP), n, P_o_req, method,  # noqa: E731
                                          closed_form, success_model)
        cands = [at(math.log(seg_lo)), at(math.log(seg_hi))]
        if seg_hi > seg_lo:
            logP, _ = golden_section(lambda v: -at(v).lifetime, math.log(seg_lo), math.log(seg_hi), tol=1e-9)
            cands.append(at(logP))
        for pt in cands:
            if pt.feasible and pt.lifetime > best.lifetime:
                best = pt
    return best


def operation_optimize(scenario: Scenario, P_o_req, n_max=8, P_max=0.126, P_lo=None, types=None,
                       method=SuccessMethod.ClosedApprox, closed_form="none", step_db=0.5,
                       round_robin=False, max_rounds=10, success_model="spatial") -> OperationSolution:
    """Maximize each served type's application lifetime over transmit power.

    At each power the replica count is the smallest one meeting the outage
    target, so the search is one-dimensional in P. Types are optimized one at a time with the others held fixed; with
    ``round_robin`` the sweep repeats until no type changes.

    ``success_model="spatial"`` scores each (P, n) with the spatially
    averaged success probability; ``"power_closed"`` uses the closed
    success-vs-power expression instead. The returned points are always
    re-scored with the quadrature path.
    """
    if success_model not in ("spatial", "power_closed"):
        raise DomainError(f"unknown success model {success_model!r}")
    ids = [t.id for t in scenario.served] if types is None else list(types)
    P_lo = P_max / 1000.0 if P_lo is None else P_lo
    if not 0 < P_lo <= P_max:
        raise DomainError("need 0 < P_lo <= P_max")
    targets = P_o_req if isinstance(P_o_req, dict) else {k: P_o_req for k in ids}
    sc = scenario
    points = {}
    rounds = 0
    for rounds in range(1, (max_rounds if round_robin else 1) + 1):
        changed = False
        for k in ids:
            pt = _optimize_one(sc, k, targets[k], n_max, P_max, P_lo, step_db, method, closed_form, success_model)
            prev = points.get(k)
            if prev is None or prev.replicas != pt.replicas or abs(prev.tx_power - pt.tx_power) > 1e-9 * P_max:
                changed = True
            points[k] = pt
            sc = sc.with_type(k, tx_power=pt.tx_power, replicas=pt.replicas)
        if not changed and rounds > 1:
            break
    # final re-evaluation against the quadrature path in the final joint scenario
    final = tuple(_evaluate_point(sc, k, points[k].tx_power, points[k].replicas, targets[k], method, "none")
                  for k in ids)
    return OperationSolution(final, all(p.feasible for p in final), rounds, sc)
