"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured numbers
before asserting, so ``pytest tests/test_acceptance.py -v`` doubles as a
report. Oracles are computed independently with mpmath where possible.
"""
import filecmp
import math
import time
from dataclasses import replace

import mpmath
import numpy as np
import pytest

from lpwa_plan import config
from lpwa_plan import montecarlo as mc
from lpwa_plan.cli import run_preset
from lpwa_plan.geometry import cell_edge_distance, pathloss
from lpwa_plan.interference import activity_factors, laplace_total
from lpwa_plan.lifetime import application_lifetime, expected_trials, network_cost
from lpwa_plan.optimize import (
    ProvisioningSolver,
    _evaluate_point,
    min_ap_density,
    operation_optimize,
    provision_curve,
    provision_optimize,
    replicas_for_power,
)
from lpwa_plan.reliability import (
    SuccessMethod,
    h_cluster,
    h_field,
    p_success_many,
    p_success_spatial,
)
from lpwa_plan.scenario import KM2, NormalScattering, PathlossModel, dbm_to_watts, reference_scenario


@pytest.fixture
def verdict(capsys):
    def emit(criterion, ok, text, started):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} [criterion {criterion}] {text} ({time.perf_counter() - started:.1f} s)")
    return emit


def _doc(name):
    return config.load_document(config.builtin_path(name))


# ---------------------------------------------------------------------------
# closed forms against quadrature


def _field_oracle(z, xi, delta=4):
    # ∫_R² 1 / (1 + (|x|/z)^δ / ξ) dx in polar form
    with mpmath.workdps(30):
        f = lambda r: 2 * mpmath.pi * r / (1 + (r / z) ** delta / xi)
        knee = z * mpmath.mpf(xi) ** (1.0 / delta)
        return float(mpmath.quad(f, [0, knee / 4, knee, 4 * knee, mpmath.inf]))


def test_field_term_closed_vs_quadrature(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for z in (50.0, 200.0, 1000.0, 3000.0, 8000.0):
        for xi in (0.01, 0.1, 1.0, 10.0, 100.0):
            ref = _field_oracle(z, xi)
            worst = max(worst, abs(h_field(z, xi, 4.0) / ref - 1.0))
    ok = worst <= 1e-6
    verdict(1, ok, f"field term vs quadrature on 5x5 (z, xi): max rel err {worst:.2e} (tol 1e-6)", t0)
    assert ok


def _cluster_oracle(z, xi, sigma):
    # self-convolved normal offsets: Normal(σ√2) in 2-D, density exp(-r²/(4σ²)) / (4πσ²)
    with mpmath.workdps(30):
        f = lambda r: (2 * mpmath.pi * r / (1 + (r / z) ** 4 / xi)
                       * mpmath.exp(-r * r / (4 * sigma**2)) / (4 * mpmath.pi * sigma**2))
        knee = z * mpmath.mpf(xi) ** 0.25
        pts = sorted({0, knee / 2, knee, 2 * knee, sigma, 4 * sigma, 12 * sigma})
        return float(mpmath.quad(f, pts + [mpmath.inf]))


def test_cluster_term_closed_vs_quadrature(verdict):
    t0 = time.perf_counter()
    sigma = 100.0
    worst = 0.0
    for z in (20.0, 100.0, 300.0, 600.0, 1000.0):
        for xi in (0.01, 0.1, 1.0, 10.0, 100.0):
            ref = _cluster_oracle(z, xi, sigma)
            worst = max(worst, abs(h_cluster(z, xi, sigma, saturation_cutoff=math.inf) / ref - 1.0))
    # where the cutoff replaces the term by 1
    cutoff_worst = 0.0
    for u in (20.0, 25.0, 40.0, 60.0, 100.0):
        for xi in (0.1, 1.0, 10.0):
            z = math.sqrt(u * 4 * sigma**2 / math.sqrt(xi))
            cutoff_worst = max(cutoff_worst, abs(h_cluster(z, xi, sigma) / _cluster_oracle(z, xi, sigma) - 1.0))
    ok = worst <= 1e-5 and cutoff_worst < 0.03
    verdict(2, ok, f"cluster term vs quadrature on 5x5: max rel err {worst:.2e} (tol 1e-5); "
                   f"cutoff region max rel err {cutoff_worst:.2e} (tol 3e-2)", t0)
    assert ok


def _spatial_oracle(t, sc, ell):
    """∫ p(r) dP_{d_ell}(r) for exponent-4 power law, each cluster class counted as a full collision."""
    ch = sc.network.channel
    lam_a = sc.network.ap_density
    noise = sc.noise_power(t) * ch.sinr_threshold / (ch.nakagami_omega * t.tx_power)
    field = 0.0
    intra = 0.0
    for k in sc.types:
        act = activity_factors(k, sc.network).same_code
        xi = ch.sinr_threshold * k.tx_power / (ch.nakagami_omega * t.tx_power)
        field += k.parent_density * act * math.sqrt(xi) * math.pi**2 / 2
        if k.id == t.id:
            intra = act
    with mpmath.workdps(30):
        def f(r):
            p = mpmath.exp(-noise / pathloss(ch.pathloss, float(r)) - field * r * r - intra)
            dens = 2 * (lam_a * mpmath.pi) ** ell * r ** (2 * ell - 1) * mpmath.exp(-lam_a * mpmath.pi * r * r)
            return p * dens / mpmath.factorial(ell - 1)
        scale = 1 / math.sqrt(lam_a * math.pi)
        return float(mpmath.quad(f, [0, scale / 4, scale, 3 * scale, 8 * scale, mpmath.inf]))


def test_spatial_closed_form_vs_numeric(verdict):
    t0 = time.perf_counter()
    base = reference_scenario().with_channel(pathloss=PathlossModel.from_db_law(133.0, 40.0, 1000.0))
    worst = worst_oracle = worst_alt = 0.0
    for ell_max in (1, 2):
        for lam in (2e-8, 5.5e-8, 2e-7):
            for dbm in (14.0, 21.0, 27.0):
                sc = base.with_network(ap_density=lam, ell_max=ell_max).with_type(1, tx_power=dbm_to_watts(dbm))
                t = sc.types[0]
                closed = p_success_spatial(t, sc, SuccessMethod.ClosedApprox, closed_form="corrected")
                numeric = p_success_spatial(t, sc, SuccessMethod.ClosedApprox, closed_form="none")
                fail = 1.0
                for ell in range(1, ell_max + 1):
                    fail *= 1.0 - _spatial_oracle(t, sc, ell)
                alt = p_success_spatial(t, sc, SuccessMethod.ClosedApprox, closed_form="alternate")
                worst = max(worst, abs(closed - numeric))
                worst_oracle = max(worst_oracle, abs(closed - (1.0 - fail)))
                worst_alt = max(worst_alt, abs(alt - numeric))
    ok = worst <= 1e-3
    verdict(3, ok, f"closed spatial success vs numeric integral over AP distance, 3x3 grid, ell_max 1 and 2: "
                   f"max abs err {worst:.2e} (tol 1e-3); vs mpmath oracle {worst_oracle:.2e}; "
                   f"alternate form deviates by up to {worst_alt:.3f}", t0)
    assert ok


# ---------------------------------------------------------------------------
# analytic against simulation


def test_distance_success_vs_simulation(verdict):
    t0 = time.perf_counter()
    doc = _doc("two_type_probe")
    sc = doc.scenario
    t = sc.type_by_id(1)
    z = np.array([zz for zz in doc.experiment.z_grid_m if 100.0 <= zz <= 3000.0])
    episodes = 100_000
    closed = p_success_many(t, z, sc, SuccessMethod.ClosedApprox)
    exact = p_success_many(t, z, sc, SuccessMethod.ExactNumericM1)
    est = mc.probe_success(sc, t, z, episodes, mc.OverlapModel.PointSample, seed=20240)
    p = np.array([e.p for e in est])
    se = np.array([e.se for e in est])
    gap = float(np.max(np.abs(closed - p)))
    zscore = float(np.max(np.abs(exact - p) / se))
    # the other overlap models, reported only
    others = []
    for model in (mc.OverlapModel.FractionalOverlap, mc.OverlapModel.HardCollision):
        alt = mc.probe_success(sc, t, z, episodes, model, seed=20241)
        others.append(f"{model.value} gap {np.max(np.abs(closed - [e.p for e in alt])):.3f}")
    ok = gap <= 0.05 and zscore <= 3.0
    verdict(4, ok, f"two-type success vs point-sample simulation ({episodes} episodes/bin, {z.size} bins): "
                   f"closed max gap {gap:.4f} (tol 0.05); exact max |dev|/SE {zscore:.2f} (tol 3); "
                   + "; ".join(others), t0)
    assert ok


def test_laplace_functional_vs_simulation(verdict):
    t0 = time.perf_counter()
    sc = reference_scenario()
    t = sc.types[0]
    ch = sc.network.channel
    d_eg = cell_edge_distance(sc.network.ap_density)
    s_edge = ch.sinr_threshold / (ch.nakagami_omega * t.tx_power * pathloss(ch.pathloss, d_eg))
    s_grid = [s_edge * f for f in (0.01, 0.1, 0.3, 1.0, 3.0, 10.0)]
    est = mc.estimate_laplace(sc, s_grid, episodes=100_000, seed=77, i=t, z=d_eg)
    zs = [abs(laplace_total(e.s, t, sc, z=d_eg) - e.value) / max(e.se, 1e-300) for e in est]
    worst = max(zs)
    ok = worst <= 3.0
    verdict(5, ok, f"interference Laplace functional vs simulation on 6 s values at the cell edge: "
                   f"max |dev|/SE {worst:.2f} (tol 3)", t0)
    assert ok


def test_outage_and_attempts_vs_replay(verdict):
    t0 = time.perf_counter()
    n, B, z = 2, 3, 2500.0
    sc = reference_scenario().with_type(1, replicas=n, retx_bound=B)
    t = sc.types[0]
    r = mc.replay_retransmissions(sc, t, z, episodes=100_000, overlap_model=mc.OverlapModel.FractionalOverlap,
                                  seed=31)
    p = r.p_hat
    predicted = (1.0 - p) ** (n * B)
    # delta method for the uncertainty of p̂ inside the prediction
    se_out = math.hypot(r.outage_se, n * B * (1.0 - p) ** (n * B - 1) * r.p_se)
    z_out = abs(r.outage - predicted) / se_out
    beta = expected_trials(p, n, B)
    h = 1e-6
    slope = (expected_trials(p + h, n, B) - expected_trials(p - h, n, B)) / (2 * h)
    se_beta = math.hypot(r.attempts_verbatim_se, slope * r.p_se)
    z_beta = abs(r.attempts_verbatim - beta) / se_beta
    ok = z_out <= 3.0 and z_beta <= 3.0
    verdict(6, ok, f"replay n={n}, B={B}, z={z:g} m, fractional overlap: outage {r.outage:.4f} vs "
                   f"{predicted:.4f} ({z_out:.2f} SE); verbatim attempts {r.attempts_verbatim:.4f} vs "
                   f"{beta:.4f} ({z_beta:.2f} SE); tol 3 SE", t0)
    assert ok


# ---------------------------------------------------------------------------
# optimizers


def test_provisioning_cost_curve_shape(verdict):
    t0 = time.perf_counter()
    doc = _doc("edge_tradeoff")
    cfg = doc.experiment
    sc = doc.scenario
    grid = np.geomspace(cfg.W_min_hz, cfg.W_max_hz, int(cfg.per_decade * math.log10(cfg.W_max_hz / cfg.W_min_hz)) + 1)
    rows = provision_curve(sc, grid, ProvisioningSolver.NumericBisection, constraint="cell_edge",
                           target=cfg.target_success)
    feasible = all(r[3] for r in rows)
    lam = np.array([r[1] for r in rows])
    cost = np.array([r[2] for r in rows])
    d = np.sign(np.diff(cost))
    d = d[d != 0]
    changes = int(np.sum(d[1:] != d[:-1]))
    interior = 0 < int(np.argmin(cost)) < len(cost) - 1
    decreasing = bool(np.all(np.diff(lam) < 0))
    ok = feasible and changes <= 1 and interior and decreasing
    verdict(7, ok, f"cost vs bandwidth, {len(rows)} points, cell-edge target {cfg.target_success}: "
                   f"{changes} sign change(s), minimum at W={grid[np.argmin(cost)]:.4g} Hz (interior={interior}); "
                   f"AP density decreasing={decreasing}", t0)
    assert ok


def _local_maxima(values):
    v = list(values)
    return sum(1 for j in range(len(v))
               if (j == 0 or v[j] > v[j - 1]) and (j == len(v) - 1 or v[j] > v[j + 1]))


def test_operation_replica_anchor(verdict):
    t0 = time.perf_counter()
    doc = _doc("two_type_equal")
    cfg = doc.experiment
    sc = doc.scenario
    sol = operation_optimize(sc, cfg.P_o_req, n_max=cfg.n_max, P_max=cfg.P_max_w, types=[cfg.type])
    pt = sol.for_type(cfg.type)
    alt = operation_optimize(sc, cfg.P_o_req, n_max=cfg.n_max, P_max=cfg.P_max_w, types=[cfg.type],
                             success_model="power_closed").for_type(cfg.type)
    curve = [_evaluate_point(sc, cfg.type, cfg.P_max_w, n, cfg.P_o_req, SuccessMethod.ClosedApprox, "none").lifetime
             for n in range(1, cfg.n_max + 1)]
    peaks = _local_maxima(curve)
    ok = pt.replicas == 2 and peaks == 1
    verdict(8, ok, f"two-type operation control: n*={pt.replicas} at P={pt.tx_power * 1e3:.2f} mW "
                   f"(closed power model: n*={alt.replicas}); lifetime vs n at {cfg.P_max_w * 1e3:g} mW has "
                   f"{peaks} local max, peak at n={int(np.argmax(curve)) + 1}", t0)
    assert ok


def _random_scenarios(seed, count=3):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        sc = reference_scenario((float(rng.uniform(0.8, 3.2)),), retx_bound=int(rng.integers(4, 9)))
        sc = sc.with_type(1, daughters_per_parent=float(rng.uniform(100, 300)),
                          reporting_period=float(rng.uniform(200, 600)),
                          scattering=NormalScattering(float(rng.uniform(60, 150))))
        out.append(sc)
    return out


def test_optimizers_vs_exhaustive_grid(verdict):
    t0 = time.perf_counter()
    notes = []
    ok = True
    for j, sc in enumerate(_random_scenarios(2024)):
        # provisioning: cost of the cheapest feasible AP density at each bandwidth
        W_range = (10e3, 1e6)
        grid = np.geomspace(*W_range, 64)
        step = math.log(grid[1] / grid[0])
        rows = provision_curve(sc, grid, constraint="cell_edge", target=0.5)
        costs = np.array([r[2] if r[3] else np.inf for r in rows])
        g_best = int(np.argmin(costs))
        sol = provision_optimize(sc, W_range=W_range, constraint="cell_edge", target=0.5)
        dist = abs(math.log(sol.bandwidth / grid[g_best])) / step
        prov_ok = sol.feasible and dist <= 1.0 and sol.cost <= costs[g_best] * (1 + 1e-9)
        # operation: lifetime with the smallest sufficient replica count at each power
        P_max, P_o = 0.126, 1e-2
        P_grid = np.geomspace(P_max / 1000, P_max, 64)
        pstep = math.log(P_grid[1] / P_grid[0])
        pts = [replicas_for_power(sc, 1, P, P_o, 8) for P in P_grid]
        life = np.array([p.lifetime if p is not None else -np.inf for p in pts])
        o_best = int(np.argmax(life))
        op = operation_optimize(sc, P_o, n_max=8, P_max=P_max).for_type(1)
        pdist = abs(math.log(op.tx_power / P_grid[o_best])) / pstep
        op_ok = op.feasible and pdist <= 1.0 and op.lifetime >= life[o_best] * (1 - 1e-9)
        ok &= prov_ok and op_ok
        notes.append(f"#{j + 1}: W off by {dist:.2f} steps, cost {sol.cost:.4g} vs grid {costs[g_best]:.4g}; "
                     f"P off by {pdist:.2f} steps, lifetime {op.lifetime:.5g} vs grid {life[o_best]:.5g}")
    verdict(9, ok, "optimizers vs 64-point exhaustive grids: " + " | ".join(notes), t0)
    assert ok


# ---------------------------------------------------------------------------
# determinism


def test_presets_identical_across_workers(tmp_path, verdict):
    t0 = time.perf_counter()
    two_type_probe = _doc("two_type_probe")
    two_type_probe = replace(two_type_probe, experiment=replace(two_type_probe.experiment, episodes=4000))
    small = _doc("reference").with_override("cost.area_km2", 16).with_override("network.ap_density_km2", 1.0)
    small = replace(small, experiment=replace(small.experiment, lambda_a_grid_km2=(0.5, 1.0, 2.0)))
    edge_tradeoff = _doc("edge_tradeoff")
    edge_tradeoff = replace(edge_tradeoff, experiment=replace(edge_tradeoff.experiment, per_decade=16))
    jobs = [
        ("validate-mc", two_type_probe, "validate", "mc"),
        ("tradeoff-mc", small, "tradeoff", "mc"),
        ("tradeoff", _doc("density_tradeoff"), "tradeoff", "closed"),
        ("provision", edge_tradeoff, "provision", "closed"),
        ("operate", _doc("two_type_equal"), "operate", "closed"),
        ("scale", _doc("scale_density"), "scale", "closed"),
    ]
    mismatched = []
    files = 0
    for name, doc, preset, method in jobs:
        outs = []
        for workers in (1, 4, 8):
            out = tmp_path / f"{name}-{workers}"
            status = run_preset(doc, preset, out, method=method, seed=5, reps=2, workers=workers)
            assert status == 0, f"{name} exited with {status}"
            outs.append(out)
        for csv_path in sorted(outs[0].glob("*.csv")):
            files += 1
            for other in outs[1:]:
                if not filecmp.cmp(csv_path, other / csv_path.name, shallow=False):
                    mismatched.append(f"{name}/{csv_path.name}")
    ok = not mismatched
    verdict(10, ok, f"{len(jobs)} preset runs, {files} CSV files compared under 1, 4 and 8 workers: "
                    + ("byte-identical" if ok else "differ: " + ", ".join(sorted(set(mismatched)))), t0)
    assert ok
