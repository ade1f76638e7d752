"""Experiment presets and the ``lpwa-plan`` command line."""
from __future__ import annotations

import argparse
import csv
import enum
import json
import logging
import math
import platform
import sys
import time
from dataclasses import asdict, replace
from importlib import metadata
from pathlib import Path

import numpy as np

from . import montecarlo as mc
from .config import ExperimentSettings, ScenarioDocument, builtin_names, builtin_path, load_document
from .errors import Infeasible, PlanningError
from .geometry import cell_edge_distance
from .lifetime import application_lifetime, network_cost
from .optimize import (
    ProvisioningSolver,
    power_grid,
    min_ap_density,
    operation_optimize,
    provision_curve,
    provision_optimize,
)
from .reliability import SuccessMethod, outage, p_success_at, p_success_many, p_success_spatial
from .scenario import KM2, Scenario

log = logging.getLogger("lpwa_plan")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


class ExperimentPreset(enum.Enum):
    Validate = "validate"
    Tradeoff = "tradeoff"
    ProvisionMap = "provision"
    Operate = "operate"
    Scale = "scale"
    Sweep = "sweep"


_METHODS = {"closed": SuccessMethod.ClosedApprox, "numeric": SuccessMethod.ExactNumericM1}
_OVERLAP = {"point": mc.OverlapModel.PointSample, "fractional": mc.OverlapModel.FractionalOverlap,
            "hard": mc.OverlapModel.HardCollision}


class _Run:
    """Per-invocation context: output directory, seeds, collected file names."""

    def __init__(self, doc: ScenarioDocument, out: Path, method, seed, reps, workers):
        self.doc = doc
        self.sc = doc.scenario
        self.cfg = doc.experiment
        self.out = out
        self.method = method
        self.seed = self.sc.rng_seed if seed is None else int(seed)
        self.reps = max(1, int(reps))
        self.workers = workers
        self.files = []
        self.result = {}

    def row_seed(self, *keys):
        return np.random.SeedSequence([self.seed, *keys]).generate_state(1)[0]

    def focus(self, sc=None):
        sc = self.sc if sc is None else sc
        return sc.type_by_id(self.cfg.type)

    def success_method(self):
        if self.method == "mc":
            return SuccessMethod.ClosedApprox
        return _METHODS[self.method]

    def write(self, name, header, rows, plot):
        path = self.out / f"{name}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
        side = self.out / f"{name}.plot.json"
        side.write_text(json.dumps(plot, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.files += [path.name, side.name]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _versions():
    out = {"python": platform.python_version(), "numpy": np.__version__}
    for pkg in ("scipy", "mpmath"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            pass
    try:
        out["lpwa_plan"] = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        out["lpwa_plan"] = "unknown"
    return out


# ---------------------------------------------------------------------------
# presets


def _validate(run: _Run):
    cfg = run.cfg
    z = np.asarray(cfg.z_grid_m, dtype=float)
    model = _OVERLAP[cfg.overlap_model]
    rows = []
    for t in run.sc.served:
        closed = p_success_many(t, z, run.sc, SuccessMethod.ClosedApprox)
        if run.sc.network.channel.nakagami_m == 1:
            numeric = p_success_many(t, z, run.sc, SuccessMethod.ExactNumericM1)
        else:
            numeric = np.full(z.size, math.nan)
        hits = np.zeros(z.size)
        for r in range(run.reps):
            est = mc.probe_success(run.sc, t, z, cfg.episodes, model, run.row_seed(t.id, r), workers=run.workers)
            hits += np.array([e.p for e in est]) * cfg.episodes
        n = cfg.episodes * run.reps
        p_mc = hits / n
        se = np.sqrt(p_mc * (1 - p_mc) / n)
        for j in range(z.size):
            rows.append((z[j], t.id, closed[j], numeric[j], p_mc[j], se[j], "closed|numeric|mc"))
    gaps = [abs(r[2] - r[4]) for r in rows]
    run.result = {"max_gap_closed_mc": max(gaps), "overlap_model": cfg.overlap_model, "episodes_per_point": n}
    run.write("validate", ("z_m", "type", "p_s_closed", "p_s_numeric", "p_s_mc", "mc_se", "method"), rows,
              {"x": "z_m", "y": ["p_s_closed", "p_s_numeric", "p_s_mc"], "error": {"p_s_mc": "mc_se"},
               "group": "type", "xlabel": "distance to AP [m]", "ylabel": "success probability"})
    return EXIT_OK


def _tradeoff_row(run: _Run, sc: Scenario, key):
    t = run.focus(sc)
    if run.method == "mc":
        spec = mc.CampaignSpec(replications=run.reps, seed=int(run.row_seed(*key)),
                               overlap_model=_OVERLAP[run.cfg.overlap_model], workers=run.workers)
        st = mc.run_campaign(sc, spec).for_type(t.id)
        P_s, P_o = st.P_s, st.P_o
    else:
        P_s = p_success_spatial(t, sc, run.success_method())
        P_o = outage(t, P_s)
    life = application_lifetime(t, sc, P_s=P_s).app_lifetime
    return network_cost(sc), life, P_s, P_o


def _tradeoff(run: _Run):
    rows = []
    for j, lam in enumerate(run.cfg.lambda_a_grid_km2):
        sc = run.sc.with_network(ap_density=lam / KM2)
        cost, life, P_s, P_o = _tradeoff_row(run, sc, (0, j))
        rows.append((lam / KM2, cost, life, P_s, P_o, run.method))
    run.write("tradeoff", ("lambda_a", "cost", "lifetime_s", "P_s", "P_o", "method"), rows,
              {"x": "lambda_a", "y": ["cost", "lifetime_s", "P_s", "P_o"], "xscale": "log",
               "xlabel": "AP density [1/m^2]"})
    return EXIT_OK


def _sweep(run: _Run):
    cfg = run.cfg
    if not cfg.sweep_path or not cfg.sweep_values:
        raise PlanningError("sweep needs sweep_path and sweep_values in [experiment]")
    rows = []
    for j, v in enumerate(cfg.sweep_values):
        sc = run.doc.with_override(cfg.sweep_path, v).scenario
        cost, life, P_s, P_o = _tradeoff_row(run, sc, (1, j))
        rows.append((v, sc.network.ap_density, cost, life, P_s, P_o, run.method))
    run.write("sweep", ("swept_value", "lambda_a", "cost", "lifetime_s", "P_s", "P_o", "method"), rows,
              {"x": "swept_value", "y": ["cost", "lifetime_s", "P_s", "P_o"], "xlabel": cfg.sweep_path})
    return EXIT_OK


def _provision(run: _Run):
    cfg = run.cfg
    if run.method == "mc":
        raise PlanningError("the provisioning preset supports closed and numeric methods only")
    solver = ProvisioningSolver.ClosedForm if cfg.solver == "closed_form" else ProvisioningSolver.NumericBisection
    kw = dict(P_o_req=cfg.P_o_req, constraint=cfg.constraint, target=cfg.target_success,
              method=run.success_method())
    W_range = (cfg.W_min_hz, cfg.W_max_hz)
    grid = np.geomspace(*W_range, max(2, int(math.ceil(cfg.per_decade * math.log10(W_range[1] / W_range[0]))) + 1))
    curve = provision_curve(run.sc, grid, solver, **kw)
    run.write("provision", ("W_hz", "lambda_a_min", "cost", "feasible", "method"),
              [(*r, run.method) for r in curve],
              {"x": "W_hz", "y": ["lambda_a_min", "cost"], "xscale": "log", "yscale": "log",
               "mask": "feasible", "xlabel": "system bandwidth [Hz]"})
    # success over the density-bandwidth plane at the cell edge
    t = run.focus()
    lam_grid = np.geomspace(run.sc.network.ap_density / 4, run.sc.network.ap_density * 16, 17)
    target = cfg.target_success
    rows = []
    for W in np.geomspace(*W_range, 17):
        for lam in lam_grid:
            sc = run.sc.with_network(ap_density=float(lam), system_bandwidth=float(W))
            p = p_success_at(t, cell_edge_distance(lam), sc, run.success_method())
            ok = (p >= target) if target is not None else (outage(t, p) <= cfg.P_o_req)
            rows.append((lam, W, p, network_cost(sc), ok, run.method))
    run.write("provision_map", ("lambda_a", "W_hz", "p_s_edge", "cost", "feasible", "method"), rows,
              {"x": "lambda_a", "y": ["W_hz"], "z": "p_s_edge", "mask": "feasible", "xscale": "log",
               "yscale": "log"})
    try:
        sol = provision_optimize(run.sc, W_range=W_range, solver=solver, per_decade=cfg.per_decade, **kw)
    except Infeasible as e:
        run.result = {"feasible": False, "reason": str(e)}
        return EXIT_INFEASIBLE
    run.result = {"solver": cfg.solver, "ap_density": sol.ap_density, "bandwidth_hz": sol.bandwidth, "cost": sol.cost,
                  "feasible": sol.feasible, "slack": {str(k): v for k, v in sol.constraint_slack.items()}}
    return EXIT_OK if sol.feasible else EXIT_INFEASIBLE


def _operate(run: _Run):
    cfg = run.cfg
    if run.method == "mc":
        raise PlanningError("the operation preset supports closed and numeric methods only")
    method = run.success_method()
    t = run.focus()
    P_lo = cfg.P_min_w if cfg.P_min_w is not None else cfg.P_max_w / 1000.0
    served = [k.id for k in run.sc.served]

    def row(P, n, curve):
        sc = run.sc.with_type(t.id, tx_power=float(P), replicas=int(n))
        ps = [p_success_spatial(sc.type_by_id(k), sc, method) for k in served]
        ti = sc.type_by_id(t.id)
        mine = ps[served.index(t.id)]
        life = application_lifetime(ti, sc, P_s=mine).app_lifetime
        return (P, n, life, *ps, outage(ti, mine), curve, run.method)

    rows = [row(P, 1, "power") for P in power_grid(P_lo, cfg.P_max_w, cfg.step_db)]
    rows += [row(cfg.P_max_w, n, "replicas") for n in range(1, cfg.n_max + 1)]
    run.write("operate", ("P_w", "n", "lifetime_s", *[f"P_s_type{k}" for k in served], "P_o", "curve", "method"),
              rows, {"x": ["P_w", "n"], "y": ["lifetime_s"] + [f"P_s_type{k}" for k in served], "group": "curve"})
    try:
        sol = operation_optimize(run.sc, cfg.P_o_req, n_max=cfg.n_max, P_max=cfg.P_max_w, P_lo=P_lo,
                                 types=[t.id], method=method, step_db=cfg.step_db)
    except Infeasible as e:
        run.result = {"feasible": False, "reason": str(e)}
        return EXIT_INFEASIBLE
    run.result = {"points": [asdict(p) for p in sol.points], "feasible": sol.feasible}
    return EXIT_OK if sol.feasible else EXIT_INFEASIBLE


def _packet_success(t, sc, method):
    p = p_success_at(t, cell_edge_distance(sc.network.ap_density), sc, method)
    return 1.0 - (1.0 - p) ** t.replicas


def _first_true(lo, hi, ok, log_scale=True, rel_tol=1e-6):
    """Smallest x in [lo, hi] with ok(x), assuming ok is monotone; NaN if ok(hi) fails."""
    if not ok(hi):
        return math.nan
    if ok(lo):
        return lo
    a, b = (math.log(lo), math.log(hi)) if log_scale else (lo, hi)
    f = math.exp if log_scale else (lambda x: x)
    while b - a > rel_tol * (1.0 if log_scale else abs(b)):
        m = 0.5 * (a + b)
        if ok(f(m)):
            b = m
        else:
            a = m
    return f(b)


def _scale(run: _Run):
    cfg = run.cfg
    if run.method == "mc":
        raise PlanningError("the scaling preset supports closed and numeric methods only")
    method = run.success_method()
    rows = []
    for v in cfg.scale_values:
        if cfg.scale_parameter == "target_success":
            sc, target = run.sc, float(v)
        else:
            sc, target = run.doc.with_override(cfg.scale_parameter, v).scenario, cfg.target_success
            if target is None:
                raise PlanningError("scaling over a parameter needs target_success in [experiment]")
        i = cfg.type

        def meets(s):
            return _packet_success(s.type_by_id(i), s, method) >= target

        P_lo = cfg.P_min_w if cfg.P_min_w is not None else cfg.P_max_w / 1000.0
        req_P = _first_true(P_lo, cfg.scale_P_max_w, lambda P: meets(sc.with_type(i, tx_power=P)))
        req_n = next((n for n in range(1, cfg.n_max + 1) if meets(sc.with_type(i, replicas=n))), math.nan)
        lam = min_ap_density(sc, lambda s: {i: _packet_success(s.type_by_id(i), s, method) - target})
        req_lam = math.nan if lam is None else lam
        req_W = _first_true(cfg.W_min_hz, cfg.W_max_hz, lambda W: meets(sc.with_network(system_bandwidth=W)))
        rows.append((v, req_P, req_n, req_lam, req_W, run.method))
    run.write("scale", ("swept_value", "required_P_w", "required_n", "required_lambda_a", "required_W_hz", "method"),
              rows, {"x": "swept_value", "y": ["required_P_w", "required_n", "required_lambda_a", "required_W_hz"],
                     "xlabel": cfg.scale_parameter, "panels": "y"})
    return EXIT_OK


_DISPATCH = {
    ExperimentPreset.Validate: _validate,
    ExperimentPreset.Tradeoff: _tradeoff,
    ExperimentPreset.ProvisionMap: _provision,
    ExperimentPreset.Operate: _operate,
    ExperimentPreset.Scale: _scale,
    ExperimentPreset.Sweep: _sweep,
}


def run_preset(scenario, preset, output_dir, *, method="closed", seed=None, reps=1, workers=None,
               settings: ExperimentSettings | None = None) -> int:
    """Runs one preset and writes its CSVs, plot sidecars and ``manifest.json``.

    ``scenario`` is a :class:`ScenarioDocument` or a bare :class:`Scenario`.
    Returns 0 on success, 2 when the optimization is infeasible and 1 on error.
    """
    if isinstance(scenario, Scenario):
        doc = ScenarioDocument({}, {}, scenario)
    else:
        doc = scenario
    if settings is not None:
        doc = replace(doc, experiment=settings)
    preset = ExperimentPreset(preset) if not isinstance(preset, ExperimentPreset) else preset
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if method not in ("closed", "numeric", "mc"):
        log.error("unknown method %r", method)
        return EXIT_ERROR
    run = _Run(doc, out, method, seed, reps, workers)
    t0 = time.perf_counter()
    try:
        status = _DISPATCH[preset](run)
        error = None
    except (PlanningError, ValueError, KeyError) as e:
        log.error("%s failed: %s", preset.value, e)
        status, error = EXIT_ERROR, str(e)
    manifest = {
        "preset": preset.value,
        "method": method,
        "seed": run.seed,
        "reps": run.reps,
        "workers": mc.worker_count(workers),
        "scenario": doc.source,
        "versions": _versions(),
        "wall_time_s": time.perf_counter() - t0,
        "files": run.files,
        "status": status,
        "result": run.result,
    }
    if error:
        manifest["error"] = error
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=float) + "\n", encoding="utf-8")
    return status


def build_parser():
    p = argparse.ArgumentParser(prog="lpwa-plan", description="Reliability, lifetime and cost planning presets.")
    p.add_argument("preset", choices=[e.value for e in ExperimentPreset])
    p.add_argument("--scenario", required=True, help="scenario file or built-in scenario name")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--method", choices=("closed", "numeric", "mc"), default="closed")
    p.add_argument("--reps", type=int, default=1, help="Monte Carlo replications")
    p.add_argument("--workers", type=int, default=None, help="worker threads (default: LPWA_PLAN_THREADS or CPU count)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        path = args.scenario
        if not Path(path).exists() and path in builtin_names():
            path = builtin_path(path)
        doc = load_document(path)
    except PlanningError as e:
        log.error("%s", e)
        return EXIT_ERROR
    return run_preset(doc, args.preset, args.out, method=args.method, seed=args.seed, reps=args.reps,
                      workers=args.workers)


if __name__ == "__main__":
    sys.exit(main())
