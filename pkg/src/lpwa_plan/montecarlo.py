"""Monte Carlo oracle for the analytic model.

Three levels of simulation are offered:

* ``probe_success`` / ``estimate_laplace`` / ``replay_retransmissions`` place
  one receiver at the origin and one probe transmitter at distance ``z`` and
  draw independent interference snapshots. Parent points are a PPP on the
  same truncation disc the analytic integrals use.
* ``run_campaign`` samples whole deployments on a torus and replays the
  traffic of every device against every AP.

Every random stream is derived from a ``SeedSequence``, so results do not
depend on the worker count.
"""
from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .geometry import pathloss_clamped, sample_fading, sample_offsets
from .interference import resolve_radius
from .lifetime import lifetime_from_trials
from .numerics import DEFAULT_QUADRATURE, QuadratureSpec
from .reliability import SuccessMethod, p_success_many
from .scenario import IoTTypeSpec, Scenario

_CHUNK = 50_000


class OverlapModel(enum.Enum):
    """How a time-frequency overlap enters the interference sum.

    PointSample counts an interferer at full power when it covers a random
    point of the probe replica, so the overlap probability is exactly the
    activity factor. FractionalOverlap weights each overlapping interferer by
    the overlapped share of the probe's time and bandwidth. HardCollision
    counts any overlap at full power.
    """

    PointSample = "point"
    FractionalOverlap = "fractional"
    HardCollision = "hard"


def worker_count(workers=None):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("LPWA_PLAN_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _spawn(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def binomial_se(p, n):
    return math.sqrt(max(p * (1.0 - p), 0.0) / n) if n > 0 else math.nan


# ---------------------------------------------------------------------------
# probe-level sampling


def _candidate_means(k: IoTTypeSpec, probe: IoTTypeSpec, scenario: Scenario, model):
    """Per-cluster mean number of candidate interferers, split by code class.

    Returns [(mean, Q)] pairs; for PointSample the means are the activity
    factors themselves.
    """
    net = scenario.network
    if model is OverlapModel.PointSample:
        time_share = k.replicas * k.packet_time / k.reporting_period
        freq_share = min(1.0, k.signal_bandwidth / net.system_bandwidth)
    else:
        time_share = k.replicas * (k.packet_time + probe.packet_time) / k.reporting_period
        freq_share = min(1.0, (k.signal_bandwidth + probe.signal_bandwidth) / net.system_bandwidth)
    base = k.daughters_per_parent * time_share * freq_share
    codes = net.code_count
    same = base / codes if k.in_phi else 0.0
    cross = base - same
    out = []
    if same > 0:
        out.append((same, 1.0))
    if cross > 0 and net.rejection_factor > 0:
        out.append((cross, net.rejection_factor))
    return out


def _overlap_weights(k: IoTTypeSpec, probe: IoTTypeSpec, scenario, model, rng, n):
    if model is not OverlapModel.FractionalOverlap:
        return np.ones(n)
    W = scenario.network.system_bandwidth
    ti, tk = probe.packet_time, k.packet_time
    u = rng.uniform(-tk, ti, n)
    wt = (np.minimum(ti, u + tk) - np.maximum(0.0, u)) / ti
    wi, wk = probe.signal_bandwidth, k.signal_bandwidth
    if wi + wk <= W:
        v = rng.uniform(-wk, wi, n)
        wf = (np.minimum(wi, v + wk) - np.maximum(0.0, v)) / wi
    else:
        wf = np.ones(n)
    return np.clip(wt, 0.0, 1.0) * np.clip(wf, 0.0, 1.0)


def _ztp(mu, rng, n):
    """Zero-truncated Poisson(mu) draws."""
    kmax = int(mu + 12.0 * math.sqrt(mu) + 30)
    k = np.arange(1, kmax + 1)
    cdf = stats.poisson.cdf(k, mu)
    u = rng.uniform(math.exp(-mu), 1.0, n)
    return np.minimum(np.searchsorted(cdf, u, side="left") + 1, kmax).astype(np.int64)


def _field_interference(scenario, probe, n_snap, model, rng, radius):
    """Aggregate interference at the origin from all clusters, one value per snapshot."""
    ch = scenario.network.channel
    total = np.zeros(n_snap)
    for k in scenario.types:
        if k.parent_density <= 0:
            continue
        for mu, q in _candidate_means(k, probe, scenario, model):
            mean_clusters = k.parent_density * math.pi * radius**2 * -math.expm1(-mu)
            n_cl = rng.poisson(mean_clusters, n_snap)
            tot_cl = int(n_cl.sum())
            if tot_cl == 0:
                continue
            snap = np.repeat(np.arange(n_snap), n_cl)
            r = radius * np.sqrt(rng.random(tot_cl))
            th = rng.uniform(0.0, 2 * math.pi, tot_cl)
            counts = _ztp(mu, rng, tot_cl)
            snap = np.repeat(snap, counts)
            px = np.repeat(r * np.cos(th), counts)
            py = np.repeat(r * np.sin(th), counts)
            m = px.size
            off = sample_offsets(k.scattering, rng, m)
            d = np.hypot(px + off[:, 0], py + off[:, 1])
            w = _overlap_weights(k, probe, scenario, model, rng, m)
            p = q * k.tx_power * w * sample_fading(ch, rng, m) * pathloss_clamped(ch.pathloss, d)
            total += np.bincount(snap, weights=p, minlength=n_snap)
    return total


def _own_cluster_interference(scenario, probe, z, n_snap, model, rng):
    """Interference from the probe transmitter's siblings; the transmitter sits at (z, 0)."""
    ch = scenario.network.channel
    total = np.zeros(n_snap)
    y = sample_offsets(probe.scattering, rng, n_snap)
    parent_x, parent_y = z - y[:, 0], -y[:, 1]
    for mu, q in _candidate_means(probe, probe, scenario, model):
        counts = rng.poisson(mu, n_snap)
        m = int(counts.sum())
        if m == 0:
            continue
        snap = np.repeat(np.arange(n_snap), counts)
        off = sample_offsets(probe.scattering, rng, m)
        d = np.hypot(parent_x[snap] + off[:, 0], parent_y[snap] + off[:, 1])
        w = _overlap_weights(probe, probe, scenario, model, rng, m)
        p = q * probe.tx_power * w * sample_fading(ch, rng, m) * pathloss_clamped(ch.pathloss, d)
        total += np.bincount(snap, weights=p, minlength=n_snap)
    return total


def sample_interference(scenario: Scenario, i: IoTTypeSpec, z, n_snap, rng,
                        model=OverlapModel.PointSample, spec: QuadratureSpec = DEFAULT_QUADRATURE,
                        own_cluster=True):
    """Independent draws of aggregate interference at an AP at the origin."""
    radius = resolve_radius(spec, scenario)
    out = np.empty(n_snap)
    for start in range(0, n_snap, _CHUNK):
        n = min(_CHUNK, n_snap - start)
        val = _field_interference(scenario, i, n, model, rng, radius)
        if own_cluster:
            val += _own_cluster_interference(scenario, i, z, n, model, rng)
        out[start:start + n] = val
    return out


def _probe_outcomes(scenario, i, z, n, rng, model, spec):
    ch = scenario.network.channel
    interference = sample_interference(scenario, i, z, n, rng, model, spec)
    signal = i.tx_power * sample_fading(ch, rng, n) * pathloss_clamped(ch.pathloss, z)
    return signal >= ch.sinr_threshold * (scenario.noise_power(i) + interference)


@dataclass(frozen=True)
class ProbeEstimate:
    z: float
    p: float
    se: float
    episodes: int


def probe_success(scenario: Scenario, i: IoTTypeSpec, z_grid, episodes=100_000,
                  overlap_model=OverlapModel.PointSample, seed=0,
                  spec: QuadratureSpec = DEFAULT_QUADRATURE, workers=None):
    """Empirical single-link success probability at each distance in ``z_grid``."""
    rngs = _spawn(seed, len(z_grid))

    def one(idx):
        ok = _probe_outcomes(scenario, i, float(z_grid[idx]), episodes, rngs[idx], overlap_model, spec)
        p = float(ok.mean())
        return ProbeEstimate(float(z_grid[idx]), p, binomial_se(p, episodes), episodes)

    with ThreadPoolExecutor(worker_count(workers)) as ex:
        return list(ex.map(one, range(len(z_grid))))


@dataclass(frozen=True)
class LaplaceEstimate:
    s: float
    value: float
    se: float


def estimate_laplace(scenario: Scenario, s_grid, episodes=100_000, seed=0, i: IoTTypeSpec | None = None,
                     z=0.0, overlap_model=OverlapModel.PointSample, spec: QuadratureSpec = DEFAULT_QUADRATURE,
                     own_cluster=True):
    """Empirical E[exp(−s I)] on ``s_grid`` from independent snapshots.

    ``i`` and ``z`` locate the probe transmitter whose own cluster is
    included; with ``own_cluster=False`` only the all-cluster term is drawn.
    """
    i = scenario.served[0] if i is None else i
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    I = sample_interference(scenario, i, z, episodes, rng, overlap_model, spec, own_cluster)
    out = []
    for s in s_grid:
        v = np.exp(-float(s) * I)
        out.append(LaplaceEstimate(float(s), float(v.mean()), float(v.std(ddof=1) / math.sqrt(episodes))))
    return out


@dataclass(frozen=True)
class ReplayResult:
    p_hat: float
    p_se: float
    replicas: int
    outage: float
    outage_se: float
    attempts_verbatim: float
    attempts_verbatim_se: float
    attempts_mean: float
    attempts_mean_se: float
    episodes: int


def replay_retransmissions(scenario: Scenario, i: IoTTypeSpec, z, episodes=100_000,
                           overlap_model=OverlapModel.FractionalOverlap, seed=0,
                           correlation="independent", spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """Replays the replica/retransmission protocol for a device at distance ``z``.

    ``correlation="independent"`` draws a fresh interference snapshot for every
    replica; ``"shared_geometry"`` keeps one snapshot of active interferers per
    episode and redraws only the fading of the probe link.
    """
    n, B = i.replicas, i.retx_bound
    per = n * B
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    ch = scenario.network.channel
    gz = pathloss_clamped(ch.pathloss, z)
    noise = scenario.noise_power(i)
    if correlation == "independent":
        ok = _probe_outcomes(scenario, i, z, episodes * per, rng, overlap_model, spec).reshape(episodes, B, n)
    elif correlation == "shared_geometry":
        I = sample_interference(scenario, i, z, episodes, rng, overlap_model, spec)
        sig = i.tx_power * sample_fading(ch, rng, (episodes, per)) * gz
        ok = (sig >= ch.sinr_threshold * (noise + I[:, None])).reshape(episodes, B, n)
    else:
        raise ValueError(f"unknown correlation mode {correlation!r}")
    attempt_ok = ok.any(axis=2)
    success = attempt_ok.any(axis=1)
    first = np.where(success, attempt_ok.argmax(axis=1) + 1, B)
    # replicas actually transmitted: all attempts up to and including the first success
    used = np.arange(1, B + 1)[None, :] <= first[:, None]
    tx = int(used.sum()) * n
    p_hat = float(ok[used].sum() / tx)
    outage = float(1.0 - success.mean())
    verb = first * success
    return ReplayResult(
        p_hat, binomial_se(p_hat, tx), tx, outage, binomial_se(outage, episodes),
        float(verb.mean()), float(verb.std(ddof=1) / math.sqrt(episodes)),
        float(first.mean()), float(first.std(ddof=1) / math.sqrt(episodes)), episodes,
    )


# ---------------------------------------------------------------------------
# deployments and full-network replay


@dataclass(frozen=True)
class Deployment:
    side: float
    ap_positions: np.ndarray
    parents: dict
    devices: dict
    device_parent: dict


def sample_deployment(scenario: Scenario, rng: np.random.Generator, side=None) -> Deployment:
    """PCP devices per type and PPP APs on a torus of the service area."""
    side = math.sqrt(scenario.cost.area) if side is None else side
    area = side * side
    n_ap = rng.poisson(scenario.network.ap_density * area)
    aps = rng.uniform(0.0, side, (n_ap, 2))
    parents, devices, owner = {}, {}, {}
    for k in scenario.types:
        n_par = rng.poisson(k.parent_density * area)
        par = rng.uniform(0.0, side, (n_par, 2))
        counts = rng.poisson(k.daughters_per_parent, n_par)
        idx = np.repeat(np.arange(n_par), counts)
        pos = (par[idx] + sample_offsets(k.scattering, rng, idx.size)) % side
        parents[k.id], devices[k.id], owner[k.id] = par, pos, idx
    return Deployment(side, aps, parents, devices, owner)


@dataclass(frozen=True)
class CampaignSpec:
    replications: int = 1
    horizon: float | None = None
    z_bins: tuple = tuple(float(z) for z in np.arange(0.0, 5001.0, 250.0))
    seed: int = 0
    overlap_model: OverlapModel = OverlapModel.FractionalOverlap
    s_grid: tuple = ()
    workers: int | None = None
    lifetime_method: SuccessMethod = SuccessMethod.ClosedApprox

    def validate(self, scenario: Scenario):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.horizon is not None and self.horizon < max(t.reporting_period for t in scenario.types):
            raise ValueError("horizon must cover the longest reporting period")
        if len(self.z_bins) < 2 or any(b <= a for a, b in zip(self.z_bins, self.z_bins[1:])):
            raise ValueError("z_bins must be increasing with at least two edges")


@dataclass
class TypeCampaignStats:
    type_id: int
    bin_trials: np.ndarray
    bin_successes: np.ndarray
    replicas: int = 0
    replica_successes: int = 0
    packets: int = 0
    packet_outages: int = 0
    attempts_sum: float = 0.0
    attempts_sq: float = 0.0
    verbatim_sum: float = 0.0
    verbatim_sq: float = 0.0
    lifetimes: list = field(default_factory=list)

    @property
    def p_s_bins(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.bin_trials > 0, self.bin_successes / np.maximum(self.bin_trials, 1), np.nan)

    @property
    def p_s_bins_se(self):
        p = self.p_s_bins
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.sqrt(p * (1 - p) / self.bin_trials)

    @property
    def P_s(self):
        return self.replica_successes / self.replicas if self.replicas else math.nan

    @property
    def P_s_se(self):
        return binomial_se(self.P_s, self.replicas)

    @property
    def P_o(self):
        return self.packet_outages / self.packets if self.packets else math.nan

    @property
    def P_o_se(self):
        return binomial_se(self.P_o, self.packets)

    @property
    def attempts_mean(self):
        return self.attempts_sum / self.packets if self.packets else math.nan

    @property
    def attempts_verbatim(self):
        return self.verbatim_sum / self.packets if self.packets else math.nan

    @property
    def lifetime_samples(self):
        return np.concatenate(self.lifetimes) if self.lifetimes else np.empty(0)


@dataclass
class CampaignResult:
    spec: CampaignSpec
    types: dict
    laplace: list

    def for_type(self, k) -> TypeCampaignStats:
        return self.types[k]


def _torus_dist(a, b, side):
    d = np.abs(a - b)
    d = np.minimum(d, side - d)
    return np.hypot(d[..., 0], d[..., 1])


def _pairs(t_query, t_bg_sorted, window, horizon):
    """(query index, sorted-background index) for all |Δt| < window on a circular time axis."""
    n_bg = t_bg_sorted.size
    ext = np.concatenate((t_bg_sorted - horizon, t_bg_sorted, t_bg_sorted + horizon))
    lo = np.searchsorted(ext, t_query - window, side="right")
    hi = np.searchsorted(ext, t_query + window, side="left")
    counts = hi - lo
    q = np.repeat(np.arange(t_query.size), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    j = np.repeat(lo, counts) + offs
    return q, j % n_bg, ext[j]


class _Traffic:
    """Replica table for one replication: type, device, start time and frequency, code."""

    def __init__(self, scenario, dep, horizon, rng):
        W = scenario.network.system_bandwidth
        rows = {"type": [], "dev": [], "t": [], "f": [], "code": [], "packet": []}
        self.packets = {}
        pid = 0
        for k in scenario.types:
            nd = dep.devices[k.id].shape[0]
            npk = rng.poisson(horizon / k.reporting_period, nd)
            dev = np.repeat(np.arange(nd), npk)
            m = dev.size
            codes = rng.integers(0, scenario.network.code_count, m) if k.in_phi else np.full(m, -1)
            pk = np.arange(pid, pid + m)
            self.packets[k.id] = (pk, dev)
            pid += m
            r = k.replicas
            rows["type"].append(np.full(m * r, k.id))
            rows["dev"].append(np.repeat(dev, r))
            rows["packet"].append(np.repeat(pk, r))
            rows["code"].append(np.repeat(codes, r))
            rows["t"].append(rng.uniform(0.0, horizon, m * r))
            rows["f"].append(rng.uniform(0.0, W, m * r))
        cat = {key: np.concatenate(v) if v else np.empty(0) for key, v in rows.items()}
        order = np.argsort(cat["t"], kind="stable")
        for key, v in cat.items():
            setattr(self, key, v[order])


def _tagged_success(scenario, dep, traffic, horizon, model, rng, q_type, q_t, q_f, q_code,
                    exclude_self, ap_idx, ap_dist):
    """Decode outcome per AP rank for query replicas against the background traffic.

    Returns (success array of shape (n_query, ell), interference at rank 0).
    """
    net = scenario.network
    ch = net.channel
    W = net.system_bandwidth
    types = {t.id: t for t in scenario.types}
    tau_max = max(t.packet_time for t in scenario.types)
    probe = types[int(q_type[0])]
    n_q = q_t.size
    ell = ap_idx.shape[1]
    interference = np.zeros((n_q, ell))
    qi, bj, bt = _pairs(q_t, traffic.t, tau_max + probe.packet_time, horizon)
    if exclude_self is not None:
        keep = bj != exclude_self[qi]
        qi, bj, bt = qi[keep], bj[keep], bt[keep]
    b_type = traffic.type[bj]
    b_tau = np.zeros(bj.size)
    b_w = np.zeros(bj.size)
    b_p = np.zeros(bj.size)
    for t in scenario.types:
        sel = b_type == t.id
        b_tau[sel], b_w[sel], b_p[sel] = t.packet_time, t.signal_bandwidth, t.tx_power
    ti, wi = probe.packet_time, probe.signal_bandwidth
    # offset of each background replica relative to the query start, in time and (circular) frequency
    dt = bt - q_t[qi]
    df = (traffic.f[bj] - q_f[qi] + W / 2) % W - W / 2
    if model is OverlapModel.PointSample:
        pt = rng.uniform(0.0, ti, n_q)[qi]
        pf = rng.uniform(0.0, wi, n_q)[qi]
        hit_t = (pt >= dt) & (pt < dt + b_tau)
        rel = (pf - df) % W
        hit_f = rel < b_w
        w = (hit_t & hit_f).astype(float)
    else:
        ot = np.clip(np.minimum(ti, dt + b_tau) - np.maximum(0.0, dt), 0.0, None) / ti
        of = np.clip(np.minimum(wi, df + b_w) - np.maximum(0.0, df), 0.0, None) / wi
        w = ot * of if model is OverlapModel.FractionalOverlap else ((ot > 0) & (of > 0)).astype(float)
    live = w > 0
    qi, bj, w, b_p, b_type = qi[live], bj[live], w[live], b_p[live], b_type[live]
    same = (traffic.code[bj] == q_code[qi]) & (q_code[qi] >= 0)
    qfac = np.where(same, 1.0, net.rejection_factor)
    live = qfac > 0
    qi, bj, w, b_p, b_type, qfac = qi[live], bj[live], w[live], b_p[live], b_type[live], qfac[live]
    pos = np.zeros((bj.size, 2))
    for t in scenario.types:
        sel = b_type == t.id
        pos[sel] = dep.devices[t.id][traffic.dev[bj[sel]]]
    for r in range(ell):
        aps = dep.ap_positions[ap_idx[qi, r]]
        d = _torus_dist(pos, aps, dep.side)
        p = qfac * w * b_p * sample_fading(ch, rng, d.size) * pathloss_clamped(ch.pathloss, d)
        interference[:, r] = np.bincount(qi, weights=p, minlength=n_q)
    sig = probe.tx_power * sample_fading(ch, rng, (n_q, ell)) * pathloss_clamped(ch.pathloss, ap_dist)
    ok = sig >= ch.sinr_threshold * (scenario.noise_power(probe) + interference)
    return ok, interference[:, 0]


def _run_replication(scenario: Scenario, spec: CampaignSpec, rng: np.random.Generator):
    horizon = spec.horizon or max(t.reporting_period for t in scenario.types)
    dep = sample_deployment(scenario, rng)
    ell = scenario.network.ell_max
    edges = np.asarray(spec.z_bins, dtype=float)
    out = {}
    laplace_I = []
    if dep.ap_positions.shape[0] < ell:
        for t in scenario.served:
            out[t.id] = TypeCampaignStats(t.id, np.zeros(len(edges) - 1, np.int64), np.zeros(len(edges) - 1, np.int64))
        return out, np.empty(0)
    tree = cKDTree(dep.ap_positions, boxsize=dep.side)
    traffic = _Traffic(scenario, dep, horizon, rng)
    for t in scenario.served:
        st = TypeCampaignStats(t.id, np.zeros(len(edges) - 1, np.int64), np.zeros(len(edges) - 1, np.int64))
        devpos = dep.devices[t.id]
        if devpos.shape[0] == 0:
            out[t.id] = st
            continue
        dist, idx = tree.query(devpos, k=ell)
        dist, idx = dist.reshape(-1, ell), idx.reshape(-1, ell)
        # analytic per-device lifetimes from each device's own AP distances
        fail = np.ones(devpos.shape[0])
        for r in range(ell):
            fail *= 1.0 - p_success_many(t, np.maximum(dist[:, r], 1e-9), scenario, spec.lifetime_method)
        xs = (fail ** t.replicas)[:, None]
        j = np.arange(1, t.retx_bound + 1)[None, :]
        beta = np.sum(j * (1.0 - xs) * xs ** (j - 1), axis=1)
        st.lifetimes.append(lifetime_from_trials(t, beta, scenario))

        rows = np.nonzero(traffic.type == t.id)[0]
        pk, _ = traffic.packets[t.id]
        first_ok = np.zeros(pk.size, bool)
        for start in range(0, rows.size, _CHUNK):
            sel = rows[start:start + _CHUNK]
            dv = traffic.dev[sel]
            ok, I0 = _tagged_success(scenario, dep, traffic, horizon, spec.overlap_model, rng,
                                     traffic.type[sel], traffic.t[sel], traffic.f[sel], traffic.code[sel],
                                     sel, idx[dv], dist[dv])
            laplace_I.append(I0)
            d1 = dist[dv, 0]
            b = np.searchsorted(edges, d1, side="right") - 1
            inb = (b >= 0) & (b < len(edges) - 1)
            st.bin_trials += np.bincount(b[inb], minlength=len(edges) - 1)
            st.bin_successes += np.bincount(b[inb], weights=ok[inb, 0], minlength=len(edges) - 1).astype(np.int64)
            anyok = ok.any(axis=1)
            st.replicas += sel.size
            st.replica_successes += int(anyok.sum())
            first_ok[traffic.packet[sel] - pk[0]] |= anyok
        attempts = np.where(first_ok, 1, 0)
        success = first_ok.copy()
        _, pdev = traffic.packets[t.id]
        pending = np.nonzero(~success)[0]
        for j in range(2, t.retx_bound + 1):
            if pending.size == 0:
                break
            n = t.replicas
            dv = np.repeat(pdev[pending], n)
            q_t = rng.uniform(0.0, horizon, dv.size)
            q_f = rng.uniform(0.0, scenario.network.system_bandwidth, dv.size)
            code = rng.integers(0, scenario.network.code_count, pending.size)
            q_code = np.repeat(code, n)
            ok, _ = _tagged_success(scenario, dep, traffic, horizon, spec.overlap_model, rng,
                                    np.full(dv.size, t.id), q_t, q_f, q_code, None, idx[dv], dist[dv])
            got = ok.any(axis=1).reshape(pending.size, n).any(axis=1)
            attempts[pending[got]] = j
            success[pending[got]] = True
            pending = pending[~got]
        attempts[~success] = t.retx_bound
        st.packets += pk.size
        st.packet_outages += int((~success).sum())
        st.attempts_sum += float(attempts.sum())
        st.attempts_sq += float((attempts.astype(float) ** 2).sum())
        verb = attempts * success
        st.verbatim_sum += float(verb.sum())
        st.verbatim_sq += float((verb.astype(float) ** 2).sum())
        out[t.id] = st
    I = np.concatenate(laplace_I) if laplace_I else np.empty(0)
    return out, I


def run_campaign(scenario: Scenario, spec: CampaignSpec = CampaignSpec()) -> CampaignResult:
    """Full-network replay over ``spec.replications`` independent deployments.

    Background traffic is the first attempt of every packet; retransmissions
    of failed packets are evaluated against that background without adding
    load. Lifetimes are computed per device from its own AP distances.
    """
    spec.validate(scenario)
    rngs = _spawn(spec.seed, spec.replications)
    with ThreadPoolExecutor(worker_count(spec.workers)) as ex:
        parts = list(ex.map(lambda r: _run_replication(scenario, spec, r), rngs))
    nb = len(spec.z_bins) - 1
    merged = {t.id: TypeCampaignStats(t.id, np.zeros(nb, np.int64), np.zeros(nb, np.int64)) for t in scenario.served}
    Is = []
    for stats_by_type, I in parts:
        Is.append(I)
        for k, st in stats_by_type.items():
            m = merged[k]
            m.bin_trials += st.bin_trials
            m.bin_successes += st.bin_successes
            m.replicas += st.replicas
            m.replica_successes += st.replica_successes
            m.packets += st.packets
            m.packet_outages += st.packet_outages
            m.attempts_sum += st.attempts_sum
            m.attempts_sq += st.attempts_sq
            m.verbatim_sum += st.verbatim_sum
            m.verbatim_sq += st.verbatim_sq
            m.lifetimes.extend(st.lifetimes)
    laplace = []
    I = np.concatenate(Is) if Is else np.empty(0)
    for s in spec.s_grid:
        if I.size:
            v = np.exp(-float(s) * I)
            laplace.append(LaplaceEstimate(float(s), float(v.mean()), float(v.std(ddof=1) / math.sqrt(I.size))))
    return CampaignResult(spec, merged, laplace)
