"""Experiment recipes behind the CLI.

Every experiment is split into fixed-size replication chunks; chunk i
draws only from ``RandomStream(seed).substream(i)`` and partial results
are merged in chunk order.  The worker count decides who executes which
chunk, never what is computed, so reports are byte-identical across
worker counts.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import cramer as cr
from . import kernels, limits, modulated as mod, subexp
from .config import ExperimentConfig
from .core import d_infinity_pool, drift_rate
from .errors import InsufficientDataError, PerpsimError
from .estimates import binomial_estimate
from .laws import TildePairs
from .streams import RandomStream

__all__ = ["ReportRow", "ExperimentReport", "run_experiment"]

_CHUNK = 50_000
# Streams with indices >= _AUX_BASE are reserved for non-replicated work
# (pilot levels, stationary chains, oracles).
_AUX_BASE = 1_000_000


@dataclass(frozen=True)
class ReportRow:
    experiment: str
    row: str
    input_echo: str
    theoretical: Optional[float]
    empirical: Optional[float]
    std_err: Optional[float]
    note: str = ""

    @property
    def ratio(self) -> Optional[float]:
        if self.theoretical in (None, 0.0) or self.empirical is None:
            return None
        return self.empirical / self.theoretical

    @property
    def z_score(self) -> Optional[float]:
        if (self.theoretical is None or self.empirical is None
                or not self.std_err):
            return None
        return (self.empirical - self.theoretical) / self.std_err


@dataclass
class ExperimentReport:
    experiment_id: str
    kind: str
    seed: int
    workers: int
    rows: List[ReportRow]
    wall_clock_s: float


def _chunk_sizes(total: int, chunk: int = _CHUNK) -> List[int]:
    sizes = []
    left = total
    while left > 0:
        take = min(chunk, left)
        sizes.append(take)
        left -= take
    return sizes


def _chunk_stream(cfg: ExperimentConfig, idx: int) -> RandomStream:
    return RandomStream(cfg.seed).substream(idx)


def _aux_stream(cfg: ExperimentConfig, slot: int) -> RandomStream:
    return RandomStream(cfg.seed).substream(_AUX_BASE + slot)


def _run_chunks(cfg: ExperimentConfig, total: int):
    """Execute the kind's chunk function over all chunks, in order."""
    sizes = _chunk_sizes(total)
    tasks = [(cfg, i, n) for i, n in enumerate(sizes)]
    if cfg.workers <= 1 or len(tasks) <= 1:
        return [_chunk_entry(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_chunk_entry, tasks, chunksize=1))


def _chunk_entry(task):
    cfg, idx, n = task
    return _CHUNK_FNS[cfg.kind](cfg, _chunk_stream(cfg, idx), n)


# ---------------------------------------------------------------------------
# Chunk functions: (cfg, stream, n) -> picklable partial result
# ---------------------------------------------------------------------------


def _chunk_tail_infinite(cfg, stream, n):
    p = cfg.params
    vals, _, conv, _ = d_infinity_pool(
        cfg.joint, p["tol"], p["n_cap"], stream.generator(), n)
    levels = np.exp(np.asarray(p["log_levels"]))
    hits = [int(np.count_nonzero(vals > x)) for x in levels]
    return hits, int(np.count_nonzero(conv))


def _chunk_tail_finite(cfg, stream, n):
    p = cfg.params
    horizons = p["horizons"]
    n_max = max(horizons)
    rng = stream.generator()
    xi, eta = cfg.joint.sample(rng, (n, n_max))
    with np.errstate(divide="ignore"):
        log_eta = np.log(np.maximum(eta, 0.0))
    _, ld, _ = kernels.log_paths(np.ascontiguousarray(xi, dtype=float),
                                 np.ascontiguousarray(log_eta, dtype=float))
    hits = [[int(np.count_nonzero(ld[:, h - 1] > t)) for t in p["log_levels"]]
            for h in horizons]
    return hits


def _chunk_big_jump(cfg, stream, n):
    p = cfg.params
    bc = subexp.BigJumpConfig(C=p["c_envelope"], eps=p["eps"],
                              n=p["horizon"], x=p["_level"])
    a = drift_rate(cfg.joint)
    rng = stream.generator()
    xi, eta = cfg.joint.sample(rng, (n, bc.n))
    xi = np.ascontiguousarray(xi, dtype=float)
    eta = np.ascontiguousarray(eta, dtype=float)
    S, D, *_ = kernels.paths(xi, eta)
    sel = D[:, bc.n - 1] > bc.x
    exceed = int(np.count_nonzero(sel))
    hits = 0
    if exceed:
        ks = subexp.classify_big_jump_matrix(S[sel], xi[sel], eta[sel], bc, a)
        hits = int(np.count_nonzero(ks >= 0))
    return exceed, hits


def _chunk_dtilde_pool(cfg, stream, n):
    p = cfg.params
    vals, _, _, _ = d_infinity_pool(
        TildePairs(cfg.joint), p["tol"], p["n_cap"], stream.generator(), n,
        assume_stable=True)
    return vals


def _chunk_d_pool(cfg, stream, n):
    vals, _, _, _ = d_infinity_pool(
        cfg.joint, 1e-9, 100_000, stream.generator(), n)
    return vals


def _chunk_horizon_hits(cfg, stream, n):
    """Shared by prestationary (D_n) and exceedance (M_n + long horizon)."""
    p = cfg.params
    horizons = list(p["horizons"])
    x = p["level"]
    statistic = "M" if cfg.kind == "exceedance" else "D"
    if cfg.kind == "exceedance":
        horizons = horizons + [p["_n_inf"]]
    n_max = max(horizons)
    rng = stream.generator()
    xi, eta = cfg.joint.sample(rng, (n, n_max))
    mats = kernels.paths(np.ascontiguousarray(xi, dtype=float),
                         np.ascontiguousarray(eta, dtype=float))
    mat = mats[1] if statistic == "D" else mats[3]
    return [int(np.count_nonzero(mat[:, h - 1] > x)) for h in horizons]


def _chunk_modulated(cfg, stream, n):
    p = cfg.params
    n_cyc = max(1, round(p["n_cycles"] * n / p["n_mc"]))
    pool = mod.simulate_cycles(cfg.spec, n_cyc, stream.substream(0))
    direct = mod.simulate_direct(cfg.spec, p["_horizon"], n,
                                 stream.substream(1).generator())
    red, _, _, _ = d_infinity_pool(
        mod.CyclePairLaw(cfg.spec), 1e-9, 100_000,
        stream.substream(2).generator(), n, assume_stable=True)
    levels = p["levels"]
    return (pool.tau, pool.s_tau, pool.eta_hat,
            [int(np.count_nonzero(direct > x)) for x in levels],
            red)


def _chunk_log_dn(cfg, stream, n):
    return limits.log_dn_pool(cfg.joint, cfg.params["horizon"], n, stream)


def _chunk_green(cfg, stream, n):
    p = cfg.params
    val = limits.green_sum(cfg.joint, p["level"], p["window"], n, stream,
                           n_max=p["_n_max"])
    return val * n  # re-weighted to hit counts for exact merging


_CHUNK_FNS = {
    "tail-infinite": _chunk_tail_infinite,
    "tail-finite": _chunk_tail_finite,
    "big-jump": _chunk_big_jump,
    "cramer": _chunk_dtilde_pool,
    "prestationary": _chunk_horizon_hits,
    "exceedance": _chunk_horizon_hits,
    "modulated": _chunk_modulated,
    "clt": _chunk_log_dn,
    "local": _chunk_log_dn,
    "green": _chunk_green,
    "gamma": _chunk_log_dn,
    "diagnostics": None,
}


# ---------------------------------------------------------------------------
# Experiment drivers
# ---------------------------------------------------------------------------


def _rows_tail_infinite(cfg) -> List[ReportRow]:
    p = cfg.params
    n_mc = p["n_mc"]
    parts = _run_chunks(cfg, n_mc)
    hits = np.sum([h for h, _ in parts], axis=0)
    a = drift_rate(cfg.joint)
    rows = []
    for t, h in zip(p["log_levels"], hits):
        x = math.exp(t)
        theo = subexp.asymptote_infinite(a, cfg.joint, x, 1_000_000,
                                         _aux_stream(cfg, 0))
        est = binomial_estimate(x, int(h), n_mc)
        rows.append(ReportRow(cfg.experiment_id, f"log_x={t:g}", f"x={x:.6g}",
                              theo, est.p_hat, est.std_err))
    return rows


def _rows_tail_finite(cfg) -> List[ReportRow]:
    p = cfg.params
    n_mc = p["n_mc"]
    parts = _run_chunks(cfg, n_mc)
    hits = np.sum(parts, axis=0)
    a = drift_rate(cfg.joint)
    rows = []
    for i, h in enumerate(p["horizons"]):
        for k, t in enumerate(p["log_levels"]):
            x = math.exp(t)
            theo = subexp.asymptote_finite(a, cfg.joint, h, x,
                                           stream=_aux_stream(cfg, 0))
            est = binomial_estimate(x, int(hits[i][k]), n_mc)
            rows.append(ReportRow(cfg.experiment_id, f"n={h},log_x={t:g}",
                                  f"x={x:.6g}", theo, est.p_hat, est.std_err))
    return rows


def _resolve_big_jump_level(cfg) -> float:
    p = cfg.params
    if p.get("level") is not None:
        return p["level"]
    n = p["horizon"]
    rng = _aux_stream(cfg, 1).generator()
    xi, eta = cfg.joint.sample(rng, (min(p["n_mc"], 100_000), n))
    _, D, *_ = kernels.paths(np.ascontiguousarray(xi, dtype=float),
                             np.ascontiguousarray(eta, dtype=float))
    return float(np.quantile(D[:, n - 1], p["level_quantile"]))


def _rows_big_jump(cfg) -> List[ReportRow]:
    p = cfg.params
    p["_level"] = _resolve_big_jump_level(cfg)
    parts = _run_chunks(cfg, p["n_mc"])
    exceed = sum(e for e, _ in parts)
    hits = sum(h for _, h in parts)
    if exceed == 0:
        raise InsufficientDataError(
            f"no exceedances of level {p['_level']:.6g} in {p['n_mc']} paths",
            attempted=p["n_mc"])
    est = binomial_estimate(p["_level"], hits, exceed)
    return [ReportRow(cfg.experiment_id, "p_big_jump_given_exceed",
                      f"x={p['_level']:.6g},n={p['horizon']}",
                      1.0, est.p_hat, est.std_err,
                      note=f"conditioning_events={exceed}")]


def _rows_cramer(cfg) -> List[ReportRow]:
    p = cfg.params
    pool = np.concatenate(_run_chunks(cfg, p["n_mc"]))
    params = cr.solve_cramer(cfg.joint.xi_law())
    rows = [
        ReportRow(cfg.experiment_id, "beta", "phi(beta)=1", params.beta,
                  None, None),
        ReportRow(cfg.experiment_id, "alpha", "phi'(beta)", params.alpha,
                  None, None),
        ReportRow(cfg.experiment_id, "sigma2", "phi''(beta)-alpha^2",
                  params.sigma2, None, None),
    ]
    k = p.get("hill_k") or int(math.ceil(math.sqrt(pool.size)))
    hill = cr.hill_estimate(pool, k)
    rows.append(ReportRow(cfg.experiment_id, "hill_index", f"k={k}",
                          params.beta, hill, None))
    qs = p["level_quantiles"]
    grid = list(np.quantile(pool, qs))
    emp = cr.goldie_constant_empirical(pool, params.beta, grid)
    rows.append(ReportRow(cfg.experiment_id, "goldie_empirical",
                          f"grid={[f'{g:.4g}' for g in grid]}",
                          None, emp.value, emp.std_err))
    plug = cr.goldie_constant_plugin(cfg.joint, params, _aux_stream(cfg, 2),
                                     n_pi=p["n_pi"], n_inner=p["n_inner"])
    rows.append(ReportRow(cfg.experiment_id, "goldie_plugin",
                          f"n_pi={p['n_pi']}", emp.value, plug.value,
                          math.hypot(plug.std_err, emp.std_err),
                          note="flagged" if plug.flagged else ""))
    return rows


def _rows_prestationary(cfg) -> List[ReportRow]:
    p = cfg.params
    params = cr.solve_cramer(cfg.joint.xi_law())
    dpool = d_infinity_pool(cfg.joint, 1e-9, 100_000,
                            _aux_stream(cfg, 3).generator(),
                            p["n_mc_dinf"])[0]
    x = p["level"]
    grid = [x * r for r in (0.25, 0.5, 1.0)]
    emp_c = cr.goldie_constant_empirical(dpool, params.beta, grid)
    params = params.with_c(emp_c.value, emp_c.std_err, "empirical")
    parts = _run_chunks(cfg, p["n_mc"])
    hits = np.sum(parts, axis=0)
    rows = []
    for h, hit in zip(p["horizons"], hits):
        theo = cr.prestationary_tail(params, h, x)
        est = binomial_estimate(x, int(hit), p["n_mc"])
        rows.append(ReportRow(cfg.experiment_id, f"n={h}", f"x={x:.6g}",
                              theo, est.p_hat, est.std_err,
                              note=f"c={emp_c.value:.6g}"))
    return rows


def _rows_exceedance(cfg) -> List[ReportRow]:
    p = cfg.params
    params = cr.solve_cramer(cfg.joint.xi_law())
    p["_n_inf"] = max(8 * max(p["horizons"]), max(p["horizons"]) + 200)
    parts = _run_chunks(cfg, p["n_mc"])
    hits = np.sum(parts, axis=0)
    denom = int(hits[-1])
    x = p["level"]
    if denom == 0:
        raise InsufficientDataError(
            f"no exceedances of level {x} in {p['n_mc']} paths",
            attempted=p["n_mc"])
    rows = []
    for h, hit in zip(p["horizons"], hits[:-1]):
        theo = cr.exceedance_time_cdf(params, h, x)
        emp = hit / denom
        se = math.sqrt(max(emp * (1 - emp), 1e-300) / denom)
        rows.append(ReportRow(cfg.experiment_id, f"n={h}", f"x={x:.6g}",
                              theo, emp, se))
    return rows


def _rows_modulated(cfg) -> List[ReportRow]:
    p = cfg.params
    spec = cfg.spec
    a = mod.drift(spec)
    p["_horizon"] = int(math.ceil(60.0 / max(-a, 1e-3)))
    parts = _run_chunks(cfg, p["n_mc"])
    tau = np.concatenate([t for t, *_ in parts])
    s_tau = np.concatenate([s for _, s, *_ in parts])
    eta_hat = np.concatenate([e for _, _, e, _, _ in parts])
    direct_hits = np.sum([d for *_, d, _ in parts], axis=0)
    red = np.concatenate([r for *_, r in parts])
    pool = mod.CyclePool(tau, s_tau, eta_hat)

    rho = spec.rho()
    rows = [ReportRow(cfg.experiment_id, f"rho_{j}", "stationary",
                      float(rho[j]), None, None) for j in range(spec.m)]
    rows.append(ReportRow(cfg.experiment_id, "drift", "sum rho_j E f_j",
                          a, float(np.mean(s_tau) / np.mean(tau)),
                          float(np.std(s_tau) / math.sqrt(tau.size))))
    rows.append(ReportRow(
        cfg.experiment_id, "mean_tau", "Kac: 1/rho(atom)",
        1.0 / float(rho[spec.atom]), float(np.mean(tau)),
        float(np.std(tau) / math.sqrt(tau.size))))
    cb = mod.cycle_beta(pool)
    rows.append(ReportRow(cfg.experiment_id, "cycle_beta",
                          "E e^{beta S_tau}=1", None, cb.value, cb.std_err))
    hill = cr.hill_estimate(red, int(math.ceil(math.sqrt(red.size))))
    rows.append(ReportRow(cfg.experiment_id, "hill_index", "reduced pool",
                          cb.value, hill, None))
    for x, dh in zip(p["levels"], direct_hits):
        d_est = binomial_estimate(x, int(dh), p["n_mc"])
        r_hits = int(np.count_nonzero(red > x))
        r_est = binomial_estimate(x, r_hits, red.size)
        rows.append(ReportRow(cfg.experiment_id, f"tail_direct_x={x:g}",
                              f"n={p['_horizon']}", r_est.p_hat, d_est.p_hat,
                              math.hypot(d_est.std_err, r_est.std_err)))
    return rows


def _rows_clt(cfg) -> List[ReportRow]:
    p = cfg.params
    pool = np.concatenate(_run_chunks(cfg, p["n_mc"]))
    norm = limits.clt_normalized_pool(cfg.joint, p["horizon"], 0,
                                     _aux_stream(cfg, 0), pool=pool)
    ks = limits.ks_one_sample(norm, limits.std_normal_cdf, "std-normal")
    return [
        ReportRow(cfg.experiment_id, "ks_statistic", "vs N(0,1)", 0.0,
                  ks.statistic, None, note=f"p_value={ks.p_value:.6g}"),
        ReportRow(cfg.experiment_id, "pool_mean", "limit moment", 0.0,
                  float(np.mean(norm)),
                  float(np.std(norm) / math.sqrt(norm.size))),
        ReportRow(cfg.experiment_id, "pool_variance", "limit moment", 1.0,
                  float(np.var(norm)), None),
    ]


def _rows_local(cfg) -> List[ReportRow]:
    p = cfg.params
    pool = np.concatenate(_run_chunks(cfg, p["n_mc"]))
    a, s2 = limits._xi_moments(cfg.joint)
    n = p["horizon"]
    sd = math.sqrt(n * s2)
    offsets = np.linspace(-3.0, 3.0, p["n_windows"])
    rows = []
    for off in offsets:
        x = n * a + off * sd
        theo = limits.local_window_theoretical(a, s2, n, x, p["delta"])
        est = limits.local_window_empirical(cfg.joint, n, x, p["delta"], 0,
                                            _aux_stream(cfg, 0), pool=pool)
        rows.append(ReportRow(cfg.experiment_id, f"offset={off:+.2f}sd",
                              f"x={x:.6g}", theo, est.p_hat, est.std_err))
    return rows


def _rows_green(cfg) -> List[ReportRow]:
    p = cfg.params
    a, s2 = limits._xi_moments(cfg.joint)
    p["_n_max"] = limits.green_n_max(a, s2, p["level"], p["window"])
    parts = _run_chunks(cfg, p["n_mc"])
    val = float(np.sum(parts)) / p["n_mc"]
    theo = p["window"] / a
    se = math.sqrt(val / p["n_mc"]) if val > 0 else None
    return [ReportRow(cfg.experiment_id, "green_sum",
                      f"x={p['level']:g},h={p['window']:g}",
                      theo, val, se, note=f"n_max={p['_n_max']}")]


def _rows_gamma(cfg) -> List[ReportRow]:
    p = cfg.params
    pool = np.concatenate(_run_chunks(cfg, p["n_mc"]))
    _, s2 = limits._xi_moments(cfg.joint)
    gpool = pool * pool / p["horizon"]
    ks = limits.ks_one_sample(
        gpool, lambda x: limits.gamma_half_cdf(x, 2.0 * s2),
        f"gamma{{0.5,{2.0 * s2:g}}}")
    return [
        ReportRow(cfg.experiment_id, "ks_statistic", ks.reference, 0.0,
                  ks.statistic, None, note=f"p_value={ks.p_value:.6g}"),
        ReportRow(cfg.experiment_id, "pool_mean", "limit moment", s2,
                  float(np.mean(gpool)),
                  float(np.std(gpool) / math.sqrt(gpool.size))),
        ReportRow(cfg.experiment_id, "pool_variance", "limit moment",
                  2.0 * s2 * s2, float(np.var(gpool)), None),
    ]


def _rows_diagnostics(cfg) -> List[ReportRow]:
    p = cfg.params
    table = limits.theorem9_diagnostics(cfg.joint, p["y_grid"],
                                        n_mc=p["n_mc"],
                                        stream=_chunk_stream(cfg, 0))
    a = cfg.joint.xi_mean()
    rows = []
    for r in table:
        rows.append(ReportRow(cfg.experiment_id, f"jump_mean_y={r.y:g}",
                              f"y={r.y:g}", a, r.jump_mean, None))
        rows.append(ReportRow(cfg.experiment_id, f"jump_var_y={r.y:g}",
                              f"y={r.y:g}", None, r.jump_var, None))
        rows.append(ReportRow(cfg.experiment_id, f"charfn_gap_y={r.y:g}",
                              f"y={r.y:g}", 0.0, r.charfn_gap, None))
    return rows


_DRIVERS = {
    "tail-infinite": _rows_tail_infinite,
    "tail-finite": _rows_tail_finite,
    "big-jump": _rows_big_jump,
    "cramer": _rows_cramer,
    "prestationary": _rows_prestationary,
    "exceedance": _rows_exceedance,
    "modulated": _rows_modulated,
    "clt": _rows_clt,
    "local": _rows_local,
    "green": _rows_green,
    "gamma": _rows_gamma,
    "diagnostics": _rows_diagnostics,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    start = time.perf_counter()
    rows = _DRIVERS[cfg.kind](cfg)
    return ExperimentReport(
        experiment_id=cfg.experiment_id, kind=cfg.kind, seed=cfg.seed,
        workers=cfg.workers, rows=rows,
        wall_clock_s=time.perf_counter() - start)
