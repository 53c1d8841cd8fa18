"""Limit theorems for transient perpetuities: CLT and local limit for
log D_n, the Green-function renewal limit, and the zero-drift Gamma limit,
with the goodness-of-fit statistics they require.

All pools are built in the log domain — at the horizons of interest D_n
itself overflows doubles long before the Gaussian regime sets in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from . import kernels
from .errors import DomainError
from .estimates import TailEstimate, binomial_estimate
from .laws import JointLaw
from .maps import jump_field
from .streams import RandomStream

__all__ = [
    "GofResult", "log_dn_pool", "clt_normalized_pool",
    "local_window_theoretical", "local_window_empirical", "green_sum",
    "green_n_max", "gamma_limit_pool", "ks_one_sample", "ks_two_sample",
    "theorem9_diagnostics", "Theorem9Row",
]

_CHUNK_PATHS = 2_000


@dataclass(frozen=True)
class GofResult:
    statistic: float
    p_value: float
    n_samples: int
    reference: str

    def __post_init__(self):
        if self.statistic < 0 or not (0.0 <= self.p_value <= 1.0):
            raise DomainError("invalid goodness-of-fit result")


def _xi_moments(joint: JointLaw) -> Tuple[float, float]:
    law = joint.xi_law()
    if law is None:
        raise DomainError("operation requires a catalog xi marginal")
    _, m1, m2 = law.mgf_moments(0.0)
    return m1, m2 - m1 * m1


def log_dn_pool(joint: JointLaw, n: int, n_mc: int, stream: RandomStream,
                tilde: bool = False) -> np.ndarray:
    """Final values log D_n (or log D-tilde_n) over n_mc paths, chunked."""
    if joint.eta_min() < 0:
        raise DomainError("log-domain pools require eta >= 0")
    rng = stream.generator()
    out = np.empty(n_mc)
    done = 0
    while done < n_mc:
        batch = min(_CHUNK_PATHS, n_mc - done)
        xi, eta = joint.sample(rng, (batch, n))
        with np.errstate(divide="ignore"):
            log_eta = np.log(np.maximum(eta, 0.0))
        _, ld, ldt = kernels.log_paths(
            np.ascontiguousarray(xi, dtype=float),
            np.ascontiguousarray(log_eta, dtype=float))
        out[done:done + batch] = (ldt if tilde else ld)[:, n - 1]
        done += batch
    return out


def clt_normalized_pool(joint: JointLaw, n: int, n_mc: int,
                        stream: RandomStream, tilde: bool = False,
                        pool: Optional[np.ndarray] = None) -> np.ndarray:
    """(log D_n - an) / sqrt(n sigma^2) over n_mc paths; a = E xi > 0.

    Pass ``pool`` to normalize an existing log D_n pool instead of
    simulating a fresh one.
    """
    a, s2 = _xi_moments(joint)
    if not a > 0:
        raise DomainError("clt_normalized_pool requires E xi > 0")
    if not s2 > 0:
        raise DomainError("clt_normalized_pool requires Var xi > 0")
    if pool is None:
        pool = log_dn_pool(joint, n, n_mc, stream, tilde=tilde)
    return (pool - a * n) / math.sqrt(n * s2)


def local_window_theoretical(a: float, sigma2: float, n: int, x: float,
                             delta: float) -> float:
    """Leading local-limit term Delta/sqrt(2 pi sigma^2 n) * Gaussian."""
    if n < 1 or delta <= 0:
        raise DomainError("local window requires n >= 1 and delta > 0")
    return (delta / math.sqrt(2 * math.pi * sigma2 * n)
            * math.exp(-((x - n * a) ** 2) / (2 * n * sigma2)))


def local_window_empirical(joint: JointLaw, n: int, x: float, delta: float,
                           n_mc: int, stream: RandomStream,
                           pool: Optional[np.ndarray] = None) -> TailEstimate:
    """Crude-MC P{log D_n in (x, x + delta]}."""
    if pool is None:
        pool = log_dn_pool(joint, n, n_mc, stream)
    hits = int(np.count_nonzero((pool > x) & (pool <= x + delta)))
    return binomial_estimate(x, hits, pool.size)


def _require_nonlattice(joint: JointLaw):
    law = joint.xi_law()
    if law is None or not law.is_continuous():
        raise DomainError("green_sum requires a nonlattice (continuous) xi law")


def green_n_max(a: float, sigma2: float, x: float, h: float) -> int:
    """Truncation horizon: the walk has passed the window w.h.p. beyond it."""
    center = (x + h) / a
    return int(math.ceil(center + 10.0 * math.sqrt(center) * math.sqrt(sigma2) / a))


def green_sum(joint: JointLaw, x: float, h: float, n_mc: int,
              stream: RandomStream, n_max: Optional[int] = None) -> float:
    """sum_{n>=1} P{log D_n in (x, x+h]}, estimated on shared paths.

    Converges to h / E xi as x grows (the renewal/Green-function limit).
    """
    a, s2 = _xi_moments(joint)
    if not a > 0:
        raise DomainError("green_sum requires E xi > 0")
    _require_nonlattice(joint)
    if n_max is None:
        n_max = green_n_max(a, s2, x, h)
    rng = stream.generator()
    total_hits = 0
    done = 0
    while done < n_mc:
        batch = min(_CHUNK_PATHS, n_mc - done)
        xi, eta = joint.sample(rng, (batch, n_max))
        with np.errstate(divide="ignore"):
            log_eta = np.log(np.maximum(eta, 0.0))
        _, ld, _ = kernels.log_paths(
            np.ascontiguousarray(xi, dtype=float),
            np.ascontiguousarray(log_eta, dtype=float))
        total_hits += int(np.count_nonzero((ld > x) & (ld <= x + h)))
        done += batch
    return total_hits / n_mc


def gamma_limit_pool(joint: JointLaw, n: int, n_mc: int,
                     stream: RandomStream) -> np.ndarray:
    """log^2 D_n / n under zero drift; the limit is Gamma(1/2, 2 sigma^2),
    i.e. the square of an N(0, sigma^2) draw."""
    a, s2 = _xi_moments(joint)
    if abs(a) > 1e-12:
        raise DomainError("gamma_limit_pool requires E xi = 0")
    if not s2 > 0:
        raise DomainError("gamma_limit_pool requires Var xi > 0")
    pool = log_dn_pool(joint, n, n_mc, stream)
    return pool * pool / n


# ---------------------------------------------------------------------------
# Goodness of fit
# ---------------------------------------------------------------------------


def _ks_statistic_one(sorted_pool: np.ndarray, cdf_vals: np.ndarray) -> float:
    n = sorted_pool.size
    i = np.arange(1, n + 1)
    return float(np.max(np.maximum(i / n - cdf_vals, cdf_vals - (i - 1) / n)))


def ks_one_sample(pool: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray],
                  reference: str = "reference") -> GofResult:
    """Exact one-sample Kolmogorov-Smirnov statistic with the asymptotic
    Kolmogorov-distribution p-value."""
    pool = np.asarray(pool, dtype=float)
    if pool.size == 0:
        raise DomainError("ks_one_sample requires a nonempty pool")
    xs = np.sort(pool)
    stat = _ks_statistic_one(xs, np.asarray(cdf(xs), dtype=float))
    p = float(special.kolmogorov(stat * math.sqrt(pool.size)))
    return GofResult(stat, min(1.0, p), pool.size, reference)


def ks_two_sample(pool_a: np.ndarray, pool_b: np.ndarray) -> GofResult:
    """Two-sample KS statistic, p-value via the sqrt(nm/(n+m)) scaling."""
    a = np.sort(np.asarray(pool_a, dtype=float))
    b = np.sort(np.asarray(pool_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise DomainError("ks_two_sample requires nonempty pools")
    data = np.concatenate([a, b])
    marks = np.concatenate([np.full(a.size, 1.0 / a.size),
                            np.full(b.size, -1.0 / b.size)])
    order = np.argsort(data, kind="mergesort")
    cdf_diff = np.cumsum(marks[order])
    # At ties the empirical CDFs jump together; evaluate after each block.
    d_sorted = data[order]
    block_end = np.r_[d_sorted[1:] != d_sorted[:-1], True]
    stat = float(np.max(np.abs(cdf_diff[block_end])))
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    p = float(special.kolmogorov(stat * en))
    return GofResult(stat, min(1.0, p), a.size + b.size, "two-sample")


def std_normal_cdf(x):
    return 0.5 * (1.0 + special.erf(np.asarray(x) / math.sqrt(2.0)))


def gamma_half_cdf(x, scale: float):
    """CDF of Gamma(shape 1/2, given scale) = square of a centered normal."""
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    return special.gammainc(0.5, x / scale)


# ---------------------------------------------------------------------------
# Theorem-9 hypothesis diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Theorem9Row:
    y: float
    jump_mean: float
    jump_var: float
    charfn_gap: float


def theorem9_diagnostics(joint: JointLaw, y_grid: Sequence[float],
                         n_mc: int = 100_000,
                         stream: RandomStream = RandomStream(0),
                         lambda_cap: float = 10.0,
                         n_lambda: int = 41) -> Tuple[Theorem9Row, ...]:
    """Per-level jump moments and characteristic-function gaps.

    For each y: mean and variance of the exact jump at y, and
    sup_{|lambda| <= cap} |E e^{i lambda jump(y)} - E e^{i lambda xi}| on
    common pairs.  A table for eyeballs, not a pass/fail oracle.
    """
    rng = stream.generator()
    xi, eta = joint.sample(rng, n_mc)
    lams = np.linspace(-lambda_cap, lambda_cap, n_lambda)
    base_cf = np.mean(np.exp(1j * lams[:, None] * xi[None, :]), axis=1)
    rows = []
    for y in y_grid:
        j = np.asarray(jump_field(float(y), xi, eta), dtype=float)
        cf = np.mean(np.exp(1j * lams[:, None] * j[None, :]), axis=1)
        rows.append(Theorem9Row(
            y=float(y),
            jump_mean=float(np.mean(j)),
            jump_var=float(np.var(j)),
            charfn_gap=float(np.max(np.abs(cf - base_cf))),
        ))
    return tuple(rows)


def walk_dip_probability(joint: JointLaw, n: int, horizon: int, n_mc: int,
                         stream: RandomStream) -> float:
    """P{S_k <= k a/2 for some k in [n, horizon]}: the proof's negligible-
    path bound, estimated by direct walk simulation."""
    a, _ = _xi_moments(joint)
    if not a > 0:
        raise DomainError("walk_dip_probability requires E xi > 0")
    rng = stream.generator()
    hits = 0
    done = 0
    while done < n_mc:
        batch = min(_CHUNK_PATHS, n_mc - done)
        xi, _ = joint.sample(rng, (batch, horizon))
        S = np.cumsum(xi, axis=1)
        k = np.arange(1, horizon + 1)
        dip = S[:, n - 1:] <= (k[n - 1:] * a / 2.0)
        hits += int(np.count_nonzero(dip.any(axis=1)))
        done += batch
    return hits / n_mc
