"""Markov-modulated perpetuities over a finite modulating chain.

The modulating chain visits a designated atom; the walk between
consecutive visits splits into i.i.d. cycles (tau, S_tau, eta-hat), and
the modulated perpetuity is exactly an ordinary perpetuity driven by the
cycle pairs.  That reduction carries the Cramer analysis over: the cycle
exponent solves the empirical E e^{beta S_tau} = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .core import d_infinity_pool
from .errors import DomainError, NoRootError, RunawayCycleError
from .estimates import TailEstimate, binomial_estimate
from .laws import JointLaw
from .streams import RandomStream

__all__ = [
    "ModulatedSpec", "CycleSample", "CyclePool", "CycleBeta",
    "ConditionReport", "stationary_dist", "drift", "simulate_cycles",
    "cycle_beta", "phi_hat", "check_conditions", "simulate_direct",
    "modulated_tail", "CyclePairLaw",
]

_CYCLE_CAP = 10_000_000


def stationary_dist(P: np.ndarray) -> np.ndarray:
    """Invariant distribution of a finite irreducible aperiodic chain.

    Solved linearly, then certified by power iteration; failure of the
    powers of P to converge to the rank-one limit (reducible or periodic
    chain) is a domain error.
    """
    P = np.asarray(P, dtype=float)
    m = P.shape[0]
    if P.shape != (m, m):
        raise DomainError("transition matrix must be square")
    if np.any(P < -1e-15) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
        raise DomainError("transition matrix rows must be probabilities summing to 1")
    A = np.vstack([P.T - np.eye(m), np.ones((1, m))])
    b = np.zeros(m + 1)
    b[-1] = 1.0
    rho, *_ = np.linalg.lstsq(A, b, rcond=None)
    # Certify by power iteration: P^k rows must all converge to rho.
    Q = P.copy()
    for _ in range(64):
        Q = Q @ Q
        if np.max(np.abs(Q - rho[None, :])) < 1e-13:
            break
    else:
        raise DomainError("chain is reducible or periodic: P^k does not converge")
    if np.any(rho < -1e-13):
        raise DomainError("invariant solve produced negative mass")
    rho = np.maximum(rho, 0.0)
    return rho / rho.sum()


@dataclass(frozen=True)
class ModulatedSpec:
    """Finite modulated perpetuity: chain P with atom, per-state affine
    maps f_j(xi) = fu_j + fv_j*xi and g_j(eta) = gu_j + gv_j*eta, and the
    base pair law."""

    P: tuple
    atom: int
    fu: tuple
    fv: tuple
    gu: tuple
    gv: tuple
    base: JointLaw

    def __post_init__(self):
        P = self.matrix()
        m = P.shape[0]
        if not 0 <= self.atom < m:
            raise DomainError("atom index out of range")
        for name in ("fu", "fv", "gu", "gv"):
            if len(getattr(self, name)) != m:
                raise DomainError(f"{name} must have one entry per state")
        stationary_dist(P)  # validates stochasticity and ergodicity

    def matrix(self) -> np.ndarray:
        return np.asarray(self.P, dtype=float)

    @property
    def m(self) -> int:
        return len(self.fu)

    def rho(self) -> np.ndarray:
        return stationary_dist(self.matrix())

    def coeff_arrays(self):
        return tuple(np.ascontiguousarray(getattr(self, k), dtype=float)
                     for k in ("fu", "fv", "gu", "gv"))


@dataclass(frozen=True)
class CycleSample:
    tau: int
    s_tau: float
    eta_hat: float


@dataclass(frozen=True)
class CyclePool:
    """Columnar pool of regeneration cycles."""

    tau: np.ndarray
    s_tau: np.ndarray
    eta_hat: np.ndarray

    def __len__(self):
        return self.tau.size

    def __getitem__(self, i) -> CycleSample:
        return CycleSample(int(self.tau[i]), float(self.s_tau[i]),
                           float(self.eta_hat[i]))


def drift(spec: ModulatedSpec) -> float:
    """Stationary mean step sum_j rho_j E f_j(xi); negative when stable."""
    rho = spec.rho()
    exi = spec.base.xi_mean()
    fu, fv, _, _ = spec.coeff_arrays()
    return float(np.sum(rho * (fu + fv * exi)))


def simulate_cycles(spec: ModulatedSpec, count: int,
                    stream: RandomStream,
                    max_steps: int = _CYCLE_CAP) -> CyclePool:
    """i.i.d. regeneration cycles started from the atom."""
    rng = stream.generator()
    cum = np.ascontiguousarray(np.cumsum(spec.matrix(), axis=1))
    fu, fv, gu, gv = spec.coeff_arrays()
    tau, s_tau, eta_hat = kernels.collect_cycles(
        lambda r, size: spec.base.sample(r, size), rng, count, cum,
        fu, fv, gu, gv, spec.atom, max_steps)
    if np.any(tau >= max_steps):
        over = int(np.count_nonzero(tau >= max_steps))
        raise RunawayCycleError(
            f"{over} cycle(s) hit the {max_steps}-step cap")
    return CyclePool(tau, s_tau, eta_hat)


@dataclass(frozen=True)
class CycleBeta:
    value: float
    std_err: float


def _empirical_root(s: np.ndarray, lam_hi: float = 1e6) -> Optional[float]:
    """Root lambda > 0 of mean e^{lambda s} = 1 on the empirical pool."""
    n = s.size
    logn = math.log(n)

    def logmgf(lam):
        z = lam * s
        zmax = z.max()
        return zmax + math.log(np.exp(z - zmax).sum()) - logn

    if s.max() <= 0:
        return None
    lo, lam = 0.0, 1e-6
    while logmgf(lam) < 0:
        lo = lam
        lam *= 2.0
        if lam > lam_hi:
            return None
    hi = lam
    for _ in range(200):
        if hi - lo < 1e-12 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if logmgf(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cycle_beta(pool: CyclePool, tolerance: float = 1e-10,
               n_boot: int = 200, min_ess: float = 10.0,
               stream: RandomStream = RandomStream(987)) -> CycleBeta:
    """Cycle-level Cramer exponent: root of the empirical MGF of S_tau.

    The empirical MGF always crosses 1 eventually whenever some cycle has
    S_tau > 0; a crossing carried by a handful of extreme cycles (small
    effective sample size of the tilted weights) is rejected as no-root —
    that is the heavy-tailed signature.  Bootstrap over cycles supplies
    the standard error.
    """
    s = np.asarray(pool.s_tau, dtype=float)
    if s.size < 2:
        raise DomainError("cycle_beta requires at least 2 cycles")
    root = _empirical_root(s)
    if root is None:
        raise NoRootError("empirical cycle MGF never reaches 1",
                          reason="subcritical")
    w = np.exp(root * (s - s.max()))
    ess = float(w.sum() ** 2 / (w * w).sum())
    if ess < min_ess:
        raise NoRootError(
            f"MGF crossing carried by too few cycles (ESS {ess:.1f})",
            reason="divergence")
    rng = stream.generator()
    boots = []
    for _ in range(n_boot):
        r = _empirical_root(rng.choice(s, size=s.size, replace=True))
        if r is not None:
            boots.append(r)
    se = float(np.std(boots, ddof=1)) if len(boots) > 1 else float("inf")
    return CycleBeta(float(root), se)


def phi_hat(spec: ModulatedSpec, lam: float) -> float:
    """Stationary per-step MGF sum_j rho_j E e^{lam f_j(xi)}."""
    rho = spec.rho()
    xi = spec.base.xi_law()
    if xi is None:
        raise DomainError("phi_hat requires a catalog xi marginal")
    total = 0.0
    for j in range(spec.m):
        p0 = xi.mgf_moments(lam * spec.fv[j])[0]
        total += rho[j] * math.exp(lam * spec.fu[j]) * p0
    return total


@dataclass(frozen=True)
class ConditionReport:
    C1: float
    C2: float
    K: float
    moment_ok: bool
    tau_tail_rate: float


def check_conditions(spec: ModulatedSpec, beta: float, n_mc: int,
                     stream: RandomStream) -> ConditionReport:
    """Monte Carlo evaluation of the C1/C2/K state suprema and an
    empirical verdict on E tau^{max(beta,1)} K^tau.

    The tau condition is extrapolated geometrically: the cycle length of a
    finite ergodic chain has a geometric tail with rate estimated from the
    pool, and the series converges iff rate * K < 1.
    """
    rng = stream.substream(0).generator()
    xi, eta = spec.base.sample(rng, n_mc)
    c1 = c2 = kk = 0.0
    for j in range(spec.m):
        fj = spec.fu[j] + spec.fv[j] * xi
        gj = spec.gu[j] + spec.gv[j] * eta
        with np.errstate(over="ignore"):
            w = np.exp(beta * fj)
            c1 = max(c1, float(np.mean(w * np.abs(fj))))
            c2 = max(c2, float(np.mean(w * np.abs(gj) ** beta)))
            kk = max(kk, float(np.mean(w)))
    pool = simulate_cycles(spec, 20_000, stream.substream(1))
    rate = _tau_tail_rate(pool.tau)
    moment_ok = bool(np.isfinite(kk) and (kk < 1.0 or rate * kk < 1.0))
    return ConditionReport(c1, c2, kk, moment_ok, rate)


def _tau_tail_rate(tau: np.ndarray) -> float:
    """Geometric decay rate of the cycle-length tail, from the upper half
    of the empirical survival function."""
    tau = np.asarray(tau)
    tmax = int(tau.max())
    if tmax <= 1:
        return 0.0
    ts = np.arange(1, tmax + 1)
    surv = np.array([np.count_nonzero(tau > t) for t in ts], dtype=float)
    keep = surv >= 10
    if keep.sum() < 3:
        return 0.0
    ts, surv = ts[keep], surv[keep]
    lo = max(0, ts.size // 2 - 1)
    slope = np.polyfit(ts[lo:], np.log(surv[lo:]), 1)[0]
    return float(np.exp(slope))


# ---------------------------------------------------------------------------
# Cycle reduction and direct simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CyclePairLaw(JointLaw):
    """The cycle pair (S_tau, eta-hat) presented as an i.i.d. pair law, so
    the modulated perpetuity is driven through the ordinary engine."""

    spec: ModulatedSpec
    max_steps: int = _CYCLE_CAP

    def sample(self, rng, size=None):
        if size is None:
            count, shape = 1, None
        elif np.isscalar(size):
            count, shape = int(size), (int(size),)
        else:
            shape = tuple(int(v) for v in size)
            count = int(np.prod(shape))
        cum = np.ascontiguousarray(np.cumsum(self.spec.matrix(), axis=1))
        fu, fv, gu, gv = self.spec.coeff_arrays()
        tau, s_tau, eta_hat = kernels.collect_cycles(
            lambda r, n: self.spec.base.sample(r, n), rng, count, cum,
            fu, fv, gu, gv, self.spec.atom, self.max_steps)
        if np.any(tau >= self.max_steps):
            raise RunawayCycleError("cycle hit the step cap during sampling")
        if shape is None:
            return float(s_tau[0]), float(eta_hat[0])
        return s_tau.reshape(shape), eta_hat.reshape(shape)

    def xi_law(self):
        return None

    def eta_law(self):
        return None

    def eta_min(self):
        gu, gv = np.asarray(self.spec.gu), np.asarray(self.spec.gv)
        if np.all(gu >= 0) and np.all(gv >= 0) and self.spec.base.eta_min() >= 0:
            return 0.0
        return -np.inf


def simulate_direct(spec: ModulatedSpec, n: int, n_paths: int,
                    rng: np.random.Generator) -> np.ndarray:
    """D_n of the modulated recursion by stepwise simulation (no cycles)."""
    cum = np.cumsum(spec.matrix(), axis=1)
    fu, fv, gu, gv = spec.coeff_arrays()
    phi = np.full(n_paths, spec.atom, dtype=np.int64)
    S = np.zeros(n_paths)
    D = np.zeros(n_paths)
    for _ in range(n):
        u = rng.random(n_paths)
        xi, eta = spec.base.sample(rng, n_paths)
        nxt = (u[:, None] > cum[phi]).sum(axis=1)
        S += fu[nxt] + fv[nxt] * xi
        D += (gu[nxt] + gv[nxt] * eta) * np.exp(S)
        phi = nxt
    return D


@dataclass(frozen=True)
class ModulatedTailReport:
    direct: Tuple[TailEstimate, ...]
    reduced: Tuple[TailEstimate, ...]
    beta: float
    beta_std_err: float
    c: float
    c_std_err: float


def modulated_tail(spec: ModulatedSpec, levels: Sequence[float], n_mc: int,
                   stream: RandomStream,
                   tol: float = 1e-9, n_cap: int = 100_000,
                   horizon: Optional[int] = None) -> ModulatedTailReport:
    """Tail of the modulated perpetuity two ways.

    Direct route: stepwise simulation of D_n at a horizon long enough for
    the residual to be negligible.  Reduction route: adaptive perpetuity
    sampling over the cycle pairs, plus the cycle-level (beta, c) fit.
    """
    a = drift(spec)
    if not a < 0:
        raise DomainError("modulated_tail requires negative stationary drift")
    levels = [float(x) for x in levels]

    if horizon is None:
        horizon = int(math.ceil(60.0 / -a))
    rng_d = stream.substream(0).generator()
    direct_vals = simulate_direct(spec, horizon, n_mc, rng_d)
    direct = tuple(
        binomial_estimate(x, int(np.count_nonzero(direct_vals > x)), n_mc)
        for x in levels)

    pair_law = CyclePairLaw(spec)
    rng_r = stream.substream(1).generator()
    red_vals, _, _, _ = d_infinity_pool(
        pair_law, tol, n_cap, rng_r, n_mc, assume_stable=True)
    reduced = tuple(
        binomial_estimate(x, int(np.count_nonzero(red_vals > x)), n_mc)
        for x in levels)

    pool = simulate_cycles(spec, min(n_mc, 100_000), stream.substream(2))
    cb = cycle_beta(pool)
    from .cramer import goldie_constant_empirical
    ge = goldie_constant_empirical(red_vals, cb.value, levels)
    return ModulatedTailReport(direct, reduced, cb.value, cb.std_err,
                               ge.value, ge.std_err)
