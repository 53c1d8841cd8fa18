"""Light-tailed regime: Cramér exponent, Goldie constant, prestationary
tails and exceedance times.

When E e^{beta xi} = 1 has a positive root, the perpetuity tail is a power
law c / x^beta.  The prefactor c is computed two ways — a plugin average
of the jump-field integrand over the stationary law of the conjugated
chain, and an empirical plateau of x^beta P{D > x} — and the two must
agree.  The prestationary corrections in n are Gaussian in the normalized
horizon (n alpha - log x) / sqrt(log x / alpha).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special

from . import kernels
from .errors import DomainError, InsufficientDataError, NoRootError, NonPlateauError
from .estimates import TailEstimate, binomial_estimate
from .laws import JointLaw, ScalarLaw
from .maps import jump_field
from .streams import RandomStream

__all__ = [
    "CramerParams", "GoldieEstimate", "solve_cramer", "tilted_jump_mean",
    "stationary_pool", "goldie_constant_plugin", "goldie_constant_empirical",
    "hill_estimate", "prestationary_tail", "exceedance_time_cdf",
    "exceedance_time_empirical", "tail_at_horizons", "homogeneity_gap",
]

_E_CONST = math.e


@dataclass(frozen=True)
class CramerParams:
    """Cramér triple (beta, alpha, sigma2) with an optional Goldie constant."""

    beta: float
    alpha: float
    sigma2: float
    c: Optional[float] = None
    c_std_err: Optional[float] = None
    method_c: Optional[str] = None  # "plugin" | "empirical"

    def with_c(self, c: float, std_err: float, method: str) -> "CramerParams":
        return replace(self, c=c, c_std_err=std_err, method_c=method)


@dataclass(frozen=True)
class GoldieEstimate:
    value: float
    std_err: float
    method: str
    flagged: bool = False


def solve_cramer(xi: ScalarLaw) -> CramerParams:
    """Root beta > 0 of E e^{beta xi} = 1 with tilted mean and variance.

    Raises when no root exists: either the MGF stays below 1 on its whole
    finite domain (heavy/one-sided case) or it diverges before crossing 1.
    """
    if not xi.mean() < 0:
        raise DomainError("solve_cramer requires E xi < 0")
    sup = xi.beta_sup()
    if sup.kind == "zero":
        raise DomainError("solve_cramer requires P{xi > 0} > 0 and E xi < 0")
    if sup.kind == "boundary":
        if math.isinf(sup.value):
            raise NoRootError(
                "phi(lambda) <= 1 on the entire search range", reason="subcritical")
        raise NoRootError(
            "MGF diverges before reaching 1", reason="divergence")
    beta = sup.value
    p0, p1, p2 = xi.mgf_moments(beta)
    if abs(p0 - 1.0) > 1e-9:
        raise NoRootError(
            f"root refinement failed: phi(beta) = {p0}", reason="divergence")
    alpha = p1
    sigma2 = p2 - alpha * alpha
    if not (alpha > 0 and sigma2 > 0):
        raise NoRootError(
            "degenerate tilted law at the root", reason="divergence")
    return CramerParams(beta=beta, alpha=alpha, sigma2=sigma2)


def tilted_jump_mean(y: float, joint: JointLaw, beta: float, n_mc: int,
                     stream: RandomStream) -> float:
    """E e^{beta * jump(y)} by Monte Carlo with the exact jump field."""
    rng = stream.generator()
    xi, eta = joint.sample(rng, n_mc)
    j = jump_field(float(y), xi, eta)
    with np.errstate(over="ignore"):
        return float(np.mean(np.exp(beta * j)))


_DEFAULT_BURN_IN = 10_000
_DEFAULT_THIN = 10


def stationary_pool(joint: JointLaw, n_pi: int, stream: RandomStream,
                    burn_in: int = _DEFAULT_BURN_IN,
                    thin: int = _DEFAULT_THIN) -> np.ndarray:
    """Approximate stationary draws of the conjugated chain.

    One long chain from X_1 = f(eta_1 e^{xi_1}); the first ``burn_in``
    states are discarded and the rest thinned.
    """
    total = burn_in + n_pi * thin
    rng = stream.generator()
    xi, eta = joint.sample(rng, (1, total))
    path = kernels.associated(np.ascontiguousarray(xi, dtype=float),
                              np.ascontiguousarray(eta, dtype=float))[0]
    return path[burn_in + thin - 1::thin][:n_pi]


def goldie_constant_plugin(joint: JointLaw, params: CramerParams,
                           stream: RandomStream,
                           burn_in: int = _DEFAULT_BURN_IN,
                           n_pi: int = 2000,
                           n_inner: int = 2000) -> GoldieEstimate:
    """Goldie constant by the stationary integral of the jump field.

    c = 1/(beta alpha) * E_pi[(E e^{beta jump(Y)} - 1) e^{beta Y}] with the
    outer expectation over ``n_pi`` thinned stationary draws and the inner
    one over ``n_inner`` fresh pairs per draw.  A running-variance blow-up
    across outer draws flags the estimate as numerically suspect.
    """
    beta, alpha = params.beta, params.alpha
    ys = stationary_pool(joint, n_pi, stream.substream(0), burn_in=burn_in)
    rng = stream.substream(1).generator()

    vals = np.empty(n_pi)
    chunk = max(1, int(2_000_000 / max(n_inner, 1)))
    for start in range(0, n_pi, chunk):
        block = ys[start:start + chunk]
        xi, eta = joint.sample(rng, (block.size, n_inner))
        j = jump_field(block[:, None], xi, eta)
        with np.errstate(over="ignore"):
            # E e^{beta xi} = 1 at the Cramer root, so e^{beta xi} is an
            # exact-mean control variate; the pathwise difference vanishes
            # as Y grows, which keeps the e^{beta Y} amplification in check.
            lb = np.longdouble(beta)
            inner = np.mean(np.exp(lb * j) - np.exp(lb * xi), axis=1)
            vals[start:start + chunk] = (
                np.asarray(inner, dtype=float)
                * np.exp(beta * block) / (beta * alpha))

    flagged = False
    half = n_pi // 2
    if half >= 2:
        v1 = float(np.var(vals[:half]))
        v2 = float(np.var(vals))
        if v2 > 100.0 * max(v1, 1e-300):
            flagged = True
    c = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n_pi))
    return GoldieEstimate(c, se, method="plugin", flagged=flagged)


def goldie_constant_empirical(dinf_samples: np.ndarray, beta: float,
                              grid: Sequence[float]) -> GoldieEstimate:
    """Goldie constant from the tail plateau of a perpetuity sample pool.

    Inverse-variance-weighted mean of x^beta P-hat{D > x} over the level
    grid; a plateau spread (max/min) above 2 signals that beta is wrong or
    the levels sit below the power-law range.
    """
    samples = np.asarray(dinf_samples)
    n = samples.size
    if n < 1:
        raise DomainError("empty sample pool")
    grid = list(grid)
    if not grid:
        raise DomainError("empty level grid")
    cs, ws = [], []
    for x in grid:
        p = float(np.count_nonzero(samples > x)) / n
        if p == 0.0:
            raise InsufficientDataError(
                f"no exceedances of level {x}", attempted=n)
        var_c = x ** (2 * beta) * p * (1.0 - p) / n
        cs.append(x ** beta * p)
        ws.append(1.0 / max(var_c, 1e-300))
    cs = np.asarray(cs)
    ws = np.asarray(ws)
    ratio = float(cs.max() / max(cs.min(), 1e-300))
    if ratio > 2.0:
        raise NonPlateauError(
            f"x^beta tail varies by factor {ratio:.3g} across the grid",
            ratio=ratio)
    c = float(np.sum(ws * cs) / np.sum(ws))
    se = float(math.sqrt(1.0 / np.sum(ws)))
    return GoldieEstimate(c, se, method="empirical")


def hill_estimate(samples: np.ndarray, k: Optional[int] = None) -> float:
    """Hill estimator of the power-law tail index from the top-k order
    statistics; default k = ceil(sqrt(N))."""
    x = np.asarray(samples, dtype=float)
    if k is None:
        k = int(math.ceil(math.sqrt(x.size)))
    if k < 2:
        raise DomainError("hill_estimate requires k >= 2")
    if k >= x.size:
        raise DomainError("hill_estimate requires k < pool size")
    top = np.sort(x)[-(k + 1):]
    if top[0] <= 0:
        raise DomainError("hill_estimate requires positive top order statistics")
    spacings = np.log(top[1:]) - math.log(top[0])
    mean_sp = float(np.mean(spacings))
    if mean_sp <= 0:
        raise DomainError("degenerate pool: zero log-spacings")
    return 1.0 / mean_sp


def _normal_factor(params: CramerParams, n: int, x: float) -> float:
    """N(0, sigma2) CDF at (n alpha - log x) / sqrt(log x / alpha)."""
    lx = math.log(x)
    arg = (n * params.alpha - lx) / math.sqrt(lx / params.alpha)
    return 0.5 * (1.0 + math.erf(arg / math.sqrt(2.0 * params.sigma2)))


def prestationary_tail(params: CramerParams, n: int, x: float) -> float:
    """Leading term of P{D_n > x}: (c/x^beta) times the normal horizon factor."""
    if params.c is None:
        raise DomainError("prestationary_tail requires params.c to be set")
    if not x > _E_CONST:
        raise DomainError("prestationary_tail requires x > e")
    return params.c * x ** (-params.beta) * _normal_factor(params, n, x)


def exceedance_time_cdf(params: CramerParams, n: int, x: float) -> float:
    """Asymptotic P{T_x <= n | T_x < infinity}: the normal horizon factor."""
    if not x > _E_CONST:
        raise DomainError("exceedance_time_cdf requires x > e")
    return _normal_factor(params, n, x)


_CHUNK_PATHS = 20_000


def tail_at_horizons(joint: JointLaw, ns: Sequence[int], x: float,
                     n_mc: int, stream: RandomStream,
                     statistic: str = "D") -> Tuple[TailEstimate, ...]:
    """Crude-MC estimates of P{stat_n > x} at several horizons on shared
    paths; ``statistic`` is one of D, Dt, M, Mt, dual."""
    ns = [int(v) for v in ns]
    n_max = max(ns)
    idx = {"D": 1, "Dt": 2, "M": 3, "Mt": 4}
    hits = np.zeros(len(ns), dtype=np.int64)
    rng = stream.generator()
    done = 0
    while done < n_mc:
        batch = min(_CHUNK_PATHS, n_mc - done)
        xi, eta = joint.sample(rng, (batch, n_max))
        xi = np.ascontiguousarray(xi, dtype=float)
        eta = np.ascontiguousarray(eta, dtype=float)
        if statistic == "dual":
            mat = kernels.dual_max(xi, eta)
        else:
            mat = kernels.paths(xi, eta)[idx[statistic]]
        for i, n in enumerate(ns):
            hits[i] += int(np.count_nonzero(mat[:, n - 1] > x))
        done += batch
    return tuple(binomial_estimate(x, int(h), n_mc) for h in hits)


def exceedance_time_empirical(joint: JointLaw, ns: Sequence[int], x: float,
                              n_mc: int, stream: RandomStream,
                              n_inf: Optional[int] = None) -> np.ndarray:
    """Empirical conditional exceedance-time CDF on the horizon grid.

    P{T_x <= n | T_x < inf} = P{M_n > x} / P{M_inf > x}; the running
    maximum at a long horizon stands in for M_inf.
    """
    ns = [int(v) for v in ns]
    if n_inf is None:
        n_inf = max(8 * max(ns), max(ns) + 200)
    ests = tail_at_horizons(joint, ns + [n_inf], x, n_mc, stream,
                            statistic="M")
    denom = ests[-1].p_hat
    if denom == 0:
        raise InsufficientDataError(
            f"no exceedances of level {x}", attempted=n_mc)
    return np.array([e.p_hat / denom for e in ests[:-1]])


def homogeneity_gap(joint: JointLaw, beta: float, x: float,
                    n_mc: int = 200_000,
                    stream: RandomStream = RandomStream(0)) -> float:
    """Weighted L1 distance int e^{beta y} |P{jump(x) > y} - P{xi > y}| dy.

    Both tails are empirical on common random pairs; the piecewise-constant
    difference is integrated exactly against e^{beta y}.
    """
    if not x > 1:
        raise DomainError("homogeneity_gap requires x > 1")
    rng = stream.generator()
    xi, eta = joint.sample(rng, n_mc)
    jx = np.asarray(jump_field(float(x), xi, eta), dtype=float)

    pts = np.concatenate([jx, xi])
    marks = np.concatenate([np.ones(n_mc), -np.ones(n_mc)])
    order = np.argsort(pts, kind="stable")
    pts = pts[order]
    # Tail difference just left of each point; scanning from the right,
    # tails start at 0 and each sample adds 1/n to its own tail.
    diff_right = np.cumsum(marks[order][::-1])[::-1] / n_mc
    # Integrate e^{beta y} |diff| over segments between consecutive points.
    a = pts[:-1]
    b = pts[1:]
    d = np.abs(diff_right[1:])
    seg = (np.exp(beta * b) - np.exp(beta * a)) / beta
    return float(np.sum(d * seg))
