"""Heavy-tailed regime: integrated-tail asymptotics and the single big jump.

For subexponential increment law H (the law of xi + log(1+eta)) the
perpetuity tail is governed by the integrated tail of H evaluated at log x,
scaled by the drift 1/a.  Conditioned on a large value, one driver pair is
abnormally large while the rest of the path tracks the law of large
numbers; the events B_k below formalize which step carried the big jump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from . import kernels
from .errors import DomainError, InsufficientDataError
from .estimates import TailEstimate, binomial_estimate
from .laws import Independent, JointLaw, PointMass, _sum_tail_exact, h_samples
from .streams import RandomStream

__all__ = [
    "BigJumpConfig", "asymptote_infinite", "asymptote_finite",
    "classify_big_jump", "classify_big_jump_matrix",
    "conditional_big_jump_prob",
]

_E_CONST = math.e
_QUAD_LIMIT = 10000


@dataclass(frozen=True)
class BigJumpConfig:
    """Parameters of the big-jump events: envelope slack (jε + C)/2,
    horizon n and exceedance level x."""

    C: float
    eps: float
    n: int
    x: float

    def __post_init__(self):
        if not (self.C > 0 and self.eps > 0 and self.n > 0 and self.x > 0):
            raise DomainError("BigJumpConfig requires C, eps, n, x all positive")


# ---------------------------------------------------------------------------
# Integrated tails of H
# ---------------------------------------------------------------------------


def _itail_raw_extended(law, v: float) -> float:
    """int_v^inf tail(s) ds for a nonnegative law, valid for v < 0 too."""
    if v >= law.support_min():
        return law.integrated_tail_raw(v)
    return (law.support_min() - v) + law.integrated_tail_raw(law.support_min())


def _h_itail_closed(joint: JointLaw, t: float) -> Optional[float]:
    """E(Y - t)^+ for Y = xi + log(1+eta) when a deterministic route exists."""
    z = joint.log1p_eta_law()
    if z is None or z.support_min() < 0:
        return None
    if isinstance(joint, Independent):
        xi = joint.xi
        if isinstance(xi, PointMass):
            return _itail_raw_extended(z, t - xi.value)
        if isinstance(z, PointMass):
            shifted = t - z.value
            # int of xi's tail; xi may be signed, integrate directly.
            val, _ = integrate.quad(xi.tail_prob, shifted, np.inf,
                                    epsrel=1e-10, epsabs=1e-300,
                                    limit=_QUAD_LIMIT)
            return val
        if xi.pdf(0.0) is not None:
            val, _ = integrate.quad(
                lambda u: float(xi.pdf(u)) * _itail_raw_extended(z, t - u),
                -np.inf, np.inf, epsrel=1e-9, epsabs=1e-300,
                limit=_QUAD_LIMIT,
            )
            return val
    # Comonotone and other cases: fall back to quadrature of the exact tail
    # when one exists.
    if _sum_tail_exact(joint, t) is not None:
        val, _ = integrate.quad(
            lambda s: _sum_tail_exact(joint, s), t, np.inf,
            epsrel=1e-9, epsabs=1e-300, limit=_QUAD_LIMIT,
        )
        return val
    return None


def _h_itail_raw(joint: JointLaw, t: float, n_mc: int,
                 stream: RandomStream) -> float:
    """int_t^inf P{xi + log(1+eta) > s} ds, closed form or empirical."""
    closed = _h_itail_closed(joint, t)
    if closed is not None:
        return closed
    y = h_samples(joint, n_mc, stream.generator())
    return float(np.mean(np.maximum(y - t, 0.0)))


def asymptote_infinite(a: float, joint: JointLaw, x: float, n_mc: int,
                       stream: RandomStream) -> float:
    """Leading tail term (1/a) * H_I-bar(log x) of the convergent perpetuity.

    H_I-bar(t) = min(1, int_t^inf H-bar); closed form when the catalog
    allows, otherwise an empirical integrated tail from ``n_mc`` draws of
    xi + log(1+eta).
    """
    if not a > 0:
        raise DomainError("asymptote_infinite requires a = -E xi > 0")
    if not x > _E_CONST:
        raise DomainError("asymptote_infinite requires x > e")
    t = math.log(x)
    return min(1.0, _h_itail_raw(joint, t, n_mc, stream)) / a


def asymptote_finite(a: float, joint: JointLaw, n: int, x: float,
                     n_mc: int = 1_000_000,
                     stream: RandomStream = RandomStream(0)) -> float:
    """Fixed-horizon tail term (1/a) * int_{log x}^{log x + na} H-bar(y) dy.

    Monotone nondecreasing in n and converging to the raw infinite-horizon
    integral; evaluated as a difference of integrated tails (the same pool
    is reused for both ends in the empirical route).
    """
    if not a > 0:
        raise DomainError("asymptote_finite requires a = -E xi > 0")
    if not x > _E_CONST:
        raise DomainError("asymptote_finite requires x > e")
    if n < 1:
        raise DomainError("asymptote_finite requires n >= 1")
    t = math.log(x)
    lo = _h_itail_closed(joint, t)
    hi = _h_itail_closed(joint, t + n * a)
    if lo is None or hi is None:
        y = h_samples(joint, n_mc, stream.generator())
        lo = float(np.mean(np.maximum(y - t, 0.0)))
        hi = float(np.mean(np.maximum(y - t - n * a, 0.0)))
    return max(0.0, lo - hi) / a


# ---------------------------------------------------------------------------
# Big-jump classification
# ---------------------------------------------------------------------------


def classify_big_jump_matrix(S: np.ndarray, xi: np.ndarray, eta: np.ndarray,
                             cfg: BigJumpConfig, a: float,
                             tilde: bool = False) -> np.ndarray:
    """Vectorized classifier over a batch of paths.

    Rows are paths, columns steps 1..n.  Returns the smallest k in
    [0, n-1] whose event B_k holds per path, or -1.  B_k requires the
    path to stay inside the envelope up to step k — |S_j + aj| and
    log eta_j both at most (j eps + C)/2 for j <= k — and the (k+1)-th
    driver to jump past log x + ka.  The tilde variant bounds
    max(xi_j, log eta_j) instead and triggers on the max.
    """
    if np.any(eta <= 0):
        raise DomainError("big-jump classification requires eta > 0 on the path")
    n = S.shape[1]
    if n < cfg.n:
        raise DomainError("trajectory shorter than the configured horizon")
    S = S[:, :cfg.n]
    xi = xi[:, :cfg.n]
    log_eta = np.log(eta[:, :cfg.n])
    j = np.arange(1, cfg.n + 1)
    env = (j * cfg.eps + cfg.C) / 2.0
    if tilde:
        inside = np.maximum(xi, log_eta) <= env
    else:
        inside = (np.abs(S + a * j) <= env) & (log_eta <= env)
    # prefix_ok[:, k] = all conditions for j <= k; vacuous at k = 0.
    prefix_ok = np.ones((S.shape[0], cfg.n), dtype=bool)
    prefix_ok[:, 1:] = np.cumprod(inside[:, :-1], axis=1).astype(bool)
    k = np.arange(cfg.n)
    if tilde:
        trig = np.maximum(xi, log_eta) > math.log(cfg.x) + k * a
    else:
        trig = xi + log_eta > math.log(cfg.x) + k * a
    hit = prefix_ok & trig
    first = np.where(hit.any(axis=1), hit.argmax(axis=1), -1)
    return first.astype(np.int64)


def classify_big_jump(traj, cfg: BigJumpConfig, a: float,
                      tilde: bool = False) -> Optional[int]:
    """Smallest k whose big-jump event B_k holds on this path, or None."""
    k = classify_big_jump_matrix(
        traj.S[None, :], traj.xi[None, :], traj.eta[None, :], cfg, a,
        tilde=tilde)[0]
    return None if k < 0 else int(k)


_CHUNK = 20_000


def conditional_big_jump_prob(joint: JointLaw, cfg: BigJumpConfig, a: float,
                              n_mc: int, stream: RandomStream,
                              tilde: bool = False) -> TailEstimate:
    """P{some B_k occurred | D_n > x} by crude Monte Carlo conditioning.

    Requires eta bounded away from 0 (the classification envelope bounds
    log eta from above only; the theorem's standing assumption is
    eta >= delta > 0).  Raises when no path exceeds the level.
    """
    if not joint.eta_min() > 0:
        raise DomainError(
            "conditional_big_jump_prob requires eta >= delta > 0; "
            f"essential infimum found: {joint.eta_min()}"
        )
    rng = stream.generator()
    exceed = 0
    hits = 0
    done = 0
    while done < n_mc:
        batch = min(_CHUNK, n_mc - done)
        xi, eta = joint.sample(rng, (batch, cfg.n))
        xi = np.ascontiguousarray(xi, dtype=float)
        eta = np.ascontiguousarray(eta, dtype=float)
        S, D, Dt, M, Mt = kernels.paths(xi, eta)
        target = Dt if tilde else D
        sel = target[:, cfg.n - 1] > cfg.x
        if np.any(sel):
            ks = classify_big_jump_matrix(
                S[sel], xi[sel], eta[sel], cfg, a, tilde=tilde)
            exceed += int(np.count_nonzero(sel))
            hits += int(np.count_nonzero(ks >= 0))
        done += batch
    if exceed == 0:
        raise InsufficientDataError(
            "no exceedances of the conditioning level", attempted=n_mc)
    est = binomial_estimate(cfg.x, hits, exceed)
    return TailEstimate(cfg.x, est.p_hat, est.std_err, exceed, method="crude")
