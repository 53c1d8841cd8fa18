"""The perpetuity recursions and their Markov-chain representations.

Everything here is exact path algebra: the perpetuity partial sums and
their running maxima, the additive chain obtained by conjugating the
recursion through the piecewise-log map, the dual max-chain, and the
delayed random walk.  Distributional identities between these objects are
what the test suite and the acceptance experiments verify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError
from .laws import JointLaw
from .maps import f_inv, f_map, jump_field
from .streams import RandomStream

__all__ = [
    "Trajectory", "DInfSample", "simulate_path", "simulate_paths",
    "simulate_d_infinity", "d_infinity_pool", "f_map", "f_inv", "jump_field",
    "step_associated", "step_affine", "step_dual_max", "step_delayed_walk",
    "drift_rate",
]

# Draws are consumed in blocks of this size by the adaptive sampler.
_BLOCK = 64
# Let the running drift estimate stabilise before allowing a stop.
_MIN_STEPS = 8


@dataclass
class Trajectory:
    """One simulated path of the coupled recursions, indexed k = 1..n."""

    xi: np.ndarray
    eta: np.ndarray
    S: np.ndarray
    D: np.ndarray
    Dt: np.ndarray
    M: np.ndarray
    Mt: np.ndarray

    @property
    def n(self) -> int:
        return len(self.xi)


@dataclass
class DInfSample:
    value: float
    terms_used: int
    converged: bool
    residual_bound: float


def drift_rate(joint: JointLaw) -> float:
    """a = -E xi; positive in the stable regime."""
    return -joint.xi_mean()


def simulate_path(joint: JointLaw, n: int, stream: RandomStream) -> Trajectory:
    """One path of length n from one stream of i.i.d. pairs."""
    if n < 1:
        raise DomainError("simulate_path requires n >= 1")
    rng = stream.generator()
    xi, eta = joint.sample(rng, (1, n))
    xi = np.ascontiguousarray(xi, dtype=float)
    eta = np.ascontiguousarray(eta, dtype=float)
    S, D, Dt, M, Mt = kernels.paths(xi, eta)
    return Trajectory(xi[0], eta[0], S[0], D[0], Dt[0], M[0], Mt[0])


def simulate_paths(joint: JointLaw, n: int, n_paths: int,
                   rng: np.random.Generator):
    """Batch variant: (S, D, Dt, M, Mt) matrices of shape (n_paths, n)."""
    xi, eta = joint.sample(rng, (n_paths, n))
    xi = np.ascontiguousarray(xi, dtype=float)
    eta = np.ascontiguousarray(eta, dtype=float)
    return kernels.paths(xi, eta)


def _check_stable(joint: JointLaw, assume_stable: bool) -> None:
    law = joint.xi_law()
    if law is not None:
        if not law.mean() < 0:
            raise DomainError("d-infinity sampling requires E xi < 0")
    elif not assume_stable:
        raise DomainError(
            "xi mean unavailable in closed form; pass assume_stable=True "
            "to assert E xi < 0"
        )


def _eta_q999(joint: JointLaw, rng: np.random.Generator) -> float:
    """0.999-quantile of |eta|, closed form when the law allows."""
    law = joint.eta_law()
    if law is not None and law.support_min() >= 0:
        q = law.quantile(0.999)
        if q is not None:
            return float(q)
    _, eta = joint.sample(rng, 100_000)
    return float(np.quantile(np.abs(eta), 0.999))


def _residual_bound(S: np.ndarray, nsteps, q999: float) -> np.ndarray:
    """Probabilistic bound on the remaining tail of the series.

    Uses the running drift estimate a_hat = -S_n/n with slack a_hat/2; the
    geometric factor dominates sum_{k>n} q999 e^{-(a_hat/2)k} style tails.
    Not an a.s. bound: the convergence flag means "bound satisfied".
    """
    a_hat = -S / np.maximum(nsteps, 1)
    with np.errstate(over="ignore", divide="ignore"):
        geom = np.where(a_hat > 0, 1.0 / -np.expm1(-a_hat / 2.0), np.inf)
        return np.exp(S) * q999 * geom


def d_infinity_pool(joint: JointLaw, tol: float, n_cap: int,
                    rng: np.random.Generator, n_samples: int,
                    assume_stable: bool = False):
    """Adaptive-horizon samples of the convergent perpetuity.

    Returns (values, terms_used, converged) arrays.  Each sample stops at
    the first block boundary where the residual bound drops below
    tol * max(1, |D_n|), or at n_cap.
    """
    _check_stable(joint, assume_stable)
    q999 = _eta_q999(joint, rng)
    values = np.zeros(n_samples)
    terms = np.zeros(n_samples, dtype=np.int64)
    converged = np.zeros(n_samples, dtype=bool)
    residual = np.zeros(n_samples)

    active = np.arange(n_samples)
    S = np.zeros(n_samples)
    D = np.zeros(n_samples)
    nsteps = np.zeros(n_samples, dtype=np.int64)

    while active.size:
        xi, eta = joint.sample(rng, (active.size, _BLOCK))
        xi = np.ascontiguousarray(xi, dtype=float)
        eta = np.ascontiguousarray(eta, dtype=float)
        s_a = S[active].copy()
        d_a = D[active].copy()
        kernels.advance(s_a, d_a, xi, eta)
        S[active] = s_a
        D[active] = d_a
        nsteps[active] += _BLOCK
        bound = _residual_bound(s_a, nsteps[active], q999)
        ok = (bound < tol * np.maximum(1.0, np.abs(d_a))) & (nsteps[active] >= _MIN_STEPS)
        capped = nsteps[active] >= n_cap
        done = ok | capped
        fin = active[done]
        values[fin] = D[fin]
        terms[fin] = nsteps[fin]
        converged[fin] = ok[done]
        residual[fin] = bound[done]
        active = active[~done]
    return values, terms, converged, residual


def simulate_d_infinity(joint: JointLaw, tol: float, n_cap: int,
                        stream: RandomStream,
                        assume_stable: bool = False) -> DInfSample:
    """One adaptive sample of the perpetuity with its convergence record."""
    rng = stream.generator()
    values, terms, conv, resid = d_infinity_pool(
        joint, tol, n_cap, rng, 1, assume_stable=assume_stable)
    return DInfSample(float(values[0]), int(terms[0]), bool(conv[0]), float(resid[0]))


# -- single steps of the various chains -------------------------------------


def step_associated(x, pair):
    """x + jump of the conjugated chain; start the chain at f(eta_1 e^{xi_1})."""
    xi, eta = pair
    return x + jump_field(x, xi, eta)


def step_affine(r, pair):
    """Affine recursion r -> eta + e^xi r."""
    xi, eta = pair
    return eta + np.exp(xi) * r


def step_dual_max(m, pair):
    """Dual chain m -> e^xi (m + eta)^+; defined on m >= 0."""
    if np.any(np.asarray(m) < 0):
        raise DomainError("step_dual_max requires m >= 0")
    xi, eta = pair
    return np.exp(xi) * np.maximum(m + eta, 0.0)


def step_delayed_walk(w, xi):
    """Reflected walk w -> (w + xi)^+."""
    return np.maximum(np.asarray(w, dtype=float) + xi, 0.0)


def dual_max_paths(joint: JointLaw, n: int, n_paths: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Matrix of dual-chain values, row per path, column per step."""
    xi, eta = joint.sample(rng, (n_paths, n))
    return kernels.dual_max(np.ascontiguousarray(xi, dtype=float),
                            np.ascontiguousarray(eta, dtype=float))


def associated_paths(joint: JointLaw, n: int, n_paths: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Matrix of associated-chain values X_1..X_n."""
    xi, eta = joint.sample(rng, (n_paths, n))
    return kernels.associated(np.ascontiguousarray(xi, dtype=float),
                              np.ascontiguousarray(eta, dtype=float))


def log_paths(joint: JointLaw, n: int, n_paths: int, rng: np.random.Generator):
    """(S, log D, log Dtilde) matrices; requires eta > 0."""
    if joint.eta_min() < 0:
        raise DomainError("log-domain paths require eta >= 0")
    xi, eta = joint.sample(rng, (n_paths, n))
    with np.errstate(divide="ignore"):
        log_eta = np.log(np.maximum(eta, 0.0))
    return kernels.log_paths(np.ascontiguousarray(xi, dtype=float),
                             np.ascontiguousarray(log_eta, dtype=float))
