"""Pure-numpy recursion kernels.

Each function advances a batch of paths one column of draws at a time, so
the per-path sequence of floating operations matches the compiled backend
exactly for the draw-matrix kernels.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

# Double-precision copies of the conjugation map and jump field.  The
# reference implementations in perpsim.maps carry extended precision; the
# kernels deliberately stay in float64 to match the compiled backend.

_E = float(np.e)
_DIRECT_CUT = 50.0


def _cf(x):
    return np.where(x >= _E, np.log(np.maximum(np.abs(x), _E)),
                    np.where(x <= -_E,
                             -np.log(np.maximum(np.abs(x), _E)), x / _E))


def _cfinv(y):
    with np.errstate(over="ignore"):
        return np.where(y >= 1.0, np.exp(y * (y >= 1.0)),
                        np.where(y <= -1.0, -np.exp(-y * (y <= -1.0)), _E * y))


def _f_from_log(sign, logabs):
    small = logabs < 1.0
    return np.where(small, sign * np.exp(np.where(small, logabs, 0.0)) / _E,
                    sign * logabs)


def _cjump(y, xi, eta):
    y = np.asarray(y, dtype=float)
    direct = np.abs(y) <= _DIRECT_CUT
    y_safe = np.where(direct, y, 0.0)
    with np.errstate(over="ignore", invalid="ignore"):
        res = np.where(
            direct, _cf(eta * np.exp(xi) + np.exp(xi) * _cfinv(y_safe)) - y,
            0.0)
    hi = y > _DIRECT_CUT
    lo = y < -_DIRECT_CUT
    if np.any(hi):
        t = eta * np.exp(-np.where(hi, y, _DIRECT_CUT))
        one_pt = 1.0 + t
        logabs = np.where(t > -0.5, np.log1p(t),
                          np.log(np.maximum(np.abs(one_pt), 1e-300)))
        res = np.where(hi,
                       _f_from_log(np.sign(one_pt), xi + y + logabs) - y, res)
    if np.any(lo):
        u = eta * np.exp(np.where(lo, y, -_DIRECT_CUT))
        um1 = u - 1.0
        logabs = np.where(u < 0.5, np.log1p(-u),
                          np.log(np.maximum(np.abs(um1), 1e-300)))
        res = np.where(lo,
                       _f_from_log(np.sign(um1), xi - y + logabs) - y, res)
    return res


def paths(xi: np.ndarray, eta: np.ndarray):
    """Perpetuity recursion over a (n_paths, n) matrix of draws.

    Returns (S, D, Dt, M, Mt), each (n_paths, n): the driving walk, the
    perpetuity and its pre-increment variant, and their running maxima.
    """
    n_paths, n = xi.shape
    S = np.empty_like(xi)
    D = np.empty_like(xi)
    Dt = np.empty_like(xi)
    M = np.empty_like(xi)
    Mt = np.empty_like(xi)
    s = np.zeros(n_paths)
    d = np.zeros(n_paths)
    dt = np.zeros(n_paths)
    m = np.full(n_paths, -np.inf)
    mt = np.full(n_paths, -np.inf)
    for k in range(n):
        dt = dt + eta[:, k] * np.exp(s)
        s = s + xi[:, k]
        d = d + eta[:, k] * np.exp(s)
        m = np.maximum(m, d)
        mt = np.maximum(mt, dt)
        S[:, k] = s
        D[:, k] = d
        Dt[:, k] = dt
        M[:, k] = m
        Mt[:, k] = mt
    return S, D, Dt, M, Mt


def log_paths(xi: np.ndarray, log_eta: np.ndarray):
    """Log-domain perpetuity recursion (requires eta > 0).

    Returns (S, logD, logDt); safe for horizons where D itself overflows.
    """
    n_paths, n = xi.shape
    S = np.empty_like(xi)
    logD = np.empty_like(xi)
    logDt = np.empty_like(xi)
    s = np.zeros(n_paths)
    ld = np.full(n_paths, -np.inf)
    ldt = np.full(n_paths, -np.inf)
    for k in range(n):
        ldt = np.logaddexp(ldt, log_eta[:, k] + s)
        s = s + xi[:, k]
        ld = np.logaddexp(ld, log_eta[:, k] + s)
        S[:, k] = s
        logD[:, k] = ld
        logDt[:, k] = ldt
    return S, logD, logDt


def advance(S: np.ndarray, D: np.ndarray, xi: np.ndarray, eta: np.ndarray):
    """In-place block advance of the (S, D) state; inner loop of the
    adaptive perpetuity sampler."""
    for k in range(xi.shape[1]):
        S += xi[:, k]
        D += eta[:, k] * np.exp(S)


def dual_max(xi: np.ndarray, eta: np.ndarray):
    """Dual chain m -> e^xi (m + eta)^+ from 0; returns the full matrix."""
    n_paths, n = xi.shape
    out = np.empty_like(xi)
    m = np.zeros(n_paths)
    for k in range(n):
        m = np.exp(xi[:, k]) * np.maximum(m + eta[:, k], 0.0)
        out[:, k] = m
    return out


def associated(xi: np.ndarray, eta: np.ndarray):
    """Associated additive chain started at X_1 = f(eta_1 e^{xi_1})."""
    n_paths, n = xi.shape
    out = np.empty_like(xi)
    x = _cf(eta[:, 0] * np.exp(xi[:, 0]))
    out[:, 0] = x
    for k in range(1, n):
        x = x + _cjump(x, xi[:, k], eta[:, k])
        out[:, k] = x
    return out


def collect_cycles(sample_fn, rng, count, cum_rows, fu, fv, gu, gv, atom,
                   max_steps):
    """Simulate ``count`` regeneration cycles of the modulated walk.

    ``sample_fn(rng, size)`` draws base pairs; ``cum_rows`` holds row-wise
    transition CDFs.  Returns (tau, S_tau, eta_hat) arrays.  Raises only by
    returning cycles shorter than ``max_steps``; the caller enforces the cap.
    """
    m = cum_rows.shape[0]
    tau = np.zeros(count, dtype=np.int64)
    s_tau = np.zeros(count)
    eta_hat = np.zeros(count)

    active = np.arange(count)
    phi = np.full(count, atom, dtype=np.int64)
    S = np.zeros(count)
    A = np.zeros(count)  # sum of g(phi_k, eta_k) e^{S_k} within the cycle
    steps = np.zeros(count, dtype=np.int64)

    while active.size:
        u = rng.random(active.size)
        xi, eta = sample_fn(rng, active.size)
        rows = cum_rows[phi[active]]
        nxt = (u[:, None] > rows).sum(axis=1)
        steps[active] += 1
        S[active] += fu[nxt] + fv[nxt] * xi
        A[active] += (gu[nxt] + gv[nxt] * eta) * np.exp(S[active])
        phi[active] = nxt
        done = (nxt == atom) | (steps[active] >= max_steps)
        finished = active[done]
        tau[finished] = steps[finished]
        s_tau[finished] = S[finished]
        eta_hat[finished] = A[finished] * np.exp(-S[finished])
        active = active[~done]
    return tau, s_tau, eta_hat
