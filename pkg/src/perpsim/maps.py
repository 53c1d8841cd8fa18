"""The piecewise-log conjugation map, its inverse, and the induced jump field.

``f_map`` squashes the perpetuity onto the real line (log on [e, inf),
minus-log of the absolute value on (-inf, -e], linear in between) so that
the perpetuity recursion becomes an additive Markov chain whose jumps
converge to the law of the increment.

These functions evaluate in extended precision (long double) and return
extended-precision values: the conjugation identities are exercised as
round-trips through log/exp, and in plain doubles the rounding of the log
alone already costs several double-precision ulps.  The compiled path
kernels use ordinary doubles; only these reference maps carry the extra
bits.
"""

from __future__ import annotations

import numpy as np

_E = np.longdouble("2.718281828459045235360287471352662498")

# Beyond this the literal formula for the jump would overflow exp; the
# log-domain branches below are exact up to rounding there.
_DIRECT_CUT = 50.0


def _ld(x):
    return np.asarray(x, dtype=np.longdouble)


def f_map(x):
    """log x for x >= e, -log|x| for x <= -e, x/e in between."""
    x = _ld(x)
    out = np.where(
        x >= _E,
        np.log(np.maximum(x, _E)),
        np.where(x <= -_E, -np.log(np.maximum(-x, _E)), x / _E),
    )
    return out[()] if out.ndim == 0 else out


def f_inv(y):
    """Exact inverse: e^y for y >= 1, -e^{-y} for y <= -1, e*y in between."""
    y = _ld(y)
    with np.errstate(over="ignore"):
        out = np.where(
            y >= 1.0,
            np.exp(y * (y >= 1.0)),
            np.where(y <= -1.0, -np.exp(-y * (y <= -1.0)), _E * y),
        )
    return out[()] if out.ndim == 0 else out


def _f_from_log(sign, logabs):
    """f(v) given sign(v) and log|v|; exact for |v| >= e, linear branch below."""
    small = logabs < 1.0
    lin = sign * np.exp(np.where(small, logabs, _ld(0.0))) / _E
    return np.where(small, lin, sign * logabs)


def jump_field(y, xi, eta):
    """f(eta e^xi + e^xi f_inv(y)) - y, computed without overflow.

    For |y| <= 50 this is evaluated literally, so the defining conjugation
    identity holds to rounding error; beyond that the same value is
    assembled in the log domain.
    """
    y, xi, eta = np.broadcast_arrays(_ld(y), _ld(xi), _ld(eta))

    direct = np.abs(y) <= _DIRECT_CUT
    y_safe = np.where(direct, y, _ld(0.0))
    with np.errstate(over="ignore", invalid="ignore"):
        v = eta * np.exp(xi) + np.exp(xi) * f_inv(y_safe)
        res = np.where(direct, f_map(v) - y, _ld(0.0))

    hi = y > _DIRECT_CUT
    lo = y < -_DIRECT_CUT

    if np.any(hi):
        # v = e^{xi+y}(1+t), t = eta e^{-y}
        t = eta * np.exp(-np.where(hi, y, _ld(_DIRECT_CUT)))
        one_pt = 1.0 + t
        sign = np.sign(one_pt)
        logabs = np.where(
            t > -0.5, np.log1p(t),
            np.log(np.maximum(np.abs(one_pt), _ld(1e-300))),
        )
        res = np.where(hi, _f_from_log(sign, xi + y + logabs) - y, res)

    if np.any(lo):
        # v = e^{xi-y}(u-1), u = eta e^{y}
        u = eta * np.exp(np.where(lo, y, _ld(-_DIRECT_CUT)))
        um1 = u - 1.0
        sign = np.sign(um1)
        logabs = np.where(
            u < 0.5, np.log1p(-u),
            np.log(np.maximum(np.abs(um1), _ld(1e-300))),
        )
        res = np.where(lo, _f_from_log(sign, xi - y + logabs) - y, res)

    return res[()] if res.ndim == 0 else res
