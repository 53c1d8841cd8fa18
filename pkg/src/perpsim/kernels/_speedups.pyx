# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled recursion kernels; drop-in twins of the numpy backend."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, log1p, fabs, fmax, INFINITY

cnp.import_array()

NAME = "compiled"

cdef double _E = 2.718281828459045
cdef double _DIRECT_CUT = 50.0


cdef inline double cf(double x) nogil:
    if x >= _E:
        return log(x)
    if x <= -_E:
        return -log(-x)
    return x / _E


cdef inline double cfinv(double y) nogil:
    if y >= 1.0:
        return exp(y)
    if y <= -1.0:
        return -exp(-y)
    return _E * y


cdef inline double _f_from_log(double sign, double logabs) nogil:
    if logabs < 1.0:
        return sign * exp(logabs) / _E
    return sign * logabs


cdef inline double cjump(double y, double xi, double eta) nogil:
    cdef double t, u, lv, s
    if fabs(y) <= _DIRECT_CUT:
        return cf(eta * exp(xi) + exp(xi) * cfinv(y)) - y
    if y > _DIRECT_CUT:
        t = eta * exp(-y)
        if t > -0.5:
            lv = xi + y + log1p(t)
            s = 1.0
        else:
            s = 1.0 if 1.0 + t > 0 else -1.0
            lv = xi + y + log(fmax(fabs(1.0 + t), 1e-300))
        return _f_from_log(s, lv) - y
    u = eta * exp(y)
    if u < 0.5:
        lv = xi - y + log1p(-u)
        s = -1.0
    else:
        s = 1.0 if u - 1.0 > 0 else -1.0
        lv = xi - y + log(fmax(fabs(u - 1.0), 1e-300))
    return _f_from_log(s, lv) - y


cdef inline double logaddexp(double a, double b) nogil:
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


def paths(double[:, ::1] xi, double[:, ::1] eta):
    cdef Py_ssize_t n_paths = xi.shape[0], n = xi.shape[1], i, k
    S_ = np.empty((n_paths, n)); D_ = np.empty((n_paths, n))
    Dt_ = np.empty((n_paths, n)); M_ = np.empty((n_paths, n))
    Mt_ = np.empty((n_paths, n))
    cdef double[:, ::1] S = S_, D = D_, Dt = Dt_, M = M_, Mt = Mt_
    cdef double s, d, dt, m, mt
    with nogil:
        for i in range(n_paths):
            s = 0.0; d = 0.0; dt = 0.0; m = -INFINITY; mt = -INFINITY
            for k in range(n):
                dt = dt + eta[i, k] * exp(s)
                s = s + xi[i, k]
                d = d + eta[i, k] * exp(s)
                if d > m: m = d
                if dt > mt: mt = dt
                S[i, k] = s; D[i, k] = d; Dt[i, k] = dt
                M[i, k] = m; Mt[i, k] = mt
    return S_, D_, Dt_, M_, Mt_


def log_paths(double[:, ::1] xi, double[:, ::1] log_eta):
    cdef Py_ssize_t n_paths = xi.shape[0], n = xi.shape[1], i, k
    S_ = np.empty((n_paths, n)); LD_ = np.empty((n_paths, n))
    LDt_ = np.empty((n_paths, n))
    cdef double[:, ::1] S = S_, LD = LD_, LDt = LDt_
    cdef double s, ld, ldt
    with nogil:
        for i in range(n_paths):
            s = 0.0; ld = -INFINITY; ldt = -INFINITY
            for k in range(n):
                ldt = logaddexp(ldt, log_eta[i, k] + s)
                s = s + xi[i, k]
                ld = logaddexp(ld, log_eta[i, k] + s)
                S[i, k] = s; LD[i, k] = ld; LDt[i, k] = ldt
    return S_, LD_, LDt_


def advance(double[::1] S, double[::1] D, double[:, ::1] xi, double[:, ::1] eta):
    cdef Py_ssize_t n_paths = xi.shape[0], n = xi.shape[1], i, k
    cdef double s, d
    with nogil:
        for i in range(n_paths):
            s = S[i]; d = D[i]
            for k in range(n):
                s = s + xi[i, k]
                d = d + eta[i, k] * exp(s)
            S[i] = s; D[i] = d


def dual_max(double[:, ::1] xi, double[:, ::1] eta):
    cdef Py_ssize_t n_paths = xi.shape[0], n = xi.shape[1], i, k
    out_ = np.empty((n_paths, n))
    cdef double[:, ::1] out = out_
    cdef double m
    with nogil:
        for i in range(n_paths):
            m = 0.0
            for k in range(n):
                m = exp(xi[i, k]) * fmax(m + eta[i, k], 0.0)
                out[i, k] = m
    return out_


def associated(double[:, ::1] xi, double[:, ::1] eta):
    cdef Py_ssize_t n_paths = xi.shape[0], n = xi.shape[1], i, k
    out_ = np.empty((n_paths, n))
    cdef double[:, ::1] out = out_
    cdef double x
    with nogil:
        for i in range(n_paths):
            x = cf(eta[i, 0] * exp(xi[i, 0]))
            out[i, 0] = x
            for k in range(1, n):
                x = x + cjump(x, xi[i, k], eta[i, k])
                out[i, k] = x
    return out_


def collect_cycles(sample_fn, rng, Py_ssize_t count, double[:, ::1] cum_rows,
                   double[::1] fu, double[::1] fv, double[::1] gu,
                   double[::1] gv, Py_ssize_t atom, Py_ssize_t max_steps):
    cdef Py_ssize_t m = cum_rows.shape[0]
    tau_ = np.zeros(count, dtype=np.int64)
    s_tau_ = np.zeros(count)
    eta_hat_ = np.zeros(count)
    cdef long long[::1] tau = tau_
    cdef double[::1] s_tau = s_tau_, eta_hat = eta_hat_

    cdef Py_ssize_t BUF = 1 << 16
    cdef Py_ssize_t pos = BUF  # force initial refill
    cdef double[::1] ub, xib, etab
    ub = xib = etab = None

    cdef Py_ssize_t i, steps, phi, nxt, j
    cdef double S, A, u

    for i in range(count):
        phi = atom; S = 0.0; A = 0.0; steps = 0
        while True:
            if pos >= BUF:
                u_arr = rng.random(BUF)
                xi_arr, eta_arr = sample_fn(rng, BUF)
                ub = np.ascontiguousarray(u_arr, dtype=np.float64)
                xib = np.ascontiguousarray(xi_arr, dtype=np.float64)
                etab = np.ascontiguousarray(eta_arr, dtype=np.float64)
                pos = 0
            u = ub[pos]
            nxt = 0
            for j in range(m):
                if u > cum_rows[phi, j]:
                    nxt += 1
                else:
                    break
            steps += 1
            S += fu[nxt] + fv[nxt] * xib[pos]
            A += (gu[nxt] + gv[nxt] * etab[pos]) * exp(S)
            phi = nxt
            pos += 1
            if nxt == atom or steps >= max_steps:
                break
        tau[i] = steps
        s_tau[i] = S
        eta_hat[i] = A * exp(-S)
    return tau_, s_tau_, eta_hat_
