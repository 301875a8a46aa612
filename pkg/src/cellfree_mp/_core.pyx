# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: inverse-SINR fields, simplex projection and the MP loop.

Same call signatures and return layout as ``_pykernels``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, INFINITY, isfinite
from posix.time cimport clock_gettime, timespec, CLOCK_MONOTONIC

cnp.import_array()

cdef enum:
    STATUS_TOL = 0
    STATUS_MAXITER = 1
    STATUS_UNDERFLOW = 2
    STATUS_NONFINITE = 3


cdef inline double _now() nogil:
    cdef timespec ts
    clock_gettime(CLOCK_MONOTONIC, &ts)
    return ts.tv_sec + 1e-9 * ts.tv_nsec


cdef void _fields(const double[:, ::1] C, const double[::1] cbar,
                  const double[::1] theta, const double[::1] lam,
                  double[::1] u, double[::1] inv_u, double[::1] w,
                  double[::1] f, double[::1] g, bint want_grad) noexcept nogil:
    cdef Py_ssize_t n = theta.shape[0]
    cdef Py_ssize_t l, k
    cdef double m = theta[0]
    cdef double em, acc, wl, c
    for k in range(1, n):
        if theta[k] > m:
            m = theta[k]
    em = exp(-m)
    for k in range(n):
        u[k] = exp(theta[k] - m)
        inv_u[k] = exp(m - theta[k])
        w[k] = 0.0
    if want_grad:
        for l in range(n):
            acc = 0.0
            wl = lam[l] * inv_u[l]
            for k in range(n):
                c = C[l, k]
                acc = acc + c * u[k]
                w[k] = w[k] + wl * c
            f[l] = (acc + cbar[l] * em) * inv_u[l]
        for k in range(n):
            g[k] = w[k] * u[k] - lam[k] * f[k]
    else:
        for l in range(n):
            acc = 0.0
            for k in range(n):
                acc = acc + C[l, k] * u[k]
            f[l] = (acc + cbar[l] * em) * inv_u[l]


cdef void _project_simplex(const double[::1] x, double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k, it, cnt
    cdef double hi, lo, mid, s, beta, lo_val, hi_val, v
    if n == 1:
        out[0] = 1.0
        return
    hi = x[0]
    for k in range(1, n):
        if x[k] > hi:
            hi = x[k]
    lo = hi - 1.0
    beta = lo
    for it in range(200):
        mid = 0.5 * (lo + hi)
        cnt = 0
        s = 0.0
        lo_val = -INFINITY
        hi_val = INFINITY
        for k in range(n):
            v = x[k]
            if v > mid:
                cnt += 1
                s += v
                if v < hi_val:
                    hi_val = v
            elif v > lo_val:
                lo_val = v
        beta = (s - 1.0) / cnt
        if lo_val <= beta and beta < hi_val:
            break
        if s - mid * cnt > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 0.0:
            break
    for k in range(n):
        v = x[k] - beta
        out[k] = v if v > 0.0 else 0.0


def f_values(theta, C, cbar):
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef Py_ssize_t n = th.shape[0]
    f = np.empty(n)
    tmp = np.empty((3, n))
    cdef double[:, ::1] t = tmp
    _fields(np.ascontiguousarray(C, dtype=np.float64), np.ascontiguousarray(cbar, dtype=np.float64),
            th, th, t[0], t[1], t[2], f, f, False)
    return f


def f_and_grad(theta, lam, C, cbar):
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef Py_ssize_t n = th.shape[0]
    f = np.empty(n)
    g = np.empty(n)
    tmp = np.empty((3, n))
    cdef double[:, ::1] t = tmp
    _fields(np.ascontiguousarray(C, dtype=np.float64), np.ascontiguousarray(cbar, dtype=np.float64),
            th, np.ascontiguousarray(lam, dtype=np.float64), t[0], t[1], t[2], f, g, True)
    return f, g


def project_simplex(x):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(xv.shape[0])
    _project_simplex(xv, out)
    return out


cdef inline bint _all_finite(const double[::1] a) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(a.shape[0]):
        if not isfinite(a[k]):
            return False
    return True


cdef double _trial(const double[:, ::1] C, const double[::1] cbar, double theta_bar, double mu,
                   const double[::1] th, const double[::1] la,
                   const double[::1] f0, const double[::1] g0,
                   double[::1] th_hat, double[::1] lam_hat,
                   double[::1] th_new, double[::1] lam_new,
                   double[::1] f_h, double[::1] g_h,
                   double[::1] buf, double[::1] u, double[::1] inv_u, double[::1] w) noexcept nogil:
    # displacements and centered fields, see _pykernels.extragradient
    cdef Py_ssize_t n = th.shape[0]
    cdef Py_ssize_t k
    cdef double v, room, dh, dn, eh, en, fmax, acc = 0.0, sq = 0.0
    fmax = f0[0]
    for k in range(1, n):
        if f0[k] > fmax:
            fmax = f0[k]
    for k in range(n):
        room = theta_bar - th[k]
        v = -mu * g0[k]
        th_hat[k] = th[k] + v if v < room else theta_bar
        buf[k] = la[k] + mu * (f0[k] - fmax)
    _project_simplex(buf, lam_hat)
    _fields(C, cbar, th_hat, lam_hat, u, inv_u, w, f_h, g_h, True)
    if not (_all_finite(f_h) and _all_finite(g_h)):
        return INFINITY
    fmax = f_h[0]
    for k in range(1, n):
        if f_h[k] > fmax:
            fmax = f_h[k]
    for k in range(n):
        room = theta_bar - th[k]
        v = -mu * g_h[k]
        th_new[k] = th[k] + v if v < room else theta_bar
        buf[k] = la[k] + mu * (f_h[k] - fmax)
    _project_simplex(buf, lam_new)
    for k in range(n):
        room = theta_bar - th[k]
        v = -mu * g0[k]
        dh = v if v < room else room
        v = -mu * g_h[k]
        dn = v if v < room else room
        eh = lam_hat[k] - la[k]
        en = lam_new[k] - la[k]
        acc += g_h[k] * (dh - dn) - (f_h[k] - fmax) * (eh - en)
        sq += dn * dn + en * en
    return mu * acc - 0.5 * sq


def extragradient(theta, lam, f0, g0, C, cbar, double theta_bar, double mu):
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef const double[::1] la = np.ascontiguousarray(lam, dtype=np.float64)
    cdef const double[::1] fz = np.ascontiguousarray(f0, dtype=np.float64)
    cdef const double[::1] gz = np.ascontiguousarray(g0, dtype=np.float64)
    cdef const double[:, ::1] Cv = np.ascontiguousarray(C, dtype=np.float64)
    cdef const double[::1] cb = np.ascontiguousarray(cbar, dtype=np.float64)
    cdef Py_ssize_t n = th.shape[0]
    arrs = np.empty((10, n))
    cdef double[:, ::1] A = arrs
    cdef double delta = _trial(Cv, cb, theta_bar, mu, th, la, fz, gz,
                               A[0], A[1], A[2], A[3], A[4], A[5], A[6], A[7], A[8], A[9])
    return (arrs[0].copy(), arrs[1].copy(), arrs[2].copy(), arrs[3].copy(),
            arrs[4].copy(), arrs[5].copy(), delta)


def mp_loop(C, cbar, double theta_bar, theta0, lam0, double mu0, double rho,
            int max_iter, double tol, int max_backtracks):
    cdef const double[:, ::1] Cv = np.ascontiguousarray(C, dtype=np.float64)
    cdef const double[::1] cb = np.ascontiguousarray(cbar, dtype=np.float64)
    cdef Py_ssize_t n = Cv.shape[0]
    theta_a = np.array(theta0, dtype=np.float64)
    lam_a = np.array(lam0, dtype=np.float64)
    work = np.zeros((14, n))
    obj_a = np.empty(max(max_iter, 0))
    mus_a = np.empty(max(max_iter, 0))
    del_a = np.empty(max(max_iter, 0))
    tim_a = np.empty(max(max_iter, 0))
    cdef double[::1] theta = theta_a
    cdef double[::1] lam = lam_a
    cdef double[:, ::1] W = work
    cdef double[::1] obj = obj_a
    cdef double[::1] mus = mus_a
    cdef double[::1] dels = del_a
    cdef double[::1] tim = tim_a
    # W rows: 0 f0, 1 g0, 2 th_hat, 3 lam_hat, 4 th_new, 5 lam_new, 6 f_h, 7 g_h,
    #         8 buf, 9 u, 10 inv_u, 11 w, 12 num_th, 13 num_lam
    avg_a = np.empty(n)
    cdef double[::1] avg = avg_a
    cdef double mu, mu_prev = mu0, den = 0.0, delta = 0.0, fmax, t0, fail_mu = 0.0
    cdef int it, bt, status = STATUS_MAXITER, n_done = 0
    cdef long n_evals = 0
    cdef bint accepted
    cdef Py_ssize_t k
    with nogil:
        t0 = _now()
        for it in range(max_iter):
            _fields(Cv, cb, theta, lam, W[9], W[10], W[11], W[0], W[1], True)
            n_evals += 1
            if not (_all_finite(W[0]) and _all_finite(W[1])):
                status = STATUS_NONFINITE
                break
            mu = mu_prev / rho
            accepted = False
            for bt in range(max_backtracks):
                delta = _trial(Cv, cb, theta_bar, mu, theta, lam, W[0], W[1],
                               W[2], W[3], W[4], W[5], W[6], W[7], W[8], W[9], W[10], W[11])
                n_evals += 1
                if delta <= 0.0:
                    accepted = True
                    break
                mu = mu * rho
            if not accepted:
                status = STATUS_UNDERFLOW
                fail_mu = mu
                break
            den = den + mu
            for k in range(n):
                W[12, k] = W[12, k] + mu * theta[k]
                W[13, k] = W[13, k] + mu * lam[k]
                theta[k] = W[4, k]
                lam[k] = W[5, k]
            for k in range(n):
                avg[k] = W[12, k] / den
            _fields(Cv, cb, avg, avg, W[9], W[10], W[11], W[6], W[6], False)
            fmax = W[6, 0]
            for k in range(1, n):
                if W[6, k] > fmax:
                    fmax = W[6, k]
            obj[it] = fmax
            mus[it] = mu
            dels[it] = delta
            tim[it] = _now() - t0
            n_done = it + 1
            mu_prev = mu
            if it > 0 and fabs(obj[it] - obj[it - 1]) < tol:
                status = STATUS_TOL
                break
    if den > 0:
        th_avg = work[12] / den
        lam_avg = work[13] / den
    else:
        th_avg = np.array(theta0, dtype=np.float64)
        lam_avg = np.array(lam0, dtype=np.float64)
    return (th_avg, lam_avg, obj_a[:n_done].copy(), mus_a[:n_done].copy(),
            del_a[:n_done].copy(), tim_a[:n_done].copy(), n_done, status, n_evals,
            fail_mu, theta_a, lam_a)
