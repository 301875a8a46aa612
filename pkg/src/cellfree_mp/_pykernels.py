"""Pure numpy implementation of the hot kernels.

Mirrors ``_core.pyx`` call for call; used when the compiled extension is
missing or ``CELLFREE_MP_BACKEND=python`` is set.

The coupling matrix ``C`` is ``a + b`` with ``a_ll = 0`` so that

    f_l(theta) = sum_i C_li exp(theta_i - theta_l) + cbar_l exp(-theta_l).
"""

import time

import numpy as np

STATUS_TOL, STATUS_MAXITER, STATUS_UNDERFLOW, STATUS_NONFINITE = 0, 1, 2, 3


def f_values(theta, C, cbar):
    m = theta.max()
    with np.errstate(over="ignore", invalid="ignore"):
        u = np.exp(theta - m)
        inv_u = np.exp(m - theta)
        return (C @ u + cbar * np.exp(-m)) * inv_u


def f_and_grad(theta, lam, C, cbar):
    """Return ``(f(theta), grad_theta sum_l lam_l f_l(theta))``."""
    m = theta.max()
    # overflow shows up as non-finite output, which the callers check
    with np.errstate(over="ignore", invalid="ignore"):
        u = np.exp(theta - m)
        inv_u = np.exp(m - theta)
        f = (C @ u + cbar * np.exp(-m)) * inv_u
        g = ((lam * inv_u) @ C) * u - lam * f
    return f, g


def project_simplex(x):
    """Euclidean projection onto the unit simplex by bisection on the shift.

    The bracket is shrunk until the active set is pinned down, after which
    the shift is solved exactly on that set.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n == 1:
        return np.ones(1)
    hi = x.max()
    lo = hi - 1.0
    beta = lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        act = x > mid
        cnt = act.sum()
        s = x[act].sum()
        beta = (s - 1.0) / cnt
        below = x[~act]
        lo_val = below.max() if below.size else -np.inf
        hi_val = x[act].min()
        if lo_val <= beta < hi_val:
            break
        if s - mid * cnt > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 0.0:
            break
    return np.maximum(x - beta, 0.0)


def extragradient(theta, lam, f0, g0, C, cbar, theta_bar, mu):
    """One extragradient trial at step ``mu`` from ``(theta, lam)``.

    ``f0``/``g0`` are the fields at the current point.  Returns the
    intermediate point, the next point, the fields at the intermediate point
    and the step acceptance quantity ``delta``.
    """
    # Work with displacements and centered fields: the simplex projection is
    # invariant to adding a constant, and both forms keep delta free of the
    # cancellation between O(f) and O(theta) sized terms near the saddle.
    room = theta_bar - theta
    d_hat = np.minimum(-mu * g0, room)
    th_hat = np.where(-mu * g0 < room, theta + d_hat, theta_bar)
    lam_hat = project_simplex(lam + mu * (f0 - f0.max()))
    f_h, g_h = f_and_grad(th_hat, lam_hat, C, cbar)
    if not (np.all(np.isfinite(f_h)) and np.all(np.isfinite(g_h))):
        return th_hat, lam_hat, th_hat, lam_hat, f_h, g_h, np.inf
    d_new = np.minimum(-mu * g_h, room)
    th_new = np.where(-mu * g_h < room, theta + d_new, theta_bar)
    fc = f_h - f_h.max()
    lam_new = project_simplex(lam + mu * fc)
    e_hat = lam_hat - lam
    e_new = lam_new - lam
    delta = (mu * (g_h @ (d_hat - d_new)) - mu * (fc @ (e_hat - e_new))
             - 0.5 * (d_new @ d_new) - 0.5 * (e_new @ e_new))
    return th_hat, lam_hat, th_new, lam_new, f_h, g_h, float(delta)


def mp_loop(C, cbar, theta_bar, theta0, lam0, mu0, rho, max_iter, tol, max_backtracks):
    C = np.ascontiguousarray(C, dtype=float)
    cbar = np.asarray(cbar, dtype=float)
    theta = np.array(theta0, dtype=float)
    lam = np.array(lam0, dtype=float)
    num_th = np.zeros_like(theta)
    num_lam = np.zeros_like(lam)
    den = 0.0
    obj = np.empty(max_iter)
    mus = np.empty(max_iter)
    deltas = np.empty(max_iter)
    times = np.empty(max_iter)
    mu_prev = mu0
    status = STATUS_MAXITER
    n_done = 0
    n_evals = 0
    fail_mu = 0.0
    t0 = time.perf_counter()
    for n in range(max_iter):
        f0, g0 = f_and_grad(theta, lam, C, cbar)
        n_evals += 1
        if not (np.all(np.isfinite(f0)) and np.all(np.isfinite(g0))):
            status = STATUS_NONFINITE
            break
        mu = mu_prev / rho
        accepted = False
        for _ in range(max_backtracks):
            _, _, th_new, lam_new, f_h, g_h, delta = extragradient(
                theta, lam, f0, g0, C, cbar, theta_bar, mu)
            n_evals += 1
            if not (np.all(np.isfinite(f_h)) and np.all(np.isfinite(g_h))):
                delta = np.inf
            if delta <= 0.0:
                accepted = True
                break
            mu *= rho
        if not accepted:
            status = STATUS_UNDERFLOW
            fail_mu = mu
            break
        num_th += mu * theta
        num_lam += mu * lam
        den += mu
        theta, lam = th_new, lam_new
        obj[n] = f_values(num_th / den, C, cbar).max()
        mus[n] = mu
        deltas[n] = delta
        times[n] = time.perf_counter() - t0
        n_done = n + 1
        mu_prev = mu
        if n > 0 and abs(obj[n] - obj[n - 1]) < tol:
            status = STATUS_TOL
            break
    if den > 0:
        th_avg, lam_avg = num_th / den, num_lam / den
    else:
        th_avg, lam_avg = np.array(theta0, dtype=float), np.array(lam0, dtype=float)
    return (th_avg, lam_avg, obj[:n_done].copy(), mus[:n_done].copy(),
            deltas[:n_done].copy(), times[:n_done].copy(), n_done, status, n_evals,
            fail_mu, theta, lam)
