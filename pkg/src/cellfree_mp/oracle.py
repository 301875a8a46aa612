"""Ground-truth solvers for the max-min SINR power subproblem.

These work in power space on the unscaled coefficients ``a``, ``b``, ``c``
of a reduced problem and never touch the saddle-point machinery.
"""

import itertools

import numpy as np

__all__ = ["sinr_from_coefficients", "feasible", "bisection_maxmin", "grid_search_maxmin"]


def _coupling(rp):
    # I_l(p) = sum_{i != l}(a_li + b_li) p_i + b_ll p_l + c_l = (C p)_l + c_l
    return np.asarray(rp.a + rp.b, dtype=float), np.asarray(rp.cbar / rp.omega, dtype=float)


def sinr_from_coefficients(p, rp):
    C, c = _coupling(rp)
    p = np.asarray(p, dtype=float)
    return p / (C @ p + c)


def feasible(t, rp, p_max=None, max_iter=1_000_000, rtol=1e-12):
    """Decide whether every user can reach SINR ``t`` under the power limit.

    Runs the capped fixed-point iteration ``p <- min(t * (C p + c), p_max)``
    from zero.  The map is a standard interference function, so the sequence
    increases monotonically to the least fixed point.

    Returns
    -------
    ok : bool
    p : ndarray
        The fixed point; a witness when ``ok`` is True.
    """
    if t <= 0:
        raise ValueError("SINR target must be positive")
    C, c = _coupling(rp)
    p_max = rp.p_max if p_max is None else p_max
    p = np.zeros(c.shape[0])
    step_tol = rtol * p_max
    for _ in range(max_iter):
        nxt = np.minimum(t * (C @ p + c), p_max)
        done = np.max(np.abs(nxt - p)) < step_tol
        p = nxt
        if done:
            break
    gamma = p / (C @ p + c)
    return bool(np.all(gamma >= t * (1.0 - 1e-9))), p


def bisection_maxmin(rp, p_max=None, eps=1e-6):
    """Largest common SINR target by bisection on feasibility.

    The bracket starts at ``[0, max_l p_max / c_l]`` and is shrunk until its
    width falls below ``eps`` times the lower end.

    Returns
    -------
    t : float
        Last feasible target.
    p : ndarray
        Its witness powers.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    _, c = _coupling(rp)
    p_max = rp.p_max if p_max is None else p_max
    lo, hi = 0.0, float(np.max(p_max / c))
    p_lo = np.zeros(c.shape[0])
    while hi - lo >= eps * lo or lo == 0.0:
        mid = 0.5 * (lo + hi)
        ok, p = feasible(mid, rp, p_max)
        if ok:
            lo, p_lo = mid, p
        else:
            hi = mid
        if hi - lo <= np.finfo(float).tiny:
            break
    return lo, p_lo


def grid_search_maxmin(rp, p_max=None, grid_n=100):
    """Brute-force max-min SINR over a uniform grid on ``[0, p_max]^L``.

    Only for ``L <= 3``.
    """
    L = rp.num_users
    if L > 3:
        raise ValueError("grid search is limited to at most 3 users")
    if grid_n < 10:
        raise ValueError("grid_n must be at least 10")
    p_max = rp.p_max if p_max is None else p_max
    C, c = _coupling(rp)
    axis = np.linspace(0.0, p_max, grid_n)
    P = np.array(list(itertools.product(axis, repeat=L)))
    den = P @ C.T + c
    worst = np.min(P / den, axis=1)
    k = int(np.argmax(worst))
    return float(worst[k]), P[k].copy()
