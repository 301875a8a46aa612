"""Reference first-order solvers for the same power subproblem.

* ``gda_solve``: simultaneous projected gradient descent-ascent on the
  Lagrangian with diminishing steps and step-weighted averaging.
* ``apg_smoothed_solve``: accelerated projected gradient (FISTA with
  backtracking) on the log-sum-exp smoothing of ``max_l f_l``.
"""

import time

import numpy as np

from . import kernels
from .errors import NonFiniteGradient, StepSizeUnderflow
from .saddle import MpConfig, MpReport, default_start

__all__ = ["gda_solve", "smoothed_max", "apg_smoothed_solve", "default_smoothing"]


def _check(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteGradient("non-finite field in baseline solver")


def gda_solve(rp, theta_init=None, lambda_init=None, cfg=None):
    """Projected gradient descent-ascent with steps ``mu0 / sqrt(n)``."""
    cfg = cfg or MpConfig()
    th0, la0 = default_start(rp)
    theta = th0 if theta_init is None else np.array(theta_init, dtype=float)
    lam = la0 if lambda_init is None else np.array(lambda_init, dtype=float)
    C, cbar, tb = rp.C, rp.cbar, rp.theta_bar
    num_th = np.zeros_like(theta)
    num_lam = np.zeros_like(lam)
    den = 0.0
    obj, steps, times = [], [], []
    termination = "max_iter"
    t0 = time.perf_counter()
    for n in range(1, cfg.max_iter + 1):
        f, g = kernels.f_and_grad(theta, lam, C, cbar)
        _check(f, g)
        mu = cfg.mu0 / np.sqrt(n)
        num_th += mu * theta
        num_lam += mu * lam
        den += mu
        theta = np.minimum(theta - mu * g, tb)
        lam = kernels.project_simplex(lam + mu * f)
        obj.append(kernels.f_values(num_th / den, C, cbar).max())
        steps.append(mu)
        times.append(time.perf_counter() - t0)
        if n > 1 and abs(obj[-1] - obj[-2]) < cfg.tol:
            termination = "tolerance"
            break
    return MpReport(
        theta_star=num_th / den,
        lambda_star=num_lam / den,
        obj_trace=np.array(obj),
        accepted_steps=np.array(steps),
        iterations=len(obj),
        termination=termination,
        times=np.array(times),
        theta_last=theta,
        lambda_last=lam,
        solver="gda",
        backend=kernels.BACKEND,
        meta={"step_rule": "mu0/sqrt(n)", "mu0": cfg.mu0},
    )


def smoothed_max(f, mu_s):
    """``mu_s * log(sum(exp(f / mu_s)))`` and its softmax weights, max-shifted."""
    f = np.asarray(f, dtype=float)
    m = f.max()
    e = np.exp((f - m) / mu_s)
    s = e.sum()
    return m + mu_s * np.log(s), e / s


def default_smoothing(num_users, tol=1e-4):
    # smoothing error mu_s * ln L equals the solver tolerance
    return tol / np.log(num_users) if num_users > 1 else tol


def apg_smoothed_solve(rp, theta_init=None, mu_s=None, cfg=None):
    """Minimize the smoothed max of the inverse SINRs over ``theta <= theta_bar``.

    Uses FISTA with a backtracking Lipschitz estimate (initially
    ``1 / cfg.mu0``; each iteration first tries it shrunk by ``cfg.rho`` and
    grows it by ``1 / cfg.rho`` until the quadratic upper bound holds) and
    gradient-based adaptive restart of the momentum.  The returned objective
    trace holds ``max_l f_l`` at each accepted iterate; termination tests the
    change of the smoothed objective against ``cfg.tol``.
    """
    cfg = cfg or MpConfig()
    L = rp.num_users
    if mu_s is None:
        mu_s = default_smoothing(L, cfg.tol if cfg.tol > 0 else MpConfig.tol)
    mu_s = float(mu_s)
    if mu_s <= 0:
        raise ValueError("smoothing parameter must be positive")
    C, cbar, tb = rp.C, rp.cbar, rp.theta_bar
    th0, _ = default_start(rp)
    x = th0 if theta_init is None else np.array(theta_init, dtype=float)
    x = np.minimum(x, tb)

    def value(th):
        f = kernels.f_values(th, C, cbar)
        _check(f)
        return smoothed_max(f, mu_s)[0], f

    def value_grad(th):
        f = kernels.f_values(th, C, cbar)
        _check(f)
        val, w = smoothed_max(f, mu_s)
        _, g = kernels.f_and_grad(th, w, C, cbar)
        _check(g)
        return val, g

    lip = 1.0 / cfg.mu0
    y = x.copy()
    x_prev = x.copy()
    t = 1.0
    obj, steps, times, smooth = [], [], [], []
    termination = "max_iter"
    t0 = time.perf_counter()
    for n in range(1, cfg.max_iter + 1):
        fy, gy = value_grad(y)
        lip *= cfg.rho
        for _ in range(cfg.max_backtracks):
            x = np.minimum(y - gy / lip, tb)
            d = x - y
            fx, fvals = value(x)
            if fx <= fy + gy @ d + 0.5 * lip * (d @ d):
                break
            lip /= cfg.rho
        else:
            raise StepSizeUnderflow(n, 1.0 / lip)
        if (y - x) @ (x - x_prev) > 0:
            t = 1.0
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = np.minimum(x + ((t - 1.0) / t_new) * (x - x_prev), tb)
        x_prev = x
        t = t_new
        obj.append(fvals.max())
        smooth.append(fx)
        steps.append(1.0 / lip)
        times.append(time.perf_counter() - t0)
        if n > 1 and abs(smooth[-1] - smooth[-2]) < cfg.tol:
            termination = "tolerance"
            break
    return MpReport(
        theta_star=x,
        lambda_star=smoothed_max(kernels.f_values(x, C, cbar), mu_s)[1],
        obj_trace=np.array(obj),
        accepted_steps=np.array(steps),
        iterations=len(obj),
        termination=termination,
        times=np.array(times),
        theta_last=x,
        solver="apg",
        backend=kernels.BACKEND,
        meta={
            "smoothing": mu_s,
            "smoothing_rule": "tol/ln(L)",
            "smoothed_trace": [float(v) for v in smooth],
        },
    )
