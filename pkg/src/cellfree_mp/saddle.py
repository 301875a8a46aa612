"""Euclidean mirror prox for the min-max form of the power subproblem.

The problem solved is

    min_{theta <= theta_bar} max_{lambda in simplex} sum_l lambda_l f_l(theta)

with an extragradient step, backtracking on the step size and step-weighted
averaging of the iterates.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NonFiniteGradient, SolverError, StepSizeUnderflow

__all__ = [
    "MpConfig",
    "SaddleState",
    "MpReport",
    "project_box",
    "project_simplex",
    "simplex_shift",
    "extragradient_step",
    "mp_solve",
    "default_start",
]


@dataclass(frozen=True)
class MpConfig:
    mu0: float = 1.0
    rho: float = 0.5
    max_iter: int = 5000
    tol: float = 1e-4
    max_backtracks: int = 60

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.mu0 <= 0:
            raise ValueError("mu0 must be positive")
        if self.tol < 0:
            raise ValueError("tol must be non-negative")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be >= 1")


@dataclass
class SaddleState:
    theta: np.ndarray
    lam: np.ndarray
    mu: float = 1.0
    avg_theta_num: np.ndarray = None
    avg_lambda_num: np.ndarray = None
    avg_denom: float = 0.0
    iteration: int = 0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        if self.avg_theta_num is None:
            self.avg_theta_num = np.zeros_like(self.theta)
        if self.avg_lambda_num is None:
            self.avg_lambda_num = np.zeros_like(self.lam)


@dataclass
class MpReport:
    """Outcome of one run of a saddle-point or baseline solver.

    ``obj_trace[n]`` is ``max_l f_l`` at the solver's reported point after
    iteration ``n + 1`` (the running weighted average for MP and GDA).
    """

    theta_star: np.ndarray
    lambda_star: np.ndarray
    obj_trace: np.ndarray
    accepted_steps: np.ndarray
    iterations: int
    termination: str
    deltas: np.ndarray = None
    times: np.ndarray = None
    theta_last: np.ndarray = None
    lambda_last: np.ndarray = None
    solver: str = "mp"
    backend: str = "python"
    meta: dict = field(default_factory=dict)

    @property
    def objective(self):
        return float(self.obj_trace[-1]) if len(self.obj_trace) else float("nan")

    def to_dict(self):
        def arr(x):
            return None if x is None else np.asarray(x).tolist()

        return {
            "solver": self.solver,
            "backend": self.backend,
            "theta_star": arr(self.theta_star),
            "lambda_star": arr(self.lambda_star),
            "obj_trace": arr(self.obj_trace),
            "accepted_steps": arr(self.accepted_steps),
            "deltas": arr(self.deltas),
            "times": arr(self.times),
            "iterations": int(self.iterations),
            "termination": self.termination,
            "meta": self.meta,
        }


def project_box(x, theta_bar):
    """Clamp from above at ``theta_bar``; there is no lower bound."""
    return np.minimum(np.asarray(x, dtype=float), theta_bar)


def simplex_shift(x):
    """Exact shift ``beta`` with ``sum_k max(x_k - beta, 0) = 1`` via sorting."""
    x = np.asarray(x, dtype=float)
    u = np.sort(x)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, x.size + 1)
    r = np.flatnonzero(u - (css - 1.0) / j > 0)[-1]
    return (css[r] - 1.0) / (r + 1)


def project_simplex(x, method="bisection"):
    """Euclidean projection onto the unit simplex.

    Parameters
    ----------
    x : array_like
        Point to project.
    method : {"bisection", "sort"}
        ``"bisection"`` searches the shift by bisection (the solver's path);
        ``"sort"`` uses the exact sort-and-threshold rule and serves as a
        reference.
    """
    if method == "bisection":
        return kernels.project_simplex(np.asarray(x, dtype=float))
    if method == "sort":
        x = np.asarray(x, dtype=float)
        return np.maximum(x - simplex_shift(x), 0.0)
    raise ValueError(f"unknown method {method!r}")


def default_start(rp):
    """Full power and uniform dual weights."""
    L = rp.num_users
    return np.full(L, rp.theta_bar), np.full(L, 1.0 / L)


def extragradient_step(state, rp, mu):
    """One extragradient trial from ``state`` at step ``mu``.

    Returns
    -------
    z_hat : tuple of ndarray
        Intermediate point ``(theta_hat, lambda_hat)``.
    z_next : tuple of ndarray
        Candidate next iterate.
    delta : float
        Step acceptance quantity; the step is admissible when ``delta <= 0``.
    """
    f0, g0 = kernels.f_and_grad(state.theta, state.lam, rp.C, rp.cbar)
    if not (np.all(np.isfinite(f0)) and np.all(np.isfinite(g0))):
        raise NonFiniteGradient(f"non-finite field at iteration {state.iteration}")
    th_hat, lam_hat, th_new, lam_new, f_h, g_h, delta = kernels.backend.extragradient(
        state.theta, state.lam, f0, g0, rp.C, rp.cbar, rp.theta_bar, mu)
    if not np.isfinite(delta):
        raise NonFiniteGradient(f"non-finite field at the intermediate point, mu={mu:.3e}")
    return (th_hat, lam_hat), (th_new, lam_new), float(delta)


_TERMINATION = {kernels.STATUS_TOL: "tolerance", kernels.STATUS_MAXITER: "max_iter"}


def mp_solve(rp, theta_init=None, lambda_init=None, cfg=None, backend=None):
    """Run mirror prox on ``rp`` and return the step-weighted average.

    Each iteration first tries the previous step divided by ``rho`` and
    shrinks it by ``rho`` until ``delta <= 0``.  Stops when the objective at
    the running average changes by less than ``cfg.tol`` or after
    ``cfg.max_iter`` iterations.

    Raises
    ------
    StepSizeUnderflow
        If ``cfg.max_backtracks`` shrinks do not yield an admissible step.
    NonFiniteGradient
        If the field overflows.
    """
    cfg = cfg or MpConfig()
    th0, la0 = default_start(rp)
    theta_init = th0 if theta_init is None else np.asarray(theta_init, dtype=float)
    lambda_init = la0 if lambda_init is None else np.asarray(lambda_init, dtype=float)
    if np.any(theta_init > rp.theta_bar):
        raise ValueError("theta_init violates the power limit")
    if np.any(lambda_init < 0) or abs(lambda_init.sum() - 1.0) > 1e-10:
        raise ValueError("lambda_init must lie in the unit simplex")
    mod = kernels.get_backend(backend)
    (th_avg, la_avg, obj, mus, deltas, times, n_done, status, n_evals, fail_mu,
     th_last, la_last) = mod.mp_loop(rp.C, rp.cbar, rp.theta_bar, theta_init, lambda_init,
                                     cfg.mu0, cfg.rho, cfg.max_iter, cfg.tol,
                                     cfg.max_backtracks)
    if status == kernels.STATUS_UNDERFLOW:
        raise StepSizeUnderflow(n_done + 1, fail_mu)
    if status == kernels.STATUS_NONFINITE:
        raise NonFiniteGradient(f"non-finite field at iteration {n_done + 1}")
    if status not in _TERMINATION:
        raise SolverError(f"unexpected kernel status {status}")
    return MpReport(
        theta_star=th_avg,
        lambda_star=la_avg,
        obj_trace=obj,
        accepted_steps=mus,
        iterations=int(n_done),
        termination=_TERMINATION[status],
        deltas=deltas,
        times=times,
        theta_last=th_last,
        lambda_last=la_last,
        solver="mp",
        backend="cython" if mod is not kernels._pykernels else "python",
        meta={"field_evaluations": int(n_evals), "mu0": cfg.mu0, "rho": cfg.rho},
    )
