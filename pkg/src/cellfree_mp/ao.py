"""Alternating optimization of receiver filters and transmit powers."""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import SolverError
from .problem import (
    all_ones_filters,
    power_from_theta,
    prelog_factor,
    rate,
    reduce,
    sinr,
    theta_from_power,
    update_filters,
)
from .saddle import MpConfig, mp_solve

__all__ = ["AoReport", "ao_solve", "power_only_solve", "default_omega"]


@dataclass
class AoReport:
    outer_trace: np.ndarray   # min-rate after each outer iteration, bit/s/Hz
    p: np.ndarray             # noise-normalized powers
    q: np.ndarray             # (L, M) unit-norm filters
    rates: np.ndarray
    outer_iterations: int
    mode: str
    timings: dict = field(default_factory=dict)
    termination: str = ""
    omega: float = 1.0
    inner_iterations: list = field(default_factory=list)

    @property
    def min_rate(self):
        return float(self.rates.min())

    def to_dict(self):
        return {
            "mode": self.mode,
            "outer_trace": self.outer_trace.tolist(),
            "p": self.p.tolist(),
            "q": self.q.tolist(),
            "rates": self.rates.tolist(),
            "min_rate": self.min_rate,
            "outer_iterations": int(self.outer_iterations),
            "timings": self.timings,
            "termination": self.termination,
            "omega": float(self.omega),
            "inner_iterations": [int(n) for n in self.inner_iterations],
        }


def default_omega(stats):
    return float(stats.num_aps)


def _setup(stats, config, omega):
    if config is None:
        config = stats.config
    if config is None:
        raise ValueError("a NetworkConfig is required (pass one or attach it to stats)")
    omega = default_omega(stats) if omega is None else float(omega)
    return config, omega


def _powers(theta, rp, omega, p_max):
    # theta at the cap maps back to p_max exactly, not to a rounded exp/log
    return np.where(theta >= rp.theta_bar, p_max,
                    np.minimum(power_from_theta(theta, omega), p_max))


def ao_solve(stats, config=None, mp_cfg=None, omega=None, max_outer=50, tol=1e-4):
    """Alternate closed-form filter updates with mirror-prox power control.

    Starts from full power.  Each outer iteration updates the filters, solves
    the power subproblem from the current powers and keeps the new powers
    only if the minimum rate does not drop.  Stops when the minimum rate
    moves by less than ``tol``, when the filters stop changing, when a power
    update is rejected, or after ``max_outer`` iterations.
    """
    config, omega = _setup(stats, config, omega)
    mp_cfg = mp_cfg or MpConfig()
    K = config.antennas_per_ap
    p_max = config.max_power_norm
    pre = prelog_factor(config)
    L = stats.num_users
    p = np.full(L, p_max)
    q = None
    trace = []
    inner = []
    t_filter = t_power = 0.0
    termination = "max_outer"
    for it in range(max_outer):
        t0 = time.perf_counter()
        try:
            q_new = update_filters(p, stats, K)
        except ValueError as exc:
            raise SolverError(f"outer iteration {it + 1}: filter update failed: {exc}") from exc
        t_filter += time.perf_counter() - t0
        if q is not None and np.array_equal(q_new, q):
            termination = "filters_converged"
            break
        q = q_new
        ref = rate(sinr(p, q, stats, K), pre).min()
        t0 = time.perf_counter()
        try:
            rp = reduce(stats, q, K, omega, p_max)
            theta0 = np.minimum(theta_from_power(p, omega), rp.theta_bar)
            rep = mp_solve(rp, theta_init=theta0, cfg=mp_cfg)
        except (SolverError, ValueError) as exc:
            raise SolverError(f"outer iteration {it + 1}: power update failed: {exc}") from exc
        t_power += time.perf_counter() - t0
        inner.append(rep.iterations)
        cand = _powers(rep.theta_star, rp, omega, p_max)
        cand_min = rate(sinr(cand, q, stats, K), pre).min()
        if cand_min < ref:
            # averaged iterate landed below the current point; keep filters' gain only
            trace.append(ref)
            termination = "power_step_rejected"
            break
        p = cand
        trace.append(cand_min)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            termination = "tolerance"
            break
    rates = rate(sinr(p, q, stats, K), pre)
    return AoReport(
        outer_trace=np.array(trace),
        p=p,
        q=q,
        rates=rates,
        outer_iterations=len(trace),
        mode="ao",
        timings={"filter_s": t_filter, "power_s": t_power},
        termination=termination,
        omega=omega,
        inner_iterations=inner,
    )


def power_only_solve(stats, config=None, mp_cfg=None, omega=None):
    """Power control with every AP weighted equally (unit-norm all-ones filters)."""
    config, omega = _setup(stats, config, omega)
    mp_cfg = mp_cfg or MpConfig()
    K = config.antennas_per_ap
    p_max = config.max_power_norm
    q = all_ones_filters(stats.num_users, stats.num_aps)
    t0 = time.perf_counter()
    rp = reduce(stats, q, K, omega, p_max)
    rep = mp_solve(rp, cfg=mp_cfg)
    t_power = time.perf_counter() - t0
    p = _powers(rep.theta_star, rp, omega, p_max)
    rates = rate(sinr(p, q, stats, K), prelog_factor(config))
    return AoReport(
        outer_trace=np.array([rates.min()]),
        p=p,
        q=q,
        rates=rates,
        outer_iterations=1,
        mode="power_only",
        timings={"filter_s": 0.0, "power_s": t_power},
        termination=rep.termination,
        omega=omega,
        inner_iterations=[rep.iterations],
    )
