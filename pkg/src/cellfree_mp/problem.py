"""SINR evaluation, the reduced inverse-SINR problem and receiver filters.

For a fixed filter set the inverse SINR of user ``l`` is a posynomial in the
powers.  In log variables ``theta_i = log(omega * p_i)`` it reads

    f_l(theta) = sum_{i != l} a_li e^{theta_i - theta_l}
               + sum_i b_li e^{theta_i - theta_l} + cbar_l e^{-theta_l},

which is convex.  Filters are stored as an ``(L, M)`` array whose row ``l`` is
the unit-norm coefficient vector of user ``l``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .errors import DegenerateUserError

__all__ = [
    "ReducedProblem",
    "sinr",
    "rate",
    "prelog_factor",
    "reduce",
    "theta_from_power",
    "power_from_theta",
    "f_values",
    "grad_f",
    "phi_and_grads",
    "update_filters",
    "all_ones_filters",
]


def _projections(stats, q):
    # proj[l, i] = q_l . g_li
    return np.einsum("lim,lm->li", stats.gvec, q)


def _quadratic_terms(stats, q, K):
    q2 = q**2
    bterm = np.einsum("lim,lm->li", stats.gbar_diag, q2) / K
    cterm = np.einsum("lm,lm->l", stats.gtil_diag, q2) / K
    return bterm, cterm


def sinr(p, q, stats, K=1):
    """Achievable SINR of every user for powers ``p`` and filters ``q``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    proj = _projections(stats, q)
    bterm, cterm = _quadratic_terms(stats, q, K)
    gain = np.diag(proj) ** 2
    cross = proj**2
    np.fill_diagonal(cross, 0.0)
    num = p * gain
    den = cross @ p + bterm @ p + cterm
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(num > 0, num / den, 0.0)
    return out


def prelog_factor(config):
    """Pilot-overhead factor ``1 - tau_p/tau_c`` if enabled on ``config``, else 1."""
    if config is not None and config.prelog:
        return 1.0 - config.pilot_len / config.coherence_len
    return 1.0


def rate(gamma, prelog=1.0):
    """Per-user rate in bit/s/Hz."""
    return prelog * np.log2(1.0 + np.asarray(gamma, dtype=float))


@dataclass(frozen=True)
class ReducedProblem:
    """Coefficients of the inverse-SINR functions for one filter set.

    ``a`` has a zero diagonal.  ``cbar = omega * c`` and
    ``theta_bar = log(omega * p_max)``.
    """

    a: np.ndarray
    b: np.ndarray
    cbar: np.ndarray
    omega: float
    theta_bar: float

    def __post_init__(self):
        # the kernels work on the merged coupling matrix
        C = self.a + self.b
        object.__setattr__(self, "C", np.ascontiguousarray(C))
        for arr in (self.a, self.b, self.cbar, self.C):
            arr.setflags(write=False)

    @property
    def num_users(self):
        return self.cbar.shape[0]

    @property
    def c(self):
        return self.cbar / self.omega

    @property
    def p_max(self):
        return np.exp(self.theta_bar) / self.omega

    def with_omega(self, omega):
        """Same problem expressed under a different scaling ``omega``."""
        return ReducedProblem(self.a.copy(), self.b.copy(), self.c * omega, float(omega),
                              float(np.log(omega * self.p_max)))


def reduce(stats, q, K, omega, p_max):
    """Build the inverse-SINR coefficients for filters ``q``.

    Raises
    ------
    DegenerateUserError
        If ``q_l . g_ll == 0`` for some user.
    """
    q = np.asarray(q, dtype=float)
    proj = _projections(stats, q)
    gain = np.diag(proj) ** 2
    bad = np.flatnonzero(gain <= 0)
    if bad.size:
        raise DegenerateUserError(int(bad[0]))
    bterm, cterm = _quadratic_terms(stats, q, K)
    a = proj**2 / gain[:, None]
    np.fill_diagonal(a, 0.0)
    b = bterm / gain[:, None]
    c = cterm / gain
    return ReducedProblem(a, b, omega * c, float(omega), float(np.log(omega * p_max)))


def theta_from_power(p, omega):
    return np.log(omega * np.asarray(p, dtype=float))


def power_from_theta(theta, omega):
    return np.exp(np.asarray(theta, dtype=float)) / omega


def f_values(theta, rp):
    """Inverse SINRs ``f_l(theta)``, evaluated with the largest exponent factored out."""
    return kernels.f_values(np.asarray(theta, dtype=float), rp.C, rp.cbar)


def grad_f(theta, rp):
    """Full Jacobian of the inverse SINRs; row ``l`` is the gradient of ``f_l``.

    ``O(L^2)`` memory; the solvers never form it and use ``phi_and_grads``.
    """
    theta = np.asarray(theta, dtype=float)
    m = theta.max()
    u = np.exp(theta - m)
    inv_u = np.exp(m - theta)
    T = rp.C * np.outer(inv_u, u)  # T[l, i] = C_li e^{theta_i - theta_l}
    J = T.copy()
    np.fill_diagonal(J, 0.0)
    off = J.sum(axis=1)
    J[np.diag_indices_from(J)] = -off - rp.cbar * np.exp(-m) * inv_u
    return J


def phi_and_grads(theta, lam, rp):
    """Lagrangian ``phi = lam . f(theta)`` and its two partial gradients."""
    f, g = kernels.f_and_grad(np.asarray(theta, dtype=float), np.asarray(lam, dtype=float),
                              rp.C, rp.cbar)
    return float(np.dot(lam, f)), g, f


def all_ones_filters(num_users, num_aps):
    """Equal AP weighting, normalized to unit norm."""
    return np.full((num_users, num_aps), 1.0 / np.sqrt(num_aps))


def update_filters(p, stats, K=1):
    """Per-user SINR-optimal receiver coefficients at fixed powers.

    Each ``q_l`` is the normalized solution of ``W_l x = g_ll`` where ``W_l``
    collects the interference and noise covariance seen by user ``l``.  A user
    with zero power gets the matched direction ``g_ll / ||g_ll||``.
    """
    p = np.asarray(p, dtype=float)
    L, M = stats.num_users, stats.num_aps
    q = np.empty((L, M))
    diag = (np.einsum("lim,i->lm", stats.gbar_diag, p) + stats.gtil_diag) / K
    for l in range(L):
        g_ll = stats.gvec[l, l]
        if p[l] <= 0:
            nrm = np.linalg.norm(g_ll)
            if nrm == 0:
                raise DegenerateUserError(l, "zero channel estimate")
            q[l] = g_ll / nrm
            continue
        others = np.arange(L) != l
        G = stats.gvec[l, others]
        w = p[others]
        active = np.any(G != 0, axis=1) & (w > 0)
        if not np.any(active):
            d = diag[l]
            if np.any(d <= 0):
                raise DegenerateUserError(l, "singular interference-plus-noise matrix")
            x = g_ll / d
        else:
            Ga = G[active]
            W = (Ga.T * w[active]) @ Ga
            W[np.diag_indices(M)] += diag[l]
            try:
                x = scipy.linalg.solve(W, g_ll, assume_a="pos")
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
                raise DegenerateUserError(l, "singular interference-plus-noise matrix") from exc
        nrm = np.linalg.norm(x)
        if not np.isfinite(nrm) or nrm == 0:
            raise DegenerateUserError(l, "singular interference-plus-noise matrix")
        q[l] = x / nrm
    return q
