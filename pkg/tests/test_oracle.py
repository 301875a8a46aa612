import numpy as np
import pytest

from cellfree_mp.oracle import bisection_maxmin, feasible, grid_search_maxmin, sinr_from_coefficients
from cellfree_mp.problem import ReducedProblem, reduce, sinr

from conftest import channel_reduced, random_reduced, stats_from_zeta, symmetric_pair


def perron_maxmin(rp):
    """Max-min SINR under a per-user cap: 1 / max_l rho(C + c e_l^T / p_max)."""
    C, c, pm = rp.a + rp.b, rp.c, rp.p_max
    L = c.size
    return 1.0 / max(np.max(np.abs(np.linalg.eigvals(C + np.outer(c, np.eye(L)[l]) / pm)))
                     for l in range(L))


def hand_pair():
    C = np.array([[0.05, 0.2], [0.3, 0.05]])
    a = C - np.diag(np.diag(C))
    b = np.diag(np.diag(C))
    return ReducedProblem(a, b, np.array([0.1, 0.2]), 1.0, float(np.log(5.0)))


def test_frozen_two_user_optimum():
    # worst cap row l=2: [[0.05, 0.22], [0.3, 0.09]], rho = 0.07 + sqrt(0.0664)
    expected = 3.0517394233252437
    assert perron_maxmin(hand_pair()) == pytest.approx(expected, rel=1e-14)
    t, p = bisection_maxmin(hand_pair(), eps=1e-10)
    assert t == pytest.approx(expected, rel=1e-8)
    assert p.max() == pytest.approx(5.0, rel=1e-6)


def test_below_full_power_sinr_is_feasible():
    rp, _, _ = channel_reduced(20, 5, 0)
    gmin = sinr_from_coefficients(np.full(5, rp.p_max), rp).min()
    ok, p = feasible(0.99 * gmin, rp)
    assert ok
    assert np.all(sinr_from_coefficients(p, rp) >= 0.99 * gmin * (1 - 1e-9))


def test_tiny_target_needs_tiny_power():
    rp, _, _ = channel_reduced(20, 5, 0)
    ok, p = feasible(1e-9, rp)
    assert ok and p.max() < 1e-6 * rp.p_max


def test_single_user_feasibility_closed_form():
    rp = reduce(stats_from_zeta([[1.0, ], [0.4]]), np.ones((1, 2)) / np.sqrt(2), 1, 1.0, 3.0)
    tmax = 3.0 / (rp.b[0, 0] * 3.0 + rp.c[0])
    assert feasible(tmax * (1 - 1e-6), rp)[0]
    assert not feasible(tmax * (1 + 1e-6), rp)[0]


def test_symmetric_pair_optimum():
    rp = symmetric_pair()
    t, p = bisection_maxmin(rp, eps=1e-10)
    np.testing.assert_allclose(p, rp.p_max, rtol=1e-6)
    g = sinr_from_coefficients(np.full(2, rp.p_max), rp)
    assert t == pytest.approx(g[0], rel=1e-8)


@pytest.mark.parametrize("seed", range(6))
def test_bisection_matches_perron_root(seed):
    rng = np.random.default_rng(seed)
    rp = random_reduced(rng, int(rng.integers(2, 7)))
    assert bisection_maxmin(rp, eps=1e-10)[0] == pytest.approx(perron_maxmin(rp), rel=1e-8)


@pytest.mark.parametrize("seed", range(4))
def test_bisection_matches_grid_two_users(seed):
    rng = np.random.default_rng(100 + seed)
    rp = random_reduced(rng, 2)
    tg, _ = grid_search_maxmin(rp, grid_n=400)
    tb, _ = bisection_maxmin(rp, eps=1e-9)
    # grid value is a lower bound; one cell moves each SINR by at most its own-power step
    assert tg <= tb * (1 + 1e-9)
    cell = rp.p_max / 399
    assert tb - tg <= tb * cell / (rp.p_max - cell) * 2 + 1e-12


def test_grid_three_users_agrees_with_bisection(rng):
    rp = random_reduced(rng, 3)
    tg, _ = grid_search_maxmin(rp, grid_n=60)
    tb, _ = bisection_maxmin(rp)
    assert tg <= tb * (1 + 1e-6) and tg >= 0.9 * tb


def test_shrinking_eps_respects_bracket(rng):
    rp = random_reduced(rng, 5)
    eps = 1e-4
    t1, _ = bisection_maxmin(rp, eps=eps)
    t2, _ = bisection_maxmin(rp, eps=eps / 10)
    assert abs(t2 - t1) < eps * t1


def test_grid_single_user_full_power():
    rp = reduce(stats_from_zeta([[1.0]]), np.ones((1, 1)), 1, 1.0, 2.0)
    t, p = grid_search_maxmin(rp)
    assert p[0] == 2.0


def test_grid_symmetric_diagonal():
    _, p = grid_search_maxmin(symmetric_pair(), grid_n=50)
    np.testing.assert_allclose(p, 5.0)


def test_grid_refuses_large_problems(rng):
    with pytest.raises(ValueError):
        grid_search_maxmin(random_reduced(rng, 4))
    with pytest.raises(ValueError):
        grid_search_maxmin(random_reduced(rng, 2), grid_n=5)


def test_coefficient_sinr_matches_channel_sinr(rng):
    rp, stats, cfg = channel_reduced(15, 4, 3, omega=7.0)
    from cellfree_mp.problem import update_filters
    q = update_filters(np.full(4, cfg.max_power_norm), stats)
    p = rng.uniform(0, 1, 4) * cfg.max_power_norm
    np.testing.assert_allclose(sinr_from_coefficients(p, rp), sinr(p, q, stats), rtol=1e-12)


def test_invalid_arguments(rng):
    rp = random_reduced(rng, 2)
    with pytest.raises(ValueError):
        feasible(0.0, rp)
    with pytest.raises(ValueError):
        bisection_maxmin(rp, eps=0.0)
