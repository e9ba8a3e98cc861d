import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harq_aoi import ServiceTimeDist, epoch_moments, q_eta, rho_zero_wait, solve_gamma
from harq_aoi.waiting import _PrefixSums

TWO_POINT = ServiceTimeDist(np.array([15.0, 30.0]), np.array([0.5, 0.5]))
SKEWED = ServiceTimeDist(np.array([1.0, 100.0]), np.array([0.9, 0.1]))


def brute_force(dist, gamma):
    """Enumerate every (previous, current) service-time pair."""
    e_l = e_q = 0.0
    for (tp, pp), (tc, pc) in itertools.product(zip(dist.support, dist.mass), repeat=2):
        w = max(gamma - tp, 0.0)
        length = w + tc
        e_l += pp * pc * length
        e_q += pp * pc * (tp * length + 0.5 * length * length)
    return e_l, e_q


def test_two_point_gamma_20():
    e_l, e_q = epoch_moments(TWO_POINT, 20.0)
    assert e_l == pytest.approx(25.0)
    assert e_q == pytest.approx(887.5)
    assert (e_l, e_q) == pytest.approx(brute_force(TWO_POINT, 20.0))


def test_gamma_zero_recovers_zero_wait():
    e_l, e_q = epoch_moments(TWO_POINT, 0.0)
    assert (e_l, e_q) == pytest.approx((22.5, 787.5))
    assert e_q / e_l == pytest.approx(rho_zero_wait(TWO_POINT)) == pytest.approx(35.0)


def test_deterministic_below_threshold():
    c = 7.0
    dist = ServiceTimeDist.point(c)
    for gamma in (0.0, 3.0, c):
        assert epoch_moments(dist, gamma) == pytest.approx((c, 1.5 * c * c))


@pytest.mark.parametrize("gamma", [0.0, 5.0, 15.0, 22.5, 29.0, 45.0, 100.0])
def test_prefix_sums_match_direct(gamma):
    for dist in (TWO_POINT, SKEWED):
        assert _PrefixSums(dist).moments(gamma) == pytest.approx(epoch_moments(dist, gamma), rel=1e-13)


def test_q_at_mean_is_half_second_moment():
    for dist in (TWO_POINT, SKEWED):
        assert q_eta(dist, dist.m1) == pytest.approx(0.5 * dist.m2)


def test_q_strictly_decreasing():
    for dist in (TWO_POINT, SKEWED):
        etas = np.linspace(dist.m1, 2 * rho_zero_wait(dist), 200)
        qs = [q_eta(dist, e) for e in etas]
        assert np.all(np.diff(qs) < 0)


def test_deterministic_exact():
    for c in (1.0, 7.0, 202.0, 1e-3):
        sol = solve_gamma(ServiceTimeDist.point(c))
        assert sol.eta_star == 1.5 * c
        assert sol.gamma_star == c / 2
        assert sol.aoi_with_wait == sol.aoi_zero_wait == 1.5 * c
        assert q_eta(ServiceTimeDist.point(c), 1.5 * c) == 0.0


def test_two_point_matches_grid_search():
    sol = solve_gamma(TWO_POINT)
    grid = np.arange(0.0, 60.0 + 1e-9, 1e-3)
    ratios = np.array([np.divide(*epoch_moments(TWO_POINT, g)[::-1]) for g in grid])
    best = ratios.min()
    assert sol.eta_star == pytest.approx(best, abs=1e-2)
    # the ratio is flat in gamma below the smallest service time, so any gamma there is optimal
    flat = grid[ratios <= best + 1e-9]
    assert flat.min() - 1e-2 <= sol.gamma_star <= flat.max() + 1e-2
    assert sol.gamma_star > 0
    assert sol.eta_star == pytest.approx(35.0, abs=1e-9)


def test_waiting_helps_high_variance():
    sol = solve_gamma(SKEWED)
    assert sol.aoi_with_wait < sol.aoi_zero_wait - 1.0
    grid = np.linspace(0, 200, 20001)
    ratios = [np.divide(*epoch_moments(SKEWED, g)[::-1]) for g in grid]
    assert sol.eta_star == pytest.approx(min(ratios), abs=1e-2)
    assert abs(q_eta(SKEWED, sol.eta_star)) < 1e-8 * SKEWED.m1


@st.composite
def dists(draw):
    size = draw(st.integers(1, 8))
    support = np.cumsum(draw(st.lists(st.floats(0.5, 50), min_size=size, max_size=size)))
    weights = np.array(draw(st.lists(st.floats(0.01, 1), min_size=size, max_size=size)))
    return ServiceTimeDist(support, weights / weights.sum())


@settings(max_examples=80, deadline=None)
@given(dists())
def test_solution_properties(dist):
    sol = solve_gamma(dist)
    assert sol.gamma_star > 0
    assert sol.gamma_star == pytest.approx(sol.eta_star - dist.m1)
    assert sol.aoi_with_wait <= sol.aoi_zero_wait * (1 + 1e-12)
    assert abs(q_eta(dist, sol.eta_star)) < 1e-8 * max(dist.m1, dist.m2 / dist.m1)
    best = np.divide(*epoch_moments(dist, sol.gamma_star)[::-1])
    for g in np.linspace(0, 2 * dist.support[-1], 41):
        e_l, e_q = epoch_moments(dist, g)
        assert best <= e_q / e_l * (1 + 1e-9)
