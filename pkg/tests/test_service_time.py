import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harq_aoi import AckModel, Schedule, ServiceTimeDist, build_dist, moment_partials, moments, rho_zero_wait
from harq_aoi.errors import DistributionError

GAUSS = AckModel.gaussian_tbcc(64)


@pytest.fixture
def half_model():
    # P_ACK(10) = 0.5 by construction
    return AckModel.from_table([(5, 0.0), (10, 0.5), (20, 1.0)])


def test_two_point_hand_example(half_model):
    dist = build_dist(Schedule(5, 5.0, (10, 20)), half_model)
    np.testing.assert_allclose(dist.support, [15, 30])
    np.testing.assert_allclose(dist.mass, [0.5, 0.5])
    assert moments(dist) == pytest.approx((22.5, 562.5))
    assert rho_zero_wait(dist) == pytest.approx(35.0)


def test_single_transmission(model):
    dist = build_dist(Schedule(64, 10.0, (192,)), model)
    np.testing.assert_array_equal(dist.support, [202.0])
    np.testing.assert_array_equal(dist.mass, [1.0])
    assert moments(dist) == (202.0, 40804.0)
    assert rho_zero_wait(dist) == pytest.approx(1.5 * 202)


def test_six_attempt_schedule_normalization(model):
    sched = Schedule(64, 10.0, (119, 132, 143, 155, 168, 192))
    dist = build_dist(sched, model)
    assert dist.mass.sum() == pytest.approx(1.0, abs=1e-12)
    assert dist.mass[-1] == 1.0 - model.prob(168.0)
    np.testing.assert_allclose(dist.support, np.array(sched.n) + 10 * np.arange(1, 7))
    assert sched.ir_lengths == (119, 13, 11, 12, 13, 24)
    assert rho_zero_wait(dist) == pytest.approx(208, abs=4)


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule(64, 10.0, (100, 100, 192))
    with pytest.raises(ValueError):
        Schedule(64, 10.0, (60, 192))
    with pytest.raises(ValueError):
        Schedule(64, -1.0, (192,))
    with pytest.raises(ValueError):
        Schedule(64, 0.0, ())


def test_dist_validation():
    with pytest.raises(DistributionError):
        ServiceTimeDist(np.array([1.0, 2.0]), np.array([0.5, 0.4]))
    with pytest.raises(DistributionError):
        ServiceTimeDist(np.array([2.0, 1.0]), np.array([0.5, 0.5]))
    with pytest.raises(DistributionError):
        ServiceTimeDist(np.array([1.0, 2.0]), np.array([1.5, -0.5]))


def test_non_monotone_table_cannot_be_built():
    with pytest.raises(ValueError):
        AckModel.from_table([(64, 0.5), (128, 0.4)])


def _fd_partials(sched, model, f, h=1e-3):
    n = list(sched.n)
    out = []
    for sign in (+1, -1):
        m = n.copy()
        m[f - 1] += sign * h
        out.append(moments(build_dist(Schedule(sched.k, sched.beta, tuple(m)), model)))
    return ((out[0][0] - out[1][0]) / (2 * h), (out[0][1] - out[1][1]) / (2 * h))


def test_partials_n100_example(model):
    sched = Schedule(64, 10.0, (100, 192))
    dm1, dm2 = moment_partials(sched, model, 1)
    expected = model.prob(100.0) + (100 + 10 - 212) * model.deriv(100.0)
    assert dm1 == pytest.approx(expected, rel=1e-14)
    fd1, fd2 = _fd_partials(sched, model, 1)
    assert dm1 == pytest.approx(fd1, rel=1e-5)
    assert dm2 == pytest.approx(fd2, rel=1e-5)


def test_partial_limit_as_gap_closes(model):
    n1 = 120.0
    sched = Schedule(64, 10.0, (n1, n1 + 1e-9, 192))
    dm1, _ = moment_partials(sched, model, 1)
    assert dm1 == pytest.approx(model.prob(n1) - 10 * model.deriv(n1), rel=1e-6)


def test_partial_index_bounds(model):
    sched = Schedule(64, 10.0, (100, 150, 192))
    with pytest.raises(IndexError):
        moment_partials(sched, model, 0)
    with pytest.raises(IndexError):
        moment_partials(sched, model, 3)


@st.composite
def schedules(draw):
    beta = draw(st.floats(0, 50))
    m = draw(st.integers(2, 7))
    inner = draw(st.lists(st.floats(70, 186), min_size=m - 1, max_size=m - 1, unique=True))
    inner = sorted(inner)
    # keep neighbours apart so a finite-difference step never reorders them
    if any(b - a < 1.0 for a, b in zip(inner, inner[1:])):
        inner = [70 + 18 * i for i in range(m - 1)]
    return Schedule(64, beta, tuple(inner) + (192.0,))


@settings(max_examples=60, deadline=None)
@given(schedules())
def test_partials_match_finite_differences(sched):
    for f in range(1, sched.m):
        dm1, dm2 = moment_partials(sched, GAUSS, f)
        fd1, fd2 = _fd_partials(sched, GAUSS, f)
        # absolute floor: cancellation error of the difference quotient
        dist = build_dist(sched, GAUSS)
        floor1 = 1e3 * np.finfo(float).eps * dist.m1
        floor2 = 1e3 * np.finfo(float).eps * dist.m2
        assert dm1 == pytest.approx(fd1, rel=1e-5, abs=floor1)
        assert dm2 == pytest.approx(fd2, rel=1e-5, abs=floor2)


@given(schedules())
def test_distribution_properties(sched):
    dist = build_dist(sched, GAUSS)
    assert np.all(dist.mass >= 0)
    assert dist.mass.sum() == pytest.approx(1.0, abs=1e-12)
    m1, m2 = moments(dist)
    assert m2 >= m1 * m1 * (1 - 1e-12)
    rho = rho_zero_wait(dist)
    assert rho >= 1.5 * dist.support[0] * (1 - 1e-12)
    assert rho >= m1
