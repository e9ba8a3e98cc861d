"""Optimal waiting threshold for a fixed service-time distribution.

Under the threshold policy the sampler idles for W = [gamma - tau_prev]^+ at
the start of each epoch. The optimal threshold is gamma* = eta* - E[tau],
where eta* is the root of q(eta) = min_gamma E[Q] - eta E[L] (Dinkelbach).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .service_time import ServiceTimeDist, rho_zero_wait


@dataclass(frozen=True)
class WaitingSolution:
    gamma_star: float
    eta_star: float
    aoi_with_wait: float
    aoi_zero_wait: float


def epoch_moments(dist: ServiceTimeDist, gamma: float) -> tuple[float, float]:
    """E[L] and E[Q] of a typical epoch under threshold ``gamma``.

    The previous service time and the current one are independent copies of
    ``dist``, so both expectations reduce to single sums over the support.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    t, w = dist.support, dist.mass
    wait = np.maximum(gamma - t, 0.0)
    e_wait = float(wait @ w)
    e_wait2 = float((wait * wait) @ w)
    e_tau, e_tau2 = dist.m1, dist.m2
    e_l = e_wait + e_tau
    e_q = float((t * wait) @ w) + e_tau**2 + 0.5 * (e_wait2 + 2.0 * e_wait * e_tau + e_tau2)
    return e_l, e_q


class _PrefixSums:
    """O(log n) evaluation of epoch_moments via prefix sums over the support."""

    def __init__(self, dist: ServiceTimeDist):
        self.t = dist.support
        w = dist.mass
        self.F = np.concatenate(([0.0], np.cumsum(w)))
        self.S1 = np.concatenate(([0.0], np.cumsum(w * self.t)))
        self.S2 = np.concatenate(([0.0], np.cumsum(w * self.t * self.t)))
        self.m1, self.m2 = dist.m1, dist.m2

    def moments(self, gamma):
        i = int(np.searchsorted(self.t, gamma, side="left"))
        F, S1, S2 = self.F[i], self.S1[i], self.S2[i]
        e_wait = gamma * F - S1
        e_wait2 = gamma * gamma * F - 2.0 * gamma * S1 + S2
        e_tw = gamma * S1 - S2
        e_l = e_wait + self.m1
        e_q = e_tw + self.m1**2 + 0.5 * (e_wait2 + 2.0 * e_wait * self.m1 + self.m2)
        return e_l, e_q

    def q(self, eta):
        e_l, e_q = self.moments(max(eta - self.m1, 0.0))
        return e_q - eta * e_l


def q_eta(dist: ServiceTimeDist, eta: float) -> float:
    gamma = max(eta - dist.m1, 0.0)
    e_l, e_q = epoch_moments(dist, gamma)
    return e_q - eta * e_l


def solve_gamma(dist: ServiceTimeDist, rel_tol: float = 1e-13) -> WaitingSolution:
    """Bisection for eta* on [E[tau], rho_0].

    q(E[tau]) = E[tau^2]/2 > 0 and q(rho_0) <= 0 because gamma = 0 already
    attains the ratio rho_0, so the bracket always holds.
    """
    rho0 = rho_zero_wait(dist)
    sums = _PrefixSums(dist)
    lo, hi = dist.m1, rho0
    while hi - lo > rel_tol * rho0:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if sums.q(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    eta = hi
    return WaitingSolution(
        gamma_star=eta - dist.m1,
        eta_star=eta,
        aoi_with_wait=eta,
        aoi_zero_wait=rho0,
    )
