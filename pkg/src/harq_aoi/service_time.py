"""Service-time distribution of a HARQ schedule and its moments.

A schedule of cumulative blocklengths N_1 < ... < N_m delivers at attempt f
with service time N_f + f*beta. Attempt f succeeds with probability
P_ACK(N_f) - P_ACK(N_{f-1}); the last attempt takes the residual mass
1 - P_ACK(N_{m-1}).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ack_model import AckModel
from .errors import DistributionError

MASS_TOL = 1e-12


@dataclass(frozen=True)
class Schedule:
    k: int
    beta: float
    n: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(float(x) for x in self.n))
        if not self.n:
            raise ValueError("schedule needs at least one blocklength")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.n[0] < self.k:
            raise ValueError(f"N_1={self.n[0]} is below k={self.k}")
        if any(b <= a for a, b in zip(self.n, self.n[1:])):
            raise ValueError(f"blocklengths must be strictly increasing: {self.n}")

    @property
    def m(self) -> int:
        return len(self.n)

    @property
    def n_max(self) -> float:
        return self.n[-1]

    @property
    def ir_lengths(self) -> tuple[float, ...]:
        """Bits sent per attempt: l_1 = N_1, l_f = N_f - N_{f-1}."""
        return (self.n[0],) + tuple(b - a for a, b in zip(self.n, self.n[1:]))

    def service_times(self) -> np.ndarray:
        return np.asarray(self.n) + self.beta * np.arange(1, self.m + 1)


@dataclass(frozen=True)
class ServiceTimeDist:
    support: np.ndarray
    mass: np.ndarray
    m1: float = field(init=False)
    m2: float = field(init=False)

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        if support.ndim != 1 or support.shape != mass.shape or support.size == 0:
            raise DistributionError("support and mass must be equal-length, non-empty vectors")
        if np.any(mass < 0):
            raise DistributionError(f"negative mass {mass.min():g}")
        if abs(mass.sum() - 1.0) > MASS_TOL:
            raise DistributionError(f"masses sum to {mass.sum():.15g}, not 1")
        if np.any(np.diff(support) <= 0):
            raise DistributionError("support must be strictly increasing")
        if support[0] <= 0:
            raise DistributionError("service times must be positive")
        support.setflags(write=False)
        mass.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "m1", float(support @ mass))
        object.__setattr__(self, "m2", float((support * support) @ mass))

    @classmethod
    def point(cls, c: float) -> ServiceTimeDist:
        return cls(np.array([float(c)]), np.array([1.0]))

    @property
    def variance(self) -> float:
        return max(self.m2 - self.m1 * self.m1, 0.0)


def build_dist(sched: Schedule, model: AckModel) -> ServiceTimeDist:
    t = sched.service_times()
    if sched.m == 1:
        return ServiceTimeDist(t, np.array([1.0]))
    p = np.asarray(model.prob(np.asarray(sched.n[:-1])), dtype=float)
    cdf = np.append(p, 1.0)
    mass = np.diff(cdf, prepend=0.0)
    if np.any(mass < 0):
        f = int(np.argmax(mass < 0)) + 1
        raise DistributionError(f"negative mass at attempt {f}: ACK model is not monotone")
    # residual convention: the terminal atom is exactly 1 - P_ACK(N_{m-1})
    mass[-1] = 1.0 - p[-1]
    return ServiceTimeDist(t, mass)


def moments(dist: ServiceTimeDist) -> tuple[float, float]:
    return dist.m1, dist.m2


def moment_partials(sched: Schedule, model: AckModel, f: int) -> tuple[float, float]:
    """Closed-form dE[tau]/dN_f and dE[tau^2]/dN_f for 1 <= f <= m-1 (1-based).

    N_m is pinned, so no derivative is defined for the last attempt.
    """
    if not 1 <= f <= sched.m - 1:
        raise IndexError(f"attempt index {f} outside 1..{sched.m - 1}")
    n = sched.n
    a_f = n[f - 1] + f * sched.beta
    a_next = n[f] + (f + 1) * sched.beta
    dp = model.prob(n[f - 1]) - (model.prob(n[f - 2]) if f >= 2 else 0.0)
    slope = model.deriv(n[f - 1])
    dm1 = dp + (a_f - a_next) * slope
    dm2 = 2.0 * a_f * dp + (a_f * a_f - a_next * a_next) * slope
    return dm1, dm2


def rho_zero_wait(dist: ServiceTimeDist) -> float:
    """Long-term average AoI under zero-wait: E[tau] + E[tau^2] / (2 E[tau])."""
    return dist.m1 + dist.m2 / (2.0 * dist.m1)
