"""Baseline schemes: IIR, fixed redundancy with and without replacement."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ack_model import AckModel
from .errors import CapError
from .service_time import ServiceTimeDist
from .waiting import solve_gamma

log = logging.getLogger(__name__)

TAIL_MASS = 1e-12
# N_1 values whose truncated geometric support would need more atoms than
# this have P_ACK so small that their AoI is astronomically worse; skip them
MAX_GEOMETRIC_ATOMS = 200_000


class Scheme(Enum):
    IIR = "iir"
    FR_NO_REPLACE = "fr-no-replace"
    FR_REPLACE = "fr-replace"


@dataclass(frozen=True)
class BaselineResult:
    scheme: Scheme
    n1_star: int
    gamma_star: float | None
    aoi: float
    aoi_zero_wait: float


def find_n_cap(model: AckModel, tail: float = TAIL_MASS) -> int:
    """Smallest integer N with 1 - P_ACK(N) < tail."""
    lo, hi = model.domain
    n = int(math.ceil(lo))
    if math.isfinite(hi):
        last = int(math.floor(hi))
        for n in range(n, last + 1):
            if 1.0 - model.prob(n) < tail:
                return n
        raise CapError(f"table model never reaches 1 - P_ACK < {tail:g}")
    step = max(n, 1)
    while 1.0 - model.prob(n + step) >= tail:
        step *= 2
    lo_n, hi_n = n, n + step
    while hi_n - lo_n > 1:
        mid = (lo_n + hi_n) // 2
        if 1.0 - model.prob(mid) < tail:
            hi_n = mid
        else:
            lo_n = mid
    return hi_n if 1.0 - model.prob(lo_n) >= tail else lo_n


def iir_dist(n1: int, beta: float, model: AckModel, n_cap: int) -> ServiceTimeDist:
    """One extra bit per attempt from N_1 up to the cap, residual mass at the cap."""
    ns = np.arange(int(n1), int(n_cap) + 1, dtype=float)
    attempts = np.arange(1, ns.size + 1)
    cdf = np.asarray(model.prob(ns), dtype=float)
    cdf[-1] = 1.0
    mass = np.diff(cdf, prepend=0.0)
    return ServiceTimeDist(ns + attempts * beta, mass)


def geometric_dist(n1: float, beta: float, p: float, tail: float = TAIL_MASS) -> ServiceTimeDist:
    """tau = (N_1 + beta) M with M ~ Geometric(p), truncated at ``tail`` and renormalized."""
    if not 0.0 < p <= 1.0:
        raise ValueError("p must be in (0, 1]")
    c = float(n1) + beta
    if p >= 1.0:
        return ServiceTimeDist.point(c)
    count = max(int(math.ceil(math.log(tail) / math.log1p(-p))), 1)
    j = np.arange(1, count + 1)
    mass = p * np.exp((j - 1) * math.log1p(-p))
    mass /= mass.sum()
    return ServiceTimeDist(c * j, mass)


def geometric_atoms(p: float, tail: float = TAIL_MASS) -> float:
    if p >= 1.0:
        return 1.0
    if p <= 0.0:
        return math.inf
    return math.log(tail) / math.log1p(-p)


def _n_range(k: int, model: AckModel, n_range):
    if n_range is not None:
        return [int(n) for n in n_range]
    lo, hi = model.domain
    top = 4 * k if not math.isfinite(hi) else min(4 * k, int(math.floor(hi)))
    return list(range(int(math.ceil(lo)), top + 1))


def _warn_if_boundary(name, values, n_range):
    if len(values) >= 2 and values[-1] < values[-2]:
        log.warning("%s objective still decreasing at N_1=%d; widen the N_1 range", name, n_range[-1])


def iir_aoi(k: int, beta: float, model: AckModel, n_cap: int | None = None) -> BaselineResult:
    """Jointly optimal N_1 and waiting threshold for incremental redundancy one bit at a time."""
    if n_cap is None:
        n_cap = find_n_cap(model)
    elif 1.0 - model.prob(n_cap) >= TAIL_MASS:
        raise CapError(f"P_ACK({n_cap}) = {model.prob(n_cap):.15g} < 1 - {TAIL_MASS:g}")
    lo = int(math.ceil(max(k, model.domain[0])))
    best = None
    for n1 in range(lo, int(n_cap) + 1):
        dist = iir_dist(n1, beta, model, n_cap)
        ws = solve_gamma(dist)
        if best is None or ws.aoi_with_wait < best[1].aoi_with_wait:
            best = (n1, ws)
    n1, ws = best
    return BaselineResult(Scheme.IIR, n1, ws.gamma_star, ws.aoi_with_wait, ws.aoi_zero_wait)


def fr_no_replace_aoi(k: int, beta: float, model: AckModel, n_range=None) -> BaselineResult:
    """Fixed redundancy, retransmitting the same message until it is decoded."""
    grid = _n_range(k, model, n_range)
    best = None
    trace = []
    for n1 in grid:
        p = model.prob(n1)
        if geometric_atoms(p) > MAX_GEOMETRIC_ATOMS:
            continue
        ws = solve_gamma(geometric_dist(n1, beta, p))
        trace.append(ws.aoi_with_wait)
        if best is None or ws.aoi_with_wait < best[1].aoi_with_wait:
            best = (n1, ws)
    if best is None:
        raise ValueError("no N_1 in range has a usable ACK probability")
    _warn_if_boundary("FR without replacement", trace, grid)
    n1, ws = best
    return BaselineResult(Scheme.FR_NO_REPLACE, n1, ws.gamma_star, ws.aoi_with_wait, ws.aoi_zero_wait)


def fr_replace_aoi(k: int, beta: float, model: AckModel, n_range=None) -> BaselineResult:
    """Fixed redundancy with a fresh sample after every failure; zero-wait is optimal.

    AoI = (N_1 + beta) (1 / P_ACK(N_1) + 1/2).
    """
    grid = _n_range(k, model, n_range)
    values = []
    for n1 in grid:
        p = model.prob(n1)
        values.append((n1 + beta) * (1.0 / p + 0.5) if p > 0 else math.inf)
    _warn_if_boundary("FR with replacement", values, grid)
    i = int(np.argmin(values))
    return BaselineResult(Scheme.FR_REPLACE, grid[i], None, values[i], values[i])


