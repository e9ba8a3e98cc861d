"""Monte Carlo renewal simulation of the AoI process.

Each epoch i starts when update i-1 is delivered with age tau_{i-1}. The
sampler waits W_i = [gamma - tau_{i-1}]^+, then service takes tau_i, so the
epoch has length L_i = W_i + tau_i and AoI area Q_i = tau_{i-1} L_i + L_i^2/2.
The long-term average AoI is estimated as sum(Q) / sum(L).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .service_time import ServiceTimeDist


@dataclass(frozen=True)
class SimConfig:
    epochs: int = 1_000_000
    seed: int = 0
    gamma: float = 0.0
    batches: int = 100
    workers: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.batches < 1 or self.workers < 1:
            raise ValueError("batches and workers must be >= 1")


@dataclass(frozen=True)
class FrReplaceScheme:
    """Fixed-length codeword, fresh sample after each failure.

    Delivered updates are always N_1 + beta old; the epoch spans M attempts.
    """

    n1: float
    beta: float
    p_ack: float


@dataclass(frozen=True)
class SimResult:
    aoi_estimate: float
    std_error: float
    epochs_used: int

    def within(self, value: float, n_sigma: float = 3.0) -> bool:
        return abs(self.aoi_estimate - value) <= n_sigma * self.std_error


def _epochs(source, gamma, count, rng):
    """Arrays (Q, L) for ``count`` consecutive epochs."""
    if isinstance(source, FrReplaceScheme):
        c = source.n1 + source.beta
        attempts = rng.geometric(source.p_ack, size=count) if source.p_ack < 1 else np.ones(count)
        length = c * attempts
        return c * length + 0.5 * length * length, length
    tau = rng.choice(source.support, size=count + 1, p=source.mass)
    prev, cur = tau[:-1], tau[1:]
    length = np.maximum(gamma - prev, 0.0) + cur
    return prev * length + 0.5 * length * length, length


def _run_chunk(args):
    source, gamma, count, seed = args
    rng = np.random.default_rng(seed)
    return _epochs(source, gamma, count, rng)


def simulate(cfg: SimConfig, source: ServiceTimeDist | FrReplaceScheme) -> SimResult:
    """Estimate the long-term average AoI and its batch-means standard error.

    Work is split into ``cfg.workers`` chunks seeded with ``seed ^ index``;
    results depend only on the worker count, never on completion order.
    """
    sizes = [cfg.epochs // cfg.workers + (i < cfg.epochs % cfg.workers) for i in range(cfg.workers)]
    jobs = [(source, cfg.gamma, n, cfg.seed ^ i) for i, n in enumerate(sizes) if n > 0]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    q = np.concatenate([p[0] for p in parts])
    length = np.concatenate([p[1] for p in parts])

    estimate = float(q.sum() / length.sum())
    batches = min(cfg.batches, q.size)
    if batches < 2:
        return SimResult(estimate, 0.0, int(q.size))
    usable = q.size - q.size % batches
    ratios = q[:usable].reshape(batches, -1).sum(axis=1) / length[:usable].reshape(batches, -1).sum(axis=1)
    std_error = float(ratios.std(ddof=1) / np.sqrt(batches))
    return SimResult(estimate, std_error, int(q.size))


def analytical_aoi(source, gamma: float = 0.0) -> float:
    """Closed-form counterpart of :func:`simulate` for the same source."""
    if isinstance(source, FrReplaceScheme):
        return (source.n1 + source.beta) * (1.0 / source.p_ack + 0.5)
    from .waiting import epoch_moments

    e_l, e_q = epoch_moments(source, gamma)
    return e_q / e_l
