"""Sequential differential optimization (SDO) of HARQ blocklengths for AoI.

The zero-wait AoI  E[tau] + E[tau^2] / (2 E[tau])  is not separable in the
blocklengths, so the search runs on the auxiliary objective

    J_lambda = (1 - lambda) E[tau] + E[tau^2] / 2,

whose stationarity condition in N_f involves only N_{f-1}, N_f and N_{f+1}.
For fixed lambda and N_1 this gives N_{f+1} in closed form (a quadratic in
A_{f+1} = N_{f+1} + (f+1) beta), so the whole schedule follows from N_1.
p(lambda) is the minimum of J_lambda over the N_1 sweep, and the optimal AoI
is p(lambda*) + lambda* at the root of p(lambda) = E[tau_lambda].
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ack_model import AckModel
from .errors import BranchExplosionError, InfeasibleError, NonBracketingError
from .service_time import Schedule, build_dist, rho_zero_wait

log = logging.getLogger(__name__)

_LAMBDA_CAP = 2.0**24


@dataclass(frozen=True)
class SdoConfig:
    """Inputs of the SDO search.

    ``n1_step`` is the coarse N_1 grid of the lambda route; ``n1_refine``
    is the finer step used around the best coarse point (0 disables the
    refinement). The optimum usually sits right next to the smallest N_1
    that still yields an increasing sequence, so a coarse grid alone makes
    the chosen schedule jump with lambda. ``n2_step`` is the N_2
    grid used when N_1 is held fixed (the rho_0(N_1) curve). ``max_attempts``
    rejects sequences that creep toward ``n_max`` without reaching it.
    ``lambda_scan`` > 0 scans that many lambda points for multiple roots of
    p(lambda) - E[tau_lambda] before bisecting.
    """

    k: int = 64
    beta: float = 10.0
    n_max: float = 192
    n1_step: float = 1.0
    n1_refine: float = 1e-3
    n2_step: float = 1.0
    lambda_tol: float = 1e-4
    max_seq: int = 64
    max_attempts: int = 512
    fixed_m: int | None = None
    lambda_scan: int = 0

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("k must be positive")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.n_max < self.k:
            raise ValueError("n_max must be >= k")
        if self.n1_step <= 0 or self.n2_step <= 0 or self.lambda_tol <= 0:
            raise ValueError("grid steps and tolerances must be positive")
        if self.n1_refine < 0:
            raise ValueError("n1_refine must be >= 0")
        if self.fixed_m is not None and self.fixed_m < 1:
            raise ValueError("fixed_m must be >= 1")


@dataclass
class SdoSolution:
    schedule: Schedule
    real_schedule: Schedule
    lambda_star: float
    p_of_lambda: float
    rho_star: float
    n1_star: float
    e_tau: float
    rho_real: float
    rho_rounded: float
    route: str = "lambda"
    objective_trace: list[tuple[float, float]] = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.real_schedule.m


def _moments(ns, beta, model):
    """(E[tau], E[tau^2]) for a plain list of blocklengths; no validation."""
    m = len(ns)
    e1 = e2 = prev = 0.0
    for f, n in enumerate(ns, start=1):
        p = model.prob(n) if f < m else 1.0
        w = p - prev
        t = n + f * beta
        e1 += w * t
        e2 += w * t * t
        prev = p
    return e1, e2


def _objective(lam, e1, e2):
    return (1.0 - lam) * e1 + 0.5 * e2


def next_blocklength(prev2, prev, f, lam, cfg: SdoConfig, model: AckModel):
    """Real roots N_{f+1} of the stationarity condition in N_f.

    ``prev2`` is N_{f-1} (``None`` when f == 1). Returns a tuple of 0, 1 or
    2 candidates, largest first. An empty tuple means the discriminant is
    negative and the sequence must be rejected.
    """
    beta = cfg.beta
    dp = model.prob(prev) - (model.prob(prev2) if prev2 is not None else 0.0)
    slope = model.deriv(prev)
    if not slope > 0.0:
        return ()
    a_f = prev + f * beta
    r = dp / slope
    b = 1.0 - lam
    c = 2.0 * b * (r + a_f) + 2.0 * a_f * (r + 0.5 * a_f)
    disc = b * b + c
    if disc < 0.0:
        return ()
    s = math.sqrt(disc)
    shift = -b - (f + 1) * beta
    if s == 0.0:
        return (shift,)
    return (shift + s, shift - s)


def solve_sequence(n1, lam, cfg: SdoConfig, model: AckModel, n2=None):
    """Expand every SDO solution sequence from N_1 (and optionally a fixed N_2).

    Returns ``(schedule, J_lambda)`` for the best completed sequence, or
    ``None`` when all sequences are rejected.
    """
    n_max = float(cfg.n_max)
    n1 = float(n1)
    if n1 >= n_max:
        seeds = [[n_max]]
    elif n2 is None:
        seeds = [[n1]]
    else:
        seeds = [[n1, min(float(n2), n_max)]] if n2 > n1 else []

    fixed_m = cfg.fixed_m
    done = []
    live = []
    for s in seeds:
        (done if s[-1] >= n_max else live).append(s)

    while live:
        grown = []
        for s in live:
            f = len(s)
            prev2 = s[-2] if f >= 2 else None
            for cand in next_blocklength(prev2, s[-1], f, lam, cfg, model):
                if cand <= s[-1]:
                    continue
                if cand >= n_max:
                    done.append(s + [n_max])
                elif f + 1 < cfg.max_attempts and (fixed_m is None or f + 2 <= fixed_m):
                    grown.append(s + [cand])
        if len(grown) > cfg.max_seq:
            raise BranchExplosionError(
                f"{len(grown)} live SDO branches from N_1={n1:g} at lambda={lam:g} exceed max_seq={cfg.max_seq}"
            )
        live = grown

    if fixed_m is not None:
        done = [s for s in done if len(s) == fixed_m]
    best = None
    for s in done:
        e1, e2 = _moments(s, cfg.beta, model)
        obj = _objective(lam, e1, e2)
        if best is None or obj < best[1]:
            best = (s, obj)
    if best is None:
        return None
    return Schedule(cfg.k, cfg.beta, tuple(best[0])), best[1]


def _grid(lo, hi, step):
    """lo, lo+step, ... strictly below hi, then hi itself."""
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    pts = [lo + i * step for i in range(count)]
    return [p for p in pts if p < hi - 1e-9] + [float(hi)]


def _n1_grid(cfg: SdoConfig, model: AckModel):
    lo = max(float(cfg.k), model.domain[0])
    return _grid(lo, float(cfg.n_max), cfg.n1_step)


@dataclass(frozen=True)
class _Point:
    lam: float
    p: float
    schedule: Schedule
    e1: float
    e2: float

    @property
    def g(self) -> float:
        return self.p - self.e1


def _best_over(lam, starts, cfg: SdoConfig, model: AckModel, n1=None):
    """Best completed sequence over many starting points at once.

    Same expansion and pruning rules as :func:`solve_sequence`, run
    breadth-first on all starts together with numpy. ``starts`` are N_1
    values, or N_2 values when ``n1`` is given.
    """
    n_max = float(cfg.n_max)
    beta = cfg.beta
    b = 1.0 - lam
    fixed_m = cfg.fixed_m
    starts = np.asarray(starts, dtype=float)

    # node table for path reconstruction: value and parent index per node
    values: list[np.ndarray] = []
    parents: list[np.ndarray] = []
    offset = 0

    def add_nodes(vals, par):
        nonlocal offset
        ids = np.arange(offset, offset + vals.size)
        values.append(vals)
        parents.append(par)
        offset += vals.size
        return ids

    best_obj = math.inf
    best_node = -1
    best_len = 0

    def complete(obj, node, length):
        nonlocal best_obj, best_node, best_len
        if fixed_m is not None:
            keep = length == fixed_m
            obj, node, length = obj[keep], node[keep], length[keep]
        if obj.size:
            i = int(np.argmin(obj))
            if obj[i] < best_obj:
                best_obj, best_node, best_len = float(obj[i]), int(node[i]), int(length[i])

    if n1 is None:
        at_top = starts >= n_max
        if at_top.any():
            t = n_max + beta
            complete(
                np.array([_objective(lam, t, t * t)]),
                add_nodes(np.array([n_max]), np.array([-1])),
                np.array([1]),
            )
        starts = starts[~at_top]
        origin = np.arange(starts.size)
        node = add_nodes(starts, np.full(starts.size, -1))
        prev = starts
        p_prev = np.asarray(model.prob(prev), dtype=float) if prev.size else prev
        p_prev2 = np.zeros_like(prev)
        e1 = np.zeros_like(prev)
        e2 = np.zeros_like(prev)
        f = 1
    else:
        n1 = float(n1)
        root = add_nodes(np.array([n1]), np.array([-1]))[0]
        p1 = model.prob(n1)
        t1 = n1 + beta
        starts = starts[starts > n1]
        top = starts >= n_max
        if top.any():
            t2 = n_max + 2 * beta
            e1c = t1 * p1 + t2 * (1.0 - p1)
            e2c = t1 * t1 * p1 + t2 * t2 * (1.0 - p1)
            complete(
                np.array([_objective(lam, e1c, e2c)]),
                add_nodes(np.array([n_max]), np.array([root])),
                np.array([2]),
            )
        starts = starts[~top]
        if fixed_m is not None and fixed_m < 3:
            starts = starts[:0]
        origin = np.arange(starts.size)
        node = add_nodes(starts, np.full(starts.size, root))
        prev = starts
        p_prev = np.asarray(model.prob(prev), dtype=float) if prev.size else prev
        p_prev2 = np.full(prev.size, p1)
        e1 = np.full(prev.size, t1 * p1)
        e2 = np.full(prev.size, t1 * t1 * p1)
        f = 2

    while prev.size:
        slope = np.asarray(model.deriv(prev), dtype=float)
        dp = p_prev - p_prev2
        a_f = prev + f * beta
        with np.errstate(divide="ignore", invalid="ignore"):
            r = dp / slope
            c = 2.0 * b * (r + a_f) + 2.0 * a_f * (r + 0.5 * a_f)
            disc = b * b + c
            ok = (slope > 0.0) & (disc >= 0.0)
            s = np.sqrt(np.where(ok, disc, 0.0))
        shift = -b - (f + 1) * beta
        hi = shift + s
        lo = shift - s
        cand = np.concatenate([hi, lo])
        idx = np.concatenate([np.arange(prev.size), np.arange(prev.size)])
        valid = np.concatenate([ok, ok & (s > 0.0)]) & (cand > prev[idx])
        cand, idx = cand[valid], idx[valid]

        # atom f is final once N_{f+1} exists
        w_f = dp[idx]
        e1_f = e1[idx] + a_f[idx] * w_f
        e2_f = e2[idx] + a_f[idx] ** 2 * w_f

        done = cand >= n_max
        if done.any():
            d = idx[done]
            t_last = n_max + (f + 1) * beta
            tail = 1.0 - p_prev[d]
            obj = _objective(lam, e1_f[done] + t_last * tail, e2_f[done] + t_last * t_last * tail)
            ids = add_nodes(np.full(d.size, n_max), node[d])
            complete(obj, ids, np.full(d.size, f + 1))

        go = ~done
        if f + 1 >= cfg.max_attempts or (fixed_m is not None and f + 2 > fixed_m):
            go[:] = False
        g = idx[go]
        if g.size:
            counts = np.bincount(origin[g])
            if counts.max() > cfg.max_seq:
                raise BranchExplosionError(
                    f"{counts.max()} live SDO branches at lambda={lam:g} exceed max_seq={cfg.max_seq}"
                )
        new_prev = cand[go]
        node = add_nodes(new_prev, node[g])
        origin = origin[g]
        p_prev2 = p_prev[g]
        p_prev = np.asarray(model.prob(new_prev), dtype=float) if new_prev.size else new_prev
        e1, e2 = e1_f[go], e2_f[go]
        prev = new_prev
        f += 1

    if best_node < 0:
        return None
    all_values = np.concatenate(values)
    all_parents = np.concatenate(parents)
    path = []
    i = best_node
    while i >= 0:
        path.append(float(all_values[i]))
        i = int(all_parents[i])
    path.reverse()
    assert len(path) == best_len
    sched = Schedule(cfg.k, cfg.beta, tuple(path))
    e1s, e2s = _moments(sched.n, cfg.beta, model)
    return _Point(lam, _objective(lam, e1s, e2s), sched, e1s, e2s)


def _refine(lam, pt: _Point, cfg: SdoConfig, model: AckModel) -> _Point:
    lo_bound = max(float(cfg.k), model.domain[0])
    hi_bound = float(cfg.n_max)
    for _ in range(8):
        center = pt.schedule.n[0]
        lo = max(lo_bound, center - cfg.n1_step)
        hi = min(hi_bound, center + cfg.n1_step)
        cand = _best_over(lam, _grid(lo, hi, cfg.n1_refine), cfg, model)
        if cand is None or cand.p >= pt.p:
            break
        pt = cand
        edge = cfg.n1_refine * 0.5
        if lo + edge < pt.schedule.n[0] < hi - edge:
            break
    return pt


def _p_point(lam, cfg, model) -> _Point:
    pt = _best_over(lam, _n1_grid(cfg, model), cfg, model)
    step = cfg.n1_step
    # an exact-m filter can leave only narrow N_1 windows that a coarse grid misses
    while pt is None and cfg.n1_refine > 0 and step / 10 >= cfg.n1_refine * (1 - 1e-9):
        step /= 10
        lo = max(float(cfg.k), model.domain[0])
        pt = _best_over(lam, _grid(lo, float(cfg.n_max), step), cfg, model)
    if pt is None:
        raise InfeasibleError(f"every N_1 is rejected at lambda={lam:g}")
    if cfg.n1_refine > 0:
        pt = _refine(lam, pt, cfg, model)
    return pt


def p_lambda(lam, cfg: SdoConfig, model: AckModel) -> tuple[float, Schedule]:
    """p(lambda) = min over the N_1 sweep of J_lambda, with its schedule."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    pt = _p_point(lam, cfg, model)
    return pt.p, pt.schedule


def _root(evaluate, cfg: SdoConfig, lo_pt: _Point, hi_pt: _Point) -> _Point:
    """Bisect g = p - E[tau] between points with g(lo) > 0 >= g(hi)."""
    while hi_pt.lam - lo_pt.lam > cfg.lambda_tol:
        mid = evaluate(0.5 * (lo_pt.lam + hi_pt.lam))
        if mid.g > 0:
            lo_pt = mid
        else:
            hi_pt = mid
    # g can jump where the optimal sequence changes shape; keep the side closer to zero
    return _polish(evaluate, lo_pt if abs(lo_pt.g) < abs(hi_pt.g) else hi_pt)


def _polish(evaluate, pt: _Point, max_iter: int = 20) -> _Point:
    """Fixed-point steps lambda <- E[tau^2] / (2 E[tau]) of the current schedule.

    At that lambda the current schedule has g = 0 exactly, so p + lambda
    matches its zero-wait AoI. Steps stop as soon as |g| no longer shrinks.
    """
    for _ in range(max_iter):
        lam = pt.e2 / (2.0 * pt.e1)
        if abs(lam - pt.lam) <= 1e-12 * max(1.0, lam):
            break
        nxt = evaluate(lam)
        if abs(nxt.g) >= abs(pt.g):
            break
        pt = nxt
    return pt


def _lambda_search(evaluate, cfg: SdoConfig, what: str) -> _Point:
    lo_pt = evaluate(0.0)
    hi = 1.0
    hi_pt = evaluate(hi)
    while hi_pt.p >= 0.0:
        hi *= 2.0
        if hi > _LAMBDA_CAP:
            raise NonBracketingError(f"p(lambda) stays nonnegative up to lambda={hi:g} ({what})")
        hi_pt = evaluate(hi)
    if not (lo_pt.g > 0 >= hi_pt.g):
        raise NonBracketingError(
            f"p - E[tau] does not change sign on [0, {hi:g}] ({what}): g(0)={lo_pt.g:g}, g(hi)={hi_pt.g:g}"
        )
    if cfg.lambda_scan <= 1:
        return _root(evaluate, cfg, lo_pt, hi_pt)

    pts = [lo_pt] + [evaluate(x) for x in np.linspace(0.0, hi, cfg.lambda_scan)[1:-1]] + [hi_pt]
    roots = [_root(evaluate, cfg, a, b) for a, b in zip(pts, pts[1:]) if a.g > 0 >= b.g]
    if len(roots) > 1:
        log.warning(
            "%d crossings of p(lambda) = E[tau_lambda] (%s); keeping the smallest p + lambda",
            len(roots),
            what,
        )
    return min(roots, key=lambda pt: pt.p + pt.lam)


def round_schedule(sched: Schedule) -> Schedule:
    """Round all blocklengths to the nearest integer at once.

    A value that collides with its predecessor is bumped up by one; any value
    pushed onto the (pinned) terminal blocklength is dropped.
    """
    terminal = math.floor(sched.n[-1] + 0.5)
    out = []
    for x in sched.n[:-1]:
        v = math.floor(x + 0.5)
        if out and v <= out[-1]:
            v = out[-1] + 1
        if v >= terminal:
            break
        out.append(v)
    out.append(terminal)
    return Schedule(sched.k, sched.beta, tuple(out))


def rho_of_n1(n1, cfg: SdoConfig, model: AckModel) -> SdoSolution:
    """Optimal zero-wait AoI with N_1 held fixed.

    N_2 takes the role of the swept variable: for each lambda, sweep N_2 on
    the ``n2_step`` grid, run the recursion from f = 2, and solve for lambda
    as in the free-N_1 case.
    """
    n1 = float(n1)
    n_max = float(cfg.n_max)
    starts = _grid(n1 + cfg.n2_step, n_max, cfg.n2_step) if n1 < n_max else [n_max]

    def evaluate(lam):
        pt = _best_over(lam, starts, cfg, model, n1=n1)
        if pt is None:
            raise InfeasibleError(f"no admissible schedule with N_1={n1:g} at lambda={lam:g}")
        return pt

    pt = _lambda_search(evaluate, cfg, f"N_1={n1:g}")
    return _solution(pt, cfg, model, route="fixed-n1")


def _solution(pt: _Point, cfg: SdoConfig, model: AckModel, route: str) -> SdoSolution:
    real = pt.schedule
    rounded = round_schedule(real)
    return SdoSolution(
        schedule=rounded,
        real_schedule=real,
        lambda_star=pt.lam,
        p_of_lambda=pt.p,
        rho_star=pt.p + pt.lam,
        n1_star=real.n[0],
        e_tau=pt.e1,
        rho_real=rho_zero_wait(build_dist(real, model)),
        rho_rounded=rho_zero_wait(build_dist(rounded, model)),
        route=route,
    )


def _rho_trace_item(args):
    n1, cfg, model = args
    try:
        return n1, rho_of_n1(n1, cfg, model)
    except InfeasibleError:
        return n1, None


def rho_curve(cfg: SdoConfig, model: AckModel, n1_values=None, workers: int = 1):
    """rho_0*(N_1) over an integer N_1 grid; ``None`` where N_1 is infeasible."""
    if n1_values is None:
        lo = math.ceil(max(float(cfg.k), model.domain[0]))
        n1_values = list(range(lo, int(math.floor(cfg.n_max)) + 1))
    jobs = [(float(n1), cfg, model) for n1 in n1_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_rho_trace_item, jobs, chunksize=4))
    return [_rho_trace_item(j) for j in jobs]


def solve(
    cfg: SdoConfig,
    model: AckModel,
    fixed_n1_route: bool = False,
    trace: bool = False,
    workers: int = 1,
) -> SdoSolution:
    """Optimal zero-wait schedule.

    By default lambda* is found on the refined N_1 sweep. With
    ``fixed_n1_route`` the answer is instead the minimum of the rho_0*(N_1)
    curve over integer N_1, each point solved with N_1 held fixed. ``trace``
    fills ``objective_trace`` with that curve in either case.
    """
    curve = rho_curve(cfg, model, workers=workers) if (trace or fixed_n1_route) else []
    if fixed_n1_route:
        ok = [(n1, sol) for n1, sol in curve if sol is not None]
        if not ok:
            raise InfeasibleError("every N_1 is infeasible")
        _, best = min(ok, key=lambda item: item[1].rho_star)
    else:
        best = _solution(
            _lambda_search(lambda lam: _p_point(lam, cfg, model), cfg, "N_1 sweep"),
            cfg,
            model,
            route="lambda",
        )
    best.objective_trace = [(n1, sol.rho_star) for n1, sol in curve if sol is not None]
    return best


def lambda_curve(cfg: SdoConfig, model: AckModel, lambdas):
    """(lambda, p(lambda), E[tau_lambda], schedule) samples for plotting."""
    out = []
    for lam in lambdas:
        pt = _p_point(float(lam), cfg, model)
        out.append((pt.lam, pt.p, pt.e1, pt.schedule))
    return out
