"""Ensembles of simulated paths and the statistical checks run on them."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, InsufficientData
from .simulate import EXHAUSTION, EXPLORATION_EPISODE, Path, sample_path, simulate_path
from .solver import ValueSurface

__all__ = [
    "QUANTILES",
    "EnsembleStats",
    "Ensemble",
    "run_ensemble",
    "MartingaleReport",
    "martingale_test",
    "JumpReport",
    "exhaustion_jump_check",
    "GrowthReport",
    "conditional_growth_check",
]

QUANTILES = (0.05, 0.25, 0.50, 0.75, 0.95)
DEFAULT_SURVIVAL_FLOOR = 0.005


@dataclass(frozen=True)
class EnsembleStats:
    """Per-time aggregates.

    ``mean_price_conditional`` averages over paths not yet exhausted and is
    nan wherever the surviving share is below the floor; the same holds for
    its standard error.  ``quantiles`` maps a series name to an array of
    shape (len(QUANTILES), len(times)).
    """

    times: np.ndarray
    mean_price: np.ndarray
    stderr_price: np.ndarray
    mean_price_conditional: np.ndarray
    stderr_price_conditional: np.ndarray
    mean_price_exhausted: np.ndarray
    mean_reserves: np.ndarray
    stderr_reserves: np.ndarray
    mean_explored_area: np.ndarray
    stderr_explored_area: np.ndarray
    mean_consumption: np.ndarray
    stderr_consumption: np.ndarray
    survival: np.ndarray
    quantiles: dict
    survival_floor: float


@dataclass(frozen=True)
class Ensemble:
    """Paths plus the sampled price/exhaustion matrices (paths x times)."""

    paths: tuple
    times: np.ndarray
    price: np.ndarray
    alive: np.ndarray
    p0: float
    r: float
    stats: EnsembleStats


def _fsum_mean(a: np.ndarray) -> np.ndarray:
    """Column means with compensated summation (order-independent)."""
    n = a.shape[0]
    return np.array([math.fsum(col) / n for col in a.T])


def _stderr(a: np.ndarray, mean: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    if n < 2:
        return np.zeros(a.shape[1])
    dev = a - mean[None, :]
    var = np.array([math.fsum(col) for col in (dev * dev).T]) / (n - 1)
    return np.sqrt(var / n)


def _masked_mean(a: np.ndarray, mask: np.ndarray):
    counts = mask.sum(axis=0)
    mean = np.full(a.shape[1], np.nan)
    se = np.full(a.shape[1], np.nan)
    for j in range(a.shape[1]):
        c = int(counts[j])
        if c == 0:
            continue
        col = a[mask[:, j], j]
        m = math.fsum(col) / c
        mean[j] = m
        if c > 1:
            se[j] = math.sqrt(math.fsum((col - m) ** 2) / (c - 1) / c)
        else:
            se[j] = 0.0
    return mean, se


def _simulate_chunk(args):
    x0, r0, surface, seeds, streams, horizon, times, scale = args
    out = []
    for seed, sid in zip(seeds, streams):
        path = simulate_path(x0, r0, surface, seed, horizon, stream_id=sid, frontier_scale=scale)
        out.append((path, sample_path(path, times)))
    return out


def aggregate(series: list, times: np.ndarray, survival_floor: float) -> EnsembleStats:
    """Reduce per-path sampled series to :class:`EnsembleStats`."""
    price = np.array([s.price for s in series])
    reserves = np.array([s.reserves for s in series])
    explored = np.array([s.explored_area for s in series])
    cons = np.array([s.consumption_rate for s in series])
    alive = ~np.array([s.exhausted for s in series])
    mp = _fsum_mean(price)
    mr = _fsum_mean(reserves)
    mx = _fsum_mean(explored)
    mc = _fsum_mean(cons)
    survival = alive.sum(axis=0) / alive.shape[0]
    cond, cond_se = _masked_mean(price, alive)
    gone, _ = _masked_mean(price, ~alive)
    low = survival < survival_floor
    cond[low] = np.nan
    cond_se[low] = np.nan
    quant = {
        name: np.quantile(arr, QUANTILES, axis=0)
        for name, arr in (("price", price), ("reserves", reserves), ("explored_area", explored),
                          ("consumption", cons))
    }
    return EnsembleStats(
        times=times,
        mean_price=mp,
        stderr_price=_stderr(price, mp),
        mean_price_conditional=cond,
        stderr_price_conditional=cond_se,
        mean_price_exhausted=gone,
        mean_reserves=mr,
        stderr_reserves=_stderr(reserves, mr),
        mean_explored_area=mx,
        stderr_explored_area=_stderr(explored, mx),
        mean_consumption=mc,
        stderr_consumption=_stderr(cons, mc),
        survival=survival,
        quantiles=quant,
        survival_floor=survival_floor,
    )


def run_ensemble(
    x0: float,
    r0: float,
    surface: ValueSurface,
    n_paths: int,
    horizon: float,
    base_seed: int,
    *,
    times=None,
    n_times: int = 200,
    workers: int = 1,
    survival_floor: float = DEFAULT_SURVIVAL_FLOOR,
    frontier_scale: float = 1.0,
) -> Ensemble:
    """Simulate ``n_paths`` paths and aggregate them.

    Path ``i`` uses seed ``base_seed + i`` on stream ``i``, so the result does
    not depend on ``workers``.
    """
    if n_paths < 1:
        raise DomainError("n_paths must be at least 1")
    if times is None:
        times = np.linspace(0.0, horizon, n_times)
    times = np.asarray(times, dtype=float)
    seeds = [base_seed + i for i in range(n_paths)]
    streams = list(range(n_paths))
    if workers <= 1:
        results = _simulate_chunk((x0, r0, surface, seeds, streams, horizon, times, frontier_scale))
    else:
        n_chunks = min(n_paths, workers * 4)
        bounds = np.linspace(0, n_paths, n_chunks + 1).astype(int)
        jobs = [(x0, r0, surface, seeds[a:b], streams[a:b], horizon, times, frontier_scale)
                for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        results = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(_simulate_chunk, jobs):
                results.extend(chunk)
    paths = tuple(p for p, _ in results)
    series = [s for _, s in results]
    stats = aggregate(series, times, survival_floor)
    price = np.array([s.price for s in series])
    alive = ~np.array([s.exhausted for s in series])
    p0 = surface.price_at(x0, r0)
    return Ensemble(paths, times, price, alive, float(p0), surface.params.r, stats)


# ---------------------------------------------------------------------------
# Statistical checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MartingaleReport:
    times: np.ndarray
    mean_price: np.ndarray
    stderr: np.ndarray
    expected: np.ndarray
    z: np.ndarray
    passed: np.ndarray
    threshold: float

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed))


def martingale_test(ensemble: Ensemble, significance: float = 3.0, times=None) -> MartingaleReport:
    """z-test of E[p_t] = p0 exp(r t) at each time, over all paths.

    With ``times`` given, the paths are re-sampled there; otherwise the
    ensemble's own time grid is used.  A zero standard error (every path
    identical, as at t = 0) gives z = 0 if the mean matches to round-off.
    """
    if times is None:
        t, price = ensemble.times, ensemble.price
    else:
        t = np.asarray(times, dtype=float)
        price = np.array([sample_path(p, t).price for p in ensemble.paths])
    mean = _fsum_mean(price)
    se = _stderr(price, mean)
    expected = ensemble.p0 * np.exp(ensemble.r * t)
    diff = mean - expected
    # below this the spread is summation round-off, not sampling noise
    degenerate = se <= 1e-12 * np.abs(expected)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(~degenerate, diff / np.where(degenerate, 1.0, se),
                     np.where(np.abs(diff) <= 1e-9 * np.abs(expected), 0.0, np.inf))
    return MartingaleReport(t, mean, se, expected, z, np.abs(z) <= significance, significance)


@dataclass(frozen=True)
class JumpReport:
    """Price jumps at episodes.

    ``terminal_*`` refer to Exhaustion events, ``interior_*`` to episodes that
    end back in the consumption region.
    """

    n_terminal: int
    terminal_up_fraction: float
    terminal_jumps: np.ndarray
    n_interior: int
    interior_up: int
    interior_down: int

    @property
    def passed(self) -> bool:
        return self.n_terminal == 0 or self.terminal_up_fraction == 1.0


def exhaustion_jump_check(ensemble) -> JumpReport:
    """Collect jumps price_after - price_before; accepts an Ensemble or paths."""
    paths = ensemble.paths if isinstance(ensemble, Ensemble) else tuple(ensemble)
    term, up, down = [], 0, 0
    for path in paths:
        for ev in path.events:
            jump = ev.price_after - ev.price_before
            if ev.kind == EXHAUSTION:
                term.append(jump)
            elif ev.kind == EXPLORATION_EPISODE:
                if jump > 0:
                    up += 1
                elif jump < 0:
                    down += 1
    term = np.array(term)
    frac = float(np.mean(term > 0)) if len(term) else 1.0
    return JumpReport(len(term), frac, term, up + down, up, down)


@dataclass(frozen=True)
class GrowthReport:
    slope: float
    upper_bound: float
    confidence: float
    window: tuple
    n_times: int
    r: float

    @property
    def passed(self) -> bool:
        return self.slope < self.r and self.upper_bound < self.r


def _ols_slopes(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares slope of each row of ``y`` against ``t``."""
    tc = t - t.mean()
    return (y - y.mean(axis=-1, keepdims=True)) @ tc / (tc @ tc)


def conditional_growth_check(
    ensemble: Ensemble,
    survival_floor: Optional[float] = None,
    *,
    t_max: Optional[float] = None,
    confidence: float = 0.95,
    n_boot: int = 500,
    seed: int = 0,
) -> GrowthReport:
    """Slope of log conditional mean price over the surviving window.

    The window holds the times with survival at least ``survival_floor``
    (the ensemble's floor by default), optionally cut at ``t_max``.  The
    one-sided upper bound is the ``confidence`` quantile of slopes over a
    bootstrap that resamples whole paths.
    """
    stats = ensemble.stats
    floor = stats.survival_floor if survival_floor is None else survival_floor
    sel = stats.survival >= floor
    if t_max is not None:
        sel &= ensemble.times <= t_max
    idx = np.flatnonzero(sel)
    if len(idx) < 2:
        raise InsufficientData("need conditional means at two or more times")
    t = ensemble.times[idx]
    price = ensemble.price[:, idx]
    alive = ensemble.alive[:, idx]
    cond = np.array([math.fsum(price[alive[:, j], j]) / alive[:, j].sum() for j in range(len(idx))])
    slope = float(_ols_slopes(t, np.log(cond)))
    rng = np.random.default_rng(seed)
    n = price.shape[0]
    pa = price * alive
    slopes = []
    for _ in range(0, n_boot, 50):
        b = min(50, n_boot - len(slopes))
        w = np.stack([np.bincount(rng.integers(0, n, n), minlength=n) for _ in range(b)]).astype(float)
        num = w @ pa
        den = w @ alive
        with np.errstate(divide="ignore", invalid="ignore"):
            boot = np.log(num / den)
        ok = np.all(np.isfinite(boot), axis=1)
        slopes.extend(_ols_slopes(t, boot[ok]).tolist())
    upper = float(np.quantile(slopes, confidence)) if slopes else math.inf
    return GrowthReport(slope, upper, confidence, (float(t[0]), float(t[-1])), len(idx), ensemble.r)
