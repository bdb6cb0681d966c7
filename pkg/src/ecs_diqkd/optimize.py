"""Intensity optimization, distance sweeps, and crossover location."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .params import ParameterError
from .rates import (
    bell_state_stats,
    channel_efficiency,
    ecs_misaligned_stats,
    key_rate,
    plob_bound,
)

PROTOCOLS = ("ecs", "bell", "plob")
MU_SEARCH_BOUNDS = (1e-4, 1.0)
SEED_GRID_SIZE = 200
# Bracket refinement tolerance in mu; far tighter than the audit-grid
# guarantee so the certified maximum is met with slack.
GOLDEN_XTOL = 1e-9
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MuOptimum:
    """Result of the one-dimensional intensity search.

    ``flagged`` marks the degenerate case where the rate vanished over the
    whole search interval; ``mu_star`` is then the interval midpoint.
    """

    mu_star: float
    rate_star: float
    flagged: bool = False


@dataclass(frozen=True)
class SweepConfig:
    """Distance grid plus the channel parameters shared by every row.

    ``mu = None`` optimizes the intensity at each distance; a number fixes it.
    """

    l_min_km: float = 0.0
    l_max_km: float = 600.0
    l_step_km: float = 5.0
    beta_db_per_km: float = 0.2
    eta_d: float = 0.8
    p_d: float = 1e-7
    e_d: float = 0.0
    mu: float | None = None
    protocols: tuple[str, ...] = PROTOCOLS

    def __post_init__(self) -> None:
        if self.l_min_km > self.l_max_km:
            raise ParameterError("l_min_km must not exceed l_max_km")
        if self.l_min_km < 0.0:
            raise ParameterError("l_min_km must be >= 0")
        if not self.l_step_km > 0.0:
            raise ParameterError("l_step_km must be > 0")
        if not self.protocols:
            raise ParameterError("protocol set must not be empty")
        unknown = set(self.protocols) - set(PROTOCOLS)
        if unknown:
            raise ParameterError(f"unknown protocols: {sorted(unknown)}")
        if self.mu is not None and not self.mu > 0.0:
            raise ParameterError(f"fixed mu must be > 0, got {self.mu}")


@dataclass(frozen=True)
class SweepRow:
    """One distance point; fields are None for protocols not requested."""

    distance_km: float
    mu: float | None = None
    q_zz: float | None = None
    s: float | None = None
    e_zz: float | None = None
    rate_ecs: float | None = None
    rate_bell: float | None = None
    rate_plob: float | None = None
    flagged: bool = False


def optimize_mu(
    distance_km: float,
    beta_db_per_km: float,
    eta_d: float,
    p_d: float,
    e_d: float,
    bounds: tuple[float, float] = MU_SEARCH_BOUNDS,
) -> MuOptimum:
    """Maximize the key rate over the intensity at one distance.

    A 200-point log-spaced seed grid picks the best basin (defending against
    multimodality), then golden-section refinement narrows the surrounding
    bracket; the best point ever evaluated is returned, so the result can
    never fall below the seed grid.
    """
    eta = channel_efficiency(distance_km, beta_db_per_km, eta_d)

    def rate(mu: float) -> float:
        return key_rate(ecs_misaligned_stats(mu, eta, p_d, e_d))

    lo, hi = bounds
    seeds = np.geomspace(lo, hi, SEED_GRID_SIZE)
    values = np.array([rate(m) for m in seeds])
    best = int(np.argmax(values))
    if values[best] <= 0.0:
        return MuOptimum(mu_star=0.5 * (lo + hi), rate_star=0.0, flagged=True)

    a = seeds[max(best - 1, 0)]
    b = seeds[min(best + 1, SEED_GRID_SIZE - 1)]
    best_mu, best_rate = float(seeds[best]), float(values[best])
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = rate(c), rate(d)
    while b - a > GOLDEN_XTOL:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = rate(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = rate(d)
        if fc > best_rate:
            best_mu, best_rate = c, fc
        if fd > best_rate:
            best_mu, best_rate = d, fd
    return MuOptimum(mu_star=best_mu, rate_star=best_rate, flagged=False)


def sweep_distances(config: SweepConfig) -> list[float]:
    """The inclusive distance grid, built by index to avoid drift."""
    span = config.l_max_km - config.l_min_km
    count = int(math.floor(span / config.l_step_km + 1e-9)) + 1
    return [config.l_min_km + i * config.l_step_km for i in range(count)]


def _sweep_row(config: SweepConfig, distance_km: float) -> SweepRow:
    eta = channel_efficiency(distance_km, config.beta_db_per_km, config.eta_d)
    mu = q_zz = s = e_zz = rate_ecs = rate_bell = rate_plob = None
    flagged = False
    if "ecs" in config.protocols:
        if config.mu is not None:
            mu = config.mu
            rate_ecs = key_rate(ecs_misaligned_stats(mu, eta, config.p_d, config.e_d))
        else:
            optimum = optimize_mu(
                distance_km, config.beta_db_per_km, config.eta_d, config.p_d, config.e_d
            )
            mu, rate_ecs, flagged = optimum.mu_star, optimum.rate_star, optimum.flagged
        stats = ecs_misaligned_stats(mu, eta, config.p_d, config.e_d)
        q_zz, s, e_zz = stats.q_zz, stats.s, stats.e_zz
    if "bell" in config.protocols:
        rate_bell = key_rate(bell_state_stats(eta, config.p_d))
    if "plob" in config.protocols:
        rate_plob = plob_bound(distance_km, config.beta_db_per_km, config.eta_d)
    return SweepRow(
        distance_km=distance_km,
        mu=mu,
        q_zz=q_zz,
        s=s,
        e_zz=e_zz,
        rate_ecs=rate_ecs,
        rate_bell=rate_bell,
        rate_plob=rate_plob,
        flagged=flagged,
    )


def sweep(config: SweepConfig, jobs: int = 1) -> list[SweepRow]:
    """Evaluate every grid distance; rows are returned ordered by distance.

    Rows are independent, so ``jobs > 1`` fans them out over processes;
    the result is identical either way.
    """
    distances = sweep_distances(config)
    worker = partial(_sweep_row, config)
    if jobs <= 1 or len(distances) < 2:
        return [worker(distance) for distance in distances]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, distances, chunksize=8))


def _protocol_rate(config: SweepConfig, protocol: str, distance_km: float) -> float:
    if protocol == "ecs":
        if config.mu is not None:
            eta = channel_efficiency(distance_km, config.beta_db_per_km, config.eta_d)
            return key_rate(ecs_misaligned_stats(config.mu, eta, config.p_d, config.e_d))
        return optimize_mu(
            distance_km, config.beta_db_per_km, config.eta_d, config.p_d, config.e_d
        ).rate_star
    if protocol == "bell":
        eta = channel_efficiency(distance_km, config.beta_db_per_km, config.eta_d)
        return key_rate(bell_state_stats(eta, config.p_d))
    if protocol == "plob":
        return plob_bound(distance_km, config.beta_db_per_km, config.eta_d)
    raise ParameterError(f"unknown protocol {protocol!r}")


def find_crossover(
    protocol_pair: tuple[str, str],
    config: SweepConfig,
    bracket: tuple[float, float],
    tol_km: float = 0.5,
) -> float | None:
    """Distance where the rate difference changes sign, to +-tol_km.

    A coarse scan locates the first strict sign change inside the bracket
    (both rates can be identically zero at an endpoint, e.g. past every
    cutoff distance), then bisection narrows it.  Returns None when the
    difference never changes sign, including a protocol against itself.
    """
    first, second = protocol_pair
    lo, hi = bracket
    if lo >= hi or lo < 0.0:
        raise ParameterError(f"invalid bracket {bracket}")

    def diff(distance_km: float) -> float:
        return _protocol_rate(config, first, distance_km) - _protocol_rate(
            config, second, distance_km
        )

    grid = np.linspace(lo, hi, 65)
    values = [diff(distance) for distance in grid]
    for i in range(len(grid) - 1):
        if values[i] == 0.0 or (values[i] > 0.0) != (values[i + 1] > 0.0):
            break
    else:
        return None
    if values[i] == 0.0:
        # A zero grid value with a nonzero neighbour still brackets the
        # change; without one there is nothing to locate.
        if values[i + 1] == 0.0:
            return None
        return float(grid[i])
    lo, f_lo = float(grid[i]), values[i]
    hi = float(grid[i + 1])
    while hi - lo > 2.0 * tol_km:
        mid = 0.5 * (lo + hi)
        f_mid = diff(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
