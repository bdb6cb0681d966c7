"""Intensity optimization, sweeps, and crossover location."""

from __future__ import annotations

import numpy as np
import pytest

from ecs_diqkd.optimize import (
    MU_SEARCH_BOUNDS,
    SweepConfig,
    find_crossover,
    optimize_mu,
    sweep,
    sweep_distances,
)
from ecs_diqkd.params import ParameterError
from ecs_diqkd.rates import channel_efficiency, ecs_misaligned_stats, key_rate

FIG2 = dict(beta_db_per_km=0.2, eta_d=0.8, p_d=1e-7, e_d=0.0)


def _audit_rate(distance_km, mu, **kw):
    eta = channel_efficiency(distance_km, kw["beta_db_per_km"], kw["eta_d"])
    return key_rate(ecs_misaligned_stats(mu, eta, kw["p_d"], kw["e_d"]))


@pytest.mark.parametrize("distance_km", [0.0, 120.0, 300.0])
def test_optimizer_beats_audit_grid(distance_km):
    optimum = optimize_mu(distance_km, **FIG2)
    assert not optimum.flagged
    audit = np.geomspace(*MU_SEARCH_BOUNDS, 2000)
    rates = np.array([_audit_rate(distance_km, m, **FIG2) for m in audit])
    best = int(np.argmax(rates))
    assert optimum.rate_star >= rates[best] - 1e-12
    # and the located intensity sits within one audit-grid cell of the best
    spacing = audit[min(best + 1, 1999)] - audit[max(best - 1, 0)]
    assert abs(optimum.mu_star - audit[best]) <= spacing + 1e-5


def test_optimizer_flags_dead_channel():
    optimum = optimize_mu(900.0, **FIG2)
    assert optimum.flagged
    assert optimum.rate_star == 0.0
    assert optimum.mu_star == pytest.approx(0.5 * sum(MU_SEARCH_BOUNDS))


def test_optimal_intensity_below_violation_boundary():
    # A source that cannot violate the inequality even losslessly is never
    # optimal, so mu* stays below the ideal-case boundary wherever rate > 0.
    for distance_km in (0.0, 150.0, 400.0):
        optimum = optimize_mu(distance_km, **FIG2)
        assert optimum.rate_star > 0.0
        assert optimum.mu_star <= 0.4407


def test_sweep_grid_construction():
    config = SweepConfig(l_min_km=0.0, l_max_km=600.0, l_step_km=5.0)
    grid = sweep_distances(config)
    assert len(grid) == 121
    assert grid[0] == 0.0 and grid[-1] == 600.0
    single = SweepConfig(l_min_km=50.0, l_max_km=50.0, l_step_km=5.0)
    assert sweep_distances(single) == [50.0]


def test_sweep_single_point():
    rows = sweep(SweepConfig(l_min_km=50.0, l_max_km=50.0, l_step_km=5.0))
    assert len(rows) == 1
    row = rows[0]
    assert row.distance_km == 50.0
    assert row.rate_ecs > 0.0
    assert row.rate_bell > 0.0
    assert row.rate_plob > 0.0
    assert row.q_zz is not None and row.s is not None and row.e_zz is not None


def test_sweep_respects_protocol_subset():
    rows = sweep(
        SweepConfig(l_min_km=0.0, l_max_km=10.0, l_step_km=10.0, protocols=("plob",))
    )
    for row in rows:
        assert row.mu is None and row.rate_ecs is None and row.rate_bell is None
        assert row.rate_plob > 0.0


def test_sweep_fixed_intensity():
    config = SweepConfig(
        l_min_km=0.0, l_max_km=20.0, l_step_km=10.0, mu=0.2, protocols=("ecs",)
    )
    for row in sweep(config):
        assert row.mu == 0.2
        assert not row.flagged


def test_sweep_deterministic():
    config = SweepConfig(l_min_km=0.0, l_max_km=100.0, l_step_km=20.0)
    assert sweep(config) == sweep(config)


def test_sweep_parallel_matches_serial():
    config = SweepConfig(l_min_km=0.0, l_max_km=60.0, l_step_km=20.0)
    assert sweep(config, jobs=2) == sweep(config, jobs=1)


def test_sweep_flags_dead_rows_without_aborting():
    rows = sweep(SweepConfig(l_min_km=580.0, l_max_km=600.0, l_step_km=10.0))
    assert len(rows) == 3
    assert all(row.flagged for row in rows)  # far beyond the cutoff distance
    assert all(row.rate_ecs == 0.0 for row in rows)
    assert all(row.rate_bell is not None for row in rows)


def test_sweep_config_validation():
    with pytest.raises(ParameterError):
        SweepConfig(l_min_km=10.0, l_max_km=0.0)
    with pytest.raises(ParameterError):
        SweepConfig(l_step_km=0.0)
    with pytest.raises(ParameterError):
        SweepConfig(protocols=())
    with pytest.raises(ParameterError):
        SweepConfig(protocols=("ecs", "morse"))
    with pytest.raises(ParameterError):
        SweepConfig(mu=-0.1)


def test_sweep_ecs_dominates_bell_at_intercity_distances():
    rows = sweep(
        SweepConfig(l_min_km=150.0, l_max_km=400.0, l_step_km=25.0, **FIG2)
    )
    assert all(row.rate_ecs > row.rate_bell for row in rows)


def test_crossover_self_comparison_is_none():
    config = SweepConfig(**FIG2)
    assert find_crossover(("bell", "bell"), config, (50.0, 200.0)) is None


def test_crossover_none_without_sign_change():
    config = SweepConfig(**FIG2)
    # The Bell baseline dominates everywhere this close in.
    assert find_crossover(("ecs", "bell"), config, (5.0, 30.0)) is None


def test_crossover_brackets_a_real_sign_change():
    config = SweepConfig(**FIG2)
    crossing = find_crossover(("ecs", "plob"), config, (100.0, 250.0))
    assert crossing is not None

    def diff(distance):
        eta = channel_efficiency(distance, 0.2, 0.8)
        ecs = optimize_mu(distance, **FIG2).rate_star
        from ecs_diqkd.rates import plob_bound

        return ecs - plob_bound(distance, 0.2, 0.8)

    assert diff(crossing - 1.0) * diff(crossing + 1.0) < 0.0


def test_crossover_rejects_bad_bracket():
    config = SweepConfig(**FIG2)
    with pytest.raises(ParameterError):
        find_crossover(("ecs", "bell"), config, (200.0, 100.0))
