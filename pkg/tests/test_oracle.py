"""The Fock-space verifier against the closed forms and its own invariants."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecs_diqkd.fock import CutoffError, coherent_fock
from ecs_diqkd.oracle import (
    SETTING_ANGLES,
    CatStateDecomposition,
    MeasurementSetting,
    acceptance_grid,
    misaligned_e_zz_literal,
    oracle_stats,
    verify_grid,
)
from ecs_diqkd.params import ParameterError
from ecs_diqkd.rates import ecs_ideal_stats, ecs_lossy_stats, ecs_misaligned_stats

N_MAX = 30


def test_setting_table():
    assert SETTING_ANGLES["A0"] == SETTING_ANGLES["B1"] == 0.0
    assert SETTING_ANGLES["A1"] == math.pi / 4
    assert SETTING_ANGLES["A2"] == -math.pi / 4
    assert SETTING_ANGLES["B2"] == math.pi / 2
    assert MeasurementSetting.by_role("A1").theta == math.pi / 4
    with pytest.raises(ParameterError):
        MeasurementSetting(role="A1", theta=0.3)
    with pytest.raises(ParameterError):
        MeasurementSetting(role="C9", theta=0.0)


def test_decomposition_normalizations():
    decomp = CatStateDecomposition(mu=0.25, theta=math.pi / 4)
    overlap = math.exp(-4.0 * 0.25)
    assert decomp.n_plus == pytest.approx(2.0 * (1.0 + overlap), abs=1e-15)
    assert decomp.n_minus == pytest.approx(2.0 * (1.0 - overlap), abs=1e-15)
    assert 2.0 - 2.0 * overlap <= decomp.n_minus <= 2.0 <= decomp.n_plus <= 4.0
    assert decomp.outcome_prior(+1) + decomp.outcome_prior(-1) == pytest.approx(1.0, abs=1e-15)


def test_decomposition_z_basis_amplitudes():
    # theta = 0 projects onto the bare coherent states.
    decomp = CatStateDecomposition(mu=0.3, theta=0.0)
    assert decomp.amp_pos == pytest.approx((1.0, 0.0))
    assert decomp.amp_neg == pytest.approx((0.0, -1.0))


@settings(max_examples=60, deadline=None)
@given(
    mu=st.floats(min_value=0.01, max_value=1.0),
    theta=st.floats(min_value=-math.pi, max_value=math.pi),
)
def test_decomposition_superposition_normalization(mu, theta):
    # |c1|^2 + |c2|^2 + 2 c1 c2 <alpha|-alpha> = 1 for both outcomes
    decomp = CatStateDecomposition(mu=mu, theta=theta)
    overlap = math.exp(-2.0 * mu)
    for c1, c2 in (decomp.amp_pos, decomp.amp_neg):
        assert c1 * c1 + c2 * c2 + 2.0 * c1 * c2 * overlap == pytest.approx(1.0, abs=1e-12)


def test_two_party_state_resolution():
    # Combining the two initial states resolves into the four Bell (x)
    # two-mode-superposition terms with weights sqrt(N+-) / (2 sqrt(2)).
    mu = 0.35
    alpha = math.sqrt(mu)
    dim = N_MAX + 1
    plus = coherent_fock(alpha, N_MAX).amplitudes.real
    minus = coherent_fock(-alpha, N_MAX).amplitudes.real

    e_up = np.array([1.0, 0.0])
    e_dn = np.array([0.0, 1.0])

    # Direct product of the two local entangled states, axes
    # (spin_a, spin_b, opt_a, opt_b).
    local_a = [(e_up, plus), (e_dn, minus)]
    direct = np.zeros((2, 2, dim, dim))
    for sa, oa in local_a:
        for sb, ob in local_a:
            direct += 0.5 * np.einsum("i,j,k,l->ijkl", sa, sb, oa, ob)

    n_plus = 2.0 * (1.0 + math.exp(-4.0 * mu))
    n_minus = 2.0 * (1.0 - math.exp(-4.0 * mu))

    def bell(sign, flip):
        a = np.einsum("i,j->ij", e_up, e_dn if flip else e_up)
        b = np.einsum("i,j->ij", e_dn, e_up if flip else e_dn)
        return (a + sign * b) / math.sqrt(2.0)

    def ecs(sign, flip, norm):
        a = np.einsum("k,l->kl", plus, minus if flip else plus)
        b = np.einsum("k,l->kl", minus, plus if flip else minus)
        return (a + sign * b) / math.sqrt(norm)

    resolved = np.zeros((2, 2, dim, dim))
    for sign, flip, norm in [(+1, False, n_plus), (-1, False, n_minus),
                             (+1, True, n_plus), (-1, True, n_minus)]:
        weight = math.sqrt(norm) / (2.0 * math.sqrt(2.0))
        resolved += weight * np.einsum("ij,kl->ijkl", bell(sign, flip), ecs(sign, flip, norm))

    assert np.max(np.abs(direct - resolved)) < 1e-12


def test_oracle_matches_ideal_case():
    ideal = ecs_ideal_stats(0.25)
    actual = oracle_stats(0.25, 1.0, 0.0, 0.0)
    assert actual.q_zz == pytest.approx(ideal.q_zz, abs=1e-8)
    assert actual.s == pytest.approx(ideal.s, abs=1e-8)
    assert actual.e_zz == pytest.approx(ideal.e_zz, abs=1e-8)


def test_oracle_vacuum_limit_of_chsh():
    # s approaches 2 sqrt(2) from below as the intensity vanishes.
    s_small = oracle_stats(0.002, 0.4, 0.0, 0.0).s
    s_smaller = oracle_stats(0.0005, 0.4, 0.0, 0.0).s
    ceiling = 2.0 * math.sqrt(2.0)
    assert s_small < s_smaller < ceiling
    assert s_smaller > ceiling - 0.01


def test_oracle_matches_lossy_closed_form():
    closed = ecs_lossy_stats(0.1, 0.08, 1e-7)
    actual = oracle_stats(0.1, 0.08, 1e-7, 0.0)
    assert actual.q_zz == pytest.approx(closed.q_zz, abs=1e-8)
    assert actual.s == pytest.approx(closed.s, abs=1e-8)
    assert actual.e_zz == pytest.approx(closed.e_zz, abs=1e-8)


def test_oracle_matches_misaligned_closed_form():
    closed = ecs_misaligned_stats(0.1, 0.08, 1e-7, 0.01)
    actual = oracle_stats(0.1, 0.08, 1e-7, 0.01)
    assert actual.q_zz == pytest.approx(closed.q_zz, abs=1e-8)
    assert actual.s == pytest.approx(closed.s, abs=1e-8)
    assert actual.e_zz == pytest.approx(closed.e_zz, abs=1e-8)


def test_oracle_full_decoherence_limit():
    assert oracle_stats(0.1, 0.08, 0.0, 0.5).e_zz == pytest.approx(0.5, abs=1e-8)


def test_oracle_truncation_insensitivity():
    coarse = oracle_stats(0.25, 0.5, 1e-5, 0.01, n_max=30)
    fine = oracle_stats(0.25, 0.5, 1e-5, 0.01, n_max=60)
    assert coarse.q_zz == pytest.approx(fine.q_zz, abs=1e-10)
    assert coarse.s == pytest.approx(fine.s, abs=1e-10)
    assert coarse.e_zz == pytest.approx(fine.e_zz, abs=1e-10)


def test_oracle_cutoff_certificate():
    with pytest.raises(CutoffError):
        oracle_stats(1.0, 0.5, 0.0, 0.0, n_max=10)


def test_oracle_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        oracle_stats(0.0, 0.5, 0.0, 0.0)
    with pytest.raises(ParameterError):
        oracle_stats(0.1, 0.0, 0.0, 0.0)
    with pytest.raises(ParameterError):
        oracle_stats(0.1, 0.5, 0.0, 0.6)


def test_acceptance_grid_shape():
    grid = acceptance_grid()
    assert len(grid) == 5 * 4 * 3 * 3
    assert (0.25, 1.0, 0.0, 0.0) in grid


def test_verify_adjudicates_e_zz_reading():
    report = verify_grid(
        points=[(0.1, 0.08, 1e-7, 0.01), (0.25, 0.5, 1e-5, 0.07)], tol=1e-8
    )
    assert report.passed
    assert report.supported_e_zz_reading == "eta"
    assert report.max_dev_e_zz < 1e-8
    # the literal eta_d reading misses by orders of magnitude more
    assert report.max_dev_e_zz_literal > 1e3 * report.max_dev_e_zz


def test_literal_reading_breaks_lossless_reduction():
    # At e_d = 0 the literal arrangement fails to reduce to the lossy error
    # rate whenever eta != eta_d, which is what disqualifies it.
    eta = 0.08
    lossy = ecs_lossy_stats(0.1, eta, 1e-7).e_zz
    literal = misaligned_e_zz_literal(0.1, eta, 0.8, 1e-7, 0.0)
    assert abs(literal - lossy) > 0.1


def test_verify_reports_cutoff_failures():
    report = verify_grid(points=[(1.0, 0.5, 0.0, 0.0)], n_max=10)
    assert not report.passed
    assert len(report.errors) == 1
