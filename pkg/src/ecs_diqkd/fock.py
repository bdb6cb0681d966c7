"""Truncated Fock-space optical states and linear-optics operations.

The verifier in :mod:`ecs_diqkd.oracle` is built entirely out of the four
operations here: coherent-state construction, a two-mode beamsplitter, a
single-mode phase rotation, and a threshold-detector readout.  Nothing in
this file knows about cat states or the closed forms.

Conventions:
    * A state over k modes is a complex array with one axis per mode, each
      axis of length ``n_max + 1``.
    * ``beamsplitter_apply`` with transmittance T implements the mode map
      with matrix [[t, r], [r, -t]], t = sqrt(T), r = sqrt(1 - T); at
      T = 1/2 this is the symmetric splitter sending coherent amplitudes
      (x, y) to ((x + y)/sqrt(2), (x - y)/sqrt(2)).
    * Loss with transmittance eta is the same unitary coupling a signal
      mode to a fresh vacuum environment mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import stats as scipy_stats
from scipy.special import comb

from .params import ParameterError

# Certified bound on the photon-number tail mass lost to truncation.
TAIL_MASS_BOUND = 1e-12
# Allowed norm drift across one unitary application; more signals that the
# state pushed real amplitude past the per-mode cutoff.
NORM_DRIFT_TOL = 1e-10


class CutoffError(ParameterError):
    """The Fock cutoff is too small for the state being represented."""


def poisson_tail(intensity: float, n_max: int) -> float:
    """P(n > n_max) for a coherent state of the given intensity |alpha|^2."""
    return float(scipy_stats.poisson.sf(n_max, intensity))


@dataclass
class TruncatedOpticalState:
    """Complex amplitudes over joint photon numbers of ``num_modes`` modes."""

    amplitudes: np.ndarray
    n_max: int

    @property
    def num_modes(self) -> int:
        return self.amplitudes.ndim

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def number_distribution(self) -> np.ndarray:
        """Joint photon-number probabilities, same shape as the amplitudes."""
        return np.abs(self.amplitudes) ** 2

    def mode_mean_photon(self, mode: int) -> float:
        probs = self.number_distribution()
        axes = tuple(i for i in range(probs.ndim) if i != mode)
        marginal = probs.sum(axis=axes)
        return float(np.dot(np.arange(self.n_max + 1), marginal))


def vacuum_state(n_max: int, num_modes: int = 1) -> TruncatedOpticalState:
    amps = np.zeros((n_max + 1,) * num_modes, dtype=complex)
    amps[(0,) * num_modes] = 1.0
    return TruncatedOpticalState(amps, n_max)


def mode_product(a: TruncatedOpticalState, b: TruncatedOpticalState) -> TruncatedOpticalState:
    """Tensor product; the modes of ``b`` follow those of ``a``."""
    if a.n_max != b.n_max:
        raise ParameterError("cannot combine states with different cutoffs")
    amps = np.tensordot(a.amplitudes, b.amplitudes, axes=0)
    return TruncatedOpticalState(amps, a.n_max)


def coherent_fock(alpha: complex, n_max: int) -> TruncatedOpticalState:
    """Single-mode coherent state: coefficients e^(-|a|^2/2) a^n / sqrt(n!).

    Raises CutoffError unless the Poisson tail beyond ``n_max`` is below
    ``TAIL_MASS_BOUND``.
    """
    intensity = abs(alpha) ** 2
    tail = poisson_tail(intensity, n_max)
    if tail >= TAIL_MASS_BOUND:
        raise CutoffError(
            f"n_max={n_max} leaves tail mass {tail:.3e} for intensity {intensity:.4f}"
        )
    amps = np.zeros(n_max + 1, dtype=complex)
    amps[0] = math.exp(-intensity / 2.0)
    for n in range(1, n_max + 1):
        amps[n] = amps[n - 1] * alpha / math.sqrt(n)
    return TruncatedOpticalState(amps, n_max)


@lru_cache(maxsize=64)
def _beamsplitter_blocks(
    n_max: int, transmittance: float
) -> tuple[tuple[np.ndarray, np.ndarray, np.ndarray], ...]:
    """Per-total-photon-number blocks of the two-mode beamsplitter unitary.

    Block N maps inputs |n, N-n> to outputs |k, N-k>.  The matrix element is
    read off from (t a1+ + r a2+)^n (r a1+ - t a2+)^m |0,0>: the inner sum
    over creation-operator orderings is the coefficient convolution of the
    two binomial expansions.  Blocks with N > n_max are cropped to the
    indices both modes can hold; the norm-drift check in
    :func:`beamsplitter_apply` certifies that no real amplitude lived there.
    """
    t = math.sqrt(transmittance)
    r = math.sqrt(1.0 - transmittance)
    lgamma = math.lgamma
    blocks: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
    for total in range(2 * n_max + 1):
        lo, hi = max(0, total - n_max), min(n_max, total)
        idx = np.arange(lo, hi + 1)
        size = len(idx)
        block = np.empty((size, size))
        out_lg = np.array([lgamma(k + 1) + lgamma(total - k + 1) for k in idx])
        for col, n in enumerate(idx):
            m = total - n
            i = np.arange(n + 1)
            from_first = comb(n, i) * t**i * r ** (n - i)
            j = np.arange(m + 1)
            from_second = comb(m, j) * r**j * (-t) ** (m - j)
            coeffs = np.convolve(from_first, from_second)  # index k = 0..total
            in_lg = lgamma(n + 1) + lgamma(m + 1)
            block[:, col] = coeffs[idx] * np.exp(0.5 * (out_lg - in_lg))
        blocks.append((idx, total - idx, block))
    return tuple(blocks)


def beamsplitter_apply(
    state: TruncatedOpticalState, mode_i: int, mode_j: int, transmittance: float
) -> TruncatedOpticalState:
    """Apply the two-mode beamsplitter unitary in Fock space.

    Transmittance 1/2 gives the symmetric splitter with outputs
    c = (a + b)/sqrt(2) and d = (a - b)/sqrt(2); other values model loss by
    coupling a signal mode to a vacuum environment mode.
    """
    k = state.num_modes
    if not (0 <= mode_i < k and 0 <= mode_j < k) or mode_i == mode_j:
        raise ParameterError(f"invalid mode pair ({mode_i}, {mode_j}) for {k} modes")
    if not 0.0 <= transmittance <= 1.0:
        raise ParameterError(f"transmittance must be in [0, 1], got {transmittance}")

    dim = state.n_max + 1
    work = np.moveaxis(state.amplitudes, (mode_i, mode_j), (0, 1))
    trailing = work.shape[2:]
    work = work.reshape(dim, dim, -1)
    out = np.zeros_like(work)
    for idx, co_idx, block in _beamsplitter_blocks(state.n_max, transmittance):
        out[idx, co_idx] = block @ work[idx, co_idx]
    out = np.moveaxis(out.reshape(dim, dim, *trailing), (0, 1), (mode_i, mode_j))

    before = state.norm()
    result = TruncatedOpticalState(out, state.n_max)
    if abs(result.norm() - before) > NORM_DRIFT_TOL * max(1.0, before):
        raise CutoffError(
            "beamsplitter pushed amplitude past the per-mode cutoff "
            f"(norm {before:.12f} -> {result.norm():.12f})"
        )
    return result


def misalignment_rotate(
    state: TruncatedOpticalState, mode: int, delta0: float
) -> TruncatedOpticalState:
    """Phase rotation e^(i n delta0) of one mode; exactly norm-preserving."""
    if not 0 <= mode < state.num_modes:
        raise ParameterError(f"mode {mode} out of range")
    if delta0 == 0.0:
        return TruncatedOpticalState(state.amplitudes.copy(), state.n_max)
    phases = np.exp(1j * delta0 * np.arange(state.n_max + 1))
    shape = [1] * state.num_modes
    shape[mode] = state.n_max + 1
    return TruncatedOpticalState(state.amplitudes * phases.reshape(shape), state.n_max)


class HeraldProbabilities(NamedTuple):
    """Probabilities of the four threshold-detector outcomes of one trial."""

    d1_only: float
    d2_only: float
    none: float
    both: float

    def success(self) -> float:
        return self.d1_only + self.d2_only

    def total(self) -> float:
        return self.d1_only + self.d2_only + self.none + self.both


def threshold_detect(
    state: TruncatedOpticalState, detector_modes: tuple[int, int], p_d: float
) -> HeraldProbabilities:
    """Threshold-detector readout with independent dark counts.

    With V1 = P(n_i = 0), V2 = P(n_j = 0) and V12 = P(both zero) taken from
    the joint photon-number distribution (all other modes summed out):

        P(D1 only) = (1-p_d) V2 - (1-p_d)^2 V12
        P(D2 only) = (1-p_d) V1 - (1-p_d)^2 V12
        P(none)    = (1-p_d)^2 V12
        P(both)    = remainder
    """
    mode_i, mode_j = detector_modes
    k = state.num_modes
    if not (0 <= mode_i < k and 0 <= mode_j < k) or mode_i == mode_j:
        raise ParameterError(f"invalid detector modes {detector_modes} for {k} modes")
    if not 0.0 <= p_d < 1.0:
        raise ParameterError(f"p_d must be in [0, 1), got {p_d}")
    probs = state.number_distribution()
    other_axes = tuple(a for a in range(probs.ndim) if a not in (mode_i, mode_j))
    joint = probs.sum(axis=other_axes) if other_axes else probs
    if mode_j < mode_i:
        joint = joint.T
    total = float(joint.sum())
    v1 = float(joint[0, :].sum())
    v2 = float(joint[:, 0].sum())
    v12 = float(joint[0, 0])
    no_click = (1.0 - p_d) ** 2 * v12
    d1 = (1.0 - p_d) * v2 - no_click
    d2 = (1.0 - p_d) * v1 - no_click
    both = total - (1.0 - p_d) * v1 - (1.0 - p_d) * v2 + no_click
    return HeraldProbabilities(d1_only=d1, d2_only=d2, none=no_click, both=both)
