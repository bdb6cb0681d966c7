"""Validated parameter records and statistics containers shared by all modules."""

from __future__ import annotations

import math
from dataclasses import dataclass

# Algebraic ceiling of the CHSH combination (Tsirelson bound), with the slack
# we grant to floating-point results produced by the closed forms or oracle.
CHSH_MAX = 2.0 * math.sqrt(2.0)
CHSH_TOL = 1e-9


class ParameterError(ValueError):
    """An input violates a documented precondition or invariant."""


@dataclass(frozen=True)
class ProtocolParams:
    """Physical inputs of one protocol evaluation.

    Attributes:
        mu: coherent-state intensity (mean photon number of each pulse), > 0.
        beta_db_per_km: fiber loss coefficient in dB/km.
        eta_d: threshold-detector efficiency, in (0, 1].
        p_d: dark count probability per detector per gate, in [0, 1).
        e_d: optical misalignment error (1 - cos(delta0)) / 2, in [0, 0.5].
        distance_km: total separation between the two users; the central
            station sits midway, so each arm sees half of it.
    """

    mu: float
    beta_db_per_km: float = 0.2
    eta_d: float = 0.8
    p_d: float = 1e-7
    e_d: float = 0.0
    distance_km: float = 0.0

    def __post_init__(self) -> None:
        if not self.mu > 0.0:
            raise ParameterError(f"mu must be > 0, got {self.mu}")
        if self.beta_db_per_km < 0.0:
            raise ParameterError(f"beta_db_per_km must be >= 0, got {self.beta_db_per_km}")
        if not 0.0 < self.eta_d <= 1.0:
            raise ParameterError(f"eta_d must be in (0, 1], got {self.eta_d}")
        if not 0.0 <= self.p_d < 1.0:
            raise ParameterError(f"p_d must be in [0, 1), got {self.p_d}")
        if not 0.0 <= self.e_d <= 0.5:
            raise ParameterError(f"e_d must be in [0, 0.5], got {self.e_d}")
        if self.distance_km < 0.0:
            raise ParameterError(f"distance_km must be >= 0, got {self.distance_km}")


@dataclass(frozen=True)
class DetectorStats:
    """Heralded statistics triple: gain, CHSH value, and Z-basis error rate.

    `s` is a signed combination of correlators; it can legitimately fall
    below zero when dark counts dominate at extreme loss, so only the
    algebraic ceiling |s| <= 2*sqrt(2) is enforced here.
    """

    q_zz: float
    s: float
    e_zz: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.q_zz <= 1.0:
            raise ParameterError(f"q_zz must be in [0, 1], got {self.q_zz}")
        if not 0.0 <= self.e_zz <= 1.0:
            raise ParameterError(f"e_zz must be in [0, 1], got {self.e_zz}")
        if abs(self.s) > CHSH_MAX + CHSH_TOL:
            raise ParameterError(f"|s| exceeds 2*sqrt(2): {self.s}")


@dataclass(frozen=True)
class KeyRatePoint:
    """Secret key rate per protocol trial together with its inputs."""

    rate: float
    stats: DetectorStats
    params: ProtocolParams

    def __post_init__(self) -> None:
        if self.rate < 0.0:
            raise ParameterError(f"rate must be clamped to >= 0, got {self.rate}")
        if self.rate > self.stats.q_zz + 1e-12:
            raise ParameterError(
                f"rate {self.rate} exceeds the heralded gain {self.stats.q_zz}"
            )
