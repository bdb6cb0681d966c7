"""Closed-form heralded statistics, key rate, baseline, and capacity bound.

Every function here is a pure function of its arguments.  The heralded
statistics take the per-arm transmittance ``eta`` directly (i.e. after
:func:`channel_efficiency`), so tests can probe the detector model
independently of the fiber geometry.

Exponentials are arranged in expm1/log1p form wherever two nearly equal
terms would otherwise cancel: dark count probabilities sit seven orders of
magnitude below one, and the raw expressions lose most of their digits at
small ``mu * eta``.
"""

from __future__ import annotations

import math

from .params import DetectorStats, KeyRatePoint, ParameterError, ProtocolParams

_LN2 = math.log(2.0)
_SQRT2 = math.sqrt(2.0)


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy in bits; the limits at 0 and 1 return exactly 0."""
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"binary_entropy argument must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -(x * math.log2(x) + (1.0 - x) * math.log1p(-x) / _LN2)


def key_rate(stats: DetectorStats) -> float:
    """Secret key rate per trial from the heralded statistics.

    No CHSH violation (s <= 2) means no extractable key, and the square
    root is never evaluated there.  A negative bracket means "abort", not
    negative bits, so the result is clamped to zero.
    """
    if stats.s <= 2.0:
        return 0.0
    # s may carry the permitted 1e-9 slack above 2*sqrt(2); clamp the
    # entropy argument back into [0, 1].
    x = 0.5 * (1.0 + math.sqrt((stats.s / 2.0) ** 2 - 1.0))
    x = min(x, 1.0)
    bracket = 1.0 - binary_entropy(stats.e_zz) - binary_entropy(x)
    return max(0.0, stats.q_zz * bracket)


def channel_efficiency(distance_km: float, beta_db_per_km: float, eta_d: float) -> float:
    """Per-arm transmittance: detector efficiency times half-distance fiber loss.

    The central station sits midway between the users, so each optical pulse
    travels ``distance_km / 2``.
    """
    if distance_km < 0.0 or beta_db_per_km < 0.0 or not 0.0 < eta_d <= 1.0:
        raise ParameterError("invalid channel parameters")
    return eta_d * 10.0 ** (-beta_db_per_km * (distance_km / 2.0) / 10.0)


def ecs_ideal_stats(mu: float) -> DetectorStats:
    """Heralded statistics for lossless arms and ideal threshold detectors."""
    if not mu > 0.0:
        raise ParameterError(f"mu must be > 0, got {mu}")
    q_zz = -math.expm1(-2.0 * mu)
    s = _SQRT2 * (1.0 + math.exp(-2.0 * mu))
    return DetectorStats(q_zz=q_zz, s=s, e_zz=0.0)


def ecs_lossy_stats(mu: float, eta: float, p_d: float) -> DetectorStats:
    """Heralded statistics with arm transmittance ``eta`` and dark counts.

    Equivalent rearrangement of the raw expressions
        Q_zz = (1-p_d) [1 - (1-2 p_d) e^(-2 mu eta)]
        S    = 2 sqrt(2) {sinh(2 mu) - cosh[2 mu (1-eta)]
               + (1-p_d) e^(-2 mu (1-eta))} / [e^(2 mu) - (1-2 p_d) e^(2 mu (1-eta))]
        e_zz = p_d e^(2 mu (1-eta)) / [e^(2 mu) - (1-2 p_d) e^(2 mu (1-eta))]
    using sinh A - sinh B = 2 cosh((A+B)/2) sinh((A-B)/2) and expm1 so that
    nothing cancels at small mu*eta.
    """
    if not mu > 0.0:
        raise ParameterError(f"mu must be > 0, got {mu}")
    if not 0.0 < eta <= 1.0:
        raise ParameterError(f"eta must be in (0, 1], got {eta}")
    if not 0.0 <= p_d < 1.0:
        raise ParameterError(f"p_d must be in [0, 1), got {p_d}")

    bracket = math.expm1(2.0 * mu * eta) + 2.0 * p_d  # e^(2 mu eta) - 1 + 2 p_d
    if bracket <= 0.0:
        raise ParameterError("degenerate denominator in lossy statistics")
    q_zz = (1.0 - p_d) * math.exp(-2.0 * mu * eta) * bracket
    # numerator of S over 2 sqrt(2), times e^(2 mu (1-eta)):
    num = (
        2.0 * math.cosh(mu * (2.0 - eta)) * math.sinh(mu * eta)
        - p_d * math.exp(-2.0 * mu * (1.0 - eta))
    )
    s = 2.0 * _SQRT2 * num / (math.exp(2.0 * mu * (1.0 - eta)) * bracket)
    e_zz = p_d / bracket
    return DetectorStats(q_zz=q_zz, s=s, e_zz=e_zz)


def ecs_misaligned_stats(mu: float, eta: float, p_d: float, e_d: float) -> DetectorStats:
    """Heralded statistics with loss, dark counts, and misalignment ``e_d``.

    Equivalent rearrangement of the raw expressions
        Q_zz = (1-p_d) [e^(-2 mu eta e_d) + e^(2 mu (-eta + eta e_d))
               - 2 (1-p_d) e^(-2 mu eta)]
        S    = sqrt(2) w / [e^(2 mu (1-eta e_d)) + e^(2 mu (1-eta+eta e_d))
               - 2 (1-p_d) e^(2 mu (1-eta))]
        w    = 2 sinh[2 mu (1-eta e_d)] - 2 cosh[2 mu (1-eta+eta e_d)]
               + 2 (1-p_d) e^(-2 mu (1-eta))
        e_zz = [e^(2 mu (1-eta+eta e_d)) - (1-p_d) e^(2 mu (1-eta))] / [same denom]
    in cancellation-free form.  The e_zz numerator uses eta throughout: the
    e_d -> 0 limit then reduces exactly to :func:`ecs_lossy_stats`, and the
    Fock-space oracle confirms this reading (see the verify command).
    """
    if not mu > 0.0:
        raise ParameterError(f"mu must be > 0, got {mu}")
    if not 0.0 < eta <= 1.0:
        raise ParameterError(f"eta must be in (0, 1], got {eta}")
    if not 0.0 <= p_d < 1.0:
        raise ParameterError(f"p_d must be in [0, 1), got {p_d}")
    if not 0.0 <= e_d <= 0.5:
        raise ParameterError(f"e_d must be in [0, 0.5], got {e_d}")

    x_dim = 2.0 * mu * eta * e_d            # intensity routed to the dim port
    x_bright = 2.0 * mu * eta * (1.0 - e_d)  # intensity routed to the bright port
    bracket = math.expm1(x_dim) + math.expm1(x_bright) + 2.0 * p_d
    if bracket <= 0.0:
        raise ParameterError("degenerate denominator in misaligned statistics")
    q_zz = (1.0 - p_d) * math.exp(-2.0 * mu * eta) * bracket
    w = (
        4.0 * math.cosh(mu * (2.0 - eta)) * math.sinh(mu * eta * (1.0 - 2.0 * e_d))
        - 2.0 * math.exp(-2.0 * mu * (1.0 - eta)) * (math.expm1(-x_dim) + p_d)
    )
    s = _SQRT2 * w / (math.exp(2.0 * mu * (1.0 - eta)) * bracket)
    e_zz = (math.expm1(x_dim) + p_d) / bracket
    return DetectorStats(q_zz=q_zz, s=s, e_zz=e_zz)


def bell_state_stats(eta: float, p_d: float) -> DetectorStats:
    """Heralded statistics of the two-photon Bell-state-measurement baseline."""
    if not 0.0 < eta <= 1.0:
        raise ParameterError(f"eta must be in (0, 1], got {eta}")
    if not 0.0 <= p_d < 1.0:
        raise ParameterError(f"p_d must be in [0, 1), got {p_d}")

    q_zz = (1.0 - p_d) ** 2 * (
        eta**2 / 2.0 + (4.0 * eta - 3.0 * eta**2) * p_d + 4.0 * (1.0 - eta) ** 2 * p_d**2
    )
    denom = (
        8.0 * eta * (1.0 - 2.0 * p_d) * p_d
        + 8.0 * p_d**2
        + eta**2 * (1.0 - 6.0 * p_d + 8.0 * p_d**2)
    )
    if denom == 0.0:
        raise ParameterError("degenerate denominator in Bell-state statistics")
    s = 2.0 * _SQRT2 * eta**2 * (1.0 - p_d) / denom
    e_zz = 0.5 * (1.0 - eta**2 * (1.0 - 2.0 * p_d) / denom)
    return DetectorStats(q_zz=q_zz, s=s, e_zz=e_zz)


def plob_bound(distance_km: float, beta_db_per_km: float, eta_d: float) -> float:
    """Repeaterless secret-key capacity -log2(1 - eta_AB) of the full path.

    Unlike :func:`channel_efficiency` there is no midpoint halving: the bound
    applies to the end-to-end transmittance between the two users.
    """
    if distance_km < 0.0 or beta_db_per_km < 0.0 or not 0.0 < eta_d <= 1.0:
        raise ParameterError("invalid channel parameters")
    eta_ab = eta_d * 10.0 ** (-beta_db_per_km * distance_km / 10.0)
    if eta_ab >= 1.0:
        raise ParameterError("capacity bound diverges at unit transmittance")
    return -math.log1p(-eta_ab) / _LN2


def ecs_point(params: ProtocolParams) -> KeyRatePoint:
    """Evaluate the full pipeline at one parameter record."""
    eta = channel_efficiency(params.distance_km, params.beta_db_per_km, params.eta_d)
    stats = ecs_misaligned_stats(params.mu, eta, params.p_d, params.e_d)
    return KeyRatePoint(rate=key_rate(stats), stats=stats, params=params)
