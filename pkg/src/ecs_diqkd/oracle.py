"""First-principles verifier of the heralded statistics.

For every measurement setting pair and spin outcome pair, this module builds
the conditional optical state sent to the central station, evolves it through
loss, misalignment, and the symmetric beamsplitter in a truncated Fock space,
reads out threshold detectors with dark counts, applies the classical flip
rule, and aggregates the same triple the closed forms predict.  It never
calls anything in :mod:`ecs_diqkd.rates` to produce its numbers; the rates
module is imported only by the comparison report at the bottom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rates
from .fock import (
    TAIL_MASS_BOUND,
    CutoffError,
    HeraldProbabilities,
    TruncatedOpticalState,
    beamsplitter_apply,
    coherent_fock,
    misalignment_rotate,
    mode_product,
    poisson_tail,
    threshold_detect,
    vacuum_state,
)
from .params import DetectorStats, ParameterError

DEFAULT_N_MAX = 30
# Eigenvalues of an arm density matrix below this weight are numerical noise
# of the exact rank-2 mixture and are dropped.
_EIG_WEIGHT_FLOOR = 1e-14

# Spin measurement directions chi_theta = cos(theta) sigma_z + sin(theta) sigma_x.
SETTING_ANGLES: dict[str, float] = {
    "A0": 0.0,
    "A1": math.pi / 4.0,
    "A2": -math.pi / 4.0,
    "B1": 0.0,
    "B2": math.pi / 2.0,
}

# Correlator signs of the CHSH combination <A1B1> - <A1B2> + <A2B1> + <A2B2>.
CHSH_PAIRS: tuple[tuple[str, str, float], ...] = (
    ("A1", "B1", +1.0),
    ("A1", "B2", -1.0),
    ("A2", "B1", +1.0),
    ("A2", "B2", +1.0),
)


@dataclass(frozen=True)
class MeasurementSetting:
    """One of the five protocol measurement directions."""

    role: str
    theta: float

    def __post_init__(self) -> None:
        expected = SETTING_ANGLES.get(self.role)
        if expected is None:
            raise ParameterError(f"unknown setting role {self.role!r}")
        if self.theta != expected:
            raise ParameterError(
                f"angle {self.theta} does not match the protocol table for {self.role}"
            )

    @classmethod
    def by_role(cls, role: str) -> "MeasurementSetting":
        return cls(role=role, theta=SETTING_ANGLES[role])


@dataclass(frozen=True)
class CatStateDecomposition:
    """Spin-conditional resolution of one entangled atom-light cat state.

    Measuring the atom along chi_theta with outcome +/-1 projects the optical
    pulse onto a normalized superposition of |alpha> and |-alpha>; this record
    holds the two-mode normalizations N+- = 2 (1 +- e^(-4 mu)), the
    spin-conditional normalizations M+- = sqrt(1 +- sin(theta) e^(-2 mu)),
    and the conditional amplitude pairs.
    """

    mu: float
    theta: float
    n_plus: float = field(init=False)
    n_minus: float = field(init=False)
    m_plus: float = field(init=False)
    m_minus: float = field(init=False)
    amp_pos: tuple[float, float] = field(init=False)
    amp_neg: tuple[float, float] = field(init=False)

    def __post_init__(self) -> None:
        if not self.mu > 0.0:
            raise ParameterError(f"mu must be > 0, got {self.mu}")
        overlap = math.exp(-2.0 * self.mu)  # <alpha|-alpha> for real alpha
        half = self.theta / 2.0
        object.__setattr__(self, "n_plus", 2.0 * (1.0 + overlap**2))
        object.__setattr__(self, "n_minus", 2.0 * (1.0 - overlap**2))
        m_plus = math.sqrt(1.0 + math.sin(self.theta) * overlap)
        m_minus = math.sqrt(1.0 - math.sin(self.theta) * overlap)
        object.__setattr__(self, "m_plus", m_plus)
        object.__setattr__(self, "m_minus", m_minus)
        object.__setattr__(
            self, "amp_pos", (math.cos(half) / m_plus, math.sin(half) / m_plus)
        )
        object.__setattr__(
            self, "amp_neg", (math.sin(half) / m_minus, -math.cos(half) / m_minus)
        )

    def outcome_amplitudes(self, outcome: int) -> tuple[float, float]:
        """Coefficients of |alpha> and |-alpha> given the spin outcome +/-1."""
        return self.amp_pos if outcome > 0 else self.amp_neg

    def outcome_prior(self, outcome: int) -> float:
        """Probability of the spin outcome: (M+-)^2 / 2."""
        m = self.m_plus if outcome > 0 else self.m_minus
        return m * m / 2.0


def _arm_mixture(
    decomp: CatStateDecomposition,
    outcome: int,
    alpha: float,
    eta: float,
    delta0: float,
    n_max: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Reduced state of one arm at the central station, eigendecomposed.

    Builds the conditional pulse, couples it to a vacuum environment mode
    through a beamsplitter of transmittance eta, optionally applies the
    misalignment phase to the surviving mode, traces the environment out,
    and returns the (weights, column-eigenvectors) of the resulting
    single-mode density matrix.
    """
    c_plus, c_minus = decomp.outcome_amplitudes(outcome)
    pulse = coherent_fock(alpha, n_max)
    pulse_neg = coherent_fock(-alpha, n_max)
    conditional = TruncatedOpticalState(
        c_plus * pulse.amplitudes + c_minus * pulse_neg.amplitudes, n_max
    )
    arm = mode_product(conditional, vacuum_state(n_max))
    arm = beamsplitter_apply(arm, 0, 1, eta)
    if delta0 != 0.0:
        arm = misalignment_rotate(arm, 0, delta0)
    # Trace out the environment: rho = Psi Psi+ over the signal index.
    psi = arm.amplitudes
    rho = psi @ psi.conj().T
    weights, vectors = np.linalg.eigh(rho)
    keep = weights > _EIG_WEIGHT_FLOOR
    return weights[keep], vectors[:, keep]


def _mixture_heralds(
    alice: tuple[np.ndarray, np.ndarray],
    bob: tuple[np.ndarray, np.ndarray],
    p_d: float,
    n_max: int,
) -> HeraldProbabilities:
    """Herald probabilities for a product of two single-mode mixtures.

    The detector formulas are linear in the joint photon-number
    distribution, so the mixture readout is the weighted sum over pure
    eigenvector products pushed through the central beamsplitter.
    """
    w_a, v_a = alice
    w_b, v_b = bob
    totals = np.zeros(4)
    for p in range(len(w_a)):
        left = TruncatedOpticalState(np.ascontiguousarray(v_a[:, p]), n_max)
        for q in range(len(w_b)):
            right = TruncatedOpticalState(np.ascontiguousarray(v_b[:, q]), n_max)
            joint = beamsplitter_apply(mode_product(left, right), 0, 1, 0.5)
            herald = threshold_detect(joint, (0, 1), p_d)
            totals += (w_a[p] * w_b[q]) * np.asarray(herald)
    result = HeraldProbabilities(*totals)
    if abs(result.total() - 1.0) > 1e-10:
        raise CutoffError(
            f"herald probabilities sum to {result.total():.12f}; cutoff too small"
        )
    return result


def certify_cutoff(mu: float, n_max: int) -> None:
    """Require tail mass below the bound for the brightest mode involved.

    After the central beamsplitter the constructively interfering output
    carries intensity 2 mu, the largest anywhere in the pipeline.
    """
    tail = poisson_tail(2.0 * mu, n_max)
    if tail >= TAIL_MASS_BOUND:
        raise CutoffError(
            f"n_max={n_max} leaves tail mass {tail:.3e} at intensity {2.0 * mu:.4f}"
        )


def oracle_stats(
    mu: float, eta: float, p_d: float, e_d: float = 0.0, n_max: int = DEFAULT_N_MAX
) -> DetectorStats:
    """Heralded statistics computed from the full quantum model.

    Aggregation follows the protocol steps: a trial succeeds when exactly
    one detector clicks; Bob flips his outcome on a D2 herald only when his
    basis is Z; the gain and error rate come from the Z/Z setting pair and
    the CHSH value from the four test pairs, with correlators conditioned
    on success.
    """
    if not mu > 0.0:
        raise ParameterError(f"mu must be > 0, got {mu}")
    if not 0.0 < eta <= 1.0:
        raise ParameterError(f"eta must be in (0, 1], got {eta}")
    if not 0.0 <= p_d < 1.0:
        raise ParameterError(f"p_d must be in [0, 1), got {p_d}")
    if not 0.0 <= e_d <= 0.5:
        raise ParameterError(f"e_d must be in [0, 0.5], got {e_d}")
    certify_cutoff(mu, n_max)

    alpha = math.sqrt(mu)
    delta0 = math.acos(1.0 - 2.0 * e_d)

    arms: dict[tuple[str, int], tuple[np.ndarray, np.ndarray]] = {}
    priors: dict[tuple[str, int], float] = {}
    for role in SETTING_ANGLES:
        decomp = CatStateDecomposition(mu=mu, theta=SETTING_ANGLES[role])
        drift = delta0 if role.startswith("B") else 0.0
        for outcome in (+1, -1):
            arms[role, outcome] = _arm_mixture(decomp, outcome, alpha, eta, drift, n_max)
            priors[role, outcome] = decomp.outcome_prior(outcome)

    def pair_heralds(role_a: str, role_b: str):
        for a in (+1, -1):
            for b in (+1, -1):
                weight = priors[role_a, a] * priors[role_b, b]
                herald = _mixture_heralds(arms[role_a, a], arms[role_b, b], p_d, n_max)
                yield a, b, weight, herald

    # Raw key pair (A0, B1): gain and Z-basis error rate after the flip rule.
    q_zz = 0.0
    error_mass = 0.0
    for a, b, weight, herald in pair_heralds("A0", "B1"):
        q_zz += weight * herald.success()
        # D1 heralds keep b; D2 heralds flip it.  An error is a != b_final.
        error_mass += weight * (herald.d1_only if a != b else herald.d2_only)
    e_zz = error_mass / q_zz

    # CHSH pairs: the flip applies to D2 heralds only when Bob measured Z (B1).
    s = 0.0
    for role_a, role_b, sign in CHSH_PAIRS:
        flip = -1.0 if SETTING_ANGLES[role_b] == 0.0 else 1.0
        numerator = 0.0
        success = 0.0
        for a, b, weight, herald in pair_heralds(role_a, role_b):
            numerator += weight * a * b * (herald.d1_only + flip * herald.d2_only)
            success += weight * herald.success()
        s += sign * numerator / success

    return DetectorStats(q_zz=float(q_zz), s=float(s), e_zz=float(e_zz))


# --- comparison against the closed forms -----------------------------------

# Module-level alias so the comparison path (and fault-injection tests) can
# substitute the closed form without touching the rates module itself.
ecs_misaligned_stats = rates.ecs_misaligned_stats

ACCEPTANCE_MUS = (0.01, 0.05, 0.1, 0.25, 0.5)
ACCEPTANCE_ETAS = (0.05, 0.2, 0.5, 1.0)
ACCEPTANCE_PDS = (0.0, 1e-7, 1e-5)
ACCEPTANCE_EDS = (0.0, 0.01, 0.07)


def acceptance_grid() -> list[tuple[float, float, float, float]]:
    """The default verification grid of (mu, eta, p_d, e_d) tuples."""
    return [
        (mu, eta, p_d, e_d)
        for mu in ACCEPTANCE_MUS
        for eta in ACCEPTANCE_ETAS
        for p_d in ACCEPTANCE_PDS
        for e_d in ACCEPTANCE_EDS
    ]


def misaligned_e_zz_literal(
    mu: float, eta: float, eta_d: float, p_d: float, e_d: float
) -> float:
    """The rejected alternative e_zz reading, with eta_d in the numerator.

    Kept only so the verifier can adjudicate between the two readings; it
    does not reduce to the lossy formula at e_d = 0 unless eta_d == eta.
    """
    num = math.exp(2.0 * mu * (1.0 - eta_d + eta * e_d)) - (1.0 - p_d) * math.exp(
        2.0 * mu * (1.0 - eta)
    )
    den = (
        math.exp(2.0 * mu * (1.0 - eta * e_d))
        + math.exp(2.0 * mu * (1.0 - eta + eta * e_d))
        - 2.0 * (1.0 - p_d) * math.exp(2.0 * mu * (1.0 - eta))
    )
    return num / den


@dataclass(frozen=True)
class PointCheck:
    """Deviations between closed forms and oracle at one grid point."""

    mu: float
    eta: float
    p_d: float
    e_d: float
    dev_q_zz: float
    dev_s: float
    dev_e_zz: float
    dev_e_zz_literal: float
    error: str | None = None

    def max_dev(self) -> float:
        return max(self.dev_q_zz, self.dev_s, self.dev_e_zz)


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of an oracle-versus-closed-form sweep."""

    points: list[PointCheck]
    tol: float
    n_max: int
    eta_d_literal: float

    @property
    def errors(self) -> list[PointCheck]:
        return [p for p in self.points if p.error is not None]

    @property
    def max_dev_q_zz(self) -> float:
        return max((p.dev_q_zz for p in self.points if p.error is None), default=0.0)

    @property
    def max_dev_s(self) -> float:
        return max((p.dev_s for p in self.points if p.error is None), default=0.0)

    @property
    def max_dev_e_zz(self) -> float:
        return max((p.dev_e_zz for p in self.points if p.error is None), default=0.0)

    @property
    def max_dev_e_zz_literal(self) -> float:
        return max(
            (p.dev_e_zz_literal for p in self.points if p.error is None), default=0.0
        )

    @property
    def supported_e_zz_reading(self) -> str:
        return "eta" if self.max_dev_e_zz <= self.max_dev_e_zz_literal else "eta_d"

    @property
    def failures(self) -> list[PointCheck]:
        return [p for p in self.points if p.error is None and p.max_dev() >= self.tol]

    @property
    def passed(self) -> bool:
        return not self.failures and not self.errors


def verify_grid(
    points: list[tuple[float, float, float, float]] | None = None,
    tol: float = 1e-8,
    n_max: int = DEFAULT_N_MAX,
    eta_d_literal: float = 0.8,
) -> VerificationReport:
    """Compare closed forms with the oracle over a grid of parameter tuples."""
    checks: list[PointCheck] = []
    for mu, eta, p_d, e_d in points if points is not None else acceptance_grid():
        try:
            closed = ecs_misaligned_stats(mu, eta, p_d, e_d)
            actual = oracle_stats(mu, eta, p_d, e_d, n_max=n_max)
            literal = misaligned_e_zz_literal(mu, eta, eta_d_literal, p_d, e_d)
            checks.append(
                PointCheck(
                    mu=mu,
                    eta=eta,
                    p_d=p_d,
                    e_d=e_d,
                    dev_q_zz=abs(actual.q_zz - closed.q_zz),
                    dev_s=abs(actual.s - closed.s),
                    dev_e_zz=abs(actual.e_zz - closed.e_zz),
                    dev_e_zz_literal=abs(actual.e_zz - literal),
                )
            )
        except CutoffError as exc:
            checks.append(
                PointCheck(
                    mu=mu,
                    eta=eta,
                    p_d=p_d,
                    e_d=e_d,
                    dev_q_zz=math.nan,
                    dev_s=math.nan,
                    dev_e_zz=math.nan,
                    dev_e_zz_literal=math.nan,
                    error=str(exc),
                )
            )
    return VerificationReport(
        points=checks, tol=tol, n_max=n_max, eta_d_literal=eta_d_literal
    )
