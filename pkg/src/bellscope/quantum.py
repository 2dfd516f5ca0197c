"""Exact joint statistics for the four Bell basis states.

Angles are radians.  Measurement settings are real-space orientations
(Stern-Gerlach magnets or polarizers); a state's ``angle_factor`` maps the
relative real-space angle onto the angle between Hilbert-space bases
(1/2 for spin-1/2 particles, 1 for photons).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

ANALYTIC_TOL = 1e-12

REALIZATIONS = {"spin-half": 0.5, "photon": 1.0}

_SQRT2 = math.sqrt(2.0)


class Parity(enum.Enum):
    UNLIKE = "unlike"
    LIKE = "like"


class BellLabel(enum.Enum):
    PSI_MINUS = "PsiMinus"
    PSI_PLUS = "PsiPlus"
    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"

    @property
    def parity(self) -> Parity:
        return Parity.UNLIKE if self is BellLabel.PSI_MINUS else Parity.LIKE


@dataclass(frozen=True)
class BellState:
    """A Bell basis state together with its physical realization.

    When ``realization`` is omitted the unlike state defaults to spin-1/2
    (the singlet) and the like states default to photons (the Mermin
    photon state is ``PhiPlus``).
    """

    label: BellLabel
    angle_factor: float

    def __post_init__(self) -> None:
        if self.angle_factor not in REALIZATIONS.values():
            raise ValueError(f"angle_factor must be one of {sorted(REALIZATIONS.values())}")

    @classmethod
    def of(cls, label: BellLabel | str, realization: str | None = None) -> "BellState":
        label = BellLabel(label)
        if realization is None:
            realization = "spin-half" if label.parity is Parity.UNLIKE else "photon"
        try:
            factor = REALIZATIONS[realization]
        except KeyError:
            raise ValueError(f"unknown realization {realization!r}") from None
        return cls(label, factor)

    @property
    def parity(self) -> Parity:
        return self.label.parity

    @property
    def realization(self) -> str:
        return next(k for k, v in REALIZATIONS.items() if v == self.angle_factor)

    def hilbert_angle(self, relative_angle):
        return self.angle_factor * relative_angle

    def __str__(self) -> str:
        return f"{self.label.value}[{self.realization}]"


SINGLET = BellState.of(BellLabel.PSI_MINUS, "spin-half")
MERMIN_PHOTON = BellState.of(BellLabel.PHI_PLUS, "photon")


@dataclass(frozen=True)
class JointDistribution:
    """Probabilities of the outcome pairs (+,+), (+,-), (-,+), (-,-)."""

    pPP: float
    pPM: float
    pMP: float
    pMM: float

    def __post_init__(self) -> None:
        cells = self.as_tuple()
        if not all(math.isfinite(p) for p in cells):
            raise ValueError(f"non-finite probability in {cells}")
        if min(cells) < -ANALYTIC_TOL or max(cells) > 1.0 + ANALYTIC_TOL:
            raise ValueError(f"probabilities outside [0, 1]: {cells}")
        if abs(sum(cells) - 1.0) > ANALYTIC_TOL:
            raise ValueError(f"probabilities sum to {sum(cells)!r}, not 1")

    @classmethod
    def from_sequence(cls, cells) -> "JointDistribution":
        pPP, pPM, pMP, pMM = (float(p) for p in cells)
        return cls(pPP, pPM, pMP, pMM)

    @classmethod
    def uniform(cls) -> "JointDistribution":
        return cls(0.25, 0.25, 0.25, 0.25)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.pPP, self.pPM, self.pMP, self.pMM)

    def prob(self, alice: int, bob: int) -> float:
        return self.as_tuple()[_cell_index(alice, bob)]

    def alice_marginal(self, outcome: int = 1) -> float:
        return self.pPP + self.pPM if outcome == 1 else self.pMP + self.pMM

    def bob_marginal(self, outcome: int = 1) -> float:
        return self.pPP + self.pMP if outcome == 1 else self.pPM + self.pMM

    def conditional_mean(self, given: str, outcome: int) -> float:
        """Mean of one party's outcome given the other party's ``outcome``.

        ``given`` names the party being conditioned on ("alice" or "bob").
        Returns nan when the conditioning event has probability zero.
        """
        if given == "alice":
            weight = self.alice_marginal(outcome)
            signed = self.prob(outcome, 1) - self.prob(outcome, -1)
        elif given == "bob":
            weight = self.bob_marginal(outcome)
            signed = self.prob(1, outcome) - self.prob(-1, outcome)
        else:
            raise ValueError(f"given must be 'alice' or 'bob', not {given!r}")
        if weight == 0.0:
            return math.nan
        return signed / weight


def _cell_index(alice: int, bob: int) -> int:
    if alice not in (1, -1) or bob not in (1, -1):
        raise ValueError("outcomes must be +1 or -1")
    return (0 if alice == 1 else 2) + (0 if bob == 1 else 1)


@dataclass(frozen=True)
class AmplitudeSet:
    aUU: complex
    aUD: complex
    aDU: complex
    aDD: complex

    def probabilities(self) -> JointDistribution:
        return JointDistribution(abs(self.aUU) ** 2, abs(self.aUD) ** 2, abs(self.aDU) ** 2, abs(self.aDD) ** 2)


def singlet_amplitudes(alpha: float, beta: float) -> AmplitudeSet:
    ea = complex(math.cos(alpha), math.sin(alpha))
    eb = complex(math.cos(beta), math.sin(beta))
    ud = (ea + eb) / (2.0 * _SQRT2)
    uu = (ea - eb) / (2.0 * _SQRT2)
    return AmplitudeSet(aUU=uu, aUD=ud, aDU=-ud, aDD=-uu)


def hilbert_distribution(parity: Parity, theta: float) -> JointDistribution:
    """Closed-form joint distribution at Hilbert-space angle ``theta``.

    The conserved outcome type (unlike for the unlike state, like for the
    like states) carries probability cos^2, split evenly; the other type
    carries sin^2.
    """
    conserved = 0.5 * math.cos(theta) ** 2
    broken = 0.5 * math.sin(theta) ** 2
    if parity is Parity.UNLIKE:
        return JointDistribution(broken, conserved, conserved, broken)
    return JointDistribution(conserved, broken, broken, conserved)


def joint_distribution(state: BellState, alpha: float, beta: float) -> JointDistribution:
    return hilbert_distribution(state.parity, state.hilbert_angle(alpha - beta))


def correlation(dist: JointDistribution) -> float:
    return dist.pPP - dist.pPM - dist.pMP + dist.pMM


def conservation_target(parity: Parity, theta):
    """Bob's required average given Alice's +1, at Hilbert angle ``theta``.

    Works elementwise on arrays.
    """
    like = np.cos(theta) ** 2 - np.sin(theta) ** 2
    return -like if parity is Parity.UNLIKE else like


def conditional_average(state: BellState, theta: float, alice_outcome: int) -> float:
    """Average of Bob's outcome over the trials where Alice got ``alice_outcome``.

    ``theta`` is the relative real-space angle between the two settings;
    for the singlet this gives -cos(theta) for Alice's +1 results, for the
    Mermin photon state cos^2(theta) - sin^2(theta).
    """
    if alice_outcome not in (1, -1):
        raise ValueError("alice_outcome must be +1 or -1")
    return float(alice_outcome * conservation_target(state.parity, state.hilbert_angle(theta)))


def solve_conservation_state(theta: float, parity: Parity) -> JointDistribution:
    """Recover the joint distribution from conservation plus NPRF.

    Four linear conditions on (pPP, pPM, pMP, pMM) at Hilbert angle
    ``theta``: normalization, Bob's conditional average for each of
    Alice's outcomes, and pPM = pMP.
    """
    target = float(conservation_target(parity, theta))
    system = np.array(
        [
            [1.0, 1.0, 1.0, 1.0],
            [1.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, -1.0],
            [0.0, 1.0, -1.0, 0.0],
        ]
    )
    rhs = np.array([1.0, 0.5 * target, -0.5 * target, 0.0])
    det = np.linalg.det(system)
    assert abs(det) > 1e-9, "conservation system is singular"
    solution = np.linalg.solve(system, rhs)
    # -0.0 and 1e-17 negatives from elimination are rounding, not physics
    solution = np.where(np.abs(solution) < 1e-15, 0.0, solution)
    return JointDistribution.from_sequence(solution)


_BELL_VECTORS = {
    BellLabel.PSI_MINUS: (0.0, 1.0, -1.0, 0.0),
    BellLabel.PSI_PLUS: (0.0, 1.0, 1.0, 0.0),
    BellLabel.PHI_PLUS: (1.0, 0.0, 0.0, 1.0),
    BellLabel.PHI_MINUS: (1.0, 0.0, 0.0, -1.0),
}

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# state/axis pairs under which e^{i theta sigma} (x) e^{i theta sigma} leaves the state unchanged up to phase
SU2_INVARIANT_AXES = {
    BellLabel.PSI_MINUS: ("x", "y", "z"),
    BellLabel.PSI_PLUS: ("z",),
    BellLabel.PHI_MINUS: ("x",),
    BellLabel.PHI_PLUS: ("y",),
}


def bell_state_vector(state: BellState | BellLabel) -> np.ndarray:
    """Components in the sigma_z product basis |++>, |+->, |-+>, |-->."""
    label = state.label if isinstance(state, BellState) else BellLabel(state)
    return np.array(_BELL_VECTORS[label], dtype=complex) / _SQRT2


def local_rotation(axis: str, theta: float) -> np.ndarray:
    sigma = PAULI[axis]
    return math.cos(theta) * np.eye(2, dtype=complex) + 1j * math.sin(theta) * sigma


def su2_invariance_deviation(state: BellState | BellLabel, axis: str, theta: float) -> float:
    """1 - |<psi|U (x) U|psi>| for U = exp(i theta sigma_axis)."""
    if axis not in PAULI:
        raise ValueError(f"axis must be x, y or z, not {axis!r}")
    psi = bell_state_vector(state)
    u = local_rotation(axis, theta)
    overlap = np.vdot(psi, np.kron(u, u) @ psi)
    return float(1.0 - abs(overlap))
