"""Measurement setting labels and the four-setting CHSH configuration."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .quantum import BellState, Parity


class Party(enum.Enum):
    ALICE = "alice"
    BOB = "bob"


class Slot(enum.Enum):
    UNPRIMED = "unprimed"
    PRIMED = "primed"


@dataclass(frozen=True)
class SettingLabel:
    party: Party
    slot: Slot
    angle: float | None = None

    def __post_init__(self) -> None:
        if self.angle is not None and not math.isfinite(self.angle):
            raise ValueError(f"setting angle must be finite, got {self.angle!r}")

    @property
    def name(self) -> str:
        base = "a" if self.party is Party.ALICE else "b"
        return base + ("'" if self.slot is Slot.PRIMED else "")

    def __str__(self) -> str:
        if self.angle is None:
            return self.name
        return f"{self.name}={self.angle:.17g}"

    @classmethod
    def parse(cls, text: str) -> "SettingLabel":
        """Inverse of ``str``: ``"a"``, ``"b'"``, ``"a'=0.785..."``."""
        name, _, angle = text.strip().partition("=")
        party = {"a": Party.ALICE, "b": Party.BOB}.get(name.rstrip("'"))
        if party is None or name.count("'") > 1:
            raise ValueError(f"bad setting label {text!r}")
        slot = Slot.PRIMED if name.endswith("'") else Slot.UNPRIMED
        return cls(party, slot, float(angle) if angle else None)


def alice(slot: Slot = Slot.UNPRIMED, angle: float | None = None) -> SettingLabel:
    return SettingLabel(Party.ALICE, slot, angle)


def bob(slot: Slot = Slot.UNPRIMED, angle: float | None = None) -> SettingLabel:
    return SettingLabel(Party.BOB, slot, angle)


CHSH_SIGNS = (1, 1, 1, -1)


@dataclass(frozen=True)
class ChshSettings:
    a: SettingLabel
    a_prime: SettingLabel
    b: SettingLabel
    b_prime: SettingLabel

    def __post_init__(self) -> None:
        expected = (
            (self.a, Party.ALICE, Slot.UNPRIMED),
            (self.a_prime, Party.ALICE, Slot.PRIMED),
            (self.b, Party.BOB, Slot.UNPRIMED),
            (self.b_prime, Party.BOB, Slot.PRIMED),
        )
        for label, party, slot in expected:
            if label.party is not party or label.slot is not slot:
                raise ValueError(f"setting {label} is in the wrong CHSH slot")

    @classmethod
    def from_angles(cls, a: float, a_prime: float, b: float, b_prime: float) -> "ChshSettings":
        return cls(
            alice(Slot.UNPRIMED, float(a)),
            alice(Slot.PRIMED, float(a_prime)),
            bob(Slot.UNPRIMED, float(b)),
            bob(Slot.PRIMED, float(b_prime)),
        )

    @classmethod
    def discrete(cls) -> "ChshSettings":
        return cls(alice(Slot.UNPRIMED), alice(Slot.PRIMED), bob(Slot.UNPRIMED), bob(Slot.PRIMED))

    @property
    def has_angles(self) -> bool:
        return all(s.angle is not None for s in self.labels())

    def labels(self) -> tuple[SettingLabel, SettingLabel, SettingLabel, SettingLabel]:
        return (self.a, self.a_prime, self.b, self.b_prime)

    def pairs(self) -> list[tuple[SettingLabel, SettingLabel]]:
        """Setting pairs in CHSH order: (a,b), (a,b'), (a',b), (a',b')."""
        return [(self.a, self.b), (self.a, self.b_prime), (self.a_prime, self.b), (self.a_prime, self.b_prime)]

    def angles(self) -> tuple[float, float, float, float]:
        if not self.has_angles:
            raise ValueError("settings carry no angles")
        return tuple(s.angle for s in self.labels())  # type: ignore[return-value]

    def shifted(self, offset: float) -> "ChshSettings":
        a, ap, b, bp = self.angles()
        return ChshSettings.from_angles(a + offset, ap + offset, b + offset, bp + offset)


# settings at which the singlet reaches -2*sqrt(2) and the Mermin photon state +2*sqrt(2)
SINGLET_OPTIMAL = ChshSettings.from_angles(math.pi / 4, -math.pi / 4, 0.0, math.pi / 2)
PHOTON_OPTIMAL = ChshSettings.from_angles(math.pi / 8, -math.pi / 8, 0.0, math.pi / 4)


def pr_assignment(state: BellState) -> ChshSettings:
    """Angles at which three PR cells agree with conservation for ``state``.

    Unlike state: a' = b', b = b' + flip, a = a' + flip, where a flip turns
    anti-correlation into correlation (pi for spin-1/2).  Both parties
    flipping puts (a, b) back at zero relative angle, where the PR box
    demands the opposite of what conservation does.

    Like states: a = b, b' = b + flip, a' = a + flip with the flip keeping
    outcomes alike (pi for photons); the contradiction sits at (a', b').
    """
    if state.parity is Parity.UNLIKE:
        flip = (math.pi / 2) / state.angle_factor
        return ChshSettings.from_angles(flip, 0.0, flip, 0.0)
    flip = math.pi / state.angle_factor
    return ChshSettings.from_angles(0.0, flip, 0.0, flip)
