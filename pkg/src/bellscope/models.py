"""Two-party correlation models and the consistency checks run on them.

Every model maps a pair of setting labels (Alice's, Bob's) to a
:class:`~bellscope.quantum.JointDistribution`.  Quantum models read the
setting angles; local hidden variable mixtures and PR-type boxes only look
at the slot (primed or unprimed).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .quantum import (
    ANALYTIC_TOL,
    BellLabel,
    BellState,
    JointDistribution,
    Parity,
    conditional_average,
    correlation,
    hilbert_distribution,
    joint_distribution,
)
from .settings import CHSH_SIGNS, ChshSettings, Party, SettingLabel, Slot


class ModelError(ValueError):
    """A model was asked for something it cannot answer."""


SLOTS = (Slot.UNPRIMED, Slot.PRIMED)


class CorrelationModel:
    kind: str = "abstract"
    angle_parameterized = False

    def distribution(self, a: SettingLabel, b: SettingLabel) -> JointDistribution:
        raise NotImplementedError

    def descriptor(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class QuantumModel(CorrelationModel):
    state: BellState
    kind = "quantum"
    angle_parameterized = True

    def distribution(self, a: SettingLabel, b: SettingLabel) -> JointDistribution:
        if a.angle is None or b.angle is None:
            raise ModelError(f"quantum model needs setting angles, got {a} and {b}")
        return joint_distribution(self.state, a.angle, b.angle)

    def correlation_at(self, alpha, beta):
        """Correlation function, elementwise over arrays of angles."""
        sign = -1.0 if self.state.parity is Parity.UNLIKE else 1.0
        return sign * np.cos(2.0 * self.state.angle_factor * (np.asarray(alpha) - np.asarray(beta)))

    def descriptor(self) -> dict[str, Any]:
        return {"kind": self.kind, "state": self.state.label.value, "realization": self.state.realization}


@dataclass(frozen=True)
class DeterministicStrategy:
    """Fixed outcomes for each of a party's two settings (an instruction set)."""

    alice: tuple[int, int]
    bob: tuple[int, int]

    def outcome(self, label: SettingLabel) -> int:
        table = self.alice if label.party is Party.ALICE else self.bob
        return table[SLOTS.index(label.slot)]


# lexicographic over (alice unprimed, alice primed, bob unprimed, bob primed), +1 before -1
STRATEGIES = tuple(
    DeterministicStrategy((au, ap), (bu, bp)) for au, ap, bu, bp in itertools.product((1, -1), repeat=4)
)


@dataclass(frozen=True)
class LhvModel(CorrelationModel):
    weights: tuple[float, ...]
    kind = "lhv"

    def __post_init__(self) -> None:
        w = tuple(float(x) for x in self.weights)
        if len(w) != len(STRATEGIES):
            raise ValueError(f"need {len(STRATEGIES)} strategy weights, got {len(w)}")
        if min(w) < 0.0 or abs(sum(w) - 1.0) > ANALYTIC_TOL:
            raise ValueError("strategy weights must be a probability vector")
        object.__setattr__(self, "weights", w)

    @classmethod
    def deterministic(cls, index: int) -> "LhvModel":
        weights = [0.0] * len(STRATEGIES)
        weights[index] = 1.0
        return cls(tuple(weights))

    @classmethod
    def random(cls, rng: np.random.Generator, flip_symmetric: bool = False) -> "LhvModel":
        """Dirichlet-random mixture.

        ``flip_symmetric`` gives every strategy the same weight as its
        all-outcomes-negated partner, which makes every marginal exactly 1/2.
        """
        w = rng.dirichlet(np.ones(len(STRATEGIES)))
        if flip_symmetric:
            # negating all four outcomes maps index i to 15 - i in STRATEGIES order
            w = 0.5 * (w + w[::-1])
        return cls(tuple(w / w.sum()))

    def distribution(self, a: SettingLabel, b: SettingLabel) -> JointDistribution:
        cells = [0.0, 0.0, 0.0, 0.0]
        for weight, strategy in zip(self.weights, STRATEGIES):
            x, y = strategy.outcome(a), strategy.outcome(b)
            cells[(0 if x == 1 else 2) + (0 if y == 1 else 1)] += weight
        return JointDistribution.from_sequence(cells)

    def descriptor(self) -> dict[str, Any]:
        return {"kind": self.kind, "weights": list(self.weights)}


def _cell_key(a: SettingLabel, b: SettingLabel) -> str:
    a_name = "a'" if a.slot is Slot.PRIMED else "a"
    b_name = "b'" if b.slot is Slot.PRIMED else "b"
    return f"{a_name},{b_name}"


CELL_KEYS = ("a,b", "a,b'", "a',b", "a',b'")


@dataclass(frozen=True)
class TableModel(CorrelationModel):
    """A behavior given cell by cell, keyed ``"a,b"``, ``"a,b'"``, ``"a',b"``, ``"a',b'"``."""

    cells: dict[str, JointDistribution] = field(hash=False)
    kind = "table"

    def __post_init__(self) -> None:
        if set(self.cells) != set(CELL_KEYS):
            raise ValueError(f"table model needs exactly the cells {CELL_KEYS}")

    def distribution(self, a: SettingLabel, b: SettingLabel) -> JointDistribution:
        if a.party is not Party.ALICE or b.party is not Party.BOB:
            raise ModelError(f"expected (Alice, Bob) settings, got ({a}, {b})")
        return self.cells[_cell_key(a, b)]

    def descriptor(self) -> dict[str, Any]:
        return {"kind": self.kind, "cells": {k: list(self.cells[k].as_tuple()) for k in CELL_KEYS}}


_CORRELATED = JointDistribution(0.5, 0.0, 0.0, 0.5)
_ANTICORRELATED = JointDistribution(0.0, 0.5, 0.5, 0.0)


class PrBox(TableModel):
    kind = "pr"

    def __init__(self) -> None:
        super().__init__(
            {"a,b": _CORRELATED, "a,b'": _CORRELATED, "a',b": _CORRELATED, "a',b'": _ANTICORRELATED}
        )

    def descriptor(self) -> dict[str, Any]:
        return {"kind": self.kind}

    def __repr__(self) -> str:
        return "PrBox()"


REPLACED_CELLS = {"first": "a,b", "fourth": "a',b'"}


class GeneralizedPrModel(TableModel):
    """PR box with one cell replaced by (C, D, E, F) = (c, c, e, e).

    ``c`` is the weight on each correlated outcome, ``e`` on each
    anti-correlated one; no-signaling against the untouched cells forces
    the symmetric form and normalization gives 2c + 2e = 1.
    """

    kind = "generalized-pr"

    def __init__(self, c: float, e: float | None = None, replaced_cell: str = "first") -> None:
        if e is None:
            e = 0.5 - c
        if c < 0.0 or e < 0.0 or abs(2.0 * c + 2.0 * e - 1.0) > ANALYTIC_TOL:
            raise ValueError(f"need c, e >= 0 with 2c + 2e = 1, got c={c!r}, e={e!r}")
        if replaced_cell not in REPLACED_CELLS:
            raise ValueError(f"replaced_cell must be one of {sorted(REPLACED_CELLS)}")
        cells = dict(PrBox().cells)
        cells[REPLACED_CELLS[replaced_cell]] = JointDistribution(c, e, e, c)
        super().__init__(cells)
        object.__setattr__(self, "c", float(c))
        object.__setattr__(self, "e", float(e))
        object.__setattr__(self, "replaced_cell", replaced_cell)

    def descriptor(self) -> dict[str, Any]:
        return {"kind": self.kind, "c": self.c, "e": self.e, "replaced_cell": self.replaced_cell}

    def __repr__(self) -> str:
        return f"GeneralizedPrModel(c={self.c!r}, e={self.e!r}, replaced_cell={self.replaced_cell!r})"


def model_from_descriptor(desc: dict[str, Any]) -> CorrelationModel:
    kind = desc.get("kind")
    if kind == "quantum":
        return QuantumModel(BellState.of(desc["state"], desc.get("realization")))
    if kind == "lhv":
        return LhvModel(tuple(desc["weights"]))
    if kind == "pr":
        return PrBox()
    if kind == "generalized-pr":
        return GeneralizedPrModel(desc["c"], desc.get("e"), desc.get("replaced_cell", "first"))
    if kind == "table":
        return TableModel({k: JointDistribution.from_sequence(v) for k, v in desc["cells"].items()})
    raise ValueError(f"unknown model kind {kind!r}")


def model_distribution(model: CorrelationModel, a: SettingLabel, b: SettingLabel) -> JointDistribution:
    if a.party is not Party.ALICE or b.party is not Party.BOB:
        raise ModelError(f"expected (Alice, Bob) settings, got ({a}, {b})")
    return model.distribution(a, b)


def generic_chsh(model: CorrelationModel, settings: ChshSettings) -> float:
    return sum(
        sign * correlation(model_distribution(model, a, b)) for sign, (a, b) in zip(CHSH_SIGNS, settings.pairs())
    )


@dataclass
class CheckReport:
    name: str
    passed: bool
    max_violation: float
    tol: float
    details: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "max_violation": self.max_violation,
            "tol": self.tol,
            "details": self.details,
        }


def no_signaling_check(model: CorrelationModel, settings: ChshSettings, tol: float = ANALYTIC_TOL) -> CheckReport:
    """Each party's marginals must not depend on the other party's setting."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    s = settings
    lines = [
        ("A", s.a, (s.b, s.b_prime)),
        ("A", s.a_prime, (s.b, s.b_prime)),
        ("B", s.b, (s.a, s.a_prime)),
        ("B", s.b_prime, (s.a, s.a_prime)),
    ]
    details = []
    worst = 0.0
    for party, fixed, (other1, other2) in lines:
        for outcome in (1, -1):
            if party == "A":
                m1 = model_distribution(model, fixed, other1).alice_marginal(outcome)
                m2 = model_distribution(model, fixed, other2).alice_marginal(outcome)
            else:
                m1 = model_distribution(model, other1, fixed).bob_marginal(outcome)
                m2 = model_distribution(model, other2, fixed).bob_marginal(outcome)
            gap = abs(m1 - m2)
            worst = max(worst, gap)
            details.append(
                {"party": party, "setting": fixed.name, "outcome": outcome, "varies_with": [other1.name, other2.name], "violation": gap}
            )
    return CheckReport("no-signaling", worst <= tol, worst, tol, details)


def nprf_marginal_check(model: CorrelationModel, settings: ChshSettings, tol: float = ANALYTIC_TOL) -> CheckReport:
    """Every single-party marginal must be exactly 1/2 at every setting pair."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    details = []
    worst = 0.0
    for a, b in settings.pairs():
        dist = model_distribution(model, a, b)
        for party, marginal in (("A", dist.alice_marginal(1)), ("B", dist.bob_marginal(1))):
            gap = abs(marginal - 0.5)
            worst = max(worst, gap)
            details.append({"pair": [a.name, b.name], "party": party, "marginal_plus": marginal, "violation": gap})
    return CheckReport("nprf-marginals", worst <= tol, worst, tol, details)


def conservation_profile(model: CorrelationModel, state: BellState, settings: ChshSettings) -> list[dict[str, Any]]:
    """Per setting pair: model's conditional averages of Bob vs. what conservation requires.

    The relative angle for each pair is read from ``settings``; a discrete
    model ignores the angles but is compared against the state at them.
    """
    if not settings.has_angles:
        raise ModelError("conservation comparison needs settings with angles")
    rows = []
    for a, b in settings.pairs():
        dist = model_distribution(model, a, b)
        theta = a.angle - b.angle
        row: dict[str, Any] = {"pair": [a.name, b.name], "theta": theta}
        deviation = 0.0
        for outcome, key in ((1, "plus"), (-1, "minus")):
            got = dist.conditional_mean("alice", outcome)
            want = conditional_average(state, theta, outcome)
            row[f"model_{key}"] = got
            row[f"target_{key}"] = want
            if not math.isnan(got):
                deviation = max(deviation, abs(got - want))
        row["deviation"] = deviation
        rows.append(row)
    return rows


def conservation_deviation(model: CorrelationModel, state: BellState, settings: ChshSettings) -> float:
    return max(row["deviation"] for row in conservation_profile(model, state, settings))


def generalized_pr_chsh(model: GeneralizedPrModel) -> float:
    if model.replaced_cell == "first":
        return 3.0 + 2.0 * model.c - 2.0 * model.e
    return 3.0 - 2.0 * model.c + 2.0 * model.e


# outcome type each PR cell demands, indexed like ChshSettings.pairs()
_PR_CELL_CORRELATED = (True, True, True, False)


def pr_eigenbasis_contradiction(label: BellLabel | BellState, grid: int = 16) -> dict[str, Any]:
    """Search Hilbert-space angles where quantum statistics reproduce PR cells 2-4 exactly.

    Alice's primed basis is pinned at 0 (rotational invariance); a, b, b'
    run over ``grid`` equally spaced angles in [0, pi).  For every
    configuration meeting the last three PR cells with certainty, report
    the quantum probability of the outcome type the first PR cell demands.
    """
    parity = label.parity
    thetas = [math.pi * k / grid for k in range(grid)]

    def p_type(theta: float, correlated: bool) -> float:
        d = hilbert_distribution(parity, theta)
        return d.pPP + d.pMM if correlated else d.pPM + d.pMP

    solutions = []
    a_prime = 0.0
    for a, b, b_prime in itertools.product(thetas, repeat=3):
        diffs = (a - b, a - b_prime, a_prime - b, a_prime - b_prime)
        if all(abs(p_type(d, want) - 1.0) <= ANALYTIC_TOL for d, want in zip(diffs[1:], _PR_CELL_CORRELATED[1:])):
            solutions.append({"a": a, "a_prime": a_prime, "b": b, "b_prime": b_prime, "p_first_cell": p_type(diffs[0], True)})
    worst = max((s["p_first_cell"] for s in solutions), default=math.nan)
    return {
        "parity": parity.value,
        "solutions": len(solutions),
        "max_quantum_probability_first_cell": worst,
        "pr_probability_first_cell": 1.0,
        "contradiction": bool(solutions) and worst <= ANALYTIC_TOL,
        "examples": solutions[:4],
    }
