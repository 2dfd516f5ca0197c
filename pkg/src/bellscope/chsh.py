"""CHSH evaluation, optimization over settings, and the three bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.optimize import minimize_scalar

from .models import (
    STRATEGIES,
    CorrelationModel,
    LhvModel,
    ModelError,
    PrBox,
    QuantumModel,
    model_distribution,
)
from .quantum import SINGLET, correlation
from .settings import CHSH_SIGNS, ChshSettings

TSIRELSON = 2.0 * math.sqrt(2.0)
REFINE_TOL = 1e-9


@dataclass(frozen=True)
class ChshReport:
    value: float
    correlations: tuple[float, float, float, float]
    settings: ChshSettings

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "correlations": dict(zip(("E(a,b)", "E(a,b')", "E(a',b)", "E(a',b')"), self.correlations)),
            "settings": [str(s) for s in self.settings.labels()],
        }


def _combine(correlations) -> float:
    e_ab, e_abp, e_apb, e_apbp = correlations
    return e_ab + e_abp + e_apb - e_apbp


def chsh_value(model: CorrelationModel, settings: ChshSettings) -> ChshReport:
    corr = tuple(correlation(model_distribution(model, a, b)) for a, b in settings.pairs())
    return ChshReport(_combine(corr), corr, settings)


def deterministic_chsh_values() -> list[float]:
    return [chsh_value(LhvModel.deterministic(i), ChshSettings.discrete()).value for i in range(len(STRATEGIES))]


def classical_bound_bruteforce(n_mixtures: int = 1000, seed: int = 0) -> float:
    """Largest |CHSH| over all 16 instruction sets.

    Also checks that random mixtures stay inside the deterministic extremes,
    which holds because CHSH is linear in the mixture weights.
    """
    values = deterministic_chsh_values()
    bound = max(abs(v) for v in values)
    assert set(values) <= {-2.0, 2.0}, values
    rng = np.random.default_rng(seed)
    lo, hi = min(values), max(values)
    for _ in range(n_mixtures):
        model = LhvModel.random(rng)
        v = chsh_value(model, ChshSettings.discrete()).value
        assert lo - 1e-12 <= v <= hi + 1e-12, v
    return bound


def _require_angles(model: CorrelationModel) -> QuantumModel:
    if not getattr(model, "angle_parameterized", False):
        raise ModelError(f"{type(model).__name__} is not angle-parameterized; nothing to optimize")
    return model  # type: ignore[return-value]


def optimize_chsh(
    model: CorrelationModel, mode: str = "max", grid_points: int = 16, refine_iters: int = 50
) -> ChshReport:
    """Coarse grid over [0, 2pi)^4, then coordinate-descent refinement.

    Deterministic: the grid is scanned in fixed order with ties going to
    the first cell, and each coordinate line search is bounded Brent.
    """
    model = _require_angles(model)
    if mode not in ("min", "max"):
        raise ValueError("mode must be 'min' or 'max'")
    if grid_points < 8:
        raise ValueError("grid_points must be at least 8")
    if refine_iters < 0:
        raise ValueError("refine_iters must be non-negative")
    sign = 1.0 if mode == "min" else -1.0

    grid = 2.0 * np.pi * np.arange(grid_points) / grid_points
    corr = model.correlation_at(grid[:, None], grid[None, :])  # corr[alice_index, bob_index]
    best_val = math.inf
    best = (0, 0, 0, 0)
    for i in range(grid_points):
        # objective[ap, b, bp] with a fixed at grid[i]
        obj = sign * (corr[i][None, :, None] + corr[i][None, None, :] + corr[:, :, None] - corr[:, None, :])
        k = int(np.argmin(obj))
        if obj.flat[k] < best_val:
            best_val = float(obj.flat[k])
            best = (i, *np.unravel_index(k, obj.shape))
    x = np.array([grid[best[0]], grid[best[1]], grid[best[2]], grid[best[3]]])

    def objective(v) -> float:
        a, ap, b, bp = v
        c = model.correlation_at(np.array([a, a, ap, ap]), np.array([b, bp, b, bp]))
        return sign * float(c[0] + c[1] + c[2] - c[3])

    step = 2.0 * np.pi / grid_points
    current = objective(x)
    for _ in range(refine_iters):
        before = current
        for j in range(4):
            def line(t, j=j):
                y = x.copy()
                y[j] = t
                return objective(y)

            res = minimize_scalar(line, bounds=(x[j] - step, x[j] + step), method="bounded", options={"xatol": 1e-12})
            if res.fun < current:
                x[j] = res.x
                current = float(res.fun)
        if before - current < REFINE_TOL:
            break
    return chsh_value(model, ChshSettings.from_angles(*x))


@dataclass(frozen=True)
class BoundOrdering:
    classical: float
    quantum: float
    pr: float

    @property
    def ratio_quantum_classical(self) -> float:
        return self.quantum / self.classical

    def to_dict(self) -> dict[str, Any]:
        return {"classical": self.classical, "quantum": self.quantum, "pr": self.pr}


def bound_ordering_report(grid_points: int = 16, refine_iters: int = 50) -> BoundOrdering:
    classical = classical_bound_bruteforce()
    quantum = abs(optimize_chsh(QuantumModel(SINGLET), "min", grid_points, refine_iters).value)
    pr = chsh_value(PrBox(), ChshSettings.discrete()).value
    assert classical < quantum < pr, (classical, quantum, pr)
    return BoundOrdering(classical, quantum, pr)


__all__ = [
    "CHSH_SIGNS",
    "TSIRELSON",
    "BoundOrdering",
    "ChshReport",
    "ChshSettings",
    "bound_ordering_report",
    "chsh_value",
    "classical_bound_bruteforce",
    "deterministic_chsh_values",
    "optimize_chsh",
]
