"""The self-consistency suite behind ``bellscope verify``."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .chsh import TSIRELSON, bound_ordering_report
from .models import (
    CheckReport,
    CorrelationModel,
    GeneralizedPrModel,
    LhvModel,
    PrBox,
    QuantumModel,
    conservation_deviation,
    generalized_pr_chsh,
    generic_chsh,
    no_signaling_check,
    nprf_marginal_check,
    pr_eigenbasis_contradiction,
)
from .quantum import (
    REALIZATIONS,
    SU2_INVARIANT_AXES,
    BellLabel,
    BellState,
    Parity,
    hilbert_distribution,
    solve_conservation_state,
    su2_invariance_deviation,
)
from .settings import ChshSettings, pr_assignment

SU2_PROBE_THETAS = tuple(0.05 + 0.1 * k for k in range(32))


def random_settings(rng: np.random.Generator) -> ChshSettings:
    return ChshSettings.from_angles(*rng.uniform(0.0, 2.0 * math.pi, 4))


def reference_models(rng: np.random.Generator, n_lhv: int = 1000) -> list[tuple[str, CorrelationModel]]:
    models: list[tuple[str, CorrelationModel]] = []
    for label in BellLabel:
        for realization in REALIZATIONS:
            state = BellState.of(label, realization)
            models.append((f"quantum {state}", QuantumModel(state)))
    models.append(("pr", PrBox()))
    for c in np.linspace(0.0, 0.5, 11):
        for cell in ("first", "fourth"):
            models.append((f"generalized-pr c={c:.2f} {cell}", GeneralizedPrModel(float(c), replaced_cell=cell)))
    models.extend((f"lhv #{i}", LhvModel.random(rng)) for i in range(n_lhv))
    return models


def _merge(name: str, reports: Iterable[tuple[str, CheckReport]], tol: float) -> CheckReport:
    worst = 0.0
    failures = []
    for label, rep in reports:
        worst = max(worst, rep.max_violation)
        if not rep.passed:
            failures.append({"model": label, "max_violation": rep.max_violation})
    return CheckReport(name, not failures, worst, tol, failures)


def check_no_signaling(models, rng, tol: float) -> CheckReport:
    return _merge("no-signaling", ((label, no_signaling_check(m, random_settings(rng), tol)) for label, m in models), tol)


def check_nprf(models, rng, tol: float, n_lhv: int = 1000) -> CheckReport:
    """1/2 marginals for everything but unconstrained LHV mixtures, which are replaced by flip-symmetric ones."""
    picked = [(label, m) for label, m in models if not isinstance(m, LhvModel) or label.startswith("extra")]
    picked += [(f"lhv-symmetric #{i}", LhvModel.random(rng, flip_symmetric=True)) for i in range(n_lhv)]
    return _merge("nprf-marginals", ((label, nprf_marginal_check(m, random_settings(rng), tol)) for label, m in picked), tol)


def check_solver(tol: float, points: int = 721) -> CheckReport:
    worst = 0.0
    for parity in Parity:
        for theta in np.linspace(0.0, 2.0 * math.pi, points):
            got = solve_conservation_state(float(theta), parity).as_tuple()
            want = hilbert_distribution(parity, float(theta)).as_tuple()
            worst = max(worst, max(abs(g - w) for g, w in zip(got, want)))
    return CheckReport("solver-equivalence", worst <= tol, worst, tol)


def check_bounds(tol: float, grid_points: int = 16, refine_iters: int = 50) -> CheckReport:
    b = bound_ordering_report(grid_points, refine_iters)
    dev = max(abs(b.classical - 2.0), abs(b.quantum - TSIRELSON), abs(b.pr - 4.0))
    ok = b.classical == 2.0 and b.pr == 4.0 and abs(b.quantum - TSIRELSON) <= tol
    return CheckReport("bound-ordering", ok, dev, tol, [b.to_dict()])


def check_su2(tol: float) -> CheckReport:
    rows = []
    ok = True
    worst = 0.0
    for label in BellLabel:
        for axis in "xyz":
            invariant = axis in SU2_INVARIANT_AXES[label]
            largest = max(su2_invariance_deviation(label, axis, t) for t in SU2_PROBE_THETAS)
            passed = largest <= tol if invariant else largest > 1e-3
            if invariant:
                worst = max(worst, largest)
            ok &= passed
            rows.append({"state": label.value, "axis": axis, "invariant": invariant, "max_deviation": largest, "passed": passed})
    return CheckReport("su2-invariance", ok, worst, tol, rows)


def check_pr_spectrum(tol: float, points: int = 101) -> CheckReport:
    worst = 0.0
    devs = []
    for c in np.linspace(0.0, 0.5, points):
        for cell in ("first", "fourth"):
            m = GeneralizedPrModel(float(c), replaced_cell=cell)
            worst = max(worst, abs(generalized_pr_chsh(m) - generic_chsh(m, ChshSettings.discrete())))
        devs.append(conservation_deviation(GeneralizedPrModel(float(c)), BellState.of("PsiMinus"), pr_assignment(BellState.of("PsiMinus"))))
    monotone = all(y > x for x, y in zip(devs, devs[1:]))
    return CheckReport("pr-spectrum", worst <= tol and monotone, worst, tol, [{"deviation_strictly_increasing": monotone}])


def check_eigenbasis() -> CheckReport:
    rows = [pr_eigenbasis_contradiction(BellState.of(label)) for label in (BellLabel.PSI_MINUS, BellLabel.PHI_PLUS)]
    ok = all(r["contradiction"] for r in rows)
    worst = max(r["max_quantum_probability_first_cell"] for r in rows)
    return CheckReport("pr-eigenbasis-contradiction", ok, worst, 0.0, rows)


def run_verification(
    extra_models: Iterable[CorrelationModel] = (),
    tol: float = 1e-12,
    optimizer_tol: float = 1e-6,
    seed: int = 0,
    grid_points: int = 16,
    refine_iters: int = 50,
) -> list[CheckReport]:
    rng = np.random.default_rng(seed)
    models = reference_models(rng) + [(f"extra #{i}", m) for i, m in enumerate(extra_models)]
    return [
        check_no_signaling(models, rng, tol),
        check_nprf(models, rng, tol),
        check_solver(tol),
        check_bounds(optimizer_tol, grid_points, refine_iters),
        check_su2(tol),
        check_pr_spectrum(tol),
        check_eigenbasis(),
    ]
