"""Seeded Monte Carlo ensembles and the partition-by-outcome analysis.

Randomness comes from counter-based Philox streams: the stream for a
scheduled setting pair is keyed by ``(seed, pair_index)`` and trial ``i``
consumes the ``i``-th 64-bit word of that stream.  Any block of trials can
therefore be generated independently, and the ensemble does not depend on
how many threads produced it.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Sequence

import numpy as np

from .models import CorrelationModel, ModelError, model_distribution, model_from_descriptor
from .quantum import BellState, conditional_average
from .settings import CHSH_SIGNS, ChshSettings, Party, SettingLabel, Slot

BLOCK = 1 << 16  # trials per generation block; multiple of 4 so Philox blocks start on a counter boundary
CSV_COLUMNS = ("index", "alice_setting", "bob_setting", "alice_outcome", "bob_outcome")
_CELL_ALICE = np.array([1, 1, -1, -1], dtype=np.int8)
_CELL_BOB = np.array([1, -1, 1, -1], dtype=np.int8)
_MASK64 = (1 << 64) - 1

SettingPair = tuple[SettingLabel, SettingLabel]


def thread_count() -> int:
    raw = os.environ.get("BELLSCOPE_THREADS")
    if raw:
        return max(1, int(raw))
    return min(8, os.cpu_count() or 1)


@dataclass(frozen=True)
class TrialRecord:
    index: int
    alice_setting: SettingLabel
    bob_setting: SettingLabel
    alice_outcome: int
    bob_outcome: int


@dataclass
class Ensemble:
    """Trials stored column-wise; ``trials`` materializes records on demand."""

    seed: int
    schedule: list[SettingPair]
    pair_index: np.ndarray
    alice: np.ndarray
    bob: np.ndarray
    model_descriptor: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.pair_index.size)

    @property
    def trials(self) -> Iterator[TrialRecord]:
        for i, (p, x, y) in enumerate(zip(self.pair_index.tolist(), self.alice.tolist(), self.bob.tolist())):
            a, b = self.schedule[p]
            yield TrialRecord(i, a, b, x, y)

    def select(self, pair: SettingPair | int) -> np.ndarray:
        """Boolean mask of the trials taken at ``pair`` (a schedule index or a setting pair)."""
        if isinstance(pair, int):
            indices = [pair]
        else:
            indices = [i for i, p in enumerate(self.schedule) if p == tuple(pair)]
        mask = np.isin(self.pair_index, indices)
        if not mask.any():
            raise ValueError(f"no trials at setting pair {pair}")
        return mask

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ensemble):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.schedule == other.schedule
            and self.model_descriptor == other.model_descriptor
            and np.array_equal(self.pair_index, other.pair_index)
            and np.array_equal(self.alice, other.alice)
            and np.array_equal(self.bob, other.bob)
        )

    def to_csv(self, path: str | Path) -> None:
        names = [(str(a), str(b)) for a, b in self.schedule]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            chunk = []
            for i, (p, x, y) in enumerate(zip(self.pair_index.tolist(), self.alice.tolist(), self.bob.tolist())):
                a, b = names[p]
                chunk.append(f"{i},{a},{b},{x},{y}\n")
                if len(chunk) >= 100_000:
                    fh.write("".join(chunk))
                    chunk.clear()
            fh.write("".join(chunk))

    @classmethod
    def from_csv(cls, path: str | Path, seed: int, model_descriptor: dict[str, Any] | None = None) -> "Ensemble":
        schedule: list[SettingPair] = []
        lookup: dict[tuple[str, str], int] = {}
        pair_index, alice, bob = [], [], []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
                raise ValueError(f"expected CSV columns {CSV_COLUMNS}, got {reader.fieldnames}")
            for row in reader:
                key = (row["alice_setting"], row["bob_setting"])
                if key not in lookup:
                    lookup[key] = len(schedule)
                    schedule.append((SettingLabel.parse(key[0]), SettingLabel.parse(key[1])))
                pair_index.append(lookup[key])
                alice.append(int(row["alice_outcome"]))
                bob.append(int(row["bob_outcome"]))
        return cls(
            seed,
            schedule,
            np.array(pair_index, dtype=np.int64),
            _outcomes(alice),
            _outcomes(bob),
            dict(model_descriptor or {}),
        )

    def to_json_dict(self) -> dict[str, Any]:
        names = [(str(a), str(b)) for a, b in self.schedule]
        rows = [
            [i, *names[p], x, y]
            for i, (p, x, y) in enumerate(zip(self.pair_index.tolist(), self.alice.tolist(), self.bob.tolist()))
        ]
        return {
            "seed": self.seed,
            "model": self.model_descriptor,
            "schedule": [list(n) for n in names],
            "columns": list(CSV_COLUMNS),
            "rows": rows,
        }

    def to_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json_dict(), fh, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str | Path) -> "Ensemble":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        schedule = [(SettingLabel.parse(a), SettingLabel.parse(b)) for a, b in data["schedule"]]
        lookup = {tuple(n): i for i, n in enumerate(data["schedule"])}
        rows = data["rows"]
        return cls(
            int(data["seed"]),
            schedule,
            np.array([lookup[(r[1], r[2])] for r in rows], dtype=np.int64),
            _outcomes([r[3] for r in rows]),
            _outcomes([r[4] for r in rows]),
            dict(data.get("model") or {}),
        )


def _outcomes(values: Sequence[int]) -> np.ndarray:
    arr = np.array(values, dtype=np.int8)
    if arr.size and not np.isin(arr, (1, -1)).all():
        raise ValueError("outcomes must be +1 or -1")
    return arr


def _cdf(probabilities: Sequence[float]) -> np.ndarray:
    """Cumulative cut points for inverse-CDF sampling over the four cells.

    Everything from the last nonzero cell onward is pinned to 1 so a cell
    with zero probability can never be drawn through rounding.
    """
    p = np.asarray(probabilities, dtype=float)
    cdf = np.cumsum(p)[:3]
    last = int(np.flatnonzero(p > 0.0)[-1])
    cdf[last:] = 1.0
    return cdf


def uniform_block(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Uniform doubles in [0, 1) for trials ``start .. start+count`` of one stream."""
    if start % 4:
        raise ValueError("block start must be a multiple of 4")
    gen = np.random.Philox(key=np.array([seed & _MASK64, stream], dtype=np.uint64))
    gen.advance(start // 4)
    raw = gen.random_raw(count)
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def simulate_ensemble(
    model: CorrelationModel,
    schedule: Sequence[SettingPair],
    n_per_pair: int,
    seed: int,
    threads: int | None = None,
) -> Ensemble:
    if n_per_pair < 1:
        raise ValueError("n_per_pair must be at least 1")
    if seed < 0 or seed > _MASK64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    schedule = [tuple(p) for p in schedule]
    cdfs = []
    for a, b in schedule:
        if a.party is not Party.ALICE or b.party is not Party.BOB:
            raise ModelError(f"schedule entry ({a}, {b}) is not an (Alice, Bob) pair")
        cdfs.append(_cdf(model_distribution(model, a, b).as_tuple()))

    total = n_per_pair * len(schedule)
    cells = np.empty(total, dtype=np.int8)
    jobs = [(p, start) for p in range(len(schedule)) for start in range(0, n_per_pair, BLOCK)]

    def run(job: tuple[int, int]) -> None:
        p, start = job
        count = min(BLOCK, n_per_pair - start)
        u = uniform_block(seed, p, start, count)
        offset = p * n_per_pair + start
        cells[offset : offset + count] = np.searchsorted(cdfs[p], u, side="right")

    workers = threads if threads is not None else thread_count()
    if workers <= 1 or len(jobs) == 1:
        for job in jobs:
            run(job)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, jobs))

    return Ensemble(
        seed=seed,
        schedule=list(schedule),
        pair_index=np.repeat(np.arange(len(schedule), dtype=np.int64), n_per_pair),
        alice=_CELL_ALICE[cells],
        bob=_CELL_BOB[cells],
        model_descriptor=model.descriptor(),
    )


def simulate_from_descriptor(descriptor: dict[str, Any], schedule, n_per_pair: int, seed: int, threads=None) -> Ensemble:
    return simulate_ensemble(model_from_descriptor(descriptor), schedule, n_per_pair, seed, threads)


@dataclass(frozen=True)
class Estimate:
    estimate: float
    stderr: float
    n: int

    def __iter__(self):
        return iter((self.estimate, self.stderr))


def _mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = float(values.mean(dtype=np.float64))
    if n < 2:
        return mean, math.nan
    return mean, float(values.std(ddof=1, dtype=np.float64) / math.sqrt(n))


def estimate_correlation(ens: Ensemble, pair: SettingPair | int) -> Estimate:
    mask = ens.select(pair)
    products = ens.alice[mask].astype(np.int64) * ens.bob[mask]
    mean, err = _mean_and_stderr(products)
    return Estimate(mean, err, int(products.size))


def ensemble_chsh(ens: Ensemble, settings: ChshSettings) -> Estimate:
    """CHSH from per-pair sample correlations; stderr adds the four in quadrature."""
    value = 0.0
    var = 0.0
    n = 0
    for sign, pair in zip(CHSH_SIGNS, settings.pairs()):
        est = estimate_correlation(ens, pair)
        value += sign * est.estimate
        var += est.stderr**2
        n += est.n
    return Estimate(value, math.sqrt(var), n)


@dataclass(frozen=True)
class PartitionReport:
    by_party: Party
    pair: tuple[str, str]
    avg_given_plus: float
    avg_given_minus: float
    count_plus: int
    count_minus: int
    expected_plus: float | None
    expected_minus: float | None
    stderr_plus: float
    stderr_minus: float

    @property
    def counts(self) -> tuple[int, int]:
        return (self.count_plus, self.count_minus)

    @property
    def empty_cells(self) -> list[str]:
        return [k for k, c in (("plus", self.count_plus), ("minus", self.count_minus)) if c == 0]

    @property
    def correlation(self) -> float:
        n = self.count_plus + self.count_minus
        plus = self.avg_given_plus * self.count_plus if self.count_plus else 0.0
        minus = self.avg_given_minus * self.count_minus if self.count_minus else 0.0
        return (plus - minus) / n

    def deviations(self) -> tuple[float, float]:
        """|observed - expected| for each side; nan where a side is empty or has no target."""
        out = []
        for got, want in ((self.avg_given_plus, self.expected_plus), (self.avg_given_minus, self.expected_minus)):
            out.append(math.nan if want is None or math.isnan(got) else abs(got - want))
        return out[0], out[1]

    def to_dict(self) -> dict[str, Any]:
        return {
            "by_party": self.by_party.value,
            "pair": list(self.pair),
            "avg_given_plus": self.avg_given_plus,
            "avg_given_minus": self.avg_given_minus,
            "counts": list(self.counts),
            "expected_plus": self.expected_plus,
            "expected_minus": self.expected_minus,
            "stderr_plus": self.stderr_plus,
            "stderr_minus": self.stderr_minus,
            "empty_cells": self.empty_cells,
        }


def partition_analysis(
    ens: Ensemble, pair: SettingPair | int, by_party: Party | str = Party.ALICE, state: BellState | None = None
) -> PartitionReport:
    """Split the trials at ``pair`` by one party's outcome and average the other party.

    With a ``state`` and angle-carrying settings, the conservation targets
    are reported alongside; swapping ``by_party`` leaves them unchanged
    because the targets depend on the relative angle only through cos.
    """
    by_party = Party(by_party)
    mask = ens.select(pair)
    if isinstance(pair, int):
        pair = ens.schedule[pair]
    a, b = pair
    split, other = (ens.alice, ens.bob) if by_party is Party.ALICE else (ens.bob, ens.alice)
    split = split[mask]
    other = other[mask]
    stats = {}
    for outcome in (1, -1):
        chosen = other[split == outcome]
        if chosen.size:
            stats[outcome] = (*_mean_and_stderr(chosen), int(chosen.size))
        else:
            stats[outcome] = (math.nan, math.nan, 0)
    expected_plus = expected_minus = None
    if state is not None and a.angle is not None and b.angle is not None:
        theta = a.angle - b.angle if by_party is Party.ALICE else b.angle - a.angle
        expected_plus = conditional_average(state, theta, 1)
        expected_minus = conditional_average(state, theta, -1)
    return PartitionReport(
        by_party=by_party,
        pair=(str(a), str(b)),
        avg_given_plus=stats[1][0],
        avg_given_minus=stats[-1][0],
        count_plus=stats[1][2],
        count_minus=stats[-1][2],
        expected_plus=expected_plus,
        expected_minus=expected_minus,
        stderr_plus=stats[1][1],
        stderr_minus=stats[-1][1],
    )


def count_violating_trials(ens: Ensemble, state: BellState) -> int:
    """Trials at equal settings whose outcomes break exact conservation."""
    like = state.parity.value == "like"
    violations = 0
    for p, (a, b) in enumerate(ens.schedule):
        if a.angle is None or b.angle is None or a.angle != b.angle:
            continue
        mask = ens.pair_index == p
        same = ens.alice[mask] == ens.bob[mask]
        violations += int(np.count_nonzero(~same if like else same))
    return violations


@dataclass
class ConservationScan:
    partitions: list[PartitionReport]
    max_deviation: float
    worst_pair: tuple[str, str]
    z_threshold: float
    consistent: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_deviation": self.max_deviation,
            "worst_pair": list(self.worst_pair),
            "z_threshold": self.z_threshold,
            "consistent": self.consistent,
            "partitions": [p.to_dict() for p in self.partitions],
        }


def conservation_violation_scan(
    model: CorrelationModel,
    state: BellState,
    settings: ChshSettings,
    n: int,
    seed: int,
    z_threshold: float = 3.0,
    threads: int | None = None,
) -> ConservationScan:
    """Simulate the four CHSH pairs and compare Bob's conditional averages with conservation.

    ``consistent`` is true when every deviation is within ``z_threshold``
    standard errors (a zero-stderr side must match exactly).
    """
    if not settings.has_angles:
        raise ModelError("conservation scan needs settings with angles")
    ens = simulate_ensemble(model, settings.pairs(), n, seed, threads)
    return scan_ensemble(ens, state, settings, z_threshold)


def scan_ensemble(ens: Ensemble, state: BellState, settings: ChshSettings, z_threshold: float = 3.0) -> ConservationScan:
    reports = [partition_analysis(ens, pair, Party.ALICE, state) for pair in settings.pairs()]
    worst = -1.0
    worst_pair = reports[0].pair
    consistent = True
    for rep in reports:
        for dev, err in zip(rep.deviations(), (rep.stderr_plus, rep.stderr_minus)):
            if math.isnan(dev):
                continue
            if dev > worst:
                worst, worst_pair = dev, rep.pair
            err = 0.0 if math.isnan(err) else err
            if dev > z_threshold * err and not (err == 0.0 and dev == 0.0):
                consistent = False
    return ConservationScan(reports, max(worst, 0.0), worst_pair, z_threshold, consistent)


def figure4_fixture() -> Ensemble:
    """A hand-entered 16-trial singlet ensemble at relative angle pi/3.

    Our own worked example, not a transcription: Alice's eight +1 trials
    pair with six Bob -1 and two Bob +1 (average -1/2), her eight -1 trials
    with six Bob +1 and two Bob -1 (average +1/2), so the sample
    correlation is -1/2 = -cos(pi/3).
    """
    a = SettingLabel(Party.ALICE, Slot.UNPRIMED, math.pi / 3)
    b = SettingLabel(Party.BOB, Slot.UNPRIMED, 0.0)
    alice = [1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, -1, 1, 1, -1, -1]
    bob = [-1, 1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, -1, -1, 1]
    return Ensemble(
        seed=0,
        schedule=[(a, b)],
        pair_index=np.zeros(16, dtype=np.int64),
        alice=_outcomes(alice),
        bob=_outcomes(bob),
        model_descriptor={"kind": "fixture", "name": "figure-4-style"},
    )
