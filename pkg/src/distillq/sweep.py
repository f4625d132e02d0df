"""Buffer-capacity sweeps, optimal buffer selection and calibration against the
reference adder measurements."""
from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from ._validation import INF, check_capacity, check_rate, format_capacity, format_rate
from .circuit import SHAPES, AdderProfile, Circuit, SlotTimeline, generate_adder, sequentialize
from .emulator import EmulatorConfig, emulate
from .exceptions import DistillqError, EmptyGrid, InvalidConfig
from .markov import QueueMetrics, analyze

SWEEP_COLUMNS = (
    "qubits", "capacity", "depth", "stalls", "pauses", "v0", "v_full",
    "mean_jobs", "utilization", "num_states", "num_transitions",
)
TABLE1_COLUMNS = (
    "qubits", "mean_size7", "mean_infinite", "states_infinite", "utilization", "transitions",
)
REFERENCE_QUBITS = (16, 32, 64, 128, 256, 512, 1024, 1536, 2048)


@dataclass(frozen=True)
class ReferenceRow:
    mean_jobs_size7: float
    mean_jobs_infinite: float
    states_infinite: int
    utilization: float
    transitions: int


# measured adder results, infinite buffer and a buffer of size 7
REFERENCE_TABLE: Mapping[int, ReferenceRow] = {
    16: ReferenceRow(2.80, 2.96, 9, 0.69, 270),
    32: ReferenceRow(3.85, 6.51, 19, 0.73, 558),
    64: ReferenceRow(4.35, 13.61, 37, 0.76, 1134),
    128: ReferenceRow(4.59, 27.83, 73, 0.77, 2286),
    256: ReferenceRow(4.71, 56.28, 147, 0.77, 4590),
    512: ReferenceRow(4.77, 113.17, 293, 0.78, 9198),
    1024: ReferenceRow(4.80, 226.94, 585, 0.78, 18414),
    1536: ReferenceRow(4.80, 340.72, 878, 0.78, 27630),
    2048: ReferenceRow(4.82, 454.5, 1171, 0.78, 36846),
}

DEFAULT_RATE_GRID = (Fraction(1, 5), Fraction(1, 4), Fraction(16, 63), Fraction(2, 7), Fraction(1, 3))


def _as_timeline(circuit) -> tuple[SlotTimeline, int]:
    if isinstance(circuit, Circuit):
        return sequentialize(circuit), circuit.n_qubits
    if isinstance(circuit, SlotTimeline):
        return circuit, 0
    raise TypeError(f"expected a Circuit or SlotTimeline, got {type(circuit).__name__}")


@dataclass(frozen=True)
class SweepConfig:
    capacities: tuple = tuple(range(9)) + (INF,)
    base: EmulatorConfig = field(default_factory=EmulatorConfig)

    def __post_init__(self):
        caps = tuple(check_capacity(c) for c in self.capacities)
        if not caps:
            raise InvalidConfig("sweep needs at least one capacity")
        if len(set(caps)) != len(caps):
            raise InvalidConfig(f"capacities must be distinct, got {caps}")
        object.__setattr__(self, "capacities", caps)


@dataclass(frozen=True)
class SweepRow:
    capacity: int | float
    assembly_depth: int | None
    stall_steps: int | None
    pause_steps: int | None
    metrics: QueueMetrics | None
    warning: str | None = None
    error: str | None = None


@dataclass(frozen=True)
class SweepReport:
    rows: tuple[SweepRow, ...]
    baseline_depth: int
    qubits: int = 0

    def row(self, capacity) -> SweepRow:
        capacity = check_capacity(capacity)
        for r in self.rows:
            if r.capacity == capacity:
                return r
        raise KeyError(capacity)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for r in self.rows:
            m = r.metrics
            writer.writerow([
                self.qubits,
                format_capacity(r.capacity),
                "" if r.assembly_depth is None else r.assembly_depth,
                "" if r.stall_steps is None else r.stall_steps,
                "" if r.pause_steps is None else r.pause_steps,
                *(("", "", "", "", "", "") if m is None else (
                    f"{m.v0:.6f}", f"{m.v_full:.6f}", f"{m.mean_jobs:.6f}",
                    f"{m.utilization:.6f}", m.num_states, m.num_transitions,
                )),
            ])
        return buf.getvalue()


def run_pipeline(timeline: SlotTimeline, config: EmulatorConfig, close_cycle: bool = True):
    """Emulate, build the chain and compute metrics; warnings become a note string."""
    trace = emulate(timeline, config)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        _, nu, metrics = analyze(trace, close_cycle=close_cycle)
    notes = [str(w.message) for w in caught]
    if nu.warning and nu.warning not in notes:
        notes.append(nu.warning)
    return trace, metrics, "; ".join(notes) or None


def sweep_buffers(circuit: Circuit | SlotTimeline, config: SweepConfig | None = None) -> SweepReport:
    """Re-emulate ``circuit`` once per buffer capacity.

    An infinite-capacity run is always made to supply ``baseline_depth``.
    A failing row records its error and the sweep carries on.
    """
    if config is None:
        config = SweepConfig()
    timeline, qubits = _as_timeline(circuit)
    baseline = emulate(timeline, config.base.with_capacity(INF)).assembly_depth
    rows = []
    for capacity in sorted(config.capacities):
        try:
            trace, metrics, note = run_pipeline(timeline, config.base.with_capacity(capacity))
        except DistillqError as exc:
            rows.append(SweepRow(capacity, None, None, None, None, error=str(exc)))
            continue
        rows.append(SweepRow(
            capacity, trace.assembly_depth, trace.stall_steps, trace.pause_steps, metrics, warning=note,
        ))
    return SweepReport(tuple(rows), baseline, qubits)


def optimal_buffer(report: SweepReport):
    """Smallest finite capacity whose depth matches the infinite baseline.

    Falls back to the smallest capacity reaching the best finite depth.
    """
    finite = [r for r in report.rows if not math.isinf(r.capacity) and r.assembly_depth is not None]
    if not finite:
        return INF
    for r in finite:
        if r.assembly_depth == report.baseline_depth:
            return r.capacity
    best = min(r.assembly_depth for r in finite)
    return next(r.capacity for r in finite if r.assembly_depth == best)


@dataclass(frozen=True)
class Table1Row:
    qubits: int
    mean_size7: float
    mean_infinite: float
    states_infinite: int
    utilization: float
    transitions: int

    def as_csv_cells(self) -> list:
        return [
            self.qubits, f"{self.mean_size7:.6f}", f"{self.mean_infinite:.6f}",
            self.states_infinite, f"{self.utilization:.6f}", self.transitions,
        ]


def table1_row(n: int, profile: AdderProfile | None = None, base: EmulatorConfig | None = None) -> Table1Row:
    """Infinite and size-7 runs of the ``n``-qubit adder, in reference-table form."""
    return _table1_from_timeline(n, sequentialize(generate_adder(n, profile)), base or EmulatorConfig())


def _table1_from_timeline(n: int, timeline: SlotTimeline, base: EmulatorConfig) -> Table1Row:
    _, inf_metrics, _ = run_pipeline(timeline, base.with_capacity(INF))
    _, size7, _ = run_pipeline(timeline, base.with_capacity(7))
    return Table1Row(
        qubits=n,
        mean_size7=size7.mean_jobs,
        mean_infinite=inf_metrics.mean_jobs,
        states_infinite=inf_metrics.num_states,
        utilization=inf_metrics.utilization,
        transitions=inf_metrics.num_transitions,
    )


def table1(ns: Iterable[int] = REFERENCE_QUBITS, profile: AdderProfile | None = None,
           base: EmulatorConfig | None = None) -> list[Table1Row]:
    return [table1_row(n, profile, base) for n in ns]


def table1_csv(rows: Iterable[Table1Row]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE1_COLUMNS)
    for r in rows:
        writer.writerow(r.as_csv_cells())
    return buf.getvalue()


def reference_csv(reference: Mapping[int, ReferenceRow] = REFERENCE_TABLE) -> str:
    rows = [
        Table1Row(n, r.mean_jobs_size7, r.mean_jobs_infinite, r.states_infinite, r.utilization, r.transitions)
        for n, r in sorted(reference.items())
    ]
    return table1_csv(rows)


@dataclass(frozen=True)
class CalibrationResult:
    best_rate: Fraction
    best_profile: str
    per_n_errors: dict
    objective: float
    scores: dict = field(default_factory=dict, repr=False)
    rows: tuple = field(default=(), repr=False)

    @property
    def profile(self) -> AdderProfile:
        return AdderProfile(self.best_profile)


ERROR_COLUMNS = ("transitions", "states", "utilization", "mean_infinite")


def row_errors(row: Table1Row, ref: ReferenceRow) -> dict:
    """Relative errors, except utilization which is already a fraction."""
    return {
        "transitions": abs(row.transitions - ref.transitions) / ref.transitions,
        "states": abs(row.states_infinite - ref.states_infinite) / ref.states_infinite,
        "utilization": abs(row.utilization - ref.utilization),
        "mean_infinite": abs(row.mean_infinite - ref.mean_jobs_infinite) / ref.mean_jobs_infinite,
    }


@lru_cache(maxsize=64)
def _timeline(n: int, shape: str) -> SlotTimeline:
    return sequentialize(generate_adder(n, AdderProfile(shape)))


def _grid_point(job) -> tuple[Table1Row, ...]:
    rate, shape, ns, base = job
    config = EmulatorConfig(rate, base.buffer_capacity, base.policy, base.warmup_remaining, base.initial_stock)
    return tuple(_table1_from_timeline(n, _timeline(n, shape), config) for n in ns)


def calibrate(
    reference: Mapping[int, ReferenceRow] = REFERENCE_TABLE,
    rate_grid: Sequence = DEFAULT_RATE_GRID,
    shapes: Sequence[str] = SHAPES,
    ns: Sequence[int] | None = None,
    weights: Mapping[str, float] | None = None,
    base: EmulatorConfig | None = None,
    n_jobs: int | None = 1,
) -> CalibrationResult:
    """Grid-search production rate and adder profile shape against ``reference``.

    The objective is the mean over rows of the weighted sum of
    :func:`row_errors` (all weights 1 by default). Ties keep the first grid
    point in iteration order. ``n_jobs`` other than 1 spreads grid points over
    worker processes (``None`` means one per CPU); results do not depend on it.
    """
    rates = [check_rate(r) for r in rate_grid]
    shapes = list(shapes)
    ns = sorted(reference) if ns is None else list(ns)
    if not rates or not shapes or not ns:
        raise EmptyGrid("calibration needs non-empty rate, shape and qubit grids")
    for s in shapes:
        if s not in SHAPES:
            raise InvalidConfig(f"unknown profile shape {s!r}")
    missing = [n for n in ns if n not in reference]
    if missing:
        raise InvalidConfig(f"no reference rows for n={missing}")
    w = {c: 1.0 for c in ERROR_COLUMNS}
    if weights:
        unknown = set(weights) - set(ERROR_COLUMNS)
        if unknown:
            raise InvalidConfig(f"unknown weight keys {sorted(unknown)}")
        w.update(weights)
    base = base or EmulatorConfig()
    if n_jobs is not None and (isinstance(n_jobs, bool) or not isinstance(n_jobs, int) or n_jobs < 1):
        raise InvalidConfig(f"n_jobs must be a positive integer or None, got {n_jobs!r}")

    grid = [(rate, shape) for rate in rates for shape in shapes]
    jobs = [(rate, shape, tuple(ns), base) for rate, shape in grid]
    if n_jobs == 1:
        results = list(map(_grid_point, jobs))
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_grid_point, jobs))

    best = None
    scores = {}
    for (rate, shape), rows in zip(grid, results):
        errors = {r.qubits: row_errors(r, reference[r.qubits]) for r in rows}
        objective = sum(sum(w[c] * e[c] for c in ERROR_COLUMNS) for e in errors.values()) / len(errors)
        scores[(rate, shape)] = objective
        if best is None or objective < best[0]:
            best = (objective, rate, shape, errors, rows)
    objective, rate, shape, errors, rows = best
    return CalibrationResult(rate, shape, errors, objective, scores, rows)


def calibration_csv(result: CalibrationResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("rate", "profile", "objective"))
    for (rate, shape), obj in result.scores.items():
        writer.writerow((format_rate(rate), shape, f"{obj:.6f}"))
    return buf.getvalue()
