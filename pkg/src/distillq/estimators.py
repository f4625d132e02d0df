"""scikit-learn compatible wrappers.

``BufferQueueTransformer`` turns circuits into rows of queue metrics, so it can
sit in a ``Pipeline`` or be cloned across a parameter grid.
``SteadyStateEstimator`` fits a chain to an occupancy trace.
``DistilleryCalibrator`` fits production rate and profile shape to reference
measurements and predicts reference-table rows for new adder sizes.
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_nonnegative_int, check_rate
from .circuit import SHAPES, Circuit, SlotTimeline, parse_circuit, sequentialize
from .emulator import DEFAULT_RATE, STOP_WHEN_FULL, EmulationTrace, EmulatorConfig
from .exceptions import InvalidConfig
from .markov import build_chain, check_ergodic, queue_metrics, steady_state
from .sweep import (
    DEFAULT_RATE_GRID,
    REFERENCE_TABLE,
    TABLE1_COLUMNS,
    ReferenceRow,
    run_pipeline,
    calibrate,
    table1,
)

METRIC_COLUMNS = (
    "depth", "stalls", "pauses", "v0", "v_full", "mean_jobs", "utilization", "num_states", "num_transitions",
)


def check_timelines(X) -> list[SlotTimeline]:
    """Coerce a batch of circuits into slot timelines.

    Each item may be a :class:`Circuit`, a :class:`SlotTimeline`, ``.ctq``
    text, or a 1-D boolean/0-1 array marking t-slots.
    """
    if isinstance(X, (Circuit, SlotTimeline, str)):
        raise InvalidConfig("expected a batch of circuits; wrap a single circuit in a list")
    out = []
    for item in X:
        if isinstance(item, SlotTimeline):
            out.append(item)
        elif isinstance(item, Circuit):
            out.append(sequentialize(item))
        elif isinstance(item, str):
            out.append(sequentialize(parse_circuit(item)))
        else:
            arr = np.asarray(item)
            if arr.ndim != 1 or not np.isin(arr, (0, 1)).all():
                raise InvalidConfig("timeline arrays must be 1-D and contain only 0/1 or booleans")
            out.append(SlotTimeline(tuple(arr.astype(bool).tolist())))
    return out


class BufferQueueTransformer(TransformerMixin, BaseEstimator):
    """Emulate each circuit and emit one row of queue metrics per circuit.

    Parameters mirror :class:`~distillq.emulator.EmulatorConfig`. The output
    columns are listed in ``METRIC_COLUMNS``.
    """

    def __init__(
        self,
        production_rate=DEFAULT_RATE,
        buffer_capacity=math.inf,
        policy=STOP_WHEN_FULL,
        warmup=1,
        initial_stock=0,
        close_cycle=True,
    ):
        self.production_rate = production_rate
        self.buffer_capacity = buffer_capacity
        self.policy = policy
        self.warmup = warmup
        self.initial_stock = initial_stock
        self.close_cycle = close_cycle

    def _config(self) -> EmulatorConfig:
        return EmulatorConfig(
            production_rate=self.production_rate,
            buffer_capacity=self.buffer_capacity,
            policy=self.policy,
            warmup_remaining=self.warmup,
            initial_stock=self.initial_stock,
        )

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        self.n_features_out_ = len(METRIC_COLUMNS)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "config_")
        rows = []
        for timeline in check_timelines(X):
            trace, m, _ = run_pipeline(timeline, self.config_, close_cycle=self.close_cycle)
            rows.append([
                trace.assembly_depth, trace.stall_steps, trace.pause_steps, m.v0, m.v_full,
                m.mean_jobs, m.utilization, m.num_states, m.num_transitions,
            ])
        return np.asarray(rows, dtype=float).reshape(-1, len(METRIC_COLUMNS))

    def get_feature_names_out(self, input_features=None):
        return np.asarray(METRIC_COLUMNS, dtype=object)


class SteadyStateEstimator(BaseEstimator):
    """Fit a DTMC to one occupancy trace.

    Attributes set by :meth:`fit`: ``states_``, ``transition_matrix_``,
    ``stationary_distribution_``, ``ergodicity_`` and ``metrics_``.
    """

    def __init__(self, close_cycle=True):
        self.close_cycle = close_cycle

    def fit(self, X, y=None):
        if isinstance(X, EmulationTrace):
            X = X.occupancy
        occupancy = np.asarray(X).ravel()
        matrix = build_chain(occupancy, close_cycle=self.close_cycle)
        nu = steady_state(matrix)
        self.states_ = np.asarray(matrix.states)
        self.transition_matrix_ = matrix
        self.stationary_distribution_ = nu.nu
        self.ergodicity_ = check_ergodic(matrix)
        self.metrics_ = queue_metrics(nu, matrix)
        return self

    def predict_proba(self, X) -> np.ndarray:
        """Stationary probability of each occupancy value in ``X`` (0 if unseen)."""
        check_is_fitted(self, "stationary_distribution_")
        lookup = dict(zip(self.states_.tolist(), self.stationary_distribution_.tolist()))
        return np.asarray([lookup.get(int(k), 0.0) for k in np.asarray(X).ravel()])

    def score(self, X, y=None) -> float:
        """Mean log-likelihood per transition of trace ``X`` under the fitted chain.

        Transitions through unseen states or edges score ``-inf``.
        """
        check_is_fitted(self, "transition_matrix_")
        occ = np.asarray(X.occupancy if isinstance(X, EmulationTrace) else X).ravel()
        if occ.size < 2:
            raise InvalidConfig("need at least two occupancy entries to score")
        index = {s: i for i, s in enumerate(self.states_.tolist())}
        P = self.transition_matrix_.probs
        total = 0.0
        for a, b in zip(occ[:-1].tolist(), occ[1:].tolist()):
            if a not in index or b not in index:
                return -math.inf
            p = P[index[a], index[b]]
            if p <= 0:
                return -math.inf
            total += math.log(p)
        return total / (occ.size - 1)


class DistilleryCalibrator(BaseEstimator):
    """Grid-search production rate and adder shape against reference rows.

    ``fit(X, y)`` takes qubit counts ``X`` and, optionally, reference rows
    ``y`` as an ``(n, 5)`` array in ``TABLE1_COLUMNS[1:]`` order; without ``y``
    the embedded reference table is used.
    """

    def __init__(self, rate_grid=DEFAULT_RATE_GRID, shapes=SHAPES, weights=None, n_jobs=1):
        self.rate_grid = rate_grid
        self.shapes = shapes
        self.weights = weights
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        if X is None:
            ns = sorted(REFERENCE_TABLE)
        else:
            ns = [check_nonnegative_int(int(n), "qubit count") for n in np.asarray(X).ravel()]
        if y is None:
            reference = REFERENCE_TABLE
        else:
            y = np.asarray(y, dtype=float)
            if y.shape != (len(ns), len(TABLE1_COLUMNS) - 1):
                raise InvalidConfig(f"y must have shape ({len(ns)}, {len(TABLE1_COLUMNS) - 1})")
            reference = {
                n: ReferenceRow(r[0], r[1], int(r[2]), r[3], int(r[4])) for n, r in zip(ns, y)
            }
        result = calibrate(
            reference, [check_rate(r) for r in self.rate_grid], self.shapes, ns, self.weights,
            n_jobs=self.n_jobs,
        )
        self.result_ = result
        self.best_rate_ = result.best_rate
        self.best_shape_ = result.best_profile
        self.objective_ = result.objective
        return self

    def predict(self, X) -> np.ndarray:
        """Reference-table rows (columns ``TABLE1_COLUMNS[1:]``) for qubit counts ``X``."""
        check_is_fitted(self, "result_")
        ns = [int(n) for n in np.asarray(X).ravel()]
        rows = table1(ns, self.result_.profile, EmulatorConfig(self.best_rate_))
        return np.asarray([
            [r.mean_size7, r.mean_infinite, r.states_infinite, r.utilization, r.transitions] for r in rows
        ])

    def score(self, X=None, y=None) -> float:
        """Negative calibration objective; larger is better."""
        check_is_fitted(self, "result_")
        return -self.objective_
