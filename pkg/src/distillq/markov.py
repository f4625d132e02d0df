"""Discrete-time Markov chains over jobs-in-system occupancy.

A chain is estimated from an occupancy trace by tallying consecutive pairs.
By default the trace is treated as one regenerative cycle: a single closing
transition from the final occupancy back to the initial one is added to the
probabilities (not to the observed counts). The stationary distribution of the
closed walk is then exactly the fraction of time spent in each state, and no
state is left without an outgoing transition.
"""
from __future__ import annotations

import json
import math
import warnings
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve

from .emulator import EmulationTrace
from .exceptions import InsufficientTrace, InvalidConfig, NonUniqueSteadyState

ROW_TOL = 1e-12
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Observed transition counts and the row-stochastic matrix built from them.

    ``counts`` holds only observed step-to-step transitions, so its sum equals
    ``total_transitions``. ``closure`` is the ``(from, to)`` index pair of the
    regenerative edge folded into ``probs``, or ``None``.
    """

    states: tuple[int, ...]
    counts: sparse.csr_array
    probs: sparse.csr_array
    total_transitions: int
    closure: tuple[int, int] | None = None

    @property
    def n_states(self) -> int:
        return len(self.states)

    def dense_probs(self) -> np.ndarray:
        return self.probs.toarray()

    def dense_counts(self) -> np.ndarray:
        return self.counts.toarray()

    @classmethod
    def from_probs(cls, probs, states: Sequence[int] | None = None) -> "TransitionMatrix":
        """Wrap a given row-stochastic matrix (no counts are known)."""
        P = np.asarray(probs, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            raise InvalidConfig(f"transition matrix must be square and non-empty, got shape {P.shape}")
        if np.any(P < 0) or not np.all(np.isfinite(P)):
            raise InvalidConfig("transition probabilities must be finite and non-negative")
        if np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-9:
            raise InvalidConfig("transition matrix rows must sum to 1")
        P = P / P.sum(axis=1, keepdims=True)
        if states is None:
            states = range(P.shape[0])
        states = tuple(int(s) for s in states)
        if len(states) != P.shape[0] or len(set(states)) != len(states):
            raise InvalidConfig("states must be distinct and match the matrix size")
        zero = sparse.csr_array(P.shape, dtype=np.int64)
        return cls(states, zero, sparse.csr_array(P), 0)

    def to_dict(self) -> dict:
        return {
            "states": list(self.states),
            "counts": self.dense_counts().astype(int).tolist(),
            "probs": self.dense_probs().tolist(),
            "total_transitions": self.total_transitions,
            "closure": list(self.closure) if self.closure is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TransitionMatrix":
        """Load a matrix document; ``probs`` is required, ``counts`` optional."""
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"matrix is not valid JSON: {exc}") from None
        if isinstance(data, list):
            data = {"probs": data}
        if not isinstance(data, dict) or "probs" not in data:
            raise InvalidConfig("matrix JSON needs a 'probs' field")
        matrix = cls.from_probs(data["probs"], data.get("states"))
        if data.get("counts") is not None:
            counts = np.asarray(data["counts"], dtype=np.int64)
            if counts.shape != (matrix.n_states, matrix.n_states) or np.any(counts < 0):
                raise InvalidConfig("counts must be a non-negative square table matching probs")
            closure = data.get("closure")
            matrix = cls(
                matrix.states,
                sparse.csr_array(counts),
                matrix.probs,
                int(counts.sum()),
                tuple(closure) if closure else None,
            )
        return matrix


@dataclass(frozen=True)
class ErgodicityReport:
    irreducible: bool
    aperiodic: bool
    finite: bool
    ergodic: bool
    period: int
    communicating_class_of_zero: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class SteadyStateDistribution:
    states: tuple[int, ...]
    nu: np.ndarray
    residual: float
    ergodicity: ErgodicityReport | None = None
    warning: str | None = None

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.states, self.nu.tolist()))


@dataclass(frozen=True)
class QueueMetrics:
    v0: float
    v_full: float
    mean_jobs: float
    utilization: float
    num_states: int
    num_transitions: int

    def to_dict(self) -> dict:
        return {
            "v0": round(self.v0, 6),
            "v_full": round(self.v_full, 6),
            "mean_jobs": round(self.mean_jobs, 6),
            "utilization": round(self.utilization, 6),
            "num_states": self.num_states,
            "num_transitions": self.num_transitions,
        }


def _occupancy(trace) -> np.ndarray:
    occ = trace.occupancy if isinstance(trace, EmulationTrace) else trace
    arr = np.asarray(occ)
    if arr.ndim != 1:
        raise InvalidConfig("occupancy must be a one-dimensional sequence")
    if arr.size and (np.any(arr < 0) or np.any(arr != np.floor(arr))):
        raise InvalidConfig("occupancy values must be non-negative integers")
    return arr.astype(np.int64)


def build_chain(trace: EmulationTrace | Sequence[int], close_cycle: bool = True) -> TransitionMatrix:
    """Estimate the DTMC of an occupancy trace.

    States are the distinct observed occupancies, sorted. With
    ``close_cycle=False`` a final state that is never left becomes absorbing in
    ``probs`` so that every row stays stochastic.

    Raises:
        InsufficientTrace: fewer than two occupancy entries.
    """
    occ = _occupancy(trace)
    if occ.size < 2:
        raise InsufficientTrace(f"need at least 2 occupancy entries, got {occ.size}")
    states, idx = np.unique(occ, return_inverse=True)
    n = states.size
    counts = sparse.coo_array(
        (np.ones(occ.size - 1, dtype=np.int64), (idx[:-1], idx[1:])), shape=(n, n)
    ).tocsr()
    counts.sum_duplicates()

    rows, cols = idx[:-1], idx[1:]
    closure = None
    if close_cycle:
        closure = (int(idx[-1]), int(idx[0]))
        rows, cols = np.append(rows, closure[0]), np.append(cols, closure[1])
    # a final state that is never left gets a self-loop
    row_sums = np.bincount(rows, minlength=n).astype(float)
    dangling = np.flatnonzero(row_sums == 0)
    rows, cols = np.concatenate([rows, dangling]), np.concatenate([cols, dangling])
    row_sums[dangling] = 1.0
    weights = sparse.coo_array((np.ones(rows.size), (rows, cols)), shape=(n, n)).tocsr()
    weights.sum_duplicates()
    weights.data /= np.repeat(row_sums, np.diff(weights.indptr))
    probs = weights
    return TransitionMatrix(
        states=tuple(int(s) for s in states),
        counts=counts,
        probs=probs,
        total_transitions=int(occ.size - 1),
        closure=closure,
    )


def _graph(matrix: TransitionMatrix) -> sparse.csr_array:
    P = matrix.probs.tocsr()
    P.eliminate_zeros()
    return P


def _period(graph: sparse.csr_array, members: np.ndarray) -> int:
    """Period of a strongly connected class: gcd of level differences along edges."""
    inside = np.zeros(graph.shape[0], dtype=bool)
    inside[members] = True
    level = {int(members[0]): 0}
    queue = deque([int(members[0])])
    g = 0
    indptr, indices = graph.indptr, graph.indices
    while queue:
        u = queue.popleft()
        for v in indices[indptr[u]:indptr[u + 1]]:
            v = int(v)
            if not inside[v]:
                continue
            if v not in level:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                g = math.gcd(g, level[u] + 1 - level[v])
    return g if g else 1


def _classes(matrix: TransitionMatrix):
    graph = _graph(matrix)
    n_comp, labels = csgraph.connected_components(graph, directed=True, connection="strong")
    return graph, n_comp, labels


def _closed_classes(graph, n_comp, labels) -> list[np.ndarray]:
    rows = np.repeat(np.arange(graph.shape[0]), np.diff(graph.indptr))
    leaving = labels[rows] != labels[graph.indices]
    open_comps = set(labels[rows[leaving]].tolist())
    return [np.flatnonzero(labels == c) for c in range(n_comp) if c not in open_comps]


def check_ergodic(matrix: TransitionMatrix) -> ErgodicityReport:
    """Irreducibility by strong connectivity, aperiodicity by cycle-length gcd.

    The period reported is that of the class containing state 0 (the lowest
    state when 0 is not observed).
    """
    return _ergodicity(matrix, *_classes(matrix))


def _ergodicity(matrix, graph, n_comp, labels) -> ErgodicityReport:
    anchor = matrix.states.index(0) if 0 in matrix.states else 0
    members = np.flatnonzero(labels == labels[anchor])
    period = _period(graph, members)
    irreducible = n_comp == 1
    aperiodic = period == 1
    return ErgodicityReport(
        irreducible=irreducible,
        aperiodic=aperiodic,
        finite=True,
        ergodic=irreducible and aperiodic,
        period=period,
        communicating_class_of_zero=tuple(matrix.states[i] for i in members),
    )


def _solve_balance(P: sparse.csr_array) -> np.ndarray:
    n = P.shape[0]
    if n == 1:
        return np.ones(1)
    A = (P.T - sparse.eye_array(n, format="csr")).tolil()
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[-1] = 1.0
    nu = spsolve(A.tocsc(), b)
    nu = np.where(np.abs(nu) < 1e-15, 0.0, nu)
    return nu / nu.sum()


def steady_state(matrix: TransitionMatrix) -> SteadyStateDistribution:
    """Solve ``nu = nu P`` with ``sum(nu) = 1``.

    One balance equation is replaced by the normalisation and the system is
    solved directly. A reducible chain with a single closed class is solved on
    that class (zero elsewhere) with a warning. Periodic chains are solved the
    same way and flagged in ``ergodicity``; ``nu`` is then the time-average
    distribution.

    Raises:
        NonUniqueSteadyState: more than one closed communicating class.
    """
    graph, n_comp, labels = _classes(matrix)
    report = _ergodicity(matrix, graph, n_comp, labels)
    P = matrix.probs.tocsr()
    n = matrix.n_states
    note = None
    if n_comp == 1:
        nu = _solve_balance(P)
    else:
        closed = _closed_classes(graph, n_comp, labels)
        if len(closed) != 1:
            raise NonUniqueSteadyState(
                f"{len(closed)} closed classes: "
                + "; ".join(str([matrix.states[i] for i in c]) for c in closed)
            )
        members = closed[0]
        sub = P[members][:, members]
        nu = np.zeros(n)
        nu[members] = _solve_balance(sparse.csr_array(sub))
        note = (
            "chain is reducible; steady state solved on closed class "
            f"{[matrix.states[i] for i in members]}"
        )
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    if not report.aperiodic:
        note = (note + "; " if note else "") + f"chain is periodic (period {report.period})"
    residual = float(np.max(np.abs(P.T @ nu - nu)))
    return SteadyStateDistribution(matrix.states, nu, residual, report, note)


def power_iteration(
    probs, tol: float = 1e-15, min_iter: int = 1000, max_iter: int = 200_000, lazy: bool = False
) -> np.ndarray:
    """Stationary distribution by repeated ``nu <- nu P`` from the uniform vector.

    Convergence is tested every 25 steps, after at least ``min_iter``.
    ``lazy`` iterates ``(P + I) / 2`` instead, which has the same fixed point
    but also converges for periodic chains.
    """
    P = probs.toarray() if sparse.issparse(probs) else np.asarray(probs, dtype=float)
    if lazy:
        P = 0.5 * (P + np.eye(P.shape[0]))
    nu = np.full(P.shape[0], 1.0 / P.shape[0])
    check_every = 25
    it = 0
    while it < max_iter:
        prev = nu
        for _ in range(check_every):
            nu = nu @ P
        it += check_every
        nu /= nu.sum()
        if it >= min_iter and np.max(np.abs(nu - prev)) < tol:
            break
    return nu


def queue_metrics(nu: SteadyStateDistribution, matrix: TransitionMatrix) -> QueueMetrics:
    states = np.asarray(matrix.states, dtype=float)
    p = np.asarray(nu.nu, dtype=float)
    if p.shape != states.shape:
        raise InvalidConfig("steady state and matrix disagree on the state space")
    v0 = float(p[matrix.states.index(0)]) if 0 in matrix.states else 0.0
    return QueueMetrics(
        v0=v0,
        v_full=float(p[int(np.argmax(states))]),
        mean_jobs=float(states @ p),
        utilization=1.0 - v0,
        num_states=matrix.n_states,
        num_transitions=matrix.total_transitions,
    )


def analyze(trace: EmulationTrace | Sequence[int], close_cycle: bool = True):
    """Chain, steady state and metrics of a trace in one call."""
    matrix = build_chain(trace, close_cycle=close_cycle)
    nu = steady_state(matrix)
    return matrix, nu, queue_metrics(nu, matrix)
