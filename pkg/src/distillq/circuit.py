"""Clifford+T circuits, adder schedules, the ``.ctq`` gate-list format and
slot timelines.

Only the T/Clifford distinction of a gate matters downstream: the emulator sees
a circuit as a sequence of slots, one gate per discrete time step.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from fractions import Fraction
from typing import Iterable, Sequence

from .exceptions import (
    EmptyCircuit,
    InvalidGate,
    InvalidProfile,
    InvalidQubitCount,
    MalformedLine,
    UnknownGate,
)

CLIFFORD_KINDS = ("H", "S", "X", "Z", "CX", "CZ", "M")
GATE_KINDS = ("T",) + CLIFFORD_KINDS
TWO_QUBIT_KINDS = frozenset({"CX", "CZ"})

SHAPES = ("uniform", "burst", "tapered")
DEFAULT_OFFSETS = {"uniform": (1, 5, 9, 13), "burst": (1, 2, 3, 4)}
# one T gate per distillation at the default production rate of 16/63
DEFAULT_TAPERED_SPACING = Fraction(63, 16)

# filler pattern for the Clifford slots of a generated stage; entries index the
# stage's (carry, target) qubit pair
_CLIFFORD_FILL = (
    ("CX", (0, 1)),
    ("H", (1,)),
    ("CX", (1, 0)),
    ("S", (0,)),
    ("CZ", (0, 1)),
    ("X", (1,)),
    ("Z", (0,)),
)


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "targets", tuple(int(q) for q in self.targets))
        if kind not in GATE_KINDS:
            raise InvalidGate(f"unknown gate kind {self.kind!r}")
        arity = 2 if kind in TWO_QUBIT_KINDS else 1
        if len(self.targets) != arity:
            raise InvalidGate(f"{kind} takes {arity} target(s), got {len(self.targets)}")
        if any(q < 0 for q in self.targets):
            raise InvalidGate(f"negative qubit index in {self.targets}")
        if arity == 2 and self.targets[0] == self.targets[1]:
            raise InvalidGate(f"{kind} targets must be distinct, got {self.targets}")

    @property
    def is_t(self) -> bool:
        return self.kind == "T"


@dataclass(frozen=True)
class Circuit:
    """An ordered Clifford+T gate list.

    Gate order is total; nothing here represents parallel execution. ``label``
    does not take part in equality.
    """

    n_qubits: int
    gates: tuple[Gate, ...]
    label: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if isinstance(self.n_qubits, bool) or not isinstance(self.n_qubits, int) or self.n_qubits < 1:
            raise InvalidQubitCount(f"n_qubits must be a positive integer, got {self.n_qubits!r}")
        for gate in self.gates:
            if max(gate.targets) >= self.n_qubits:
                raise InvalidGate(f"{gate} addresses a qubit outside 0..{self.n_qubits - 1}")

    @property
    def t_count(self) -> int:
        return sum(g.is_t for g in self.gates)

    def __len__(self) -> int:
        return len(self.gates)


@dataclass(frozen=True)
class AdderProfile:
    """Placement of T gates inside the stages of a generated adder.

    ``uniform`` and ``burst`` repeat ``t_offsets`` in every stage. ``tapered``
    ignores the offsets: the first ``t_per_stage * stages`` slots carry one T
    gate every ``tapered_spacing`` slots (rounded up), and the remaining T gates
    are spread evenly, end-aligned, over the rest of the circuit.
    """

    shape: str = "uniform"
    slots_per_stage: int = 18
    t_per_stage: int = 4
    t_offsets: tuple[int, ...] | None = None
    extra_stage: bool = False
    tapered_spacing: Fraction = DEFAULT_TAPERED_SPACING

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise InvalidProfile(f"shape must be one of {SHAPES}, got {self.shape!r}")
        for name in ("slots_per_stage", "t_per_stage"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise InvalidProfile(f"{name} must be a positive integer, got {value!r}")
        if self.t_per_stage > self.slots_per_stage:
            raise InvalidProfile("t_per_stage exceeds slots_per_stage")
        offsets = self.t_offsets
        if offsets is None:
            offsets = DEFAULT_OFFSETS.get(self.shape, DEFAULT_OFFSETS["uniform"])
            if len(offsets) != self.t_per_stage:
                # non-default T density
                t, slots = self.t_per_stage, self.slots_per_stage
                if self.shape == "burst":
                    start = 1 if t < slots else 0
                    offsets = tuple(range(start, start + t))
                else:
                    offsets = tuple((i * slots) // t for i in range(t))
        offsets = tuple(int(o) for o in offsets)
        object.__setattr__(self, "t_offsets", offsets)
        if self.shape != "tapered":
            if len(offsets) != self.t_per_stage:
                raise InvalidProfile(f"expected {self.t_per_stage} offsets, got {len(offsets)}")
            if any(o < 0 or o >= self.slots_per_stage for o in offsets):
                raise InvalidProfile(f"offsets {offsets} outside 0..{self.slots_per_stage - 1}")
            if any(b <= a for a, b in zip(offsets, offsets[1:])):
                raise InvalidProfile(f"offsets {offsets} are not strictly increasing")
        try:
            spacing = Fraction(self.tapered_spacing)
        except (TypeError, ValueError):
            raise InvalidProfile(f"bad tapered_spacing {self.tapered_spacing!r}") from None
        if spacing < 1:
            raise InvalidProfile("tapered_spacing must be at least one slot")
        object.__setattr__(self, "tapered_spacing", spacing)

    def stages(self, n: int) -> int:
        return n if self.extra_stage else n - 1


@dataclass(frozen=True)
class SlotTimeline:
    """The circuit as seen by the emulator: ``True`` marks a t-slot."""

    slots: tuple[bool, ...]
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(bool(s) for s in self.slots))

    @classmethod
    def from_string(cls, text: str, source: str = "") -> "SlotTimeline":
        """Build from a string such as ``"ctc"`` (``t`` = t-slot, ``c`` = clifford)."""
        cleaned = text.replace(" ", "").lower()
        if set(cleaned) - {"t", "c"}:
            raise ValueError(f"timeline strings use only 't' and 'c', got {text!r}")
        return cls(tuple(ch == "t" for ch in cleaned), source)

    @property
    def t_count(self) -> int:
        return sum(self.slots)

    def __len__(self) -> int:
        return len(self.slots)

    def __str__(self) -> str:
        return "".join("t" if s else "c" for s in self.slots)


@dataclass(frozen=True)
class CircuitStats:
    t_count: int
    clifford_count: int
    slot_count: int
    sequential_t_depth: int


def _t_positions(n: int, profile: AdderProfile) -> list[int]:
    stages = profile.stages(n)
    total = stages * profile.slots_per_stage
    if profile.shape != "tapered":
        return [s * profile.slots_per_stage + o for s in range(stages) for o in profile.t_offsets]

    t_total = stages * profile.t_per_stage
    head = t_total  # phase-1 length in slots
    positions = []
    k = 0
    while len(positions) < t_total:
        p = math.ceil(k * profile.tapered_spacing)
        if p >= head:
            break
        positions.append(p)
        k += 1
    rest = t_total - len(positions)
    tail = total - head
    if rest > tail:
        raise InvalidProfile("tapered profile leaves more T gates than free slots")
    # end-aligned even spread keeps the phase boundary free of T clusters
    positions.extend(head + math.ceil(Fraction((j + 1) * tail, rest)) - 1 for j in range(rest))
    return positions


@lru_cache(maxsize=1 << 16)
def _gate(kind: str, targets: tuple[int, ...]) -> Gate:
    return Gate(kind, targets)


@lru_cache(maxsize=1 << 14)
def _stage_fill(pair: tuple[int, int], width: int) -> tuple[Gate, ...]:
    """Clifford filler for one stage acting on ``pair``."""
    return tuple(
        _gate(kind, tuple(pair[i] for i in picks))
        for kind, picks in (_CLIFFORD_FILL[w % len(_CLIFFORD_FILL)] for w in range(width))
    )


def generate_adder(n: int, profile: AdderProfile | None = None) -> Circuit:
    """Generate the gate schedule of an ``n``-qubit carry-ripple adder.

    The adder has ``n - 1`` stages (``n`` with ``profile.extra_stage``) of
    ``profile.slots_per_stage`` gates, ``profile.t_per_stage`` of which are T
    gates. Clifford gate identities are a fixed filler pattern.

    Raises:
        InvalidQubitCount: if ``n < 2``.
    """
    if profile is None:
        profile = AdderProfile()
    if isinstance(n, bool) or not isinstance(n, int) or n < 2:
        raise InvalidQubitCount(f"adder needs at least 2 qubits, got {n!r}")
    width = profile.slots_per_stage
    gates = []
    for stage in range(profile.stages(n)):
        gates.extend(_stage_fill((stage % n, (stage + 1) % n), width))
    for pos in _t_positions(n, profile):
        stage, within = divmod(pos, width)
        gates[pos] = _gate("T", ((stage + within % 2) % n,))
    extra = "+extra" if profile.extra_stage else ""
    return Circuit(n, tuple(gates), label=f"adder{n}-{profile.shape}{extra}")


_LINE_RE = re.compile(r"\s+")


def parse_circuit(text: str, label: str = "") -> Circuit:
    """Parse a ``.ctq`` gate-list document.

    One gate per line: a case-insensitive mnemonic followed by decimal qubit
    indices. ``#`` starts a comment; blank lines are skipped. An optional
    ``qubits <k>`` header fixes the register size, otherwise it is one more
    than the largest index used.
    """
    header = None
    gates = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        mnemonic, *args = _LINE_RE.split(line)
        mnemonic = mnemonic.lower()
        if mnemonic == "qubits":
            if header is not None or gates:
                raise MalformedLine(lineno, "qubits header must come first and only once")
            if len(args) != 1 or not args[0].isdigit() or int(args[0]) < 1:
                raise MalformedLine(lineno, f"bad qubits header {line!r}")
            header = int(args[0])
            continue
        kind = mnemonic.upper()
        if kind not in GATE_KINDS:
            raise UnknownGate(lineno, f"unknown gate {mnemonic!r}")
        arity = 2 if kind in TWO_QUBIT_KINDS else 1
        if len(args) != arity:
            raise MalformedLine(lineno, f"{mnemonic} expects {arity} target(s), got {len(args)}")
        if not all(a.isdigit() for a in args):
            raise MalformedLine(lineno, f"targets must be non-negative integers: {args}")
        targets = tuple(int(a) for a in args)
        if header is not None and max(targets) >= header:
            raise MalformedLine(lineno, f"target outside declared {header} qubits")
        try:
            gates.append(Gate(kind, targets))
        except InvalidGate as exc:
            raise MalformedLine(lineno, str(exc)) from None
    if not gates:
        raise EmptyCircuit("gate list contains no gates")
    n_qubits = header if header is not None else 1 + max(max(g.targets) for g in gates)
    return Circuit(n_qubits, tuple(gates), label=label)


def serialize_circuit(circuit: Circuit) -> str:
    lines = [f"qubits {circuit.n_qubits}"]
    if circuit.label:
        lines.insert(0, f"# {circuit.label}")
    lines.extend(
        " ".join([g.kind.lower(), *map(str, g.targets)]) for g in circuit.gates
    )
    return "\n".join(lines) + "\n"


def sequentialize(circuit: Circuit | Iterable[Gate]) -> SlotTimeline:
    """Map each gate to one slot, in order."""
    if isinstance(circuit, Circuit):
        return SlotTimeline(tuple(g.is_t for g in circuit.gates), circuit.label)
    return SlotTimeline(tuple(g.is_t for g in circuit))


def circuit_stats(circuit: Circuit | Sequence[Gate]) -> CircuitStats:
    gates = circuit.gates if isinstance(circuit, Circuit) else tuple(circuit)
    t = sum(g.is_t for g in gates)
    return CircuitStats(
        t_count=t,
        clifford_count=len(gates) - t,
        slot_count=len(gates),
        sequential_t_depth=t,
    )
