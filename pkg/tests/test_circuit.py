from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from distillq.circuit import (
    GATE_KINDS,
    TWO_QUBIT_KINDS,
    AdderProfile,
    Circuit,
    Gate,
    SlotTimeline,
    circuit_stats,
    generate_adder,
    parse_circuit,
    sequentialize,
    serialize_circuit,
)
from distillq.exceptions import (
    EmptyCircuit,
    InvalidGate,
    InvalidProfile,
    InvalidQubitCount,
    MalformedLine,
    UnknownGate,
)


def t_positions(circuit):
    return [i for i, g in enumerate(circuit.gates) if g.kind == "T"]


# ------------------------------------------------------------- generate_adder

def test_two_qubit_adder_is_one_stage():
    c = generate_adder(2, AdderProfile())
    assert len(c.gates) == 18
    assert t_positions(c) == [1, 5, 9, 13]


def test_sixteen_qubit_adder_counts():
    c = generate_adder(16)
    assert len(c.gates) == 18 * 15 == 270
    assert c.t_count == 60


def test_extra_stage_gives_four_t_per_qubit():
    assert generate_adder(16, AdderProfile(extra_stage=True)).t_count == 64


@pytest.mark.parametrize("n", [0, 1, -3])
def test_adder_rejects_small_n(n):
    with pytest.raises(InvalidQubitCount):
        generate_adder(n)


@pytest.mark.parametrize("kwargs", [
    {"shape": "zigzag"},
    {"t_offsets": (1, 5, 9)},
    {"t_offsets": (1, 5, 9, 18)},
    {"t_offsets": (1, 5, 5, 9)},
    {"t_offsets": (9, 5, 1, 13)},
    {"slots_per_stage": 0},
    {"t_per_stage": 19},
    {"shape": "tapered", "tapered_spacing": Fraction(1, 2)},
])
def test_malformed_profiles(kwargs):
    with pytest.raises(InvalidProfile):
        AdderProfile(**kwargs)


def test_burst_offsets_are_contiguous():
    c = generate_adder(3, AdderProfile("burst"))
    assert t_positions(c) == [1, 2, 3, 4, 19, 20, 21, 22]


def test_custom_density_defaults_offsets():
    p = AdderProfile(t_per_stage=2)
    assert p.t_offsets == (0, 9)


@given(st.integers(2, 300), st.booleans())
def test_uniform_slot_and_t_counts(n, extra):
    c = generate_adder(n, AdderProfile(extra_stage=extra))
    stages = n if extra else n - 1
    assert len(c.gates) == 18 * stages
    assert c.t_count == 4 * stages


@given(st.integers(2, 120))
def test_uniform_t_spacing_at_least_four(n):
    pos = t_positions(generate_adder(n))
    assert all(b - a >= 4 for a, b in zip(pos, pos[1:]))


@given(st.integers(2, 400), st.sampled_from(["burst", "tapered"]))
def test_all_shapes_keep_t_count(n, shape):
    c = generate_adder(n, AdderProfile(shape))
    assert len(c.gates) == 18 * (n - 1)
    assert c.t_count == 4 * (n - 1)


def test_tapered_front_loads_one_t_per_distillation():
    pos = t_positions(generate_adder(16, AdderProfile("tapered")))
    head = [p for p in pos if p < 60]
    assert head[:5] == [0, 4, 8, 12, 16]
    assert len(head) == 15  # ceil(k * 63/16) < 60 only for k = 0..14
    assert pos == sorted(set(pos))


def test_clifford_identity_is_deterministic():
    assert generate_adder(8) == generate_adder(8)
    kinds = {g.kind for g in generate_adder(8).gates}
    assert kinds <= set(GATE_KINDS)


# ------------------------------------------------------------- parse_circuit

def test_parse_basic():
    c = parse_circuit("h 0\nt 1\ncx 0 1")
    assert c.n_qubits == 2
    assert len(c.gates) == 3
    assert c.t_count == 1


def test_parse_empty():
    with pytest.raises(EmptyCircuit):
        parse_circuit("")
    with pytest.raises(EmptyCircuit):
        parse_circuit("# nothing\n\n   \nqubits 3\n")


def test_parse_infers_qubits():
    c = parse_circuit("t 3")
    assert c.n_qubits == 4
    assert c.t_count == 1


def test_parse_header_comments_and_case():
    c = parse_circuit("qubits 5  # register\n\nH 0\n  T 2 # magic\nCZ 1 4\n")
    assert c.n_qubits == 5
    assert [g.kind for g in c.gates] == ["H", "T", "CZ"]


@pytest.mark.parametrize("text, line", [
    ("h 0\nfoo 1\n", 2),
    ("\n\nccx 0 1 2", 3),
])
def test_parse_unknown_gate(text, line):
    with pytest.raises(UnknownGate) as info:
        parse_circuit(text)
    assert info.value.line == line


@pytest.mark.parametrize("text, line", [
    ("t -1", 1),
    ("h 0\nt", 2),
    ("cx 0", 1),
    ("cx 1 1", 1),
    ("t x", 1),
    ("qubits 2\nt 2", 2),
    ("t 0\nqubits 2", 2),
])
def test_parse_malformed(text, line):
    with pytest.raises(MalformedLine) as info:
        parse_circuit(text)
    assert info.value.line == line


gates = st.one_of(
    st.builds(lambda k, q: Gate(k, (q,)),
              st.sampled_from([k for k in GATE_KINDS if k not in TWO_QUBIT_KINDS]), st.integers(0, 6)),
    st.builds(lambda k, qs: Gate(k, tuple(qs)),
              st.sampled_from(sorted(TWO_QUBIT_KINDS)),
              st.lists(st.integers(0, 6), min_size=2, max_size=2, unique=True)),
)


@st.composite
def circuits(draw):
    gs = draw(st.lists(gates, min_size=1, max_size=40))
    top = max(max(g.targets) for g in gs)
    return Circuit(top + 1 + draw(st.integers(0, 3)), tuple(gs), label=draw(st.sampled_from(["", "demo"])))


@given(circuits())
def test_serialize_round_trip(c):
    assert parse_circuit(serialize_circuit(c)) == c


@given(circuits())
def test_sequentialize_preserves_kinds(c):
    timeline = sequentialize(c)
    assert len(timeline) == len(c.gates)
    assert list(timeline.slots) == [g.kind == "T" for g in c.gates]
    assert timeline.t_count == c.t_count


@given(circuits())
def test_stats_identities(c):
    s = circuit_stats(c)
    assert s.slot_count == s.t_count + s.clifford_count == len(c.gates)
    assert s.sequential_t_depth == s.t_count == c.t_count


# ------------------------------------------------------------- sequentialize / stats

def test_sequentialize_examples():
    assert sequentialize([Gate("T", (0,))]).slots == (True,)
    c = parse_circuit("h 0\nt 0\ncx 0 1")
    assert str(sequentialize(c)) == "ctc"
    adder = sequentialize(generate_adder(16))
    assert len(adder) == 270 and adder.t_count == 60


def test_stats_examples():
    s = circuit_stats([Gate("T", (0,))])
    assert (s.t_count, s.clifford_count, s.slot_count, s.sequential_t_depth) == (1, 0, 1, 1)
    s = circuit_stats(generate_adder(16))
    assert (s.t_count, s.clifford_count, s.slot_count) == (60, 210, 270)
    assert circuit_stats(generate_adder(16, AdderProfile(extra_stage=True))).t_count == 64


def test_gate_and_circuit_validation():
    with pytest.raises(InvalidGate):
        Gate("CX", (1,))
    with pytest.raises(InvalidGate):
        Gate("Y", (0,))
    with pytest.raises(InvalidGate):
        Circuit(2, (Gate("T", (2,)),))


def test_timeline_from_string():
    assert SlotTimeline.from_string("c t c").slots == (False, True, False)
    with pytest.raises(ValueError):
        SlotTimeline.from_string("cxt")
