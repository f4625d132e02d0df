import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from distillq.circuit import AdderProfile, SlotTimeline, generate_adder, sequentialize
from distillq.emulator import DEFAULT_RATE, EmulatorConfig
from distillq.exceptions import EmptyGrid, InvalidConfig
from distillq.markov import QueueMetrics
from distillq.sweep import (
    REFERENCE_QUBITS,
    REFERENCE_TABLE,
    SWEEP_COLUMNS,
    TABLE1_COLUMNS,
    SweepConfig,
    SweepReport,
    SweepRow,
    calibrate,
    calibration_csv,
    optimal_buffer,
    reference_csv,
    sweep_buffers,
    table1,
    table1_csv,
    table1_row,
)

INF = math.inf
STATES_ONLY = {"states": 1, "transitions": 0, "utilization": 0, "mean_infinite": 0}


def fake_report(depths: dict, baseline: int) -> SweepReport:
    rows = tuple(SweepRow(c, d, 0, 0, None) for c, d in sorted(depths.items()))
    return SweepReport(rows, baseline)


# ------------------------------------------------------------- reference data

def test_reference_table_rows():
    assert tuple(REFERENCE_TABLE) == REFERENCE_QUBITS
    row = REFERENCE_TABLE[2048]
    assert (row.mean_jobs_size7, row.mean_jobs_infinite, row.states_infinite, row.transitions) == (
        4.82, 454.5, 1171, 36846)
    assert REFERENCE_TABLE[16].utilization == 0.69
    assert all(r.transitions == 18 * (n - 1) for n, r in REFERENCE_TABLE.items())


def test_reference_csv_schema():
    lines = reference_csv().splitlines()
    assert lines[0] == ",".join(TABLE1_COLUMNS)
    assert lines[1] == "16,2.800000,2.960000,9,0.690000,270"
    assert len(lines) == 10


# ------------------------------------------------------------- sweep_buffers

def test_adder16_depth_invariant():
    report = sweep_buffers(generate_adder(16))
    assert [r.capacity for r in report.rows] == list(range(9)) + [INF]
    assert {r.assembly_depth for r in report.rows} == {270}
    assert {r.stall_steps for r in report.rows} == {0}
    assert report.baseline_depth == 270
    assert optimal_buffer(report) == 0


def test_capacity_states_and_transitions():
    report = sweep_buffers(generate_adder(16))
    for r in report.rows:
        assert r.metrics.num_transitions == r.assembly_depth
        if r.capacity != INF:
            assert r.metrics.num_states <= r.capacity + 2
    assert report.row(7).metrics.num_states == 9
    assert report.row(7).metrics.v_full <= 0.05


def test_burst_adder_needs_buffer():
    report = sweep_buffers(generate_adder(4, AdderProfile("burst")), SweepConfig((0, INF)))
    assert report.row(0).assembly_depth > report.row(INF).assembly_depth


def test_single_capacity_still_runs_baseline():
    report = sweep_buffers(generate_adder(4, AdderProfile("burst")), SweepConfig((0,)))
    assert len(report.rows) == 1
    assert report.baseline_depth == 62
    assert optimal_buffer(report) == 0


def test_rows_sorted_whatever_the_request_order():
    report = sweep_buffers(generate_adder(4), SweepConfig((INF, 3, 0, 1)))
    assert [r.capacity for r in report.rows] == [0, 1, 3, INF]


def test_sweep_config_validation():
    with pytest.raises(InvalidConfig):
        SweepConfig(())
    with pytest.raises(InvalidConfig):
        SweepConfig((1, 1))
    with pytest.raises(InvalidConfig):
        SweepConfig((-1,))


def test_sweep_csv():
    text = sweep_buffers(generate_adder(2), SweepConfig((0, INF))).to_csv()
    lines = text.splitlines()
    assert lines[0] == ",".join(SWEEP_COLUMNS)
    assert lines[1].startswith("2,0,18,0,")
    assert lines[2].startswith("2,inf,18,0,")
    assert text == sweep_buffers(generate_adder(2), SweepConfig((0, INF))).to_csv()


def test_sweep_accepts_timelines():
    report = sweep_buffers(SlotTimeline.from_string("tctct"), SweepConfig((0, 1)))
    assert report.qubits == 0
    assert len(report.rows) == 2


# ------------------------------------------------------------- optimal_buffer

@pytest.mark.parametrize("depths, baseline, expected", [
    ({0: 270, 1: 270, INF: 270}, 270, 0),
    ({0: 12, 1: 10, 2: 10}, 10, 1),
    ({0: 12}, 12, 0),
    ({0: 15, 1: 13, 2: 13}, 11, 1),
    ({INF: 11}, 11, INF),
])
def test_optimal_buffer(depths, baseline, expected):
    assert optimal_buffer(fake_report(depths, baseline)) == expected


timelines = st.lists(st.booleans(), min_size=1, max_size=40).map(lambda s: SlotTimeline(tuple(s)))


@given(timelines, st.integers(1, 8), st.integers(0, 4), st.integers(0, 3))
def test_optimal_buffer_reaches_baseline(timeline, den, warmup, stock):
    base = EmulatorConfig(Fraction(1, den), warmup_remaining=warmup, initial_stock=stock)
    caps = tuple(range(timeline.t_count + 2)) + (INF,)
    report = sweep_buffers(timeline, SweepConfig(caps, base))
    depths = [r.assembly_depth for r in report.rows]
    assert depths == sorted(depths, reverse=True)
    assert report.row(optimal_buffer(report)).assembly_depth == report.baseline_depth


# ------------------------------------------------------------- table1 view

def test_table1_transitions_and_states():
    rows = table1((16, 32, 64))
    assert [r.transitions for r in rows] == [270, 558, 1134]
    # frozen from the closed-form delivery oracle
    assert [r.states_infinite for r in rows] == [
        oracles.uniform_state_count(n, DEFAULT_RATE) for n in (16, 32, 64)] == [10, 19, 37]


def test_table1_csv_schema():
    text = table1_csv([table1_row(16)])
    assert text.splitlines()[0] == "qubits,mean_size7,mean_infinite,states_infinite,utilization,transitions"
    assert text.splitlines()[1].endswith(",10,0.937269,270")


# ------------------------------------------------------------- calibrate

def test_rate_grid_oracle_confirms_default():
    ns = (16, 32, 64, 128, 256)
    grid = oracles.farey(Fraction(1, 5), Fraction(1, 3), 64)
    errors = {r: sum(abs(oracles.uniform_state_count(n, r) - REFERENCE_TABLE[n].states_infinite) for n in ns)
              for r in grid}
    best = min(errors.values())
    assert [r for r, e in errors.items() if e == best] == [DEFAULT_RATE]


def test_calibrate_states_weighting_picks_default_rate():
    result = calibrate(rate_grid=[Fraction(1, 4), DEFAULT_RATE, Fraction(1, 3)], shapes=["uniform"],
                       ns=[16, 32, 64], weights=STATES_ONLY)
    assert result.best_rate == DEFAULT_RATE
    for row, n in zip(result.rows, (16, 32, 64)):
        assert abs(row.states_infinite - REFERENCE_TABLE[n].states_infinite) <= 2


def test_calibrate_equal_weights_small_grid():
    # utilization and mean-jobs errors tip the balance towards the slower rate
    result = calibrate(rate_grid=[Fraction(1, 4), DEFAULT_RATE, Fraction(1, 3)], shapes=["uniform"],
                       ns=[16, 32, 64])
    assert result.best_rate == Fraction(1, 4)
    assert result.objective == pytest.approx(0.521374, abs=1e-6)
    assert result.scores[(DEFAULT_RATE, "uniform")] == pytest.approx(0.637356, abs=1e-6)


def test_calibrate_single_row():
    result = calibrate(rate_grid=[DEFAULT_RATE], shapes=["uniform"], ns=[16])
    assert list(result.per_n_errors) == [16]
    e = result.per_n_errors[16]
    assert result.objective == pytest.approx(sum(e.values()))
    assert e["transitions"] == 0
    assert e["states"] == pytest.approx(1 / 9)


def test_calibrate_empty_grid():
    with pytest.raises(EmptyGrid):
        calibrate(rate_grid=[])
    with pytest.raises(EmptyGrid):
        calibrate(shapes=[])


def test_calibrate_rejects_bad_inputs():
    with pytest.raises(InvalidConfig):
        calibrate(ns=[17])
    with pytest.raises(InvalidConfig):
        calibrate(shapes=["zigzag"])
    with pytest.raises(InvalidConfig):
        calibrate(ns=[16], weights={"speed": 1})


def test_calibrate_parallel_matches_serial():
    kwargs = {"rate_grid": [Fraction(1, 4), DEFAULT_RATE], "shapes": ["uniform", "tapered"], "ns": [16, 32]}
    serial = calibrate(**kwargs)
    parallel = calibrate(**kwargs, n_jobs=2)
    assert serial.scores == parallel.scores
    assert calibration_csv(serial) == calibration_csv(parallel)


def test_metrics_rows_are_queue_metrics():
    report = sweep_buffers(generate_adder(3), SweepConfig((1,)))
    assert isinstance(report.rows[0].metrics, QueueMetrics)
    assert report.rows[0].warning is None and report.rows[0].error is None


def test_periodic_rows_carry_a_warning():
    report = sweep_buffers(SlotTimeline.from_string("c"), SweepConfig((0, 1), EmulatorConfig(1)))
    assert all("periodic" in r.warning for r in report.rows)
    assert all(r.metrics is not None for r in report.rows)


def test_failing_rows_do_not_abort_the_sweep():
    report = sweep_buffers(SlotTimeline(()), SweepConfig((0, 2)))
    assert report.baseline_depth == 0
    assert [r.error is not None for r in report.rows] == [True, True]
    assert report.to_csv().splitlines()[1] == "0,0,,,,,,,,,"


def test_golden_rows_match_visit_frequencies():
    # on a closed walk the stationary law is the visit frequency of each occupancy
    from collections import Counter
    from pathlib import Path

    golden = (Path(__file__).parent / "golden" / "sweep_adder16.csv").read_text().splitlines()[1:]
    slots = sequentialize(generate_adder(16)).slots
    for line in golden:
        cells = line.split(",")
        cap = INF if cells[1] == "inf" else int(cells[1])
        occ = oracles.simulate(slots, DEFAULT_RATE, cap)["occupancy"]
        freq = Counter(occ)
        total = len(occ)
        assert float(cells[5]) == pytest.approx(freq[0] / total, abs=5e-7)
        assert float(cells[6]) == pytest.approx(freq[max(occ)] / total, abs=5e-7)
        assert float(cells[7]) == pytest.approx(sum(k * c for k, c in freq.items()) / total, abs=5e-7)
        assert int(cells[9]) == len(freq)
        assert int(cells[2]) == len(occ) - 1 == int(cells[10])
