"""Emulation and queueing analysis of T-state distillery buffers."""

__version__ = "0.1.0"

from .circuit import (
    AdderProfile,
    Circuit,
    CircuitStats,
    Gate,
    SlotTimeline,
    circuit_stats,
    generate_adder,
    parse_circuit,
    sequentialize,
    serialize_circuit,
)
from .emulator import (
    EmulationTrace,
    EmulatorConfig,
    Lookahead,
    ShutdownReport,
    assembly_depth,
    emulate,
    shutdown_time,
)
from .markov import (
    ErgodicityReport,
    QueueMetrics,
    SteadyStateDistribution,
    TransitionMatrix,
    build_chain,
    check_ergodic,
    power_iteration,
    queue_metrics,
    steady_state,
)
from .sweep import (
    REFERENCE_TABLE,
    CalibrationResult,
    SweepConfig,
    SweepReport,
    calibrate,
    optimal_buffer,
    sweep_buffers,
    table1,
)

__all__ = [
    "AdderProfile", "Circuit", "CircuitStats", "Gate", "SlotTimeline", "circuit_stats",
    "generate_adder", "parse_circuit", "sequentialize", "serialize_circuit",
    "EmulationTrace", "EmulatorConfig", "Lookahead", "ShutdownReport", "assembly_depth",
    "emulate", "shutdown_time",
    "ErgodicityReport", "QueueMetrics", "SteadyStateDistribution", "TransitionMatrix",
    "build_chain", "check_ergodic", "power_iteration", "queue_metrics", "steady_state",
    "REFERENCE_TABLE", "CalibrationResult", "SweepConfig", "SweepReport", "calibrate",
    "optimal_buffer", "sweep_buffers", "table1",
]
