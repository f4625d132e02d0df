"""``distillq`` command line.

Exit status: 0 on success, 2 for bad input/arguments/config, 3 when
``--strict-ergodic`` is given and a chain is not ergodic.

The pipeline is fully deterministic. ``DISTILLQ_SEED`` is reserved and ignored.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import sys
import warnings
from pathlib import Path

from . import __version__
from ._validation import check_rate, format_capacity, format_rate, parse_capacity_range
from .circuit import SHAPES, AdderProfile, generate_adder, parse_circuit, sequentialize, serialize_circuit
from .emulator import EmulationTrace, EmulatorConfig, emulate
from .exceptions import DistillqError, InvalidConfig
from .markov import TransitionMatrix, build_chain, check_ergodic, queue_metrics, steady_state
from .sweep import (
    DEFAULT_RATE_GRID,
    REFERENCE_QUBITS,
    REFERENCE_TABLE,
    SweepConfig,
    calibrate,
    calibration_csv,
    optimal_buffer,
    reference_csv,
    sweep_buffers,
    table1,
    table1_csv,
)

EXIT_OK, EXIT_INPUT, EXIT_NOT_ERGODIC = 0, 2, 3


class NotErgodic(Exception):
    pass


# ---------------------------------------------------------------- helpers

def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _round(x: float) -> float:
    return float(f"{x:.6f}")


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InvalidConfig(f"cannot read {path}: {exc.strerror}") from None


def _config_from_args(args, buffer=None) -> EmulatorConfig:
    data = {}
    if getattr(args, "config", None):
        text = _read(args.config)
        try:
            loaded = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{args.config} is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise InvalidConfig("--config must hold a JSON object")
        data.update(loaded)
    explicit = {
        "rate": args.rate,
        "buffer": buffer,
        "policy": args.policy,
        "warmup": args.warmup,
        "stock": args.stock,
    }
    data.update({k: v for k, v in explicit.items() if v is not None})
    return EmulatorConfig.from_dict(data)


def _single_capacity(args):
    if args.buffers is None:
        return None
    caps = parse_capacity_range(args.buffers)
    if len(caps) != 1:
        raise InvalidConfig(f"this command takes one buffer capacity, got {args.buffers!r}")
    return format_capacity(caps[0])


def _profile(args) -> AdderProfile:
    return AdderProfile(args.profile, extra_stage=args.extra_stage)


def _load_circuit(args):
    if args.circuit:
        return parse_circuit(_read(args.circuit), label=Path(args.circuit).stem)
    if args.qubits is not None:
        return generate_adder(args.qubits, _profile(args))
    raise InvalidConfig("give a circuit with -c/--circuit or an adder size with -n/--qubits")


def _emit(args, text: str, outputs: list) -> None:
    if args.out:
        Path(args.out).write_text(text)
        outputs.append(args.out)
    else:
        sys.stdout.write(text)


def _digest(effective: dict) -> str:
    canonical = json.dumps(effective, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


def _write_manifest(argv, args, effective, inputs, outputs) -> None:
    if not outputs:
        return
    manifest = {
        "command": " ".join(["distillq", *argv]),
        "config_digest": _digest(effective),
        "inputs": inputs,
        "outputs": outputs,
        "tool_version": __version__,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    Path(outputs[0] + ".manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _inputs(args) -> list:
    return [p for p in (getattr(args, "circuit", None), getattr(args, "matrix", None),
                        getattr(args, "trace", None), getattr(args, "config", None)) if p]


def _check_ergodic(args, report, where: str) -> None:
    if args.strict_ergodic and not report.ergodic:
        raise NotErgodic(
            f"{where}: chain not ergodic (irreducible={report.irreducible}, period={report.period})"
        )


# ---------------------------------------------------------------- commands

def cmd_gen_adder(args, outputs):
    circuit = generate_adder(args.qubits, _profile(args))
    _emit(args, serialize_circuit(circuit), outputs)
    return {"qubits": args.qubits, "profile": args.profile, "extra_stage": args.extra_stage}


def cmd_emulate(args, outputs):
    circuit = _load_circuit(args)
    config = _config_from_args(args, _single_capacity(args))
    trace = emulate(sequentialize(circuit), config)
    if args.format == "json":
        text = json.dumps({
            "config": config.to_dict(),
            "assembly_depth": trace.assembly_depth,
            "stall_steps": trace.stall_steps,
            "pause_steps": trace.pause_steps,
            "produced": trace.produced,
            "consumed": trace.consumed,
            "held_at_end": trace.held_at_end,
            "occupancy": list(trace.occupancy),
        }, indent=2) + "\n"
    else:
        text = trace.to_csv()
    _emit(args, text, outputs)
    return {"config": config.to_dict(), "circuit": serialize_circuit(circuit)}


def _chain_from_args(args):
    if args.trace:
        occupancy = EmulationTrace.occupancy_from_csv(_read(args.trace))
        return build_chain(occupancy, close_cycle=not args.open_trace), {"trace": occupancy}
    circuit = _load_circuit(args)
    config = _config_from_args(args, _single_capacity(args))
    trace = emulate(sequentialize(circuit), config)
    effective = {"config": config.to_dict(), "circuit": serialize_circuit(circuit)}
    return build_chain(trace, close_cycle=not args.open_trace), effective


def cmd_chain(args, outputs):
    matrix, effective = _chain_from_args(args)
    _check_ergodic(args, check_ergodic(matrix), "chain")
    data = matrix.to_dict()
    data["probs"] = [[_round(p) for p in row] for row in data["probs"]]
    _emit(args, json.dumps(data, indent=2, sort_keys=True) + "\n", outputs)
    effective["open_trace"] = args.open_trace
    return effective


def cmd_steady(args, outputs):
    if args.matrix:
        matrix = TransitionMatrix.from_json(_read(args.matrix))
        effective = {"matrix": matrix.to_dict()}
    else:
        matrix, effective = _chain_from_args(args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        nu = steady_state(matrix)
    _check_ergodic(args, nu.ergodicity, "steady")
    metrics = queue_metrics(nu, matrix)
    if args.format == "csv":
        cols = ("v0", "v_full", "mean_jobs", "utilization", "num_states", "num_transitions")
        values = metrics.to_dict()
        text = ",".join(cols) + "\n" + ",".join(
            _fmt(values[c]) if isinstance(values[c], float) else str(values[c]) for c in cols
        ) + "\n"
    else:
        text = json.dumps({
            "states": list(nu.states),
            "nu": [_round(v) for v in nu.nu],
            "residual": float(f"{nu.residual:.3e}"),
            "ergodic": nu.ergodicity.ergodic,
            "period": nu.ergodicity.period,
            "warning": nu.warning,
            "metrics": metrics.to_dict(),
        }, indent=2) + "\n"
    _emit(args, text, outputs)
    return effective


def cmd_sweep(args, outputs):
    circuit = _load_circuit(args)
    caps = parse_capacity_range(args.buffers or "0..8,inf")
    base = _config_from_args(args)
    report = sweep_buffers(circuit, SweepConfig(tuple(caps), base))
    for row in report.rows:
        if args.strict_ergodic and row.warning:
            raise NotErgodic(f"sweep capacity {format_capacity(row.capacity)}: {row.warning}")
        if row.error:
            print(f"warning: capacity {format_capacity(row.capacity)}: {row.error}", file=sys.stderr)
    if args.format == "json":
        text = json.dumps({
            "qubits": report.qubits,
            "baseline_depth": report.baseline_depth,
            "optimal_buffer": format_capacity(optimal_buffer(report)),
            "rows": [
                {
                    "capacity": format_capacity(r.capacity),
                    "depth": r.assembly_depth,
                    "stalls": r.stall_steps,
                    "pauses": r.pause_steps,
                    **(r.metrics.to_dict() if r.metrics else {}),
                    "warning": r.warning,
                    "error": r.error,
                }
                for r in report.rows
            ],
        }, indent=2) + "\n"
    else:
        text = report.to_csv()
    _emit(args, text, outputs)
    return {"config": base.to_dict(), "capacities": [format_capacity(c) for c in caps],
            "circuit": serialize_circuit(circuit)}


def _items(text: str) -> list:
    return [x.strip() for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in _items(text)]
    except ValueError:
        raise InvalidConfig(f"expected comma-separated integers, got {text!r}") from None


def cmd_calibrate(args, outputs):
    rates = [check_rate(r) for r in _items(args.rates)] if args.rates is not None else list(DEFAULT_RATE_GRID)
    shapes = _items(args.profiles) if args.profiles is not None else list(SHAPES)
    ns = _int_list(args.ns) if args.ns is not None else None
    result = calibrate(rate_grid=rates, shapes=shapes, ns=ns, n_jobs=args.jobs)
    if args.format == "csv":
        text = calibration_csv(result)
    else:
        text = json.dumps({
            "best_rate": format_rate(result.best_rate),
            "best_profile": result.best_profile,
            "objective": _round(result.objective),
            "per_n_errors": {
                str(n): {k: _round(v) for k, v in errs.items()} for n, errs in result.per_n_errors.items()
            },
            "scores": [
                {"rate": format_rate(r), "profile": s, "objective": _round(o)}
                for (r, s), o in result.scores.items()
            ],
        }, indent=2) + "\n"
    _emit(args, text, outputs)
    return {"rates": [format_rate(r) for r in rates], "shapes": shapes, "ns": ns}


def cmd_table1(args, outputs):
    if args.reference:
        _emit(args, reference_csv(REFERENCE_TABLE), outputs)
        return {"reference": True}
    ns = _int_list(args.ns) if args.ns is not None else list(REFERENCE_QUBITS)
    base = _config_from_args(args)
    rows = table1(ns, _profile(args), base)
    _emit(args, table1_csv(rows), outputs)
    return {"ns": ns, "profile": args.profile, "config": base.to_dict()}


# ---------------------------------------------------------------- parser

def _add_input(p):
    p.add_argument("-c", "--circuit", help="gate-list (.ctq) file")
    p.add_argument("-n", "--qubits", type=int, help="generate an adder of this size instead")
    _add_profile(p)


def _add_profile(p):
    p.add_argument("--profile", choices=SHAPES, default="uniform", help="adder T-gate layout")
    p.add_argument("--extra-stage", action="store_true", help="n stages instead of n-1 (4n T gates)")


def _add_emulator(p, buffers_help="buffer capacity (integer or inf)"):
    p.add_argument("--rate", help="production rate as p/q or decimal (default 16/63)")
    if buffers_help:
        p.add_argument("--buffers", help=buffers_help)
    p.add_argument("--policy", help="stop-when-full or lookahead:W")
    p.add_argument("--warmup", type=int, help="steps until the first distilled state (default 1)")
    p.add_argument("--stock", type=int, help="states buffered before step 1 (default 0)")
    p.add_argument("--config", help="JSON config; explicit flags take precedence")


def _add_output(p, formats=("csv", "json"), default="csv"):
    p.add_argument("-o", "--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=formats, default=default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distillq",
        description="Emulate T-state distillery buffers and analyse them as Markov chains.",
        epilog="DISTILLQ_SEED is reserved and ignored: every command is deterministic.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-adder", help="write a carry-ripple adder gate list")
    p.add_argument("-n", "--qubits", type=int, required=True)
    _add_profile(p)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_gen_adder)

    p = sub.add_parser("emulate", help="emulate one circuit and export the occupancy trace")
    _add_input(p)
    _add_emulator(p)
    _add_output(p)
    p.set_defaults(func=cmd_emulate)

    for name, func, help_text in (
        ("chain", cmd_chain, "export the transition matrix of an emulation"),
        ("steady", cmd_steady, "steady-state distribution and queue metrics"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_input(p)
        _add_emulator(p)
        p.add_argument("--trace", help="occupancy trace CSV instead of a circuit")
        p.add_argument("--open-trace", action="store_true",
                       help="do not close the trace into a regenerative cycle")
        p.add_argument("--strict-ergodic", action="store_true", help="exit 3 if the chain is not ergodic")
        if name == "steady":
            p.add_argument("--matrix", help="transition matrix JSON (states/probs)")
            _add_output(p, default="json")
        else:
            p.add_argument("-o", "--out")
            p.set_defaults(format="json")
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="re-emulate over a range of buffer capacities")
    _add_input(p)
    _add_emulator(p, buffers_help="capacities, e.g. 0..8,inf (default)")
    p.add_argument("--strict-ergodic", action="store_true")
    _add_output(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="fit production rate and profile to the reference table")
    p.add_argument("--rates", help="comma-separated rates, e.g. 1/4,16/63,1/3")
    p.add_argument("--profiles", help="comma-separated shapes (default: all)")
    p.add_argument("--ns", help="comma-separated qubit counts (default: all reference rows)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    _add_output(p, default="json")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("table1", help="emit rows in the reference-table schema")
    p.add_argument("--ns", help="comma-separated qubit counts")
    p.add_argument("--reference", action="store_true", help="print the embedded reference rows instead")
    _add_profile(p)
    _add_emulator(p, buffers_help=None)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_table1)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    outputs: list = []
    try:
        effective = args.func(args, outputs)
    except NotErgodic as exc:
        print(f"distillq: {exc}", file=sys.stderr)
        return EXIT_NOT_ERGODIC
    except (DistillqError, json.JSONDecodeError) as exc:
        print(f"distillq: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    effective = {"command": args.command, **effective}
    _write_manifest(argv, args, effective, _inputs(args), outputs)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
