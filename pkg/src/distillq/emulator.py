"""Discrete-time emulation of the distillery, buffer and T-consuming main track.

Each step runs two phases in a fixed order:

1. distillery: deliver a held state if there is room, otherwise start a new
   distillation when the policy allows; a running distillation counts down and
   on completion either delivers or holds its state;
2. main track: a clifford-slot always advances, a t-slot consumes one state
   or stalls.

Occupancy (jobs in the system) is recorded after both phases. A finite buffer
of capacity ``b`` admits ``b + 1`` jobs: ``b`` waiting plus the one in service.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import accumulate

from ._validation import (
    INF,
    check_capacity,
    check_nonnegative_int,
    check_rate,
    format_capacity,
    format_rate,
)
from .circuit import SlotTimeline
from .exceptions import InvalidConfig, ProductionExhausted

DEFAULT_RATE = Fraction(16, 63)
STOP_WHEN_FULL = "stop-when-full"


@dataclass(frozen=True)
class Lookahead:
    """Start a distillation only when the T demand in the next ``window``
    slots exceeds the states already available or on their way."""

    window: int

    def __post_init__(self):
        if isinstance(self.window, bool) or not isinstance(self.window, int) or self.window < 1:
            raise InvalidConfig(f"lookahead window must be a positive integer, got {self.window!r}")

    def __str__(self) -> str:
        return f"lookahead:{self.window}"


def parse_policy(policy) -> str | Lookahead:
    """Accept ``"stop-when-full"``, ``"lookahead:W"``, ``{"lookahead": W}`` or a
    :class:`Lookahead`."""
    if isinstance(policy, Lookahead) or policy == STOP_WHEN_FULL:
        return policy
    if isinstance(policy, dict) and set(policy) == {"lookahead"}:
        return Lookahead(policy["lookahead"])
    if isinstance(policy, str) and policy.startswith("lookahead"):
        _, _, window = policy.partition(":")
        if window.strip().isdigit():
            return Lookahead(int(window))
    raise InvalidConfig(f"unknown policy {policy!r}")


@dataclass(frozen=True)
class EmulatorConfig:
    production_rate: Fraction = DEFAULT_RATE
    buffer_capacity: int | float = INF
    policy: str | Lookahead = STOP_WHEN_FULL
    warmup_remaining: int = 1
    initial_stock: int = 0

    def __post_init__(self):
        object.__setattr__(self, "production_rate", check_rate(self.production_rate))
        object.__setattr__(self, "buffer_capacity", check_capacity(self.buffer_capacity))
        object.__setattr__(self, "policy", parse_policy(self.policy))
        object.__setattr__(
            self, "warmup_remaining", check_nonnegative_int(self.warmup_remaining, "warmup")
        )
        object.__setattr__(self, "initial_stock", check_nonnegative_int(self.initial_stock, "stock"))
        if self.initial_stock > self.buffer_capacity:
            raise InvalidConfig(
                f"initial stock {self.initial_stock} exceeds buffer capacity {self.buffer_capacity}"
            )

    @property
    def system_capacity(self) -> int | float:
        """Maximum jobs in the system: waiting states plus the one in service."""
        return self.buffer_capacity + 1

    def with_capacity(self, capacity) -> "EmulatorConfig":
        stock = self.initial_stock
        capacity = check_capacity(capacity)
        return EmulatorConfig(
            self.production_rate, capacity, self.policy, self.warmup_remaining, min(stock, capacity)
        )

    def to_dict(self) -> dict:
        policy = self.policy
        return {
            "rate": format_rate(self.production_rate),
            "buffer": format_capacity(self.buffer_capacity),
            "policy": policy if isinstance(policy, str) else {"lookahead": policy.window},
            "warmup": self.warmup_remaining,
            "stock": self.initial_stock,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EmulatorConfig":
        known = {"rate", "buffer", "policy", "warmup", "stock"}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        if "rate" in data:
            kwargs["production_rate"] = data["rate"]
        if "buffer" in data:
            kwargs["buffer_capacity"] = data["buffer"]
        if "policy" in data:
            kwargs["policy"] = data["policy"]
        if "warmup" in data:
            kwargs["warmup_remaining"] = data["warmup"]
        if "stock" in data:
            kwargs["initial_stock"] = data["stock"]
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "EmulatorConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise InvalidConfig("config JSON must be an object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class EmulationTrace:
    occupancy: tuple[int, ...]
    stall_steps: int
    pause_steps: int
    produced: int
    consumed: int
    assembly_depth: int
    held_at_end: bool = False
    events: tuple[str, ...] = field(default=(), repr=False)

    def to_csv(self) -> str:
        """One row per step; step 0 is the initial state."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", "occupancy", "event"])
        events = ("start",) + self.events if self.events else ("",) * len(self.occupancy)
        for step, (k, ev) in enumerate(zip(self.occupancy, events)):
            writer.writerow([step, k, ev])
        return buf.getvalue()

    @classmethod
    def occupancy_from_csv(cls, text: str) -> list[int]:
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or "occupancy" not in rows[0]:
            raise InvalidConfig("trace CSV needs an 'occupancy' column")
        try:
            return [int(r["occupancy"]) for r in rows]
        except ValueError as exc:
            raise InvalidConfig(f"bad occupancy value: {exc}") from None


def distillation_durations(rate: Fraction):
    """Yield per-distillation durations whose running sum hits ``ceil(k / rate)``.

    For 16/63 this is fifteen 4s and one 3 per cycle: 16 states every 63 steps.
    """
    p, q = rate.numerator, rate.denominator
    k = 1
    prev = 0
    while True:
        nxt = -(-k * q // p)  # ceil(k * q / p)
        yield nxt - prev
        prev = nxt
        k += 1


def emulate(
    timeline: SlotTimeline,
    config: EmulatorConfig | None = None,
    *,
    production_cutoff: int | None = None,
) -> EmulationTrace:
    """Emulate ``timeline`` under ``config``.

    Args:
        timeline: sequential slots to execute.
        config: distillery and buffer settings; defaults to ``EmulatorConfig()``.
        production_cutoff: if given, the distillery is switched off after this
            step: nothing starts and a running distillation is abandoned. States
            already held may still be delivered.

    Raises:
        ProductionExhausted: a T gate can never be served because production
            was cut off.
    """
    if config is None:
        config = EmulatorConfig()
    slots = timeline.slots
    n = len(slots)
    cap = config.system_capacity
    policy = config.policy
    window = policy.window if isinstance(policy, Lookahead) else 0
    prefix = [0, *accumulate(slots)] if window else None
    durations = distillation_durations(config.production_rate)

    occ = config.initial_stock
    occupancy = [occ]
    events = []
    countdown = 0  # steps left in the running distillation; 0 means idle
    started = 0
    held = False
    produced = consumed = stalls = pauses = 0
    if config.warmup_remaining == 0:
        # first state was ready before step 1
        held, started, produced = True, 1, 1

    i = t = 0
    while i < n:
        t += 1
        step_events = []
        producing = production_cutoff is None or t <= production_cutoff
        if not producing:
            countdown = 0

        # distillery phase
        delivered = False
        if held and occ < cap:
            occ += 1
            held = False
            delivered = True
            step_events.append("deliver")
        elif producing and countdown == 0 and not held:
            if window:
                demand = prefix[min(i + window, n)] - prefix[i]
                allowed = demand > occ
            else:
                allowed = occ < cap
            if allowed:
                countdown = config.warmup_remaining if started == 0 else next(durations)
                started += 1
        busy = countdown > 0
        if busy:
            countdown -= 1
            if countdown == 0:
                produced += 1
                if occ < cap and not delivered:
                    occ += 1
                    step_events.append("deliver")
                else:
                    held = True
        if held:
            step_events.append("hold")
            pauses += 1
        elif producing and not busy and not delivered:
            step_events.append("pause")
            pauses += 1

        # main track
        if slots[i]:
            if occ > 0:
                occ -= 1
                consumed += 1
                i += 1
                step_events.append("consume")
            else:
                if not producing and not held:
                    raise ProductionExhausted(
                        f"T gate at slot {i} starves: production stopped after step {production_cutoff}"
                    )
                stalls += 1
                step_events.append("stall")
        else:
            i += 1

        occupancy.append(occ)
        events.append("+".join(step_events) or "idle")

    return EmulationTrace(
        occupancy=tuple(occupancy),
        stall_steps=stalls,
        pause_steps=pauses,
        produced=produced,
        consumed=consumed,
        assembly_depth=t,
        held_at_end=held,
        events=tuple(events),
    )


def assembly_depth(trace: EmulationTrace) -> int:
    return trace.assembly_depth


@dataclass(frozen=True)
class ShutdownReport:
    shutdown_step: int
    verified: bool
    depth: int
    depth_with_shutdown: int | None
    distillations_saved: int


def shutdown_time(timeline: SlotTimeline, config: EmulatorConfig | None = None) -> ShutdownReport:
    """Find the earliest step after which the distillery can be switched off.

    That is the first step whose occupancy already covers every T gate still to
    come. The answer is checked by re-emulating with production cut off there.
    """
    if config is None:
        config = EmulatorConfig()
    trace = emulate(timeline, config)
    remaining = timeline.t_count
    shutdown = trace.assembly_depth
    for step, k in enumerate(trace.occupancy):
        if step > 0 and "consume" in trace.events[step - 1].split("+"):
            remaining -= 1
        if k >= remaining:
            shutdown = step
            break
    try:
        cut = emulate(timeline, config, production_cutoff=shutdown)
    except ProductionExhausted:
        return ShutdownReport(shutdown, False, trace.assembly_depth, None, 0)
    return ShutdownReport(
        shutdown_step=shutdown,
        verified=cut.assembly_depth == trace.assembly_depth,
        depth=trace.assembly_depth,
        depth_with_shutdown=cut.assembly_depth,
        distillations_saved=trace.produced - cut.produced,
    )
