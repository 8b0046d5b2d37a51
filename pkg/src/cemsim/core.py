"""Core simulation primitives: clock, step records, component contracts.

All timestamps are integer nanoseconds since the Unix epoch (UTC).  A
:class:`Clock` pairs such a timestamp with the tick resolution shared by
every component of a simulation, so time arithmetic stays exact integer
arithmetic end to end; floating-point time never enters the stepping loop.

Electrical quantities use strict SI units throughout: volts, amperes,
watts, volt-amperes, joules, seconds.  Kilowatt-hours appear only at the
pricing and reporting boundaries.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

NS_PER_SECOND = 1_000_000_000
JOULES_PER_KWH = 3.6e6
SECONDS_PER_HOUR = 3600.0


class ConfigurationError(Exception):
    """A scenario, schedule, or component configuration is invalid."""


class SimulationError(Exception):
    """A simulation failed at runtime with a valid configuration."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


def _require_finite(value: float, name: str) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


# ---------------------------------------------------------------------------
# Clock
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Clock:
    """Immutable simulation time cursor.

    ticks_since_epoch : int
        Absolute position on the timeline in nanoseconds since the epoch.
    tick_resolution : int
        Duration of one simulation tick in nanoseconds (default: one
        second).  Components of one simulation share a single resolution.

    Advancing is exact: ``advance(a).advance(b)`` lands on the same
    nanosecond as ``advance(a + b)`` for any positive integers.
    """

    ticks_since_epoch: int
    tick_resolution: int = NS_PER_SECOND

    def __post_init__(self) -> None:
        _require(isinstance(self.ticks_since_epoch, int), "ticks_since_epoch must be an int")
        _require(isinstance(self.tick_resolution, int), "tick_resolution must be an int")
        _require(self.ticks_since_epoch >= 0, "ticks_since_epoch must be >= 0")
        _require(self.tick_resolution > 0, "tick_resolution must be > 0")

    def advance(self, step_ticks: int) -> "Clock":
        """Return a new clock ``step_ticks`` ticks later."""
        if not (isinstance(step_ticks, int) and step_ticks >= 1):
            raise ValueError(f"step_ticks must be a positive integer, got {step_ticks!r}")
        # Hot path: both fields derive from already-validated state, so
        # skip the dataclass constructor and its re-validation.
        clock = object.__new__(Clock)
        object.__setattr__(
            clock, "ticks_since_epoch", self.ticks_since_epoch + step_ticks * self.tick_resolution
        )
        object.__setattr__(clock, "tick_resolution", self.tick_resolution)
        return clock

    def step_seconds(self, step_ticks: int) -> float:
        """Duration of ``step_ticks`` ticks, in seconds."""
        return step_ticks * self.tick_resolution / NS_PER_SECOND

    def seconds_since_epoch(self) -> float:
        return self.ticks_since_epoch / NS_PER_SECOND

    @classmethod
    def from_epoch_seconds(cls, seconds: float, tick_resolution: int = NS_PER_SECOND) -> "Clock":
        """Build a clock from float epoch seconds.

        Lossless for instants representable at nanosecond resolution in a
        double; round-trips with :meth:`seconds_since_epoch` in that range.
        """
        return cls(int(round(seconds * NS_PER_SECOND)), tick_resolution)

    def to_datetime64(self) -> np.datetime64:
        return np.datetime64(self.ticks_since_epoch, "ns")

    # Ordering compares instants, independent of resolution.
    def __lt__(self, other: "Clock") -> bool:
        return self.ticks_since_epoch < other.ticks_since_epoch

    def __le__(self, other: "Clock") -> bool:
        return self.ticks_since_epoch <= other.ticks_since_epoch

    def __gt__(self, other: "Clock") -> bool:
        return self.ticks_since_epoch > other.ticks_since_epoch

    def __ge__(self, other: "Clock") -> bool:
        return self.ticks_since_epoch >= other.ticks_since_epoch


def time_ns(value: "Clock | int") -> int:
    """Coerce a Clock or raw nanosecond timestamp to int nanoseconds."""
    if isinstance(value, int):
        return value
    if isinstance(value, Clock):
        return value.ticks_since_epoch
    raise ValueError(f"expected Clock or int nanoseconds, got {type(value).__name__}")


# ---------------------------------------------------------------------------
# Step records
# ---------------------------------------------------------------------------


class BatteryMode(Enum):
    IDLE = "idle"
    CHARGE = "charge"
    DISCHARGE = "discharge"


@dataclass(frozen=True, slots=True)
class PowerSourceStepResult:
    """Generation during the step, reported at the step's end.

    voltage : V, current : A, power : W.  The three fields are carried
    independently; no V*I identity is imposed on recorded data.
    """

    voltage: float
    current: float
    power: float

    def __post_init__(self) -> None:
        # One combined check on the hot path; diagnose the field only on failure.
        v, c, p = self.voltage, self.current, self.power
        if math.isfinite(v) and v >= 0.0 and math.isfinite(c) and c >= 0.0 and math.isfinite(p) and p >= 0.0:
            return
        for name in ("voltage", "current", "power"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True, slots=True)
class LoadStepResult:
    """Power the load demanded during the step (W / VA)."""

    requested_active_power: float
    requested_apparent_power: float

    def __post_init__(self) -> None:
        active, apparent = self.requested_active_power, self.requested_apparent_power
        if math.isfinite(active) and math.isfinite(apparent) and 0.0 <= active <= apparent:
            return
        _require_finite(active, "requested_active_power")
        _require_finite(apparent, "requested_apparent_power")
        _require(active >= 0.0, "requested_active_power must be >= 0")
        _require(
            apparent >= active,
            "requested_apparent_power must be >= requested_active_power",
        )


@dataclass(frozen=True, slots=True)
class GridStepInput:
    """Active/apparent power requested from the grid for the step (W / VA)."""

    requested_active_power: float
    requested_apparent_power: float

    def __post_init__(self) -> None:
        active, apparent = self.requested_active_power, self.requested_apparent_power
        if math.isfinite(active) and math.isfinite(apparent) and active >= 0.0 and apparent >= 0.0:
            return
        _require_finite(active, "requested_active_power")
        _require_finite(apparent, "requested_apparent_power")
        _require(active >= 0.0, "requested_active_power must be >= 0")
        _require(apparent >= 0.0, "requested_apparent_power must be >= 0")


@dataclass(frozen=True, slots=True)
class GridStepResult:
    """Power the grid actually delivered during the step (W / VA)."""

    delivered_active_power: float
    delivered_apparent_power: float

    def __post_init__(self) -> None:
        active, apparent = self.delivered_active_power, self.delivered_apparent_power
        if math.isfinite(active) and math.isfinite(apparent) and 0.0 <= active <= apparent:
            return
        _require_finite(active, "delivered_active_power")
        _require_finite(apparent, "delivered_apparent_power")
        _require(active >= 0.0, "delivered_active_power must be >= 0")
        _require(
            apparent >= active,
            "delivered_apparent_power must be >= delivered_active_power",
        )


@dataclass(frozen=True, slots=True)
class BatteryStepInput:
    """Commanded battery operation for the step: mode plus DC current (A, >= 0)."""

    mode: BatteryMode
    current: float

    def __post_init__(self) -> None:
        current = self.current
        if type(self.mode) is BatteryMode and math.isfinite(current) and current >= 0.0:
            return
        _require(isinstance(self.mode, BatteryMode), "mode must be a BatteryMode")
        _require_finite(current, "current")
        _require(current >= 0.0, "current must be >= 0")


@dataclass(frozen=True, slots=True)
class BatteryStepResult:
    """Battery state after the step.

    soc is the state of charge as a fraction of capacity.  delta_energy
    (J) and delta_charge (C) are the post-clamp changes over the step;
    both are positive when the battery absorbed energy and negative when
    it released energy.
    """

    soc: float
    voltage: float
    delta_energy: float
    delta_charge: float

    def __post_init__(self) -> None:
        soc, voltage, de, dq = self.soc, self.voltage, self.delta_energy, self.delta_charge
        if (
            0.0 <= soc <= 1.0
            and math.isfinite(voltage)
            and voltage > 0.0
            and math.isfinite(de)
            and math.isfinite(dq)
            and (de == 0.0 or dq == 0.0 or (de > 0.0) == (dq > 0.0))
        ):
            return
        for name in ("soc", "voltage", "delta_energy", "delta_charge"):
            _require_finite(getattr(self, name), name)
        if not 0.0 <= soc <= 1.0:
            raise ValueError(f"soc must be within [0, 1], got {soc!r}")
        _require(voltage > 0.0, "voltage must be > 0")
        _require(
            (de > 0.0) == (dq > 0.0),
            "delta_energy and delta_charge must agree in sign",
        )


@dataclass(frozen=True, slots=True)
class InverterStepInput:
    """Everything the inverter sees when allocating power for a step.

    Generation and load are the results just produced for the current
    step; battery and grid results are from the previous step (the
    battery result carries the state of charge the dispatch is based on).
    grid_to_battery_power (W, grid side) optionally commands charging the
    battery from the grid during this step.
    """

    power_source: PowerSourceStepResult
    battery: BatteryStepResult
    grid: GridStepResult
    load: LoadStepResult
    grid_to_battery_power: float = 0.0

    def __post_init__(self) -> None:
        g2b = self.grid_to_battery_power
        if math.isfinite(g2b) and g2b >= 0.0:
            return
        _require_finite(g2b, "grid_to_battery_power")
        _require(g2b >= 0.0, "grid_to_battery_power must be >= 0")


@dataclass(frozen=True, slots=True)
class InverterStepResult:
    """Inverter allocation for the step.

    grid_input is the request forwarded to the grid, battery_input the
    command forwarded to the battery, pv_power_drawn the generation
    actually used (W, source side; at most the offered power).
    """

    grid_input: GridStepInput
    battery_input: BatteryStepInput
    pv_power_drawn: float

    def __post_init__(self) -> None:
        drawn = self.pv_power_drawn
        if math.isfinite(drawn) and drawn >= 0.0:
            return
        _require_finite(drawn, "pv_power_drawn")
        _require(drawn >= 0.0, "pv_power_drawn must be >= 0")


@dataclass(frozen=True, slots=True)
class ContextRecord:
    """A timestamped note about a subsystem, valid over [begins_at, ends_at).

    recorded_at is when the note became known; begins_at/ends_at bound the
    interval it talks about.  recorded_at may lie inside the interval
    (notes about something already running) but never at or after its end:
    a note that only becomes known once its interval is over is rejected.
    payload is a read-only mapping; by convention a "text" key holds the
    human-readable description.
    """

    recorded_at_ns: int
    begins_at_ns: int
    ends_at_ns: int
    subsystem_id: int
    payload: Mapping[str, object]

    def __post_init__(self) -> None:
        for name in ("recorded_at_ns", "begins_at_ns", "ends_at_ns"):
            _require(isinstance(getattr(self, name), int), f"{name} must be an int")
        _require(isinstance(self.subsystem_id, int), "subsystem_id must be an int")
        _require(
            self.begins_at_ns < self.ends_at_ns,
            f"begins_at_ns ({self.begins_at_ns}) must precede ends_at_ns ({self.ends_at_ns})",
        )
        _require(
            self.recorded_at_ns < self.ends_at_ns,
            f"recorded_at_ns ({self.recorded_at_ns}) must precede ends_at_ns ({self.ends_at_ns})",
        )
        object.__setattr__(self, "payload", MappingProxyType(dict(self.payload)))

    def text(self) -> str:
        return str(self.payload.get("text", ""))


# ---------------------------------------------------------------------------
# Component contracts
# ---------------------------------------------------------------------------


class SystemComponent(ABC):
    """A steppable member of a simulated installation.

    Components advance in lockstep: each ``step`` call covers the same
    ``step_ticks`` ticks of the shared clock and reports values for the
    end of that interval.
    """

    @abstractmethod
    def step(self, step_ticks: int, *args, **kwargs):
        raise NotImplementedError


class PowerSource(SystemComponent):
    @abstractmethod
    def step(self, step_ticks: int) -> PowerSourceStepResult: ...


class Load(SystemComponent):
    @abstractmethod
    def step(self, step_ticks: int) -> LoadStepResult: ...


class Grid(SystemComponent):
    @abstractmethod
    def step(self, step_ticks: int, grid_input: GridStepInput) -> GridStepResult: ...


class Battery(SystemComponent):
    @abstractmethod
    def step(self, step_ticks: int, battery_input: BatteryStepInput) -> BatteryStepResult: ...

    @abstractmethod
    def snapshot(self) -> BatteryStepResult:
        """Current state as an idle result, without advancing time.

        Used to seed the first step's dispatch, which needs a state of
        charge before any step has run.
        """


class Inverter(SystemComponent):
    @abstractmethod
    def step(self, step_ticks: int, inverter_input: InverterStepInput) -> InverterStepResult: ...


class Context(SystemComponent):
    @abstractmethod
    def step(self, step_ticks: int) -> tuple[ContextRecord, ...]: ...


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def reactive_power(apparent_power: float, active_power: float) -> float:
    """Reactive power Q = sqrt(S^2 - P^2) in var.

    Requires 0 <= active_power <= apparent_power; anything else has no
    real solution and raises ValueError.
    """
    _require_finite(apparent_power, "apparent_power")
    _require_finite(active_power, "active_power")
    _require(active_power >= 0.0, "active_power must be >= 0")
    _require(
        apparent_power >= active_power,
        f"apparent_power ({apparent_power!r}) must be >= active_power ({active_power!r})",
    )
    return math.sqrt(apparent_power * apparent_power - active_power * active_power)


def context_query(records: Iterable[ContextRecord], now: "Clock | int") -> list[ContextRecord]:
    """Records known at ``now`` whose interval has not yet ended.

    Keeps records with ``recorded_at <= now < ends_at``: the currently
    active ones and the announced-but-future ones, never records that only
    become known later (no future information leaks into a query at
    ``now``).  Sorted by (begins_at, recorded_at, insertion order).
    """
    now_ns = time_ns(now)
    selected = [
        (record.begins_at_ns, record.recorded_at_ns, index, record)
        for index, record in enumerate(records)
        if record.recorded_at_ns <= now_ns < record.ends_at_ns
    ]
    selected.sort(key=lambda item: item[:3])
    return [item[3] for item in selected]


def grid_energy_cost(price_per_kwh: float, power_w: float, duration_s: float) -> float:
    """Cost of drawing ``power_w`` for ``duration_s`` at a kWh price.

    Single shared formula so that planning and metering agree bit for bit.
    """
    return price_per_kwh * (power_w * duration_s) / JOULES_PER_KWH


class CompensatedSum:
    """Kahan-Neumaier compensated accumulator.

    Summing the same values in the same order always lands on the same
    float, and the compensation keeps long runs of small increments from
    drifting.  Used for every cumulative energy/cost aggregate so that
    "sum of the parts equals the final total" holds exactly.
    """

    __slots__ = ("_sum", "_compensation")

    def __init__(self, initial: float = 0.0) -> None:
        self._sum = float(initial)
        self._compensation = 0.0

    def add(self, value: float) -> None:
        total = self._sum + value
        if abs(self._sum) >= abs(value):
            self._compensation += (self._sum - total) + value
        else:
            self._compensation += (value - total) + self._sum
        self._sum = total

    @property
    def value(self) -> float:
        return self._sum + self._compensation


def compensated_total(values: Iterable[float]) -> float:
    """Kahan-Neumaier sum of ``values`` in iteration order."""
    acc = CompensatedSum()
    for value in values:
        acc.add(value)
    return acc.value
