"""Dataset-backed replay: recorded channels played back as components.

A recording is a set of channels keyed by (subsystem_id, channel name),
each a strictly increasing series of (timestamp_ns, value).  Replay
components linearly interpolate their channels at the end of every step
and ignore any commanded inputs beyond the step length itself: they
reproduce what happened, they do not simulate.

File formats (both plain text, floats written with 17 significant digits
so values round-trip bit-exactly):

* time series CSV with header ``timestamp_ns,subsystem_id,channel,value``
* context JSON lines with keys ``recorded_at_ns``, ``begins_at_ns``,
  ``ends_at_ns``, ``subsystem_id``, ``payload`` (payload carries "text"
  plus arbitrary numeric fields)

Channel names follow ``<subsystem>_<measurement>``, e.g. ``battery_soc``
(fraction), ``pv_power`` (W), ``load_active_power`` (W),
``grid_active_power`` (W).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import (
    Battery,
    BatteryStepInput,
    BatteryStepResult,
    Clock,
    Context,
    ContextRecord,
    Grid,
    GridStepInput,
    GridStepResult,
    Load,
    LoadStepResult,
    PowerSource,
    PowerSourceStepResult,
    SimulationError,
    _require,
    context_query,
)

KNOWN_CHANNELS = frozenset(
    {
        "pv_voltage",
        "pv_current",
        "pv_power",
        "load_active_power",
        "load_apparent_power",
        "battery_soc",
        "battery_voltage",
        "battery_current",
        "grid_active_power",
        "grid_apparent_power",
    }
)

DEFAULT_BOUNDARY_TOLERANCE_S = 120.0


class TimeSeriesRangeError(SimulationError):
    """A replay lookup fell outside the recorded range plus tolerance."""


class IngestError(ValueError):
    """A recording file failed validation; the message carries row context."""


@dataclass(frozen=True, slots=True)
class Channel:
    """One recorded measurement series; times strictly increasing."""

    subsystem_id: int
    name: str
    times_ns: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times_ns, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        _require(times.ndim == 1 and values.ndim == 1, "channel arrays must be 1-d")
        _require(len(times) == len(values), "times and values must have equal length")
        _require(len(times) >= 1, f"channel {self.name!r} is empty")
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise ValueError(f"channel {self.name!r} timestamps must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"channel {self.name!r} contains non-finite values")
        object.__setattr__(self, "times_ns", times)
        object.__setattr__(self, "values", values)

    def interpolate(self, t_ns: int, boundary_tolerance_s: float = DEFAULT_BOUNDARY_TOLERANCE_S) -> float:
        return interpolate(self, t_ns, boundary_tolerance_s)


def interpolate(channel: Channel, t_ns: int, boundary_tolerance_s: float = DEFAULT_BOUNDARY_TOLERANCE_S) -> float:
    """Linear interpolation with exact knot hits and bounded clamping.

    Queries at a recorded timestamp return the recorded value exactly.
    Queries within ``boundary_tolerance_s`` before the first or after the
    last sample clamp to the boundary value; anything further out raises
    :class:`TimeSeriesRangeError`.
    """
    times = channel.times_ns
    first = int(times[0])
    last = int(times[-1])
    if t_ns < first or t_ns > last:
        slack_ns = boundary_tolerance_s * 1e9
        if t_ns < first - slack_ns or t_ns > last + slack_ns:
            raise TimeSeriesRangeError(
                f"query at {t_ns} ns is outside channel "
                f"({channel.subsystem_id}, {channel.name!r}) range "
                f"[{first}, {last}] ns by more than {boundary_tolerance_s} s"
            )
        return float(channel.values[0] if t_ns < first else channel.values[-1])
    index = int(np.searchsorted(times, t_ns))
    if index < len(times) and int(times[index]) == t_ns:
        return float(channel.values[index])
    lo = index - 1
    t0, t1 = int(times[lo]), int(times[lo + 1])
    v0, v1 = float(channel.values[lo]), float(channel.values[lo + 1])
    fraction = (t_ns - t0) / (t1 - t0)
    return v0 + (v1 - v0) * fraction


class TimeSeriesTable:
    """All recorded channels of one recording."""

    def __init__(self, channels: Iterable[Channel]) -> None:
        self._channels: dict[tuple[int, str], Channel] = {}
        for channel in channels:
            key = (channel.subsystem_id, channel.name)
            _require(key not in self._channels, f"duplicate channel {key}")
            self._channels[key] = channel

    def channel(self, subsystem_id: int, name: str) -> Channel:
        key = (subsystem_id, name)
        if key not in self._channels:
            raise KeyError(f"recording has no channel {key}")
        return self._channels[key]

    def has_channel(self, subsystem_id: int, name: str) -> bool:
        return (subsystem_id, name) in self._channels

    def keys(self) -> list[tuple[int, str]]:
        return sorted(self._channels)

    def __len__(self) -> int:
        return len(self._channels)


# ---------------------------------------------------------------------------
# Ingestion / emission
# ---------------------------------------------------------------------------


def ingest_timeseries(path, strict_channels: bool = True) -> TimeSeriesTable:
    """Parse a channel CSV into a table, validating as it goes.

    Rows may arrive unsorted; they are sorted per channel.  Duplicate
    timestamps within a channel, malformed rows, and non-finite values are
    rejected with the offending line number.  Unknown channel names are an
    error when ``strict_channels`` (the default), since a typo would
    otherwise silently drop a measurement.
    """
    collected: dict[tuple[int, str], list[tuple[int, float]]] = {}
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["timestamp_ns", "subsystem_id", "channel", "value"]:
            raise IngestError(f"{path}: bad header {header!r}")
        for line_number, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise IngestError(f"{path}:{line_number}: expected 4 fields, got {len(row)}")
            try:
                t_ns = int(row[0])
                subsystem_id = int(row[1])
                value = float(row[3])
            except ValueError as exc:
                raise IngestError(f"{path}:{line_number}: {exc}") from exc
            name = row[2]
            if name not in KNOWN_CHANNELS:
                if strict_channels:
                    raise IngestError(f"{path}:{line_number}: unknown channel {name!r}")
                continue
            collected.setdefault((subsystem_id, name), []).append((t_ns, value))
    channels = []
    for (subsystem_id, name), rows in sorted(collected.items()):
        rows.sort(key=lambda item: item[0])
        times = [t for t, _ in rows]
        for i in range(1, len(times)):
            if times[i] == times[i - 1]:
                raise IngestError(
                    f"{path}: duplicate timestamp {times[i]} ns in channel "
                    f"({subsystem_id}, {name!r})"
                )
        try:
            channels.append(
                Channel(
                    subsystem_id=subsystem_id,
                    name=name,
                    times_ns=np.array(times, dtype=np.int64),
                    values=np.array([v for _, v in rows], dtype=np.float64),
                )
            )
        except ValueError as exc:
            raise IngestError(f"{path}: channel ({subsystem_id}, {name!r}): {exc}") from exc
    return TimeSeriesTable(channels)


def emit_timeseries(path, table: TimeSeriesTable) -> None:
    """Write a table back to channel CSV (sorted by time, then channel)."""
    rows = []
    for subsystem_id, name in table.keys():
        channel = table.channel(subsystem_id, name)
        for t_ns, value in zip(channel.times_ns, channel.values):
            rows.append((int(t_ns), subsystem_id, name, float(value)))
    rows.sort(key=lambda item: (item[0], item[1], item[2]))
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["timestamp_ns", "subsystem_id", "channel", "value"])
        for t_ns, subsystem_id, name, value in rows:
            writer.writerow([t_ns, subsystem_id, name, format(value, ".17g")])


def ingest_context(path) -> tuple[ContextRecord, ...]:
    """Parse a context JSONL file; line numbers accompany every rejection."""
    records = []
    with open(path) as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"{path}:{line_number}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise IngestError(f"{path}:{line_number}: expected an object")
            try:
                record = ContextRecord(
                    recorded_at_ns=int(obj["recorded_at_ns"]),
                    begins_at_ns=int(obj["begins_at_ns"]),
                    ends_at_ns=int(obj["ends_at_ns"]),
                    subsystem_id=int(obj["subsystem_id"]),
                    payload=obj.get("payload", {}),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise IngestError(f"{path}:{line_number}: {exc}") from exc
            records.append(record)
    return tuple(records)


def emit_context(path, records: Iterable[ContextRecord]) -> None:
    with open(path, "w") as handle:
        for record in records:
            handle.write(
                json.dumps(
                    {
                        "recorded_at_ns": record.recorded_at_ns,
                        "begins_at_ns": record.begins_at_ns,
                        "ends_at_ns": record.ends_at_ns,
                        "subsystem_id": record.subsystem_id,
                        "payload": dict(record.payload),
                    },
                    sort_keys=True,
                )
            )
            handle.write("\n")


# ---------------------------------------------------------------------------
# Replay components
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ReplayComponentConfig:
    """Shared replay settings: which recording, which subsystem, how much
    clamping slack at the recording's edges, and (for batteries) the pack
    capacity used to convert SOC differences back into energy."""

    table: TimeSeriesTable
    subsystem_id: int = 1
    boundary_tolerance_s: float = DEFAULT_BOUNDARY_TOLERANCE_S
    battery_capacity_j: float | None = None

    def __post_init__(self) -> None:
        _require(self.boundary_tolerance_s >= 0.0, "boundary_tolerance_s must be >= 0")
        if self.battery_capacity_j is not None:
            _require(self.battery_capacity_j > 0.0, "battery_capacity_j must be > 0")

    def require(self, *names: str) -> None:
        for name in names:
            if not self.table.has_channel(self.subsystem_id, name):
                raise ValueError(
                    f"replay recording lacks channel ({self.subsystem_id}, {name!r})"
                )

    def value(self, name: str, t_ns: int) -> float:
        return interpolate(
            self.table.channel(self.subsystem_id, name), t_ns, self.boundary_tolerance_s
        )


class ReplayPowerSource(PowerSource):
    def __init__(self, clock: Clock, config: ReplayComponentConfig) -> None:
        config.require("pv_voltage", "pv_current", "pv_power")
        self._clock = clock
        self._config = config

    def step(self, step_ticks: int) -> PowerSourceStepResult:
        self._clock = self._clock.advance(step_ticks)
        t = self._clock.ticks_since_epoch
        return PowerSourceStepResult(
            voltage=max(self._config.value("pv_voltage", t), 0.0),
            current=max(self._config.value("pv_current", t), 0.0),
            power=max(self._config.value("pv_power", t), 0.0),
        )


class ReplayLoad(Load):
    """Recorded load.  Apparent power is raised to active power if a
    recorded pair dips below it (measurement jitter), since |S| >= P is a
    hard result invariant."""

    def __init__(self, clock: Clock, config: ReplayComponentConfig) -> None:
        config.require("load_active_power", "load_apparent_power")
        self._clock = clock
        self._config = config

    def step(self, step_ticks: int) -> LoadStepResult:
        self._clock = self._clock.advance(step_ticks)
        t = self._clock.ticks_since_epoch
        active = max(self._config.value("load_active_power", t), 0.0)
        apparent = max(self._config.value("load_apparent_power", t), active)
        return LoadStepResult(requested_active_power=active, requested_apparent_power=apparent)


class ReplayGrid(Grid):
    """Recorded grid exchange.  The commanded request is ignored, so the
    delivered <= requested relation cannot be enforced here; replays
    reproduce history rather than arbitrate it."""

    def __init__(self, clock: Clock, config: ReplayComponentConfig) -> None:
        config.require("grid_active_power", "grid_apparent_power")
        self._clock = clock
        self._config = config

    def step(self, step_ticks: int, grid_input: GridStepInput) -> GridStepResult:
        del grid_input
        self._clock = self._clock.advance(step_ticks)
        t = self._clock.ticks_since_epoch
        active = max(self._config.value("grid_active_power", t), 0.0)
        apparent = max(self._config.value("grid_apparent_power", t), active)
        return GridStepResult(delivered_active_power=active, delivered_apparent_power=apparent)


class ReplayBattery(Battery):
    """Recorded battery.  delta_energy is the recorded SOC difference
    times the configured capacity; the commanded mode/current is ignored."""

    def __init__(self, clock: Clock, config: ReplayComponentConfig) -> None:
        config.require("battery_soc", "battery_voltage")
        _require(
            config.battery_capacity_j is not None,
            "ReplayBattery needs battery_capacity_j in its config",
        )
        self._clock = clock
        self._config = config

    def _state_at(self, t_ns: int) -> tuple[float, float]:
        soc = min(max(self._config.value("battery_soc", t_ns), 0.0), 1.0)
        voltage = self._config.value("battery_voltage", t_ns)
        return soc, voltage

    def snapshot(self) -> BatteryStepResult:
        soc, voltage = self._state_at(self._clock.ticks_since_epoch)
        return BatteryStepResult(soc=soc, voltage=voltage, delta_energy=0.0, delta_charge=0.0)

    def step(self, step_ticks: int, battery_input: BatteryStepInput) -> BatteryStepResult:
        del battery_input
        previous_soc, _ = self._state_at(self._clock.ticks_since_epoch)
        self._clock = self._clock.advance(step_ticks)
        soc, voltage = self._state_at(self._clock.ticks_since_epoch)
        delta_energy = (soc - previous_soc) * self._config.battery_capacity_j
        return BatteryStepResult(
            soc=soc,
            voltage=voltage,
            delta_energy=delta_energy,
            delta_charge=delta_energy / voltage,
        )


class ReplayContext(Context):
    """Replays ingested context records with no-future-leakage queries."""

    def __init__(self, clock: Clock, records: tuple[ContextRecord, ...]) -> None:
        self._clock = clock
        self._records = tuple(records)

    @property
    def records(self) -> tuple[ContextRecord, ...]:
        return self._records

    def step(self, step_ticks: int) -> tuple[ContextRecord, ...]:
        active = tuple(context_query(self._records, self._clock))
        self._clock = self._clock.advance(step_ticks)
        return active
