"""Simulation engine: advances all components in lockstep and keeps books.

Step order within one step: context (if present), power source, load,
inverter, battery, grid.  The inverter sees the generation and load
results just produced for the current step together with the battery and
grid results of the previous step, decides the flows, and its outputs
drive the battery and grid for the same step.

Cumulative energy aggregates are kept in watt-hours with compensated
summation, so the final totals equal the compensated sum of the per-step
deltas exactly.  Maxima (voltages, currents, requested grid power) only
ever grow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

from .core import (
    Battery,
    BatteryMode,
    BatteryStepInput,
    BatteryStepResult,
    Clock,
    ConfigurationError,
    Context,
    ContextRecord,
    Grid,
    GridStepResult,
    InverterStepInput,
    InverterStepResult,
    Inverter,
    Load,
    LoadStepResult,
    PowerSource,
    PowerSourceStepResult,
    SimulationError,
    _require,
)

WH_PER_J = 1.0 / 3600.0

#: Maxima tracked across a run; keys are fixed so artifacts are stable.
MAXIMA_KEYS = (
    "pv_voltage",
    "pv_current",
    "battery_voltage",
    "battery_current",
    "grid_requested_active_power",
)


class ComponentStepError(SimulationError):
    """A component failed mid-run; names the component and the step index."""

    def __init__(self, component: str, step_index: int, cause: BaseException) -> None:
        super().__init__(f"{component} failed at step {step_index}: {cause}")
        self.component = component
        self.step_index = step_index


class _Books:
    """Six Kahan-Neumaier accumulators updated in one call per step.

    The per-value arithmetic is exactly CompensatedSum's, so re-summing
    the streamed deltas with CompensatedSum reproduces every cumulative
    total bitwise.  Inlined here because six method calls per step are a
    measurable cost over million-step runs.
    """

    __slots__ = (
        "generated", "generated_c",
        "consumed", "consumed_c",
        "purchased", "purchased_c",
        "charged", "charged_c",
        "discharged", "discharged_c",
        "cost", "cost_c",
    )

    def __init__(self) -> None:
        for name in self.__slots__:
            setattr(self, name, 0.0)

    def add(
        self,
        generated: float,
        consumed: float,
        purchased: float,
        charged: float,
        discharged: float,
        cost: float,
    ) -> None:
        s = self.generated
        t = s + generated
        self.generated_c += (s - t) + generated if abs(s) >= abs(generated) else (generated - t) + s
        self.generated = t
        s = self.consumed
        t = s + consumed
        self.consumed_c += (s - t) + consumed if abs(s) >= abs(consumed) else (consumed - t) + s
        self.consumed = t
        s = self.purchased
        t = s + purchased
        self.purchased_c += (s - t) + purchased if abs(s) >= abs(purchased) else (purchased - t) + s
        self.purchased = t
        s = self.charged
        t = s + charged
        self.charged_c += (s - t) + charged if abs(s) >= abs(charged) else (charged - t) + s
        self.charged = t
        s = self.discharged
        t = s + discharged
        self.discharged_c += (s - t) + discharged if abs(s) >= abs(discharged) else (discharged - t) + s
        self.discharged = t
        s = self.cost
        t = s + cost
        self.cost_c += (s - t) + cost if abs(s) >= abs(cost) else (cost - t) + s
        self.cost = t


@dataclass(frozen=True, slots=True)
class StepDeltas:
    """Per-step energy movements (Wh) and the step's grid cost."""

    generated_wh: float
    consumed_wh: float
    purchased_wh: float
    charged_wh: float
    discharged_wh: float
    cost: float


@dataclass(frozen=True, slots=True)
class Aggregates:
    """Cumulative totals since the start of the run (Wh and cost units)."""

    generated_wh: float
    consumed_wh: float
    purchased_wh: float
    charged_wh: float
    discharged_wh: float
    cost: float


@dataclass(frozen=True, slots=True)
class SimulatorStepOutput:
    """Everything one step produced, with books snapshotted after it."""

    step_index: int
    time_ns: int
    context: tuple[ContextRecord, ...] | None
    power_source: PowerSourceStepResult
    load: LoadStepResult
    inverter: InverterStepResult
    battery: BatteryStepResult
    grid: GridStepResult
    deltas: StepDeltas
    aggregates: Aggregates
    maxima: Mapping[str, float]


class Simulator:
    """Owns the master clock, the components, and the running aggregates."""

    def __init__(
        self,
        clock: Clock,
        power_source: PowerSource,
        load: Load,
        battery: Battery,
        inverter: Inverter,
        grid: Grid,
        context: Context | None = None,
    ) -> None:
        self.clock = clock
        self.power_source = power_source
        self.load = load
        self.battery = battery
        self.inverter = inverter
        self.grid = grid
        self.context = context
        self.step_count = 0
        self.last_battery_result: BatteryStepResult = battery.snapshot()
        self.last_grid_result: GridStepResult = GridStepResult(0.0, 0.0)
        self._books = _Books()
        self._maxima = {key: 0.0 for key in MAXIMA_KEYS}

    def aggregates(self) -> Aggregates:
        b = self._books
        return Aggregates(
            b.generated + b.generated_c,
            b.consumed + b.consumed_c,
            b.purchased + b.purchased_c,
            b.charged + b.charged_c,
            b.discharged + b.discharged_c,
            b.cost + b.cost_c,
        )

    def maxima(self) -> dict[str, float]:
        return dict(self._maxima)

    def step(self, step_ticks: int, grid_to_battery_power: float = 0.0) -> SimulatorStepOutput:
        """Advance every component by ``step_ticks`` ticks."""
        dt_s = self.clock.step_seconds(step_ticks)

        stage = "context"
        try:
            context_result = self.context.step(step_ticks) if self.context is not None else None
            stage = "power_source"
            pv_result = self.power_source.step(step_ticks)
            stage = "load"
            load_result = self.load.step(step_ticks)
            stage = "inverter"
            inverter_result = self.inverter.step(
                step_ticks,
                InverterStepInput(
                    pv_result,
                    self.last_battery_result,
                    self.last_grid_result,
                    load_result,
                    grid_to_battery_power,
                ),
            )
            battery_input = inverter_result.battery_input
            grid_input = inverter_result.grid_input
            stage = "battery"
            battery_result = self.battery.step(step_ticks, battery_input)
            stage = "grid"
            grid_result = self.grid.step(step_ticks, grid_input)
        except ConfigurationError:
            raise
        except (SimulationError, ValueError, ArithmeticError) as exc:
            raise ComponentStepError(stage, self.step_count, exc) from exc

        self.clock = self.clock.advance(step_ticks)
        self.step_count += 1
        self.last_battery_result = battery_result
        self.last_grid_result = grid_result

        delta_e = battery_result.delta_energy
        dt_wh = dt_s * WH_PER_J
        generated = inverter_result.pv_power_drawn * dt_wh
        consumed = load_result.requested_active_power * dt_wh
        purchased = grid_result.delivered_active_power * dt_wh
        charged = delta_e * WH_PER_J if delta_e > 0.0 else 0.0
        discharged = -delta_e * WH_PER_J if delta_e < 0.0 else 0.0
        try:
            cost = grid_result.cost
        except AttributeError:
            cost = 0.0
        self._books.add(generated, consumed, purchased, charged, discharged, cost)

        # Maxima rarely grow once a run settles, so test cheaply first and
        # rebuild copy-on-write: step outputs share the current dict, and
        # replacing it on change keeps past outputs' snapshots intact.
        maxima = self._maxima
        requested_active = grid_input.requested_active_power
        if (
            pv_result.voltage > maxima["pv_voltage"]
            or pv_result.current > maxima["pv_current"]
            or battery_result.voltage > maxima["battery_voltage"]
            or battery_input.current > maxima["battery_current"]
            or requested_active > maxima["grid_requested_active_power"]
        ):
            maxima = dict(maxima)
            if pv_result.voltage > maxima["pv_voltage"]:
                maxima["pv_voltage"] = pv_result.voltage
            if pv_result.current > maxima["pv_current"]:
                maxima["pv_current"] = pv_result.current
            if battery_result.voltage > maxima["battery_voltage"]:
                maxima["battery_voltage"] = battery_result.voltage
            if battery_input.current > maxima["battery_current"]:
                maxima["battery_current"] = battery_input.current
            if requested_active > maxima["grid_requested_active_power"]:
                maxima["grid_requested_active_power"] = requested_active
            self._maxima = maxima

        return SimulatorStepOutput(
            self.step_count - 1,
            self.clock.ticks_since_epoch,
            context_result,
            pv_result,
            load_result,
            inverter_result,
            battery_result,
            grid_result,
            StepDeltas(generated, consumed, purchased, charged, discharged, cost),
            self.aggregates(),
            maxima,
        )


def run(
    simulator: Simulator,
    total_ticks: int,
    step_ticks: int,
    sink: Callable[[SimulatorStepOutput], None] | None = None,
) -> list[SimulatorStepOutput] | int:
    """Run ``total_ticks`` of simulated time in ``step_ticks`` chunks.

    A final shorter step covers any remainder, so the horizon is honored
    exactly.  With a ``sink`` the outputs are streamed to it and only the
    step count is returned; otherwise all outputs are collected.
    """
    _require(total_ticks >= 1, "total_ticks must be >= 1")
    _require(step_ticks >= 1, "step_ticks must be >= 1")
    outputs: list[SimulatorStepOutput] | None = None if sink is not None else []
    remaining = total_ticks
    count = 0
    while remaining > 0:
        ticks = step_ticks if remaining >= step_ticks else remaining
        output = simulator.step(ticks)
        count += 1
        remaining -= ticks
        if sink is not None:
            sink(output)
        else:
            outputs.append(output)
    return count if sink is not None else outputs
