"""PV-first hybrid inverter.

Allocation priority for every step: generation covers the AC demand
first; leftover generation charges the battery; the battery covers any
remaining demand; whatever is still uncovered is requested from the
grid.  An optional grid-to-battery command routes additional grid power
into the battery and suppresses discharge for that step, so the battery
never charges and discharges in the same step.

All efficiencies are multiplicative factors in (0, 1] on the named path.
Power caps are battery-side watts.  If ``battery_capacity`` is set, the
commanded current is additionally limited so the projected state of
charge stays inside [soc_min, soc_max]; without it the SOC gates only
check the bound at the step's start, which can overshoot within one step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..core import (
    NS_PER_SECOND,
    BatteryMode,
    BatteryStepInput,
    Clock,
    GridStepInput,
    Inverter,
    InverterStepInput,
    InverterStepResult,
    _require,
)


@dataclass(frozen=True, slots=True)
class InverterPVFirstConfig:
    """PV-first dispatch parameters.

    eta_pv_to_batt / eta_pv_to_load / eta_batt_to_load : path efficiencies.
    max_charge_power / max_discharge_power : battery-side caps in W.
    soc_min / soc_max : battery operating window enforced by dispatch.
    self_power : the inverter's own consumption in W, added to demand.
    battery_capacity : battery capacity in J for energy-aware current
        limits (None disables them).  battery_eta_charge and
        battery_eta_discharge describe the attached battery so the
        projection matches what the battery will actually store or drain.
    """

    eta_pv_to_batt: float = 0.97
    eta_pv_to_load: float = 0.95
    eta_batt_to_load: float = 0.95
    max_charge_power: float = math.inf
    max_discharge_power: float = math.inf
    soc_min: float = 0.1
    soc_max: float = 1.0
    self_power: float = 0.0
    battery_capacity: float | None = None
    battery_eta_charge: float = 1.0
    battery_eta_discharge: float = 1.0

    def __post_init__(self) -> None:
        for name in ("eta_pv_to_batt", "eta_pv_to_load", "eta_batt_to_load"):
            value = getattr(self, name)
            _require(0.0 < value <= 1.0, f"{name} must be in (0, 1]")
        _require(self.max_charge_power >= 0.0, "max_charge_power must be >= 0")
        _require(self.max_discharge_power >= 0.0, "max_discharge_power must be >= 0")
        _require(0.0 <= self.soc_min < self.soc_max <= 1.0, "need 0 <= soc_min < soc_max <= 1")
        _require(self.self_power >= 0.0, "self_power must be >= 0")
        if self.battery_capacity is not None:
            _require(self.battery_capacity > 0.0, "battery_capacity must be > 0")
        _require(0.0 < self.battery_eta_charge <= 1.0, "battery_eta_charge must be in (0, 1]")
        _require(0.0 < self.battery_eta_discharge <= 1.0, "battery_eta_discharge must be in (0, 1]")


# Shared frozen instance; most steps idle the battery and a fresh record
# per step is measurable at scale.
_IDLE_BATTERY_INPUT = BatteryStepInput(BatteryMode.IDLE, 0.0)


def _charge_power_limit(config: InverterPVFirstConfig, soc: float, dt_s: float) -> float:
    """Battery-side W ceiling so projected SOC stays at or below soc_max."""
    limit = config.max_charge_power
    if config.battery_capacity is not None:
        headroom_j = (config.soc_max - soc) * config.battery_capacity
        limit = min(limit, max(headroom_j, 0.0) / (config.battery_eta_charge * dt_s))
    return limit


def _discharge_power_limit(config: InverterPVFirstConfig, soc: float, dt_s: float) -> float:
    """Battery-side W ceiling so projected SOC stays at or above soc_min."""
    limit = config.max_discharge_power
    if config.battery_capacity is not None:
        available_j = (soc - config.soc_min) * config.battery_capacity
        limit = min(limit, max(available_j, 0.0) * config.battery_eta_discharge / dt_s)
    return limit


def inverter_pv_first_step(
    inverter_input: InverterStepInput,
    config: InverterPVFirstConfig,
    dt_s: float,
) -> InverterStepResult:
    """Allocate one step's power flows with PV-first priority."""
    pv_offered = inverter_input.power_source.power
    load = inverter_input.load
    soc = inverter_input.battery.soc
    battery_voltage = inverter_input.battery.voltage
    g2b = inverter_input.grid_to_battery_power

    demand = load.requested_active_power + config.self_power

    # 1. Generation covers demand.
    demand_pv_side = demand / config.eta_pv_to_load
    if pv_offered >= demand_pv_side:
        pv_for_load = demand_pv_side
        deficit = 0.0
    else:
        pv_for_load = pv_offered
        deficit = demand - pv_offered * config.eta_pv_to_load
    pv_surplus = pv_offered - pv_for_load
    pv_drawn = pv_for_load

    charge_power = 0.0  # battery-side W
    discharge_power = 0.0  # battery-side W
    grid_charge = 0.0  # grid-side W actually routed to the battery

    # 2. Leftover generation charges the battery.
    if pv_surplus > 0.0 and soc < config.soc_max:
        allowed = _charge_power_limit(config, soc, dt_s)
        charge_power = min(pv_surplus * config.eta_pv_to_batt, allowed)
        pv_drawn += charge_power / config.eta_pv_to_batt

    # 3. Grid-to-battery charging; suppresses discharge for this step.
    if g2b > 0.0:
        if soc < config.soc_max:
            allowed = _charge_power_limit(config, soc, dt_s)
            grid_charge = min(g2b, max(allowed - charge_power, 0.0))
            charge_power += grid_charge
    elif deficit > 0.0 and soc > config.soc_min:
        # Battery covers the remaining demand, within its caps and window.
        wanted = deficit / config.eta_batt_to_load
        allowed = _discharge_power_limit(config, soc, dt_s)
        if wanted <= allowed:
            discharge_power = wanted
            deficit = 0.0
        else:
            discharge_power = allowed
            deficit -= discharge_power * config.eta_batt_to_load
            if deficit < 0.0:
                deficit = 0.0

    # 4. Residual demand plus commanded charging goes to the grid.
    requested_active = deficit + grid_charge
    covered_for_load = min(demand - deficit, load.requested_active_power)
    apparent_residual = load.requested_apparent_power - covered_for_load
    if apparent_residual < 0.0:
        apparent_residual = 0.0
    requested_apparent = max(apparent_residual, requested_active)

    if charge_power > 0.0:
        battery_input = BatteryStepInput(BatteryMode.CHARGE, charge_power / battery_voltage)
    elif discharge_power > 0.0:
        battery_input = BatteryStepInput(BatteryMode.DISCHARGE, discharge_power / battery_voltage)
    else:
        battery_input = _IDLE_BATTERY_INPUT

    return InverterStepResult(
        GridStepInput(requested_active, requested_apparent), battery_input, pv_drawn
    )


class InverterPVFirst(Inverter):
    """Stateful wrapper around :func:`inverter_pv_first_step`."""

    def __init__(self, clock: Clock, config: InverterPVFirstConfig | None = None) -> None:
        # Plain-int time; per-step Clock churn is measurable at 1e6 steps.
        self._now_ns = clock.ticks_since_epoch
        self._tick_ns = clock.tick_resolution
        self._config = config if config is not None else InverterPVFirstConfig()

    @property
    def config(self) -> InverterPVFirstConfig:
        return self._config

    def step(self, step_ticks: int, inverter_input: InverterStepInput) -> InverterStepResult:
        dt_ns = step_ticks * self._tick_ns
        self._now_ns += dt_ns
        return inverter_pv_first_step(inverter_input, self._config, dt_ns / NS_PER_SECOND)
