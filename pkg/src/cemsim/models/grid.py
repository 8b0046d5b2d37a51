"""Priced one-way grid connection.

The grid delivers what was requested up to configurable per-step limits
and meters the cost of the delivered active energy against a
piecewise-constant price schedule.  Requests beyond a limit are clamped
and flagged rather than failing the step, so a run always completes and
the violation is visible in the results.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

from ..core import (
    NS_PER_SECOND,
    Clock,
    ConfigurationError,
    Grid,
    GridStepInput,
    GridStepResult,
    _require,
    grid_energy_cost,
    time_ns,
)


@dataclass(frozen=True, slots=True)
class PriceSchedule:
    """Piecewise-constant price over time.

    ``breakpoints`` is a sequence of (start_ns, price_per_kwh): the price
    holds from its start until the next breakpoint (right-open).  Lookups
    before the first breakpoint are a configuration error, not zero.
    """

    breakpoints: tuple[tuple[int, float], ...]
    _starts: tuple[int, ...] = field(init=False, repr=False, compare=False)
    _prices: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        _require(len(self.breakpoints) >= 1, "PriceSchedule needs at least one breakpoint")
        previous = None
        for start_ns, price in self.breakpoints:
            _require(isinstance(start_ns, int), "breakpoint start must be int nanoseconds")
            _require(price >= 0.0, f"price must be >= 0, got {price!r}")
            if previous is not None:
                _require(start_ns > previous, "breakpoint starts must be strictly increasing")
            previous = start_ns
        object.__setattr__(self, "breakpoints", tuple((int(s), float(p)) for s, p in self.breakpoints))
        object.__setattr__(self, "_starts", tuple(s for s, _ in self.breakpoints))
        object.__setattr__(self, "_prices", tuple(p for _, p in self.breakpoints))

    def price_at(self, when: Clock | int) -> float:
        when_ns = time_ns(when)
        index = bisect.bisect_right(self._starts, when_ns) - 1
        if index < 0:
            raise ConfigurationError(
                f"price lookup at {when_ns} ns precedes the first breakpoint "
                f"({self._starts[0]} ns)"
            )
        return self._prices[index]

    def prices_for_window(self, start_ns: int, step_seconds: float, count: int) -> list[float]:
        """Per-step prices for ``count`` steps, sampled at each step's start."""
        step_ns = int(round(step_seconds * 1e9))
        return [self.price_at(start_ns + i * step_ns) for i in range(count)]


@dataclass(frozen=True, slots=True)
class GridPricedConfig:
    """Price schedule plus optional per-step delivery limits (W / VA)."""

    schedule: PriceSchedule
    active_power_limit: float | None = None
    apparent_power_limit: float | None = None

    def __post_init__(self) -> None:
        if self.active_power_limit is not None:
            _require(self.active_power_limit >= 0.0, "active_power_limit must be >= 0")
        if self.apparent_power_limit is not None:
            _require(self.apparent_power_limit >= 0.0, "apparent_power_limit must be >= 0")


@dataclass(frozen=True, slots=True)
class PricedGridStepResult(GridStepResult):
    """Grid delivery plus the metered cost and a limit-violation flag."""

    cost: float = 0.0
    limit_violation: bool = False


def grid_priced_step(
    grid_input: GridStepInput,
    config: GridPricedConfig,
    now: Clock | int,
    dt_s: float,
) -> PricedGridStepResult:
    """Deliver one step: clamp to limits, flag violations, meter cost.

    The price is sampled at the step's start (``now``).  An apparent-power
    clamp also caps active power, since |S| >= P must survive delivery.
    """
    requested_active = grid_input.requested_active_power
    requested_apparent = grid_input.requested_apparent_power
    delivered_active = requested_active
    delivered_apparent = requested_apparent
    violation = False
    if config.active_power_limit is not None and delivered_active > config.active_power_limit:
        delivered_active = config.active_power_limit
        violation = True
    if config.apparent_power_limit is not None and delivered_apparent > config.apparent_power_limit:
        delivered_apparent = config.apparent_power_limit
        violation = True
    if delivered_apparent < delivered_active:
        delivered_active = delivered_apparent
    price = config.schedule.price_at(now)
    cost = grid_energy_cost(price, delivered_active, dt_s)
    return PricedGridStepResult(delivered_active, delivered_apparent, cost, violation)


class GridPriced(Grid):
    """Stateful wrapper around :func:`grid_priced_step`."""

    def __init__(self, clock: Clock, config: GridPricedConfig) -> None:
        # Plain-int time; per-step Clock churn is measurable at 1e6 steps.
        self._now_ns = clock.ticks_since_epoch
        self._tick_ns = clock.tick_resolution
        self._config = config

    @property
    def config(self) -> GridPricedConfig:
        return self._config

    def step(self, step_ticks: int, grid_input: GridStepInput) -> PricedGridStepResult:
        dt_ns = step_ticks * self._tick_ns
        now_ns = self._now_ns
        self._now_ns = now_ns + dt_ns
        return grid_priced_step(grid_input, self._config, now_ns, dt_ns / NS_PER_SECOND)
