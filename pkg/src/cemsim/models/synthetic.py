"""Seeded synthetic scenario components.

Stands in for a real installation's measurements: a diurnal PV bell with
multiplicative cloud noise, a workstation-style load driven by scheduled
compute jobs, job announcements as context records, and a two-tier
(peak/off-peak) price schedule.

Determinism contract: identical seed and config produce bitwise-identical
series.  Per-sample noise is derived from blake2b over (seed, channel,
timestamp), so a value depends only on the sampled instant, never on how
many steps were taken to reach it.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field

from ..core import (
    Clock,
    Context,
    ContextRecord,
    Load,
    LoadStepResult,
    PowerSource,
    PowerSourceStepResult,
    _require,
    context_query,
)
from .grid import PriceSchedule

NS_PER_HOUR = 3_600_000_000_000
NS_PER_DAY = 86_400_000_000_000


def unit_noise(seed: int, channel: str, t_ns: int) -> float:
    """Deterministic pseudo-random value in [0, 1) for (seed, channel, t)."""
    key = f"{seed}:{channel}:{t_ns}".encode()
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "little") / 2.0**64


@dataclass(frozen=True, slots=True)
class JobEvent:
    """A scheduled compute job contributing load over its window."""

    begins_at_ns: int
    ends_at_ns: int
    description: str
    true_effort: float
    watts_per_effort: float

    def __post_init__(self) -> None:
        _require(self.begins_at_ns < self.ends_at_ns, "job must begin before it ends")
        _require(self.true_effort >= 0.0, "true_effort must be >= 0")
        _require(self.watts_per_effort >= 0.0, "watts_per_effort must be >= 0")

    def active_at(self, t_ns: int) -> bool:
        return self.begins_at_ns <= t_ns < self.ends_at_ns


@dataclass(frozen=True, slots=True)
class PriceTiers:
    """Two-tier daily pricing: peak window price and off-peak price."""

    off_peak_price: float = 0.10
    peak_price: float = 0.40
    peak_start_hour: int = 8
    peak_end_hour: int = 20

    def __post_init__(self) -> None:
        _require(self.off_peak_price >= 0.0, "off_peak_price must be >= 0")
        _require(self.peak_price >= 0.0, "peak_price must be >= 0")
        _require(
            0 <= self.peak_start_hour < self.peak_end_hour <= 24,
            "need 0 <= peak_start_hour < peak_end_hour <= 24",
        )


@dataclass(frozen=True, slots=True)
class SyntheticScenarioConfig:
    """Everything the synthetic generator needs for one scenario."""

    seed: int = 0
    day_count: int = 1
    pv_peak_power: float = 600.0
    pv_noise_amplitude: float = 0.1
    base_load: float = 800.0
    job_events: tuple[JobEvent, ...] = ()
    price_tiers: PriceTiers = field(default_factory=PriceTiers)
    load_noise_amplitude: float = 0.0
    pv_voltage: float = 400.0
    sunrise_hour: float = 6.0
    sunset_hour: float = 18.0

    def __post_init__(self) -> None:
        _require(self.day_count >= 1, "day_count must be >= 1")
        _require(self.pv_peak_power >= 0.0, "pv_peak_power must be >= 0")
        _require(0.0 <= self.pv_noise_amplitude <= 1.0, "pv_noise_amplitude must be in [0, 1]")
        _require(self.base_load >= 0.0, "base_load must be >= 0")
        _require(0.0 <= self.load_noise_amplitude <= 1.0, "load_noise_amplitude must be in [0, 1]")
        _require(self.pv_voltage > 0.0, "pv_voltage must be > 0")
        _require(
            0.0 <= self.sunrise_hour < self.sunset_hour <= 24.0,
            "need 0 <= sunrise_hour < sunset_hour <= 24",
        )
        object.__setattr__(self, "job_events", tuple(self.job_events))


# ---------------------------------------------------------------------------
# Pure sampling functions (components and forecasts share these, so a
# perfect forecast is bitwise equal to the realized series)
# ---------------------------------------------------------------------------


def hour_of_day(t_ns: int) -> float:
    return (t_ns % NS_PER_DAY) / NS_PER_HOUR


def pv_power_at(config: SyntheticScenarioConfig, t_ns: int) -> float:
    """PV power at an instant: cosine bell over daylight, cloud-dimmed."""
    hour = (t_ns % NS_PER_DAY) / NS_PER_HOUR
    if hour <= config.sunrise_hour or hour >= config.sunset_hour:
        return 0.0
    span = config.sunset_hour - config.sunrise_hour
    power = config.pv_peak_power * math.cos(math.pi * (hour - 12.0) / span)
    if power <= 0.0:
        return 0.0
    if config.pv_noise_amplitude > 0.0:
        dimming = config.pv_noise_amplitude * unit_noise(config.seed, "pv", t_ns)
        power *= 1.0 - dimming
    return power


def load_power_at(config: SyntheticScenarioConfig, t_ns: int) -> float:
    """Load power at an instant: base plus active jobs plus noise."""
    power = config.base_load
    for job in config.job_events:
        if job.active_at(t_ns):
            power += job.true_effort * job.watts_per_effort
    if config.load_noise_amplitude > 0.0:
        wobble = 2.0 * unit_noise(config.seed, "load", t_ns) - 1.0
        power += config.load_noise_amplitude * config.base_load * wobble
        if power < 0.0:
            return 0.0
    return power


def sample_series(
    config: SyntheticScenarioConfig,
    start_ns: int,
    step_seconds: float,
    count: int,
) -> tuple[list[float], list[float]]:
    """Realized (load, pv) series sampled at each step's end time."""
    step_ns = int(round(step_seconds * 1e9))
    loads = []
    pvs = []
    for i in range(count):
        t = start_ns + (i + 1) * step_ns
        loads.append(load_power_at(config, t))
        pvs.append(pv_power_at(config, t))
    return loads, pvs


def build_price_schedule(
    tiers: PriceTiers, start_ns: int, day_count: int
) -> PriceSchedule:
    """Two-tier schedule covering ``day_count`` days from ``start_ns``'s day."""
    first_day = (start_ns // NS_PER_DAY) * NS_PER_DAY
    breakpoints: list[tuple[int, float]] = []
    for day in range(day_count + 1):
        day_start = first_day + day * NS_PER_DAY
        breakpoints.append((day_start, tiers.off_peak_price))
        if day < day_count:
            breakpoints.append((day_start + tiers.peak_start_hour * NS_PER_HOUR, tiers.peak_price))
            if tiers.peak_end_hour < 24:
                breakpoints.append((day_start + tiers.peak_end_hour * NS_PER_HOUR, tiers.off_peak_price))
    deduped = []
    for start, price in breakpoints:
        if deduped and deduped[-1][0] == start:
            deduped[-1] = (start, price)
        else:
            deduped.append((start, price))
    return PriceSchedule(tuple(deduped))


# ---------------------------------------------------------------------------
# Job and context generation
# ---------------------------------------------------------------------------

# Description templates keyed by the effort their wording conveys.  The
# text is what a forecaster sees; true_effort is what the load actually
# draws.  Keeping them consistent is what makes language context useful.
JOB_TEMPLATES: dict[float, tuple[str, ...]] = {
    1.0: (
        "Routine telemetry archive rotation",
        "Nightly documentation refresh",
    ),
    2.0: (
        "Incremental build of the firmware tree",
        "Multi-core regression smoke test",
    ),
    3.0: (
        "CPU-intensive robustness sweep",
        "CPU-intensive geometry verification pass",
    ),
    4.0: (
        "CPU-intensive, multi-core numeric robustness test",
        "Extending test to 48h (multi-core numeric robustness)",
    ),
    5.0: (
        "GPU training run with a nightly build step",
        "GPU inference benchmark plus full compile",
    ),
    6.0: (
        "48h CPU-intensive robustness test",
        "GPU training sweep with multi-core preprocessing and build",
    ),
    8.0: (
        "48h GPU model training campaign",
        "48h GPU hyperparameter sweep",
    ),
}


def generate_job_events(
    seed: int,
    day_count: int,
    start_ns: int = 0,
    jobs_per_day: int = 2,
    watts_per_effort: float = 250.0,
    min_duration_hours: float = 2.0,
    max_duration_hours: float = 6.0,
    earliest_start_hour: float = 7.0,
    latest_start_hour: float = 19.0,
) -> tuple[JobEvent, ...]:
    """Seeded random jobs, one batch per day, drawn from the template table."""
    rng = random.Random(seed)
    efforts = sorted(JOB_TEMPLATES)
    events = []
    for day in range(day_count):
        for _ in range(jobs_per_day):
            effort = rng.choice(efforts)
            text = rng.choice(JOB_TEMPLATES[effort])
            begin_hour = rng.uniform(earliest_start_hour, latest_start_hour)
            duration_h = rng.uniform(min_duration_hours, max_duration_hours)
            begins = start_ns + day * NS_PER_DAY + int(begin_hour * NS_PER_HOUR)
            ends = begins + int(duration_h * NS_PER_HOUR)
            events.append(
                JobEvent(
                    begins_at_ns=begins,
                    ends_at_ns=ends,
                    description=text,
                    true_effort=effort,
                    watts_per_effort=watts_per_effort,
                )
            )
    return tuple(events)


def context_records_for_jobs(
    job_events: tuple[JobEvent, ...],
    subsystem_id: int = 1,
    announce_lead_ns: int = 10 * NS_PER_HOUR,
) -> tuple[ContextRecord, ...]:
    """One announcement record per job, recorded ``announce_lead_ns`` early.

    The payload carries the description text plus numeric hints (core and
    file counts) loosely derived from the job size; "files" is only
    present for the larger jobs, exercising missing-feature handling.
    """
    records = []
    for job in job_events:
        payload: dict[str, object] = {
            "text": job.description,
            "cores": int(round(2 * job.true_effort)),
        }
        if job.true_effort >= 3.0:
            payload["files"] = int(100 * job.true_effort)
        records.append(
            ContextRecord(
                recorded_at_ns=max(job.begins_at_ns - announce_lead_ns, 0),
                begins_at_ns=job.begins_at_ns,
                ends_at_ns=job.ends_at_ns,
                subsystem_id=subsystem_id,
                payload=payload,
            )
        )
    return tuple(records)


# ---------------------------------------------------------------------------
# Components
# ---------------------------------------------------------------------------


class SyntheticPowerSource(PowerSource):
    """PV array following the scenario's diurnal bell."""

    def __init__(self, clock: Clock, config: SyntheticScenarioConfig) -> None:
        # Time is tracked as plain ints; a million tiny Clock objects per
        # run would dominate the profile.
        self._now_ns = clock.ticks_since_epoch
        self._tick_ns = clock.tick_resolution
        self._config = config
        # Night steps all produce this exact record; share one instance.
        self._night = PowerSourceStepResult(config.pv_voltage, 0.0, 0.0)

    def step(self, step_ticks: int) -> PowerSourceStepResult:
        self._now_ns += step_ticks * self._tick_ns
        power = pv_power_at(self._config, self._now_ns)
        if power == 0.0:
            return self._night
        voltage = self._config.pv_voltage
        return PowerSourceStepResult(voltage, power / voltage, power)


class SyntheticLoad(Load):
    """Workstation load: base draw plus scheduled jobs, unity power factor."""

    def __init__(self, clock: Clock, config: SyntheticScenarioConfig) -> None:
        self._now_ns = clock.ticks_since_epoch
        self._tick_ns = clock.tick_resolution
        self._config = config
        self._last = LoadStepResult(config.base_load, config.base_load)

    def step(self, step_ticks: int) -> LoadStepResult:
        self._now_ns += step_ticks * self._tick_ns
        power = load_power_at(self._config, self._now_ns)
        # Demand is flat outside job windows; reuse the previous record
        # (immutable) instead of building an identical one every step.
        last = self._last
        if power == last.requested_active_power:
            return last
        result = LoadStepResult(power, power)
        self._last = result
        return result


class ScriptedContext(Context):
    """Replays a fixed set of context records.

    Each step returns the records known at the step's *start* time whose
    interval has not yet ended, so a consumer acting on the step never
    sees notes from its own future.
    """

    def __init__(self, clock: Clock, records: tuple[ContextRecord, ...]) -> None:
        self._now_ns = clock.ticks_since_epoch
        self._tick_ns = clock.tick_resolution
        self._records = tuple(records)

    @property
    def records(self) -> tuple[ContextRecord, ...]:
        return self._records

    def step(self, step_ticks: int) -> tuple[ContextRecord, ...]:
        active = tuple(context_query(self._records, self._now_ns))
        self._now_ns += step_ticks * self._tick_ns
        return active
