"""Synthetic scenario generators: PV bell, job-driven load, announcements, tiers."""
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cemsim import (
    Clock,
    ConfigurationError,
    PriceTiers,
    ScriptedContext,
    SyntheticLoad,
    SyntheticPowerSource,
    SyntheticScenarioConfig,
    build_price_schedule,
    context_records_for_jobs,
    generate_job_events,
    sample_series,
    unit_noise,
)
from cemsim.models.synthetic import JobEvent, load_power_at, pv_power_at

NS_PER_HOUR = 3_600_000_000_000
NS_PER_DAY = 24 * NS_PER_HOUR


def _config(**overrides):
    defaults = dict(seed=3, pv_peak_power=600.0, pv_noise_amplitude=0.0,
                    base_load=100.0, load_noise_amplitude=0.0)
    return SyntheticScenarioConfig(**{**defaults, **overrides})


def test_pv_is_dark_at_midnight_and_peaks_at_noon():
    config = _config()
    assert pv_power_at(config, 0) == 0.0
    assert pv_power_at(config, 12 * NS_PER_HOUR) == 600.0
    assert pv_power_at(config, NS_PER_DAY + 12 * NS_PER_HOUR) == 600.0


def test_pv_is_zero_outside_daylight():
    config = _config()
    for hour in (0, 3, 5, 6, 18, 19, 23):
        assert pv_power_at(config, hour * NS_PER_HOUR) == 0.0
    assert pv_power_at(config, 9 * NS_PER_HOUR) > 0.0


@given(hour_ns=st.integers(min_value=0, max_value=3 * NS_PER_DAY))
@settings(max_examples=200)
def test_pv_noise_only_dims(hour_ns):
    """Cloud noise multiplies the clear-sky bell by a factor in (0.9, 1]."""
    clear = pv_power_at(_config(), hour_ns)
    dimmed = pv_power_at(_config(pv_noise_amplitude=0.1), hour_ns)
    assert 0.0 <= dimmed <= clear
    if clear > 0.0:
        assert dimmed > 0.89 * clear


def test_load_is_base_without_jobs():
    config = _config()
    for hour in range(0, 24, 3):
        assert load_power_at(config, hour * NS_PER_HOUR) == 100.0


def test_job_window_adds_effort_times_watts():
    """A 4-effort job at 50 W per effort unit lifts a 100 W base to 300 W."""
    job = JobEvent(
        begins_at_ns=10 * NS_PER_HOUR,
        ends_at_ns=14 * NS_PER_HOUR,
        description="CPU-intensive, multi-core numeric robustness test",
        true_effort=4.0,
        watts_per_effort=50.0,
    )
    config = _config(job_events=(job,))
    assert load_power_at(config, 9 * NS_PER_HOUR) == 100.0
    assert load_power_at(config, 10 * NS_PER_HOUR) == 300.0
    assert load_power_at(config, 14 * NS_PER_HOUR - 1) == 300.0
    assert load_power_at(config, 14 * NS_PER_HOUR) == 100.0


def test_load_noise_stays_within_amplitude():
    config = _config(load_noise_amplitude=0.05)
    for hour in range(24):
        power = load_power_at(config, hour * NS_PER_HOUR)
        assert abs(power - 100.0) <= 5.0 + 1e-9


def test_unit_noise_is_deterministic_and_unit_range():
    a = unit_noise(7, "pv", 123_456_789)
    assert a == unit_noise(7, "pv", 123_456_789)
    assert 0.0 <= a < 1.0
    assert a != unit_noise(7, "load", 123_456_789)
    assert a != unit_noise(8, "pv", 123_456_789)


def test_sampled_series_evaluates_step_ends():
    config = _config(pv_noise_amplitude=0.1, load_noise_amplitude=0.05)
    loads, pvs = sample_series(config, 0, 1800.0, 48)
    assert len(loads) == len(pvs) == 48
    for i in range(48):
        t = (i + 1) * 1800 * 1_000_000_000
        assert loads[i] == load_power_at(config, t)
        assert pvs[i] == pv_power_at(config, t)


def test_power_source_component_realizes_the_sampled_series():
    """Stepping the component reproduces sample_series bit for bit."""
    config = _config(pv_noise_amplitude=0.1)
    source = SyntheticPowerSource(Clock(0), config)
    realized = [source.step(1800).power for _ in range(48)]
    assert realized == sample_series(config, 0, 1800.0, 48)[1]


def test_load_component_realizes_the_sampled_series():
    jobs = generate_job_events(seed=11, day_count=1)
    config = _config(job_events=jobs, load_noise_amplitude=0.05)
    load = SyntheticLoad(Clock(0), config)
    results = [load.step(1800) for _ in range(48)]
    assert [r.requested_active_power for r in results] == sample_series(config, 0, 1800.0, 48)[0]
    for result in results:
        assert result.requested_apparent_power == result.requested_active_power


def test_power_source_reports_voltage_and_current():
    config = _config()
    source = SyntheticPowerSource(Clock(11 * NS_PER_HOUR), config)
    result = source.step(3600)
    assert result.voltage == 400.0
    assert result.current == result.power / 400.0
    night = SyntheticPowerSource(Clock(0), config).step(3600)
    assert night.power == 0.0
    assert night.voltage == 400.0


def test_scripted_context_reveals_records_at_step_start():
    """A record becomes visible on the first step that starts at or after
    its recording time, never earlier."""
    records = context_records_for_jobs(
        generate_job_events(seed=5, day_count=1), announce_lead_ns=0
    )
    record = records[0]
    context = ScriptedContext(Clock(record.recorded_at_ns - 3600 * 10**9), records)
    before = context.step(3600)
    at = context.step(3600)
    assert record not in before
    assert record in at


def test_generate_job_events_is_seeded():
    a = generate_job_events(seed=4, day_count=3)
    b = generate_job_events(seed=4, day_count=3)
    c = generate_job_events(seed=5, day_count=3)
    assert a == b
    assert a != c
    assert len(a) == 6


def test_generated_jobs_fall_in_their_day_window():
    for job in generate_job_events(seed=9, day_count=2, jobs_per_day=3):
        begin_hour = (job.begins_at_ns % NS_PER_DAY) / NS_PER_HOUR
        duration_h = (job.ends_at_ns - job.begins_at_ns) / NS_PER_HOUR
        assert 7.0 <= begin_hour <= 19.0
        assert 2.0 <= duration_h <= 6.0
        assert job.watts_per_effort == 250.0
        assert job.true_effort >= 1.0


def test_job_announcements_carry_numeric_hints():
    """Announcements lead by ten hours; cores always present, files only for
    the heavier jobs."""
    jobs = generate_job_events(seed=2, day_count=2)
    records = context_records_for_jobs(jobs)
    assert len(records) == len(jobs)
    for job, record in zip(jobs, records):
        assert record.recorded_at_ns == max(job.begins_at_ns - 10 * NS_PER_HOUR, 0)
        assert record.begins_at_ns == job.begins_at_ns
        assert record.ends_at_ns == job.ends_at_ns
        assert record.text() == job.description
        assert record.payload["cores"] == int(round(2 * job.true_effort))
        if job.true_effort >= 3.0:
            assert record.payload["files"] == int(100 * job.true_effort)
        else:
            assert "files" not in record.payload


def test_two_tier_price_schedule():
    schedule = build_price_schedule(PriceTiers(), start_ns=0, day_count=2)
    assert schedule.price_at(7 * NS_PER_HOUR) == 0.10
    assert schedule.price_at(8 * NS_PER_HOUR) == 0.40
    assert schedule.price_at(20 * NS_PER_HOUR - 1) == 0.40
    assert schedule.price_at(20 * NS_PER_HOUR) == 0.10
    assert schedule.price_at(NS_PER_DAY + 9 * NS_PER_HOUR) == 0.40
    # Beyond the last day the final off-peak segment extends right-open.
    assert schedule.price_at(5 * NS_PER_DAY) == 0.10


def test_price_schedule_starts_at_the_window_day():
    schedule = build_price_schedule(PriceTiers(), start_ns=3 * NS_PER_DAY, day_count=1)
    with pytest.raises(ConfigurationError):
        schedule.price_at(3 * NS_PER_DAY - 1)
    assert schedule.price_at(3 * NS_PER_DAY) == 0.10


def test_peak_to_midnight_needs_no_trailing_breakpoint():
    tiers = PriceTiers(peak_start_hour=8, peak_end_hour=24)
    schedule = build_price_schedule(tiers, start_ns=0, day_count=1)
    assert schedule.price_at(NS_PER_DAY - 1) == 0.40
    assert schedule.price_at(NS_PER_DAY) == 0.10


def test_tier_and_job_validation():
    with pytest.raises(ValueError):
        PriceTiers(peak_start_hour=20, peak_end_hour=8)
    with pytest.raises(ValueError):
        PriceTiers(off_peak_price=-0.1)
    with pytest.raises(ValueError):
        JobEvent(10, 10, "x", 1.0, 1.0)
    with pytest.raises(ValueError):
        JobEvent(0, 10, "x", -1.0, 1.0)


def test_scenario_config_validation():
    with pytest.raises(ValueError):
        _config(pv_noise_amplitude=1.5)
    with pytest.raises(ValueError):
        _config(sunrise_hour=19.0, sunset_hour=6.0)
    with pytest.raises(ValueError):
        SyntheticScenarioConfig(day_count=0)
