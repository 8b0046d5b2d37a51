"""cemsim: a component-based microgrid digital twin.

Simulates a small energy system (PV array, battery, hybrid inverter,
priced grid connection, household/lab load) in discrete steps on an
integer-nanosecond clock.  On top of the simulator sit replayable
recordings, context-aware load forecasting, and a receding-horizon
controller that buys grid energy when it is cheap.
"""

from .core import (
    Battery,
    BatteryMode,
    BatteryStepInput,
    BatteryStepResult,
    Clock,
    CompensatedSum,
    ConfigurationError,
    Context,
    ContextRecord,
    Grid,
    GridStepInput,
    GridStepResult,
    Inverter,
    InverterStepInput,
    InverterStepResult,
    Load,
    LoadStepResult,
    PowerSource,
    PowerSourceStepResult,
    SimulationError,
    SystemComponent,
    compensated_total,
    context_query,
    grid_energy_cost,
    reactive_power,
    time_ns,
)
from .control import (
    ChargingPlan,
    ChargingProblem,
    ControlDecision,
    ForecastWindow,
    InfeasibleProblemError,
    MPCInverter,
    RecedingHorizonController,
    solve_charging,
)
from .engine import (
    MAXIMA_KEYS,
    Aggregates,
    ComponentStepError,
    Simulator,
    SimulatorStepOutput,
    StepDeltas,
    run,
)
from .forecast import (
    FAMILIES,
    NUMERIC_FIELD_CATALOG,
    Predictor,
    RemoteEstimatorError,
    build_features,
    estimate_effort_heuristic,
    estimate_effort_remote,
    evaluate_families,
    feature_names,
    fit_least_squares,
    rmse,
    train_predictor,
)
from .models import (
    BatteryLinear,
    BatteryLinearConfig,
    GridPriced,
    GridPricedConfig,
    InverterPVFirst,
    InverterPVFirstConfig,
    PriceSchedule,
    PricedGridStepResult,
    PriceTiers,
    ScriptedContext,
    SyntheticLoad,
    SyntheticPowerSource,
    SyntheticScenarioConfig,
    battery_linear_step,
    build_price_schedule,
    context_records_for_jobs,
    generate_job_events,
    grid_priced_step,
    inverter_pv_first_step,
    sample_series,
    unit_noise,
)
from .replay import (
    Channel,
    IngestError,
    ReplayBattery,
    ReplayContext,
    ReplayGrid,
    ReplayLoad,
    ReplayPowerSource,
    TimeSeriesRangeError,
    TimeSeriesTable,
    emit_context,
    emit_timeseries,
    ingest_context,
    ingest_timeseries,
    interpolate,
)
from .scenario import (
    STRATEGIES,
    Scenario,
    SimulationBundle,
    build_bundle,
    load_scenario,
    scenario_from_dict,
)

__version__ = "0.1.0"

__all__ = [
    "Aggregates",
    "Battery",
    "BatteryLinear",
    "BatteryLinearConfig",
    "BatteryMode",
    "BatteryStepInput",
    "BatteryStepResult",
    "Channel",
    "ChargingPlan",
    "ChargingProblem",
    "Clock",
    "CompensatedSum",
    "ComponentStepError",
    "ConfigurationError",
    "Context",
    "ContextRecord",
    "ControlDecision",
    "FAMILIES",
    "ForecastWindow",
    "Grid",
    "GridPriced",
    "GridPricedConfig",
    "GridStepInput",
    "GridStepResult",
    "InfeasibleProblemError",
    "IngestError",
    "Inverter",
    "InverterPVFirst",
    "InverterPVFirstConfig",
    "InverterStepInput",
    "InverterStepResult",
    "Load",
    "LoadStepResult",
    "MAXIMA_KEYS",
    "MPCInverter",
    "NUMERIC_FIELD_CATALOG",
    "PowerSource",
    "PowerSourceStepResult",
    "Predictor",
    "PriceSchedule",
    "PriceTiers",
    "PricedGridStepResult",
    "RecedingHorizonController",
    "RemoteEstimatorError",
    "ReplayBattery",
    "ReplayContext",
    "ReplayGrid",
    "ReplayLoad",
    "ReplayPowerSource",
    "STRATEGIES",
    "Scenario",
    "ScriptedContext",
    "SimulationBundle",
    "SimulationError",
    "Simulator",
    "SimulatorStepOutput",
    "StepDeltas",
    "SyntheticLoad",
    "SyntheticPowerSource",
    "SyntheticScenarioConfig",
    "SystemComponent",
    "TimeSeriesRangeError",
    "TimeSeriesTable",
    "battery_linear_step",
    "build_bundle",
    "build_features",
    "build_price_schedule",
    "compensated_total",
    "context_query",
    "context_records_for_jobs",
    "emit_context",
    "emit_timeseries",
    "estimate_effort_heuristic",
    "estimate_effort_remote",
    "evaluate_families",
    "feature_names",
    "fit_least_squares",
    "generate_job_events",
    "grid_energy_cost",
    "grid_priced_step",
    "ingest_context",
    "ingest_timeseries",
    "interpolate",
    "inverter_pv_first_step",
    "load_scenario",
    "reactive_power",
    "rmse",
    "run",
    "sample_series",
    "scenario_from_dict",
    "solve_charging",
    "time_ns",
    "train_predictor",
    "unit_noise",
]
