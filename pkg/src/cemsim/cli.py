"""Command-line interface: scenario runs, strategy comparison, forecast
evaluation, and recording validation.

Exit codes: 0 success, 1 configuration error (bad flags, bad scenario,
missing files, invalid recordings), 2 runtime simulation error.  All
commands are deterministic for fixed seeds and inputs; artifacts are
byte-identical across reruns.  The ``CEMSIM_LOG`` environment variable
sets the log level (debug/info/warning/error).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .core import ConfigurationError, SimulationError
from .engine import MAXIMA_KEYS, SimulatorStepOutput, run
from .forecast import evaluate_families
from .models.synthetic import (
    NS_PER_DAY,
    NS_PER_HOUR,
    context_records_for_jobs,
    generate_job_events,
    load_power_at,
)
from .replay import IngestError, ingest_context, ingest_timeseries
from .scenario import (
    STRATEGIES,
    Scenario,
    SimulationBundle,
    build_bundle,
    load_scenario,
    synthetic_config,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

logger = logging.getLogger(__name__)

STEP_HEADER = (
    "step_index",
    "time_ns",
    "pv_voltage",
    "pv_current",
    "pv_power",
    "load_active_power",
    "load_apparent_power",
    "battery_mode",
    "battery_current",
    "battery_soc",
    "battery_voltage",
    "battery_delta_energy_j",
    "battery_delta_charge_c",
    "grid_requested_active_power",
    "grid_requested_apparent_power",
    "grid_delivered_active_power",
    "grid_delivered_apparent_power",
    "grid_cost",
    "pv_power_drawn",
    "generated_wh",
    "consumed_wh",
    "purchased_wh",
    "charged_wh",
    "discharged_wh",
    "cost",
)

SUMMARY_SCHEMA_VERSION = 1


def _fmt(value: float) -> str:
    return format(value, ".17g")


def _step_row(output: SimulatorStepOutput) -> list:
    grid_cost = getattr(output.grid, "cost", 0.0)
    return [
        output.step_index,
        output.time_ns,
        _fmt(output.power_source.voltage),
        _fmt(output.power_source.current),
        _fmt(output.power_source.power),
        _fmt(output.load.requested_active_power),
        _fmt(output.load.requested_apparent_power),
        output.inverter.battery_input.mode.value,
        _fmt(output.inverter.battery_input.current),
        _fmt(output.battery.soc),
        _fmt(output.battery.voltage),
        _fmt(output.battery.delta_energy),
        _fmt(output.battery.delta_charge),
        _fmt(output.inverter.grid_input.requested_active_power),
        _fmt(output.inverter.grid_input.requested_apparent_power),
        _fmt(output.grid.delivered_active_power),
        _fmt(output.grid.delivered_apparent_power),
        _fmt(grid_cost),
        _fmt(output.inverter.pv_power_drawn),
        _fmt(output.aggregates.generated_wh),
        _fmt(output.aggregates.consumed_wh),
        _fmt(output.aggregates.purchased_wh),
        _fmt(output.aggregates.charged_wh),
        _fmt(output.aggregates.discharged_wh),
        _fmt(output.aggregates.cost),
    ]


_CHANNEL_SUBSYSTEMS = {"pv": 1, "load": 2, "battery": 3, "grid": 4}


def _channel_rows(output: SimulatorStepOutput, subsystems: dict[str, int]) -> list[tuple]:
    t = output.time_ns
    return [
        (t, subsystems["pv"], "pv_voltage", output.power_source.voltage),
        (t, subsystems["pv"], "pv_current", output.power_source.current),
        (t, subsystems["pv"], "pv_power", output.power_source.power),
        (t, subsystems["load"], "load_active_power", output.load.requested_active_power),
        (t, subsystems["load"], "load_apparent_power", output.load.requested_apparent_power),
        (t, subsystems["battery"], "battery_soc", output.battery.soc),
        (t, subsystems["battery"], "battery_voltage", output.battery.voltage),
        (t, subsystems["battery"], "battery_current", output.inverter.battery_input.current),
        (t, subsystems["grid"], "grid_active_power", output.grid.delivered_active_power),
        (t, subsystems["grid"], "grid_apparent_power", output.grid.delivered_apparent_power),
    ]


def _summary_payload(scenario: Scenario, bundle: SimulationBundle, last: SimulatorStepOutput, steps: int) -> dict:
    aggregates = bundle.simulator.aggregates()
    return {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "strategy": bundle.strategy,
        "seed": scenario.seed,
        "start_epoch_seconds": scenario.start_ns // 1_000_000_000,
        "horizon_seconds": scenario.horizon_seconds,
        "step_seconds": scenario.step_seconds,
        "steps": steps,
        "final_soc": last.battery.soc,
        "aggregates": {
            "generated_wh": aggregates.generated_wh,
            "consumed_wh": aggregates.consumed_wh,
            "purchased_wh": aggregates.purchased_wh,
            "charged_wh": aggregates.charged_wh,
            "discharged_wh": aggregates.discharged_wh,
            "cost": aggregates.cost,
        },
        "maxima": {key: bundle.simulator.maxima()[key] for key in MAXIMA_KEYS},
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def run_to_directory(bundle: SimulationBundle, out_dir: Path) -> dict:
    """Run one assembled simulation, streaming artifacts to ``out_dir``.

    Emits steps.csv (every step-result field plus running aggregates),
    channels.csv (replay-ingestible recording), context.jsonl (the
    scenario's context records) and summary.json; returns the summary.
    """
    scenario = bundle.scenario
    out_dir.mkdir(parents=True, exist_ok=True)
    channel_buffer: list[tuple] = []
    last_output: list[SimulatorStepOutput] = []

    with open(out_dir / "steps.csv", "w", newline="") as steps_handle:
        writer = csv.writer(steps_handle)
        writer.writerow(STEP_HEADER)

        def sink(output: SimulatorStepOutput) -> None:
            writer.writerow(_step_row(output))
            channel_buffer.extend(_channel_rows(output, _CHANNEL_SUBSYSTEMS))
            if last_output:
                last_output[0] = output
            else:
                last_output.append(output)

        steps = run(bundle.simulator, scenario.total_ticks, scenario.step_ticks, sink=sink)

    with open(out_dir / "channels.csv", "w", newline="") as channels_handle:
        writer = csv.writer(channels_handle)
        writer.writerow(["timestamp_ns", "subsystem_id", "channel", "value"])
        for t_ns, subsystem_id, name, value in channel_buffer:
            writer.writerow([t_ns, subsystem_id, name, _fmt(value)])

    with open(out_dir / "context.jsonl", "w") as context_handle:
        for record in bundle.records:
            context_handle.write(
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
                + "\n"
            )

    summary = _summary_payload(scenario, bundle, last_output[0], steps)
    _write_json(out_dir / "summary.json", summary)
    return summary


def _default_out_dir(scenario_path: Path, scenario: Scenario, out_flag: str | None, multi: bool) -> Path:
    if out_flag is not None:
        base = Path(out_flag)
        return base / scenario_path.stem if multi else base
    if scenario.output_dir is not None:
        configured = Path(scenario.output_dir)
        return configured if configured.is_absolute() else scenario.base_dir / configured
    return scenario_path.parent / f"{scenario_path.stem}.out"


def cmd_run(args: argparse.Namespace) -> int:
    paths = [Path(p) for p in args.scenario]
    multi = len(paths) > 1

    def one(path: Path) -> int:
        try:
            scenario = load_scenario(path, args.seed, args.step_seconds)
            bundle = build_bundle(scenario, "default")
            out_dir = _default_out_dir(path, scenario, args.out, multi)
            summary = run_to_directory(bundle, out_dir)
        except (ConfigurationError, ValueError, OSError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except SimulationError as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        print(f"{path}: {summary['steps']} steps, cost {summary['aggregates']['cost']:.6f} -> {out_dir}")
        return EXIT_OK

    if multi and args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(one, paths))
    else:
        codes = [one(path) for path in paths]
    return max(codes)


def _cumulative_cost_at(outputs: list[SimulatorStepOutput], t_ns: int) -> float:
    """Running cost at the last step boundary at or before ``t_ns``."""
    cost = 0.0
    for output in outputs:
        if output.time_ns > t_ns:
            break
        cost = output.aggregates.cost
    return cost


def _single_scenario(args: argparse.Namespace) -> Path:
    if len(args.scenario) != 1:
        raise ConfigurationError("this command takes exactly one --scenario")
    return Path(args.scenario[0])


def cmd_compare(args: argparse.Namespace) -> int:
    path = _single_scenario(args)
    strategies = args.strategies.split(",") if args.strategies else list(STRATEGIES)
    strategies = [s.strip() for s in strategies if s.strip()]
    for strategy in strategies:
        if strategy not in STRATEGIES:
            print(f"error: unknown strategy {strategy!r}; known: {list(STRATEGIES)}", file=sys.stderr)
            return EXIT_CONFIG

    try:
        scenario = load_scenario(path, args.seed, args.step_seconds)
        out_dir = _default_out_dir(path, scenario, args.out, False)
        out_dir.mkdir(parents=True, exist_ok=True)
        results: dict[str, list[SimulatorStepOutput]] = {}
        bundles: dict[str, SimulationBundle] = {}
        for strategy in strategies:
            bundle = build_bundle(scenario, strategy)
            outputs = run(bundle.simulator, scenario.total_ticks, scenario.step_ticks)
            results[strategy] = outputs
            bundles[strategy] = bundle
    except (ConfigurationError, ValueError, OSError) as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    reference = results[strategies[0]]
    with open(out_dir / "running_cost.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step_index", "time_ns"] + [f"cost_{s}" for s in strategies])
        for i, output in enumerate(reference):
            row = [output.step_index, output.time_ns]
            row.extend(_fmt(results[s][i].aggregates.cost) for s in strategies)
            writer.writerow(row)

    # Per-day, per-hour cumulative savings of context-aware MPC over the
    # PV-first default (cumulative within each day).
    if "default" in results and "mpc-context" in results:
        with open(out_dir / "savings.csv", "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["day"] + [f"h{h:02d}" for h in range(24)])
            for day in range(scenario.day_count):
                day_start = scenario.start_ns + day * NS_PER_DAY
                base = _cumulative_cost_at(results["default"], day_start)
                base_ctx = _cumulative_cost_at(results["mpc-context"], day_start)
                row: list = [day]
                for hour in range(24):
                    boundary = min(day_start + (hour + 1) * NS_PER_HOUR, scenario.end_ns)
                    saved = (_cumulative_cost_at(results["default"], boundary) - base) - (
                        _cumulative_cost_at(results["mpc-context"], boundary) - base_ctx
                    )
                    row.append(_fmt(saved))
                writer.writerow(row)

    for strategy, bundle in bundles.items():
        if bundle.controller is not None and bundle.controller.first_plan is not None:
            bundle.controller.first_plan.write_csv(out_dir / f"plan_{strategy}.csv")

    summary = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "seed": scenario.seed,
        "horizon_seconds": scenario.horizon_seconds,
        "step_seconds": scenario.step_seconds,
        "strategies": {
            strategy: {
                "cost": results[strategy][-1].aggregates.cost,
                "purchased_wh": results[strategy][-1].aggregates.purchased_wh,
                "final_soc": results[strategy][-1].battery.soc,
            }
            for strategy in strategies
        },
    }
    _write_json(out_dir / "summary.json", summary)
    for strategy in strategies:
        print(f"{strategy}: cost {summary['strategies'][strategy]['cost']:.6f}")
    return EXIT_OK


def cmd_forecast_eval(args: argparse.Namespace) -> int:
    path = _single_scenario(args)
    try:
        scenario = load_scenario(path, args.seed, args.step_seconds)
        families = (
            [f.strip() for f in args.families.split(",") if f.strip()]
            if args.families
            else scenario.forecast["families"]
        )
        base = synthetic_config(scenario)
        out_dir = _default_out_dir(path, scenario, args.out, False)
        out_dir.mkdir(parents=True, exist_ok=True)

        rows = []
        means: dict[str, list[float]] = {family: [] for family in families}
        for resample in range(scenario.forecast["resamples"]):
            seed = scenario.seed + resample
            jobs = generate_job_events(
                seed,
                scenario.day_count,
                start_ns=scenario.start_ns,
                jobs_per_day=scenario.load.get("jobs_per_day", 2),
                watts_per_effort=scenario.load.get("watts_per_effort", 250.0),
            )
            config = replace(base, seed=seed, job_events=jobs)
            records = context_records_for_jobs(jobs)
            step_ns = scenario.step_ns
            count = (scenario.end_ns - scenario.start_ns) // step_ns
            times = [scenario.start_ns + (i + 1) * step_ns for i in range(count)]
            loads = [load_power_at(config, t) for t in times]
            report = evaluate_families(
                records,
                times,
                loads,
                train_fraction=scenario.forecast["train_fraction"],
                families=families,
            )
            for family in families:
                rows.append((family, resample, report[family]))
                means[family].append(report[family])
    except (ConfigurationError, ValueError, OSError) as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    rows.sort(key=lambda item: (families.index(item[0]), item[1]))
    with open(out_dir / "rmse.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["family", "resample", "rmse_w"])
        for family, resample, value in rows:
            writer.writerow([family, resample, _fmt(value)])

    summary = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "seed": scenario.seed,
        "resamples": scenario.forecast["resamples"],
        "mean_rmse_w": {family: sum(values) / len(values) for family, values in means.items()},
    }
    _write_json(out_dir / "summary.json", summary)
    for family in families:
        print(f"{family}: mean rmse {summary['mean_rmse_w'][family]:.3f} W")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    all_ok = True
    for raw in args.files:
        path = Path(raw)
        try:
            if not path.is_file():
                raise IngestError(f"file does not exist: {path}")
            if path.suffix == ".csv":
                table = ingest_timeseries(path)
                detail = f"{len(table)} channels"
            elif path.suffix == ".jsonl":
                records = ingest_context(path)
                detail = f"{len(records)} context records"
            else:
                raise IngestError(f"unsupported file type {path.suffix!r} (expected .csv or .jsonl)")
        except (IngestError, ValueError, OSError) as exc:
            print(f"FAIL {path}: {exc}")
            all_ok = False
            continue
        print(f"PASS {path}: {detail}")
    return EXIT_OK if all_ok else EXIT_CONFIG


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; flag misuse is a config error here
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cemsim", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, many_scenarios: bool) -> None:
        p.add_argument(
            "--scenario",
            action="append",
            required=True,
            metavar="PATH",
            help="scenario JSON file" + (" (repeatable)" if many_scenarios else ""),
        )
        p.add_argument("--out", metavar="DIR", help="output directory (default: from the scenario)")
        p.add_argument("--seed", type=int, help="override the scenario's seed")
        p.add_argument("--step-seconds", type=int, metavar="N", help="override the scenario's step length")

    p_run = sub.add_parser("run", help="run one or more scenarios under PV-first dispatch")
    add_common(p_run, True)
    p_run.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel scenario runs (default 1)")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run one scenario under several dispatch strategies")
    add_common(p_cmp, False)
    p_cmp.add_argument(
        "--strategies",
        metavar="LIST",
        help=f"comma-separated subset of {','.join(STRATEGIES)} (default: all)",
    )
    p_cmp.set_defaults(func=cmd_compare)

    p_fe = sub.add_parser("forecast-eval", help="evaluate forecast feature families on synthetic data")
    add_common(p_fe, False)
    p_fe.add_argument("--families", metavar="LIST", help="comma-separated subset of feature families")
    p_fe.set_defaults(func=cmd_forecast_eval)

    p_val = sub.add_parser("validate", help="validate recording files (channel CSV / context JSONL)")
    p_val.add_argument("files", nargs="+", metavar="FILE", help="files to validate")
    p_val.set_defaults(func=cmd_validate)

    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("CEMSIM_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
