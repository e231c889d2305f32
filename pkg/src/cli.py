#!/usr/bin/env python3
"""
TMA Trajectory Optimizer

Command-line entry point for the rolling-window SMC trajectory optimizer and
its fuel analysis tools.

Commands:
- simulate      Run a scenario through the MPC loop and write trajectories,
                a summary, SMC diagnostics and gnuplot data
- estimate-fuel Run both reverse fuel estimators over a trace CSV
- compare       Compare estimated fuel against simulated fuel, or recompute
                the savings of a published totals table
- benchmark     Time settled MPC steps over chunk sizes and worker counts
- gen-traces    Write synthetic trace CSVs from a simulation or from scripted
                holding-stack arrivals

Usage:
    python src/cli.py <command> [options]

Environment Variables:
    TMA_LOG_LEVEL  - Console verbosity: DEBUG, INFO, WARNING, ERROR (default: INFO)
    TMA_DATA_DIR   - Directory holding aircraft/ and population_centres.csv (default: data/)
    TMA_WORKERS    - Default worker process count (default: scenario smc.workers)
    TMA_CHUNK_SIZE - Default particles per chunk (default: scenario smc.chunk_size)
    TMA_PARTICLES  - Override the scenario particle count

Exit codes:
    0 success, 1 configuration, input or constraint failure, 2 infeasible scenario

Example:
    python src/cli.py simulate --scenario data/scenarios/arrivals_12.json --seed 7 --out runs/arrivals
    python src/cli.py simulate --scenario data/scenarios/noise_south.json --seed 1 --noise-weight 20 --out runs/noise
    python src/cli.py estimate-fuel --traces runs/traces.csv --out runs/fuel.json
    python src/cli.py benchmark --chunks 1,32,256 --workers 1,2,4
"""

import argparse
import json
import sys
from pathlib import Path

# Add the source directory to Python path so sub-packages import by name
sys.path.insert(0, str(Path(__file__).parent))

from bench.bench_parallel import best_result, results_frame, run_bench
from entities.aircraft import AircraftParams
from entities.scenario import Scenario, default_data_dir
from entities.trace import CO2_PER_KG_FUEL
from env_loader import EnvironmentLoader, get_env_int
from errors import ConfigError, InfeasibleError, TraceFormatError
from fuel.fuel_analysis import compare, estimate_all, ingest, load_published_totals
from fuel.trace_generator import generate_holding_traces, generate_traces, simulated_fuel, write_traces_csv
from log_utils import log, print_step, print_steps_summary
from optimizer.rng_streams import entropy_seed
from simulator.run_outputs import (write_diagnostics_jsonl, write_fuel_plot_data, write_plot_data,
                                   write_summary_json, write_trajectories_csv)
from simulator.scenario_runner import low_fuel_experiment, run

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
NOISE_PRESETS = (0, 10, 20)

SCENARIO_KEYS_HELP = """
Scenario file keys (JSON, all blocks optional except aircraft):
  name, description
  tma:        radius_m, dt_s, horizon, exit_distance_m, step_limit, isa_density, air_density
  landing:    p_runway_m, p_beta_deg, p_chi_deg, p_vs_mps
  separation: p_r_m, p_h_m
  wind:       nx, ny, nz, extent [[xmin,xmax],[ymin,ymax],[zmin,zmax]],
              sigma_profile [[z_m, sigma_mps], ...], lambda_per_s, beta_per_m, gamma_per_m, g_t_s,
              nominal [{time_s, speed_mps, bearing_deg}, ...]
  smc:        particles, iterations, schedule {base, scale, rate},
              perturb_sigma {thrust_frac, bank_deg, climb_deg}, anneal, chunk_size, workers, elitism
  noise:      weight (fraction, 0 disables), centres_file, grid_spacing_m, altitude_cutoff_m
  aircraft:   list of {id, type, kind: arrival|departure, entry_step, fuel_reserve_fraction,
              initial {x_m, y_m, z_m, vs_mps, chi_deg, mass_kg} or {boundary_bearing_deg, ...},
              goal: departure {target_altitude_m, target_bearing_deg, target_airspeed_mps,
                               weights [bearing, fuel, altitude, airspeed]}
                    arrival   {descent_angle_deg, weights [heading, descent, fuel]}}
"""


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = entropy_seed()
    log(f"No --seed given, using seed {seed}")
    return seed


def _load_scenario(args) -> Scenario:
    scenario = Scenario.load(args.scenario, data_dir=args.data_dir)
    particles = args.particles or get_env_int("TMA_PARTICLES")
    chunk_size = getattr(args, "chunk_size", None) or get_env_int("TMA_CHUNK_SIZE")
    return scenario.with_smc(particles=particles, chunk_size=chunk_size, iterations=args.iterations)


def _workers(args, scenario: Scenario) -> int:
    return args.workers or get_env_int("TMA_WORKERS") or scenario.smc.workers


def _types(data_dir) -> dict:
    base = Path(data_dir) if data_dir else default_data_dir()
    return AircraftParams.load_directory(base / "aircraft")


def cmd_simulate(args) -> int:
    executed, failed = [], []
    scenario = _load_scenario(args)
    if args.noise_weight is not None:
        scenario = scenario.with_noise_weight(args.noise_weight / 100.0)
    seed = _seed(args)
    workers = _workers(args, scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.low_fuel_repeats:
        print_step(1, 2, "Low-fuel landing order experiment", repeats=args.low_fuel_repeats, seed=seed)
        table = low_fuel_experiment(scenario, args.low_fuel_repeats, base_seed=seed, workers=workers)
        table.to_frame().to_csv(out / "low_fuel.csv", index=False)
        table.seeds_frame().to_csv(out / "low_fuel_seeds.csv", index=False)
        executed.append("Low-fuel experiment")
        print_step(2, 2, "Report")
        print(table.to_frame().to_string(index=False))
        if not table.mass_ok:
            failed.append("Mass constraint")
        print_steps_summary("Low-fuel experiment", executed, failed)
        return EXIT_CONFIG if failed else EXIT_OK

    print_step(1, 3, "Run MPC loop", scenario=scenario.name, seed=seed, workers=workers,
               particles=scenario.smc.particles, noise_weight=scenario.noise.weight)
    record = run(scenario, seed, workers=workers, log_events=True)
    executed.append("MPC loop")

    print_step(2, 3, "Write outputs", out=str(out))
    write_trajectories_csv(record, out / "trajectories.csv")
    write_summary_json(record, out / "summary.json")
    write_diagnostics_jsonl(record.diagnostics, out / "diagnostics.jsonl")
    write_plot_data(record, out)
    executed.append("Outputs")

    print_step(3, 3, "Summary")
    for outcome in record.aircraft.values():
        print(f"   {outcome.aircraft_id:>6} {outcome.kind:<9} {outcome.mode:<10} "
              f"fuel {outcome.fuel_burned_kg:8.1f} kg  violations {len(outcome.violations)}")
    print(f"   Peak concurrency: {record.peak_concurrency}")
    if record.aborted is not None:
        failed.append("MPC loop")
        print_steps_summary("Simulation", executed, failed)
        log(f"Scenario infeasible at step {record.aborted['step']} "
            f"(aircraft {record.aborted['aircraft_id']}): {record.aborted['message']}", "ERROR")
        return EXIT_INFEASIBLE
    print_steps_summary("Simulation", executed, failed)
    return EXIT_OK


def _overrides(values: list) -> dict:
    overrides = {}
    for value in values or []:
        aircraft_id, _, kind = value.partition("=")
        if kind not in ("arrival", "departure"):
            raise ConfigError(f"--override expects ID=arrival|departure, got {value!r}", source="--override")
        overrides[aircraft_id] = kind
    return overrides


def _simulated_from_summary(path) -> dict:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            summary = json.load(f)
    except (FileNotFoundError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read simulation summary: {e}", source=str(path))
    return {a["aircraft_id"]: a["fuel_burned_kg"] for a in summary.get("aircraft", [])}


def _print_report(report):
    print(report.to_frame().to_string(index=False))
    co2 = report.co2_kg()
    if report.saving_kg is not None:
        print(f"   Fuel saving: {report.saving_kg:.1f} kg ({co2['saving']:.1f} kg CO2)")
    print(f"   Mean estimated fuel CO2: {co2['mean_F']:.1f} kg")


def _write_report(report, out: Path):
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix.lower() == ".csv":
        report.to_frame().to_csv(out, index=False)
    else:
        with open(out, 'w', encoding='utf-8') as f:
            json.dump(report.to_dict(), f, indent=2)


def _estimate(args, simulated=None):
    if not args.traces:
        raise ConfigError("--traces is required", source="--traces")
    types = _types(args.params)
    result = ingest(args.traces, types, min_altitude_m=args.min_altitude, radius_m=args.radius,
                    overrides=_overrides(args.override))
    if not result.traces:
        raise TraceFormatError("No usable traces after filtering")
    first, second = estimate_all(result.traces, types, log_events=True)
    if simulated is not None:
        simulated = {k: v for k, v in simulated.items() if k in first}
    return compare(first, second, simulated)


def cmd_estimate_fuel(args) -> int:
    print_step(1, 2, "Estimate fuel", traces=args.traces)
    report = _estimate(args)
    print_step(2, 2, "Write report", out=args.out)
    _write_report(report, Path(args.out))
    write_fuel_plot_data(report, Path(args.out).parent)
    _print_report(report)
    print_steps_summary("Fuel estimation", ["Estimate fuel", "Write report"], [])
    return EXIT_OK


def cmd_compare(args) -> int:
    if args.published:
        report = load_published_totals(args.published)
    elif args.traces and args.summary:
        report = _estimate(args, _simulated_from_summary(args.summary))
    else:
        raise ConfigError("compare needs --published FILE, or --traces FILE with --summary FILE", source="compare")
    _print_report(report)
    if args.out:
        _write_report(report, Path(args.out))
    print(f"   CO2 per kg of fuel: {CO2_PER_KG_FUEL} kg")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    scenario = _load_scenario(args)
    chunks = [int(c) for c in args.chunks.split(",")]
    workers = [int(w) for w in args.workers_list.split(",")]
    seed = _seed(args)
    print_step(1, 2, "Time settled MPC steps", chunks=args.chunks, workers=args.workers_list,
               particles=scenario.smc.particles)
    results = run_bench(scenario, chunks, workers, seed=seed)
    print_step(2, 2, "Write results", out=args.out)
    frame = results_frame(results)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(args.out, index=False)
    print(frame.to_string(index=False))
    best = best_result(results)
    log(f"Fastest layout: chunk {best.chunk_size} x {best.workers} worker(s), {best.mean_step_s:.3f} s/step",
        "SUCCESS")
    if not all(r.controls_match for r in results):
        log("Selected controls differ between layouts", "ERROR")
        return EXIT_CONFIG
    return EXIT_OK


def cmd_gen_traces(args) -> int:
    seed = _seed(args)
    if args.mode == "holding":
        params = _types(args.data_dir)[args.type]
        traces = generate_holding_traces(params, args.count, args.holding_minutes, seed,
                                         resample_s=args.resample, log_events=True)
    else:
        if not args.scenario:
            raise ConfigError("gen-traces --mode mpc needs --scenario", source="--scenario")
        scenario = _load_scenario(args)
        record = run(scenario, seed, workers=_workers(args, scenario), log_events=True)
        if record.aborted is not None:
            log(f"Scenario infeasible at step {record.aborted['step']}: {record.aborted['message']}", "ERROR")
            return EXIT_INFEASIBLE
        traces = generate_traces(record, args.resample)
        if args.summary:
            with open(args.summary, 'w', encoding='utf-8') as f:
                json.dump(record.to_summary(), f, indent=2)
        log(f"Simulated fuel: {sum(simulated_fuel(record).values()):.1f} kg")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_traces_csv(traces, args.out)
    log(f"Wrote {len(traces)} trace(s) to {args.out}", "SUCCESS")
    return EXIT_OK


def _add_run_options(parser: argparse.ArgumentParser):
    parser.add_argument('--seed', type=int, default=None, help='Random seed (default: derived from entropy and logged)')
    parser.add_argument('--data-dir', type=str, default=None, help='Data directory (default: TMA_DATA_DIR or data/)')
    parser.add_argument('--workers', type=int, default=None, help='Worker processes (default: TMA_WORKERS)')
    parser.add_argument('--particles', type=int, default=None, help='Override smc.particles')
    parser.add_argument('--iterations', type=int, default=None, help='Override smc.iterations')


def _add_trace_options(parser: argparse.ArgumentParser):
    parser.add_argument('--traces', type=str, help='Trace CSV (t_s,aircraft_id,type,flag,x_m,y_m,z_m,vs_mps,chi_deg)')
    parser.add_argument('--params', type=str, default=None, help='Data directory with aircraft/ parameter files')
    parser.add_argument('--min-altitude', type=float, default=100.0, help='On-ground altitude threshold in m')
    parser.add_argument('--radius', type=float, default=50000.0, help='Keep samples within this distance in m')
    parser.add_argument('--override', action='append', help='Correct a classification: ID=arrival|departure')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='TMA multi-aircraft trajectory optimizer',
                                     epilog=SCENARIO_KEYS_HELP,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest='command', required=True)

    simulate = sub.add_parser('simulate', help='Run a scenario', epilog=SCENARIO_KEYS_HELP,
                              formatter_class=argparse.RawDescriptionHelpFormatter)
    simulate.add_argument('--scenario', type=str, required=True, help='Scenario JSON file')
    simulate.add_argument('--out', type=str, required=True, help='Output directory')
    simulate.add_argument('--noise-weight', type=float, default=None,
                          help=f'Noise cost weight in percent (presets {NOISE_PRESETS})')
    simulate.add_argument('--low-fuel-repeats', type=int, default=None,
                          help='Run the two-arrival landing order experiment over this many seeds')
    _add_run_options(simulate)
    simulate.set_defaults(func=cmd_simulate)

    estimate = sub.add_parser('estimate-fuel', help='Estimate fuel from recorded traces')
    _add_trace_options(estimate)
    estimate.add_argument('--out', type=str, required=True, help='Report file (.json or .csv)')
    estimate.set_defaults(func=cmd_estimate_fuel)

    comparison = sub.add_parser('compare', help='Compare simulated and estimated fuel')
    _add_trace_options(comparison)
    comparison.add_argument('--summary', type=str, default=None, help='summary.json of a simulate run')
    comparison.add_argument('--published', type=str, default=None,
                            help='Totals CSV (scenario,fs_kg,f1_kg,f2_kg) to recompute savings from')
    comparison.add_argument('--out', type=str, default=None, help='Report file (.json or .csv)')
    comparison.set_defaults(func=cmd_compare)

    bench = sub.add_parser('benchmark', help='Chunk size / worker count throughput study')
    bench.add_argument('--scenario', type=str, default=str(default_data_dir() / "scenarios" / "bench_10.json"),
                       help='Benchmark scenario (default: 10 arrivals entering at step 5)')
    bench.add_argument('--chunks', type=str, default='1,32,256', help='Comma-separated chunk sizes')
    bench.add_argument('--workers-list', '--workers', dest='workers_list', type=str, default='1',
                       help='Comma-separated worker counts')
    bench.add_argument('--out', type=str, default='bench.csv', help='Results CSV')
    bench.add_argument('--seed', type=int, default=0, help='Random seed (default: 0)')
    bench.add_argument('--data-dir', type=str, default=None, help='Data directory')
    bench.add_argument('--particles', type=int, default=None, help='Override smc.particles')
    bench.add_argument('--iterations', type=int, default=None, help='Override smc.iterations')
    bench.set_defaults(func=cmd_benchmark)

    traces = sub.add_parser('gen-traces', help='Write synthetic trace CSVs')
    traces.add_argument('--mode', choices=['mpc', 'holding'], default='mpc')
    traces.add_argument('--scenario', type=str, default=None, help='Scenario JSON file (mpc mode)')
    traces.add_argument('--resample', type=float, default=60.0, help='Trace sample interval in s')
    traces.add_argument('--out', type=str, required=True, help='Trace CSV')
    traces.add_argument('--summary', type=str, default=None, help='Also write the run summary.json (mpc mode)')
    traces.add_argument('--count', type=int, default=10, help='Holding arrivals to generate')
    traces.add_argument('--holding-minutes', type=float, default=8.0, help='Minutes each arrival holds')
    traces.add_argument('--type', type=str, default='A320', help='Aircraft type (holding mode)')
    _add_run_options(traces)
    traces.set_defaults(func=cmd_gen_traces)
    return parser


def main(argv=None) -> int:
    """Main function."""
    # before the parser: its defaults read TMA_DATA_DIR
    EnvironmentLoader(required=False, log_events=False).set_env_vars()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as e:
        log(f"Scenario infeasible: {e} (aircraft {e.aircraft_id}, step {e.mpc_step})", "ERROR")
        return EXIT_INFEASIBLE
    except (ConfigError, TraceFormatError) as e:
        where = getattr(e, "source", None) or (f"line {e.line_number}" if getattr(e, "line_number", None) else None)
        log(f"{e}" + (f" [{where}]" if where else ""), "ERROR")
        return EXIT_CONFIG
    except (FileNotFoundError, KeyError) as e:
        log(f"Missing input: {e}", "ERROR")
        return EXIT_CONFIG
    except KeyboardInterrupt:
        log("Interrupted by user", "WARNING")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
