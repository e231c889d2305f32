#!/usr/bin/env python3
"""
Rolling-window MPC runner for a TMA scenario.

Each MPC step the runner:
- activates aircraft whose entry step falls inside [step, step + H] and
  drops arrivals that reached the landing sector or departures past D_TMA
- solves one SMC problem over every active aircraft
- applies only the first control of the selected plan to aircraft that have
  entered, under the realised wind field (its own random stream, separate
  from the optimizer's disturbance streams)
- audits the realised states against the envelope, mass and separation
  constraints and records fuel, controls and timing

The run ends when every aircraft has completed, when the step limit is hit,
or when the optimizer reports an infeasible step.
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from dynamics.aircraft_model import air_density, fuel_burn_coeff, step
from dynamics.constraints import check_envelope, check_mass, check_separation, in_landing_sector
from entities.aircraft import AircraftState, ControlInput
from entities.scenario import AircraftEntry, Scenario
from errors import DynamicsDomainError, InfeasibleError
from log_utils import log
from optimizer.horizon import HorizonAircraft, HorizonProblem
from optimizer.rng_streams import StreamPurpose, stream
from optimizer.smc_engine import run_smc
from optimizer.worker_pool import WorkerPool
from wind.wind_field import WindGrid, init_field, sample_at, step_field


@dataclass
class AircraftOutcome:
    aircraft_id: str
    kind: str
    type: str
    entry_step: int
    initial_mass_kg: float
    empty_mass_kg: float
    steps: list = field(default_factory=list)
    states: list = field(default_factory=list)
    controls: list = field(default_factory=list)
    burns: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    mode: str = "unfinished"
    completion_step: Optional[int] = None

    @property
    def final_mass_kg(self) -> float:
        return self.states[-1].mass_kg if self.states else self.initial_mass_kg

    @property
    def fuel_burned_kg(self) -> float:
        return self.initial_mass_kg - self.final_mass_kg

    @property
    def remaining_fuel_kg(self) -> float:
        return self.final_mass_kg - self.empty_mass_kg

    def to_dict(self) -> dict:
        return {
            "aircraft_id": self.aircraft_id,
            "kind": self.kind,
            "type": self.type,
            "entry_step": self.entry_step,
            "mode": self.mode,
            "completion_step": self.completion_step,
            "fuel_burned_kg": round(self.fuel_burned_kg, 3),
            "remaining_fuel_kg": round(self.remaining_fuel_kg, 3),
            "violations": [{"step": s, "constraint": c} for s, c in self.violations],
        }


@dataclass
class RunRecord:
    scenario_name: str
    seed: int
    dt_s: float
    aircraft: dict = field(default_factory=dict)
    step_wall_times: list = field(default_factory=list)
    active_counts: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    aborted: Optional[dict] = None

    @property
    def peak_concurrency(self) -> int:
        return max(self.active_counts, default=0)

    @property
    def total_violations(self) -> int:
        return sum(len(a.violations) for a in self.aircraft.values())

    def to_summary(self) -> dict:
        return {
            "scenario": self.scenario_name,
            "seed": self.seed,
            "steps_run": len(self.step_wall_times),
            "peak_concurrency": self.peak_concurrency,
            "total_fuel_kg": round(sum(a.fuel_burned_kg for a in self.aircraft.values()), 3),
            "total_violations": self.total_violations,
            "aborted": self.aborted,
            "aircraft": [a.to_dict() for a in self.aircraft.values()],
        }


def completion_mode(entry: AircraftEntry, state: AircraftState, scenario: Scenario) -> Optional[str]:
    if entry.is_arrival:
        return "landed" if in_landing_sector(state, scenario.landing) else None
    return "exited" if state.distance_from_airport() >= scenario.exit_distance_m else None


def activate_deactivate(step_index: int, scenario: Scenario, live: dict) -> dict:
    """Live set for this step, mapping aircraft id to its current (or entry) state."""
    horizon = scenario.tma.horizon
    updated = {}
    for entry in scenario.aircraft:
        if entry.aircraft_id in live:
            state = live[entry.aircraft_id]
            if entry.entry_step <= step_index and completion_mode(entry, state, scenario):
                continue
            updated[entry.aircraft_id] = state
        elif step_index <= entry.entry_step <= step_index + horizon:
            updated[entry.aircraft_id] = entry.initial_state
    return updated


class ScenarioRunner:
    """Runs one scenario with one seed."""

    def __init__(self, scenario: Scenario, seed: int, workers: int = 1, log_events: bool = True):
        self.scenario = scenario
        self.seed = seed
        self.workers = workers
        self.log_events = log_events

    def _log(self, message: str, level: str = "INFO"):
        if self.log_events:
            log(message, level)

    def _problem(self, step_index: int, live: dict, wind: WindGrid) -> HorizonProblem:
        sc = self.scenario
        aircraft = tuple(
            HorizonAircraft(aircraft_id=e.aircraft_id, params=e.params, goal=e.goal,
                            offset=max(e.entry_step - step_index, 0), state=live[e.aircraft_id].as_array())
            for e in sc.aircraft if e.aircraft_id in live)
        nominal = np.array([sc.nominal_wind.at((step_index + h) * sc.tma.dt_s) for h in range(sc.tma.horizon)])
        return HorizonProblem(aircraft=aircraft, horizon=sc.tma.horizon, dt_s=sc.tma.dt_s, landing=sc.landing,
                              separation=sc.separation, exit_distance_m=sc.exit_distance_m, wind=wind,
                              nominal_wind=nominal, population=sc.population(),
                              isa_density=sc.tma.isa_density, air_density=sc.tma.air_density)

    def _advance(self, entry: AircraftEntry, state: AircraftState, u: ControlInput, wind: WindGrid,
                 step_index: int) -> AircraftState:
        sc = self.scenario
        w = sample_at(wind, sc.nominal_wind, state.x_m, state.y_m, state.z_m, step_index * sc.tma.dt_s)
        rho = air_density(state.z_m, isa=sc.tma.isa_density, rho_const=sc.tma.air_density)
        eta = fuel_burn_coeff(state.v_s_mps, entry.params)
        return step(state, u, w, sc.tma.dt_s, entry.params, eta, air_density=rho)

    def run(self) -> RunRecord:
        sc = self.scenario
        record = RunRecord(scenario_name=sc.name, seed=self.seed, dt_s=sc.tma.dt_s)
        for e in sc.aircraft:
            record.aircraft[e.aircraft_id] = AircraftOutcome(
                aircraft_id=e.aircraft_id, kind=e.kind, type=e.params.type, entry_step=e.entry_step,
                initial_mass_kg=e.initial_state.mass_kg, empty_mass_kg=e.params.empty_mass_kg)
        entries = {e.aircraft_id: e for e in sc.aircraft}
        wind = init_field(sc.wind, sc.tma.dt_s, stream(self.seed, StreamPurpose.WIND_INIT))
        live = {}
        self._log(f"Running scenario '{sc.name}' with {len(sc.aircraft)} aircraft, seed {self.seed}")

        with WorkerPool(self.workers, log_events=self.log_events) as pool:
            for step_index in range(sc.step_limit):
                live = activate_deactivate(step_index, sc, live)
                pending = any(record.aircraft[e.aircraft_id].mode == "unfinished"
                              and e.aircraft_id not in live and e.entry_step > step_index for e in sc.aircraft)
                if not live and not pending:
                    break
                started = time.perf_counter()
                entered = [i for i in live if entries[i].entry_step <= step_index]
                for aircraft_id in entered:
                    outcome = record.aircraft[aircraft_id]
                    if not outcome.states:
                        outcome.steps.append(step_index)
                        outcome.states.append(live[aircraft_id])

                if live:
                    problem = self._problem(step_index, live, wind)
                    try:
                        result = run_smc(problem, sc.smc, self.seed, step_index, pool, log_events=self.log_events)
                    except InfeasibleError as e:
                        record.aborted = {"step": step_index, "aircraft_id": e.aircraft_id,
                                          "iteration": e.iteration, "message": str(e)}
                        self._log(f"Run aborted at step {step_index}: {e}", "ERROR")
                        break
                    record.diagnostics.extend(result.diagnostics)
                    first = {a.aircraft_id: result.first_controls[i] for i, a in enumerate(problem.aircraft)}
                    if not self._apply(step_index, entered, first, live, wind, entries, record):
                        break

                wind = step_field(wind, stream(self.seed, StreamPurpose.REALISED_WIND, step_index))
                record.step_wall_times.append(time.perf_counter() - started)
                record.active_counts.append(len(entered))

        finished = sum(1 for a in record.aircraft.values() if a.mode != "unfinished")
        level = "SUCCESS" if finished == len(record.aircraft) and record.aborted is None else "WARNING"
        self._log(f"Scenario '{sc.name}': {finished}/{len(record.aircraft)} aircraft completed, "
                  f"{record.total_violations} realised violations, peak concurrency {record.peak_concurrency}",
                  level)
        return record

    def _apply(self, step_index: int, entered: list, first: dict, live: dict, wind: WindGrid,
               entries: dict, record: RunRecord) -> bool:
        for aircraft_id in entered:
            entry, outcome = entries[aircraft_id], record.aircraft[aircraft_id]
            state = live[aircraft_id]
            u = ControlInput.from_array(first[aircraft_id])
            try:
                new_state = self._advance(entry, state, u, wind, step_index)
            except DynamicsDomainError as e:
                record.aborted = {"step": step_index, "aircraft_id": aircraft_id, "iteration": None,
                                  "message": str(e)}
                self._log(f"Run aborted at step {step_index}: {e}", "ERROR")
                return False
            outcome.controls.append(u)
            outcome.burns.append(state.mass_kg - new_state.mass_kg)
            outcome.steps.append(step_index + 1)
            outcome.states.append(new_state)
            for name in check_envelope(new_state, u, entry.params):
                outcome.violations.append((step_index + 1, name))
            if not check_mass(new_state, entry.params):
                outcome.violations.append((step_index + 1, "mass"))
            live[aircraft_id] = new_state
            mode = completion_mode(entry, new_state, self.scenario)
            if mode:
                outcome.mode, outcome.completion_step = mode, step_index + 1
                self._log(f"{aircraft_id} {mode} at step {step_index + 1}", "DEBUG")

        for i, a in enumerate(entered):
            for b in entered[i + 1:]:
                if not check_separation(live[a], live[b], self.scenario.separation):
                    record.aircraft[a].violations.append((step_index + 1, f"separation:{b}"))
                    record.aircraft[b].violations.append((step_index + 1, f"separation:{a}"))
        return True


def run(scenario: Scenario, seed: int, workers: int = 1, log_events: bool = True) -> RunRecord:
    return ScenarioRunner(scenario, seed, workers, log_events).run()


@dataclass
class LowFuelTable:
    first_landings: dict
    remaining_fuel_kg: dict
    mass_ok: bool
    runs: list
    per_seed: list = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{"aircraft_id": k, "landed_first": self.first_landings[k],
                              "mean_remaining_fuel_kg": round(self.remaining_fuel_kg[k], 2)}
                             for k in self.first_landings])

    def seeds_frame(self) -> pd.DataFrame:
        """One row per repeat: seed, first aircraft to land and each arrival's remaining fuel."""
        return pd.DataFrame(self.per_seed)


def low_fuel_experiment(scenario: Scenario, repeats: int, base_seed: int = 0, workers: int = 1,
                        log_events: bool = False) -> LowFuelTable:
    """Landing order and remaining fuel of a two-arrival scenario over `repeats` seeds."""
    arrivals = [e.aircraft_id for e in scenario.aircraft if e.is_arrival]
    if len(arrivals) != 2:
        raise ValueError("The low-fuel experiment needs exactly two arrivals")
    if repeats < 1:
        raise ValueError("The low-fuel experiment needs at least one repeat")
    first = {a: 0 for a in arrivals}
    remaining = {a: [] for a in arrivals}
    mass_ok = True
    runs, per_seed = [], []
    for r in range(repeats):
        seed = base_seed + r
        record = run(scenario, seed, workers, log_events)
        runs.append(record)
        steps = {a: record.aircraft[a].completion_step for a in arrivals}
        landed = {a: s for a, s in steps.items() if s is not None and record.aircraft[a].mode == "landed"}
        winner = None
        if landed:
            earliest = min(landed.values())
            winners = [a for a, s in landed.items() if s == earliest]
            if len(winners) == 1:
                winner = winners[0]
                first[winner] += 1
        row = {"seed": seed, "first_landed": winner}
        for a in arrivals:
            outcome = record.aircraft[a]
            remaining[a].append(outcome.remaining_fuel_kg)
            row[f"{a}_remaining_fuel_kg"] = round(outcome.remaining_fuel_kg, 2)
            if any(c == "mass" for _, c in outcome.violations) or outcome.remaining_fuel_kg < 0:
                mass_ok = False
                log(f"Seed {seed}: {a} dropped below its empty mass", "ERROR")
        per_seed.append(row)
    return LowFuelTable(first_landings=first,
                        remaining_fuel_kg={a: float(np.mean(v)) for a, v in remaining.items()},
                        mass_ok=mass_ok, runs=runs, per_seed=per_seed)
