import math
from dataclasses import replace

import numpy as np
import pytest

from dynamics.constraints import LandingEnvelope
from dynamics.objectives import noise_cost
from entities.aircraft import AircraftState
from entities.scenario import Scenario
from optimizer.smc_engine import SmcConfig
from simulator.scenario_runner import activate_deactivate, completion_mode, low_fuel_experiment, run

CALM = {"sigma_profile": [[0, 0.0], [12000, 0.0]]}
SMALL_SMC = {"particles": 32, "iterations": 2, "schedule": {"base": 1, "scale": 1}, "chunk_size": 16}


def arrival(aircraft_id="A01", bearing=0.0, entry_step=0):
    return {"id": aircraft_id, "type": "A320", "kind": "arrival", "entry_step": entry_step,
            "initial": {"boundary_bearing_deg": bearing, "z_m": 3000, "vs_mps": 120}}


def departure(aircraft_id="D01", bearing=180.0, entry_step=0):
    return {"id": aircraft_id, "type": "A320", "kind": "departure", "entry_step": entry_step,
            "initial": {"x_m": -1500, "y_m": 0, "z_m": 400, "vs_mps": 80, "chi_deg": 180},
            "goal": {"target_altitude_m": 3000, "target_bearing_deg": bearing, "target_airspeed_mps": 150}}


def scenario_of(data_dir, aircraft, smc=None, wind=None, **tma):
    data = {"name": "unit", "tma": {"radius_m": 30000, "dt_s": 10, "horizon": 3, **tma},
            "smc": smc or SMALL_SMC, "wind": wind or {}, "aircraft": aircraft}
    return Scenario.from_dict(data, data_dir=data_dir)


class TestActivation:
    def test_window_includes_upcoming_entries(self, data_dir):
        sc = scenario_of(data_dir, [arrival(), arrival("A02", 90.0, entry_step=20)])
        assert list(activate_deactivate(0, sc, {})) == ["A01"]
        assert "A02" not in activate_deactivate(16, sc, {})
        live = activate_deactivate(17, sc, {})
        assert live["A02"] == sc.entry("A02").initial_state

    def test_completed_aircraft_leave(self, data_dir):
        sc = scenario_of(data_dir, [arrival()])
        landed = AircraftState(2000.0, 0.0, 100.0, 70.0, math.pi, 60000.0)
        assert activate_deactivate(5, sc, {"A01": landed}) == {}

    def test_live_state_is_kept(self, data_dir):
        sc = scenario_of(data_dir, [arrival()])
        midway = AircraftState(15000.0, 0.0, 2000.0, 110.0, math.pi, 60000.0)
        assert activate_deactivate(5, sc, {"A01": midway}) == {"A01": midway}


class TestCompletionMode:
    def test_arrival_in_sector(self, data_dir):
        sc = scenario_of(data_dir, [arrival()])
        state = AircraftState(2000.0, 0.0, 100.0, LandingEnvelope().p_vs_mps, math.pi, 60000.0)
        assert completion_mode(sc.aircraft[0], state, sc) == "landed"

    def test_arrival_still_flying(self, data_dir):
        sc = scenario_of(data_dir, [arrival()])
        assert completion_mode(sc.aircraft[0], sc.aircraft[0].initial_state, sc) is None

    def test_departure_beyond_exit(self, data_dir):
        sc = scenario_of(data_dir, [departure()])
        gone = AircraftState(-30001.0, 0.0, 3000.0, 150.0, math.pi, 70000.0)
        assert completion_mode(sc.aircraft[0], gone, sc) == "exited"


class TestShortRun:
    @pytest.fixture
    def record(self, data_dir):
        return run(scenario_of(data_dir, [arrival()], step_limit=3), seed=4, log_events=False)

    def test_steps_recorded(self, record):
        outcome = record.aircraft["A01"]
        assert len(record.step_wall_times) == 3
        assert outcome.steps == [0, 1, 2, 3]
        assert len(outcome.controls) == 3
        assert record.aborted is None

    def test_fuel_accounting_closes(self, record):
        outcome = record.aircraft["A01"]
        assert sum(outcome.burns) == pytest.approx(outcome.fuel_burned_kg, rel=1e-9)
        assert outcome.fuel_burned_kg > 0

    def test_realised_steps_respect_constraints(self, record):
        assert record.total_violations == 0

    def test_summary(self, record):
        summary = record.to_summary()
        assert summary["steps_run"] == 3
        assert summary["aircraft"][0]["mode"] == "unfinished"
        assert summary["seed"] == 4

    def test_replay_is_identical(self, data_dir, record):
        again = run(scenario_of(data_dir, [arrival()], step_limit=3), seed=4, log_events=False)
        np.testing.assert_array_equal([s.as_array() for s in again.aircraft["A01"].states],
                                      [s.as_array() for s in record.aircraft["A01"].states])

    def test_late_entry_waits(self, data_dir):
        record = run(scenario_of(data_dir, [arrival(entry_step=2)], step_limit=3), seed=1, log_events=False)
        assert record.aircraft["A01"].steps == [2, 3]
        assert record.active_counts == [0, 0, 1]


def test_low_fuel_experiment_needs_two_arrivals(data_dir):
    with pytest.raises(ValueError):
        low_fuel_experiment(scenario_of(data_dir, [arrival()]), repeats=1)


DESK_SMC = {"particles": 512, "iterations": 20, "schedule": {"base": 1, "scale": 2, "rate": 0.05},
            "chunk_size": 128}


@pytest.mark.slow
def test_single_arrival_lands(data_dir):
    sc = scenario_of(data_dir, [arrival()], smc=DESK_SMC, wind=CALM, horizon=6, step_limit=100)
    record = run(sc, seed=0, log_events=False)
    outcome = record.aircraft["A01"]
    assert outcome.mode == "landed"
    assert outcome.completion_step <= 100
    assert record.total_violations == 0


@pytest.mark.slow
def test_single_departure_exits_on_bearing(data_dir):
    sc = scenario_of(data_dir, [departure()], smc=DESK_SMC, wind=CALM, horizon=6, step_limit=100)
    record = run(sc, seed=0, log_events=False)
    outcome = record.aircraft["D01"]
    assert outcome.mode == "exited"
    final = outcome.states[-1]
    error = abs((math.degrees(math.atan2(final.y_m, final.x_m)) - 180.0 + 180.0) % 360.0 - 180.0)
    assert error < 30.0


@pytest.mark.slow
@pytest.mark.parametrize("name,mode", [("arrivals_12", "landed"), ("departures_12", "exited")])
def test_lone_traffic_completes(data_dir, name, mode):
    sc = Scenario.load(data_dir / "scenarios" / f"{name}.json", data_dir=data_dir)
    record = run(sc, seed=0, log_events=False)
    assert record.aborted is None
    assert {a.aircraft_id: a.mode for a in record.aircraft.values()} == {e.aircraft_id: mode for e in sc.aircraft}
    assert record.total_violations == 0


@pytest.mark.slow
def test_mixed_traffic_stays_separated(data_dir):
    sc = Scenario.load(data_dir / "scenarios" / "mixed_20.json", data_dir=data_dir)
    record = run(sc, seed=0, log_events=False)
    assert record.aborted is None
    assert [v for a in record.aircraft.values() for v in a.violations] == []
    assert all(a.mode in ("landed", "exited") for a in record.aircraft.values())


@pytest.mark.slow
def test_noise_weight_reduces_exposure(data_dir):
    sc = Scenario.load(data_dir / "scenarios" / "noise_south.json", data_dir=data_dir)
    noisy = sc.with_noise_weight(0.2)
    population = noisy.population()

    def exposure(record):
        states = [s for a in record.aircraft.values() for s in a.states]
        return sum(1.0 - noise_cost(s.x_m, s.y_m, s.z_m, population) for s in states)

    quiet = exposure(run(sc, seed=3, log_events=False))
    weighted = exposure(run(noisy, seed=3, log_events=False))
    assert weighted < quiet


def low_fuel_scenario(data_dir, step_limit=3):
    sc = Scenario.load(data_dir / "scenarios" / "low_fuel_2.json", data_dir=data_dir)
    return replace(sc, tma=replace(sc.tma, step_limit=step_limit), smc=SmcConfig.from_dict(SMALL_SMC))


class TestLowFuelExperiment:
    @pytest.fixture
    def table(self, data_dir):
        return low_fuel_experiment(low_fuel_scenario(data_dir), repeats=2, base_seed=5)

    def test_one_row_per_seed(self, table):
        frame = table.seeds_frame()
        assert frame.seed.tolist() == [5, 6]
        assert list(frame.columns) == ["seed", "first_landed", "HIGH_remaining_fuel_kg", "LOW_remaining_fuel_kg"]
        assert len(table.runs) == 2

    def test_fuel_stays_above_empty_mass(self, table):
        assert table.mass_ok
        assert all(r.aircraft["LOW"].remaining_fuel_kg > 0 for r in table.runs)

    def test_reports_means(self, table):
        low = [r.aircraft["LOW"].remaining_fuel_kg for r in table.runs]
        assert table.remaining_fuel_kg["LOW"] == pytest.approx(sum(low) / 2)
        assert table.remaining_fuel_kg["LOW"] < table.remaining_fuel_kg["HIGH"]
        assert sum(table.first_landings.values()) <= 2
        assert table.to_frame().aircraft_id.tolist() == ["HIGH", "LOW"]

    def test_needs_a_repeat(self, data_dir):
        with pytest.raises(ValueError):
            low_fuel_experiment(low_fuel_scenario(data_dir), repeats=0)
