import json
import math

import pytest

from conftest import DATA_DIR
from entities.scenario import DEPARTURE_ALTITUDE_M, Scenario
from errors import ConfigError


def arrival(aircraft_id="A01", bearing=0.0, **extra):
    entry = {"id": aircraft_id, "type": "A320", "kind": "arrival", "entry_step": 0,
             "initial": {"boundary_bearing_deg": bearing, "z_m": 3000, "vs_mps": 120}}
    entry.update(extra)
    return entry


def departure(aircraft_id="D01", bearing=270.0, **initial):
    start = {"x_m": -1500, "y_m": 0, "z_m": DEPARTURE_ALTITUDE_M, "vs_mps": 80, "chi_deg": 180}
    start.update(initial)
    return {"id": aircraft_id, "type": "A320", "kind": "departure", "entry_step": 2, "initial": start,
            "goal": {"target_altitude_m": 3000, "target_bearing_deg": bearing, "target_airspeed_mps": 150}}


@pytest.mark.parametrize("path", sorted((DATA_DIR / "scenarios").glob("*.json")), ids=lambda p: p.stem)
def test_shipped_scenarios_load(path):
    scenario = Scenario.load(path, data_dir=DATA_DIR)
    assert scenario.aircraft
    assert scenario.name == path.stem
    assert scenario.smc.particles % scenario.smc.chunk_size == 0


def test_arrival_placed_on_boundary(data_dir):
    scenario = Scenario.from_dict({"aircraft": [arrival(bearing=90.0)]}, data_dir=data_dir)
    state = scenario.aircraft[0].initial_state
    assert math.hypot(state.x_m, state.y_m) == pytest.approx(30000.0)
    assert state.y_m == pytest.approx(30000.0)
    assert math.degrees(state.chi_rad) == pytest.approx(270.0)
    assert state.mass_kg == pytest.approx(scenario.aircraft[0].params.initial_mass(0.2))


def test_departure_defaults(data_dir):
    scenario = Scenario.from_dict({"aircraft": [departure()]}, data_dir=data_dir)
    entry = scenario.aircraft[0]
    assert entry.kind == "departure"
    assert entry.initial_state.mass_kg == entry.params.max_takeoff_mass_kg
    assert entry.goal.target_bearing_rad == pytest.approx(math.radians(270.0))


@pytest.mark.parametrize("data", [
    {"aircraft": [arrival()], "runway": {}},
    {"aircraft": [departure(z_m=500)]},
    {"aircraft": [{"id": "A1", "type": "A320", "kind": "arrival", "initial": {"x_m": 1000, "y_m": 0}}]},
    {"aircraft": [arrival(type="B747")]},
    {"aircraft": [arrival(kind="overflight")]},
    {"aircraft": [arrival(), arrival()]},
    {"aircraft": [arrival(entry_step=-1)]},
    {"aircraft": [arrival(initial={"boundary_bearing_deg": 0, "mass_kg": 1000})]},
    {"aircraft": [{k: v for k, v in departure().items() if k != "goal"}]},
])
def test_invalid_scenarios(data_dir, data):
    with pytest.raises(ConfigError):
        Scenario.from_dict(data, data_dir=data_dir)


def test_step_limit(data_dir):
    scenario = Scenario.from_dict({"aircraft": [arrival(), arrival("A02", entry_step=20)]}, data_dir=data_dir)
    assert scenario.step_limit == 3 * 120
    limited = Scenario.from_dict({"tma": {"step_limit": 7}, "aircraft": [arrival()]}, data_dir=data_dir)
    assert limited.step_limit == 7


def test_exit_distance_defaults_to_radius(data_dir):
    scenario = Scenario.from_dict({"tma": {"radius_m": 25000}, "aircraft": [arrival()]}, data_dir=data_dir)
    assert scenario.exit_distance_m == 25000


def test_with_smc_ignores_unset(data_dir):
    scenario = Scenario.from_dict({"aircraft": [arrival()]}, data_dir=data_dir)
    assert scenario.with_smc(chunk_size=None) is scenario
    assert scenario.with_smc(particles=64, chunk_size=None).smc.particles == 64


def test_noise_weight_builds_population(data_dir):
    scenario = Scenario.from_dict({"aircraft": [arrival()]}, data_dir=data_dir)
    assert scenario.population() is None
    noisy = scenario.with_noise_weight(0.2)
    population = noisy.population()
    assert population.noise_weight == 0.2
    assert noisy.population() is population


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        Scenario.load(tmp_path / "nope.json")


def test_invalid_json(tmp_path, data_dir):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        Scenario.load(path, data_dir=data_dir)


def test_name_falls_back_to_file_stem(tmp_path, data_dir):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps({"aircraft": [arrival()]}))
    assert Scenario.load(path, data_dir=data_dir).name == "tiny"
