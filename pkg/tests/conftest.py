import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Same import layout as the entry scripts
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from dynamics.constraints import LandingEnvelope, SeparationZone  # noqa: E402
from dynamics.objectives import ArrivalGoal, DepartureGoal  # noqa: E402
from entities.aircraft import AircraftParams, AircraftState  # noqa: E402
from optimizer.horizon import HorizonAircraft, HorizonProblem  # noqa: E402

REPO_ROOT = Path(__file__).parent.parent
DATA_DIR = REPO_ROOT / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def a320() -> AircraftParams:
    return AircraftParams.load(DATA_DIR / "aircraft" / "A320.json")


@pytest.fixture
def cruise_state(a320) -> AircraftState:
    return AircraftState(x_m=10000.0, y_m=5000.0, z_m=3000.0, v_s_mps=120.0, chi_rad=math.pi,
                         mass_kg=a320.initial_mass(0.2))


@pytest.fixture
def departure_goal() -> DepartureGoal:
    return DepartureGoal(target_altitude_m=3000.0, target_bearing_rad=math.radians(90.0), target_airspeed_mps=150.0)


def single_problem(params, state, goal, horizon=2, dt_s=10.0, offset=0, wind=None, nominal_wind=None,
                   population=None, isa_density=False):
    """One-aircraft horizon problem without wind unless given."""
    aircraft = (HorizonAircraft(aircraft_id="T1", params=params, goal=goal, offset=offset,
                                state=np.asarray(state.as_array() if isinstance(state, AircraftState) else state)),)
    return HorizonProblem(aircraft=aircraft, horizon=horizon, dt_s=dt_s, landing=LandingEnvelope(),
                          separation=SeparationZone(), exit_distance_m=30000.0, wind=wind,
                          nominal_wind=nominal_wind, population=population, isa_density=isa_density)


@pytest.fixture
def toy_problem(a320):
    """Deterministic single-arrival problem with a two-step horizon."""
    state = AircraftState(x_m=15000.0, y_m=0.0, z_m=2000.0, v_s_mps=120.0, chi_rad=math.pi,
                          mass_kg=a320.initial_mass(0.2))
    return single_problem(a320, state, ArrivalGoal(), horizon=2)
