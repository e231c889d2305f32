import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

from dynamics.aircraft_model import RHO_0
from dynamics.constraints import LandingEnvelope, SeparationZone
from dynamics.objectives import ArrivalGoal, DepartureGoal, PopulationMap
from entities.aircraft import AircraftParams, AircraftState
from errors import ConfigError
from optimizer.smc_engine import SmcConfig
from wind.wind_field import NominalWind, WindConfig

DEFAULT_DATA_DIR = Path(__file__).resolve().parents[2] / "data"
DEPARTURE_ALTITUDE_M = 400.0
ARRIVAL_RESERVE = 0.2
DEPARTURE_RESERVE = 1.0
SCENARIO_KEYS = {"name", "description", "_comment", "tma", "landing", "separation", "wind", "smc",
                 "noise", "aircraft"}


def default_data_dir() -> Path:
    return Path(os.getenv("TMA_DATA_DIR") or DEFAULT_DATA_DIR)


@dataclass(frozen=True)
class TmaConfig:
    radius_m: float = 30000.0
    dt_s: float = 10.0
    horizon: int = 6
    exit_distance_m: Optional[float] = None
    step_limit: Optional[int] = None
    isa_density: bool = True
    air_density: float = RHO_0

    def __post_init__(self):
        if self.radius_m <= 0 or self.dt_s <= 0 or self.horizon < 1:
            raise ConfigError("tma.radius_m and tma.dt_s must be positive and tma.horizon >= 1", source="tma")

    @staticmethod
    def from_dict(data: dict) -> 'TmaConfig':
        d = TmaConfig()
        return TmaConfig(
            radius_m=float(data.get("radius_m", d.radius_m)),
            dt_s=float(data.get("dt_s", d.dt_s)),
            horizon=int(data.get("horizon", d.horizon)),
            exit_distance_m=float(data["exit_distance_m"]) if "exit_distance_m" in data else None,
            step_limit=int(data["step_limit"]) if "step_limit" in data else None,
            isa_density=bool(data.get("isa_density", d.isa_density)),
            air_density=float(data.get("air_density", d.air_density)),
        )


@dataclass(frozen=True)
class NoiseConfig:
    weight: float = 0.0
    centres_file: str = "population_centres.csv"
    grid_spacing_m: float = 1000.0
    altitude_cutoff_m: float = 4000.0

    @staticmethod
    def from_dict(data: dict) -> 'NoiseConfig':
        d = NoiseConfig()
        return NoiseConfig(
            weight=float(data.get("weight", d.weight)),
            centres_file=str(data.get("centres_file", d.centres_file)),
            grid_spacing_m=float(data.get("grid_spacing_m", d.grid_spacing_m)),
            altitude_cutoff_m=float(data.get("altitude_cutoff_m", d.altitude_cutoff_m)),
        )


@dataclass(frozen=True)
class AircraftEntry:
    aircraft_id: str
    params: AircraftParams
    entry_step: int
    initial_state: AircraftState
    goal: Union[ArrivalGoal, DepartureGoal]

    @property
    def is_arrival(self) -> bool:
        return isinstance(self.goal, ArrivalGoal)

    @property
    def kind(self) -> str:
        return "arrival" if self.is_arrival else "departure"

    def to_dict(self) -> dict:
        return {
            "id": self.aircraft_id,
            "type": self.params.type,
            "kind": self.kind,
            "entry_step": self.entry_step,
            "initial": self.initial_state.to_dict(),
            "goal": self.goal.to_dict(),
        }


def _entry_from_dict(data: dict, index: int, types: dict, tma: TmaConfig) -> AircraftEntry:
    aircraft_id = str(data.get("id", f"AC{index + 1:02d}"))
    source = f"aircraft[{aircraft_id}]"
    type_name = data.get("type", "A320")
    if type_name not in types:
        raise ConfigError(f"Unknown aircraft type {type_name!r}", source=source)
    params = types[type_name]
    kind = data.get("kind")
    if kind not in ("arrival", "departure"):
        raise ConfigError(f"kind must be 'arrival' or 'departure', got {kind!r}", source=source)
    entry_step = int(data.get("entry_step", 0))
    if entry_step < 0:
        raise ConfigError("entry_step must be >= 0", source=source)

    initial = dict(data.get("initial", {}))
    reserve = float(data.get("fuel_reserve_fraction", ARRIVAL_RESERVE if kind == "arrival" else DEPARTURE_RESERVE))
    mass = float(initial.get("mass_kg", params.initial_mass(reserve)))
    if kind == "arrival":
        if "boundary_bearing_deg" in initial:
            bearing = math.radians(float(initial["boundary_bearing_deg"]))
            x, y = tma.radius_m * math.cos(bearing), tma.radius_m * math.sin(bearing)
            chi = math.radians(float(initial.get("chi_deg", math.degrees(bearing) + 180.0)))
        else:
            x, y = float(initial["x_m"]), float(initial["y_m"])
            chi = math.radians(float(initial.get("chi_deg", math.degrees(math.atan2(-y, -x)))))
        if abs(math.hypot(x, y) - tma.radius_m) > 1.0:
            raise ConfigError("Arrivals must start on the TMA boundary", source=source)
        state = AircraftState(x_m=x, y_m=y, z_m=float(initial.get("z_m", 3000.0)),
                              v_s_mps=float(initial.get("vs_mps", 120.0)), chi_rad=chi, mass_kg=mass)
        goal = ArrivalGoal.from_dict(data.get("goal", {}))
    else:
        state = AircraftState(x_m=float(initial.get("x_m", -1500.0)), y_m=float(initial.get("y_m", 0.0)),
                              z_m=float(initial.get("z_m", DEPARTURE_ALTITUDE_M)),
                              v_s_mps=float(initial.get("vs_mps", 80.0)),
                              chi_rad=math.radians(float(initial.get("chi_deg", 180.0))), mass_kg=mass)
        if abs(state.z_m - DEPARTURE_ALTITUDE_M) > 1e-6:
            raise ConfigError(f"Departures start at {DEPARTURE_ALTITUDE_M:.0f} m", source=source)
        if "goal" not in data:
            raise ConfigError("Departures need a goal block", source=source)
        goal = DepartureGoal.from_dict(data["goal"])
    if not params.empty_mass_kg <= mass <= params.max_takeoff_mass_kg:
        raise ConfigError(f"Initial mass {mass:.0f} kg outside the type's mass range", source=source)
    return AircraftEntry(aircraft_id=aircraft_id, params=params, entry_step=entry_step,
                         initial_state=state, goal=goal)


@dataclass
class Scenario:
    name: str
    tma: TmaConfig = field(default_factory=TmaConfig)
    landing: LandingEnvelope = field(default_factory=LandingEnvelope)
    separation: SeparationZone = field(default_factory=SeparationZone)
    wind: WindConfig = field(default_factory=WindConfig)
    nominal_wind: NominalWind = field(default_factory=NominalWind)
    smc: SmcConfig = field(default_factory=SmcConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    aircraft: list = field(default_factory=list)
    data_dir: Path = field(default_factory=default_data_dir)

    def __post_init__(self):
        ids = [a.aircraft_id for a in self.aircraft]
        if len(ids) != len(set(ids)):
            raise ConfigError("Aircraft ids must be unique", source="aircraft")
        self._population = None

    @property
    def exit_distance_m(self) -> float:
        return self.tma.exit_distance_m if self.tma.exit_distance_m is not None else self.tma.radius_m

    @property
    def step_limit(self) -> int:
        if self.tma.step_limit is not None:
            return self.tma.step_limit
        latest = max((a.entry_step for a in self.aircraft), default=0)
        return 3 * (latest + 100)

    def entry(self, aircraft_id: str) -> AircraftEntry:
        for a in self.aircraft:
            if a.aircraft_id == aircraft_id:
                return a
        raise KeyError(aircraft_id)

    def population(self) -> Optional[PopulationMap]:
        """Population grid, built once per scenario; None when the noise term is off."""
        if self.noise.weight <= 0.0:
            return None
        if self._population is None:
            path = Path(self.noise.centres_file)
            if not path.is_absolute():
                path = self.data_dir / path
            self._population = PopulationMap.load(
                path, grid_spacing_m=self.noise.grid_spacing_m, altitude_cutoff_m=self.noise.altitude_cutoff_m,
                noise_weight=self.noise.weight, half_extent_m=self.tma.radius_m + 10 * self.noise.grid_spacing_m)
        return self._population

    def with_noise_weight(self, weight: float) -> 'Scenario':
        return replace(self, noise=replace(self.noise, weight=weight))

    def with_smc(self, **overrides) -> 'Scenario':
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, smc=replace(self.smc, **overrides)) if overrides else self

    @staticmethod
    def from_dict(data: dict, data_dir: Optional[str] = None, name: str = "scenario") -> 'Scenario':
        unknown = set(data) - SCENARIO_KEYS
        if unknown:
            raise ConfigError(f"Unknown scenario keys: {sorted(unknown)}", source=name)
        data_dir = Path(data_dir) if data_dir is not None else default_data_dir()
        types = AircraftParams.load_directory(data_dir / "aircraft")
        tma = TmaConfig.from_dict(data.get("tma", {}))
        wind_block = dict(data.get("wind", {}))
        aircraft = [_entry_from_dict(entry, i, types, tma) for i, entry in enumerate(data.get("aircraft", []))]
        return Scenario(
            name=str(data.get("name", name)),
            tma=tma,
            landing=LandingEnvelope.from_dict(data.get("landing", {})),
            separation=SeparationZone.from_dict(data.get("separation", {})),
            wind=WindConfig.from_dict(wind_block, tma.radius_m),
            nominal_wind=NominalWind.from_dict(wind_block.get("nominal", [])),
            smc=SmcConfig.from_dict(data.get("smc", {})),
            noise=NoiseConfig.from_dict(data.get("noise", {})),
            aircraft=aircraft,
            data_dir=data_dir,
        )

    @staticmethod
    def load(path: str, data_dir: Optional[str] = None) -> 'Scenario':
        path = Path(path)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"Scenario file not found: {path}", source=str(path))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Scenario file is not valid JSON: {e}", source=str(path))
        return Scenario.from_dict(data, data_dir=data_dir, name=path.stem)
