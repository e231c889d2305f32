import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from errors import ConfigError

KNOT_MPS = 0.514444
# kg/(min*kN) -> kg/(s*N)
CF1_TO_SI = 1.0 / (60.0 * 1000.0)


@dataclass(frozen=True)
class AircraftParams:
    """Performance and envelope data for one aircraft type, SI units and radians."""
    type: str
    empty_mass_kg: float
    max_takeoff_mass_kg: float
    fuel_capacity_kg: float
    wing_area_m2: float
    cd0: float
    induced_drag_factor_k: float
    fuel_coeff_cf1: float
    fuel_coeff_cf2: float
    thrust_min_N: float
    thrust_max_N: float
    v_min_mps: float
    v_max_mps: float
    gamma_max_rad: float
    phi_max_rad: float
    z_min_m: float
    z_max_m: float

    def __post_init__(self):
        values = [v for v in asdict(self).values() if isinstance(v, (int, float))]
        if not all(math.isfinite(v) for v in values):
            raise ConfigError(f"Aircraft type {self.type}: all bounds must be finite", source=self.type)
        if not self.empty_mass_kg < self.max_takeoff_mass_kg:
            raise ConfigError(f"Aircraft type {self.type}: empty mass must be below max take-off mass",
                              source=self.type)
        if self.thrust_min_N < 0 or self.thrust_min_N > self.thrust_max_N:
            raise ConfigError(f"Aircraft type {self.type}: need 0 <= thrust_min_N <= thrust_max_N",
                              source=self.type)
        if self.v_min_mps <= 0 or self.v_min_mps > self.v_max_mps:
            raise ConfigError(f"Aircraft type {self.type}: need 0 < v_min_mps <= v_max_mps", source=self.type)
        if self.fuel_coeff_cf2 == 0:
            raise ConfigError(f"Aircraft type {self.type}: fuel_coeff_cf2 must be non-zero", source=self.type)
        if not 0 < self.phi_max_rad < math.pi / 2:
            raise ConfigError(f"Aircraft type {self.type}: bank bound must lie in (0, 90) degrees",
                              source=self.type)

    @staticmethod
    def from_dict(data: dict) -> 'AircraftParams':
        """Build from the file schema (BADA-class fuel units, degrees)."""
        try:
            return AircraftParams(
                type=str(data["type"]),
                empty_mass_kg=float(data["empty_mass_kg"]),
                max_takeoff_mass_kg=float(data["max_takeoff_mass_kg"]),
                fuel_capacity_kg=float(data.get("fuel_capacity_kg", 0.0)),
                wing_area_m2=float(data["wing_area_m2"]),
                cd0=float(data["cd0"]),
                induced_drag_factor_k=float(data["induced_drag_factor_k"]),
                fuel_coeff_cf1=float(data["fuel_coeff_cf1"]) * CF1_TO_SI,
                fuel_coeff_cf2=float(data["fuel_coeff_cf2"]) * KNOT_MPS,
                thrust_min_N=float(data["thrust_min_N"]),
                thrust_max_N=float(data["thrust_max_N"]),
                v_min_mps=float(data["v_min_mps"]),
                v_max_mps=float(data["v_max_mps"]),
                gamma_max_rad=math.radians(float(data["gamma_max_deg"])),
                phi_max_rad=math.radians(float(data["phi_max_deg"])),
                z_min_m=float(data["z_min_m"]),
                z_max_m=float(data["z_max_m"]),
            )
        except KeyError as e:
            raise ConfigError(f"Aircraft parameter file is missing key {e}", source=str(data.get("type")))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Aircraft parameter file has a non-numeric value: {e}",
                              source=str(data.get("type")))

    @staticmethod
    def load(path: str) -> 'AircraftParams':
        path = Path(path)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"Aircraft parameter file not found: {path}", source=str(path))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Aircraft parameter file is not valid JSON: {e}", source=str(path))
        data.setdefault("type", path.stem)
        return AircraftParams.from_dict(data)

    def to_dict(self) -> dict:
        """File schema representation, inverse of from_dict."""
        return {
            "type": self.type,
            "empty_mass_kg": self.empty_mass_kg,
            "max_takeoff_mass_kg": self.max_takeoff_mass_kg,
            "fuel_capacity_kg": self.fuel_capacity_kg,
            "wing_area_m2": self.wing_area_m2,
            "cd0": self.cd0,
            "induced_drag_factor_k": self.induced_drag_factor_k,
            "fuel_coeff_cf1": self.fuel_coeff_cf1 / CF1_TO_SI,
            "fuel_coeff_cf2": self.fuel_coeff_cf2 / KNOT_MPS,
            "thrust_min_N": self.thrust_min_N,
            "thrust_max_N": self.thrust_max_N,
            "v_min_mps": self.v_min_mps,
            "v_max_mps": self.v_max_mps,
            "gamma_max_deg": math.degrees(self.gamma_max_rad),
            "phi_max_deg": math.degrees(self.phi_max_rad),
            "z_min_m": self.z_min_m,
            "z_max_m": self.z_max_m,
        }

    def control_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower/upper bounds of (thrust, bank, climb). The bank bound is open."""
        phi_open = np.nextafter(self.phi_max_rad, 0.0)
        low = np.array([self.thrust_min_N, -phi_open, -self.gamma_max_rad])
        high = np.array([self.thrust_max_N, phi_open, self.gamma_max_rad])
        return low, high

    def initial_mass(self, reserve_fraction: float) -> float:
        """Max load with the given fraction of the fuel capacity still on board."""
        return self.max_takeoff_mass_kg - self.fuel_capacity_kg * (1.0 - reserve_fraction)

    @staticmethod
    def load_directory(directory: str) -> dict[str, 'AircraftParams']:
        """All *.json parameter files in a directory, keyed by type designator."""
        directory = Path(directory)
        if not directory.is_dir():
            raise ConfigError(f"Aircraft parameter directory not found: {directory}", source=str(directory))
        types = {}
        for path in sorted(directory.glob("*.json")):
            params = AircraftParams.load(path)
            types[params.type] = params
        return types


@dataclass(frozen=True)
class AircraftState:
    x_m: float
    y_m: float
    z_m: float
    v_s_mps: float
    chi_rad: float
    mass_kg: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x_m, self.y_m, self.z_m, self.v_s_mps, self.chi_rad, self.mass_kg])

    @staticmethod
    def from_array(values) -> 'AircraftState':
        x, y, z, v, chi, m = (float(v) for v in values)
        return AircraftState(x_m=x, y_m=y, z_m=z, v_s_mps=v, chi_rad=chi, mass_kg=m)

    def distance_from_airport(self) -> float:
        return math.hypot(self.x_m, self.y_m)

    def to_dict(self) -> dict:
        return {
            "x_m": self.x_m,
            "y_m": self.y_m,
            "z_m": self.z_m,
            "vs_mps": self.v_s_mps,
            "chi_deg": math.degrees(self.chi_rad) % 360.0,
            "mass_kg": self.mass_kg,
        }


@dataclass(frozen=True)
class ControlInput:
    thrust_N: float
    bank_rad: float
    climb_rad: float

    def as_array(self) -> np.ndarray:
        return np.array([self.thrust_N, self.bank_rad, self.climb_rad])

    @staticmethod
    def from_array(values) -> 'ControlInput':
        t, phi, gamma = (float(v) for v in values)
        return ControlInput(thrust_N=t, bank_rad=phi, climb_rad=gamma)

    def to_dict(self) -> dict:
        return {
            "T": self.thrust_N,
            "phi_deg": math.degrees(self.bank_rad),
            "gamma_deg": math.degrees(self.climb_rad),
        }
