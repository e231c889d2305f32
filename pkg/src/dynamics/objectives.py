"""
Objective functions for arrivals and departures, in maximisation form.

Every component is normalised to [0, 1] by negating the distance to the goal,
adding its supremum and dividing by (supremum - infimum). Components are
scored per predicted step and averaged over the aircraft's active steps, so
the total is the plain weighted sum of the component means. An optional
noise term, driven by a population-density field, is blended in with weight
`noise_weight` and the remaining weights scaled by (1 - noise_weight).

The `*_step_scores` kernels broadcast over arbitrary leading shapes and are
used by the optimizer's horizon simulation; `departure_cost` and
`arrival_cost` evaluate one realised or predicted trajectory.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.interpolate import RegularGridInterpolator

from dynamics.aircraft_model import fuel_burn_coeff_arrays
from entities.aircraft import AircraftParams, AircraftState
from errors import ConfigError, DynamicsDomainError

DEFAULT_DEPARTURE_WEIGHTS = (0.4, 0.1, 0.25, 0.25)
DEFAULT_ARRIVAL_WEIGHTS = (0.25, 0.65, 0.1)
DEPARTURE_COMPONENTS = ("bearing", "fuel", "altitude", "airspeed")
ARRIVAL_COMPONENTS = ("heading", "descent", "fuel")
ALTITUDE_EPS_M = 1.0
SQRT_2PI = math.sqrt(2.0 * math.pi)


def wrap_angle(angle):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - angle, 2.0 * np.pi)


def _check_weights(weights: Sequence[float], expected: int, source: str) -> tuple:
    weights = tuple(float(w) for w in weights)
    if len(weights) != expected:
        raise ConfigError(f"Expected {expected} weights, got {len(weights)}", source=source)
    if any(w < 0 or w > 1 for w in weights):
        raise ConfigError(f"Weights must lie in [0, 1]: {weights}", source=source)
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ConfigError(f"Weights must sum to 1, got {sum(weights):.6f}", source=source)
    return weights


@dataclass(frozen=True)
class DepartureGoal:
    target_altitude_m: float
    target_bearing_rad: float
    target_airspeed_mps: float
    weights: tuple = DEFAULT_DEPARTURE_WEIGHTS

    def __post_init__(self):
        object.__setattr__(self, "weights", _check_weights(self.weights, 4, "departure goal"))

    @staticmethod
    def from_dict(data: dict) -> 'DepartureGoal':
        try:
            return DepartureGoal(
                target_altitude_m=float(data["target_altitude_m"]),
                target_bearing_rad=math.radians(float(data["target_bearing_deg"])),
                target_airspeed_mps=float(data["target_airspeed_mps"]),
                weights=tuple(data.get("weights", DEFAULT_DEPARTURE_WEIGHTS)),
            )
        except KeyError as e:
            raise ConfigError(f"Departure goal is missing key {e}", source="goal")

    def to_dict(self) -> dict:
        return {
            "target_altitude_m": self.target_altitude_m,
            "target_bearing_deg": math.degrees(self.target_bearing_rad),
            "target_airspeed_mps": self.target_airspeed_mps,
            "weights": list(self.weights),
        }


@dataclass(frozen=True)
class ArrivalGoal:
    nominal_descent_angle_rad: float = math.radians(3.0)
    weights: tuple = DEFAULT_ARRIVAL_WEIGHTS

    def __post_init__(self):
        object.__setattr__(self, "weights", _check_weights(self.weights, 3, "arrival goal"))

    @staticmethod
    def from_dict(data: dict) -> 'ArrivalGoal':
        return ArrivalGoal(
            nominal_descent_angle_rad=math.radians(float(data.get("descent_angle_deg", 3.0))),
            weights=tuple(data.get("weights", DEFAULT_ARRIVAL_WEIGHTS)),
        )

    def to_dict(self) -> dict:
        return {
            "descent_angle_deg": math.degrees(self.nominal_descent_angle_rad),
            "weights": list(self.weights),
        }


@dataclass
class PopulationMap:
    """Gaussian population-density bumps sampled on a regular grid.

    centres is an (n, 3) array of (x_m, y_m, radius_m). Density is evaluated
    in kilometres, as the bump formula is calibrated for km-scale radii.
    """
    centres: np.ndarray
    grid_spacing_m: float = 1000.0
    altitude_cutoff_m: float = 4000.0
    noise_weight: float = 0.0
    half_extent_m: float = 40000.0
    names: list = field(default_factory=list)

    def __post_init__(self):
        self.centres = np.asarray(self.centres, dtype=float).reshape(-1, 3)
        if np.any(self.centres[:, 2] <= 0):
            raise ConfigError("Population centre radii must be positive", source="noise")
        if self.altitude_cutoff_m <= 0:
            raise ConfigError("Noise altitude cutoff must be positive", source="noise")
        if not 0.0 <= self.noise_weight < 1.0:
            raise ConfigError("Noise weight must lie in [0, 1)", source="noise")
        if self.grid_spacing_m <= 0:
            raise ConfigError("Population grid spacing must be positive", source="noise")
        axis = np.arange(-self.half_extent_m, self.half_extent_m + 0.5 * self.grid_spacing_m,
                         self.grid_spacing_m)
        gx, gy = np.meshgrid(axis, axis, indexing='ij')
        self._axis = axis
        self._interp = RegularGridInterpolator((axis, axis), self.density_exact(gx, gy),
                                               method='linear', bounds_error=False, fill_value=None)

    def density_exact(self, x_m, y_m):
        x_km = np.asarray(x_m, dtype=float)[..., None] / 1000.0
        y_km = np.asarray(y_m, dtype=float)[..., None] / 1000.0
        cx, cy, c = (self.centres[:, i] / 1000.0 for i in range(3))
        b_sq = (x_km - cx) ** 2 + (y_km - cy) ** 2
        total = np.sum(np.exp(-b_sq / (2.0 * c * c)) / (c * SQRT_2PI), axis=-1)
        return np.minimum(total, 1.0)

    def density(self, x_m, y_m):
        """Bilinear lookup on the grid; queries outside it are clamped to the edge."""
        x = np.clip(np.asarray(x_m, dtype=float), self._axis[0], self._axis[-1])
        y = np.clip(np.asarray(y_m, dtype=float), self._axis[0], self._axis[-1])
        points = np.stack([x, y], axis=-1)
        return np.clip(self._interp(points.reshape(-1, 2)).reshape(x.shape), 0.0, 1.0)

    @staticmethod
    def load(path: str, **kwargs) -> 'PopulationMap':
        """Read a centres CSV with columns name, x_km, y_km, radius_km."""
        path = Path(path)
        try:
            frame = pd.read_csv(path, comment='#')
        except FileNotFoundError:
            raise ConfigError(f"Population centres file not found: {path}", source=str(path))
        missing = {"name", "x_km", "y_km", "radius_km"} - set(frame.columns)
        if missing:
            raise ConfigError(f"Population centres file lacks columns {sorted(missing)}", source=str(path))
        centres = frame[["x_km", "y_km", "radius_km"]].to_numpy(dtype=float) * 1000.0
        return PopulationMap(centres=centres, names=frame["name"].astype(str).tolist(), **kwargs)


def flow_heading(x_m: float, y_m: float) -> float:
    """Flow-field bearing, clockwise from north, in [0, 2*pi)."""
    if x_m == 0 and y_m == 0:
        raise DynamicsDomainError("Flow field is undefined at the runway threshold", quantity="position")
    return float(flow_heading_arrays(x_m, y_m))


def flow_heading_arrays(x, y):
    return np.mod(2.0 * np.arctan2(x, y) + 0.5 * np.pi, 2.0 * np.pi)


def flow_heading_state_frame(x, y):
    """Flow-field heading converted to the counter-clockwise-from-east state frame."""
    return 0.5 * np.pi - flow_heading_arrays(x, y)


def descent_angle_beta(x_m: float, y_m: float, z_m: float) -> float:
    """Angle above the runway threshold measured along the remaining flow-field arc."""
    return float(descent_angle_beta_arrays(x_m, y_m, z_m))


def descent_angle_beta_arrays(x, y, z):
    # Arc length (pi - 2a) r / cos(a) with a = atan2(x, y), written through
    # sinc so the runway axis (a = pi/2) stays finite. Behind the threshold
    # the arc reading breaks down; its magnitude is used.
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    radius = np.hypot(x, y)
    psi = 0.5 * np.pi - np.arctan2(x, y)
    with np.errstate(divide='ignore', invalid='ignore'):
        arc = np.abs(2.0 * radius / np.sinc(psi / np.pi))
        beta = np.arctan2(z, arc)
    return np.where(radius == 0.0, 0.5 * np.pi, beta)


def fuel_normaliser(params: AircraftParams, dt_s: float) -> float:
    """Largest burn possible in one step: dt * T_max * eta(v_max)."""
    eta_max = fuel_burn_coeff_arrays(params.v_max_mps, params.fuel_coeff_cf1, params.fuel_coeff_cf2)
    return dt_s * params.thrust_max_N * eta_max


def departure_step_scores(x, y, z, v_s, burn, z0, step_index, goal: DepartureGoal,
                          params: AircraftParams, dt_s: float):
    """Per-step (bearing, fuel, altitude, airspeed) scores; last axis is the component."""
    bearing_error = np.abs(wrap_angle(np.arctan2(y, x) - goal.target_bearing_rad))
    bearing = 1.0 - bearing_error / np.pi

    fuel = np.clip(1.0 - burn / fuel_normaliser(params, dt_s), 0.0, 1.0)

    reach = step_index * dt_s * params.v_max_mps * math.sin(params.gamma_max_rad)
    low, high = z0 - reach, z0 + reach
    target = goal.target_altitude_m
    sup_b = np.maximum(np.abs(target - low), np.abs(target - high))
    inf_b = np.where((low <= target) & (target <= high), 0.0,
                     np.minimum(np.abs(target - low), np.abs(target - high)))
    altitude = np.clip((sup_b - np.abs(z - target)) / np.maximum(sup_b - inf_b, ALTITUDE_EPS_M), 0.0, 1.0)

    sup_c = max(abs(params.v_max_mps - goal.target_airspeed_mps),
                abs(params.v_min_mps - goal.target_airspeed_mps))
    airspeed = np.clip(1.0 - np.abs(v_s - goal.target_airspeed_mps) / sup_c, 0.0, 1.0)

    return np.stack(np.broadcast_arrays(bearing, fuel, altitude, airspeed), axis=-1)


def arrival_step_scores(x, y, z, chi, burn, goal: ArrivalGoal, params: AircraftParams, dt_s: float):
    """Per-step (heading, descent, fuel) scores; last axis is the component."""
    heading_error = np.abs(wrap_angle(chi - flow_heading_state_frame(x, y)))
    heading = 1.0 - heading_error / np.pi

    beta = descent_angle_beta_arrays(x, y, z)
    descent = np.clip(1.0 - np.abs(beta - goal.nominal_descent_angle_rad) / (0.5 * np.pi), 0.0, 1.0)

    fuel = np.clip(1.0 - burn / fuel_normaliser(params, dt_s), 0.0, 1.0)
    return np.stack(np.broadcast_arrays(heading, descent, fuel), axis=-1)


def popdense(x_m, y_m, population: PopulationMap):
    return population.density(x_m, y_m)


def noise_cost(x_m, y_m, z_m, population: PopulationMap):
    cutoff = population.altitude_cutoff_m
    loudness = np.maximum(1.0 - (1.0 - (cutoff - np.asarray(z_m, dtype=float)) / cutoff) ** 2, 0.0)
    score = 1.0 - loudness * population.density(x_m, y_m)
    return score if np.ndim(score) else float(score)


def blend_scores(component_scores, weights, noise_scores=None, noise_weight: float = 0.0):
    """Weighted total per step; the noise term takes a noise_weight share of the total."""
    # elementwise reduction keeps each row independent of the batch size
    total = np.sum(np.asarray(component_scores) * np.asarray(weights, dtype=float), axis=-1)
    if noise_scores is None or noise_weight == 0.0:
        return total
    return (1.0 - noise_weight) * total + noise_weight * noise_scores


def _trajectory_arrays(traj: Sequence[AircraftState]) -> np.ndarray:
    rows = np.array([s.as_array() if isinstance(s, AircraftState) else np.asarray(s, dtype=float)
                     for s in traj])
    if rows.ndim != 2 or rows.shape[0] < 2 or rows.shape[1] != 6:
        raise ValueError("Trajectory needs at least two six-element states")
    return rows


def _mean_after_landing(per_step: np.ndarray, landed_at: Optional[int]) -> np.ndarray:
    if landed_at is not None:
        per_step = per_step.copy()
        per_step[landed_at:] = 1.0
    return per_step.mean(axis=0)


def departure_components(traj, goal: DepartureGoal, params: AircraftParams, dt_s: float,
                         population: Optional[PopulationMap] = None) -> dict:
    """Horizon-averaged component scores for a departure trajectory of H+1 states."""
    s = _trajectory_arrays(traj)
    steps = np.arange(1, s.shape[0])
    burn = s[:-1, 5] - s[1:, 5]
    scores = departure_step_scores(s[1:, 0], s[1:, 1], s[1:, 2], s[1:, 3], burn, s[0, 2], steps,
                                   goal, params, dt_s)
    result = dict(zip(DEPARTURE_COMPONENTS, scores.mean(axis=0).tolist()))
    if population is not None:
        result["noise"] = float(np.mean(noise_cost(s[1:, 0], s[1:, 1], s[1:, 2], population)))
    return result


def departure_cost(traj, goal: DepartureGoal, params: AircraftParams, dt_s: float,
                   population: Optional[PopulationMap] = None) -> float:
    c = departure_components(traj, goal, params, dt_s, population)
    components = np.array([c[name] for name in DEPARTURE_COMPONENTS])
    noise_weight = population.noise_weight if population is not None else 0.0
    return float(blend_scores(components, goal.weights, c.get("noise"), noise_weight))


def arrival_components(traj, goal: ArrivalGoal, params: AircraftParams, dt_s: float,
                       population: Optional[PopulationMap] = None, landed_at: Optional[int] = None) -> dict:
    """Horizon-averaged arrival scores. Steps after `landed_at` (1-based) score 1."""
    s = _trajectory_arrays(traj)
    burn = s[:-1, 5] - s[1:, 5]
    scores = arrival_step_scores(s[1:, 0], s[1:, 1], s[1:, 2], s[1:, 4], burn, goal, params, dt_s)
    result = dict(zip(ARRIVAL_COMPONENTS, _mean_after_landing(scores, landed_at).tolist()))
    if population is not None:
        noise = np.asarray(noise_cost(s[1:, 0], s[1:, 1], s[1:, 2], population), dtype=float)
        result["noise"] = float(_mean_after_landing(noise, landed_at))
    return result


def arrival_cost(traj, goal: ArrivalGoal, params: AircraftParams, dt_s: float,
                 population: Optional[PopulationMap] = None, landed_at: Optional[int] = None) -> float:
    c = arrival_components(traj, goal, params, dt_s, population, landed_at)
    components = np.array([c[name] for name in ARRIVAL_COMPONENTS])
    noise_weight = population.noise_weight if population is not None else 0.0
    return float(blend_scores(components, goal.weights, c.get("noise"), noise_weight))
