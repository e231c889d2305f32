"""
Vectorised horizon simulation and scoring.

A `HorizonProblem` freezes everything one MPC solve needs: the active
aircraft with their current (or entry) states, goals and parameters, the
landing and separation envelopes, and the wind model. `simulate_horizon`
rolls a batch of control sequences forward under a batch of wind
disturbance draws and returns the predicted trajectories, per-aircraft
scores and feasibility. The SMC inner loop, the benchmark and the
brute-force checks in the tests all go through it.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np

from dynamics.aircraft_model import RHO_0, air_density, step_arrays
from dynamics.constraints import (LandingEnvelope, SeparationZone, envelope_ok_arrays,
                                  in_landing_sector_arrays, separated_arrays)
from dynamics.objectives import (ArrivalGoal, DepartureGoal, PopulationMap, arrival_step_scores,
                                 blend_scores, departure_step_scores, noise_cost)
from entities.aircraft import AircraftParams
from wind.wind_field import WindGrid, ar_step_arrays, corner_weights, interpolate_arrays


@dataclass(frozen=True)
class HorizonAircraft:
    aircraft_id: str
    params: AircraftParams
    goal: Union[ArrivalGoal, DepartureGoal]
    offset: int
    state: np.ndarray

    @property
    def is_arrival(self) -> bool:
        return isinstance(self.goal, ArrivalGoal)


@dataclass(frozen=True)
class HorizonProblem:
    aircraft: tuple
    horizon: int
    dt_s: float
    landing: LandingEnvelope
    separation: SeparationZone
    exit_distance_m: float
    wind: Optional[WindGrid] = None
    nominal_wind: Optional[np.ndarray] = None
    population: Optional[PopulationMap] = None
    isa_density: bool = True
    air_density: float = RHO_0

    @property
    def n_aircraft(self) -> int:
        return len(self.aircraft)

    @property
    def aircraft_ids(self) -> list[str]:
        return [a.aircraft_id for a in self.aircraft]

    @property
    def wind_nodes(self) -> int:
        return 0 if self.wind is None else self.wind.size

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.array([a.offset for a in self.aircraft], dtype=int)

    @cached_property
    def is_arrival(self) -> np.ndarray:
        return np.array([a.is_arrival for a in self.aircraft], dtype=bool)

    @cached_property
    def initial_states(self) -> np.ndarray:
        return np.array([a.state for a in self.aircraft], dtype=float).reshape(-1, 6)

    @cached_property
    def param_arrays(self) -> dict:
        names = ("wing_area_m2", "cd0", "induced_drag_factor_k", "fuel_coeff_cf1", "fuel_coeff_cf2",
                 "thrust_min_N", "thrust_max_N", "v_min_mps", "v_max_mps", "gamma_max_rad",
                 "phi_max_rad", "z_min_m", "z_max_m", "empty_mass_kg")
        return {n: np.array([getattr(a.params, n) for a in self.aircraft], dtype=float) for n in names}

    def control_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """(N, 3) lower and upper control bounds."""
        bounds = [a.params.control_bounds() for a in self.aircraft]
        low = np.array([b[0] for b in bounds]).reshape(-1, 3)
        high = np.array([b[1] for b in bounds]).reshape(-1, 3)
        return low, high


@dataclass
class HorizonResult:
    states: np.ndarray
    costs: np.ndarray
    feasible: np.ndarray
    completed_step: np.ndarray


def _density(problem: HorizonProblem, z):
    if problem.isa_density:
        return air_density(z, isa=True)
    return problem.air_density


def simulate_horizon(problem: HorizonProblem, controls: np.ndarray,
                     wind_normals: Optional[np.ndarray] = None) -> HorizonResult:
    """Roll controls (B, N, H, 3) forward.

    wind_normals holds the AR innovations, shape (B, H-1, 2, n_nodes); None
    means the wind error stays on its expected path (the current field
    decaying by a each step). completed_step is the 0-based horizon step at
    which an arrival landed or a departure left the TMA, -1 otherwise.
    """
    controls = np.asarray(controls, dtype=float)
    batch, n_aircraft, horizon = controls.shape[0], problem.n_aircraft, problem.horizon
    if controls.shape[1:] != (n_aircraft, horizon, 3):
        raise ValueError(f"controls shape {controls.shape} does not match {n_aircraft} aircraft, H={horizon}")
    p = problem.param_arrays
    off = problem.offsets
    arrival = problem.is_arrival
    dt = problem.dt_s

    states = np.empty((batch, n_aircraft, horizon + 1, 6))
    states[:, :, 0, :] = problem.initial_states
    x, y, z, v, chi, m = (np.broadcast_to(problem.initial_states[:, i], (batch, n_aircraft)).copy()
                          for i in range(6))
    burn = np.zeros((batch, n_aircraft, horizon))
    scored = np.zeros((batch, n_aircraft, horizon), dtype=bool)
    feasible = np.ones((batch, n_aircraft), dtype=bool)
    done = np.zeros((batch, n_aircraft), dtype=bool)
    completed_step = np.full((batch, n_aircraft), -1, dtype=int)
    not_self = ~np.eye(n_aircraft, dtype=bool)

    if problem.wind is not None:
        w_x = np.broadcast_to(problem.wind.w_x, (batch, problem.wind_nodes)).copy()
        w_y = np.broadcast_to(problem.wind.w_y, (batch, problem.wind_nodes)).copy()

    with np.errstate(all='ignore'):
        for h in range(horizon):
            thrust, bank, climb = controls[:, :, h, 0], controls[:, :, h, 1], controls[:, :, h, 2]
            moving = (h >= off)[None, :] & ~done

            wind_x = wind_y = 0.0
            if problem.wind is not None:
                if h > 0 and wind_normals is None:
                    w_x, w_y = problem.wind.a * w_x, problem.wind.a * w_y
                elif h > 0:
                    w_x = ar_step_arrays(w_x, problem.wind.a, problem.wind.chol_Q, wind_normals[:, h - 1, 0])
                    w_y = ar_step_arrays(w_y, problem.wind.a, problem.wind.chol_Q, wind_normals[:, h - 1, 1])
                idx, wts = corner_weights(problem.wind.axes, x, y, z)
                wind_x = interpolate_arrays(w_x, idx, wts)
                wind_y = interpolate_arrays(w_y, idx, wts)
            if problem.nominal_wind is not None:
                wind_x = wind_x + problem.nominal_wind[h, 0]
                wind_y = wind_y + problem.nominal_wind[h, 1]

            eta = p["fuel_coeff_cf1"] * (1.0 + v / p["fuel_coeff_cf2"])
            nx_, ny_, nz_, nv, nchi, nm, _ = step_arrays(
                x, y, z, v, chi, m, thrust, bank, climb, wind_x, wind_y, dt, _density(problem, z),
                p["wing_area_m2"], p["cd0"], p["induced_drag_factor_k"], eta)

            ok = envelope_ok_arrays(nz_, nv, thrust, bank, climb, p["z_min_m"], p["z_max_m"],
                                    p["v_min_mps"], p["v_max_mps"], p["thrust_min_N"], p["thrust_max_N"],
                                    p["gamma_max_rad"], p["phi_max_rad"])
            ok &= nm >= p["empty_mass_kg"]
            ok &= np.isfinite(nx_) & np.isfinite(ny_) & np.isfinite(nchi)
            feasible &= ~moving | ok

            burn[:, :, h] = np.where(moving, m - nm, 0.0)
            x, y, z, v, chi, m = (np.where(moving, new, old) for new, old in
                                  ((nx_, x), (ny_, y), (nz_, z), (nv, v), (nchi, chi), (nm, m)))
            states[:, :, h + 1, :] = np.stack([x, y, z, v, chi, m], axis=-1)
            scored[:, :, h] = moving

            present = ((h + 1) >= off)[None, :] & ~done
            pair = present[:, :, None] & present[:, None, :] & not_self
            clear = separated_arrays(x[:, :, None], y[:, :, None], z[:, :, None],
                                     x[:, None, :], y[:, None, :], z[:, None, :], problem.separation)
            feasible &= ~np.any(pair & ~clear, axis=2)

            landed = arrival[None, :] & in_landing_sector_arrays(x, y, z, v, chi, problem.landing)
            exited = ~arrival[None, :] & (np.hypot(x, y) >= problem.exit_distance_m)
            newly_done = moving & (landed | exited)
            completed_step = np.where(newly_done, h, completed_step)
            done |= newly_done

        costs = _score(problem, states, burn, scored)

    feasible &= np.isfinite(costs)
    costs = np.where(feasible, costs, 0.0)
    return HorizonResult(states=states, costs=costs, feasible=feasible, completed_step=completed_step)


def _score(problem: HorizonProblem, states: np.ndarray, burn: np.ndarray, scored: np.ndarray) -> np.ndarray:
    batch, horizon = states.shape[0], problem.horizon
    costs = np.ones((batch, problem.n_aircraft))
    population = problem.population
    noise_weight = population.noise_weight if population is not None else 0.0
    for i, ac in enumerate(problem.aircraft):
        e = ac.offset
        if e >= horizon:
            continue
        s = states[:, i, e + 1:, :]
        step_burn = burn[:, i, e:]
        if ac.is_arrival:
            components = arrival_step_scores(s[..., 0], s[..., 1], s[..., 2], s[..., 4], step_burn,
                                             ac.goal, ac.params, problem.dt_s)
        else:
            step_index = np.arange(1, horizon - e + 1)
            z0 = states[:, i, e, 2][:, None]
            components = departure_step_scores(s[..., 0], s[..., 1], s[..., 2], s[..., 3], step_burn, z0,
                                               step_index, ac.goal, ac.params, problem.dt_s)
        noise = None
        if noise_weight > 0.0:
            noise = noise_cost(s[..., 0], s[..., 1], s[..., 2], population)
        per_step = blend_scores(components, ac.goal.weights, noise, noise_weight)
        per_step = np.where(scored[:, i, e:], per_step, 1.0)
        costs[:, i] = per_step.mean(axis=1)
    return costs


def simulate_and_score(problem: HorizonProblem, controls: np.ndarray,
                       wind_normals: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    result = simulate_horizon(problem, controls, wind_normals)
    return result.costs, result.feasible
