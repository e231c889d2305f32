"""
Synthetic flight traces for the fuel pipeline.

Two sources:
- generate_traces: realised MPC trajectories from a RunRecord, resampled to
  the trace interval
- generate_holding_traces: scripted arrivals that fly inbound to a holding
  fix, orbit it for a fixed time and then descend straight in, the kind of
  conventional stacked approach the optimizer is compared against
"""

import math
from pathlib import Path

import numpy as np
import pandas as pd

from dynamics.aircraft_model import G, air_density, fuel_burn_coeff, lift_drag, step
from dynamics.objectives import wrap_angle
from entities.aircraft import AircraftParams, AircraftState, ControlInput
from entities.scenario import ARRIVAL_RESERVE
from entities.trace import TRACE_COLUMNS, FlightTrace
from errors import ConfigError
from log_utils import log
from optimizer.rng_streams import StreamPurpose, stream
from simulator.scenario_runner import RunRecord

HOLD_FIX_FRACTION = 0.5
HOLD_BANK_FRACTION = 0.8
STEER_TIME_S = 30.0
FINAL_DISTANCE_M = 1500.0
FINAL_ALTITUDE_M = 150.0


def _stride(resample_s: float, dt_s: float) -> int:
    ratio = resample_s / dt_s
    stride = int(round(ratio))
    if stride < 1 or abs(ratio - stride) > 1e-9:
        raise ConfigError(f"Resample interval {resample_s} s must be a multiple of the step {dt_s} s",
                          source="resample")
    return stride


def _resampled(states: list, times: list, stride: int) -> np.ndarray:
    """Every stride-th state, always ending on the final one."""
    indices = list(range(0, len(states), stride))
    if states and indices[-1] != len(states) - 1:
        indices.append(len(states) - 1)
    rows = [(times[i], states[i].x_m, states[i].y_m, states[i].z_m, states[i].v_s_mps, states[i].chi_rad)
            for i in indices]
    return np.array(rows, dtype=float)


def generate_traces(record: RunRecord, resample_s: float = 60.0) -> list[FlightTrace]:
    """One trace per aircraft with at least two resampled states."""
    stride = _stride(resample_s, record.dt_s)
    traces = []
    for outcome in record.aircraft.values():
        times = [s * record.dt_s for s in outcome.steps]
        samples = _resampled(outcome.states, times, stride)
        if samples.shape[0] < 2:
            continue
        traces.append(FlightTrace(aircraft_id=outcome.aircraft_id, type=outcome.type, kind=outcome.kind,
                                  samples=samples, initial_mass_kg=outcome.initial_mass_kg))
    return traces


def simulated_fuel(record: RunRecord) -> dict:
    return {a.aircraft_id: a.fuel_burned_kg for a in record.aircraft.values()}


class HoldingPattern:
    """Scripted inbound, hold and straight-in controller for one arrival."""

    def __init__(self, params: AircraftParams, hold_fix: tuple, holding_s: float, dt_s: float):
        self.params = params
        self.hold_fix = hold_fix
        self.holding_s = holding_s
        self.dt_s = dt_s
        self.phase = "inbound"
        self.held_s = 0.0

    def _bank_towards(self, state: AircraftState, target: tuple) -> float:
        desired = math.atan2(target[1] - state.y_m, target[0] - state.x_m)
        error = float(wrap_angle(desired - state.chi_rad))
        limit = HOLD_BANK_FRACTION * self.params.phi_max_rad
        return float(np.clip(math.atan(error * state.v_s_mps / (G * STEER_TIME_S)), -limit, limit))

    def control(self, state: AircraftState) -> ControlInput:
        p = self.params
        climb = 0.0
        if self.phase == "inbound":
            bank = self._bank_towards(state, self.hold_fix)
            if math.hypot(state.x_m - self.hold_fix[0], state.y_m - self.hold_fix[1]) < state.v_s_mps * self.dt_s:
                self.phase = "hold"
        elif self.phase == "hold":
            bank = HOLD_BANK_FRACTION * p.phi_max_rad
            self.held_s += self.dt_s
            if self.held_s >= self.holding_s:
                self.phase = "approach"
        else:
            bank = self._bank_towards(state, (0.0, 0.0))
            distance = max(state.distance_from_airport(), 1.0)
            climb = -min(p.gamma_max_rad, math.atan(max(state.z_m, 0.0) / distance))
        _, drag = lift_drag(state, bank, p, air_density(state.z_m))
        # idle thrust must still hold the airspeed on the way down
        idle_limit = (p.thrust_min_N - drag) / (state.mass_kg * G)
        climb = max(climb, math.asin(float(np.clip(idle_limit, -1.0, 1.0))))
        thrust = float(np.clip(drag + state.mass_kg * G * math.sin(climb), p.thrust_min_N, p.thrust_max_N))
        return ControlInput(thrust_N=thrust, bank_rad=bank, climb_rad=climb)

    def finished(self, state: AircraftState) -> bool:
        return self.phase == "approach" and (state.distance_from_airport() < FINAL_DISTANCE_M
                                             or state.z_m < FINAL_ALTITUDE_M)


def generate_holding_traces(params: AircraftParams, count: int, holding_minutes: float, seed: int,
                            radius_m: float = 30000.0, dt_s: float = 10.0, resample_s: float = 60.0,
                            wind: tuple = (0.0, 0.0), max_steps: int = 2000,
                            log_events: bool = False) -> list[FlightTrace]:
    """
    Forward-simulate `count` arrivals that hold for `holding_minutes` before landing.

    Entry bearings and altitudes are drawn from the TRACES stream of `seed`, so
    the same seed always yields the same traces.
    """
    rng = stream(seed, StreamPurpose.TRACES)
    stride = _stride(resample_s, dt_s)
    mass = params.initial_mass(ARRIVAL_RESERVE)
    traces = []
    for i in range(count):
        bearing = rng.uniform(0.0, 2.0 * math.pi)
        altitude = float(np.clip(3000.0 + rng.normal(0.0, 200.0), params.z_min_m, params.z_max_m))
        x, y = radius_m * math.cos(bearing), radius_m * math.sin(bearing)
        state = AircraftState(x_m=x, y_m=y, z_m=altitude, v_s_mps=float(np.clip(120.0, params.v_min_mps,
                                                                                  params.v_max_mps)),
                              chi_rad=bearing + math.pi, mass_kg=mass)
        fix = (HOLD_FIX_FRACTION * x, HOLD_FIX_FRACTION * y)
        controller = HoldingPattern(params, fix, 60.0 * holding_minutes, dt_s)
        states, times = [state], [0.0]
        for k in range(max_steps):
            u = controller.control(state)
            state = step(state, u, wind, dt_s, params, fuel_burn_coeff(state.v_s_mps, params),
                         air_density=air_density(state.z_m))
            states.append(state)
            times.append((k + 1) * dt_s)
            if controller.finished(state):
                break
        else:
            if log_events:
                log(f"Holding trace H{i + 1:02d} hit the step cap before reaching the runway", "WARNING")
        traces.append(FlightTrace(aircraft_id=f"H{i + 1:02d}", type=params.type, kind="arrival",
                                  samples=_resampled(states, times, stride), initial_mass_kg=mass))
        if log_events:
            log(f"H{i + 1:02d}: {len(states) - 1} steps, {mass - state.mass_kg:.1f} kg burned", "DEBUG")
    return traces


def write_traces_csv(traces: list, path) -> Path:
    path = Path(path)
    frame = pd.concat([t.to_frame() for t in traces], ignore_index=True) if traces \
        else pd.DataFrame(columns=TRACE_COLUMNS)
    frame.to_csv(path, index=False)
    return path
