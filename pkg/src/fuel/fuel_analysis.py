"""
Fuel analysis for recorded flight traces.

Two reverse estimators infer the fuel burned between consecutive samples of a
trace:

- estimate1 runs the point-mass dynamics backwards. Bank, climb and thrust are
  recovered from the heading, altitude and airspeed changes, and whatever the
  airspeed vector cannot explain in the position change is reported as a
  residual wind.
- estimate2 dead-reckons the straight-line distance between samples and
  uses it as the airspeed, which is exact in still air on straight legs and
  badly underestimates airspeed when an aircraft circles between samples.

`compare` aggregates both estimates (and optionally simulated fuel) into a
FuelReport; `ingest` reads, filters and classifies a trace CSV.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from dynamics.aircraft_model import G, RHO_0, air_density, fuel_burn_coeff_arrays, lift_drag_arrays
from dynamics.objectives import wrap_angle
from entities.aircraft import AircraftParams
from entities.scenario import ARRIVAL_RESERVE, DEPARTURE_RESERVE
from entities.trace import TRACE_COLUMNS, FlightTrace, FuelReport, FuelRow
from errors import ConfigError, TraceFormatError
from log_utils import log

MIN_INTERVALS = 3
POOR_AIRSPEED_RATIO = 0.5
NUMERIC_COLUMNS = ["t_s", "x_m", "y_m", "z_m", "vs_mps", "chi_deg"]


@dataclass
class EstimateResult:
    """Per-interval output of one estimator over one trace."""
    aircraft_id: str
    burns_kg: np.ndarray
    mass_kg: np.ndarray
    thrust_N: np.ndarray
    flags: list = field(default_factory=list)
    residual_wind: Optional[np.ndarray] = None

    @property
    def total_kg(self) -> float:
        return float(np.sum(self.burns_kg))


def _densities(z, isa_density: bool, rho_const: float) -> np.ndarray:
    return np.asarray(air_density(np.asarray(z, dtype=float), isa=isa_density, rho_const=rho_const), dtype=float)


def estimate1(trace: FlightTrace, params: AircraftParams, isa_density: bool = True,
              rho_const: float = RHO_0, log_events: bool = False) -> EstimateResult:
    """Reverse-dynamics estimate with residual wind per interval."""
    s = trace.samples
    t, x, y, z, v, chi = (s[:, i] for i in range(6))
    dt = np.diff(t)
    n = trace.intervals
    flags = []

    sin_climb = np.zeros(n)
    valid = v[:-1] > 0
    sin_climb[valid] = np.diff(z)[valid] / (dt[valid] * v[:-1][valid])
    steep = np.abs(sin_climb) > 1.0
    climb = np.arcsin(np.clip(sin_climb, -1.0, 1.0))
    if np.any(steep):
        climb[steep] = np.sign(sin_climb[steep]) * params.gamma_max_rad
        flags.append("climb_clamped")
        if log_events:
            log(f"{trace.aircraft_id}: altitude change exceeds airspeed on {int(steep.sum())} interval(s), "
                f"climb clamped to the type bound", "WARNING")
    if not np.all(valid):
        flags.append("nonpositive_airspeed")

    bank = np.arctan(wrap_angle(np.diff(chi)) * v[:-1] / (G * dt))
    residual = np.column_stack([
        np.diff(x) / dt - v[:-1] * np.cos(chi[:-1]) * np.cos(climb),
        np.diff(y) / dt - v[:-1] * np.sin(chi[:-1]) * np.cos(climb),
    ])
    rho = _densities(z[:-1], isa_density, rho_const)
    eta = fuel_burn_coeff_arrays(v[:-1], params.fuel_coeff_cf1, params.fuel_coeff_cf2)

    # mass enters the drag, so the series is built interval by interval
    mass = np.empty(n + 1)
    mass[0] = trace.initial_mass_kg
    burns = np.zeros(n)
    thrust = np.zeros(n)
    for k in range(n):
        if not valid[k]:
            mass[k + 1] = mass[k]
            continue
        _, drag = lift_drag_arrays(v[k], mass[k], bank[k], rho[k], params.wing_area_m2, params.cd0,
                                   params.induced_drag_factor_k)
        thrust[k] = mass[k] * (v[k + 1] - v[k]) / dt[k] + drag + mass[k] * G * math.sin(climb[k])
        burns[k] = max(0.0, dt[k] * eta[k] * thrust[k])
        mass[k + 1] = mass[k] - burns[k]
    return EstimateResult(aircraft_id=trace.aircraft_id, burns_kg=burns, mass_kg=mass, thrust_N=thrust,
                          flags=flags, residual_wind=residual)


def estimate2(trace: FlightTrace, params: AircraftParams, isa_density: bool = True,
              rho_const: float = RHO_0, log_events: bool = False) -> EstimateResult:
    """Dead-reckoning estimate: the sample-to-sample distance stands in for airspeed."""
    s = trace.samples
    t, x, y, z, v, chi = (s[:, i] for i in range(6))
    dt = np.diff(t)
    dx, dy, dz = np.diff(x), np.diff(y), np.diff(z)
    n = trace.intervals
    flags = []

    distance = np.sqrt(dx * dx + dy * dy + dz * dz)
    moving = distance > 0
    if not np.all(moving):
        flags.append("zero_distance")
    v_hat = distance / dt
    if np.any(moving & (v_hat < POOR_AIRSPEED_RATIO * v[:-1])):
        flags.append("poor_airspeed")
        if log_events:
            log(f"{trace.aircraft_id}: dead-reckoned airspeed well below the recorded airspeed, "
                f"estimate 2 will overstate fuel", "WARNING")
    safe_distance = np.where(moving, distance, 1.0)
    climb = np.arcsin(np.clip(dz / safe_distance, -1.0, 1.0))
    track = np.arctan2(dy, dx)
    bank = np.arctan(wrap_angle(track - chi[:-1]) * v_hat / (G * dt))
    rho = _densities(z[:-1], isa_density, rho_const)
    eta = fuel_burn_coeff_arrays(v_hat, params.fuel_coeff_cf1, params.fuel_coeff_cf2)

    mass = np.empty(n + 1)
    mass[0] = trace.initial_mass_kg
    burns = np.zeros(n)
    thrust = np.zeros(n)
    for k in range(n):
        if not moving[k]:
            mass[k + 1] = mass[k]
            continue
        _, drag = lift_drag_arrays(v_hat[k], mass[k], bank[k], rho[k], params.wing_area_m2, params.cd0,
                                   params.induced_drag_factor_k)
        thrust[k] = mass[k] * (v[k + 1] - v_hat[k]) / dt[k] + drag + mass[k] * G * math.sin(climb[k])
        burns[k] = max(0.0, dt[k] * eta[k] * thrust[k])
        mass[k + 1] = mass[k] - burns[k]
    return EstimateResult(aircraft_id=trace.aircraft_id, burns_kg=burns, mass_kg=mass, thrust_N=thrust,
                          flags=flags)


def compare(first: dict, second: dict, simulated: Optional[dict] = None) -> FuelReport:
    """
    Per-aircraft report from the two estimates.

    Args:
        first: aircraft id -> EstimateResult from estimate1
        second: aircraft id -> EstimateResult from estimate2
        simulated: optional aircraft id -> simulated fuel in kg
    """
    if set(first) != set(second):
        raise ConfigError("Both estimates must cover the same aircraft", source="estimates")
    if simulated is not None and set(simulated) != set(first):
        missing = sorted(set(first) ^ set(simulated))
        raise ConfigError(f"Simulated fuel ids do not match the traces: {missing}", source="simulated")
    rows = []
    for aircraft_id, e1 in first.items():
        e2 = second[aircraft_id]
        rows.append(FuelRow(aircraft_id=aircraft_id, f1_kg=e1.total_kg, f2_kg=e2.total_kg,
                            fs_kg=None if simulated is None else float(simulated[aircraft_id]),
                            flags=sorted(set(e1.flags) | set(e2.flags))))
    residuals = {aircraft_id: e.residual_wind for aircraft_id, e in first.items() if e.residual_wind is not None}
    return FuelReport(rows=rows, residuals=residuals)


def estimate_all(traces: list, types: dict, isa_density: bool = True, log_events: bool = False) -> tuple[dict, dict]:
    first, second = {}, {}
    for trace in traces:
        params = types[trace.type]
        first[trace.aircraft_id] = estimate1(trace, params, isa_density=isa_density, log_events=log_events)
        second[trace.aircraft_id] = estimate2(trace, params, isa_density=isa_density, log_events=log_events)
    return first, second


def load_published_totals(path) -> FuelReport:
    """Summary rows (scenario, F_s, F_1, F_2) as a report for arithmetic regression."""
    frame = pd.read_csv(path, comment='#')
    rows = [FuelRow(aircraft_id=str(r["scenario"]), f1_kg=float(r["f1_kg"]), f2_kg=float(r["f2_kg"]),
                    fs_kg=float(r["fs_kg"])) for _, r in frame.iterrows()]
    return FuelReport(rows=rows)


@dataclass
class IngestResult:
    traces: list
    rejects: dict


def _read_frame(path: Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype={"aircraft_id": str, "type": str, "flag": str}, skip_blank_lines=False)
    except FileNotFoundError:
        raise TraceFormatError(f"Trace file not found: {path}")
    except pd.errors.EmptyDataError:
        raise TraceFormatError(f"Trace file is empty: {path}")
    missing = [c for c in TRACE_COLUMNS if c not in frame.columns]
    if missing:
        raise TraceFormatError(f"Trace file is missing columns {missing}")
    # header is line 1; blank lines keep their numbers before they are dropped
    frame["line"] = np.arange(len(frame)) + 2
    frame = frame.dropna(how="all", subset=TRACE_COLUMNS)
    for column in NUMERIC_COLUMNS:
        values = pd.to_numeric(frame[column], errors='coerce')
        bad = values.isna() | ~np.isfinite(values.fillna(0.0))
        if bad.any():
            index = int(np.flatnonzero(bad.to_numpy())[0])
            raise TraceFormatError(f"Non-numeric {column} value {frame[column].iloc[index]!r}",
                                   line_number=int(frame["line"].iloc[index]))
        frame[column] = values.astype(float)
    flags = frame["flag"].str.strip().str.lower()
    bad = ~flags.isin(["arrival", "departure"])
    if bad.any():
        index = int(np.flatnonzero(bad.to_numpy())[0])
        raise TraceFormatError(f"flag must be arrival or departure, got {frame['flag'].iloc[index]!r}",
                               line_number=int(frame["line"].iloc[index]))
    frame["flag"] = flags
    return frame


def _strip_ground(group: pd.DataFrame, min_altitude_m: float) -> pd.DataFrame:
    airborne = np.flatnonzero(group["z_m"].to_numpy() >= min_altitude_m)
    if airborne.size == 0:
        return group.iloc[0:0]
    return group.iloc[airborne[0]:airborne[-1] + 1]


def ingest(path, types: dict, min_altitude_m: float = 100.0, radius_m: float = 50000.0,
           overrides: Optional[dict] = None, log_events: bool = True) -> IngestResult:
    """
    Parse, filter and classify a trace CSV.

    Samples outside radius_m are dropped, on-ground samples are stripped from
    both ends, and traces left with fewer than three intervals are rejected.
    overrides maps aircraft id to a corrected arrival/departure flag.
    """
    path = Path(path)
    frame = _read_frame(path)
    overrides = overrides or {}
    traces, rejects = [], {}
    for aircraft_id, group in frame.groupby("aircraft_id", sort=False):
        aircraft_id = str(aircraft_id)
        group = group.sort_values("t_s", kind="stable")
        type_name = str(group["type"].iloc[0])
        if type_name not in types:
            rejects[aircraft_id] = f"unknown type {type_name}"
            continue
        if group["t_s"].duplicated().any():
            rejects[aircraft_id] = "repeated sample times"
            continue
        group = group[np.hypot(group["x_m"], group["y_m"]) <= radius_m]
        group = _strip_ground(group, min_altitude_m)
        if len(group) - 1 < MIN_INTERVALS:
            rejects[aircraft_id] = "too few intervals"
            continue
        kind = overrides.get(aircraft_id, group["flag"].iloc[0])
        params = types[type_name]
        reserve = ARRIVAL_RESERVE if kind == "arrival" else DEPARTURE_RESERVE
        samples = np.column_stack([group["t_s"], group["x_m"], group["y_m"], group["z_m"], group["vs_mps"],
                                   np.radians(group["chi_deg"])])
        traces.append(FlightTrace(aircraft_id=aircraft_id, type=type_name, kind=kind, samples=samples,
                                  initial_mass_kg=params.initial_mass(reserve)))

    if log_events:
        for aircraft_id, reason in rejects.items():
            log(f"Rejected trace {aircraft_id}: {reason}", "WARNING")
        log(f"Ingested {len(traces)} trace(s) from {path.name}, rejected {len(rejects)}")
    return IngestResult(traces=traces, rejects=rejects)
