"""
Output writers for simulation runs.

trajectories.csv  one row per realised state, with the control applied from it
summary.json      per-aircraft fuel and completion plus run totals
diagnostics.jsonl one JSON object per SMC outer iteration
*.dat             gnuplot data blocks (one block per aircraft, two blank lines apart)
"""

import json
import math
from pathlib import Path

import numpy as np
import pandas as pd

from entities.trace import FuelReport
from simulator.scenario_runner import RunRecord

TRAJECTORY_COLUMNS = ["step", "aircraft_id", "x_m", "y_m", "z_m", "vs_mps", "chi_deg", "mass_kg",
                      "T_N", "phi_deg", "gamma_deg"]


def trajectory_frame(record: RunRecord) -> pd.DataFrame:
    rows = []
    for outcome in record.aircraft.values():
        for j, (step_index, state) in enumerate(zip(outcome.steps, outcome.states)):
            u = outcome.controls[j] if j < len(outcome.controls) else None
            rows.append({
                "step": step_index,
                "aircraft_id": outcome.aircraft_id,
                "x_m": state.x_m,
                "y_m": state.y_m,
                "z_m": state.z_m,
                "vs_mps": state.v_s_mps,
                "chi_deg": math.degrees(state.chi_rad) % 360.0,
                "mass_kg": state.mass_kg,
                "T_N": u.thrust_N if u else np.nan,
                "phi_deg": math.degrees(u.bank_rad) if u else np.nan,
                "gamma_deg": math.degrees(u.climb_rad) if u else np.nan,
            })
    return pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)


def write_trajectories_csv(record: RunRecord, path) -> Path:
    path = Path(path)
    trajectory_frame(record).to_csv(path, index=False)
    return path


def write_summary_json(record: RunRecord, path) -> Path:
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(record.to_summary(), f, indent=2)
    return path


def write_diagnostics_jsonl(diagnostics: list, path) -> Path:
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as f:
        for entry in diagnostics:
            f.write(json.dumps(entry) + "\n")
    return path


def _write_blocks(path: Path, blocks: list, header: str):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f"# {header}\n")
        for name, frame in blocks:
            f.write(f"# {name}\n")
            f.write(frame.to_csv(sep=" ", index=False, header=False, float_format="%.3f", na_rep="NaN"))
            f.write("\n\n")


def write_plot_data(record: RunRecord, out_dir) -> list[Path]:
    """Trajectory and altitude-profile blocks for gnuplot `index` plotting."""
    out_dir = Path(out_dir)
    frame = trajectory_frame(record)
    blocks = [(aircraft_id, group[["x_m", "y_m", "z_m"]])
              for aircraft_id, group in frame.groupby("aircraft_id", sort=False)]
    trajectories = out_dir / "trajectories.dat"
    _write_blocks(trajectories, blocks, "x_m y_m z_m")
    profile_blocks = []
    for aircraft_id, group in frame.groupby("aircraft_id", sort=False):
        profile = pd.DataFrame({"distance_m": np.hypot(group["x_m"], group["y_m"]), "z_m": group["z_m"],
                                "mass_kg": group["mass_kg"]})
        profile_blocks.append((aircraft_id, profile))
    profiles = out_dir / "profiles.dat"
    _write_blocks(profiles, profile_blocks, "distance_m z_m mass_kg")
    return [trajectories, profiles]


def write_fuel_plot_data(report: FuelReport, out_dir) -> list[Path]:
    """Fuel comparison table and the Fuel Estimate 1 residual-wind scatter."""
    out_dir = Path(out_dir)
    comparison = out_dir / "fuel_comparison.dat"
    table = pd.DataFrame([{"index": i, "F1": r.f1_kg, "F2": r.f2_kg, "mean": r.mean_kg,
                           "Fs": np.nan if r.fs_kg is None else r.fs_kg} for i, r in enumerate(report.rows)])
    _write_blocks(comparison, [("fuel", table)], "index F1 F2 mean Fs")
    residuals = out_dir / "wind_residuals.dat"
    blocks = [(aircraft_id, pd.DataFrame(np.asarray(values).reshape(-1, 2), columns=["w_x", "w_y"]))
              for aircraft_id, values in report.residuals.items()]
    _write_blocks(residuals, blocks, "w_x_mps w_y_mps")
    return [comparison, residuals]
