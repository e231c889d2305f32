import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

CO2_PER_KG_FUEL = 3.15
TRACE_COLUMNS = ["t_s", "aircraft_id", "type", "flag", "x_m", "y_m", "z_m", "vs_mps", "chi_deg"]


@dataclass
class FlightTrace:
    """Recorded states of one aircraft. samples columns: t_s, x_m, y_m, z_m, vs_mps, chi_rad."""
    aircraft_id: str
    type: str
    kind: str
    samples: np.ndarray
    initial_mass_kg: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, 6)
        if self.samples.shape[0] < 2:
            raise ValueError(f"Trace {self.aircraft_id} needs at least two samples")
        if np.any(np.diff(self.samples[:, 0]) <= 0):
            raise ValueError(f"Trace {self.aircraft_id} times must be strictly increasing")
        if self.kind not in ("arrival", "departure"):
            raise ValueError(f"Trace {self.aircraft_id} kind must be arrival or departure")

    @property
    def intervals(self) -> int:
        return self.samples.shape[0] - 1

    @property
    def dt_s(self) -> np.ndarray:
        return np.diff(self.samples[:, 0])

    def to_frame(self) -> pd.DataFrame:
        s = self.samples
        return pd.DataFrame({
            "t_s": s[:, 0],
            "aircraft_id": self.aircraft_id,
            "type": self.type,
            "flag": self.kind,
            "x_m": s[:, 1],
            "y_m": s[:, 2],
            "z_m": s[:, 3],
            "vs_mps": s[:, 4],
            "chi_deg": np.degrees(s[:, 5]) % 360.0,
        }, columns=TRACE_COLUMNS)


@dataclass
class FuelRow:
    aircraft_id: str
    f1_kg: float
    f2_kg: float
    fs_kg: Optional[float] = None
    flags: list = field(default_factory=list)

    @property
    def mean_kg(self) -> float:
        return 0.5 * (self.f1_kg + self.f2_kg)

    @property
    def saving_pct(self) -> Optional[float]:
        if self.fs_kg is None or self.mean_kg == 0:
            return None
        return 100.0 * (self.mean_kg - self.fs_kg) / self.mean_kg

    def to_dict(self) -> dict:
        saving = self.saving_pct
        return {
            "aircraft_id": self.aircraft_id,
            "F1_kg": round(self.f1_kg, 3),
            "F2_kg": round(self.f2_kg, 3),
            "mean_F_kg": round(self.mean_kg, 3),
            "Fs_kg": None if self.fs_kg is None else round(self.fs_kg, 3),
            "saving_pct": None if saving is None or not math.isfinite(saving) else round(saving, 2),
            "flags": list(self.flags),
        }


@dataclass
class FuelReport:
    rows: list
    residuals: dict = field(default_factory=dict)

    @property
    def totals(self) -> FuelRow:
        with_sim = [r for r in self.rows if r.fs_kg is not None]
        fs = sum(r.fs_kg for r in with_sim) if with_sim and len(with_sim) == len(self.rows) else None
        return FuelRow(aircraft_id="TOTAL", f1_kg=sum(r.f1_kg for r in self.rows),
                       f2_kg=sum(r.f2_kg for r in self.rows), fs_kg=fs)

    @property
    def saving_kg(self) -> Optional[float]:
        t = self.totals
        return None if t.fs_kg is None else t.mean_kg - t.fs_kg

    def co2_kg(self) -> dict:
        t = self.totals
        result = {"mean_F": CO2_PER_KG_FUEL * t.mean_kg}
        if t.fs_kg is not None:
            result["Fs"] = CO2_PER_KG_FUEL * t.fs_kg
            result["saving"] = CO2_PER_KG_FUEL * self.saving_kg
        return result

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.rows + [self.totals]])

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "totals": self.totals.to_dict(),
            "saving_kg": self.saving_kg,
            "co2_kg": self.co2_kg(),
        }
