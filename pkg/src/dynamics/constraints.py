"""
Unary and binary constraints.

Unary: flight envelope (state and control bounds), minimum mass and the
landing-sector test that marks an arrival as complete. Binary: the
cylindrical protection-zone separation between two aircraft.
"""

import math
from dataclasses import dataclass

import numpy as np

from dynamics.objectives import descent_angle_beta_arrays, wrap_angle
from entities.aircraft import AircraftParams, AircraftState, ControlInput
from errors import ConfigError

# absorbs rounding from degree conversion and angle wrapping at the inclusive bounds
ANGLE_TOL = 1e-12


@dataclass(frozen=True)
class LandingEnvelope:
    p_runway_m: float = 4000.0
    p_beta_rad: float = math.radians(6.0)
    p_chi_rad: float = math.radians(15.0)
    p_vs_mps: float = 80.0

    def __post_init__(self):
        if min(self.p_runway_m, self.p_beta_rad, self.p_chi_rad, self.p_vs_mps) <= 0:
            raise ConfigError("Landing envelope parameters must all be positive", source="landing")

    @staticmethod
    def from_dict(data: dict) -> 'LandingEnvelope':
        defaults = LandingEnvelope()
        return LandingEnvelope(
            p_runway_m=float(data.get("p_runway_m", defaults.p_runway_m)),
            p_beta_rad=math.radians(float(data.get("p_beta_deg", math.degrees(defaults.p_beta_rad)))),
            p_chi_rad=math.radians(float(data.get("p_chi_deg", math.degrees(defaults.p_chi_rad)))),
            p_vs_mps=float(data.get("p_vs_mps", defaults.p_vs_mps)),
        )


@dataclass(frozen=True)
class SeparationZone:
    p_r_m: float = 2500.0
    p_h_m: float = 300.0

    def __post_init__(self):
        if self.p_r_m <= 0 or self.p_h_m <= 0:
            raise ConfigError("Separation zone radius and half-height must be positive", source="separation")

    @staticmethod
    def from_dict(data: dict) -> 'SeparationZone':
        defaults = SeparationZone()
        return SeparationZone(p_r_m=float(data.get("p_r_m", defaults.p_r_m)),
                              p_h_m=float(data.get("p_h_m", defaults.p_h_m)))


def check_envelope(state: AircraftState, u: ControlInput, params: AircraftParams) -> list[str]:
    """Names of the violated envelope bounds; empty when the point is inside."""
    violations = []
    if not params.z_min_m <= state.z_m <= params.z_max_m:
        violations.append("altitude")
    if not abs(u.climb_rad) <= params.gamma_max_rad:
        violations.append("climb")
    if not abs(u.bank_rad) < params.phi_max_rad:
        violations.append("bank")
    if not params.thrust_min_N <= u.thrust_N <= params.thrust_max_N:
        violations.append("thrust")
    if not params.v_min_mps <= state.v_s_mps <= params.v_max_mps:
        violations.append("airspeed")
    return violations


def check_mass(state: AircraftState, params: AircraftParams) -> bool:
    return state.mass_kg >= params.empty_mass_kg


def check_separation(a: AircraftState, b: AircraftState, zone: SeparationZone) -> bool:
    """True when the two protection cylinders do not overlap."""
    return bool(separated_arrays(a.x_m, a.y_m, a.z_m, b.x_m, b.y_m, b.z_m, zone))


def in_landing_sector(state: AircraftState, env: LandingEnvelope) -> bool:
    """Arrival completion test for a runway at the origin landing East to West."""
    return bool(in_landing_sector_arrays(state.x_m, state.y_m, state.z_m, state.v_s_mps, state.chi_rad, env))


def envelope_ok_arrays(z, v_s, thrust, bank, climb, z_min, z_max, v_min, v_max,
                       t_min, t_max, gamma_max, phi_max):
    """Vectorised envelope check; NaN anywhere counts as a violation."""
    return ((z >= z_min) & (z <= z_max)
            & (np.abs(climb) <= gamma_max)
            & (np.abs(bank) < phi_max)
            & (thrust >= t_min) & (thrust <= t_max)
            & (v_s >= v_min) & (v_s <= v_max))


def separated_arrays(x1, y1, z1, x2, y2, z2, zone: SeparationZone):
    horizontal_sq = (x1 - x2) ** 2 + (y1 - y2) ** 2
    return (horizontal_sq >= (2.0 * zone.p_r_m) ** 2) | (np.abs(z1 - z2) >= 2.0 * zone.p_h_m)


def in_landing_sector_arrays(x, y, z, v_s, chi, env: LandingEnvelope):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    radius = np.hypot(x, y)
    with np.errstate(invalid='ignore', divide='ignore'):
        beta = descent_angle_beta_arrays(x, y, z)
    sector_angle = np.abs(np.arctan2(y, x))
    heading_error = np.abs(wrap_angle(np.asarray(chi, dtype=float) - np.pi))
    return ((radius <= env.p_runway_m)
            & (beta <= env.p_beta_rad)
            & (sector_angle <= env.p_chi_rad + ANGLE_TOL)
            & (heading_error <= env.p_chi_rad + ANGLE_TOL)
            & (np.asarray(v_s) <= env.p_vs_mps))
