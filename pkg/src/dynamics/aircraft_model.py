"""
Point-mass aircraft dynamics.

Forward-Euler difference equations for the six-state model
(x, y, z, airspeed, heading, mass) driven by thrust, bank and climb angle,
with coordinated-turn lift and a parabolic drag polar. The array kernels
(`lift_drag_arrays`, `step_arrays`) broadcast over any leading shape and are
what the optimizer uses; `lift_drag` and `step` are the checked scalar forms.
"""

from typing import Optional

import numpy as np

from entities.aircraft import AircraftParams, AircraftState, ControlInput
from errors import DynamicsDomainError

G = 9.81
RHO_0 = 1.225


def air_density(z_m, isa: bool = True, rho_const: float = RHO_0):
    """ISA troposphere density, or a constant when isa is False."""
    if not isa:
        return np.full_like(np.asarray(z_m, dtype=float), rho_const) if np.ndim(z_m) else float(rho_const)
    base = np.maximum(1.0 - 2.2558e-5 * np.asarray(z_m, dtype=float), 1e-6)
    rho = RHO_0 * base ** 4.2559
    return rho if np.ndim(z_m) else float(rho)


def lift_drag_arrays(v_s, mass, bank, rho, wing_area, cd0, k):
    lift = mass * G / np.cos(bank)
    dyn_pressure_area = 0.5 * rho * v_s * v_s * wing_area
    c_l = lift / dyn_pressure_area
    drag = dyn_pressure_area * (cd0 + k * c_l * c_l)
    return lift, drag


def lift_drag(state: AircraftState, bank_rad: float, params: AircraftParams,
              air_density: float) -> tuple[float, float]:
    """Lift and drag (N) for a coordinated turn at the given bank."""
    if state.v_s_mps <= 0:
        raise DynamicsDomainError("Lift/drag undefined at zero airspeed", quantity="v_s")
    if abs(bank_rad) >= np.pi / 2:
        raise DynamicsDomainError(f"Bank angle {np.degrees(bank_rad):.1f} deg has no lift balance",
                                  quantity="bank")
    lift, drag = lift_drag_arrays(state.v_s_mps, state.mass_kg, bank_rad, air_density,
                                  params.wing_area_m2, params.cd0, params.induced_drag_factor_k)
    return float(lift), float(drag)


def fuel_burn_coeff_arrays(v_s, cf1, cf2):
    return cf1 * (1.0 + v_s / cf2)


def fuel_burn_coeff(v_s_mps: float, params: AircraftParams) -> float:
    """Fuel burned per unit thrust per second, kg/(N*s)."""
    return float(fuel_burn_coeff_arrays(v_s_mps, params.fuel_coeff_cf1, params.fuel_coeff_cf2))


def step_arrays(x, y, z, v_s, chi, mass, thrust, bank, climb, w_x, w_y, dt, rho,
                wing_area, cd0, k, eta):
    """One forward-Euler step. Returns (x, y, z, v_s, chi, mass, drag)."""
    lift, drag = lift_drag_arrays(v_s, mass, bank, rho, wing_area, cd0, k)
    cos_climb = np.cos(climb)
    x_next = x + dt * (v_s * np.cos(chi) * cos_climb) + w_x * dt
    y_next = y + dt * (v_s * np.sin(chi) * cos_climb) + w_y * dt
    z_next = z + dt * (v_s * np.sin(climb))
    v_next = v_s + dt * ((thrust - drag) / mass - G * np.sin(climb))
    chi_next = chi + dt * (lift * np.sin(bank) / (mass * v_s))
    mass_next = mass - dt * (eta * thrust)
    return x_next, y_next, z_next, v_next, chi_next, mass_next, drag


def step(state: AircraftState, u: ControlInput, wind: tuple[float, float], dt_s: float,
         params: AircraftParams, eta: float, air_density: Optional[float] = None) -> AircraftState:
    """Advance one aircraft by dt_s. No clamping; envelope checks live in constraints."""
    if dt_s <= 0:
        raise DynamicsDomainError("Step length must be positive", quantity="dt")
    if eta < 0:
        raise DynamicsDomainError("Fuel-burn coefficient must be non-negative", quantity="eta")
    if state.v_s_mps == 0:
        raise DynamicsDomainError("Heading update divides by zero airspeed", quantity="v_s")
    if abs(u.bank_rad) >= np.pi / 2:
        raise DynamicsDomainError("Bank angle at or beyond 90 deg", quantity="bank")
    rho = _density_at(state.z_m) if air_density is None else air_density
    x, y, z, v, chi, m, _ = step_arrays(
        state.x_m, state.y_m, state.z_m, state.v_s_mps, state.chi_rad, state.mass_kg,
        u.thrust_N, u.bank_rad, u.climb_rad, wind[0], wind[1], dt_s, rho,
        params.wing_area_m2, params.cd0, params.induced_drag_factor_k, eta)
    return AircraftState.from_array((x, y, z, v, chi, m))


def _density_at(z_m: float) -> float:
    return air_density(z_m, isa=True)
