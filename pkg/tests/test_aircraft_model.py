import json
import math

import numpy as np
import pytest

from dynamics.aircraft_model import G, RHO_0, air_density, fuel_burn_coeff, lift_drag, step
from entities.aircraft import CF1_TO_SI, KNOT_MPS, AircraftParams, AircraftState, ControlInput
from errors import ConfigError, DynamicsDomainError


def reference_step(state, u, wind, dt, params, eta, rho):
    """Independent single-step evaluator written out term by term."""
    x, y, z, v, chi, m = state
    T, phi, gamma = u
    lift = m * G / math.cos(phi)
    c_l = 2.0 * lift / (rho * v ** 2 * params.wing_area_m2)
    drag = 0.5 * rho * v ** 2 * params.wing_area_m2 * (params.cd0 + params.induced_drag_factor_k * c_l ** 2)
    return (
        x + dt * v * math.cos(chi) * math.cos(gamma) + wind[0] * dt,
        y + dt * v * math.sin(chi) * math.cos(gamma) + wind[1] * dt,
        z + dt * v * math.sin(gamma),
        v + dt * ((T - drag) / m - G * math.sin(gamma)),
        chi + dt * lift * math.sin(phi) / (m * v),
        m - dt * eta * T,
    )


class TestAircraftParams:
    def test_units_converted_at_load(self, a320):
        assert a320.fuel_coeff_cf1 == pytest.approx(0.94 * CF1_TO_SI)
        assert a320.fuel_coeff_cf2 == pytest.approx(100000 * KNOT_MPS)
        assert a320.phi_max_rad == pytest.approx(math.radians(30))

    def test_to_dict_inverts_from_dict(self, a320):
        again = AircraftParams.from_dict(a320.to_dict())
        assert again.fuel_coeff_cf1 == pytest.approx(a320.fuel_coeff_cf1)
        assert again.gamma_max_rad == pytest.approx(a320.gamma_max_rad)

    def test_zero_cf2_rejected(self, a320):
        data = a320.to_dict()
        data["fuel_coeff_cf2"] = 0
        with pytest.raises(ConfigError):
            AircraftParams.from_dict(data)

    def test_empty_mass_must_be_below_mtow(self, a320):
        data = a320.to_dict()
        data["empty_mass_kg"] = data["max_takeoff_mass_kg"]
        with pytest.raises(ConfigError):
            AircraftParams.from_dict(data)

    def test_missing_key_names_the_key(self, a320):
        data = a320.to_dict()
        del data["cd0"]
        with pytest.raises(ConfigError, match="cd0"):
            AircraftParams.from_dict(data)

    def test_load_directory_keys_by_type(self, tmp_path, a320):
        data = a320.to_dict()
        data["type"] = "B738"
        (tmp_path / "B738.json").write_text(json.dumps(data))
        types = AircraftParams.load_directory(tmp_path)
        assert list(types) == ["B738"]

    def test_bank_bound_is_open(self, a320):
        low, high = a320.control_bounds()
        assert high[1] < a320.phi_max_rad
        assert low[1] > -a320.phi_max_rad
        assert high[0] == a320.thrust_max_N

    def test_initial_mass_reserve(self, a320):
        assert a320.initial_mass(1.0) == a320.max_takeoff_mass_kg
        assert a320.initial_mass(0.2) == pytest.approx(77000 - 19000 * 0.8)


class TestLiftDrag:
    def test_lift_equals_weight_level(self, a320):
        state = AircraftState(0, 0, 0, 100.0, 0.0, 60000.0)
        lift, _ = lift_drag(state, 0.0, a320, RHO_0)
        assert lift == pytest.approx(588600.0)

    def test_drag_by_hand(self, a320):
        state = AircraftState(0, 0, 0, 100.0, 0.0, 60000.0)
        _, drag = lift_drag(state, 0.0, a320, 1.225)
        q_s = 0.5 * 1.225 * 100.0 ** 2 * 122.6
        c_l = 588600.0 / q_s
        assert drag == pytest.approx(q_s * (0.024 + 0.0375 * c_l ** 2), rel=1e-12)

    def test_even_in_bank(self, a320, cruise_state):
        assert lift_drag(cruise_state, 0.3, a320, 1.0) == lift_drag(cruise_state, -0.3, a320, 1.0)

    @pytest.mark.parametrize("bank", [math.pi / 2, -math.pi / 2, 2.0])
    def test_bank_at_or_beyond_ninety_degrees(self, a320, cruise_state, bank):
        with pytest.raises(DynamicsDomainError):
            lift_drag(cruise_state, bank, a320, 1.0)

    def test_zero_airspeed(self, a320):
        with pytest.raises(DynamicsDomainError):
            lift_drag(AircraftState(0, 0, 0, 0.0, 0, 60000.0), 0.0, a320, 1.0)


class TestFuelBurnCoeff:
    def test_zero_airspeed_gives_cf1(self, a320):
        assert fuel_burn_coeff(0.0, a320) == pytest.approx(a320.fuel_coeff_cf1)

    def test_doubling_point(self, a320):
        assert fuel_burn_coeff(a320.fuel_coeff_cf2, a320) == pytest.approx(2.0 * a320.fuel_coeff_cf1)

    def test_a320_cruise_value(self, a320):
        expected = 0.94 / 60000.0 * (1.0 + 120.0 / (100000 * 0.514444))
        assert fuel_burn_coeff(120.0, a320) == pytest.approx(expected, rel=1e-12)


class TestStep:
    def test_trimmed_level_flight(self, a320):
        state = AircraftState(0.0, 0.0, 1000.0, 100.0, 0.0, 60000.0)
        _, drag = lift_drag(state, 0.0, a320, RHO_0)
        eta = fuel_burn_coeff(100.0, a320)
        nxt = step(state, ControlInput(drag, 0.0, 0.0), (0.0, 0.0), 10.0, a320, eta, air_density=RHO_0)
        assert nxt.x_m == pytest.approx(1000.0)
        assert nxt.y_m == pytest.approx(0.0)
        assert nxt.z_m == 1000.0
        assert nxt.v_s_mps == pytest.approx(100.0)
        assert nxt.chi_rad == 0.0
        assert nxt.mass_kg == pytest.approx(60000.0 - 10.0 * eta * drag)

    def test_zero_thrust_burns_nothing(self, a320, cruise_state):
        nxt = step(cruise_state, ControlInput(0.0, 0.0, 0.0), (0, 0), 10.0, a320, 1e-5)
        assert nxt.mass_kg == cruise_state.mass_kg

    def test_matches_reference_evaluator(self, a320):
        rng = np.random.default_rng(3)
        for _ in range(20):
            state = AircraftState(*rng.uniform([-2e4, -2e4, 500, 70, -3, 50000], [2e4, 2e4, 8000, 170, 3, 70000]))
            u = ControlInput(*rng.uniform([5000, -0.5, -0.1], [120000, 0.5, 0.1]))
            wind = tuple(rng.normal(0, 5, 2))
            eta = fuel_burn_coeff(state.v_s_mps, a320)
            rho = air_density(state.z_m)
            got = step(state, u, wind, 10.0, a320, eta, air_density=rho).as_array()
            want = reference_step(state.as_array(), u.as_array(), wind, 10.0, a320, eta, rho)
            np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_ground_speed_is_airspeed_plus_wind(self, a320, cruise_state):
        wind = (7.0, -3.0)
        nxt = step(cruise_state, ControlInput(40000, 0.2, 0.0), wind, 10.0, a320, 1e-5)
        ground = np.array([nxt.x_m - cruise_state.x_m, nxt.y_m - cruise_state.y_m]) / 10.0
        assert np.linalg.norm(ground - wind) == pytest.approx(cruise_state.v_s_mps)

    def test_deterministic(self, a320, cruise_state):
        u = ControlInput(50000, 0.1, 0.02)
        assert step(cruise_state, u, (1, 2), 10, a320, 1e-5) == step(cruise_state, u, (1, 2), 10, a320, 1e-5)

    def test_zero_airspeed_is_domain_error(self, a320):
        with pytest.raises(DynamicsDomainError):
            step(AircraftState(0, 0, 100, 0.0, 0, 60000), ControlInput(1000, 0, 0), (0, 0), 10, a320, 1e-5)

    def test_non_positive_dt(self, a320, cruise_state):
        with pytest.raises(DynamicsDomainError):
            step(cruise_state, ControlInput(1000, 0, 0), (0, 0), 0.0, a320, 1e-5)


def test_isa_density_decreases_with_altitude():
    assert air_density(0.0) == pytest.approx(RHO_0)
    assert air_density(5000.0) < air_density(1000.0)
    np.testing.assert_allclose(air_density(np.array([0.0, 0.0]), isa=False, rho_const=1.1), [1.1, 1.1])
