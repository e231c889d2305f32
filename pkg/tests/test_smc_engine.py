import itertools
import math

import numpy as np
import pytest

from conftest import single_problem
from dynamics.objectives import ArrivalGoal
from entities.aircraft import AircraftState
from errors import ConfigError, InfeasibleError
from optimizer.horizon import simulate_and_score
from optimizer.smc_engine import (Population, SmcConfig, SmcOptimizer, evaluate_particle, init_particles, perturb,
                                  resample, run_smc, sample_schedule, select_best)
from optimizer.worker_pool import WorkerPool
from wind.wind_field import WindConfig, init_field


def population_with(log_weights, n_aircraft=2, horizon=2):
    log_weights = np.asarray(log_weights, dtype=float).reshape(-1, n_aircraft)
    size = log_weights.shape[0]
    controls = np.arange(size, dtype=float)[:, None, None, None] * np.ones((size, n_aircraft, horizon, 3))
    return Population(controls=controls, log_weights=log_weights)


@pytest.fixture
def windy_problem(a320):
    grid = init_field(WindConfig(), 10.0, np.random.default_rng(21))
    state = AircraftState(14000.0, 3000.0, 2200.0, 120.0, math.pi, a320.initial_mass(0.2))
    return single_problem(a320, state, ArrivalGoal(), horizon=3, wind=grid)


class TestSchedule:
    def test_first_iteration(self):
        assert sample_schedule(0) == 8

    def test_grows(self):
        assert sample_schedule(20) == math.floor(3 + 5 * math.e)
        assert all(sample_schedule(j + 1) >= sample_schedule(j) for j in range(100))

    def test_negative_iteration(self):
        with pytest.raises(ValueError):
            sample_schedule(-1)


class TestSmcConfig:
    def test_degrees_in_config(self):
        cfg = SmcConfig.from_dict({"perturb_sigma": {"bank_deg": 4.0}, "schedule": {"base": 1, "scale": 2}})
        assert cfg.sigma_bank_rad == pytest.approx(math.radians(4.0))
        assert cfg.repeats(0) == 3

    @pytest.mark.parametrize("data", [{"anneal": 0.0}, {"particles": 0}, {"chunk_size": 0},
                                      {"schedule": {"base": -10.0, "scale": 1.0}},
                                      {"schedule": {"rate": -0.1}}, {"particles": "lots"}])
    def test_invalid(self, data):
        with pytest.raises(ConfigError):
            SmcConfig.from_dict(data)

    def test_perturb_sigma_anneals(self, a320):
        low, high = (b[None, :] for b in a320.control_bounds())
        cfg = SmcConfig(anneal=0.5)
        np.testing.assert_allclose(cfg.perturb_sigma(low, high, 2), 0.25 * cfg.perturb_sigma(low, high, 0))
        assert cfg.perturb_sigma(low, high)[0, 0] == pytest.approx(0.05 * (120000 - 5000))


class TestPopulation:
    def test_init_within_bounds_and_uniform_weights(self, a320):
        low, high = (b[None, :] for b in a320.control_bounds())
        pop = init_particles((low, high), 64, 4, np.random.default_rng(0))
        assert pop.controls.shape == (64, 1, 4, 3)
        assert (pop.controls >= low[None, :, None, :]).all() and (pop.controls <= high[None, :, None, :]).all()
        np.testing.assert_allclose(np.exp(pop.log_weights), 1 / 64)

    def test_ess(self):
        pop = population_with([[0.0, 0.0], [0.0, -np.inf], [0.0, -np.inf], [0.0, -np.inf]])
        np.testing.assert_allclose(pop.ess(), [4.0, 1.0])
        dead = population_with([[-np.inf, 0.0], [-np.inf, 0.0]])
        assert dead.ess()[0] == 0.0


class TestResample:
    def test_single_survivor_takes_over(self):
        pop = population_with([[-np.inf, 0.0], [0.0, 0.0], [-np.inf, 0.0], [-np.inf, 0.0]])
        out = resample(pop, np.random.default_rng(3))
        assert (out.controls[:, 0] == 1.0).all()
        assert sorted(out.controls[:, 1, 0, 0]) == [0.0, 1.0, 2.0, 3.0]
        np.testing.assert_allclose(np.exp(out.log_weights), 0.25)

    def test_columns_resample_independently(self):
        pop = population_with([[0.0, -np.inf], [-np.inf, 0.0], [-np.inf, -np.inf]])
        out = resample(pop, np.random.default_rng(5))
        assert (out.controls[:, 0] == 0.0).all()
        assert (out.controls[:, 1] == 1.0).all()

    def test_systematic_counts(self):
        weights = np.log(np.array([0.5, 0.25, 0.25, 1e-300]))
        pop = population_with(weights[:, None], n_aircraft=1)
        out = resample(pop, np.random.default_rng(7))
        counts = np.bincount(out.controls[:, 0, 0, 0].astype(int), minlength=4)
        np.testing.assert_array_equal(counts, [2, 1, 1, 0])

    def test_all_zero_column_names_the_aircraft(self):
        pop = population_with([[0.0, -np.inf], [0.0, -np.inf]])
        with pytest.raises(InfeasibleError) as excinfo:
            resample(pop, np.random.default_rng(0), aircraft_ids=["A01", "D07"])
        assert excinfo.value.aircraft_id == "D07"


class TestPerturbAndSelect:
    def test_perturb_clamps(self, a320):
        low, high = (b[None, :] for b in a320.control_bounds())
        pop = init_particles((low, high), 32, 3, np.random.default_rng(1))
        out = perturb(pop, np.array([[1e6, 10.0, 10.0]]), (low, high), np.random.default_rng(2))
        assert (out.controls >= low[None, :, None, :]).all() and (out.controls <= high[None, :, None, :]).all()
        assert (np.abs(out.controls[..., 1]) < a320.phi_max_rad).all()
        np.testing.assert_array_equal(out.log_weights, pop.log_weights)

    def test_perturb_step_sizes(self, a320):
        low, high = (b[None, :] for b in a320.control_bounds())
        controls = np.broadcast_to((low + high)[:, None, :] / 2, (4096, 1, 3, 3)).copy()
        pop = Population(controls=controls, log_weights=np.zeros((4096, 1)))
        sigma = SmcConfig().perturb_sigma(low, high)
        out = perturb(pop, sigma, (low, high), np.random.default_rng(4))
        spread = (out.controls - controls).reshape(-1, 3).std(axis=0)
        expected = [0.05 * (a320.thrust_max_N - a320.thrust_min_N), math.radians(2.0), math.radians(0.5)]
        np.testing.assert_allclose(spread, expected, rtol=0.03)

    def test_perturb_at_the_bound_stays_inside(self, a320):
        low, high = (b[None, :] for b in a320.control_bounds())
        controls = np.broadcast_to(high[:, None, :], (2048, 1, 2, 3)).copy()
        pop = Population(controls=controls, log_weights=np.zeros((2048, 1)))
        out = perturb(pop, SmcConfig().perturb_sigma(low, high), (low, high), np.random.default_rng(6))
        assert (out.controls <= high[None, :, None, :]).all() and (out.controls >= low[None, :, None, :]).all()
        at_bound = np.mean(out.controls == high[None, :, None, :], axis=(0, 1, 2))
        np.testing.assert_allclose(at_bound, 0.5, atol=0.05)

    def test_select_best_maximises_product(self):
        pop = population_with([[-1.0, -1.0], [-0.5, -2.0], [-0.1, -1.5]])
        index, particle = select_best(pop)
        assert index == 2
        np.testing.assert_array_equal(particle.controls, pop.controls[2])

    def test_infeasible_particle_never_wins(self):
        pop = population_with([[0.0, -np.inf], [-50.0, -50.0]])
        assert select_best(pop)[0] == 1

    def test_no_feasible_particle(self):
        pop = population_with([[0.0, -np.inf], [-np.inf, 0.0]])
        with pytest.raises(InfeasibleError):
            select_best(pop, ["A", "B"])


def test_evaluate_particle_multiplies_repeated_costs(toy_problem):
    pop = init_particles(toy_problem.control_bounds(), 4, toy_problem.horizon, np.random.default_rng(0))
    particle = pop.particle(2)
    costs, feasible = simulate_and_score(toy_problem, particle.controls[None])
    with np.errstate(divide='ignore'):
        expected = np.where(feasible[0], particle.log_weights + 3 * np.log(costs[0]), -np.inf)
    got = evaluate_particle(particle, toy_problem, 3, np.random.default_rng(1))
    np.testing.assert_allclose(got, expected)


class TestOptimizer:
    config = SmcConfig(particles=64, iterations=3, schedule_base=1.0, schedule_scale=1.0, chunk_size=16)

    def test_result_shape_and_feasibility(self, toy_problem):
        result = run_smc(toy_problem, self.config, seed=11)
        assert result.controls.shape == (1, 2, 3)
        assert result.first_controls.shape == (1, 3)
        costs, feasible = simulate_and_score(toy_problem, result.controls[None])
        assert feasible.all() and costs[0, 0] > 0
        assert len(result.diagnostics) == 3
        assert set(result.diagnostics[0]) >= {"iteration", "repeats", "ess", "best_log_weight", "wall_time_s"}

    def test_same_seed_same_plan(self, windy_problem):
        a = run_smc(windy_problem, self.config, seed=3)
        b = run_smc(windy_problem, self.config, seed=3)
        np.testing.assert_array_equal(a.controls, b.controls)

    @pytest.mark.parametrize("chunk_size", [1, 4, 64])
    def test_chunk_size_does_not_change_weights(self, windy_problem, chunk_size):
        pop = init_particles(windy_problem.control_bounds(), 64, 3, np.random.default_rng(8))
        reference = SmcOptimizer(windy_problem, self.config, seed=5).evaluate(pop, 0, 4)
        cfg = SmcConfig(particles=64, iterations=3, chunk_size=chunk_size)
        other = SmcOptimizer(windy_problem, cfg, seed=5).evaluate(pop, 0, 4)
        np.testing.assert_array_equal(reference.log_weights, other.log_weights)

    def test_worker_count_does_not_change_plan(self, windy_problem):
        single = run_smc(windy_problem, self.config, seed=9)
        with WorkerPool(2) as pool:
            parallel = run_smc(windy_problem, self.config, seed=9, pool=pool)
        np.testing.assert_array_equal(single.controls, parallel.controls)

    def test_elitism_keeps_plan_feasible(self, toy_problem):
        cfg = SmcConfig(particles=64, iterations=4, schedule_base=1.0, schedule_scale=1.0, elitism=True)
        result = run_smc(toy_problem, cfg, seed=2)
        assert simulate_and_score(toy_problem, result.controls[None])[1].all()

    def test_hopeless_problem_raises(self, a320):
        state = AircraftState(15000.0, 0.0, 2000.0, 120.0, math.pi, a320.empty_mass_kg - 1.0)
        problem = single_problem(a320, state, ArrivalGoal())
        with pytest.raises(InfeasibleError) as excinfo:
            run_smc(problem, self.config, seed=0)
        assert excinfo.value.aircraft_id == "T1"
        assert excinfo.value.iteration == 0


@pytest.mark.slow
def test_matches_brute_force_on_small_horizon(toy_problem):
    low, high = (b[0] for b in toy_problem.control_bounds())
    axes = [np.linspace(low[k], high[k], 7) for k in range(3)]
    per_step = np.array(list(itertools.product(*axes)))
    pairs = np.array(list(itertools.product(range(len(per_step)), repeat=2)))
    controls = per_step[pairs][:, None, :, :]
    costs, feasible = simulate_and_score(toy_problem, controls)
    grid_best = float(np.max(np.where(feasible, costs, 0.0)))

    cfg = SmcConfig(particles=2048, iterations=20, schedule_base=1.0, schedule_scale=1.0)
    result = run_smc(toy_problem, cfg, seed=1)
    smc_cost, smc_feasible = simulate_and_score(toy_problem, result.controls[None])
    assert smc_feasible.all()
    assert smc_cost[0, 0] >= 0.98 * grid_best
