"""
Sequential Monte Carlo optimizer for one MPC solve.

Each particle holds a full joint control plan (N aircraft x H steps x
(thrust, bank, climb)) and one weight per aircraft. An outer iteration
evaluates every particle under `sample_schedule(J)` wind disturbance draws,
multiplying each aircraft's weight by its score per draw (zero on any
constraint violation), then resamples every aircraft's column independently
and perturbs all controls. The best particle is the one with the largest
product of aircraft weights.

Weights live in log space; -inf is the zero weight. Particle evaluation is
split into chunks mapped over a `WorkerPool`; every particle draws its
disturbances from its own counter-based stream, so the result does not
depend on the chunk size or the number of workers.
"""

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from errors import ConfigError, InfeasibleError
from log_utils import log
from optimizer.horizon import HorizonProblem, simulate_and_score
from optimizer.rng_streams import StreamPurpose, particle_stream, stream
from optimizer.worker_pool import WorkerPool

# rows (particles x repeats) simulated together inside one chunk
MAX_BATCH_ROWS = 4096


def sample_schedule(iteration: int, base: float = 3.0, scale: float = 5.0, rate: float = 0.05) -> int:
    """Disturbance repeats for outer iteration J: floor(base + scale * e^(rate * J))."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    return int(math.floor(base + scale * math.exp(rate * iteration)))


@dataclass(frozen=True)
class SmcConfig:
    particles: int = 10240
    iterations: int = 100
    schedule_base: float = 3.0
    schedule_scale: float = 5.0
    schedule_rate: float = 0.05
    sigma_thrust_frac: float = 0.05
    sigma_bank_rad: float = math.radians(2.0)
    sigma_climb_rad: float = math.radians(0.5)
    anneal: float = 0.98
    chunk_size: int = 256
    workers: int = 1
    elitism: bool = False

    def __post_init__(self):
        if self.particles < 1 or self.iterations < 1:
            raise ConfigError("smc.particles and smc.iterations must be >= 1", source="smc")
        if self.chunk_size < 1 or self.workers < 1:
            raise ConfigError("smc.chunk_size and smc.workers must be >= 1", source="smc")
        if self.schedule_scale * self.schedule_rate < 0:
            raise ConfigError("smc.schedule must be non-decreasing in the iteration", source="smc")
        if sample_schedule(0, self.schedule_base, self.schedule_scale, self.schedule_rate) < 1:
            raise ConfigError("smc.schedule must give at least one repeat", source="smc")
        if min(self.sigma_thrust_frac, self.sigma_bank_rad, self.sigma_climb_rad) < 0:
            raise ConfigError("smc.perturb_sigma values must be non-negative", source="smc")
        if not 0 < self.anneal <= 1:
            raise ConfigError("smc.anneal must lie in (0, 1]", source="smc")

    @staticmethod
    def from_dict(data: dict) -> 'SmcConfig':
        d = SmcConfig()
        schedule = data.get("schedule", {})
        sigma = data.get("perturb_sigma", {})
        try:
            return SmcConfig(
                particles=int(data.get("particles", d.particles)),
                iterations=int(data.get("iterations", d.iterations)),
                schedule_base=float(schedule.get("base", d.schedule_base)),
                schedule_scale=float(schedule.get("scale", d.schedule_scale)),
                schedule_rate=float(schedule.get("rate", d.schedule_rate)),
                sigma_thrust_frac=float(sigma.get("thrust_frac", d.sigma_thrust_frac)),
                sigma_bank_rad=math.radians(float(sigma.get("bank_deg", math.degrees(d.sigma_bank_rad)))),
                sigma_climb_rad=math.radians(float(sigma.get("climb_deg", math.degrees(d.sigma_climb_rad)))),
                anneal=float(data.get("anneal", d.anneal)),
                chunk_size=int(data.get("chunk_size", d.chunk_size)),
                workers=int(data.get("workers", d.workers)),
                elitism=bool(data.get("elitism", d.elitism)),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid smc block: {e}", source="smc")

    def repeats(self, iteration: int) -> int:
        return sample_schedule(iteration, self.schedule_base, self.schedule_scale, self.schedule_rate)

    def perturb_sigma(self, low: np.ndarray, high: np.ndarray, iteration: int = 0) -> np.ndarray:
        """(N, 3) standard deviations, annealed by anneal**iteration."""
        sigma = np.empty_like(low, dtype=float)
        sigma[:, 0] = self.sigma_thrust_frac * (high[:, 0] - low[:, 0])
        sigma[:, 1] = self.sigma_bank_rad
        sigma[:, 2] = self.sigma_climb_rad
        return sigma * self.anneal ** iteration


@dataclass(frozen=True)
class Particle:
    controls: np.ndarray
    log_weights: np.ndarray
    rng_stream_id: int

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


@dataclass
class Population:
    controls: np.ndarray
    log_weights: np.ndarray

    @property
    def size(self) -> int:
        return self.controls.shape[0]

    @property
    def n_aircraft(self) -> int:
        return self.controls.shape[1]

    def particle(self, index: int) -> Particle:
        return Particle(controls=self.controls[index].copy(), log_weights=self.log_weights[index].copy(),
                        rng_stream_id=index)

    def ess(self) -> np.ndarray:
        """Effective sample size of each aircraft's weight column; 0 for an all-zero column."""
        result = np.zeros(self.n_aircraft)
        for i in range(self.n_aircraft):
            column = self.log_weights[:, i]
            if np.all(np.isneginf(column)):
                continue
            w = np.exp(column - column.max())
            w /= w.sum()
            result[i] = 1.0 / np.sum(w * w)
        return result


def init_particles(bounds: tuple[np.ndarray, np.ndarray], particles: int, horizon: int,
                   rng: np.random.Generator) -> Population:
    """Uniform controls within the (N, 3) bounds; every weight 1/L."""
    low, high = (np.asarray(b, dtype=float) for b in bounds)
    n_aircraft = low.shape[0]
    controls = rng.uniform(low[None, :, None, :], high[None, :, None, :],
                           size=(particles, n_aircraft, horizon, 3))
    return Population(controls=controls, log_weights=np.full((particles, n_aircraft), -math.log(particles)))


def _draw_normals(rng: np.random.Generator, count: int, problem: HorizonProblem) -> np.ndarray:
    return rng.standard_normal((count, max(problem.horizon - 1, 0), 2, problem.wind_nodes))


def _accumulate(log_weights: np.ndarray, costs: np.ndarray, feasible: np.ndarray) -> np.ndarray:
    """Fold per-repeat scores (C, R, N) into log weights (C, N), one repeat at a time."""
    with np.errstate(divide='ignore'):
        log_costs = np.where(feasible & (costs > 0), np.log(np.where(costs > 0, costs, 1.0)), -np.inf)
    for r in range(log_costs.shape[1]):
        log_weights = log_weights + log_costs[:, r]
    return log_weights


def evaluate_particle(particle: Particle, problem: HorizonProblem, repeats: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Log weights of one particle after `repeats` disturbance draws from rng."""
    controls = np.broadcast_to(particle.controls, (repeats,) + particle.controls.shape)
    normals = _draw_normals(rng, repeats, problem) if problem.wind is not None else None
    costs, feasible = simulate_and_score(problem, controls, normals)
    return _accumulate(particle.log_weights[None, :], costs[None], feasible[None])[0]


@dataclass(frozen=True)
class ChunkTask:
    problem: HorizonProblem
    controls: np.ndarray
    log_weights: np.ndarray
    first_particle: int
    repeats: int
    seed: int
    mpc_step: int
    iteration: int
    purpose: StreamPurpose = StreamPurpose.DISTURBANCE


def evaluate_chunk(task: ChunkTask) -> np.ndarray:
    """Updated log weights for a contiguous block of particles."""
    problem = task.problem
    count = task.controls.shape[0]
    streams = [particle_stream(task.seed, task.mpc_step, task.iteration, task.first_particle + j, task.purpose)
               for j in range(count)]
    block = max(1, min(task.repeats, MAX_BATCH_ROWS // count))
    log_weights = task.log_weights.copy()
    done = 0
    while done < task.repeats:
        rb = min(block, task.repeats - done)
        controls = np.repeat(task.controls, rb, axis=0)
        normals = None
        if problem.wind is not None:
            normals = np.concatenate([_draw_normals(s, rb, problem) for s in streams], axis=0)
        costs, feasible = simulate_and_score(problem, controls, normals)
        shape = (count, rb, problem.n_aircraft)
        log_weights = _accumulate(log_weights, costs.reshape(shape), feasible.reshape(shape))
        done += rb
    return log_weights


def resample(population: Population, rng: np.random.Generator,
             aircraft_ids: Optional[Sequence[str]] = None) -> Population:
    """Systematic resampling of every aircraft column independently; weights reset to 1/L."""
    size = population.size
    controls = np.empty_like(population.controls)
    offsets = rng.random(population.n_aircraft)
    for i in range(population.n_aircraft):
        column = population.log_weights[:, i]
        if np.all(np.isneginf(column)):
            name = aircraft_ids[i] if aircraft_ids is not None else str(i)
            raise InfeasibleError(f"No particle holds a feasible plan for aircraft {name}", aircraft_id=name)
        w = np.exp(column - column.max())
        cumulative = np.cumsum(w / w.sum())
        cumulative[-1] = 1.0
        positions = (np.arange(size) + offsets[i]) / size
        ancestors = np.searchsorted(cumulative, positions, side='right')
        controls[:, i] = population.controls[ancestors, i]
    return Population(controls=controls, log_weights=np.full_like(population.log_weights, -math.log(size)))


def perturb(population: Population, sigma: np.ndarray, bounds: tuple[np.ndarray, np.ndarray],
            rng: np.random.Generator) -> Population:
    """Add N(0, sigma) to every control, then clamp to the (N, 3) bounds."""
    low, high = bounds
    sigma = np.asarray(sigma, dtype=float)
    noise = rng.standard_normal(population.controls.shape) * sigma[None, :, None, :]
    controls = np.clip(population.controls + noise, low[None, :, None, :], high[None, :, None, :])
    return replace(population, controls=controls)


def select_best(population: Population, aircraft_ids: Optional[Sequence[str]] = None) -> tuple[int, Particle]:
    """Particle with the largest product of aircraft weights; particles with a zero weight never win."""
    totals = population.log_weights.sum(axis=1)
    best = int(np.argmax(totals))
    if np.isneginf(totals[best]):
        dead = np.all(np.isneginf(population.log_weights), axis=0)
        first = int(np.argmax(dead)) if dead.any() else None
        name = None
        if first is not None:
            name = aircraft_ids[first] if aircraft_ids is not None else str(first)
        raise InfeasibleError("Every particle contains an infeasible aircraft", aircraft_id=name)
    return best, population.particle(best)


@dataclass
class SmcResult:
    controls: np.ndarray
    log_weights: np.ndarray
    best_index: int
    diagnostics: list = field(default_factory=list)

    @property
    def first_controls(self) -> np.ndarray:
        """(N, 3) controls to apply at the current MPC step."""
        return self.controls[:, 0, :]


class SmcOptimizer:
    """Runs the outer SMC iterations for one HorizonProblem."""

    def __init__(self, problem: HorizonProblem, config: SmcConfig, seed: int, mpc_step: int = 0,
                 pool: Optional[WorkerPool] = None, log_events: bool = False):
        if problem.n_aircraft < 1:
            raise ValueError("SMC needs at least one active aircraft")
        self.problem = problem
        self.config = config
        self.seed = seed
        self.mpc_step = mpc_step
        self.pool = pool or WorkerPool(1)
        self.log_events = log_events
        self.bounds = problem.control_bounds()
        self.diagnostics = []

    def _log(self, message: str, level: str = "INFO"):
        if self.log_events:
            log(message, level)

    def _stream(self, purpose: StreamPurpose, iteration: int) -> np.random.Generator:
        return stream(self.seed, purpose, self.mpc_step, iteration)

    def evaluate(self, population: Population, iteration: int, repeats: int,
                 purpose: StreamPurpose = StreamPurpose.DISTURBANCE) -> Population:
        size, chunk = population.size, self.config.chunk_size
        tasks = [ChunkTask(problem=self.problem, controls=population.controls[start:start + chunk],
                           log_weights=population.log_weights[start:start + chunk], first_particle=start,
                           repeats=repeats, seed=self.seed, mpc_step=self.mpc_step, iteration=iteration,
                           purpose=purpose)
                 for start in range(0, size, chunk)]
        results = self.pool.map_chunks(evaluate_chunk, tasks)
        return replace(population, log_weights=np.concatenate(results, axis=0))

    def _advance(self, evaluated: Population, iteration: int, last: bool):
        ids = self.problem.aircraft_ids
        if last:
            return select_best(evaluated, ids)
        return resample(evaluated, self._stream(StreamPurpose.RESAMPLE, iteration), ids)

    def run(self) -> SmcResult:
        cfg = self.config
        population = init_particles(self.bounds, cfg.particles, self.problem.horizon,
                                    self._stream(StreamPurpose.INIT, 0))
        best = None
        for iteration in range(cfg.iterations):
            started = time.perf_counter()
            repeats = cfg.repeats(iteration)
            last = iteration == cfg.iterations - 1
            evaluated = self.evaluate(population, iteration, repeats)
            retried = False
            try:
                outcome = self._advance(evaluated, iteration, last)
            except InfeasibleError as first_failure:
                retried = True
                self._log(f"MPC step {self.mpc_step}, iteration {iteration}: {first_failure}; "
                          f"retrying with a fresh perturbation", "WARNING")
                sigma = cfg.perturb_sigma(*self.bounds, iteration)
                fresh = perturb(population, sigma, self.bounds, self._stream(StreamPurpose.RETRY, iteration))
                evaluated = self.evaluate(fresh, iteration, repeats, StreamPurpose.DISTURBANCE_RETRY)
                try:
                    outcome = self._advance(evaluated, iteration, last)
                except InfeasibleError as e:
                    self._record(evaluated, iteration, repeats, started, retried)
                    raise InfeasibleError(f"No feasible solution for aircraft {e.aircraft_id} "
                                          f"at MPC step {self.mpc_step}, iteration {iteration}",
                                          aircraft_id=e.aircraft_id, iteration=iteration,
                                          mpc_step=self.mpc_step)
            self._record(evaluated, iteration, repeats, started, retried)

            if last:
                best = outcome
                break
            population = perturb(outcome, cfg.perturb_sigma(*self.bounds, iteration), self.bounds,
                                 self._stream(StreamPurpose.PERTURB, iteration))
            if cfg.elitism:
                elite = int(np.argmax(evaluated.log_weights.sum(axis=1)))
                population.controls[0] = evaluated.controls[elite]

        index, particle = best
        return SmcResult(controls=particle.controls, log_weights=particle.log_weights, best_index=index,
                         diagnostics=self.diagnostics)

    def _record(self, evaluated: Population, iteration: int, repeats: int, started: float, retried: bool):
        totals = evaluated.log_weights.sum(axis=1)
        best = float(totals.max())
        record = {
            "mpc_step": self.mpc_step,
            "iteration": iteration,
            "repeats": repeats,
            "ess": dict(zip(self.problem.aircraft_ids, evaluated.ess().round(3).tolist())),
            "best_log_weight": best if np.isfinite(best) else None,
            "wall_time_s": round(time.perf_counter() - started, 6),
            "retried": retried,
        }
        self.diagnostics.append(record)
        self._log(f"MPC step {self.mpc_step} iteration {iteration}: repeats={repeats} "
                  f"best_log_weight={record['best_log_weight']}", "DEBUG")


def run_smc(problem: HorizonProblem, config: SmcConfig, seed: int, mpc_step: int = 0,
            pool: Optional[WorkerPool] = None, log_events: bool = False) -> SmcResult:
    return SmcOptimizer(problem, config, seed, mpc_step, pool, log_events).run()
