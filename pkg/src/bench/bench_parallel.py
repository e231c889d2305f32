"""
Chunk-size and worker-count throughput benchmark.

Runs the standard 10-arrival scenario (every aircraft enters at MPC step 5)
once per (workers, chunk_size) configuration. Steps before the common entry
step are warm-up and are discarded; the following settled steps are timed.
Every configuration must apply exactly the same controls, so the benchmark
also checks that results do not depend on the parallel layout.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import pandas as pd

from entities.scenario import Scenario
from errors import ConfigError
from log_utils import log
from simulator.scenario_runner import RunRecord, run

MIN_SETTLED_STEPS = 3
BENCH_COLUMNS = ["chunk_size", "chunks", "workers", "mean_step_s", "std_step_s", "particles_per_s",
                 "controls_match"]


@dataclass
class BenchResult:
    chunk_size: int
    workers: int
    particles: int
    mean_step_s: float
    std_step_s: float
    particles_per_s: float
    controls_match: bool = True

    def to_dict(self) -> dict:
        return {
            "chunk_size": self.chunk_size,
            "chunks": self.particles // self.chunk_size,
            "workers": self.workers,
            "mean_step_s": round(self.mean_step_s, 4),
            "std_step_s": round(self.std_step_s, 4),
            "particles_per_s": round(self.particles_per_s, 1),
            "controls_match": self.controls_match,
        }


def _applied_controls(record: RunRecord) -> dict:
    return {a.aircraft_id: np.array([u.as_array() for u in a.controls]) for a in record.aircraft.values()}


def _same_controls(a: dict, b: dict) -> bool:
    return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)


def run_bench(scenario: Scenario, chunk_sizes: list, worker_counts: list, seed: int = 0,
              settled_steps: int = MIN_SETTLED_STEPS, log_events: bool = True) -> list[BenchResult]:
    """Time settled MPC steps for every (workers, chunk_size) pair."""
    particles = scenario.smc.particles
    bad = [c for c in chunk_sizes if c < 1 or particles % c]
    if bad:
        raise ConfigError(f"Chunk sizes {bad} do not divide the particle count {particles}", source="chunks")
    if settled_steps < MIN_SETTLED_STEPS:
        raise ConfigError(f"Need at least {MIN_SETTLED_STEPS} settled steps", source="settled_steps")
    warmup = max((a.entry_step for a in scenario.aircraft), default=0)
    timed = replace(scenario, tma=replace(scenario.tma, step_limit=warmup + settled_steps))

    results, reference = [], None
    for workers in worker_counts:
        for chunk_size in chunk_sizes:
            configured = timed.with_smc(chunk_size=chunk_size, workers=workers)
            record = run(configured, seed, workers=workers, log_events=False)
            if record.aborted is not None:
                log(f"Benchmark run aborted: {record.aborted['message']}", "WARNING")
            times = np.array(record.step_wall_times[warmup:])
            if times.size < MIN_SETTLED_STEPS:
                raise ConfigError(f"Only {times.size} settled steps were timed", source=scenario.name)
            controls = _applied_controls(record)
            if reference is None:
                reference = controls
            mean = float(times.mean())
            result = BenchResult(chunk_size=chunk_size, workers=workers, particles=particles, mean_step_s=mean,
                                 std_step_s=float(times.std(ddof=1)),
                                 particles_per_s=particles * configured.smc.iterations / mean,
                                 controls_match=_same_controls(reference, controls))
            results.append(result)
            if log_events:
                level = "INFO" if result.controls_match else "ERROR"
                log(f"workers={workers} chunk={chunk_size}: {mean:.3f} s/step "
                    f"({result.particles_per_s:.0f} particles/s)", level)
    return results


def best_result(results: list) -> Optional[BenchResult]:
    return min(results, key=lambda r: r.mean_step_s, default=None)


def results_frame(results: list) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in results], columns=BENCH_COLUMNS)
