import math

import numpy as np
import pytest

from entities.aircraft import AircraftState
from errors import ConfigError
from fuel.fuel_analysis import estimate_all, ingest
from fuel.trace_generator import (generate_holding_traces, generate_traces, simulated_fuel,
                                  write_traces_csv)
from simulator.scenario_runner import AircraftOutcome, RunRecord


@pytest.fixture
def record():
    record = RunRecord(scenario_name="unit", seed=0, dt_s=10.0)
    long = AircraftOutcome(aircraft_id="A01", kind="arrival", type="A320", entry_step=0,
                           initial_mass_kg=61000.0, empty_mass_kg=42600.0)
    long.steps = list(range(13))
    long.states = [AircraftState(25000.0 - 1200.0 * k, 0.0, 3000.0 - 50.0 * k, 120.0, math.pi, 61000.0 - 8.0 * k)
                   for k in range(13)]
    short = AircraftOutcome(aircraft_id="D01", kind="departure", type="A320", entry_step=8,
                            initial_mass_kg=77000.0, empty_mass_kg=42600.0)
    short.steps = list(range(8, 13))
    short.states = [AircraftState(-1500.0 - 800.0 * k, 0.0, 400.0 + 80.0 * k, 90.0, math.pi, 77000.0 - 12.0 * k)
                    for k in range(5)]
    record.aircraft = {"A01": long, "D01": short}
    return record


class TestFromRun:
    def test_resampled_every_sixth_step(self, record):
        traces = generate_traces(record, resample_s=60.0)
        trace = next(t for t in traces if t.aircraft_id == "A01")
        np.testing.assert_array_equal(trace.samples[:, 0], [0.0, 60.0, 120.0])
        assert trace.samples[1, 1] == pytest.approx(25000.0 - 7200.0)
        assert trace.initial_mass_kg == 61000.0

    def test_final_state_closes_the_trace(self, record):
        short = next(t for t in generate_traces(record, 60.0) if t.aircraft_id == "D01")
        np.testing.assert_array_equal(short.samples[:, 0], [80.0, 120.0])
        assert short.samples[-1, 1] == pytest.approx(-1500.0 - 3200.0)

    def test_uneven_stride_keeps_landing_step(self, record):
        outcome = record.aircraft["A01"]
        outcome.steps, outcome.states = outcome.steps[:8], outcome.states[:8]
        trace = next(t for t in generate_traces(record, 30.0) if t.aircraft_id == "A01")
        np.testing.assert_array_equal(trace.samples[:, 0], [0.0, 30.0, 60.0, 70.0])
        assert trace.initial_mass_kg - outcome.states[-1].mass_kg == pytest.approx(56.0)

    def test_single_state_aircraft_skipped(self, record):
        outcome = record.aircraft["D01"]
        outcome.steps, outcome.states = outcome.steps[:1], outcome.states[:1]
        assert [t.aircraft_id for t in generate_traces(record, 60.0)] == ["A01"]

    def test_denser_resample(self, record):
        traces = generate_traces(record, resample_s=10.0)
        assert [t.samples.shape[0] for t in traces] == [13, 5]
        assert traces[1].samples[0, 0] == 80.0

    def test_resample_must_be_step_multiple(self, record):
        with pytest.raises(ConfigError):
            generate_traces(record, resample_s=15.0)

    def test_simulated_fuel(self, record):
        assert simulated_fuel(record) == pytest.approx({"A01": 96.0, "D01": 48.0})


class TestHolding:
    def test_deterministic(self, a320):
        a = generate_holding_traces(a320, 2, 4.0, seed=3)
        b = generate_holding_traces(a320, 2, 4.0, seed=3)
        for ta, tb in zip(a, b):
            np.testing.assert_array_equal(ta.samples, tb.samples)
        assert [t.aircraft_id for t in a] == ["H01", "H02"]

    def test_seed_changes_entries(self, a320):
        a = generate_holding_traces(a320, 1, 0.0, seed=1)[0]
        b = generate_holding_traces(a320, 1, 0.0, seed=2)[0]
        assert not np.array_equal(a.samples[0], b.samples[0])

    def test_starts_on_boundary_inbound(self, a320):
        trace = generate_holding_traces(a320, 1, 0.0, seed=5)[0]
        t, x, y, z, v, chi = trace.samples[0]
        assert math.hypot(x, y) == pytest.approx(30000.0)
        assert trace.kind == "arrival"
        gaps = np.diff(trace.samples[:, 0])
        assert np.all(gaps[:-1] == 60.0)
        assert 0.0 < gaps[-1] <= 60.0

    def test_reaches_the_runway(self, a320):
        trace = generate_holding_traces(a320, 1, 2.0, seed=6)[0]
        final = trace.samples[-1]
        assert math.hypot(final[1], final[2]) < 15000.0
        assert final[3] < 3000.0

    def test_holding_costs_time_and_fuel(self, a320):
        direct = generate_holding_traces(a320, 1, 0.0, seed=8)[0]
        holding = generate_holding_traces(a320, 1, 8.0, seed=8)[0]
        assert holding.samples[-1, 0] > direct.samples[-1, 0] + 4 * 60
        first, second = estimate_all([holding], {"A320": a320})
        assert first["H01"].total_kg > 0
        assert second["H01"].total_kg > 0

    def test_csv_feeds_ingest(self, a320, tmp_path):
        traces = generate_holding_traces(a320, 3, 2.0, seed=4)
        path = write_traces_csv(traces, tmp_path / "holding.csv")
        result = ingest(path, {"A320": a320}, log_events=False)
        assert [t.aircraft_id for t in result.traces] == ["H01", "H02", "H03"]
        kept = result.traces[0].samples[:, 5]
        original = traces[0].samples[:kept.size, 5]
        np.testing.assert_allclose(np.cos(kept), np.cos(original), atol=1e-9)
        np.testing.assert_allclose(np.sin(kept), np.sin(original), atol=1e-9)


@pytest.mark.slow
def test_holding_fuel_exceeds_direct_fuel_across_seeds(a320):
    for seed in range(10):
        direct = generate_holding_traces(a320, 1, 0.0, seed=seed)[0]
        holding = generate_holding_traces(a320, 1, 8.0, seed=seed)[0]
        first, second = estimate_all([direct], {"A320": a320})
        direct_mean = 0.5 * (first["H01"].total_kg + second["H01"].total_kg)
        first, second = estimate_all([holding], {"A320": a320})
        holding_mean = 0.5 * (first["H01"].total_kg + second["H01"].total_kg)
        assert holding_mean > direct_mean
