import numpy as np
import pytest

from frametime import workloads
from frametime.trace import (AffineMap, CounterModel, FrequencyTable,
                             WorkloadSpec, generate_characterization)


@pytest.fixture(scope="session")
def sweep_table():
    return workloads.SWEEP_TABLE


@pytest.fixture(scope="session")
def char_workload():
    return workloads.characterization_workload()


@pytest.fixture(scope="session")
def small_sweep(char_workload, sweep_table):
    """Small noiseless sweep shared by parse/feature tests."""
    spec = workloads.noiseless(char_workload)
    return generate_characterization(spec, sweep_table, range(1, 9), 2, seed=11)


@pytest.fixture
def simple_workload():
    """Two-counter affine workload for targeted analytic checks."""
    return WorkloadSpec(
        complexity_schedule=(10.0,) * 20,
        scalable_ms=AffineMap(0.2, 1.0),
        unscalable_ms=AffineMap(0.05, 0.5),
        ref_freq=200.0,
        dep_counters=(CounterModel("busy", "dep", AffineMap(10.0, 100.0)),),
        indep_counters=(CounterModel("units", "indep", AffineMap(5.0, 20.0)),),
        noise_sigma=0.0,
    )


@pytest.fixture
def small_table():
    return FrequencyTable((200.0, 400.0, 600.0))


def random_trace(rng, n_samples=6, n_counters=3):
    """Random valid trace for round-trip style properties."""
    from frametime.trace import Trace, TraceSample
    freqs = (200.0, 311.0, 400.0)
    table = FrequencyTable(freqs)
    samples = []
    for k in range(n_samples):
        samples.append(TraceSample(
            timestamp=float(rng.uniform(0, 100)),
            frame_time=float(rng.uniform(0, 30)),
            frame_count=int(rng.integers(0, 4)),
            gpu_freq=float(rng.choice(freqs)),
            counters=tuple(float(v) for v in rng.uniform(0, 1e5, n_counters)),
        ))
    names = tuple(f"c{i}" for i in range(n_counters))
    return Trace(tuple(samples), names, table)
