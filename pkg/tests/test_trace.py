import numpy as np
import pytest

from conftest import random_trace
from frametime.trace import (AffineMap, ColumnCountError, CounterModel,
                             FieldValueError, FrequencyTable, HashNoiseMap,
                             PiecewiseLinearMap, Trace, TraceSample,
                             UnknownFrequencyError, WorkloadSpec,
                             generate_characterization, generate_runtime,
                             oracle_counters, oracle_frame_time,
                             oracle_frame_time_derivative, parse_trace,
                             serialize_trace)


class TestFrequencyTable:
    def test_invariants(self):
        with pytest.raises(ValueError):
            FrequencyTable((200.0,))
        with pytest.raises(ValueError):
            FrequencyTable((200.0, 200.0))
        with pytest.raises(ValueError):
            FrequencyTable((-1.0, 200.0))

    def test_neighbors_and_step(self, small_table):
        assert small_table.neighbors(400.0) == (200.0, 600.0)
        assert small_table.neighbors(200.0) == (None, 400.0)
        assert small_table.neighbors(600.0) == (400.0, None)
        assert small_table.step(200.0, 2) == 600.0
        with pytest.raises(IndexError):
            small_table.step(600.0, 1)


class TestParse:
    def test_direct_field_mapping(self, small_table):
        text = ("time,frame_time_ms,frame_count,gpu_freq_mhz,c1,c2\n"
                "0.05, 8.2, 3, 400, 120, 55\n")
        trace = parse_trace(text, counter_count=2, freq_table=small_table)
        s = trace.samples[0]
        assert (s.timestamp, s.frame_time, s.frame_count, s.gpu_freq) == (0.05, 8.2, 3, 400.0)
        assert s.counters == (120.0, 55.0)

    def test_column_count_error_names_row(self, small_table):
        text = ("time,frame_time_ms,frame_count,gpu_freq_mhz,c1,c2\n"
                "0.05, 8.2, 3, 400, 120, 55\n"
                "0.10, 9.0, 3, 400, 120\n")
        with pytest.raises(ColumnCountError) as err:
            parse_trace(text, counter_count=2, freq_table=small_table)
        assert err.value.row == 2

    def test_non_numeric_field(self, small_table):
        text = ("time,frame_time_ms,frame_count,gpu_freq_mhz,c1\n"
                "0.05, oops, 3, 400, 120\n")
        with pytest.raises(FieldValueError) as err:
            parse_trace(text, freq_table=small_table)
        assert err.value.row == 1

    def test_unknown_frequency(self, small_table):
        text = ("time,frame_time_ms,frame_count,gpu_freq_mhz,c1\n"
                "0.05, 8.2, 3, 350, 120\n")
        with pytest.raises(UnknownFrequencyError):
            parse_trace(text, freq_table=small_table)

    def test_counter_count_mismatch_in_header(self, small_table):
        text = "time,frame_time_ms,frame_count,gpu_freq_mhz,c1\n"
        with pytest.raises(ValueError):
            parse_trace(text, counter_count=2, freq_table=small_table)

    def test_round_trip_random_traces(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            trace = random_trace(rng, n_samples=int(rng.integers(1, 8)))
            text = serialize_trace(trace)
            parsed = parse_trace(text)
            assert parsed == trace
            again = serialize_trace(parsed)
            assert "".join(again.split()) == "".join(text.split())

    def test_embedded_table_used(self):
        rng = np.random.default_rng(3)
        trace = random_trace(rng)
        parsed = parse_trace(serialize_trace(trace))
        assert parsed.freq_table == trace.freq_table


class TestOracleFrameTime:
    def test_direct_substitution(self, simple_workload):
        # scalable 10 at ref 200, unscalable 5 via custom maps
        spec = WorkloadSpec((1.0,), AffineMap(0.0, 10.0), AffineMap(0.0, 5.0), 200.0)
        assert oracle_frame_time(spec, 1.0, 400.0) == pytest.approx(10.0)

    def test_identity_frequency(self, simple_workload):
        c = 10.0
        expected = simple_workload.scalable_ms(c) + simple_workload.unscalable_ms(c)
        assert oracle_frame_time(simple_workload, c, 200.0) == pytest.approx(expected)

    def test_domain_error(self, simple_workload):
        with pytest.raises(ValueError):
            oracle_frame_time(simple_workload, 10.0, 0.0)

    def test_derivative_matches_finite_difference(self, simple_workload):
        for c in (1.0, 10.0, 40.0):
            for f in (250.0, 400.0, 500.0):
                eps = 1e-3
                fd = (oracle_frame_time(simple_workload, c, f + eps)
                      - oracle_frame_time(simple_workload, c, f - eps)) / (2 * eps)
                an = oracle_frame_time_derivative(simple_workload, c, f)
                assert an == pytest.approx(fd, rel=1e-6)

    def test_strictly_decreasing_when_scalable(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            spec = WorkloadSpec((1.0,), AffineMap(0.0, float(rng.uniform(0.5, 20))),
                                AffineMap(0.0, float(rng.uniform(0, 5))), 200.0)
            freqs = np.sort(rng.uniform(100, 600, 5))
            times = [oracle_frame_time(spec, 1.0, f) for f in freqs]
            assert all(b < a for a, b in zip(times, times[1:]))

    def test_constant_when_unscalable_only(self):
        spec = WorkloadSpec((1.0,), AffineMap(0.0, 0.0), AffineMap(0.0, 7.0), 200.0)
        times = {oracle_frame_time(spec, 1.0, f) for f in (200.0, 311.0, 511.0)}
        assert times == {7.0}

    def test_noise_requires_rng_and_reproduces(self, simple_workload):
        from dataclasses import replace
        spec = replace(simple_workload, noise_sigma=0.1)
        with pytest.raises(ValueError):
            oracle_frame_time(spec, 10.0, 400.0, noisy=True)
        a = oracle_frame_time(spec, 10.0, 400.0, noisy=True, rng=np.random.default_rng(1))
        b = oracle_frame_time(spec, 10.0, 400.0, noisy=True, rng=np.random.default_rng(1))
        assert a == b


class TestOracleCounters:
    def test_indep_constant_in_frequency(self, char_workload):
        low = oracle_counters(char_workload, 10.0, 200.0)
        high = oracle_counters(char_workload, 10.0, 511.0)
        n_dep = len(char_workload.dep_counters)
        assert low[n_dep:] == high[n_dep:]

    def test_dep_monotone_in_frequency(self, char_workload, sweep_table):
        for c in (1.0, 32.0, 64.0):
            for j in range(len(char_workload.dep_counters)):
                vals = [oracle_counters(char_workload, c, f)[j] for f in sweep_table]
                assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_order_matches_counter_names(self, char_workload):
        names = char_workload.counter_names
        assert names[:2] == ("render_busy_kcycles", "dispatch_busy_kcycles")
        vals = oracle_counters(char_workload, 8.0, 400.0)
        assert len(vals) == len(names)

    def test_indep_zero_pearson_with_frequency(self, char_workload, sweep_table):
        spec = char_workload
        rows, freqs = [], []
        for f in sweep_table:
            for c in range(1, 33):
                rows.append(oracle_counters(spec, float(c), f))
                freqs.append(f)
        rows = np.array(rows)
        freqs = np.array(freqs, dtype=float)
        fc = freqs - freqs.mean()
        n_dep = len(spec.dep_counters)
        for j in range(n_dep, rows.shape[1]):
            x = rows[:, j] - rows[:, j].mean()
            r = float(fc @ x) / np.sqrt(float(fc @ fc) * float(x @ x))
            assert abs(r) < 1e-9


class TestGenerate:
    def test_factorial_counts(self, char_workload, sweep_table):
        trace = generate_characterization(char_workload, sweep_table,
                                          range(1, 65), 80, seed=0)
        assert len(trace) == 9 * 64 * 80 == 46080

    def test_sweep_order(self, simple_workload):
        table = FrequencyTable((200.0, 400.0))
        trace = generate_characterization(simple_workload, table,
                                          [3.0, 1.0, 2.0], 1, seed=0)
        assert len(trace) == 6
        assert [s.gpu_freq for s in trace.samples] == [200.0] * 3 + [400.0] * 3
        # complexities ascend within each frequency block
        units = [s.counters[1] for s in trace.samples[:3]]
        assert units == sorted(units)

    def test_deterministic_per_seed(self, char_workload, sweep_table):
        a = generate_characterization(char_workload, sweep_table, range(1, 5), 2, seed=9)
        b = generate_characterization(char_workload, sweep_table, range(1, 5), 2, seed=9)
        assert a == b
        c = generate_characterization(char_workload, sweep_table, range(1, 5), 2, seed=10)
        assert c != a

    def test_empty_complexities_rejected(self, simple_workload, small_table):
        with pytest.raises(ValueError):
            generate_characterization(simple_workload, small_table, [], 1, seed=0)
        with pytest.raises(ValueError):
            generate_characterization(simple_workload, small_table, [1.0], 0, seed=0)

    def test_runtime_constant_and_sequence(self, simple_workload, small_table):
        trace = generate_runtime(simple_workload, small_table, 400.0, seed=1)
        assert len(trace) == len(simple_workload.complexity_schedule)
        assert {s.gpu_freq for s in trace.samples} == {400.0}
        freqs = [200.0, 400.0] * 10
        trace2 = generate_runtime(simple_workload, small_table, freqs, seed=1)
        assert [s.gpu_freq for s in trace2.samples] == freqs
        with pytest.raises(ValueError):
            generate_runtime(simple_workload, small_table, [400.0] * 3, seed=1)


class TestMaps:
    def test_piecewise_interior_and_extension(self):
        m = PiecewiseLinearMap(((1.0, 10.0), (3.0, 30.0), (5.0, 20.0)))
        assert m(2.0) == pytest.approx(20.0)
        assert m(4.0) == pytest.approx(25.0)
        assert m(0.0) == pytest.approx(0.0)    # extended first segment
        assert m(6.0) == pytest.approx(15.0)   # extended last segment

    def test_hash_noise_deterministic_and_bounded(self):
        m = HashNoiseMap(100.0, salt=4.0)
        vals = [m(c) for c in range(1, 200)]
        assert vals == [m(c) for c in range(1, 200)]
        assert all(0 <= v < 100.0 for v in vals)
        assert len(set(np.round(vals, 6))) > 150

    def test_workload_validate(self):
        spec = WorkloadSpec((1.0,), AffineMap(-1.0, 0.5), AffineMap(0.0, 1.0), 200.0)
        with pytest.raises(ValueError):
            spec.validate([10.0])


class TestValidation:
    def test_trace_rejects_foreign_frequency(self, small_table):
        s = TraceSample(0.0, 1.0, 1, 300.0, (1.0,))
        with pytest.raises(ValueError):
            Trace((s,), ("c1",), small_table)

    def test_sample_invariants(self):
        with pytest.raises(ValueError):
            TraceSample(0.0, -1.0, 1, 200.0, ())
        with pytest.raises(ValueError):
            TraceSample(0.0, 1.0, -1, 200.0, ())
        with pytest.raises(ValueError):
            TraceSample(0.0, 1.0, 1, 200.0, (-2.0,))

    def test_counter_arity_must_be_constant(self, small_table):
        a = TraceSample(0.0, 1.0, 1, 200.0, (1.0, 2.0))
        b = TraceSample(0.1, 1.0, 1, 200.0, (1.0,))
        with pytest.raises(ValueError):
            Trace((a, b), ("c1", "c2"), small_table)
