"""Trace data model and synthetic workload generation.

A trace is a sequence of fixed-period observations of a GPU: the frame
processing time, the number of frames finished in the interval, the
operating frequency, and a set of hardware performance counters.  Traces
come from two places: parsed log files (comma separated, one header line)
and an analytic workload generator that stands in for real hardware.

The generator models frame time as a frequency-scalable portion plus an
unscalable portion:

    t(C, f) = scalable_ms(C) * ref_freq / f + unscalable_ms(C)

where C is the frame complexity.  Counters are either frequency dependent
(they track busy cycles and grow with f) or frequency independent (they
depend on the workload only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_PERIOD_MS = 50.0

# Published subset of the reference platform's frequency ladder (MHz).
# The full ladder has nine entries; only these seven are public, so the
# table is always a configuration input and this is just a usable default.
DEFAULT_FREQS_MHZ = (200.0, 311.0, 355.0, 400.0, 444.0, 489.0, 511.0)


class TraceParseError(ValueError):
    """Base class for trace file errors.  Carries the 1-based data row."""

    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(f"row {row}: {message}")


class ColumnCountError(TraceParseError):
    pass


class FieldValueError(TraceParseError):
    pass


class UnknownFrequencyError(TraceParseError):
    pass


@dataclass(frozen=True)
class FrequencyTable:
    """Ordered list of supported GPU frequencies in MHz."""

    freqs_mhz: tuple[float, ...]

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.freqs_mhz)
        object.__setattr__(self, "freqs_mhz", freqs)
        if len(freqs) < 2:
            raise ValueError("frequency table needs at least two entries")
        if any(f <= 0 for f in freqs):
            raise ValueError("frequencies must be positive")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("frequencies must be strictly increasing")

    def __len__(self):
        return len(self.freqs_mhz)

    def __contains__(self, f) -> bool:
        return float(f) in self.freqs_mhz

    def __iter__(self):
        return iter(self.freqs_mhz)

    @property
    def min(self) -> float:
        return self.freqs_mhz[0]

    @property
    def max(self) -> float:
        return self.freqs_mhz[-1]

    def index(self, f: float) -> int:
        return self.freqs_mhz.index(float(f))

    def step(self, f: float, levels: int) -> float:
        """Frequency `levels` table entries away from f; raises out of bounds."""
        i = self.index(f) + levels
        if not 0 <= i < len(self.freqs_mhz):
            raise IndexError(f"no frequency {levels:+d} levels from {f} MHz")
        return self.freqs_mhz[i]

    def neighbors(self, f: float) -> tuple[float | None, float | None]:
        """(one level lower, one level higher), None at the table edges."""
        i = self.index(f)
        lower = self.freqs_mhz[i - 1] if i > 0 else None
        upper = self.freqs_mhz[i + 1] if i + 1 < len(self.freqs_mhz) else None
        return lower, upper


DEFAULT_FREQ_TABLE = FrequencyTable(DEFAULT_FREQS_MHZ)


@dataclass(frozen=True)
class TraceSample:
    """One observation interval."""

    timestamp: float        # seconds
    frame_time: float       # milliseconds
    frame_count: int
    gpu_freq: float         # MHz
    counters: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "timestamp", float(self.timestamp))
        object.__setattr__(self, "frame_time", float(self.frame_time))
        object.__setattr__(self, "frame_count", int(self.frame_count))
        object.__setattr__(self, "gpu_freq", float(self.gpu_freq))
        object.__setattr__(self, "counters", tuple(float(c) for c in self.counters))
        values = (self.timestamp, self.frame_time, self.gpu_freq) + self.counters
        if not all(math.isfinite(v) for v in values):
            raise ValueError("sample fields must be finite")
        if self.frame_time < 0:
            raise ValueError("frame_time must be >= 0")
        if self.frame_count < 0:
            raise ValueError("frame_count must be >= 0")
        if any(c < 0 for c in self.counters):
            raise ValueError("counters must be >= 0")


@dataclass(frozen=True)
class Trace:
    """An ordered, validated sequence of samples with a fixed period."""

    samples: tuple[TraceSample, ...]
    counter_names: tuple[str, ...]
    freq_table: FrequencyTable
    period: float = DEFAULT_PERIOD_MS  # milliseconds

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "counter_names", tuple(self.counter_names))
        if self.period <= 0:
            raise ValueError("period must be > 0")
        if any("," in name or "\n" in name for name in self.counter_names):
            raise ValueError("counter names must not contain commas or newlines")
        n = len(self.counter_names)
        for i, s in enumerate(self.samples):
            if len(s.counters) != n:
                raise ValueError(f"sample {i}: expected {n} counters, got {len(s.counters)}")
            if s.gpu_freq not in self.freq_table:
                raise ValueError(f"sample {i}: frequency {s.gpu_freq} MHz not in table")

    def __len__(self):
        return len(self.samples)

    def frame_times(self) -> np.ndarray:
        return np.array([s.frame_time for s in self.samples])

    def freqs(self) -> np.ndarray:
        return np.array([s.gpu_freq for s in self.samples])

    def counter_matrix(self) -> np.ndarray:
        """Samples-by-counters array of raw counter values."""
        if not self.samples:
            return np.zeros((0, len(self.counter_names)))
        return np.array([s.counters for s in self.samples])


# ---------------------------------------------------------------------------
# Complexity response maps

@dataclass(frozen=True)
class AffineMap:
    """value = slope * c + intercept"""

    slope: float
    intercept: float

    def __call__(self, c: float) -> float:
        return self.slope * c + self.intercept


@dataclass(frozen=True)
class PiecewiseLinearMap:
    """Linear interpolation through (c, value) points, end slopes extended."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(c), float(v)) for c, v in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 2:
            raise ValueError("piecewise map needs at least two points")
        if any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
            raise ValueError("piecewise breakpoints must be strictly increasing")

    def __call__(self, c: float) -> float:
        pts = self.points
        if c <= pts[0][0]:
            lo, hi = pts[0], pts[1]
        elif c >= pts[-1][0]:
            lo, hi = pts[-2], pts[-1]
        else:
            k = next(i for i in range(len(pts) - 1) if pts[i][0] <= c <= pts[i + 1][0])
            lo, hi = pts[k], pts[k + 1]
        frac = (c - lo[0]) / (hi[0] - lo[0])
        return lo[1] + frac * (hi[1] - lo[1])


@dataclass(frozen=True)
class HashNoiseMap:
    """Deterministic pseudo-random response, uncorrelated with complexity.

    Produces amplitude * u(c) with u in [0, 1).  Used to model counters
    that carry no workload information while staying a pure function of c,
    so repeated configurations reproduce the same value.
    """

    amplitude: float
    salt: float = 0.0

    def __call__(self, c: float) -> float:
        x = math.sin((c + 1.0) * 127.1 + self.salt * 311.7) * 43758.5453
        return self.amplitude * (x - math.floor(x))


@dataclass(frozen=True)
class CounterModel:
    """Analytic response of one hardware counter.

    kind "dep": value = response(c) * f / ref_freq, strictly increasing in f
    for response(c) > 0 (busy-cycle style counters).
    kind "indep": value = response(c), constant in f.
    """

    name: str
    kind: str  # "dep" | "indep"
    response: AffineMap | PiecewiseLinearMap | HashNoiseMap

    def __post_init__(self):
        if self.kind not in ("dep", "indep"):
            raise ValueError(f"unknown counter kind {self.kind!r}")

    def value(self, c: float, f: float, ref_freq: float) -> float:
        base = self.response(c)
        if self.kind == "dep":
            return base * (f / ref_freq)
        return base


@dataclass(frozen=True)
class WorkloadSpec:
    """Parameters of the analytic workload generator."""

    complexity_schedule: tuple[float, ...]
    scalable_ms: AffineMap | PiecewiseLinearMap
    unscalable_ms: AffineMap | PiecewiseLinearMap
    ref_freq: float                      # MHz the scalable map refers to
    dep_counters: tuple[CounterModel, ...] = ()
    indep_counters: tuple[CounterModel, ...] = ()
    noise_sigma: float = 0.03            # frame time noise, fraction

    def __post_init__(self):
        object.__setattr__(self, "complexity_schedule",
                           tuple(float(c) for c in self.complexity_schedule))
        if self.ref_freq <= 0:
            raise ValueError("ref_freq must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if any(cm.kind != "dep" for cm in self.dep_counters):
            raise ValueError("dep_counters must have kind 'dep'")
        if any(cm.kind != "indep" for cm in self.indep_counters):
            raise ValueError("indep_counters must have kind 'indep'")

    @property
    def counter_names(self) -> tuple[str, ...]:
        return tuple(cm.name for cm in self.dep_counters + self.indep_counters)

    def validate(self, complexities) -> None:
        """Check map values over the given complexities.

        Scalable/unscalable times must be nonnegative, dependent counter
        bases positive (so they stay strictly monotone in f), and all
        counter values nonnegative.
        """
        for c in complexities:
            if self.scalable_ms(c) < 0 or self.unscalable_ms(c) < 0:
                raise ValueError(f"negative frame-time component at C={c}")
            for cm in self.dep_counters:
                if cm.response(c) <= 0:
                    raise ValueError(f"dep counter {cm.name} base must be > 0 at C={c}")
            for cm in self.indep_counters:
                if cm.response(c) < 0:
                    raise ValueError(f"counter {cm.name} negative at C={c}")


def oracle_frame_time(spec: WorkloadSpec, c: float, f: float, noisy: bool = False,
                      rng: np.random.Generator | None = None) -> float:
    """Analytic frame time in ms at complexity c and frequency f (MHz).

    Noiseless form is scalable_ms(c) * ref_freq / f + unscalable_ms(c).
    With noisy=True the value is multiplied by (1 + e), e ~ N(0, sigma^2),
    and clamped at zero; an rng must be supplied.
    """
    if f <= 0:
        raise ValueError("frequency must be > 0")
    s = spec.scalable_ms(c)
    u = spec.unscalable_ms(c)
    if s < 0 or u < 0:
        raise ValueError(f"negative frame-time component at C={c}")
    t = s * spec.ref_freq / f + u
    if noisy and spec.noise_sigma > 0:
        if rng is None:
            raise ValueError("noisy evaluation requires an rng")
        t *= 1.0 + rng.normal(0.0, spec.noise_sigma)
    return max(t, 0.0)


def oracle_frame_time_derivative(spec: WorkloadSpec, c: float, f: float) -> float:
    """Analytic d(frame time)/d(frequency) in ms per MHz: -scalable*ref/f^2."""
    if f <= 0:
        raise ValueError("frequency must be > 0")
    return -spec.scalable_ms(c) * spec.ref_freq / (f * f)


def oracle_counters(spec: WorkloadSpec, c: float, f: float) -> tuple[float, ...]:
    """Counter values at (c, f), frequency-dependent counters first."""
    if f <= 0:
        raise ValueError("frequency must be > 0")
    dep = [cm.value(c, f, spec.ref_freq) for cm in spec.dep_counters]
    indep = [cm.value(c, f, spec.ref_freq) for cm in spec.indep_counters]
    return tuple(dep + indep)


def _frame_count(frame_time: float, period: float, fps_cap: int = 3) -> int:
    if frame_time <= 0:
        return fps_cap
    return min(fps_cap, int(period // frame_time))


def _emit_samples(spec, points, seed, period):
    rng = np.random.default_rng(seed)
    noisy = spec.noise_sigma > 0
    samples = []
    for k, (c, f) in enumerate(points):
        t = oracle_frame_time(spec, c, f, noisy=noisy, rng=rng)
        samples.append(TraceSample(
            timestamp=(k + 1) * period / 1000.0,
            frame_time=t,
            frame_count=_frame_count(t, period),
            gpu_freq=f,
            counters=oracle_counters(spec, c, f),
        ))
    return samples


def generate_characterization(spec: WorkloadSpec, table: FrequencyTable,
                              complexities, repeats: int, seed: int,
                              period: float = DEFAULT_PERIOD_MS) -> Trace:
    """Full factorial frequency x complexity x repeats sweep.

    Sweep order is one frequency at a time, complexities ascending within
    it, each configuration repeated `repeats` times back to back.  Sample
    count is len(table) * len(complexities) * repeats and the result is
    reproducible for a given seed.
    """
    complexities = sorted(float(c) for c in complexities)
    if not complexities:
        raise ValueError("complexity list must not be empty")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    spec.validate(complexities)
    points = [(c, f) for f in table for c in complexities for _ in range(repeats)]
    samples = _emit_samples(spec, points, seed, period)
    return Trace(samples, spec.counter_names, table, period)


def generate_runtime(spec: WorkloadSpec, table: FrequencyTable, freqs, seed: int,
                     period: float = DEFAULT_PERIOD_MS) -> Trace:
    """Trace following the spec's own complexity schedule.

    freqs is either a single frequency held for the whole run or a
    per-interval sequence of the same length as the schedule.
    """
    schedule = spec.complexity_schedule
    if not schedule:
        raise ValueError("workload has an empty complexity schedule")
    if np.isscalar(freqs):
        freq_seq = [float(freqs)] * len(schedule)
    else:
        freq_seq = [float(f) for f in freqs]
        if len(freq_seq) != len(schedule):
            raise ValueError("frequency sequence length must match the schedule")
    for f in freq_seq:
        if f not in table:
            raise ValueError(f"frequency {f} MHz not in table")
    spec.validate(sorted(set(schedule)))
    samples = _emit_samples(spec, list(zip(schedule, freq_seq)), seed, period)
    return Trace(samples, spec.counter_names, table, period)


# ---------------------------------------------------------------------------
# Trace file format

_FIXED_COLUMNS = ("time", "frame_time_ms", "frame_count", "gpu_freq_mhz")
_TABLE_COMMENT = "# freq_table_mhz ="


def serialize_trace(trace: Trace) -> str:
    """Render a trace in the comma-separated log format.

    The first line is a comment recording the frequency table so the file
    is self-describing; then the header row, then one row per interval.
    """
    lines = [f"{_TABLE_COMMENT} " + ",".join(repr(f) for f in trace.freq_table)]
    lines.append(",".join(_FIXED_COLUMNS + trace.counter_names))
    for s in trace.samples:
        fields = [repr(s.timestamp), repr(s.frame_time), str(s.frame_count),
                  repr(s.gpu_freq)]
        fields.extend(repr(c) for c in s.counters)
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def _parse_float(raw: str, row: int, column: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise FieldValueError(row, f"non-numeric {column} field {raw.strip()!r}") from None


def parse_trace(text, counter_count: int | None = None,
                freq_table: FrequencyTable | None = None,
                period: float = DEFAULT_PERIOD_MS) -> Trace:
    """Parse the trace log format, validating every row.

    text is a string or an iterable of lines.  Column order is fixed:
    time, frame time, frame count, GPU frequency, then the counters named
    by the header.  Malformed rows abort the parse with an error naming
    the row; rows are never silently skipped.

    The frequency table is taken from the freq_table argument when given,
    else from the file's own table comment, else DEFAULT_FREQ_TABLE.
    """
    if isinstance(text, str):
        lines = text.splitlines()
    else:
        lines = [line.rstrip("\n") for line in text]

    header = None
    embedded_table = None
    rows = []
    for line in lines:
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            if stripped.replace(" ", "").startswith("#freq_table_mhz="):
                payload = stripped.split("=", 1)[1]
                embedded_table = FrequencyTable(
                    tuple(float(v) for v in payload.split(",") if v.strip()))
            continue
        if header is None:
            header = [c.strip() for c in stripped.split(",")]
        else:
            rows.append(stripped)

    if header is None:
        raise TraceParseError(0, "missing header line")
    if len(header) < len(_FIXED_COLUMNS):
        raise TraceParseError(0, f"header has {len(header)} columns, expected at least "
                                 f"{len(_FIXED_COLUMNS)}")
    counter_names = tuple(header[len(_FIXED_COLUMNS):])
    if counter_count is not None and len(counter_names) != counter_count:
        raise TraceParseError(0, f"header names {len(counter_names)} counters, "
                                 f"expected {counter_count}")

    table = freq_table or embedded_table or DEFAULT_FREQ_TABLE
    expected = len(_FIXED_COLUMNS) + len(counter_names)
    samples = []
    for i, raw in enumerate(rows, start=1):
        fields = [f.strip() for f in raw.split(",")]
        if len(fields) != expected:
            raise ColumnCountError(i, f"expected {expected} fields, got {len(fields)}")
        ts = _parse_float(fields[0], i, "time")
        ft = _parse_float(fields[1], i, "frame_time_ms")
        try:
            fc = int(fields[2])
        except ValueError:
            raise FieldValueError(i, f"non-integer frame_count field {fields[2]!r}") from None
        freq = _parse_float(fields[3], i, "gpu_freq_mhz")
        if freq not in table:
            raise UnknownFrequencyError(i, f"frequency {freq} MHz not in table")
        counters = tuple(_parse_float(fields[4 + j], i, counter_names[j])
                         for j in range(len(counter_names)))
        try:
            samples.append(TraceSample(ts, ft, fc, freq, counters))
        except ValueError as exc:
            raise FieldValueError(i, str(exc)) from None
    return Trace(tuple(samples), counter_names, table, period)
