"""INI-style configuration files for workloads and simulation settings.

Sections:

  [frequency_table]   freqs_mhz = 200, 311, ...
  [workload]          ref_freq_mhz, noise_sigma, complexity_schedule
  [scalable_ms]       kind = affine (slope, intercept)
                      or kind = piecewise (points = c:v, c:v, ...)
  [unscalable_ms]     same shape as scalable_ms
  [counter.<name>]    kind = dep | indep | noise, plus the response fields
                      (noise counters take amplitude and salt and are
                      frequency independent)
  [characterization]  complexities = 1:64 or list, repeats = 10
  [governor]          fps_target, period_ms, up/down_threshold, warmup_intervals
  [power_model]       p_static_w, p_dyn_w_per_ghz3, p_idle_w

complexity_schedule accepts an explicit comma list or the compact forms
constant:V:N, ramp:A:B:N and square:LO:HI:HALF_PERIOD:N.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

import numpy as np

from .governor import GovernorConfig, PowerModel
from .trace import (AffineMap, CounterModel, FrequencyTable, HashNoiseMap,
                    PiecewiseLinearMap, WorkloadSpec)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ConfigBundle:
    workload: WorkloadSpec
    freq_table: FrequencyTable
    characterization_complexities: tuple[float, ...]
    characterization_repeats: int
    governor: GovernorConfig
    power_model: PowerModel


def parse_schedule(text: str) -> tuple[float, ...]:
    """Expand a schedule expression into per-interval complexity values."""
    text = text.strip()
    if ":" not in text:
        return tuple(float(v) for v in text.split(",") if v.strip())
    parts = text.split(":")
    kind = parts[0].strip().lower()
    args = [float(p) for p in parts[1:]]
    if kind == "constant" and len(args) == 2:
        value, n = args
        return (value,) * int(n)
    if kind == "ramp" and len(args) == 3:
        a, b, n = args
        return tuple(float(v) for v in np.linspace(a, b, int(n)))
    if kind == "square" and len(args) == 4:
        lo, hi, half, n = args
        half = int(half)
        vals = [lo if (k // half) % 2 == 0 else hi for k in range(int(n))]
        return tuple(vals)
    if kind == "stairs" and len(args) == 5:
        lo, hi, step, hold, n = args
        levels = [float(v) for v in np.arange(lo, hi + step / 2, step)]
        hold = int(hold)
        return tuple(levels[(k // hold) % len(levels)] for k in range(int(n)))
    raise ConfigError(f"bad schedule expression {text!r}")


def parse_complexities(text: str) -> tuple[float, ...]:
    """Sweep complexities: either 'lo:hi' inclusive integers or a comma list."""
    text = text.strip()
    if ":" in text:
        lo, hi = (int(p) for p in text.split(":"))
        return tuple(float(c) for c in range(lo, hi + 1))
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_points(text: str):
    pts = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        c, _, v = chunk.partition(":")
        pts.append((float(c), float(v)))
    return tuple(pts)


def _parse_response(section, where: str, kind_key: str = "kind"):
    kind = section.get(kind_key, "affine").strip().lower()
    if kind == "piecewise":
        if "points" not in section:
            raise ConfigError(f"{where}: piecewise map needs points")
        return PiecewiseLinearMap(_parse_points(section["points"]))
    if kind == "affine":
        try:
            return AffineMap(float(section.get("slope", 0.0)),
                             float(section.get("intercept", 0.0)))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: unknown map kind {kind!r}")


def _parse_counter(name: str, section) -> CounterModel:
    kind = section.get("kind", "indep").strip().lower()
    if kind == "noise":
        response = HashNoiseMap(amplitude=float(section.get("amplitude", 1.0)),
                                salt=float(section.get("salt", 0.0)))
        return CounterModel(name=name, kind="indep", response=response)
    if kind not in ("dep", "indep"):
        raise ConfigError(f"counter {name}: unknown kind {kind!r}")
    # the counter's map shape comes from its `response` key (default affine)
    return CounterModel(name=name, kind=kind,
                        response=_parse_response(section, f"counter {name}",
                                                 kind_key="response"))


def load_config(path) -> ConfigBundle:
    """Read a config file into a validated bundle of simulation inputs."""
    cp = configparser.ConfigParser()
    read = cp.read(str(path))
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    try:
        if "frequency_table" in cp:
            raw = cp["frequency_table"].get("freqs_mhz", "")
            table = FrequencyTable(tuple(float(v) for v in raw.split(",") if v.strip()))
        else:
            from .trace import DEFAULT_FREQ_TABLE
            table = DEFAULT_FREQ_TABLE

        if "workload" not in cp:
            raise ConfigError("missing [workload] section")
        w = cp["workload"]
        if "scalable_ms" not in cp or "unscalable_ms" not in cp:
            raise ConfigError("missing [scalable_ms] or [unscalable_ms] section")

        dep, indep = [], []
        for section in cp.sections():
            if section.startswith("counter."):
                cm = _parse_counter(section[len("counter."):], cp[section])
                (dep if cm.kind == "dep" else indep).append(cm)

        workload = WorkloadSpec(
            complexity_schedule=parse_schedule(w.get("complexity_schedule", "")),
            scalable_ms=_parse_response(cp["scalable_ms"], "[scalable_ms]"),
            unscalable_ms=_parse_response(cp["unscalable_ms"], "[unscalable_ms]"),
            ref_freq=float(w.get("ref_freq_mhz", table.min)),
            dep_counters=tuple(dep),
            indep_counters=tuple(indep),
            noise_sigma=float(w.get("noise_sigma", 0.03)),
        )

        if "characterization" in cp:
            ch = cp["characterization"]
            complexities = parse_complexities(ch.get("complexities", "1:64"))
            repeats = int(ch.get("repeats", 10))
        else:
            complexities, repeats = (), 1

        g = cp["governor"] if "governor" in cp else {}
        governor = GovernorConfig(
            fps_target=float(g.get("fps_target", 60.0)),
            period=float(g.get("period_ms", 50.0)),
            up_threshold=float(g.get("up_threshold", 0.8)),
            down_threshold=float(g.get("down_threshold", 0.3)),
            warmup_intervals=int(g.get("warmup_intervals", 10)),
        )

        p = cp["power_model"] if "power_model" in cp else {}
        power = PowerModel(
            p_static=float(p.get("p_static_w", 0.5)),
            p_dyn_coeff=float(p.get("p_dyn_w_per_ghz3", 8.0)),
            p_idle=float(p.get("p_idle_w", 0.2)),
        )
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad config {path}: {exc}") from None

    return ConfigBundle(workload=workload, freq_table=table,
                        characterization_complexities=complexities,
                        characterization_repeats=repeats,
                        governor=governor, power_model=power)
