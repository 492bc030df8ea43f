"""Command-line pipeline: generate, select, replay, probe, govern.

Commands

  characterize     write a synthetic characterization sweep trace
  select-features  prune and L1-select counters from a trace
  replay           stream a trace through an online estimator
  sensitivity      what-if frequency deltas and the frame-time derivative
  govern           closed-loop DVFS policy simulation

Exit codes: 0 success, 2 input error, 3 degenerate data, 4 spec/trace
mismatch, 5 unsupported combination.  Every command is deterministic
given its flags and seed; all output tables are comma separated with a
header row.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

import numpy as np

from . import estimator, features, governor, model
from .config import ConfigBundle, ConfigError, load_config
from .trace import (Trace, generate_characterization, generate_runtime,
                    parse_trace, serialize_trace)

EXIT_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_MISMATCH = 4
EXIT_UNSUPPORTED = 5

DEFAULT_SEED = 42
CONVERGENCE_WINDOW = 5
DEFAULT_CONVERGENCE_THRESHOLD = 10.0  # percent APE


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


# ---------------------------------------------------------------------------
# Metrics

@dataclass(frozen=True)
class MetricsReport:
    mape: float                    # percent
    median_ape: float              # percent
    nrmse: float                   # percent of the actual range
    convergence_time_ms: float     # inf if the error never settles
    excluded_terms: int            # zero-actual points dropped from APE


def compute_metrics(actual, predicted, threshold: float = DEFAULT_CONVERGENCE_THRESHOLD,
                    period_ms: float = 50.0, window: int = CONVERGENCE_WINDOW) -> MetricsReport:
    """Accuracy summary of a prediction series against its reference.

    APE terms with a zero actual value are excluded and counted.  The
    convergence time is the first interval from which the trailing
    `window`-interval mean APE stays below `threshold` percent for the
    rest of the series.
    """
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if actual.shape != predicted.shape or actual.ndim != 1 or actual.size == 0:
        raise ValueError("need equal-length non-empty series")

    nonzero = actual != 0
    excluded = int(np.count_nonzero(~nonzero))
    ape = np.full(actual.size, np.inf)
    ape[nonzero] = np.abs(actual[nonzero] - predicted[nonzero]) / np.abs(actual[nonzero]) * 100.0

    finite_ape = ape[nonzero]
    mape = float(finite_ape.mean()) if finite_ape.size else float("inf")
    median = float(np.median(finite_ape)) if finite_ape.size else float("inf")

    rmse = float(np.sqrt(np.mean((actual - predicted) ** 2)))
    spread = float(actual.max() - actual.min())
    if spread > 0:
        nrmse = rmse / spread * 100.0
    else:
        nrmse = 0.0 if rmse == 0 else float("inf")

    rolling = np.array([ape[max(0, k - window + 1):k + 1].mean()
                        for k in range(ape.size)])
    below = rolling < threshold
    conv = float("inf")
    for k in range(ape.size):
        if below[k:].all():
            conv = k * period_ms
            break
    return MetricsReport(mape=mape, median_ape=median, nrmse=nrmse,
                         convergence_time_ms=conv, excluded_terms=excluded)


# ---------------------------------------------------------------------------
# Replay driver

@dataclass(frozen=True)
class ReplayRow:
    k: int
    f_k: float
    t_actual: float
    t_pred: float
    abs_pct_err: float | None
    dtf_df: float | None          # ms per MHz; None for the AR baseline
    one_sided: bool = False       # derivative fell back to a single neighbor


@dataclass(frozen=True)
class ReplayResult:
    rows: list[ReplayRow]
    report: MetricsReport
    state: object                 # final estimator state


def _replay_adaptive(trace: Trace, fspec: features.FeatureSpec, algo: str,
                     scale_window: int, threshold: float):
    if len(trace) < 2:
        raise CliError(EXIT_DEGENERATE, "trace too short to form differential rows")
    n_counters = len(trace.counter_names)
    if any(i >= n_counters for i in fspec.indep_counter_indices):
        raise CliError(EXIT_MISMATCH,
                       f"feature spec indexes counters beyond the trace's {n_counters}")
    if algo == "rls":
        state = estimator.rls_init(fspec.m)
        update = estimator.rls_update
    else:
        state = estimator.dcd_rls_init(fspec.m)
        update = estimator.dcd_rls_update

    idx = list(fspec.indep_counter_indices)
    scaler = estimator.FeatureScaler(len(idx), window=scale_window)
    counters = trace.counter_matrix()[:, idx] if idx else np.zeros((len(trace), 0))
    t = trace.frame_times()
    f = trace.freqs()

    rows = []
    scaler.observe(counters[0])
    for k in range(1, len(trace)):
        scaler.observe(counters[k])
        h = scaler.build_features(t[k - 1] * (f[k - 1] / f[k] - 1.0),
                                  f[k] - f[k - 1], counters[k] - counters[k - 1])
        pred = max(t[k - 1] + float(h @ state.a), 0.0)
        dtf, one_sided = _derivative_at(state, t[k - 1], trace.freq_table, f[k])
        state, _ = update(state, h, t[k] - t[k - 1])
        ape = abs(t[k] - pred) / t[k] * 100.0 if t[k] != 0 else None
        rows.append(ReplayRow(k, f[k], t[k], pred, ape, dtf, one_sided))

    actual = np.array([r.t_actual for r in rows])
    predicted = np.array([r.t_pred for r in rows])
    report = compute_metrics(actual, predicted, threshold=threshold, period_ms=trace.period)
    return ReplayResult(rows, report, state)


def _derivative_at(state, prev_t: float, table, f_k: float):
    # the sensitivity forms only read coefficients, so both estimator
    # state flavors work here
    try:
        est = model.sensitivity_lagrange(state, prev_t, table, f_k)
        return est.dtf_df, False
    except model.BoundaryFrequencyError:
        lower, upper = table.neighbors(f_k)
        f_new = upper if lower is None else lower
        est = model.sensitivity_two_point(state, prev_t, f_k, f_new)
        return est.dtf_df, True


def _replay_arlms(trace: Trace, threshold: float):
    state = estimator.arlms_init()
    t = trace.frame_times()
    f = trace.freqs()
    rows = []
    next_pred = None
    for k in range(len(trace)):
        if next_pred is not None:
            ape = abs(t[k] - next_pred) / t[k] * 100.0 if t[k] != 0 else None
            rows.append(ReplayRow(k, f[k], t[k], next_pred, ape, None))
        state, pred = estimator.arlms_update(state, t[k])
        next_pred = pred if state.warm else None

    if not rows:
        raise CliError(EXIT_DEGENERATE, "trace too short for the AR baseline")
    actual = np.array([r.t_actual for r in rows])
    predicted = np.array([r.t_pred for r in rows])
    report = compute_metrics(actual, predicted, threshold=threshold, period_ms=trace.period)
    return ReplayResult(rows, report, state)


def run_replay(trace: Trace, fspec: features.FeatureSpec | None, algo: str,
               scale_window: int = 20,
               threshold: float = DEFAULT_CONVERGENCE_THRESHOLD) -> ReplayResult:
    """Stream a trace through one estimator, one prediction per interval.

    The adaptive algorithms predict each interval with the coefficients
    held before consuming it, so rows are honest one-step-ahead errors.
    The AR baseline emits rows only once its history is full.
    """
    if algo in ("rls", "dcd"):
        if fspec is None:
            raise CliError(EXIT_INPUT, f"--spec is required for --algo {algo}")
        return _replay_adaptive(trace, fspec, algo, scale_window, threshold)
    if algo == "arlms":
        return _replay_arlms(trace, threshold)
    raise CliError(EXIT_INPUT, f"unknown algo {algo!r}")


# ---------------------------------------------------------------------------
# Commands

def _load_trace(path, bundle: ConfigBundle | None):
    table = bundle.freq_table if bundle else None
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_trace(fh, freq_table=table)
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read trace {path}: {exc}") from exc


def _load_bundle(path) -> ConfigBundle:
    try:
        return load_config(path)
    except ConfigError as exc:
        raise CliError(EXIT_INPUT, str(exc)) from exc


def cmd_characterize(args) -> int:
    bundle = _load_bundle(args.config)
    if args.mode == "sweep":
        if not bundle.characterization_complexities:
            raise CliError(EXIT_INPUT, "config has no [characterization] section")
        trace = generate_characterization(bundle.workload, bundle.freq_table,
                                          bundle.characterization_complexities,
                                          bundle.characterization_repeats, args.seed)
    else:
        # runtime mode: the workload's own schedule under a wandering clock
        from .workloads import random_walk_freqs
        schedule = bundle.workload.complexity_schedule
        if not schedule:
            raise CliError(EXIT_INPUT, "config workload has no complexity_schedule")
        freqs = random_walk_freqs(bundle.freq_table, len(schedule), args.seed)
        trace = generate_runtime(bundle.workload, bundle.freq_table, freqs, args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(serialize_trace(trace))
    print(f"wrote {len(trace)} rows to {args.out}")
    return 0


def cmd_select_features(args) -> int:
    bundle = _load_bundle(args.config) if args.config else None
    trace = _load_trace(args.trace, bundle)
    try:
        kept = features.pearson_prune(trace)
    except features.ZeroFrequencyVarianceError as exc:
        raise CliError(EXIT_DEGENERATE, str(exc)) from exc

    candidate = features.FeatureSpec(
        indep_counter_indices=tuple(kept),
        counter_names=tuple(trace.counter_names[i] for i in kept))
    dataset = features.build_dataset(trace, candidate)
    path = features.cross_validated_path(dataset, features.default_eta_grid(dataset),
                                         seed=args.seed)
    print("eta,cv_mean_mse,cv_stderr,nonzero_features")
    for i in range(path.etas.size):
        print(f"{path.etas[i]:.6g},{path.cv_mean_mse[i]:.6g},"
              f"{path.cv_stderr[i]:.6g},{path.nonzero_counts[i]}")
    spec = features.select_features(path, rule=args.rule)
    features.save_feature_spec(spec, args.out)
    print(f"selected {spec.m} features "
          f"(2 frequency terms + counters {list(spec.indep_counter_indices)})")
    return 0


def _load_spec(path) -> features.FeatureSpec:
    try:
        return features.load_feature_spec(path)
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read feature spec {path}: {exc}") from exc


def cmd_replay(args) -> int:
    bundle = _load_bundle(args.config) if args.config else None
    trace = _load_trace(args.trace, bundle)
    fspec = _load_spec(args.spec) if args.spec else None
    result = run_replay(trace, fspec, args.algo)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("k,f_k,t_actual,t_pred,abs_pct_err,dtf_df\n")
        for r in result.rows:
            err = "" if r.abs_pct_err is None else f"{r.abs_pct_err:.6g}"
            dtf = "" if r.dtf_df is None else f"{r.dtf_df:.8g}"
            fh.write(f"{r.k},{r.f_k:g},{r.t_actual:.8g},{r.t_pred:.8g},{err},{dtf}\n")
    rep = result.report
    print(f"rows={len(result.rows)} mape={rep.mape:.3f}% median_ape={rep.median_ape:.3f}% "
          f"nrmse={rep.nrmse:.3f}% convergence_ms={rep.convergence_time_ms:g} "
          f"excluded={rep.excluded_terms}")
    return 0


def cmd_sensitivity(args) -> int:
    bundle = _load_bundle(args.config) if args.config else None
    trace = _load_trace(args.trace, bundle)
    fspec = _load_spec(args.spec)
    result = run_replay(trace, fspec, "rls")

    table = trace.freq_table
    max_span = len(table) - 1
    jumps = args.jumps
    if jumps > max_span:
        print(f"warning: --jumps {jumps} exceeds the table span, clipped to {max_span}",
              file=sys.stderr)
        jumps = max_span

    states = _per_row_states(trace, fspec, result)
    header = ["k", "f_k", "dtf_df", "one_sided"]
    for j in range(1, jumps + 1):
        header += [f"delta_up{j}", f"delta_down{j}"]
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for r, st in zip(result.rows, states):
            cells = [str(r.k), f"{r.f_k:g}", f"{r.dtf_df:.8g}", str(int(r.one_sided))]
            prev_t = trace.samples[r.k - 1].frame_time
            for j in range(1, jumps + 1):
                for direction in (+1, -1):
                    try:
                        f_new = table.step(r.f_k, direction * j)
                        delta = model.candidate_delta(st, prev_t, r.f_k, f_new)
                        cells.append(f"{delta:.8g}")
                    except IndexError:
                        cells.append("")
            fh.write(",".join(cells) + "\n")
    print(f"wrote {len(result.rows)} sensitivity rows to {args.out}")

    if bundle is not None:
        _sensitivity_summary(trace, bundle, result, states, jumps)
    return 0


def _per_row_states(trace, fspec, result):
    """Coefficient snapshots aligned with the replay rows (pre-update)."""
    # Re-run the replay to keep run_replay's interface lean; traces are small.
    idx = list(fspec.indep_counter_indices)
    scaler = estimator.FeatureScaler(len(idx))
    counters = trace.counter_matrix()[:, idx] if idx else np.zeros((len(trace), 0))
    t = trace.frame_times()
    f = trace.freqs()
    state = estimator.rls_init(fspec.m)
    states = []
    scaler.observe(counters[0])
    for k in range(1, len(trace)):
        scaler.observe(counters[k])
        states.append(state)
        h = scaler.build_features(t[k - 1] * (f[k - 1] / f[k] - 1.0),
                                  f[k] - f[k - 1], counters[k] - counters[k - 1])
        state, _ = estimator.rls_update(state, h, t[k] - t[k - 1])
    return states


def _row_complexity_map(trace, bundle):
    """Per-row complexity when the trace shape matches the config.

    Sweep traces are recognized by the factorial row count, runtime traces
    by matching the workload's own schedule length.  Returns None when the
    trace cannot be tied back to the analytic workload.
    """
    complexities = sorted(bundle.characterization_complexities)
    repeats = bundle.characterization_repeats
    if complexities and len(trace) == len(bundle.freq_table) * len(complexities) * repeats:
        per_freq = len(complexities) * repeats
        return lambda k: complexities[(k % per_freq) // repeats]
    schedule = bundle.workload.complexity_schedule
    if schedule and len(trace) == len(schedule):
        return lambda k: schedule[k]
    return None


def _sensitivity_summary(trace, bundle, result, states, jumps):
    """Accuracy against the analytic reference, when the trace allows it.

    The what-if comparisons only use rows whose workload did not change
    from the previous interval, mirroring a repeated-frame measurement.
    """
    from .trace import oracle_frame_time, oracle_frame_time_derivative

    row_c = _row_complexity_map(trace, bundle)
    if row_c is None:
        print("trace does not match the config workload; no reference summary")
        return

    warm = min(100, len(result.rows) // 4)
    ref, est = [], []
    for r in result.rows[warm:]:
        if r.one_sided or row_c(r.k) != row_c(r.k - 1):
            continue
        ref.append(oracle_frame_time_derivative(bundle.workload, row_c(r.k), r.f_k))
        est.append(r.dtf_df)
    if len(ref) >= 2:
        rep = compute_metrics(np.array(ref), np.array(est))
        print(f"derivative_nrmse={rep.nrmse:.3f}% over {len(ref)} interior rows")

    spec = bundle.workload
    table = trace.freq_table
    for j in range(1, jumps + 1):
        apes = []
        for r, st in zip(result.rows[warm:], states[warm:]):
            if row_c(r.k) != row_c(r.k - 1):
                continue
            prev_t = trace.samples[r.k - 1].frame_time
            for direction in (+1, -1):
                try:
                    f_new = table.step(r.f_k, direction * j)
                except IndexError:
                    continue
                pred = prev_t + model.candidate_delta(st, prev_t, r.f_k, f_new)
                truth = oracle_frame_time(spec, row_c(r.k), f_new)
                if truth > 0:
                    apes.append(abs(pred - truth) / truth * 100.0)
        if apes:
            print(f"jump={j} candidate_mape={float(np.mean(apes)):.3f}% ({len(apes)} predictions)")


def cmd_govern(args) -> int:
    if args.trace:
        raise CliError(EXIT_UNSUPPORTED,
                       "closed-loop simulation needs an analytic workload config; "
                       "a parsed trace cannot answer what-if frequencies")
    if not args.config:
        raise CliError(EXIT_INPUT, "--config is required")
    bundle = _load_bundle(args.config)
    policies = list(governor.POLICIES) if args.policy == "all" else [args.policy]
    results = {}
    for policy in policies:
        results[policy] = governor.simulate(policy, bundle.workload, bundle.freq_table,
                                            bundle.governor, bundle.power_model,
                                            seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("k,policy,f_mhz,t_frame_ms,energy_j,violation\n")
        for policy in policies:
            for k, name, f, t, e, v in results[policy].per_interval_log:
                fh.write(f"{k},{name},{f:g},{t:.8g},{e:.8g},{int(v)}\n")
        for policy in policies:
            r = results[policy]
            fh.write(f"summary,{policy},,,{r.total_energy:.8g},{r.fps_violations}\n")

    for policy in policies:
        r = results[policy]
        print(f"{policy}: energy={r.total_energy:.6g} J violations={r.fps_violations}")
    if args.policy == "all":
        base = results["oracle"].total_energy
        if base > 0:
            for policy in policies:
                print(f"{policy}: normalized_energy={results[policy].total_energy / base:.4f}")
    return 0


# ---------------------------------------------------------------------------
# Entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frametime", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("characterize", help="generate a characterization sweep trace")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("sweep", "runtime"), default="sweep",
                   help="sweep: full factorial; runtime: workload schedule "
                        "under a random-walk frequency")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("select-features", help="prune and select online features")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rule", choices=("min_mse", "one_se"), default="min_mse")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_select_features)

    p = sub.add_parser("replay", help="stream a trace through an online estimator")
    p.add_argument("--trace", required=True)
    p.add_argument("--spec")
    p.add_argument("--algo", choices=("rls", "dcd", "arlms"), default="rls")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("sensitivity", help="frequency what-if deltas and derivatives")
    p.add_argument("--trace", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jumps", type=int, default=1)
    p.add_argument("--config")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("govern", help="closed-loop DVFS policy simulation")
    p.add_argument("--config")
    p.add_argument("--trace")
    p.add_argument("--policy", choices=governor.POLICIES + ("all",), default="all")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_govern)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
