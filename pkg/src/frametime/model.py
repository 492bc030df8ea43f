"""Frame-time prediction and frequency-sensitivity estimation.

Everything here evaluates a converged (or converging) estimator state
without mutating it: absolute frame-time prediction for the next
interval, what-if deltas for a candidate frequency, and the numerical
derivative of frame time with respect to frequency.

Unit handling is concentrated in this module: estimator coefficients see
the frequency delta in GHz (see estimator.FeatureScaler), candidate
frequencies arrive in MHz, and derivatives are reported in ms per MHz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimator import MHZ_PER_GHZ, RlsState, rls_predict
from .trace import FrequencyTable

TWO_POINT = "two_point"
LAGRANGE3 = "lagrange3"


class BoundaryFrequencyError(ValueError):
    """Raised at table edges where the three-point form has no neighbor pair."""


@dataclass(frozen=True)
class PredictionContext:
    """Inputs of one differential prediction.

    counter_deltas must already be in estimator units, i.e. scaled by the
    same FeatureScaler the estimator was trained with.
    """

    prev_frame_time: float   # ms
    prev_freq: float         # MHz
    cur_freq: float          # MHz
    counter_deltas: tuple[float, ...] = ()

    def __post_init__(self):
        if self.prev_frame_time < 0:
            raise ValueError("prev_frame_time must be >= 0")
        if self.prev_freq <= 0 or self.cur_freq <= 0:
            raise ValueError("frequencies must be > 0")


@dataclass(frozen=True)
class FrameTimePrediction:
    frame_time_ms: float
    delta_ms: float
    clamped: bool            # prediction went negative and was floored at 0


@dataclass(frozen=True)
class SensitivityEstimate:
    dtf_df: float            # ms per MHz
    at_freq: float           # MHz
    method: str              # TWO_POINT or LAGRANGE3


def feature_vector(ctx: PredictionContext) -> np.ndarray:
    """Estimator-unit features [t_prev*(f_prev/f_cur - 1), df_ghz, dx...]."""
    h0 = ctx.prev_frame_time * (ctx.prev_freq / ctx.cur_freq - 1.0)
    h1 = (ctx.cur_freq - ctx.prev_freq) / MHZ_PER_GHZ
    return np.array([h0, h1, *ctx.counter_deltas])


def predict_frame_time(state: RlsState, ctx: PredictionContext) -> FrameTimePrediction:
    """Absolute prediction t_prev + h'a, floored at zero with a flag."""
    h = feature_vector(ctx)
    if h.shape[0] != state.m:
        raise ValueError(f"context builds {h.shape[0]} features, state expects {state.m}")
    delta = rls_predict(state, h)
    raw = ctx.prev_frame_time + delta
    if raw < 0:
        return FrameTimePrediction(0.0, delta, True)
    return FrameTimePrediction(raw, delta, False)


def candidate_delta(state: RlsState, prev_frame_time: float,
                    f_k: float, f_new: float) -> float:
    """Predicted frame-time change (ms) if the clock moved from f_k to f_new.

    Only the two frequency terms contribute: the online counters are
    frequency independent by construction, so their deltas for a pure
    frequency change are zero.
    """
    if f_k <= 0 or f_new <= 0:
        raise ValueError("frequencies must be > 0")
    a0 = float(state.a[0])
    a1 = float(state.a[1]) if state.m > 1 else 0.0
    return (a0 * prev_frame_time * (f_k / f_new - 1.0)
            + a1 * (f_new - f_k) / MHZ_PER_GHZ)


def sensitivity_two_point(state: RlsState, prev_frame_time: float,
                          f_k: float, f_new: float) -> SensitivityEstimate:
    """Secant slope toward a single candidate frequency."""
    if f_new == f_k:
        raise ValueError("f_new must differ from f_k")
    delta = candidate_delta(state, prev_frame_time, f_k, f_new)
    return SensitivityEstimate(delta / (f_new - f_k), f_k, TWO_POINT)


def three_point_derivative(t_lo: float, t_mid: float, t_hi: float,
                           df1: float, df2: float) -> float:
    """Derivative at the middle of three points spaced df1 below, df2 above.

    Differentiates the interpolating parabola, so any quadratic is
    recovered exactly.  Equal spacing takes the central-difference form
    directly, which the general expression reduces to algebraically.
    """
    if df1 <= 0 or df2 <= 0:
        raise ValueError("spacings must be > 0")
    if df1 == df2:
        return (t_hi - t_lo) / (2.0 * df1)
    num = df1 * df1 * t_hi + (df2 * df2 - df1 * df1) * t_mid - df2 * df2 * t_lo
    return num / (df1 * df2 * (df1 + df2))


def sensitivity_lagrange(state: RlsState, prev_frame_time: float,
                         table: FrequencyTable, f_k: float) -> SensitivityEstimate:
    """Three-point derivative at f_k using its table neighbors.

    The predicted frame times one level down and one level up come from
    candidate_delta; uneven level spacing is handled by the interpolating
    parabola.  At the table edges there is no neighbor pair, so callers
    must fall back to sensitivity_two_point.
    """
    lower, upper = table.neighbors(f_k)
    if lower is None or upper is None:
        raise BoundaryFrequencyError(
            f"{f_k} MHz is at the table edge, use sensitivity_two_point")
    df1 = f_k - lower
    df2 = upper - f_k
    t_mid = prev_frame_time
    t_lo = t_mid + candidate_delta(state, prev_frame_time, f_k, lower)
    t_hi = t_mid + candidate_delta(state, prev_frame_time, f_k, upper)
    return SensitivityEstimate(three_point_derivative(t_lo, t_mid, t_hi, df1, df2),
                               f_k, LAGRANGE3)
