"""Offline feature selection for the differential frame-time model.

The online model always carries two frequency terms,

    h[0] = t_prev * (f_prev / f_cur - 1)      (scalable-time term)
    h[1] = f_cur - f_prev                     (frequency delta, MHz here)

plus the deltas of a chosen subset of frequency-independent counters.
Selection runs in two stages on a characterization trace: counters
correlated with the GPU frequency are pruned by Pearson correlation, then
an L1-penalized regression with cross-validation picks the informative
counters among the survivors.  The chosen set is frozen for online use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trace import Trace

DEFAULT_PEARSON_THRESHOLD = 0.1
DEFAULT_FOLDS = 10
LASSO_TOL = 1e-8
LASSO_MAX_SWEEPS = 100_000


class ZeroFrequencyVarianceError(ValueError):
    """The trace holds a single frequency, correlation with it is undefined."""


@dataclass(frozen=True)
class FeatureSpec:
    """Frozen online feature set: which counters join the frequency terms."""

    indep_counter_indices: tuple[int, ...]
    counter_names: tuple[str, ...] = ()

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indep_counter_indices)
        object.__setattr__(self, "indep_counter_indices", idx)
        object.__setattr__(self, "counter_names", tuple(self.counter_names))
        if len(set(idx)) != len(idx):
            raise ValueError("counter indices must be unique")
        if any(i < 0 for i in idx):
            raise ValueError("counter indices must be >= 0")
        if self.counter_names and len(self.counter_names) != len(idx):
            raise ValueError("counter_names must align with indices")

    @property
    def m(self) -> int:
        """Total feature count: two frequency terms plus the counters."""
        return 2 + len(self.indep_counter_indices)


@dataclass(frozen=True)
class RegressionDataset:
    """Feature rows and frame-time-delta targets from consecutive samples."""

    h: np.ndarray        # (rows, M) feature matrix
    targets: np.ndarray  # (rows,) delta frame time, ms
    feature_spec: FeatureSpec

    def __post_init__(self):
        if self.h.ndim != 2 or self.h.shape[1] != self.feature_spec.m:
            raise ValueError("feature matrix width must equal the spec's M")
        if self.targets.shape != (self.h.shape[0],):
            raise ValueError("targets must align with feature rows")
        if not (np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.targets))):
            raise ValueError("dataset entries must be finite")

    def __len__(self):
        return self.h.shape[0]


@dataclass(frozen=True)
class LassoPath:
    """Per-penalty results of the cross-validated L1 path."""

    etas: np.ndarray          # descending penalty grid
    coefs: np.ndarray         # (len(etas), M), original units
    cv_mean_mse: np.ndarray
    cv_stderr: np.ndarray
    nonzero_counts: np.ndarray
    feature_spec: FeatureSpec  # candidate set the columns refer to

    def __post_init__(self):
        n = self.etas.shape[0]
        if n == 0:
            raise ValueError("empty path")
        for arr in (self.coefs, self.cv_mean_mse, self.cv_stderr, self.nonzero_counts):
            if arr.shape[0] != n:
                raise ValueError("path arrays must align with the eta grid")
        if np.any(self.cv_stderr < 0):
            raise ValueError("std errors must be >= 0")


def frequency_correlations(trace: Trace) -> np.ndarray:
    """Pearson r of each counter against the GPU frequency.

    Zero-variance counters get r = nan rather than a divide error.
    """
    freqs = trace.freqs()
    if len(trace) < 2 or np.ptp(freqs) == 0:
        raise ZeroFrequencyVarianceError(
            "trace spans a single frequency, correlation with frequency is undefined")
    fc = freqs - freqs.mean()
    fnorm = float(np.sqrt(fc @ fc))
    counters = trace.counter_matrix()
    out = np.empty(counters.shape[1])
    for j in range(counters.shape[1]):
        xc = counters[:, j] - counters[:, j].mean()
        xnorm = float(np.sqrt(xc @ xc))
        out[j] = np.nan if xnorm == 0 else float(fc @ xc) / (fnorm * xnorm)
    return out


def pearson_prune(trace: Trace, threshold: float = DEFAULT_PEARSON_THRESHOLD) -> list[int]:
    """Indices of counters with |r against frequency| below threshold.

    Counters tracking the clock get pruned; constant counters carry no
    signal at all and are disqualified too.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must be in (0, 1)")
    corr = frequency_correlations(trace)
    return [j for j, r in enumerate(corr) if np.isfinite(r) and abs(r) < threshold]


def build_dataset(trace: Trace, spec: FeatureSpec) -> RegressionDataset:
    """Differential rows from every consecutive sample pair.

    Row k-1 holds h built from samples (k-1, k) and the target
    t_k - t_{k-1}; the dataset has len(trace) - 1 rows.  Features are in
    raw units here (MHz, counts); online use rescales at the estimator
    boundary.
    """
    if len(trace) < 2:
        raise ValueError("need at least two samples")
    n_counters = len(trace.counter_names)
    bad = [i for i in spec.indep_counter_indices if i >= n_counters]
    if bad:
        raise ValueError(f"counter indices {bad} out of range for {n_counters} counters")

    t = trace.frame_times()
    f = trace.freqs()
    if np.any(f == 0):
        raise ValueError("zero frequency in trace")
    x = trace.counter_matrix()[:, list(spec.indep_counter_indices)]

    h = np.empty((len(trace) - 1, spec.m))
    h[:, 0] = t[:-1] * (f[:-1] / f[1:] - 1.0)
    h[:, 1] = f[1:] - f[:-1]
    h[:, 2:] = x[1:] - x[:-1]
    targets = t[1:] - t[:-1]
    return RegressionDataset(h=h, targets=targets, feature_spec=spec)


# ---------------------------------------------------------------------------
# L1-penalized fit by cyclic coordinate descent

def _standardize(h: np.ndarray, y: np.ndarray):
    x_mean = h.mean(axis=0)
    x_std = h.std(axis=0)
    x_std = np.where(x_std == 0, 1.0, x_std)
    y_mean = y.mean()
    return (h - x_mean) / x_std, y - y_mean, x_mean, x_std, y_mean


def _soft_threshold(value: float, bound: float) -> float:
    if value > bound:
        return value - bound
    if value < -bound:
        return value + bound
    return 0.0


def _lasso_cd(X: np.ndarray, y: np.ndarray, eta: float, a0=None):
    """Coordinate descent on standardized data, asserting monotone cost.

    Minimizes sum (y - X a)^2 + eta * sum |a_j|.  Runs in covariance form
    (Gram matrix instead of the residual vector) since rows far outnumber
    features.  Stops when the largest coefficient move in a sweep is below
    LASSO_TOL or after LASSO_MAX_SWEEPS sweeps.  Returns (a, objective
    history per sweep).
    """
    m = X.shape[1]
    gram = X.T @ X
    xy = X.T @ y
    yy = float(y @ y)
    diag = np.diag(gram)
    a = np.zeros(m) if a0 is None else a0.copy()

    def objective_at(coef):
        return (yy - 2.0 * float(coef @ xy) + float(coef @ gram @ coef)
                + eta * float(np.sum(np.abs(coef))))

    objective = [objective_at(a)]
    grad = gram @ a  # maintained as gram @ a
    for _ in range(LASSO_MAX_SWEEPS):
        max_move = 0.0
        for j in range(m):
            if diag[j] == 0.0:
                continue
            old = a[j]
            rho = xy[j] - grad[j] + diag[j] * old
            new = _soft_threshold(rho, eta / 2.0) / diag[j]
            if new != old:
                grad += (new - old) * gram[:, j]
                a[j] = new
                max_move = max(max_move, abs(new - old))
        obj = objective_at(a)
        if obj > objective[-1] * (1 + 1e-12) + 1e-9:
            raise AssertionError("coordinate descent objective increased")
        objective.append(obj)
        if max_move < LASSO_TOL:
            break
    return a, objective


def _fit_std(h: np.ndarray, y: np.ndarray, eta: float, warm=None):
    """Standardize, fit, and map back: (coefs original units, intercept, std coefs)."""
    X, yc, x_mean, x_std, y_mean = _standardize(h, y)
    a_std, _ = _lasso_cd(X, yc, eta, a0=warm)
    coefs = a_std / x_std
    intercept = y_mean - float(coefs @ x_mean)
    return coefs, intercept, a_std


def lasso_fit(dataset: RegressionDataset, eta: float) -> np.ndarray:
    """L1-penalized coefficients at a single penalty eta.

    Inputs are standardized internally (the penalty applies to the
    standardized coefficients); returned coefficients are mapped back to
    the original feature units.  eta = 0 reduces to least squares.
    """
    if eta < 0:
        raise ValueError("eta must be >= 0")
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    coefs, _, _ = _fit_std(dataset.h, dataset.targets, eta)
    return coefs


def default_eta_grid(dataset: RegressionDataset, n: int = 50, ratio: float = 1e-4) -> np.ndarray:
    """Descending log grid from the smallest all-zero penalty down to ratio times it."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    X, yc, _, _, _ = _standardize(dataset.h, dataset.targets)
    eta_max = 2.0 * float(np.max(np.abs(X.T @ yc)))
    if eta_max == 0:
        eta_max = 1.0
    return np.geomspace(eta_max, eta_max * ratio, n)


def cross_validated_path(dataset: RegressionDataset, etas, folds: int = DEFAULT_FOLDS,
                         seed: int = 0) -> LassoPath:
    """Held-out MSE along the penalty grid with contiguous time blocks.

    Rows are serially correlated, so folds are contiguous blocks rather
    than shuffled rows; the result is deterministic (the seed is accepted
    for interface stability).  Penalties are visited in descending order
    with warm starts.
    """
    del seed  # fold layout is deterministic by design
    etas = np.sort(np.asarray(etas, dtype=float))[::-1]
    if etas.size == 0:
        raise ValueError("empty eta grid")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    n = len(dataset)
    if n < folds:
        raise ValueError(f"dataset has {n} rows, fewer than {folds} folds")

    bounds = np.linspace(0, n, folds + 1, dtype=int)
    fold_mse = np.empty((etas.size, folds))
    for k in range(folds):
        lo, hi = bounds[k], bounds[k + 1]
        test = np.zeros(n, dtype=bool)
        test[lo:hi] = True
        h_tr, y_tr = dataset.h[~test], dataset.targets[~test]
        h_te, y_te = dataset.h[test], dataset.targets[test]
        X, yc, x_mean, x_std, y_mean = _standardize(h_tr, y_tr)
        warm = None
        for i, eta in enumerate(etas):
            a_std, _ = _lasso_cd(X, yc, eta, a0=warm)
            warm = a_std
            coefs = a_std / x_std
            intercept = y_mean - float(coefs @ x_mean)
            err = y_te - (h_te @ coefs + intercept)
            fold_mse[i, k] = float(err @ err) / err.size

    coefs_path = np.empty((etas.size, dataset.feature_spec.m))
    warm = None
    X, yc, x_mean, x_std, _ = _standardize(dataset.h, dataset.targets)
    for i, eta in enumerate(etas):
        a_std, _ = _lasso_cd(X, yc, eta, a0=warm)
        warm = a_std
        coefs_path[i] = a_std / x_std

    return LassoPath(
        etas=etas,
        coefs=coefs_path,
        cv_mean_mse=fold_mse.mean(axis=1),
        cv_stderr=fold_mse.std(axis=1, ddof=1) / np.sqrt(folds),
        nonzero_counts=np.count_nonzero(coefs_path, axis=1),
        feature_spec=dataset.feature_spec,
    )


def select_features(path: LassoPath, rule: str = "min_mse") -> FeatureSpec:
    """Freeze the online feature set from a fitted path.

    rule "min_mse" picks the penalty with the lowest cross-validated MSE;
    "one_se" the sparsest penalty within one standard error of it.  The
    two frequency terms are structural and always retained, even when the
    penalty shrank them; only counters are subject to the support.
    """
    i_min = int(np.argmin(path.cv_mean_mse))
    if rule == "min_mse":
        chosen = i_min
    elif rule == "one_se":
        limit = path.cv_mean_mse[i_min] + path.cv_stderr[i_min]
        chosen = next(i for i in range(path.etas.size) if path.cv_mean_mse[i] <= limit)
    else:
        raise ValueError(f"unknown rule {rule!r}")

    candidate = path.feature_spec
    keep = [k for k, idx in enumerate(candidate.indep_counter_indices)
            if path.coefs[chosen, 2 + k] != 0.0]
    names = tuple(candidate.counter_names[k] for k in keep) if candidate.counter_names else ()
    return FeatureSpec(
        indep_counter_indices=tuple(candidate.indep_counter_indices[k] for k in keep),
        counter_names=names,
    )


# ---------------------------------------------------------------------------
# Feature spec files

def save_feature_spec(spec: FeatureSpec, path) -> None:
    lines = ["# frame-time feature spec",
             "counter_indices = " + ",".join(str(i) for i in spec.indep_counter_indices)]
    if spec.counter_names:
        lines.append("counter_names = " + ",".join(spec.counter_names))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_feature_spec(path) -> FeatureSpec:
    fields = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    raw = fields.get("counter_indices", "")
    indices = tuple(int(v) for v in raw.split(",") if v.strip() != "")
    names = tuple(v.strip() for v in fields.get("counter_names", "").split(",") if v.strip())
    return FeatureSpec(indep_counter_indices=indices, counter_names=names)
