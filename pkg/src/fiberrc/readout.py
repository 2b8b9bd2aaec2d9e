"""Linear readout: feature assembly, ridge training, threshold decisions.

Feature rows concatenate the node responses of a window of bit timeframes
(``past_bits`` before, the current bit, ``future_bits`` after) plus a
constant bias column.  Training solves the ridge problem on standardized
features via an orthogonal decomposition, with Monte-Carlo cross-validation
selecting among repetitions; the decision threshold is fixed on validation
data and never touches the test stream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg as _linalg

from fiberrc.reservoir import ReservoirResponse
from fiberrc.signals import BitStream

__all__ = [
    "WindowSpec",
    "ReadoutModel",
    "DecisionResult",
    "assemble_features",
    "solve_ridge",
    "train",
    "predict",
    "decide_and_ber",
    "save_model_json",
    "load_model_json",
]


@dataclass(slots=True)
class WindowSpec:
    """Bit timeframes feeding one prediction: past + current + future.

    Predictions lag the incoming stream by ``future_bits`` bit periods.
    """

    past_bits: int = 0
    future_bits: int = 0

    def __post_init__(self) -> None:
        if self.past_bits < 0 or self.future_bits < 0:
            raise ValueError("window sizes must be non-negative")

    @property
    def total_bits(self) -> int:
        return self.past_bits + 1 + self.future_bits

    @property
    def latency_bits(self) -> int:
        return self.future_bits

    @classmethod
    def symmetric(cls, total_bits: int) -> "WindowSpec":
        if total_bits < 1 or total_bits % 2 == 0:
            raise ValueError("symmetric window needs an odd total_bits")
        half = (total_bits - 1) // 2
        return cls(past_bits=half, future_bits=half)


@dataclass(slots=True)
class DecisionResult:
    bits: np.ndarray
    ber: float
    threshold: float


@dataclass(slots=True)
class ReadoutModel:
    """Trained readout: standardization, weights, frozen decision threshold."""

    weights: np.ndarray
    threshold: float
    window: WindowSpec
    ridge_lambda: float
    feature_shift: np.ndarray
    feature_scale: np.ndarray
    validation_ber: float
    validation_ber_mean: float
    validation_ber_std: float
    seed_info: str = ""

    def __post_init__(self) -> None:
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    @property
    def n_features(self) -> int:
        return int(self.weights.size)


def assemble_features(resp: ReservoirResponse | np.ndarray,
                      bits: BitStream | np.ndarray,
                      window: WindowSpec) -> tuple[np.ndarray, np.ndarray]:
    """Window the per-bit responses into feature rows with aligned targets.

    Row for bit i concatenates the node vectors of bits i-past .. i+future
    in order, plus a trailing bias 1.  Boundary bits without full context
    are dropped, so the output has (n_bits - past - future) rows.
    """
    values = resp.values if isinstance(resp, ReservoirResponse) else np.asarray(resp)
    targets = bits.bits if isinstance(bits, BitStream) else np.asarray(bits)
    if values.ndim != 2:
        raise ValueError("response must be 2-D")
    n_bits, k = values.shape
    if targets.shape[0] != n_bits:
        raise ValueError(f"{targets.shape[0]} targets for {n_bits} response rows")
    rows = n_bits - window.past_bits - window.future_bits
    if rows < 1:
        raise ValueError(
            f"window of {window.total_bits} bits exceeds stream of {n_bits}")
    n_win = window.total_bits
    feats = np.empty((rows, n_win * k + 1), dtype=np.float64)
    for w in range(n_win):
        feats[:, w * k:(w + 1) * k] = values[w:w + rows]
    feats[:, -1] = 1.0
    y = targets[window.past_bits:window.past_bits + rows].astype(np.float64)
    return feats, y


def solve_ridge(features: np.ndarray, targets: np.ndarray,
                ridge_lambda: float) -> np.ndarray:
    """Ridge solution via least squares on the lambda-augmented system.

    minimizes ||X w - y||^2 + lambda ||w||^2 through an orthogonal
    factorization of [X; sqrt(lambda) I] rather than the normal equations.
    """
    n_feat = features.shape[1]
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be non-negative")
    if ridge_lambda == 0:
        aug, rhs = features, targets
    else:
        aug = np.vstack([features, np.sqrt(ridge_lambda) * np.eye(n_feat)])
        rhs = np.concatenate([targets, np.zeros(n_feat)])
    weights, *_ = _linalg.lstsq(aug, rhs, lapack_driver="gelsy",
                                check_finite=False)
    return weights


def _fit_scaler(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # constant columns (the bias column in particular) pass through unscaled
    shift = features.mean(axis=0)
    scale = features.std(axis=0)
    constant = scale < 1e-12
    shift[constant] = 0.0
    scale[constant] = 1.0
    return shift, scale


def train(features: np.ndarray, targets: np.ndarray, ridge_lambda: float = 0.01,
          cv_reps: int = 10, train_frac: float = 0.75,
          rng: np.random.Generator | None = None,
          window: WindowSpec | None = None) -> ReadoutModel:
    """Ridge regression with Monte-Carlo cross-validation.

    Each repetition draws a fresh random train/validation split, fits on
    the training portion (standardized there), optimizes the comparator
    threshold on the validation portion, and scores validation BER.  The
    reported model is the repetition with the lowest validation BER;
    mean/std across repetitions are kept for diagnostics.
    """
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n_rows = features.shape[0]
    if targets.shape[0] != n_rows:
        raise ValueError("features and targets disagree on row count")
    if cv_reps < 1:
        raise ValueError("cv_reps must be >= 1")
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must be in (0, 1)")
    if rng is None:
        rng = np.random.default_rng(0)
    n_train = int(round(train_frac * n_rows))
    if n_train < 2 or n_rows - n_train < 1:
        raise ValueError("not enough rows for the requested split")

    best: ReadoutModel | None = None
    val_bers = []
    truth_int = targets.astype(np.int64)
    for _ in range(cv_reps):
        order = rng.permutation(n_rows)
        idx_tr, idx_val = order[:n_train], order[n_train:]
        y_tr = targets[idx_tr]
        if y_tr.min() == y_tr.max():
            raise ValueError("training portion contains a single class")
        shift, scale = _fit_scaler(features[idx_tr])
        x_tr = (features[idx_tr] - shift) / scale
        weights = solve_ridge(x_tr, y_tr, ridge_lambda)
        soft_val = ((features[idx_val] - shift) / scale) @ weights
        decision = decide_and_ber(soft_val, truth_int[idx_val], threshold="optimize")
        val_bers.append(decision.ber)
        if best is None or decision.ber < best.validation_ber:
            best = ReadoutModel(
                weights=weights, threshold=decision.threshold,
                window=window if window is not None else WindowSpec(),
                ridge_lambda=ridge_lambda,
                feature_shift=shift, feature_scale=scale,
                validation_ber=decision.ber, validation_ber_mean=0.0,
                validation_ber_std=0.0)
    assert best is not None
    best.validation_ber_mean = float(np.mean(val_bers))
    best.validation_ber_std = float(np.std(val_bers))
    return best


def predict(model: ReadoutModel, features: np.ndarray) -> np.ndarray:
    """Soft outputs: standardized features times the trained weights."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.n_features:
        raise ValueError(
            f"feature count {features.shape[-1]} does not match model "
            f"({model.n_features})")
    return ((features - model.feature_shift) / model.feature_scale) @ model.weights


def decide_and_ber(soft: np.ndarray, truth: np.ndarray,
                   threshold: float | str = "optimize") -> DecisionResult:
    """Binary comparator: bit = (soft > threshold).

    ``threshold="optimize"`` scans the midpoints between consecutive distinct
    sorted soft values (plus the two open ends) and returns the minimum-BER
    threshold, taking the lowest threshold on ties.
    """
    soft = np.asarray(soft, dtype=np.float64)
    truth = np.asarray(truth)
    if soft.size == 0:
        raise ValueError("empty input")
    if soft.shape != truth.shape:
        raise ValueError("soft outputs and truth must have equal length")
    n = soft.size
    if threshold != "optimize":
        thr = float(threshold)
        bits = (soft > thr).astype(np.uint8)
        return DecisionResult(bits=bits, ber=float(np.mean(bits != truth)),
                              threshold=thr)
    order = np.argsort(soft, kind="stable")
    s = soft[order]
    b = truth[order].astype(np.int64)
    ones_below = np.concatenate([[0], np.cumsum(b)])          # ones in s[:i]
    zeros_from = np.concatenate([np.cumsum((1 - b)[::-1])[::-1], [0]])  # zeros in s[i:]
    errors = ones_below + zeros_from                          # cut index 0..n
    distinct = np.flatnonzero(s[1:] > s[:-1]) + 1             # valid interior cuts
    cuts = np.concatenate([[0], distinct, [n]])
    cut_thresholds = np.empty(cuts.size)
    cut_thresholds[0] = s[0] - 1.0
    cut_thresholds[-1] = s[-1] + 1.0
    cut_thresholds[1:-1] = 0.5 * (s[distinct - 1] + s[distinct])
    at_cuts = errors[cuts]
    pick = int(np.argmin(at_cuts))  # first minimum = lowest threshold
    thr = float(cut_thresholds[pick])
    bits = (soft > thr).astype(np.uint8)
    return DecisionResult(bits=bits, ber=float(at_cuts[pick]) / n, threshold=thr)


# ---------------------------------------------------------------------------
# model serialization


def save_model_json(path, model: ReadoutModel) -> None:
    payload = {
        "weights": model.weights.tolist(),
        "threshold": model.threshold,
        "window": {"past_bits": model.window.past_bits,
                   "future_bits": model.window.future_bits},
        "ridge_lambda": model.ridge_lambda,
        "feature_shift": model.feature_shift.tolist(),
        "feature_scale": model.feature_scale.tolist(),
        "validation_ber": model.validation_ber,
        "validation_ber_mean": model.validation_ber_mean,
        "validation_ber_std": model.validation_ber_std,
        "seed_info": model.seed_info,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def load_model_json(path) -> ReadoutModel:
    with open(path) as fh:
        payload = json.load(fh)
    return ReadoutModel(
        weights=np.array(payload["weights"]),
        threshold=payload["threshold"],
        window=WindowSpec(**payload["window"]),
        ridge_lambda=payload["ridge_lambda"],
        feature_shift=np.array(payload["feature_shift"]),
        feature_scale=np.array(payload["feature_scale"]),
        validation_ber=payload["validation_ber"],
        validation_ber_mean=payload["validation_ber_mean"],
        validation_ber_std=payload["validation_ber_std"],
        seed_info=payload.get("seed_info", ""),
    )
