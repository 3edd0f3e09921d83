"""RBF-kernel soft-margin SVM with an in-repo SMO solver.

Includes the gamma scaling rule, grid search over the C/gamma table,
chained two-stage models (valence|arousal in either direction), Russell
quadrant mapping, and the binary model container.

The solver minimises the standard C-SVC dual
    0.5 a'Qa - e'a   s.t. 0 <= a_i <= C, y'a = 0,  Q_ij = y_i y_j K_ij
by maximal-violating-pair selection with a second-order working-set rule.
Pair selection is a deterministic argmax, so training is reproducible
without a random source; the decision function is unique because RBF Gram
matrices of distinct points are positive definite.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, DataError
from .signals import Label

GAMMA_SCALE = "scale"

# hyperparameter search table
C_GRID = (1.0, 50.0, 100.0, 200.0, 300.0)
GAMMA_GRID = (0.00001, 0.001, 1.0, 50.0, 100.0)

# subject-dependent defaults
DEFAULT_C = 200.0

VALARO = "valaro"  # first stage predicts arousal, second predicts valence
AROVAL = "aroval"  # first stage predicts valence, second predicts arousal

MODEL_MAGIC = b"EWSVM1"

_SV_EPS = 1e-12
_GRAM_CACHE_LIMIT = 4000


class Quadrant(enum.Enum):
    HAPPY = "Happy"
    ANGRY = "Angry"
    SAD = "Sad"
    RELAXED = "Relaxed"


def quadrant_of(valence: Label, arousal: Label) -> Quadrant:
    """(valence, arousal) -> Russell quadrant."""
    table = {
        (Label.HIGH, Label.HIGH): Quadrant.HAPPY,
        (Label.LOW, Label.HIGH): Quadrant.ANGRY,
        (Label.LOW, Label.LOW): Quadrant.SAD,
        (Label.HIGH, Label.LOW): Quadrant.RELAXED,
    }
    return table[(valence, arousal)]


@dataclass(frozen=True)
class RbfParams:
    """C and gamma; gamma may be the literal "scale" until resolved."""

    C: float
    gamma: float | str = GAMMA_SCALE

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if self.gamma != GAMMA_SCALE and not (
                isinstance(self.gamma, (int, float)) and self.gamma > 0):
            raise ValueError(f"gamma must be positive or 'scale', "
                             f"got {self.gamma!r}")

    def resolve(self, X: np.ndarray) -> "RbfParams":
        if self.gamma == GAMMA_SCALE:
            return RbfParams(C=self.C, gamma=gamma_scale(X))
        return self


def rbf_kernel(x, y, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    return float(np.exp(-gamma * np.dot(diff, diff)))


def _rbf_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :]
          - 2.0 * (A @ B.T))
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def gamma_scale(X: np.ndarray) -> float:
    """1 / (n_features * pooled variance of all entries of X)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a (samples, features) matrix with >= 2 rows")
    var = float(X.var())
    if var == 0.0:
        raise ValueError("cannot scale gamma: training data has zero variance")
    return 1.0 / (X.shape[1] * var)


@dataclass(frozen=True)
class Standardization:
    """Per-feature affine transform fitted on training data only."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardization":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std == 0.0, 1.0, std)
        return cls(mean=mean, std=std)

    @classmethod
    def identity(cls, n_features: int) -> "Standardization":
        return cls(mean=np.zeros(n_features), std=np.ones(n_features))

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


@dataclass
class TrainedSvm:
    """Converged classifier; support vectors are stored standardized.

    decision(x) = sum_i dual_coeffs[i] * K(sv_i, standardize(x)) + bias,
    predicting High for values > 0 and Low otherwise (ties are Low).
    """

    support_vectors: np.ndarray  # (n_sv, d), standardized space
    dual_coeffs: np.ndarray      # alpha_i * y_i
    bias: float
    params: RbfParams            # gamma resolved
    standardization: Standardization
    sv_index: np.ndarray | None = None  # training-row indices (not persisted)

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def decision_values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"input has {X.shape[1]} features, model expects "
                f"{self.n_features}")
        Z = self.standardization.apply(X)
        K = _rbf_matrix(Z, self.support_vectors, self.params.gamma)
        return K @ self.dual_coeffs + self.bias


def predict(model: TrainedSvm, x) -> tuple[Label, float]:
    """Classify one vector; returns (label, raw decision value)."""
    dv = float(model.decision_values(np.asarray(x, dtype=np.float64)
                                     .reshape(1, -1))[0])
    return (Label.HIGH if dv > 0.0 else Label.LOW), dv


def labels_to_signs(labels) -> np.ndarray:
    return np.array([1.0 if lab is Label.HIGH else -1.0 for lab in labels])


class _Gram:
    """RBF Gram access; full matrix when small, per-column otherwise."""

    def __init__(self, X: np.ndarray, gamma: float):
        self.X = X
        self.gamma = gamma
        n = len(X)
        self.full = _rbf_matrix(X, X, gamma) if n <= _GRAM_CACHE_LIMIT else None
        self._cols: dict[int, np.ndarray] = {}

    def col(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[:, i]
        cached = self._cols.get(i)
        if cached is None:
            if len(self._cols) > 128:
                self._cols.clear()
            cached = _rbf_matrix(self.X, self.X[i:i + 1], self.gamma)[:, 0]
            self._cols[i] = cached
        return cached


def _solve_smo(K: _Gram, y: np.ndarray, C: float, tol: float,
               max_updates: int):
    n = len(y)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    pos = y > 0
    updates = 0
    # alphas within snap of a bound are set exactly on it, otherwise float
    # dust keeps dead points in the working set and selection stalls
    snap = 1e-12 * max(1.0, C)
    while True:
        if updates and updates % 2000 == 0 and K.full is not None:
            # refresh against incremental float drift
            grad = y * (K.full @ (alpha * y)) - 1.0
        v = -y * grad
        at_upper = alpha >= C
        at_lower = alpha <= 0.0
        up = np.where(pos, ~at_upper, ~at_lower)
        low = np.where(pos, ~at_lower, ~at_upper)
        v_up = np.where(up, v, -np.inf)
        v_low = np.where(low, v, np.inf)
        i = int(np.argmax(v_up))
        gap = v_up[i] - v_low.min()
        if gap <= tol:
            break
        if updates >= max_updates:
            raise ConvergenceError(
                f"SMO did not reach tolerance {tol} within {max_updates} "
                f"pair updates (remaining KKT gap {gap:.3e})",
                diagnostics={"gap": float(gap), "updates": updates,
                             "n_samples": n, "C": C})
        Ki = K.col(i)
        # second-order choice of j: largest decrease of the pair objective
        quad = np.maximum(2.0 - 2.0 * Ki, 1e-12)
        diff = v_up[i] - v
        score = np.where(low & (diff > 0.0), -(diff * diff) / quad, np.inf)
        j = int(np.argmin(score))
        Kj = K.col(j)
        eta = max(2.0 - 2.0 * float(Ki[j]), 1e-12)
        s = y[i] * y[j]
        if s < 0:
            lo_b = max(0.0, alpha[j] - alpha[i])
            hi_b = min(C, C + alpha[j] - alpha[i])
        else:
            lo_b = max(0.0, alpha[i] + alpha[j] - C)
            hi_b = min(C, alpha[i] + alpha[j])
        # (E_i - E_j) without bias equals v_j - v_i
        new_j = alpha[j] + y[j] * (v[j] - v[i]) / eta
        new_j = min(max(new_j, lo_b), hi_b)
        da_j = new_j - alpha[j]
        da_i = -s * da_j
        alpha[j] = new_j
        alpha[i] = min(max(alpha[i] + da_i, 0.0), C)
        for t in (i, j):
            if alpha[t] <= snap:
                alpha[t] = 0.0
            elif alpha[t] >= C - snap:
                alpha[t] = C
        grad += (y * (y[i] * da_i)) * Ki + (y * (y[j] * da_j)) * Kj
        updates += 1
    # bias: mean over free vectors, else midpoint of the feasible interval
    v = -y * grad
    free = (alpha > 0.0) & (alpha < C)
    if np.any(free):
        bias = float(v[free].mean())
    else:
        up_max = v[np.where(pos, alpha < C, alpha > 0.0)]
        low_min = v[np.where(pos, alpha > 0.0, alpha < C)]
        lo_v = up_max.max() if len(up_max) else -np.inf
        hi_v = low_min.min() if len(low_min) else np.inf
        if np.isfinite(lo_v) and np.isfinite(hi_v):
            bias = float((lo_v + hi_v) / 2.0)
        elif np.isfinite(lo_v):
            bias = float(lo_v)
        elif np.isfinite(hi_v):
            bias = float(hi_v)
        else:
            bias = 0.0
    return alpha, bias


def train_smo(X, y, params: RbfParams, tol: float = 1e-3,
              max_passes: int | None = None,
              standardize: bool = True) -> TrainedSvm:
    """Fit a soft-margin RBF classifier to KKT tolerance ``tol``.

    ``max_passes`` counts dataset sweeps; the solver budget is
    max_passes * n pair updates (default 10n sweeps). gamma = "scale" is
    resolved on the (standardized) training matrix before solving.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be (samples, features)")
    if not np.all(np.isfinite(X)):
        raise ValueError("training features must be finite")
    y_signs = labels_to_signs(y) if not isinstance(y, np.ndarray) else y
    y_signs = np.asarray(y_signs, dtype=np.float64)
    if len(y_signs) != len(X):
        raise ValueError(f"{len(X)} samples but {len(y_signs)} labels")
    if len(np.unique(y_signs)) < 2:
        raise ValueError("training data must contain both classes")
    scaler = (Standardization.fit(X) if standardize
              else Standardization.identity(X.shape[1]))
    Z = scaler.apply(X)
    resolved = params.resolve(Z)
    if max_passes is None:
        max_passes = 10 * len(X)
    gram = _Gram(Z, resolved.gamma)
    alpha, bias = _solve_smo(gram, y_signs, resolved.C, tol,
                             max_updates=max_passes * len(X))
    sv = alpha > _SV_EPS
    return TrainedSvm(support_vectors=Z[sv].copy(),
                      dual_coeffs=(alpha * y_signs)[sv],
                      bias=bias, params=resolved, standardization=scaler,
                      sv_index=np.flatnonzero(sv))


def kkt_residuals(model: TrainedSvm, X, y) -> np.ndarray:
    """Per-training-point KKT violation of a fitted model.

    Zero-alpha points must satisfy y*f >= 1, bound points y*f <= 1 and free
    ones y*f = 1; returns max(0, violation) for each point.
    """
    if model.sv_index is None:
        raise ValueError("model was loaded without training-row indices")
    X = np.asarray(X, dtype=np.float64)
    y_signs = labels_to_signs(y) if not isinstance(y, np.ndarray) else y
    f = model.decision_values(X)
    margins = y_signs * f
    alpha = np.zeros(len(X))
    alpha[model.sv_index] = np.abs(model.dual_coeffs)
    c_val = model.params.C
    res = np.zeros(len(X))
    lower = alpha <= _SV_EPS
    upper = alpha >= c_val - 1e-9
    free = ~lower & ~upper
    res[lower] = np.maximum(0.0, 1.0 - margins[lower])
    res[upper] = np.maximum(0.0, margins[upper] - 1.0)
    res[free] = np.abs(margins[free] - 1.0)
    return res


@dataclass
class GridCell:
    C: float
    gamma: float | str
    fold_accuracies: list[float]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))


def grid_search(X, y, c_values=C_GRID, gamma_values=GAMMA_GRID, k: int = 6,
                seed: int = 0, tol: float = 1e-3, standardize: bool = True):
    """Stratified k-fold accuracy for every (C, g) cell.

    Returns (best RbfParams, table); ties prefer smaller C, then smaller g.
    """
    from .evaluation import accuracy, stratified_kfold

    X = np.asarray(X, dtype=np.float64)
    y = list(y)
    plan = stratified_kfold(y, k, seed)
    table: list[GridCell] = []
    for c_val in c_values:
        for g in gamma_values:
            accs = []
            for fold in range(k):
                train_idx = plan.train_indices(fold)
                test_idx = plan.test_indices(fold)
                model = train_smo(X[train_idx],
                                  [y[t] for t in train_idx],
                                  RbfParams(C=c_val, gamma=g), tol=tol,
                                  standardize=standardize)
                dv = model.decision_values(X[test_idx])
                pred = [Label.HIGH if d > 0 else Label.LOW for d in dv]
                accs.append(accuracy(pred, [y[t] for t in test_idx]))
            table.append(GridCell(C=c_val, gamma=g, fold_accuracies=accs))

    best = select_best_cell(table)
    return RbfParams(C=best.C, gamma=best.gamma), table


def select_best_cell(table) -> GridCell:
    """Highest mean accuracy; ties prefer smaller C, then smaller gamma.

    The ranking depends only on accuracy ordering, so shifting every
    accuracy by a constant cannot change the selection.
    """
    def sort_key(cell: GridCell):
        g_key = np.inf if cell.gamma == GAMMA_SCALE else float(cell.gamma)
        return (-cell.mean_accuracy, cell.C, g_key)

    return min(table, key=sort_key)


@dataclass
class ChainedModel:
    """Two-stage classifier; the second stage sees the first stage's label
    as a trailing 0/1 feature."""

    direction: str  # VALARO or AROVAL
    first: TrainedSvm
    second: TrainedSvm

    def __post_init__(self):
        if self.direction not in (VALARO, AROVAL):
            raise ValueError(f"direction must be {VALARO!r} or {AROVAL!r}")
        if self.second.n_features != self.first.n_features + 1:
            raise ValueError(
                f"second stage expects {self.first.n_features + 1} features, "
                f"got {self.second.n_features}")


def _condition_column(labels) -> np.ndarray:
    return np.array([1.0 if lab is Label.HIGH else 0.0 for lab in labels])


def train_chained(X, y_val, y_aro, direction: str,
                  params: RbfParams | None = None, tol: float = 1e-3,
                  standardize: bool = True) -> ChainedModel:
    """Fit both stages; the second trains on ground-truth condition labels
    (teacher forcing) and only sees predictions at inference."""
    X = np.asarray(X, dtype=np.float64)
    y_val = list(y_val)
    y_aro = list(y_aro)
    if len(y_val) != len(X) or len(y_aro) != len(X):
        raise ValueError("label vectors must align with the sample count")
    if params is None:
        params = RbfParams(C=DEFAULT_C, gamma=GAMMA_SCALE)
    first_y, second_y = ((y_aro, y_val) if direction == VALARO
                         else (y_val, y_aro))
    if direction not in (VALARO, AROVAL):
        raise ValueError(f"direction must be {VALARO!r} or {AROVAL!r}")
    first = train_smo(X, first_y, params, tol=tol, standardize=standardize)
    X2 = np.hstack([X, _condition_column(first_y)[:, None]])
    second = train_smo(X2, second_y, params, tol=tol, standardize=standardize)
    return ChainedModel(direction=direction, first=first, second=second)


class ChainedPrediction(NamedTuple):
    valence: Label
    arousal: Label
    dv_valence: float
    dv_arousal: float


def predict_chained(model: ChainedModel, x) -> ChainedPrediction:
    """Run both stages; the condition feature is the first stage's
    predicted label encoded as exactly 0.0 or 1.0."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if len(x) != model.first.n_features:
        raise ValueError(
            f"input has {len(x)} features, chained model expects "
            f"{model.first.n_features}")
    first_label, first_dv = predict(model.first, x)
    x2 = np.append(x, 1.0 if first_label is Label.HIGH else 0.0)
    second_label, second_dv = predict(model.second, x2)
    if model.direction == VALARO:
        return ChainedPrediction(valence=second_label, arousal=first_label,
                                 dv_valence=second_dv, dv_arousal=first_dv)
    return ChainedPrediction(valence=first_label, arousal=second_label,
                             dv_valence=first_dv, dv_arousal=second_dv)


def save_model(model: TrainedSvm, path) -> None:
    """Write the EWSVM1 container: little-endian, float64 payloads."""
    n_sv, n_features = model.support_vectors.shape
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<II", n_features, n_sv))
        fh.write(struct.pack("<ddd", model.params.C, model.params.gamma,
                             model.bias))
        fh.write(model.standardization.mean.astype("<f8").tobytes())
        fh.write(model.standardization.std.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(model.support_vectors,
                                      dtype="<f8").tobytes())
        fh.write(model.dual_coeffs.astype("<f8").tobytes())


def load_model(path) -> TrainedSvm:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MODEL_MAGIC):
        raise DataError(
            f"{path}: bad magic {blob[:6]!r}, expected {MODEL_MAGIC!r} "
            f"(unknown format or version)")
    header = struct.calcsize("<II") + struct.calcsize("<ddd")
    if len(blob) < len(MODEL_MAGIC) + header:
        raise DataError(f"{path}: truncated header")
    off = len(MODEL_MAGIC)
    n_features, n_sv = struct.unpack_from("<II", blob, off)
    off += struct.calcsize("<II")
    c_val, gamma, bias = struct.unpack_from("<ddd", blob, off)
    off += struct.calcsize("<ddd")
    expected = off + 8 * (2 * n_features + n_sv * n_features + n_sv)
    if len(blob) != expected:
        raise DataError(
            f"{path}: payload size mismatch, expected {expected} bytes, "
            f"got {len(blob)}")

    def take(count):
        nonlocal off
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off).copy()
        off += 8 * count
        return arr

    mean = take(n_features)
    std = take(n_features)
    sv = take(n_sv * n_features).reshape(n_sv, n_features)
    duals = take(n_sv)
    return TrainedSvm(support_vectors=sv, dual_coeffs=duals, bias=bias,
                      params=RbfParams(C=c_val, gamma=gamma),
                      standardization=Standardization(mean=mean, std=std))
