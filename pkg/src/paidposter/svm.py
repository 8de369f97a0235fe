"""Binary C-SVC with an RBF kernel, trained by sequential minimal optimization.

Labels are +1 (paid) and -1 (normal). The solver works on the dual

    max  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0

keeping ``score = -y * G`` up to date, where ``G = Q a - 1`` is the gradient
of the minimization form and ``Q_ij = y_i y_j K_ij``. Each step picks the maximal violating pair and solves the two-variable
subproblem analytically.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import NORMAL, PAID

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
N_FEATURES = 5
# curvature floor for pairs with non-positive eta (duplicate points)
TAU = 1e-12


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TrainConfig:
    c: float = 1.0
    gamma: float | None = None  # None -> 1 / number of selected features
    kkt_tol: float = 1e-3
    max_passes: int = 10_000
    folds: int = 10
    seed: int = 0
    grid: tuple[tuple[float, float], ...] | None = None
    feature_mask: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self):
        object.__setattr__(self, "feature_mask", tuple(sorted(set(self.feature_mask))))
        if not self.feature_mask:
            raise ValueError("feature_mask must not be empty")
        if self.c <= 0 or (self.gamma is not None and self.gamma < 0):
            raise ValueError("c must be positive and gamma non-negative")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.kkt_tol <= 0 or self.max_passes < 1:
            raise ValueError("kkt_tol and max_passes must be positive")
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple((float(c), float(g)) for c, g in self.grid))

    @property
    def effective_gamma(self) -> float:
        return self.gamma if self.gamma is not None else 1.0 / len(self.feature_mask)


@dataclass(frozen=True)
class ScalingParams:
    mins: tuple[float, ...]
    maxs: tuple[float, ...]

    def __post_init__(self):
        if any(hi < lo for lo, hi in zip(self.mins, self.maxs)):
            raise ValueError("scaling max below min")

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.mins)
        span = np.asarray(self.maxs) - lo
        safe = np.where(span > 0, span, 1.0)
        # constant training features scale to 0 everywhere
        return np.where(span > 0, (x - lo) / safe, 0.0)


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray  # scaled, shape (n_sv, n_selected)
    dual_coefs: np.ndarray  # alpha_i * y_i
    bias: float
    gamma: float
    c: float
    scaling: ScalingParams
    feature_mask: tuple[int, ...]
    converged: bool = True
    iterations: int = 0

    def decision_value(self, v) -> float:
        """Decision value for one raw (unscaled) vector of selected features."""
        z = self.scaling.transform(_as_row(v, len(self.feature_mask)))
        d2 = np.sum((self.support_vectors - z) ** 2, axis=1)
        return float(self.dual_coefs @ np.exp(-self.gamma * d2) + self.bias)

    def decision_values(self, X) -> np.ndarray:
        X = self.scaling.transform(np.asarray(X, dtype=float))
        return rbf_matrix(X, self.support_vectors, self.gamma) @ self.dual_coefs + self.bias


@dataclass
class TrainState:
    """Everything the solver ended with, kept for diagnostics and tests."""

    alpha: np.ndarray
    y: np.ndarray
    X: np.ndarray  # scaled training data
    bias: float
    iterations: int
    converged: bool
    objective_trace: list[float] = field(default_factory=list)


def _as_row(v, dim: int) -> np.ndarray:
    if hasattr(v, "as_list"):
        v = v.as_list()
    arr = np.asarray(v, dtype=float)
    if arr.shape != (dim,):
        raise ValueError(f"expected a vector of {dim} features, got shape {arr.shape}")
    return arr


def scale_fit(vectors, mask: Sequence[int] | None = None) -> ScalingParams:
    """Per-feature min/max over the training vectors (after masking)."""
    X = _matrix(vectors, mask)
    if len(X) == 0:
        raise ValueError("scale_fit needs at least one vector")
    return ScalingParams(tuple(X.min(axis=0).tolist()), tuple(X.max(axis=0).tolist()))


def _matrix(vectors, mask: Sequence[int] | None = None) -> np.ndarray:
    rows = [v.as_list() if hasattr(v, "as_list") else list(v) for v in vectors]
    X = np.asarray(rows, dtype=float)
    if X.ndim == 1:
        X = X.reshape(len(rows), -1)
    if mask is not None:
        X = X[:, list(mask)]
    return X


def kernel(x, z, gamma: float) -> float:
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {z.shape}")
    d = x - z
    return math.exp(-gamma * float(d @ d))


def rbf_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def dual_objective(alpha, y, K) -> float:
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ K @ ay)


def _labels_to_sign(labels) -> np.ndarray:
    out = []
    for lab in labels:
        if lab in (PAID, 1, 1.0, True):
            out.append(1.0)
        elif lab in (NORMAL, -1, -1.0, 0, False):
            out.append(-1.0)
        else:
            raise ValueError(f"unknown label {lab!r}")
    return np.asarray(out, dtype=float)


class _KernelRows:
    """Lazily computed, cached rows of the training kernel matrix."""

    def __init__(self, X: np.ndarray, gamma: float, full_limit: int = 2500):
        self.X = X
        self.gamma = gamma
        self.sq = np.sum(X * X, axis=1)
        self.full = rbf_matrix(X, X, gamma) if len(X) <= full_limit else None
        self.cache: dict[int, np.ndarray] = {}

    def row(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        r = self.cache.get(i)
        if r is None:
            d2 = self.sq + self.sq[i] - 2.0 * (self.X @ self.X[i])
            np.maximum(d2, 0.0, out=d2)
            r = np.exp(-self.gamma * d2)
            self.cache[i] = r
        return r


def solve_smo(
    X: np.ndarray,
    y: np.ndarray,
    c: float,
    gamma: float,
    kkt_tol: float = 1e-3,
    max_iter: int | None = None,
    seed: int = 0,
    trace: bool = False,
) -> TrainState:
    """Solve the C-SVC dual on already-scaled data."""
    n = len(y)
    max_iter = max_iter if max_iter is not None else 10_000 * max(n, 1)
    rng = np.random.default_rng(seed)
    Kr = _KernelRows(X, gamma)
    alpha = np.zeros(n)
    pos = y > 0
    objective = 0.0
    objective_trace = [0.0] if trace else []

    # score_t = -y_t G_t; the maximal violating pair is argmax over I_up, argmin over I_low
    score = y.copy()
    up = pos.copy()  # alpha < C for y=+1, alpha > 0 for y=-1
    low = ~pos
    converged = False
    it = 0
    s_up = np.empty(n)
    s_low = np.empty(n)
    while it < max_iter:
        s_up.fill(-np.inf)
        s_low.fill(np.inf)
        np.copyto(s_up, score, where=up)
        np.copyto(s_low, score, where=low)
        i = int(s_up.argmax())
        j = int(s_low.argmin())
        # an empty I_up or I_low gives -inf here and ends the loop too
        if s_up[i] - s_low[j] <= kkt_tol:
            converged = True
            break

        step = _pair_step(i, j, alpha, y, score, Kr, c)
        if step is None:
            # no progress on the greedy pair: try a seeded random violator
            cand = np.flatnonzero(low & (score < s_up[i] - kkt_tol))
            cand = cand[cand != i]
            rng.shuffle(cand)
            for j in cand:
                step = _pair_step(i, int(j), alpha, y, score, Kr, c)
                if step is not None:
                    j = int(j)
                    break
            if step is None:
                logger.warning("SMO stalled at iteration %d", it)
                break
        for t in (i, j):
            up[t] = alpha[t] < c if pos[t] else alpha[t] > 0
            low[t] = alpha[t] > 0 if pos[t] else alpha[t] < c
        it += 1
        if trace:
            objective += step
            objective_trace.append(objective)

    if not converged:
        warnings.warn(f"SMO stopped after {it} iterations without meeting kkt_tol={kkt_tol}", ConvergenceWarning)

    bias = _bias(alpha, y, -y * score, c)
    return TrainState(alpha, y, X, bias, it, converged, objective_trace)


def _pair_step(i, j, alpha, y, score, Kr, c) -> float | None:
    """Optimize alpha_i, alpha_j jointly; update alpha and score in place.

    Returns the objective gain, or None if neither multiplier moved.
    """
    Ki = Kr.row(i)
    Kj = Kr.row(j)
    yi, yj = float(y[i]), float(y[j])
    ai, aj = float(alpha[i]), float(alpha[j])
    kii, kjj, kij = float(Ki[i]), float(Kj[j]), float(Ki[j])
    eta = kii + kjj - 2.0 * kij
    if eta <= 0:
        eta = TAU
    # E_t = f(x_t) - y_t without bias = -score_t
    si, sj = float(score[i]), float(score[j])
    Ei, Ej = -si, -sj
    if yi != yj:
        lo, hi = max(0.0, aj - ai), min(c, c + aj - ai)
    else:
        lo, hi = max(0.0, ai + aj - c), min(c, ai + aj)
    if hi - lo <= 0:
        return None
    aj_new = aj + yj * (Ei - Ej) / eta
    aj_new = min(max(aj_new, lo), hi)
    ai_new = ai + yi * yj * (aj - aj_new)
    # snap to the box so bound membership is exact
    ai_new = _snap(ai_new, c)
    aj_new = _snap(aj_new, c)
    dai, daj = ai_new - ai, aj_new - aj
    if dai == 0.0 and daj == 0.0:
        return None
    # gradient of the dual objective is y * score
    gain = (dai * yi * si + daj * yj * sj) - 0.5 * (
        dai * dai * kii + daj * daj * kjj + 2.0 * dai * daj * yi * yj * kij
    )
    alpha[i], alpha[j] = ai_new, aj_new
    score -= (yi * dai) * Ki + (yj * daj) * Kj
    return float(gain)


def _snap(a: float, c: float) -> float:
    if a <= 1e-12 * c:
        return 0.0
    if a >= c * (1 - 1e-12):
        return c
    return a


def _bias(alpha, y, G, c) -> float:
    E = y * G  # f(x) - y without bias
    free = (alpha > 0) & (alpha < c)
    if free.any():
        return float(-np.mean(E[free]))
    pos = y > 0
    up = np.where(pos, alpha < c, alpha > 0)
    low = np.where(pos, alpha > 0, alpha < c)
    score = -E
    m_up = score[up].max() if up.any() else score[low].min()
    m_low = score[low].min() if low.any() else score[up].max()
    # any bias in [m_up - tol, m_low + tol] meets the KKT test; take the middle
    return float((m_up + m_low) / 2.0)


def _check_finite(X: np.ndarray):
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature value in training data")


def train(data, labels, cfg: TrainConfig | None = None, *, return_state: bool = False):
    """Fit scaling and the SVM on labelled feature vectors.

    ``data`` holds full five-feature vectors (FeatureVector or sequences);
    ``cfg.feature_mask`` picks the columns used.
    """
    cfg = cfg or TrainConfig()
    X_raw = _matrix(data, cfg.feature_mask)
    y = _labels_to_sign(labels)
    if len(y) != len(X_raw):
        raise ValueError("data and labels differ in length")
    if len(y) < 2 or len(set(y.tolist())) < 2:
        raise ValueError("training needs at least one example of each class")
    _check_finite(X_raw)
    scaling = scale_fit(X_raw)
    X = scaling.transform(X_raw)
    gamma = cfg.effective_gamma
    state = solve_smo(
        X, y, cfg.c, gamma, cfg.kkt_tol,
        max_iter=cfg.max_passes * len(y), seed=cfg.seed, trace=return_state,
    )
    sv = state.alpha > 0
    model = SvmModel(
        support_vectors=X[sv].copy(),
        dual_coefs=(state.alpha * y)[sv].copy(),
        bias=state.bias,
        gamma=gamma,
        c=cfg.c,
        scaling=scaling,
        feature_mask=cfg.feature_mask,
        converged=state.converged,
        iterations=state.iterations,
    )
    logger.info(
        "trained on %d vectors: %d support vectors, %d iterations, converged=%s",
        len(y), int(sv.sum()), state.iterations, state.converged,
    )
    return (model, state) if return_state else model


def _select(model: SvmModel, v) -> np.ndarray:
    arr = np.asarray(v.as_list() if hasattr(v, "as_list") else v, dtype=float)
    if arr.shape == (len(model.feature_mask),):
        return arr
    if arr.shape == (N_FEATURES,):
        return arr[list(model.feature_mask)]
    raise ValueError(f"vector of shape {arr.shape} does not fit feature mask {model.feature_mask}")


def predict(model: SvmModel, v) -> tuple[str, float]:
    """Classify one vector; a decision value of exactly 0 counts as normal."""
    d = model.decision_value(_select(model, v))
    return (PAID if d > 0 else NORMAL), d


def predict_many(model: SvmModel, vectors) -> list[tuple[str, float]]:
    if not len(vectors):
        return []
    X = np.asarray([_select(model, v) for v in vectors])
    return [((PAID if d > 0 else NORMAL), float(d)) for d in model.decision_values(X)]


# --------------------------------------------------------------------------
# cross-validation


def stratified_folds(labels, k: int, seed: int) -> list[np.ndarray]:
    """Split indices into ``k`` folds preserving the class mix.

    Each class is shuffled with a generator seeded by ``seed`` and dealt
    round-robin; the dealing offset carries over between classes so fold
    sizes differ by at most one.
    """
    y = _labels_to_sign(labels)
    minority = min(int((y > 0).sum()), int((y < 0).sum()))
    if k > minority:
        raise ValueError(f"{k} folds but the smaller class has only {minority} members")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for cls in (1.0, -1.0):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        for n, i in enumerate(idx):
            folds[(offset + n) % k].append(int(i))
        offset = (offset + len(idx)) % k
    return [np.asarray(sorted(f), dtype=int) for f in folds]


@dataclass(frozen=True)
class CVResult:
    scores: dict[tuple[float, float], float]
    best: tuple[float, float]
    folds: tuple[tuple[int, ...], ...]

    @property
    def best_accuracy(self) -> float:
        return self.scores[self.best]


def cross_validate(data, labels, cfg: TrainConfig | None = None) -> CVResult:
    """Mean held-out accuracy for each (C, gamma) candidate."""
    cfg = cfg or TrainConfig()
    vectors = list(data)
    labels = list(labels)
    if len(vectors) < cfg.folds:
        raise ValueError("fewer vectors than folds")
    y = _labels_to_sign(labels)
    folds = stratified_folds(labels, cfg.folds, cfg.seed)
    grid = cfg.grid or ((cfg.c, cfg.effective_gamma),)
    scores: dict[tuple[float, float], float] = {}
    X = _matrix(vectors)
    for c, g in grid:
        accs = []
        for f, test_idx in enumerate(folds):
            mask = np.ones(len(y), dtype=bool)
            mask[test_idx] = False
            fold_cfg = replace(cfg, c=c, gamma=g, grid=None, seed=cfg.seed + f)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                model = train(X[mask], y[mask], fold_cfg)
            pred = model.decision_values(X[test_idx][:, list(cfg.feature_mask)])
            pred_sign = np.where(pred > 0, 1.0, -1.0)
            accs.append(float(np.mean(pred_sign == y[test_idx])))
        scores[(c, g)] = float(np.mean(accs))
        logger.info("cv C=%g gamma=%g accuracy=%.4f", c, g, scores[(c, g)])
    best = max(scores, key=lambda cg: (scores[cg], -cg[0], -cg[1]))
    return CVResult(scores, best, tuple(tuple(f.tolist()) for f in folds))


# --------------------------------------------------------------------------
# persistence


def save(model: SvmModel, path: str | Path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "kernel": "rbf",
        "feature_mask": list(model.feature_mask),
        "gamma": model.gamma,
        "c": model.c,
        "scaling_min": list(model.scaling.mins),
        "scaling_max": list(model.scaling.maxs),
        "support_vectors": model.support_vectors.tolist(),
        "dual_coefs": model.dual_coefs.tolist(),
        "bias": model.bias,
        "converged": model.converged,
        "iterations": model.iterations,
        "labels": {"+1": PAID, "-1": NORMAL},
    }
    # json writes floats with repr(), which round-trips every double exactly
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


class ModelFormatError(ValueError):
    pass


def load(path: str | Path) -> SvmModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: not a model file ({exc})") from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise ModelFormatError(f"{path}: missing format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format_version {doc['format_version']!r}")
    try:
        mask = tuple(int(i) for i in doc["feature_mask"])
        sv = np.asarray(doc["support_vectors"], dtype=float).reshape(-1, len(mask))
        coefs = np.asarray(doc["dual_coefs"], dtype=float)
        if len(coefs) != len(sv) or len(sv) == 0:
            raise ValueError("support vector / coefficient count mismatch")
        return SvmModel(
            support_vectors=sv,
            dual_coefs=coefs,
            bias=float(doc["bias"]),
            gamma=float(doc["gamma"]),
            c=float(doc["c"]),
            scaling=ScalingParams(tuple(map(float, doc["scaling_min"])), tuple(map(float, doc["scaling_max"]))),
            feature_mask=mask,
            converged=bool(doc.get("converged", True)),
            iterations=int(doc.get("iterations", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: corrupt model ({exc})") from None
