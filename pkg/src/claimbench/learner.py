"""L2-regularized logistic regression and the downsampling majority ensemble.

The objective, with labels y in {+1, -1} and an unregularized bias b, is

    J(w, b) = sum_i log(1 + exp(-y_i (w.x_i + b))) + (lambda/2) ||w||^2

minimized by deterministic full-batch L-BFGS (no stochastic ordering
effects), stopping when the gradient max-norm drops below the configured
tolerance or the iteration cap is hit. Optional per-column standardization
(fitted on training data, identity on binary columns) is folded into the
linear algebra so the design matrix stays sparse:

    z = X (w/s) + (b - mu.(w/s))

The ensemble trains N members (default 20), each on its own seeded
downsample of the training data, and predicts by majority vote.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import minimize
from scipy.special import expit

from .corpus import SentenceLabel, downsample_indices
from .features import SparseVector, vectors_to_csr
from .util import derive_seed

DEFAULT_ENSEMBLE_SIZE = 20


class LearnerError(ValueError):
    pass


class FingerprintMismatch(LearnerError):
    """Model was trained against a different feature space."""


@dataclass(frozen=True)
class TrainConfig:
    l2_lambda: float = 1.0
    max_iterations: int = 1000
    gradient_tolerance: float = 1e-6
    seed: int = 0
    standardize: bool = True

    def __post_init__(self):
        if self.l2_lambda < 0:
            raise LearnerError(f"l2_lambda must be nonnegative, got {self.l2_lambda}")
        if self.gradient_tolerance <= 0:
            raise LearnerError("gradient_tolerance must be positive")


@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray
    scale: np.ndarray


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    space_fingerprint: str = ""
    standardization: Standardization | None = None
    converged: bool = True
    n_iterations: int = 0

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class EnsembleModel:
    members: tuple[LinearModel, ...]
    member_seeds: tuple[int, ...]

    def __post_init__(self):
        if not self.members:
            raise LearnerError("ensemble must contain at least one member")
        prints = {m.space_fingerprint for m in self.members}
        if len(prints) > 1:
            raise FingerprintMismatch("ensemble members were trained on different feature spaces")

    @property
    def space_fingerprint(self) -> str:
        return self.members[0].space_fingerprint


def _as_csr(X, dim: int | None) -> sparse.csr_matrix:
    if sparse.issparse(X):
        return X.tocsr()
    if dim is None:
        dim = max((v.max_index() for v in X), default=-1) + 1
    return vectors_to_csr(X, dim)


def _labels_to_signs(labels: Sequence[SentenceLabel]) -> np.ndarray:
    return np.array([1.0 if lab is SentenceLabel.CLAIM else -1.0 for lab in labels])


def detect_binary_columns(X: sparse.csr_matrix) -> np.ndarray:
    """True for columns whose stored values are all exactly 1 (indicators)."""
    mask = np.ones(X.shape[1], dtype=bool)
    coo = X.tocoo()
    nonbinary = coo.col[coo.data != 1.0]
    mask[np.unique(nonbinary)] = False
    return mask


def fit_standardization(X: sparse.csr_matrix, real_columns: np.ndarray | None = None) -> Standardization:
    """Mean/scale per column; identity on binary and on constant columns."""
    n, d = X.shape
    if real_columns is None:
        real_columns = ~detect_binary_columns(X)
    mean = np.zeros(d)
    scale = np.ones(d)
    col_mean = np.asarray(X.mean(axis=0)).ravel()
    col_sqmean = np.asarray(X.multiply(X).mean(axis=0)).ravel()
    var = np.maximum(col_sqmean - col_mean**2, 0.0)
    std = np.sqrt(var)
    apply = real_columns & (std > 1e-12)
    mean[apply] = col_mean[apply]
    scale[apply] = std[apply]
    return Standardization(mean=mean, scale=scale)


def logreg_objective(
    params: np.ndarray,
    X: sparse.csr_matrix,
    y: np.ndarray,
    l2_lambda: float,
    standardization: Standardization | None = None,
) -> tuple[float, np.ndarray]:
    """Objective value and analytic gradient at params = [w, b]."""
    d = X.shape[1]
    w, b = params[:d], params[d]
    if standardization is not None:
        u = w / standardization.scale
        offset = b - float(standardization.mean @ u)
    else:
        u = w
        offset = b
    z = X @ u + offset
    m = -y * z
    value = float(np.logaddexp(0.0, m).sum()) + 0.5 * l2_lambda * float(w @ w)

    r = -y * expit(m)  # dJ/dz_i
    g_u = X.T @ r
    if standardization is not None:
        g_u = (g_u - r.sum() * standardization.mean) / standardization.scale
    grad = np.empty(d + 1)
    grad[:d] = g_u + l2_lambda * w
    grad[d] = r.sum()
    return value, grad


def train_logreg(
    X,
    labels: Sequence[SentenceLabel],
    config: TrainConfig,
    dim: int | None = None,
    real_columns: np.ndarray | None = None,
    space_fingerprint: str = "",
    initial: np.ndarray | None = None,
) -> LinearModel:
    """Train a single model by deterministic full-batch quasi-Newton descent.

    ``X`` may be a list of :class:`SparseVector` or a prebuilt CSR matrix.
    ``real_columns`` marks columns eligible for standardization (taken from
    the feature space); when omitted, binary columns are detected from data.
    """
    Xc = _as_csr(X, dim)
    if Xc.shape[0] == 0 or Xc.shape[0] != len(labels):
        raise LearnerError(f"need equal non-empty instances and labels, got {Xc.shape[0]} and {len(labels)}")
    y = _labels_to_signs(labels)
    if len(set(labels)) < 2:
        raise LearnerError("training data contains a single class")
    if not np.all(np.isfinite(Xc.data)):
        raise LearnerError("non-finite feature values in training data")

    standardization = fit_standardization(Xc, real_columns) if config.standardize else None
    d = Xc.shape[1]
    x0 = np.zeros(d + 1) if initial is None else np.asarray(initial, dtype=np.float64)
    if x0.shape != (d + 1,):
        raise LearnerError(f"initial point must have shape ({d + 1},)")

    result = minimize(
        logreg_objective,
        x0,
        args=(Xc, y, config.l2_lambda, standardization),
        jac=True,
        method="L-BFGS-B",
        options={
            "maxiter": config.max_iterations,
            "maxfun": max(15000, 20 * config.max_iterations),
            "gtol": config.gradient_tolerance,
            "ftol": 1e-14,
        },
    )
    params = result.x
    if not np.all(np.isfinite(params)):
        raise LearnerError("optimizer produced non-finite parameters")
    return LinearModel(
        weights=params[:d],
        bias=float(params[d]),
        space_fingerprint=space_fingerprint,
        standardization=standardization,
        converged=bool(result.success),
        n_iterations=int(result.nit),
    )


def decision_values(model: LinearModel, X: sparse.csr_matrix) -> np.ndarray:
    if X.shape[1] != model.dim:
        raise LearnerError(f"dimension mismatch: model has {model.dim} columns, input has {X.shape[1]}")
    st = model.standardization
    if st is not None:
        u = model.weights / st.scale
        offset = model.bias - float(st.mean @ u)
    else:
        u = model.weights
        offset = model.bias
    return X @ u + offset


def predict_batch(model: LinearModel, X: sparse.csr_matrix) -> tuple[np.ndarray, list[SentenceLabel]]:
    probs = expit(decision_values(model, X))
    labels = [SentenceLabel.CLAIM if p >= 0.5 else SentenceLabel.NON_CLAIM for p in probs]
    return probs, labels


def predict(model: LinearModel, x: SparseVector) -> tuple[float, SentenceLabel]:
    """Claim probability and thresholded label (claim iff p >= 0.5)."""
    if x.max_index() >= model.dim:
        raise LearnerError(f"vector index {x.max_index()} out of range for model dimension {model.dim}")
    X = vectors_to_csr([x], model.dim)
    probs, labels = predict_batch(model, X)
    return float(probs[0]), labels[0]


def train_ensemble(
    X,
    labels: Sequence[SentenceLabel],
    config: TrainConfig,
    n_members: int = DEFAULT_ENSEMBLE_SIZE,
    dim: int | None = None,
    real_columns: np.ndarray | None = None,
    space_fingerprint: str = "",
) -> EnsembleModel:
    """Train ``n_members`` models, each on its own seeded 1:1 downsample."""
    if n_members < 1:
        raise LearnerError(f"n_members must be >= 1, got {n_members}")
    Xc = _as_csr(X, dim)
    labels = list(labels)
    if len(set(labels)) < 2:
        raise LearnerError("training data contains a single class")
    member_seeds = tuple(derive_seed(config.seed, i) for i in range(n_members))
    members = []
    for seed in member_seeds:
        kept = downsample_indices(labels, seed)
        members.append(
            train_logreg(
                Xc[kept],
                [labels[i] for i in kept],
                config,
                real_columns=real_columns,
                space_fingerprint=space_fingerprint,
            )
        )
    return EnsembleModel(members=tuple(members), member_seeds=member_seeds)


def majority_vote(member_claim: np.ndarray, member_probs: np.ndarray) -> SentenceLabel:
    """Strict majority; even-split ties fall back to the probability mass.

    A residual exact tie (vote tie and probability sum exactly n/2) resolves
    to CLAIM so the rule is total and deterministic.
    """
    n = member_claim.shape[0]
    votes = int(member_claim.sum())
    if 2 * votes > n:
        return SentenceLabel.CLAIM
    if 2 * votes < n:
        return SentenceLabel.NON_CLAIM
    swing = float(member_probs.sum()) - n / 2.0
    return SentenceLabel.NON_CLAIM if swing < 0 else SentenceLabel.CLAIM


def predict_ensemble_batch(ensemble: EnsembleModel, X: sparse.csr_matrix) -> list[SentenceLabel]:
    prob_rows = np.vstack([expit(decision_values(m, X)) for m in ensemble.members])
    claim_rows = prob_rows >= 0.5
    return [majority_vote(claim_rows[:, j], prob_rows[:, j]) for j in range(X.shape[0])]


def predict_ensemble(ensemble: EnsembleModel, x: SparseVector) -> SentenceLabel:
    if x.max_index() >= ensemble.members[0].dim:
        raise LearnerError(
            f"vector index {x.max_index()} out of range for model dimension {ensemble.members[0].dim}"
        )
    X = vectors_to_csr([x], ensemble.members[0].dim)
    return predict_ensemble_batch(ensemble, X)[0]


def ensure_space_fingerprint(model: LinearModel | EnsembleModel, space_fingerprint: str) -> None:
    """Refuse to pair a model with a feature space it was not trained on."""
    if model.space_fingerprint and model.space_fingerprint != space_fingerprint:
        raise FingerprintMismatch(
            f"model fingerprint {model.space_fingerprint[:12]}... does not match "
            f"feature space {space_fingerprint[:12]}..."
        )


# ---------------------------------------------------------------------------
# Serialization (versioned JSON container)
# ---------------------------------------------------------------------------

_FORMAT_VERSION = 1


def _model_to_dict(model: LinearModel) -> dict:
    out = {
        "weights": model.weights.tolist(),
        "bias": model.bias,
        "space_fingerprint": model.space_fingerprint,
        "converged": model.converged,
        "n_iterations": model.n_iterations,
    }
    if model.standardization is not None:
        out["standardization"] = {
            "mean": model.standardization.mean.tolist(),
            "scale": model.standardization.scale.tolist(),
        }
    return out


def _model_from_dict(obj: dict) -> LinearModel:
    st = None
    if "standardization" in obj:
        st = Standardization(
            mean=np.array(obj["standardization"]["mean"], dtype=np.float64),
            scale=np.array(obj["standardization"]["scale"], dtype=np.float64),
        )
    return LinearModel(
        weights=np.array(obj["weights"], dtype=np.float64),
        bias=float(obj["bias"]),
        space_fingerprint=obj.get("space_fingerprint", ""),
        standardization=st,
        converged=bool(obj.get("converged", True)),
        n_iterations=int(obj.get("n_iterations", 0)),
    )


def save_ensemble(ensemble: EnsembleModel, path: str | Path) -> None:
    payload = {
        "format_version": _FORMAT_VERSION,
        "member_seeds": list(ensemble.member_seeds),
        "members": [_model_to_dict(m) for m in ensemble.members],
    }
    Path(path).write_text(json.dumps(payload) + "\n", encoding="utf-8")


def load_ensemble(path: str | Path) -> EnsembleModel:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    version = obj.get("format_version")
    if version != _FORMAT_VERSION:
        raise LearnerError(f"unsupported model container version: {version}")
    return EnsembleModel(
        members=tuple(_model_from_dict(m) for m in obj["members"]),
        member_seeds=tuple(int(s) for s in obj["member_seeds"]),
    )
