"""Surrogate utility learned from DM rankings (pairwise rank SVM).

Ordered pairs (better, worse) are formed only within each interaction's
ranking; rank numbers from different interactions are never compared.
The model is a maximum-margin classifier on standardized pair
differences.  The linear kernel is the default; scores are ``w . x`` so
lower means preferred, matching the minimization convention everywhere
else.  A fitted model is immutable and pinned to the active mask it was
trained under.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.svm import SVC

from .core import InsufficientDataError, SnapshotMismatchError, as_mask


@dataclass(frozen=True)
class LearnParams:
    C: float = 1.0
    tol: float = 1e-6
    max_iter: int = 10_000
    kernel: str = "linear"  # "linear" | "rbf"
    gamma: float | None = None  # rbf only; None -> 1 / n_features


def ranked_pairs(ranks, groups=None) -> list[tuple[int, int]]:
    """All (better, worse) index pairs implied by the rankings.

    ``groups[k]`` names the interaction sample ``k`` came from; pairs are
    formed only between samples of the same group.  Ties yield no pair.
    """
    r = np.asarray(ranks)
    g = np.zeros(r.shape[0], dtype=np.int64) if groups is None else np.asarray(groups)
    pairs = []
    for i in range(r.shape[0]):
        for j in range(r.shape[0]):
            if i != j and g[i] == g[j] and r[i] < r[j]:
                pairs.append((i, j))
    return pairs


@dataclass
class UtilityModel:
    """Fitted ranking surrogate over the snapshot's active objectives."""

    mask_snapshot: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    kernel: str
    weights: np.ndarray | None  # linear kernel
    support_better: np.ndarray | None = None  # rbf kernel
    support_worse: np.ndarray | None = None
    dual_coef: np.ndarray | None = None
    gamma: float = 1.0
    is_constant: bool = False
    training_set_size: int = 0
    training_pair_count: int = 0
    training_pair_accuracy: float = 1.0

    @property
    def n_active(self) -> int:
        return int(self.mask_snapshot.sum())

    def project(self, F) -> np.ndarray:
        """Slice full-width objective rows down to the snapshot's active columns."""
        F = np.atleast_2d(np.asarray(F, dtype=float))
        if F.shape[1] != self.mask_snapshot.shape[0]:
            raise SnapshotMismatchError(
                f"expected {self.mask_snapshot.shape[0]} potential objectives, got {F.shape[1]}"
            )
        return F[:, self.mask_snapshot == 1]

    def _standardize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale

    def predict(self, f_active) -> np.ndarray:
        """Scores for projected vectors; lower = preferred."""
        X = np.atleast_2d(np.asarray(f_active, dtype=float))
        if X.shape[1] != self.n_active:
            raise SnapshotMismatchError(
                f"model was trained on {self.n_active} active objectives, got {X.shape[1]}"
            )
        if self.is_constant:
            return np.zeros(X.shape[0])
        Xs = self._standardize(X)
        if self.kernel == "linear":
            return Xs @ self.weights
        kb = _rbf(Xs, self.support_better, self.gamma)
        kw = _rbf(Xs, self.support_worse, self.gamma)
        return (kb - kw) @ self.dual_coef


def _rbf(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-gamma * d2)


def predict_score(model: UtilityModel, f_active) -> np.ndarray:
    return model.predict(f_active)


def fit_utility(T, r, d, groups=None, params: LearnParams = LearnParams()) -> UtilityModel:
    """Fit the ranking surrogate on full-width samples ``T`` with ranks ``r``.

    Samples are projected to the active objectives of ``d`` before
    fitting and standardized internally, so the induced order is invariant
    to positive rescaling of the training objectives.  When every rank is
    tied (no ordered pairs) the model is constant and flagged as such.
    """
    F = np.atleast_2d(np.asarray(T, dtype=float))
    if F.shape[0] < 2:
        raise InsufficientDataError("need at least 2 ranked samples")
    ranks = np.asarray(r)
    if ranks.shape[0] != F.shape[0]:
        raise InsufficientDataError("ranks must align with samples")
    mask = as_mask(d, F.shape[1])
    X = F[:, mask == 1]

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std > 0, std, 1.0)  # zero-variance columns end up all-zero
    Xs = (X - mean) / scale

    pairs = ranked_pairs(ranks, groups)
    model = UtilityModel(
        mask_snapshot=mask.copy(),
        mean=mean,
        scale=scale,
        kernel=params.kernel,
        weights=np.zeros(X.shape[1]),
        training_set_size=F.shape[0],
        training_pair_count=len(pairs),
    )
    if not pairs:
        model.is_constant = True
        return model

    better = np.array([p[0] for p in pairs])
    worse = np.array([p[1] for p in pairs])
    diffs = Xs[better] - Xs[worse]
    # Both orientations: score(better) - score(worse) should be negative.
    Z = np.vstack([diffs, -diffs])
    y = np.concatenate([-np.ones(len(pairs)), np.ones(len(pairs))])

    if params.kernel == "linear":
        svc = SVC(kernel="linear", C=params.C, tol=params.tol, max_iter=params.max_iter)
        with warnings.catch_warnings():
            # max_iter is a deliberate budget; hitting it is not an error
            warnings.simplefilter("ignore", ConvergenceWarning)
            svc.fit(Z, y)
        model.weights = svc.coef_[0].copy()
        if np.max(np.abs(model.weights)) < 1e-12:
            model.is_constant = True
    elif params.kernel == "rbf":
        gamma = params.gamma if params.gamma is not None else 1.0 / X.shape[1]
        sb = np.vstack([Xs[better], Xs[worse]])
        sw = np.vstack([Xs[worse], Xs[better]])
        # Kernel between implicit pair differences phi(b)-phi(w).
        Q = _rbf(sb, sb, gamma) - _rbf(sb, sw, gamma) - _rbf(sw, sb, gamma) + _rbf(sw, sw, gamma)
        svc = SVC(kernel="precomputed", C=params.C, tol=params.tol, max_iter=params.max_iter)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            svc.fit(Q, y)
        sv = svc.support_
        model.kernel = "rbf"
        model.weights = None
        model.gamma = gamma
        model.support_better = sb[sv]
        model.support_worse = sw[sv]
        model.dual_coef = svc.dual_coef_[0].copy()
    else:
        raise ValueError(f"unknown kernel {params.kernel!r}")

    scores = model.predict(X)
    if params.kernel == "rbf" and scores.max() - scores.min() < 1e-12:
        model.is_constant = True
    model.training_pair_accuracy = float(np.mean(scores[better] < scores[worse]))
    return model
