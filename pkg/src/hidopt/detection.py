"""Detection of the objectives that drive the DM's rankings.

Two selection methods over the pooled interaction data (T, r):

* univariate: per-objective Pearson correlation with the rank vector,
  converted to an F(1, N-2) statistic and p-value; select the k smallest
  p-values (fixed policy) or everything below a threshold tau (variable
  policy, falling back to the two smallest when fewer than two qualify).
* rfe: recursive feature elimination driven by a pairwise-preference
  logistic model; a feature's contribution is the drop in pair-ordering
  accuracy when its column is permuted, and the weakest feature is removed
  until a stop condition fires.

Every returned mask has at least two active objectives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from sklearn.linear_model import LogisticRegression

from .core import InsufficientDataError, ParameterError, mask_from_indices
from .learning import ranked_pairs

P_VALUE_FLOOR = 1e-300  # avoids underflow ties between perfectly correlated columns

N_PERMUTATIONS = 10

METHODS = ("univariate", "rfe")
POLICIES = ("fixed_k", "threshold")


@dataclass(frozen=True)
class DetectionConfig:
    """Which selection method runs and how many objectives it may keep.

    ``k`` is the number kept under the fixed policy.  ``tau`` is the
    threshold under the variable policy: for the univariate method lower
    tau keeps fewer objectives (p-values must fall below it), for rfe
    HIGHER tau keeps fewer (contributions must exceed it).
    """

    method: str
    policy: str
    k: int | None = None
    tau: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown detection method {self.method!r}")
        if self.policy not in POLICIES:
            raise ParameterError(f"unknown detection policy {self.policy!r}")
        if self.policy == "fixed_k":
            if self.k is None or self.k < 2:
                raise ParameterError("fixed_k policy needs k >= 2")
        else:
            if self.tau is None or not (0.0 < self.tau <= 1.0):
                raise ParameterError("threshold policy needs tau in (0, 1]")


@dataclass
class UnivariateScores:
    rho: np.ndarray
    f_stat: np.ndarray
    p_value: np.ndarray


def univariate_scores(T, r) -> UnivariateScores:
    """Correlation, F-statistic and p-value of each objective column vs the ranks.

    Zero-variance columns (including an all-tied rank vector) score
    rho=0, F=0, p=1.
    """
    F = np.atleast_2d(np.asarray(T, dtype=float))
    ranks = np.asarray(r, dtype=float)
    n = F.shape[0]
    if n < 3:
        raise InsufficientDataError(f"need at least 3 ranked samples, got {n}")
    if ranks.shape[0] != n:
        raise InsufficientDataError("ranks must align with samples")

    fc = F - F.mean(axis=0)
    rc = ranks - ranks.mean()
    sd_f = F.std(axis=0)
    sd_r = ranks.std()
    denom = sd_f * sd_r * n
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(denom > 0, fc.T @ rc / np.where(denom > 0, denom, 1.0), 0.0)
    rho = np.clip(rho, -1.0, 1.0)

    rho2 = rho**2
    df2 = n - 2
    with np.errstate(divide="ignore", over="ignore"):
        f_stat = np.where(rho2 < 1.0, rho2 * df2 / (1.0 - rho2), np.inf)
    p = stats.f.sf(f_stat, 1, df2)
    p = np.where(sd_f * sd_r > 0, p, 1.0)
    p = np.maximum(p, P_VALUE_FLOOR)
    return UnivariateScores(rho=rho, f_stat=f_stat, p_value=p)


def select_univariate(scores: UnivariateScores, cfg: DetectionConfig) -> np.ndarray:
    """Mask of selected objectives from the univariate p-values.

    Fixed policy: the k smallest p-values (ties broken towards the smaller
    index).  Threshold policy: strictly below tau; if fewer than two
    qualify, the two smallest p-values are taken instead.
    """
    p = scores.p_value
    m = p.shape[0]
    order = np.argsort(p, kind="stable")
    if cfg.policy == "fixed_k":
        k = min(cfg.k, m)
        return mask_from_indices(order[:k], m)
    chosen = np.flatnonzero(p < cfg.tau)
    if chosen.shape[0] < 2:
        chosen = order[:2]
    return mask_from_indices(chosen, m)


def _fit_pair_model(X: np.ndarray, pairs: list[tuple[int, int]]):
    """Logistic model on standardized pair differences; predicts which of two wins."""
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    Xs = (X - mean) / scale
    better = np.array([p[0] for p in pairs])
    worse = np.array([p[1] for p in pairs])
    diffs = Xs[better] - Xs[worse]
    Z = np.vstack([diffs, -diffs])
    y = np.concatenate([np.ones(len(pairs)), np.zeros(len(pairs))])
    clf = LogisticRegression(C=1.0, fit_intercept=False, max_iter=1000)
    clf.fit(Z, y)
    return clf, mean, scale, better, worse


def _pair_accuracy(clf, Xs: np.ndarray, better: np.ndarray, worse: np.ndarray) -> float:
    """Fraction of training pairs ordered correctly by the model."""
    margins = (Xs[better] - Xs[worse]) @ clf.coef_[0]
    return float(np.mean(margins > 0))


def feature_contribution(model, T, r, feature_index: int, groups=None, rng=None,
                         n_permutations: int = N_PERMUTATIONS) -> float:
    """Permutation importance of one feature for the fitted pair model.

    The drop in pair-ordering accuracy when the feature's column is
    permuted across samples, averaged over ``n_permutations`` draws.  May
    be negative.
    """
    clf, mean, scale, better, worse = model
    X = np.atleast_2d(np.asarray(T, dtype=float))
    rng = np.random.default_rng(0) if rng is None else rng
    Xs = (X - mean) / scale
    baseline = _pair_accuracy(clf, Xs, better, worse)
    drops = []
    for _ in range(n_permutations):
        perm = rng.permutation(X.shape[0])
        Xp = Xs.copy()
        Xp[:, feature_index] = Xs[perm, feature_index]
        drops.append(baseline - _pair_accuracy(clf, Xp, better, worse))
    return float(np.mean(drops))


def _rfe_trace(T, r, cfg: DetectionConfig, groups=None, rng=None):
    F = np.atleast_2d(np.asarray(T, dtype=float))
    n, m = F.shape
    if n < 3:
        raise InsufficientDataError(f"need at least 3 ranked samples, got {n}")
    ranks = np.asarray(r)
    rng = np.random.default_rng(0) if rng is None else rng
    pairs = ranked_pairs(ranks, groups)

    keep = list(range(m))
    eliminated: list[int] = []
    contributions: dict[int, float] = {}
    while True:
        if cfg.policy == "fixed_k" and len(keep) <= cfg.k:
            break
        if len(keep) <= 2:
            break
        if not pairs:
            break  # all ranks tied: no signal to eliminate on
        X = F[:, keep]
        model = _fit_pair_model(X, pairs)
        phis = [
            feature_contribution(model, X, ranks, pos, groups=groups, rng=rng)
            for pos in range(len(keep))
        ]
        jmin = int(np.argmin(phis))
        contributions = {keep[pos]: phis[pos] for pos in range(len(keep))}
        if cfg.policy == "threshold" and phis[jmin] > cfg.tau:
            break
        eliminated.append(keep[jmin])
        del keep[jmin]
    mask = mask_from_indices(keep, m)
    return mask, {"contributions": contributions, "eliminated": eliminated}


def rfe_select(T, r, cfg: DetectionConfig, groups=None, rng=None) -> np.ndarray:
    """Surviving objectives after recursive elimination (always >= 2)."""
    mask, _ = _rfe_trace(T, r, cfg, groups=groups, rng=rng)
    return mask


def detect(T, r, cfg: DetectionConfig, groups=None, rng=None):
    """Run the configured method; returns (mask, details dict for logging)."""
    if cfg.method == "univariate":
        scores = univariate_scores(T, r)
        mask = select_univariate(scores, cfg)
        details = {"p_values": [float(v) for v in scores.p_value]}
        return mask, details
    mask, trace = _rfe_trace(T, r, cfg, groups=groups, rng=rng)
    details = {
        "contributions": {str(k + 1): float(v) for k, v in trace["contributions"].items()},
        "eliminated": [int(i + 1) for i in trace["eliminated"]],
    }
    return mask, details
