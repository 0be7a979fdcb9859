"""Machine decision maker: true utility functions and interaction ranking.

A utility function evaluates a full objective vector but only reads the
objectives in its relevant index set ``c``; everything else is irrelevant
by construction.  Lower utility is preferred.  Rankings use competition
ranking (1, 2, 2, 4), with ties wherever utilities coincide to within a
small tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ParameterError

QUADRATIC_COEFFS = {
    # (a*f1^2, b*f2^2, c*f1*f2, d*f1, e*f2)
    "UF1": (0.28, 0.38, 0.29, 0.05, 0.0),
    "UF2": (0.60, 0.00, 0.05, 0.23, 0.38),
    "UF3": (0.44, 0.14, 0.09, 0.33, 0.0),
}

UF_KINDS = ("UF1", "UF2", "UF3", "tchebychef")

RANK_TIE_TOL = 1e-12


@dataclass(frozen=True)
class UtilityFunction:
    """True DM utility over the relevant objectives ``c`` (0-based indices).

    The quadratic kinds use exactly two relevant objectives.  The
    Tchebychef kind takes per-relevant-objective weights (default 0.4/0.6
    for two objectives) and an ideal point (default all zeros).
    """

    kind: str
    c: tuple[int, ...]
    weights: tuple[float, ...] | None = None
    ideal: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in UF_KINDS:
            raise ParameterError(f"unknown utility kind {self.kind!r}")
        if self.kind in QUADRATIC_COEFFS and len(self.c) != 2:
            raise ParameterError(f"{self.kind} needs exactly 2 relevant objectives")
        if self.kind == "tchebychef" and len(self.c) < 1:
            raise ParameterError("tchebychef needs at least 1 relevant objective")
        if self.weights is not None and len(self.weights) != len(self.c):
            raise ParameterError("weights must align with the relevant set")
        if self.ideal is not None and len(self.ideal) != len(self.c):
            raise ParameterError("ideal point must align with the relevant set")

    def _effective_weights(self) -> np.ndarray:
        if self.weights is not None:
            return np.asarray(self.weights, dtype=float)
        if len(self.c) == 2:
            return np.array([0.4, 0.6])
        return np.full(len(self.c), 1.0 / len(self.c))

    def value_batch(self, F) -> np.ndarray:
        """Utility of each row of an (N, m) objective matrix."""
        F = np.atleast_2d(np.asarray(F, dtype=float))
        cols = F[:, list(self.c)]
        if self.kind in QUADRATIC_COEFFS:
            a, b, cc, dd, ee = QUADRATIC_COEFFS[self.kind]
            f1, f2 = cols[:, 0], cols[:, 1]
            return a * f1**2 + b * f2**2 + cc * f1 * f2 + dd * f1 + ee * f2
        w = self._effective_weights()
        ideal = np.asarray(self.ideal, dtype=float) if self.ideal is not None else np.zeros(len(self.c))
        return np.max(w * np.abs(cols - ideal), axis=1)

    def value(self, f) -> float:
        return float(self.value_batch(np.asarray(f, dtype=float)[None, :])[0])


def utility(uf: UtilityFunction, f) -> float:
    return uf.value(f)


def competition_ranks(values, tol: float = RANK_TIE_TOL) -> np.ndarray:
    """Tie-aware ranks of the form 1, 2, 2, 4 (lower value = better rank).

    Values within ``tol`` of the current tie group's anchor share a rank.
    """
    u = np.asarray(values, dtype=float)
    order = np.argsort(u, kind="stable")
    ranks = np.empty(u.shape[0], dtype=np.int64)
    group_rank = 1
    anchor = None
    for pos, idx in enumerate(order):
        if anchor is None or u[idx] - anchor > tol:
            group_rank = pos + 1
            anchor = u[idx]
        ranks[idx] = group_rank
    return ranks


def mdm_rank(T, uf: UtilityFunction) -> np.ndarray:
    """Rank the presented objective vectors by true utility (1 = best)."""
    F = np.atleast_2d(np.asarray(T, dtype=float))
    if F.shape[0] < 2:
        raise ParameterError("need at least 2 solutions to rank")
    return competition_ranks(uf.value_batch(F))
