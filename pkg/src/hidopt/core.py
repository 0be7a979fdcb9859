"""Core data model for masked multi-objective optimization.

Objective vectors are plain float arrays of length ``m`` (the number of
potential objectives).  An active mask is a 0/1 vector of the same length
selecting the objectives the optimizer currently works on; everything is
minimized.  Individuals cache per-objective values lazily, so inactive
objectives are never computed unless something explicitly asks for them.

Indexing is 0-based throughout the package; config files, logs and the UI
render objective indices 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DimensionMismatchError(ValueError):
    """Vector lengths disagree."""


class DomainBoundsError(ValueError):
    """Decision vector lies outside the problem's feasible box."""


class ParameterError(ValueError):
    """Invalid generator or configuration parameter."""


class InsufficientDataError(ValueError):
    """Too few ranked samples for the requested statistic."""


class EngineStateError(RuntimeError):
    """Operation requires objective values that have not been computed."""


class ScheduleError(ValueError):
    """Generation schedule does not fit the total budget."""


class SnapshotMismatchError(ValueError):
    """Model input does not match the mask the model was trained under."""


def as_objective_vector(values, m: int | None = None) -> np.ndarray:
    """Validate and return a 1-D float array of objective values."""
    f = np.asarray(values, dtype=float)
    if f.ndim != 1:
        raise DimensionMismatchError(f"objective vector must be 1-D, got shape {f.shape}")
    if m is not None and f.shape[0] != m:
        raise DimensionMismatchError(f"expected {m} objectives, got {f.shape[0]}")
    if not np.all(np.isfinite(f)):
        raise ParameterError("objective values must be finite")
    return f


def as_mask(d, m: int | None = None) -> np.ndarray:
    """Validate and return an int8 0/1 active mask."""
    mask = np.asarray(d)
    if mask.ndim != 1:
        raise DimensionMismatchError(f"mask must be 1-D, got shape {mask.shape}")
    if m is not None and mask.shape[0] != m:
        raise DimensionMismatchError(f"expected mask of length {m}, got {mask.shape[0]}")
    if mask.dtype == bool:
        return mask.astype(np.int8)
    mask = mask.astype(np.int8)
    if not np.all((mask == 0) | (mask == 1)):
        raise ParameterError("mask entries must be 0 or 1")
    return mask


def active_indices(d) -> np.ndarray:
    return np.flatnonzero(as_mask(d))


def mask_from_indices(indices: Iterable[int], m: int) -> np.ndarray:
    mask = np.zeros(m, dtype=np.int8)
    idx = np.asarray(list(indices), dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= m):
        raise ParameterError(f"objective index out of range for m={m}")
    mask[idx] = 1
    return mask


def validate_relevant_set(c: Sequence[int], m: int) -> tuple[int, ...]:
    """Return ``c`` as a strictly increasing tuple of valid 0-based indices."""
    out = tuple(int(i) for i in c)
    if any(i < 0 or i >= m for i in out):
        raise ParameterError(f"relevant objective index out of range for m={m}")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ParameterError("relevant objective indices must be strictly increasing")
    return out


def apply_mask(f, d) -> np.ndarray:
    """Element-wise product of an objective vector with a 0/1 mask.

    Inactive entries come out exactly 0, even when the underlying value is
    NaN (i.e. not yet evaluated).
    """
    fv = np.asarray(f, dtype=float)
    mask = as_mask(d)
    if fv.shape[-1] != mask.shape[0]:
        raise DimensionMismatchError(
            f"vector length {fv.shape[-1]} != mask length {mask.shape[0]}"
        )
    return np.where(mask == 1, fv, 0.0)


def dominates(a, b, d) -> bool:
    """Masked Pareto dominance (minimization).

    True iff ``a`` is no worse than ``b`` on every active objective and
    strictly better on at least one.
    """
    av = np.asarray(a, dtype=float)
    bv = np.asarray(b, dtype=float)
    mask = as_mask(d)
    if av.shape != bv.shape or av.shape[0] != mask.shape[0]:
        raise DimensionMismatchError("dominance requires equal-length vectors and mask")
    act = mask == 1
    aa, bb = av[act], bv[act]
    return bool(np.all(aa <= bb) and np.any(aa < bb))


@dataclass
class Individual:
    """A candidate solution with lazily evaluated objectives.

    ``objectives[i]`` is only meaningful where ``eval_flags[i]`` is set;
    unevaluated entries hold NaN.
    """

    x: np.ndarray
    objectives: np.ndarray
    eval_flags: np.ndarray

    @classmethod
    def new(cls, x: np.ndarray, m: int) -> "Individual":
        return cls(
            x=np.asarray(x),
            objectives=np.full(m, np.nan),
            eval_flags=np.zeros(m, dtype=bool),
        )

    @property
    def m(self) -> int:
        return self.objectives.shape[0]

    def copy(self) -> "Individual":
        return Individual(self.x.copy(), self.objectives.copy(), self.eval_flags.copy())

    def evaluated_on(self, d) -> bool:
        """True when every active objective has been computed."""
        return bool(np.all(self.eval_flags[as_mask(d, self.m) == 1]))


@dataclass
class EvalCounter:
    """Accounting for single-objective evaluations, split by DM relevance."""

    per_objective: np.ndarray
    relevant_total: int = 0
    irrelevant_total: int = 0

    @classmethod
    def new(cls, m: int) -> "EvalCounter":
        return cls(per_objective=np.zeros(m, dtype=np.int64))

    def count_evaluation(self, objective_index: int, relevant_set: Sequence[int]) -> None:
        i = int(objective_index)
        if i < 0 or i >= self.per_objective.shape[0]:
            raise ParameterError(f"objective index {i} out of range")
        self.per_objective[i] += 1
        if i in relevant_set:
            self.relevant_total += 1
        else:
            self.irrelevant_total += 1

    def count_many(self, objective_index: int, n: int, relevant_set: Sequence[int]) -> None:
        """Charge ``n`` evaluations of one objective in a single update."""
        i = int(objective_index)
        if i < 0 or i >= self.per_objective.shape[0]:
            raise ParameterError(f"objective index {i} out of range")
        self.per_objective[i] += n
        if i in relevant_set:
            self.relevant_total += n
        else:
            self.irrelevant_total += n

    def total(self) -> int:
        return int(self.per_objective.sum())

    def snapshot(self) -> dict:
        return {
            "per_objective": [int(v) for v in self.per_objective],
            "relevant_total": int(self.relevant_total),
            "irrelevant_total": int(self.irrelevant_total),
        }
