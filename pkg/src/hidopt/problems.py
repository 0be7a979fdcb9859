"""Benchmark problems: modified DTLZ1/2/7 and correlated NK landscapes.

The DTLZ variants carry two domain tweaks so that projecting the Pareto
front onto a subset of objectives does not collapse it to a single point:
DTLZ1 is restricted to the box [0.25, 0.75]^n and DTLZ2 maps every
variable through x/2 + 0.25 before evaluation.  DTLZ7 needs no change.

The NK-landscape family ("rmnk") draws per-position contribution tables
whose values are correlated across objectives through a Gaussian copula
with constant pairwise correlation ``rho``.  NK fitness is conventionally
maximized; the evaluator returns ``1 - fitness`` so every problem in the
package is minimized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .core import DomainBoundsError, DimensionMismatchError, ParameterError

DTLZ_DECISION_OFFSET = {1: 4, 2: 9, 7: 19}

RMNK_FORMAT = "rmnk-v1"


@dataclass(frozen=True)
class Bounds:
    """Feasible region: a box for real encodings, a bit count for binary."""

    kind: str  # "real" | "binary"
    n: int
    lower: float | None = None
    upper: float | None = None


class DtlzProblem:
    """DTLZ1/2/7 with the per-variant domain modification applied."""

    encoding = "real"

    def __init__(self, variant: int, m: int, n: int | None = None):
        if variant not in (1, 2, 7):
            raise ParameterError(f"unsupported DTLZ variant {variant}")
        if m < 2:
            raise ParameterError("need at least 2 objectives")
        self.variant = variant
        self.m = m
        self.n = int(n) if n is not None else m + DTLZ_DECISION_OFFSET[variant]
        if self.n < m:
            raise ParameterError(f"n={self.n} too small for m={m}")
        if variant == 1:
            self.lower, self.upper = 0.25, 0.75
        else:
            self.lower, self.upper = 0.0, 1.0

    def bounds(self) -> Bounds:
        return Bounds("real", self.n, self.lower, self.upper)

    def _check_domain(self, X: np.ndarray) -> None:
        if X.shape[1] != self.n:
            raise DimensionMismatchError(f"expected {self.n} variables, got {X.shape[1]}")
        if np.any(X < self.lower) or np.any(X > self.upper):
            raise DomainBoundsError(
                f"decision variables outside [{self.lower}, {self.upper}]"
            )

    def evaluate_batch(self, X, indices) -> np.ndarray:
        """Evaluate objectives ``indices`` for every row of ``X``.

        Returns an array of shape (len(X), len(indices)).
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self._check_domain(X)
        idx = [int(i) for i in indices]
        if any(i < 0 or i >= self.m for i in idx):
            raise ParameterError(f"objective index out of range for m={self.m}")
        cols = [self._objective(X, i) for i in idx]
        return np.column_stack(cols) if cols else np.empty((X.shape[0], 0))

    def evaluate(self, x, objective_index: int) -> float:
        return float(self.evaluate_batch(np.asarray(x)[None, :], [objective_index])[0, 0])

    def _objective(self, X: np.ndarray, i: int) -> np.ndarray:
        m = self.m
        if self.variant == 1:
            tail = X[:, m - 1 :]
            g = 100.0 * (
                tail.shape[1]
                + np.sum((tail - 0.5) ** 2 - np.cos(20.0 * np.pi * (tail - 0.5)), axis=1)
            )
            head = X[:, : m - 1]
            val = 0.5 * (1.0 + g) * head[:, : m - 1 - i].prod(axis=1)
            if i >= 1:
                val = val * (1.0 - head[:, m - 1 - i])
            return val
        if self.variant == 2:
            Y = 0.5 * X + 0.25
            tail = Y[:, m - 1 :]
            g = np.sum((tail - 0.5) ** 2, axis=1)
            theta = Y[:, : m - 1] * (np.pi / 2.0)
            val = (1.0 + g) * np.cos(theta[:, : m - 1 - i]).prod(axis=1)
            if i >= 1:
                val = val * np.sin(theta[:, m - 1 - i])
            return val
        # DTLZ7
        if i < m - 1:
            return X[:, i].copy()
        tail = X[:, m - 1 :]
        g = 1.0 + 9.0 * tail.mean(axis=1)
        head = X[:, : m - 1]
        h = m - np.sum(head / (1.0 + g)[:, None] * (1.0 + np.sin(3.0 * np.pi * head)), axis=1)
        return (1.0 + g) * h


@dataclass
class RmnkInstance:
    """A generated NK landscape: per-bit neighbor links and contribution tables.

    ``tables`` has shape (m, n, 2**(K+1)); ``links`` has shape (n, K) and
    lists the epistatic neighbors of each bit position (excluding itself).
    """

    m: int
    n: int
    K: int
    rho: float
    seed: int
    tables: np.ndarray
    links: np.ndarray

    def to_dict(self) -> dict:
        return {
            "format": RMNK_FORMAT,
            "m": self.m,
            "n": self.n,
            "K": self.K,
            "rho": self.rho,
            "seed": self.seed,
            "links": self.links.tolist(),
            "tables": self.tables.tolist(),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def from_dict(cls, data: dict) -> "RmnkInstance":
        if data.get("format") != RMNK_FORMAT:
            raise ParameterError(f"unsupported instance format {data.get('format')!r}")
        inst = cls(
            m=int(data["m"]),
            n=int(data["n"]),
            K=int(data["K"]),
            rho=float(data["rho"]),
            seed=int(data["seed"]),
            tables=np.asarray(data["tables"], dtype=float),
            links=np.asarray(data["links"], dtype=np.int64),
        )
        if inst.tables.shape != (inst.m, inst.n, 2 ** (inst.K + 1)):
            raise ParameterError("contribution table shape does not match parameters")
        if inst.links.shape != (inst.n, inst.K):
            raise ParameterError("neighbor link shape does not match parameters")
        return inst

    @classmethod
    def load(cls, path) -> "RmnkInstance":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _equicorrelated_factor(m: int, rho: float) -> np.ndarray:
    """Factor A with A @ A.T = (1-rho) I + rho * ones, via eigendecomposition.

    Works on the whole admissible range rho in [-1/(m-1), 1], including the
    singular endpoint where Cholesky would fail.
    """
    sigma = np.full((m, m), rho)
    np.fill_diagonal(sigma, 1.0)
    eigval, eigvec = np.linalg.eigh(sigma)
    eigval = np.clip(eigval, 0.0, None)
    return eigvec * np.sqrt(eigval)


def rmnk_generate(m: int, n: int, K: int, rho: float, seed: int) -> RmnkInstance:
    """Generate a seeded NK landscape with correlated objective contributions.

    Contribution tuples across the m objectives are drawn from an
    equicorrelated multivariate normal and mapped to [0, 1] by the normal
    CDF, which is valid for any rho >= -1/(m-1).
    """
    if m < 1 or n < 1:
        raise ParameterError("m and n must be positive")
    if K < 0 or K >= n:
        raise ParameterError(f"K must satisfy 0 <= K < n, got K={K}, n={n}")
    if m > 1 and rho < -1.0 / (m - 1) - 1e-12:
        raise ParameterError(f"rho={rho} below the admissible bound -1/(m-1)")
    if rho > 1.0:
        raise ParameterError("rho must not exceed 1")

    rng = np.random.default_rng(seed)
    links = np.empty((n, K), dtype=np.int64)
    for pos in range(n):
        others = np.delete(np.arange(n), pos)
        links[pos] = rng.choice(others, size=K, replace=False)

    n_contexts = 2 ** (K + 1)
    factor = _equicorrelated_factor(m, rho)
    z = rng.standard_normal((n, n_contexts, m)) @ factor.T
    tables = np.ascontiguousarray(np.moveaxis(ndtr(z), -1, 0))
    return RmnkInstance(m=m, n=n, K=K, rho=float(rho), seed=int(seed), tables=tables, links=links)


def _context_indices(inst: RmnkInstance, B: np.ndarray) -> np.ndarray:
    """Table index per (row, position): own bit is the most significant bit."""
    weights = 2 ** np.arange(inst.K, -1, -1, dtype=np.int64)
    own = B[:, :, None]  # (N, n, 1)
    nbs = B[:, inst.links]  # (N, n, K)
    ctx = np.concatenate([own, nbs], axis=2)
    return ctx @ weights


def rmnk_evaluate_batch(inst: RmnkInstance, B, indices) -> np.ndarray:
    """Evaluate objectives ``indices`` for every bit-string row of ``B``.

    Returns 1 - (mean contribution) so lower is better.
    """
    B = np.atleast_2d(np.asarray(B, dtype=np.int64))
    if B.shape[1] != inst.n:
        raise DimensionMismatchError(f"expected bit-strings of length {inst.n}")
    if not np.all((B == 0) | (B == 1)):
        raise ParameterError("bit-strings must contain only 0s and 1s")
    idx = [int(i) for i in indices]
    if any(i < 0 or i >= inst.m for i in idx):
        raise ParameterError(f"objective index out of range for m={inst.m}")
    ctx = _context_indices(inst, B)  # (N, n)
    pos = np.arange(inst.n)
    cols = [1.0 - inst.tables[i][pos, ctx].mean(axis=1) for i in idx]
    return np.column_stack(cols) if cols else np.empty((B.shape[0], 0))


def rmnk_evaluate(inst: RmnkInstance, bits, objective_index: int) -> float:
    return float(rmnk_evaluate_batch(inst, np.asarray(bits)[None, :], [objective_index])[0, 0])


class RmnkProblem:
    """Problem wrapper around a generated or loaded NK-landscape instance."""

    encoding = "binary"

    def __init__(self, instance: RmnkInstance):
        self.instance = instance
        self.m = instance.m
        self.n = instance.n

    def bounds(self) -> Bounds:
        return Bounds("binary", self.n)

    def evaluate_batch(self, B, indices) -> np.ndarray:
        return rmnk_evaluate_batch(self.instance, B, indices)

    def evaluate(self, bits, objective_index: int) -> float:
        return rmnk_evaluate(self.instance, bits, objective_index)


def problem_bounds(problem) -> Bounds:
    return problem.bounds()


# Decision-space sizes used in the study for rmnk problems, by m.
RMNK_DEFAULT_N = {4: 10, 10: 20, 20: 30}


def make_problem(spec: dict):
    """Build a problem from a config mapping.

    DTLZ: ``{"suite": "dtlz", "variant": 1|2|7, "m": int, "n": optional}``.
    rmnk: ``{"suite": "rmnk", "m": int, "n": optional, "K": int,
    "rho": float, "instance_seed": int}`` or ``{"suite": "rmnk",
    "instance_file": path}``.
    """
    suite = spec.get("suite")
    if suite == "dtlz":
        return DtlzProblem(int(spec["variant"]), int(spec["m"]), spec.get("n"))
    if suite == "rmnk":
        if "instance_file" in spec and spec["instance_file"]:
            return RmnkProblem(RmnkInstance.load(spec["instance_file"]))
        m = int(spec["m"])
        n = int(spec["n"]) if spec.get("n") else RMNK_DEFAULT_N.get(m)
        if n is None:
            raise ParameterError(f"no default bit-string length for m={m}; pass n")
        return RmnkProblem(
            rmnk_generate(m, n, int(spec["K"]), float(spec["rho"]), int(spec.get("instance_seed", 0)))
        )
    raise ParameterError(f"unknown problem suite {suite!r}")
