"""NSGA-II over masked objective vectors with a pluggable secondary criterion.

Non-domination rank is always the first sorting key.  Within a front the
default tie-breaker is crowding distance; the interactive driver swaps in
a learned or true utility instead.  All randomness flows through a single
numpy Generator so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import EngineStateError, EvalCounter, Individual, active_indices, as_mask


@dataclass(frozen=True)
class VariationParams:
    """Operator settings (Pygmo-style NSGA-II defaults)."""

    crossover_prob: float = 0.95
    crossover_eta: float = 10.0
    mutation_prob: float = 0.01
    mutation_eta: float = 50.0
    bin_crossover_prob: float = 0.9
    bitflip_rate: float | None = None  # None -> 1/n


@dataclass
class SecondaryCriterion:
    """Within-front ranking rule.

    ``crowding_distance`` needs no scorer.  For the utility kinds,
    ``score_fn(objectives_matrix, mask) -> scores`` must return values
    where lower means preferred.
    """

    kind: str  # "crowding_distance" | "learned_utility" | "true_utility"
    score_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in ("crowding_distance", "learned_utility", "true_utility"):
            raise ValueError(f"unknown criterion kind {self.kind!r}")
        if self.kind != "crowding_distance" and self.score_fn is None:
            raise ValueError(f"criterion {self.kind} requires a score function")


def crowding_criterion() -> SecondaryCriterion:
    return SecondaryCriterion("crowding_distance")


def fast_nondominated_sort(objectives, d) -> list[list[int]]:
    """Deb's fast non-dominated sort restricted to active objectives.

    ``objectives`` is an (N, m) matrix of full objective vectors; rows may
    hold NaN in inactive coordinates.  Returns fronts as lists of row
    indices; front 0 is the masked non-dominated set.
    """
    F = np.atleast_2d(np.asarray(objectives, dtype=float))
    mask = as_mask(d, F.shape[1])
    act = F[:, mask == 1]
    if np.isnan(act).any():
        raise EngineStateError("active objectives contain unevaluated entries")
    n = act.shape[0]
    a = act[:, None, :]
    b = act[None, :, :]
    dom = np.all(a <= b, axis=2) & np.any(a < b, axis=2)  # dom[i, j]: i dominates j

    n_dominators = dom.sum(axis=0)
    fronts: list[list[int]] = []
    remaining = n
    current = np.flatnonzero(n_dominators == 0)
    assigned = np.zeros(n, dtype=bool)
    while remaining > 0:
        fronts.append([int(i) for i in current])
        assigned[current] = True
        remaining -= len(current)
        if remaining == 0:
            break
        n_dominators = n_dominators - dom[current].sum(axis=0)
        current = np.flatnonzero((n_dominators == 0) & ~assigned)
    return fronts


def crowding_distance(front_objectives, d) -> np.ndarray:
    """Crowding distance of each member of one front (active objectives only).

    Fronts of one or two members get +inf everywhere.  An objective whose
    values are all equal in the front is skipped so it contributes neither
    a boundary marker nor interior distance.
    """
    F = np.atleast_2d(np.asarray(front_objectives, dtype=float))
    mask = as_mask(d, F.shape[1])
    act = F[:, mask == 1]
    n = act.shape[0]
    if n <= 2:
        return np.full(n, np.inf)
    dist = np.zeros(n)
    for j in range(act.shape[1]):
        col = act[:, j]
        lo, hi = col.min(), col.max()
        if hi == lo:
            continue
        order = np.argsort(col, kind="stable")
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        interior = order[1:-1]
        dist[interior] += (col[order[2:]] - col[order[:-2]]) / (hi - lo)
    return dist


def _rank_and_key(F: np.ndarray, d: np.ndarray, criterion: SecondaryCriterion):
    """Front rank plus a within-front key where smaller is better."""
    fronts = fast_nondominated_sort(F, d)
    n = F.shape[0]
    rank = np.empty(n, dtype=np.int64)
    key = np.empty(n, dtype=float)
    if criterion.kind == "crowding_distance":
        for fi, front in enumerate(fronts):
            rank[front] = fi
            key[front] = -crowding_distance(F[front], d)
    else:
        scores = np.asarray(criterion.score_fn(F, d), dtype=float)
        for fi, front in enumerate(fronts):
            rank[front] = fi
        key[:] = scores
    return fronts, rank, key


def rank_population(pop: Sequence[Individual], d, criterion: SecondaryCriterion) -> np.ndarray:
    """Indices of ``pop`` from best to worst under (front rank, criterion)."""
    F = np.vstack([ind.objectives for ind in pop])
    _, rank, key = _rank_and_key(F, as_mask(d, F.shape[1]), criterion)
    return np.lexsort((np.arange(len(pop)), key, rank))


def _truncate(merged: list[Individual], fronts, rank, key, pop_size: int):
    """Standard NSGA-II survival: whole fronts, then best-of-front by key."""
    survivors: list[int] = []
    for front in fronts:
        if len(survivors) + len(front) <= pop_size:
            survivors.extend(front)
            continue
        room = pop_size - len(survivors)
        if room > 0:
            order = sorted(front, key=lambda i: (key[i], i))
            survivors.extend(order[:room])
        break
    pop = [merged[i] for i in survivors]
    return pop, rank[survivors], key[survivors]


def _tournament(rng: np.random.Generator, rank: np.ndarray, key: np.ndarray) -> int:
    i, j = rng.integers(0, rank.shape[0], size=2)
    if (rank[j], key[j]) < (rank[i], key[i]):
        return int(j)
    return int(i)


def _sbx_betaq(rnd: np.ndarray, beta: np.ndarray, eta: float) -> np.ndarray:
    alpha = 2.0 - beta ** -(eta + 1.0)
    exponent = 1.0 / (eta + 1.0)
    return np.where(
        rnd <= 1.0 / alpha,
        (rnd * alpha) ** exponent,
        (1.0 / (2.0 - rnd * alpha)) ** exponent,
    )


def _sbx(p1: np.ndarray, p2: np.ndarray, lower, upper, params: VariationParams, rng):
    """Deb's bounded simulated binary crossover (the Pygmo/NSGA-II original)."""
    n = p1.shape[0]
    # Draws are consumed whether or not gates fire so the stream shape never
    # depends on outcomes.
    pair_gate = rng.random()
    var_gate = rng.random(n) <= 0.5
    rnd = rng.random(n)
    swap = rng.random(n) <= 0.5
    if pair_gate > params.crossover_prob:
        return p1.copy(), p2.copy()
    y1 = np.minimum(p1, p2)
    y2 = np.maximum(p1, p2)
    spread = y2 - y1
    crossed = var_gate & (spread > 1e-14)
    safe = np.where(crossed, spread, 1.0)
    eta = params.crossover_eta
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        beta_lo = 1.0 + 2.0 * (y1 - lower) / safe
        beta_hi = 1.0 + 2.0 * (upper - y2) / safe
        bq1 = _sbx_betaq(rnd, beta_lo, eta)
        bq2 = _sbx_betaq(rnd, beta_hi, eta)
    c1 = np.clip(0.5 * ((y1 + y2) - bq1 * spread), lower, upper)
    c2 = np.clip(0.5 * ((y1 + y2) + bq2 * spread), lower, upper)
    c1, c2 = np.where(swap, c2, c1), np.where(swap, c1, c2)
    out1 = np.where(crossed, c1, p1)
    out2 = np.where(crossed, c2, p2)
    return out1, out2


def _polynomial_mutation(x: np.ndarray, lower, upper, params: VariationParams, rng):
    """Deb's bounded polynomial mutation."""
    n = x.shape[0]
    apply = rng.random(n) < params.mutation_prob
    rnd = rng.random(n)
    span = upper - lower
    delta1 = (x - lower) / span
    delta2 = (upper - x) / span
    mut_pow = 1.0 / (params.mutation_eta + 1.0)
    exp_eta = params.mutation_eta + 1.0
    val_lo = 2.0 * rnd + (1.0 - 2.0 * rnd) * (1.0 - delta1) ** exp_eta
    val_hi = 2.0 * (1.0 - rnd) + 2.0 * (rnd - 0.5) * (1.0 - delta2) ** exp_eta
    deltaq = np.where(rnd <= 0.5, val_lo**mut_pow - 1.0, 1.0 - val_hi**mut_pow)
    out = np.where(apply, x + deltaq * span, x)
    return np.clip(out, lower, upper)


def _binary_variation(p1: np.ndarray, p2: np.ndarray, params: VariationParams, rng):
    n = p1.shape[0]
    c1, c2 = p1.copy(), p2.copy()
    if rng.random() <= params.bin_crossover_prob:
        swap = rng.random(n) < 0.5
        c1 = np.where(swap, p2, p1)
        c2 = np.where(swap, p1, p2)
    else:
        rng.random(n)
    rate = params.bitflip_rate if params.bitflip_rate is not None else 1.0 / n
    flip1 = rng.random(n) < rate
    flip2 = rng.random(n) < rate
    return np.where(flip1, 1 - c1, c1), np.where(flip2, 1 - c2, c2)


def variation(parent1: Individual, parent2: Individual, problem, rng,
              params: VariationParams = VariationParams()) -> tuple[Individual, Individual]:
    """Crossover + mutation appropriate to the problem encoding."""
    m = problem.m
    if problem.encoding == "real":
        x1, x2 = _sbx(parent1.x, parent2.x, problem.lower, problem.upper, params, rng)
        x1 = _polynomial_mutation(x1, problem.lower, problem.upper, params, rng)
        x2 = _polynomial_mutation(x2, problem.lower, problem.upper, params, rng)
    else:
        x1, x2 = _binary_variation(parent1.x, parent2.x, params, rng)
    return Individual.new(x1, m), Individual.new(x2, m)


def evaluate_individuals(inds: Sequence[Individual], problem, d,
                         counter: EvalCounter | None = None,
                         relevant: Sequence[int] = ()) -> int:
    """Fill every missing active objective value; returns evaluations charged.

    Already-computed entries are cached and free.
    """
    mask = as_mask(d, problem.m)
    idx = active_indices(mask)
    charged = 0
    for i in idx:
        todo = [k for k, ind in enumerate(inds) if not ind.eval_flags[i]]
        if not todo:
            continue
        X = np.vstack([inds[k].x for k in todo])
        vals = problem.evaluate_batch(X, [int(i)])[:, 0]
        for pos, k in enumerate(todo):
            inds[k].objectives[i] = vals[pos]
            inds[k].eval_flags[i] = True
        if counter is not None:
            counter.count_many(int(i), len(todo), relevant)
        charged += len(todo)
    return charged


def random_population(problem, pop_size: int, rng) -> list[Individual]:
    if problem.encoding == "real":
        X = rng.uniform(problem.lower, problem.upper, size=(pop_size, problem.n))
    else:
        X = rng.integers(0, 2, size=(pop_size, problem.n), dtype=np.int64)
    return [Individual.new(X[k], problem.m) for k in range(pop_size)]


def evolve(pop: list[Individual], problem, d, generations: int,
           criterion: SecondaryCriterion, rng,
           counter: EvalCounter | None = None, relevant: Sequence[int] = (),
           params: VariationParams = VariationParams(),
           pop_size: int | None = None) -> list[Individual]:
    """Run generational NSGA-II for ``generations`` steps and return the new population.

    Each generation creates ``pop_size`` offspring via binary tournaments on
    (front rank, criterion key), evaluates them on active objectives only,
    merges with the parents and truncates.  ``generations=0`` is a no-op.
    """
    mask = as_mask(d, problem.m)
    size = pop_size if pop_size is not None else len(pop)
    if generations <= 0:
        return list(pop)
    for ind in pop:
        if not ind.evaluated_on(mask):
            raise EngineStateError("population must be evaluated on active objectives")

    F = np.vstack([ind.objectives for ind in pop])
    _, rank, key = _rank_and_key(F, mask, criterion)
    pop = list(pop)
    for _ in range(generations):
        offspring: list[Individual] = []
        while len(offspring) < size:
            a = _tournament(rng, rank, key)
            b = _tournament(rng, rank, key)
            offspring.extend(variation(pop[a], pop[b], problem, rng, params))
        offspring = offspring[:size]
        evaluate_individuals(offspring, problem, mask, counter, relevant)
        merged = pop + offspring
        F = np.vstack([ind.objectives for ind in merged])
        fronts, rank_m, key_m = _rank_and_key(F, mask, criterion)
        pop, rank, key = _truncate(merged, fronts, rank_m, key_m, size)
    return pop
