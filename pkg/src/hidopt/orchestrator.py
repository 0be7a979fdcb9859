"""Driver for interactive runs with online objective detection.

A run is a resumable state machine: plain NSGA-II up to the first
interaction, then a loop of (show examples, collect ranks, optionally
re-detect the active objectives, refit the learned utility, evolve).
The machine pauses in ``awaiting_ranking`` whenever ranks are needed, so
the same code path serves the simulated DM and the HTTP session facade.

Three modes:

* ``golden``: no interactions; the true utility replaces crowding distance
  after the warm-up generations and only the relevant objectives are active.
* ``only_learning``: the mask never changes; a utility model is learned
  from the rankings at each interaction.
* ``detection``: after each interaction, feature selection on the pooled
  rankings updates the mask, the population is re-evaluated on newly
  active objectives, and the utility model is refit.

Evaluation accounting: the optimizer is charged for initial evaluation,
offspring evaluation (active objectives only), full evaluation of shown
solutions at interactions, and re-evaluation after mask changes.  True
utilities recorded for analysis are measured out-of-band and never charged
or cached.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from .core import (
    EngineStateError,
    EvalCounter,
    Individual,
    ParameterError,
    ScheduleError,
    active_indices,
    as_mask,
    mask_from_indices,
    validate_relevant_set,
)
from .detection import DetectionConfig, detect
from .dm import UtilityFunction, mdm_rank
from .engine import (
    SecondaryCriterion,
    VariationParams,
    crowding_criterion,
    evaluate_individuals,
    evolve,
    random_population,
    rank_population,
)
from .learning import LearnParams, fit_utility
from .problems import make_problem

MODES = ("golden", "only_learning", "detection")

RECORD_FORMAT = "runrecord-v1"
CHECKPOINT_FORMAT = "session-v1"


@dataclass
class RunConfig:
    """Everything needed to reproduce one run.

    ``problem`` is a config mapping understood by ``problems.make_problem``.
    ``uf`` is required unless ``dm`` is ``"human"``.  Objective indices are
    0-based here; ``to_dict``/``from_dict`` translate the relevant set to
    the 1-based form used in config files and logs.
    """

    problem: dict
    mode: str
    uf: UtilityFunction | None = None
    detection: DetectionConfig | None = None
    dm: str = "mdm"
    n_interactions: int = 6
    n_examples: int = 5
    gen_first: int = 200
    gen_between: int = 30
    total_generations: int = 500
    pop_size: int = 100
    initial_mask: list[int] | None = None
    seed: int = 0
    learn: LearnParams = field(default_factory=LearnParams)
    variation: VariationParams = field(default_factory=VariationParams)

    def trailing_generations(self) -> int:
        if self.mode == "golden":
            return self.total_generations - self.gen_first
        return (
            self.total_generations
            - self.gen_first
            - self.gen_between * (self.n_interactions - 1)
        )

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ParameterError(f"unknown mode {self.mode!r}")
        if self.dm not in ("mdm", "human"):
            raise ParameterError(f"unknown dm {self.dm!r}")
        if self.dm == "human" and self.mode == "golden":
            raise ParameterError("golden mode needs direct access to a true utility")
        if self.dm == "mdm" and self.uf is None:
            raise ParameterError("simulated DM needs a utility function")
        if self.mode == "detection" and self.detection is None:
            raise ParameterError("detection mode needs a detection config")
        if self.mode != "golden":
            if self.n_interactions < 1:
                raise ParameterError("interactive modes need at least 1 interaction")
            if self.n_examples < 2:
                raise ParameterError("need at least 2 examples per interaction")
            if self.n_examples > self.pop_size:
                raise ParameterError("cannot show more examples than the population holds")
        if self.gen_first < 0 or self.gen_between < 0:
            raise ParameterError("generation counts must be non-negative")
        if self.trailing_generations() < 0:
            raise ScheduleError(
                f"schedule exceeds total budget: {self.total_generations} generations, "
                f"{self.gen_first} before the first interaction, "
                f"{self.gen_between} between interactions, {self.n_interactions} interactions"
            )

    def to_dict(self) -> dict:
        uf = None
        if self.uf is not None:
            uf = {
                "kind": self.uf.kind,
                "relevant": [i + 1 for i in self.uf.c],
                "weights": list(self.uf.weights) if self.uf.weights is not None else None,
                "ideal": list(self.uf.ideal) if self.uf.ideal is not None else None,
            }
        det = None
        if self.detection is not None:
            det = {
                "method": self.detection.method,
                "policy": self.detection.policy,
                "k": self.detection.k,
                "tau": self.detection.tau,
            }
        return {
            "problem": dict(self.problem),
            "mode": self.mode,
            "uf": uf,
            "detection": det,
            "dm": self.dm,
            "interactions": self.n_interactions,
            "examples_per_interaction": self.n_examples,
            "generations_before_first": self.gen_first,
            "generations_between": self.gen_between,
            "total_generations": self.total_generations,
            "population_size": self.pop_size,
            "initial_mask": list(self.initial_mask) if self.initial_mask is not None else None,
            "seed": self.seed,
            "learner": asdict(self.learn),
            "variation": asdict(self.variation),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        uf = None
        if data.get("uf"):
            u = data["uf"]
            uf = UtilityFunction(
                kind=u["kind"],
                c=tuple(int(i) - 1 for i in u["relevant"]),
                weights=tuple(u["weights"]) if u.get("weights") else None,
                ideal=tuple(u["ideal"]) if u.get("ideal") else None,
            )
        det = None
        if data.get("detection"):
            dd = data["detection"]
            det = DetectionConfig(
                method=dd["method"],
                policy=dd["policy"],
                k=dd.get("k"),
                tau=dd.get("tau"),
            )
        return cls(
            problem=dict(data["problem"]),
            mode=data["mode"],
            uf=uf,
            detection=det,
            dm=data.get("dm", "mdm"),
            n_interactions=int(data.get("interactions", 6)),
            n_examples=int(data.get("examples_per_interaction", 5)),
            gen_first=int(data.get("generations_before_first", 200)),
            gen_between=int(data.get("generations_between", 30)),
            total_generations=int(data.get("total_generations", 500)),
            pop_size=int(data.get("population_size", 100)),
            initial_mask=list(data["initial_mask"]) if data.get("initial_mask") else None,
            seed=int(data.get("seed", 0)),
            learn=LearnParams(**data["learner"]) if data.get("learner") else LearnParams(),
            variation=VariationParams(**data["variation"]) if data.get("variation") else VariationParams(),
        )


@dataclass
class RunRecord:
    """Per-interaction log plus the final outcome of one run."""

    config: dict
    interactions: list[dict]
    final: dict
    wall_clock_seconds: float

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "format": RECORD_FORMAT,
            "config": self.config,
            "interactions": self.interactions,
            "final": self.final,
        }
        if include_timing:
            out["wall_clock_seconds"] = self.wall_clock_seconds
        return out

    def to_json(self, canonical: bool = False) -> str:
        """Canonical form excludes wall-clock so reruns are byte-identical."""
        return json.dumps(
            self.to_dict(include_timing=not canonical),
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        if data.get("format") != RECORD_FORMAT:
            raise ParameterError(f"unsupported record format {data.get('format')!r}")
        return cls(
            config=data["config"],
            interactions=data["interactions"],
            final=data["final"],
            wall_clock_seconds=float(data.get("wall_clock_seconds", 0.0)),
        )

    def csv_rows(self) -> list[dict]:
        """Flat rows: one per interaction plus one final row."""
        rows = []
        for entry in self.interactions:
            rows.append(
                {
                    "row": "interaction",
                    "interaction": entry["index"],
                    "n_active": entry["n_active"],
                    "mask": "".join(str(v) for v in entry["mask"]),
                    "best_so_far_true_utility": entry["best_so_far_true_utility"],
                    "population_best_true_utility": entry["population_best_true_utility"],
                    "true_utility": "",
                    "evals_total": "",
                    "evals_relevant": "",
                }
            )
        fin = self.final
        rows.append(
            {
                "row": "final",
                "interaction": len(self.interactions),
                "n_active": int(sum(fin["mask"])),
                "mask": "".join(str(v) for v in fin["mask"]),
                "best_so_far_true_utility": fin["best_so_far_true_utility"],
                "population_best_true_utility": "",
                "true_utility": fin["true_utility"],
                "evals_total": sum(fin["eval_counter"]["per_objective"]),
                "evals_relevant": fin["eval_counter"]["relevant_total"],
            }
        )
        return rows


def default_initial_mask(cfg: RunConfig, m: int) -> np.ndarray:
    """Starting mask when none is given.

    Golden runs activate exactly the relevant set.  Fixed-count detection
    starts from k designated objectives (odd 0-based indices first, so the
    4-objective default is 0,1,0,1).  Everything else starts all-active.
    """
    if cfg.mode == "golden":
        return mask_from_indices(cfg.uf.c, m)
    if cfg.mode == "detection" and cfg.detection.policy == "fixed_k":
        candidates = list(range(1, m, 2)) + list(range(0, m, 2))
        return mask_from_indices(sorted(candidates[: cfg.detection.k]), m)
    return np.ones(m, dtype=np.int8)


class RunState:
    """Resumable state of one interactive run."""

    def __init__(self, cfg: RunConfig, _restoring: bool = False):
        cfg.validate()
        self.cfg = cfg
        self.problem = make_problem(cfg.problem)
        m = self.problem.m
        self.uf = cfg.uf
        if self.uf is not None:
            validate_relevant_set(self.uf.c, m)
        self.relevant = tuple(self.uf.c) if self.uf is not None else ()
        self.rng = np.random.default_rng(cfg.seed)
        if cfg.initial_mask is not None:
            self.d = as_mask(cfg.initial_mask, m)
            if int(self.d.sum()) < 2:
                raise ParameterError("initial mask must keep at least 2 objectives active")
            if cfg.mode == "golden" and any(self.d[i] != 1 for i in self.relevant):
                raise ParameterError("golden mode requires every relevant objective active")
        else:
            self.d = default_initial_mask(cfg, m)
        self.counter = EvalCounter.new(m)
        self.charges = {"initial": 0, "evolution": 0, "interaction": 0, "reeval": 0}
        self.criterion: SecondaryCriterion = crowding_criterion()
        self.model = None
        self.pooled_T: list[np.ndarray] = []
        self.pooled_r: list[np.ndarray] = []
        self.interaction_records: list[dict] = []
        self.masks_history: list[list[int]] = [self._mask_list()]
        self.phase = "created"
        self.next_interaction = 1
        self.shown: list[Individual] | None = None
        self.prev_best: Individual | None = None
        self.best_so_far: float | None = None
        self.post_first_snapshot: dict | None = None
        self._pending_interaction_charge = 0
        self.final: dict | None = None
        self.elapsed = 0.0
        self._t0 = time.perf_counter()
        if not _restoring:
            self.pop = random_population(self.problem, cfg.pop_size, self.rng)
            self.charges["initial"] = evaluate_individuals(
                self.pop, self.problem, self.d, self.counter, self.relevant
            )

    # -- helpers -----------------------------------------------------------

    def _mask_list(self) -> list[int]:
        return [int(v) for v in self.d]

    def _true_utility_criterion(self) -> SecondaryCriterion:
        uf = self.uf
        return SecondaryCriterion("true_utility", lambda F, d: uf.value_batch(F))

    def _learned_criterion(self) -> SecondaryCriterion:
        model = self.model
        return SecondaryCriterion(
            "learned_utility", lambda F, d: model.predict(model.project(F))
        )

    def _evolve(self, generations: int) -> None:
        before = self.counter.total()
        self.pop = evolve(
            self.pop,
            self.problem,
            self.d,
            generations,
            self.criterion,
            self.rng,
            counter=self.counter,
            relevant=self.relevant,
            params=self.cfg.variation,
            pop_size=self.cfg.pop_size,
        )
        self.charges["evolution"] += self.counter.total() - before

    def _measure_true_utilities(self, inds: Sequence[Individual]) -> np.ndarray | None:
        """True utility of each individual; measurement only, never charged."""
        if self.uf is None:
            return None
        m = self.problem.m
        F = np.zeros((len(inds), m))
        for i in self.uf.c:
            missing = [k for k, ind in enumerate(inds) if not ind.eval_flags[i]]
            cached = [k for k, ind in enumerate(inds) if ind.eval_flags[i]]
            for k in cached:
                F[k, i] = inds[k].objectives[i]
            if missing:
                X = np.vstack([inds[k].x for k in missing])
                vals = self.problem.evaluate_batch(X, [i])[:, 0]
                for pos, k in enumerate(missing):
                    F[k, i] = vals[pos]
        return self.uf.value_batch(F)

    def _update_best_so_far(self) -> float | None:
        utilities = self._measure_true_utilities(self.pop)
        if utilities is None:
            return None
        pop_best = float(utilities.min())
        if self.best_so_far is None or pop_best < self.best_so_far:
            self.best_so_far = pop_best
        return pop_best

    # -- state machine -----------------------------------------------------

    def start(self) -> None:
        if self.phase != "created":
            raise EngineStateError("run already started")
        self.phase = "evolving"
        self._evolve(self.cfg.gen_first)
        if self.cfg.mode == "golden":
            self.criterion = self._true_utility_criterion()
            self._evolve(self.cfg.trailing_generations())
            self._finalize()
            return
        self._prepare_interaction()

    def _prepare_interaction(self) -> None:
        # The DM's previous favorite is re-shown in both learning modes so a
        # thresholded detection run that keeps every objective stays exactly
        # equal to an only_learning run with the same seed.
        chosen = select_examples(
            self.pop,
            self.cfg.n_examples,
            self.d,
            self.criterion,
            previous_best=self.prev_best,
            substitute=True,
        )
        full = np.ones(self.problem.m, dtype=np.int8)
        self._pending_interaction_charge = evaluate_individuals(
            chosen, self.problem, full, self.counter, self.relevant
        )
        self.charges["interaction"] += self._pending_interaction_charge
        if self.next_interaction == 1:
            self.post_first_snapshot = self.counter.snapshot()
        self.shown = chosen
        self.phase = "awaiting_ranking"

    def shown_objectives(self) -> np.ndarray:
        if self.phase != "awaiting_ranking":
            raise EngineStateError("no candidates are pending")
        return np.vstack([ind.objectives for ind in self.shown])

    def submit_ranking(self, ranks) -> None:
        if self.phase != "awaiting_ranking":
            raise EngineStateError("run is not awaiting a ranking")
        r = np.asarray(ranks)
        if r.shape != (self.cfg.n_examples,):
            raise ParameterError(f"expected {self.cfg.n_examples} ranks, got {r.shape}")
        if not np.issubdtype(r.dtype, np.integer) or np.any(r < 1):
            raise ParameterError("ranks must be positive integers")

        T_i = self.shown_objectives().copy()
        self.pooled_T.append(T_i)
        self.pooled_r.append(r.astype(np.int64))
        self.prev_best = self.shown[int(np.argmin(r))].copy()

        pooled_T = np.vstack(self.pooled_T)
        pooled_r = np.concatenate(self.pooled_r)
        groups = np.concatenate(
            [np.full(t.shape[0], gi, dtype=np.int64) for gi, t in enumerate(self.pooled_T)]
        )

        details = None
        reeval_charge = 0
        if self.cfg.mode == "detection":
            new_mask, details = detect(
                pooled_T, pooled_r, self.cfg.detection, groups=groups, rng=self.rng
            )
            before = self.counter.total()
            evaluate_individuals(self.pop, self.problem, new_mask, self.counter, self.relevant)
            reeval_charge = self.counter.total() - before
            self.charges["reeval"] += reeval_charge
            self.d = new_mask

        self.model = fit_utility(pooled_T, pooled_r, self.d, groups=groups, params=self.cfg.learn)
        if self.model.is_constant:
            self.criterion = crowding_criterion()
        else:
            self.criterion = self._learned_criterion()

        pop_best = self._update_best_so_far()
        self.interaction_records.append(
            {
                "index": self.next_interaction,
                "mask": self._mask_list(),
                "n_active": int(self.d.sum()),
                "shown": [[float(v) for v in row] for row in T_i],
                "ranks": [int(v) for v in r],
                "detection": details,
                "learned_model_constant": bool(self.model.is_constant),
                "learned_model_pair_accuracy": float(self.model.training_pair_accuracy),
                "learned_model_pair_count": int(self.model.training_pair_count),
                "charges": {
                    "interaction": int(self._pending_interaction_charge),
                    "reeval": int(reeval_charge),
                },
                "best_so_far_true_utility": self.best_so_far,
                "population_best_true_utility": pop_best,
            }
        )
        self.masks_history.append(self._mask_list())

        self.phase = "evolving"
        last = self.next_interaction >= self.cfg.n_interactions
        self._evolve(self.cfg.trailing_generations() if last else self.cfg.gen_between)
        self.next_interaction += 1
        if last:
            self._finalize()
        else:
            self._prepare_interaction()

    def _finalize(self) -> None:
        order = rank_population(self.pop, self.d, self.criterion)
        best = self.pop[int(order[0])]
        self._update_best_so_far()
        true_utility = None
        if self.uf is not None:
            true_utility = float(self._measure_true_utilities([best])[0])
        full_objectives = self.problem.evaluate_batch(best.x[None, :], range(self.problem.m))[0]
        post_first = None
        if self.post_first_snapshot is not None:
            snap = self.post_first_snapshot
            post_first = {
                "total": self.counter.total() - sum(snap["per_objective"]),
                "relevant": int(self.counter.relevant_total - snap["relevant_total"]),
                "irrelevant": int(self.counter.irrelevant_total - snap["irrelevant_total"]),
            }
        self.final = {
            "x": [float(v) for v in best.x],
            "objectives": [float(v) for v in full_objectives],
            "true_utility": true_utility,
            "mask": self._mask_list(),
            "best_so_far_true_utility": self.best_so_far,
            "eval_counter": self.counter.snapshot(),
            "charges": {k: int(v) for k, v in self.charges.items()},
            "post_first_interaction": post_first,
            "masks_history": [list(mk) for mk in self.masks_history],
        }
        self.phase = "finished"

    def record(self) -> RunRecord:
        if self.phase != "finished":
            raise EngineStateError("run has not finished")
        return RunRecord(
            config=self.cfg.to_dict(),
            interactions=self.interaction_records,
            final=self.final,
            wall_clock_seconds=self.elapsed + (time.perf_counter() - self._t0),
        )

    # -- checkpointing -----------------------------------------------------

    def to_checkpoint(self) -> dict:
        def ind_dict(ind: Individual) -> dict:
            return {
                "x": ind.x.tolist(),
                "objectives": [None if not f else float(v) for v, f in zip(ind.objectives, ind.eval_flags)],
            }

        return {
            "format": CHECKPOINT_FORMAT,
            "config": self.cfg.to_dict(),
            "phase": self.phase,
            "next_interaction": self.next_interaction,
            # json round-trips numpy's PCG64 state (plain ints) unchanged
            "rng_state": self.rng.bit_generator.state,
            "mask": self._mask_list(),
            "masks_history": [list(mk) for mk in self.masks_history],
            "counter": self.counter.snapshot(),
            "charges": dict(self.charges),
            "pooled_T": [t.tolist() for t in self.pooled_T],
            "pooled_r": [r.tolist() for r in self.pooled_r],
            "population": [ind_dict(ind) for ind in self.pop],
            "shown": [ind_dict(ind) for ind in self.shown] if self.shown is not None else None,
            "prev_best": ind_dict(self.prev_best) if self.prev_best is not None else None,
            "best_so_far": self.best_so_far,
            "post_first_snapshot": self.post_first_snapshot,
            "pending_interaction_charge": self._pending_interaction_charge,
            "interaction_records": self.interaction_records,
            "final": self.final,
            "elapsed": self.elapsed + (time.perf_counter() - self._t0),
        }

    @classmethod
    def from_checkpoint(cls, data: dict) -> "RunState":
        if data.get("format") != CHECKPOINT_FORMAT:
            raise ParameterError(f"unsupported checkpoint format {data.get('format')!r}")
        cfg = RunConfig.from_dict(data["config"])
        state = cls(cfg, _restoring=True)
        m = state.problem.m
        binary = state.problem.encoding == "binary"

        def load_ind(d: dict) -> Individual:
            x = np.asarray(d["x"], dtype=np.int64 if binary else float)
            ind = Individual.new(x, m)
            for i, v in enumerate(d["objectives"]):
                if v is not None:
                    ind.objectives[i] = float(v)
                    ind.eval_flags[i] = True
            return ind

        state.phase = data["phase"]
        state.next_interaction = int(data["next_interaction"])
        state.rng.bit_generator.state = data["rng_state"]
        state.d = as_mask(data["mask"], m)
        state.masks_history = [list(mk) for mk in data["masks_history"]]
        state.counter = EvalCounter(
            per_objective=np.asarray(data["counter"]["per_objective"], dtype=np.int64),
            relevant_total=int(data["counter"]["relevant_total"]),
            irrelevant_total=int(data["counter"]["irrelevant_total"]),
        )
        state.charges = dict(data["charges"])
        state.pooled_T = [np.asarray(t, dtype=float) for t in data["pooled_T"]]
        state.pooled_r = [np.asarray(r, dtype=np.int64) for r in data["pooled_r"]]
        state.pop = [load_ind(d) for d in data["population"]]
        state.shown = [load_ind(d) for d in data["shown"]] if data.get("shown") else None
        state.prev_best = load_ind(data["prev_best"]) if data.get("prev_best") else None
        state.best_so_far = data.get("best_so_far")
        state.post_first_snapshot = data.get("post_first_snapshot")
        state._pending_interaction_charge = int(data.get("pending_interaction_charge", 0))
        state.interaction_records = list(data["interaction_records"])
        state.final = data.get("final")
        state.elapsed = float(data.get("elapsed", 0.0))
        state._t0 = time.perf_counter()
        return state


def run(cfg: RunConfig) -> RunRecord:
    """Execute a full run with the simulated DM and return its record."""
    if cfg.dm != "mdm":
        raise ParameterError("run() drives the simulated DM; use RunState for a human DM")
    state = RunState(cfg)
    state.start()
    while state.phase == "awaiting_ranking":
        ranks = mdm_rank(state.shown_objectives(), state.uf)
        state.submit_ranking(ranks)
    return state.record()


def select_examples(pop, n_examples: int, d, criterion, previous_best=None,
                    substitute: bool = False) -> list[Individual]:
    """The best ``n_examples`` individuals by (front rank, criterion).

    With ``substitute`` enabled, the DM's previously top-ranked solution
    replaces the worst pick unless it is already among them.
    """
    order = rank_population(pop, d, criterion)
    chosen = [pop[i] for i in order[:n_examples]]
    if substitute and previous_best is not None:
        present = any(np.array_equal(ind.x, previous_best.x) for ind in chosen)
        if not present:
            chosen[-1] = previous_best
    return chosen
