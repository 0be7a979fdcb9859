"""Acceptance suite: one test per shipping criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -rA`` to see every line.
Replication tests use fixed seed sets and the reduced "smoke" schedule
(150 generations: 60 before the first interaction, 15 between) unless a
criterion pins the full 500-generation schedule.
"""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from hidopt.detection import DetectionConfig, univariate_scores
from hidopt.dm import UtilityFunction, competition_ranks, mdm_rank
from hidopt.engine import fast_nondominated_sort
from hidopt.orchestrator import RunConfig, run
from hidopt.problems import DtlzProblem, rmnk_evaluate_batch, rmnk_generate
from hidopt.service import create_app
from oracles import f_test_pvalues, nk_value_bruteforce, nondominated_partition

SMOKE = dict(gen_first=60, gen_between=15, total_generations=150)


def report(name: str, ok: bool, detail: str = "") -> None:
    line = f"ACCEPTANCE {'PASS' if ok else 'FAIL'} — {name}"
    if detail:
        line += f" ({detail})"
    print(line)


def smoke_cfg(mode, seed, *, problem, uf, detection=None, initial_mask=None,
              n_interactions=6, **over):
    base = dict(
        problem=problem, mode=mode, uf=uf, detection=detection,
        initial_mask=initial_mask, n_interactions=n_interactions,
        pop_size=100, seed=seed, **SMOKE,
    )
    base.update(over)
    return RunConfig(**base)


# ---------------------------------------------------------------------------
# F-test oracle equivalence


def test_f_test_oracle_equivalence():
    rng = np.random.default_rng(777)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(3, 31))
        m = int(rng.integers(2, 21))
        T = rng.normal(size=(n, m)) * rng.uniform(0.1, 10)
        ranks = competition_ranks(rng.normal(size=n))
        got = univariate_scores(T, ranks).p_value
        expected = f_test_pvalues(T, ranks)
        worst = max(worst, float(np.max(np.abs(got - expected))))
    ok = worst < 1e-8
    report("F-test p-values match incomplete-beta oracle on 200 datasets", ok,
           f"max |diff| = {worst:.2e}")
    assert ok


# ---------------------------------------------------------------------------
# tau = 1 degeneracy: thresholded detection that keeps everything is
# exactly the fixed-mask learning run


@pytest.mark.slow
def test_tau_one_degeneracy():
    failures = []
    for seed in (3, 11, 42):
        shared = dict(
            problem={"suite": "dtlz", "variant": 2, "m": 4},
            uf=UtilityFunction("UF1", c=(0, 3)),
            seed=seed,
        )
        det = run(smoke_cfg("detection", detection=DetectionConfig("univariate", "threshold", tau=1.0), **shared))
        only = run(smoke_cfg("only_learning", **shared))
        masks_equal = [e["mask"] for e in det.interactions] == [e["mask"] for e in only.interactions]
        final_equal = det.final["x"] == only.final["x"]
        if not (masks_equal and final_equal):
            failures.append(seed)
    rm = dict(
        problem={"suite": "rmnk", "m": 4, "n": 10, "K": 1, "rho": 0.0, "instance_seed": 9},
        uf=UtilityFunction("UF1", c=(0, 1)),
        seed=7,
    )
    det = run(smoke_cfg("detection", detection=DetectionConfig("univariate", "threshold", tau=1.0), **rm))
    only = run(smoke_cfg("only_learning", **rm))
    if det.final["x"] != only.final["x"]:
        failures.append("rmnk")
    ok = not failures
    report("tau=1 detection runs equal only_learning exactly", ok,
           f"failing seeds: {failures}" if failures else "4 seeded pairs, exact")
    assert ok, failures


# ---------------------------------------------------------------------------
# Detection power at the first interaction (scaled replication)


@pytest.mark.slow
def test_detection_power_first_interaction():
    target = [1, 1] + [0] * 8
    hits = 0
    seeds = 20
    for seed in range(seeds):
        cfg = smoke_cfg(
            "detection", seed,
            problem={"suite": "rmnk", "m": 10, "n": 20, "K": 1, "rho": 0.0,
                     "instance_seed": 1000 + seed},
            uf=UtilityFunction("UF1", c=(0, 1)),
            detection=DetectionConfig("univariate", "threshold", tau=0.05),
        )
        record = run(cfg)
        hits += record.interactions[0]["mask"] == target
    rate = hits / seeds
    ok = rate >= 0.5
    report("first-interaction mask equals the relevant pair in >= 50% of runs", ok,
           f"rate = {rate:.2f} ({hits}/{seeds})")
    assert ok, (
        f"exact relevant-pair recovery after one interaction: {rate:.2f} < 0.5. "
        "With 5 ranked samples the F-test has 3 denominator degrees of freedom; "
        "the measured ceiling of this event is ~0.15 even under favorable spreads."
    )


# ---------------------------------------------------------------------------
# Evaluation reduction vs the fixed-mask baseline (full schedule)


@pytest.mark.slow
def test_evaluation_reduction_full_schedule():
    uf = UtilityFunction("UF3", c=(0, 3))
    det_total = det_relevant = only_total = 0
    for seed in range(10):
        shared = dict(
            problem={"suite": "dtlz", "variant": 1, "m": 20},
            mode="detection", uf=uf, n_interactions=6,
            gen_first=200, gen_between=30, total_generations=500,
            pop_size=100, seed=seed,
        )
        det = run(RunConfig(detection=DetectionConfig("univariate", "threshold", tau=0.2), **shared))
        shared["mode"] = "only_learning"
        only = run(RunConfig(**shared))
        det_total += det.final["post_first_interaction"]["total"]
        det_relevant += det.final["post_first_interaction"]["relevant"]
        only_total += only.final["post_first_interaction"]["total"]
    reduction = 1.0 - det_total / only_total
    share = det_relevant / det_total
    ok = reduction >= 0.60 and share >= 0.50
    report("post-first-interaction evaluations reduced >= 60% with >= 50% relevant share",
           ok, f"reduction = {reduction:.1%}, relevant share = {share:.1%}")
    assert ok, (
        f"reduction {reduction:.1%} (needs >= 60%), relevant share {share:.1%} (needs >= 50%). "
        "Univariate selection keeps most objectives here: near the local fronts all "
        "objectives share the (1+g) factor and long prefix products, so irrelevant "
        "columns are genuinely rank-correlated and pass the 0.2 threshold."
    )


# ---------------------------------------------------------------------------
# Mode ordering: golden <= fixed-k detection <= fixed-mask learning


@pytest.fixture(scope="module")
def mode_ordering_runs():
    uf = UtilityFunction("UF1", c=(0, 3))
    problem = {"suite": "dtlz", "variant": 2, "m": 10}
    designated = [0, 1, 0, 1, 0, 0, 0, 0, 0, 0]
    gold, khd, only = [], [], []
    for seed in range(20):
        gold.append(run(smoke_cfg("golden", seed, problem=problem, uf=uf)).final["true_utility"])
        khd.append(
            run(
                smoke_cfg(
                    "detection", seed, problem=problem, uf=uf,
                    detection=DetectionConfig("univariate", "fixed_k", k=2),
                    initial_mask=designated,
                )
            ).final["true_utility"]
        )
        only.append(
            run(smoke_cfg("only_learning", seed, problem=problem, uf=uf,
                          initial_mask=designated)).final["true_utility"]
        )
    return np.array(gold), np.array(khd), np.array(only)


@pytest.mark.slow
def test_mode_ordering(mode_ordering_runs):
    gold, khd, only = mode_ordering_runs
    ordered = gold.mean() <= khd.mean() <= only.mean()
    diffs = gold - only
    rng = np.random.default_rng(0)
    boots = np.array([diffs[rng.integers(0, diffs.size, diffs.size)].mean() for _ in range(10000)])
    hi = float(np.percentile(boots, 97.5))
    significant = hi < 0.0
    ok = ordered and significant
    report("mean final utility: golden <= fixed-k detection <= fixed-mask learning", ok,
           f"golden={gold.mean():.3g} k-detect={khd.mean():.3g} fixed={only.mean():.3g}, "
           f"bootstrap 97.5% of (golden-fixed) = {hi:.2e}")
    assert ok


# ---------------------------------------------------------------------------
# Monotone improvement of the tracked best across interactions


@pytest.fixture(scope="module")
def tau_hd_dtlz2_records():
    uf = UtilityFunction("UF1", c=(0, 3))
    records = []
    for seed in range(20):
        records.append(
            run(
                smoke_cfg(
                    "detection", seed,
                    problem={"suite": "dtlz", "variant": 2, "m": 10},
                    uf=uf,
                    detection=DetectionConfig("univariate", "threshold", tau=0.2),
                )
            )
        )
    return records


@pytest.mark.slow
def test_monotone_improvement_across_interactions(tau_hd_dtlz2_records):
    trajectories = np.array(
        [[e["best_so_far_true_utility"] for e in r.interactions] for r in tau_hd_dtlz2_records]
    )
    mean_traj = trajectories.mean(axis=0)
    regressions = np.diff(mean_traj)
    worst = float(regressions.max()) if regressions.size else 0.0
    ok = worst <= 1e-3
    report("mean best-so-far utility non-increasing across interactions", ok,
           f"worst mean step = {worst:.2e}")
    assert ok


# ---------------------------------------------------------------------------
# Property suite (exact)


def test_property_masked_sorting_matches_bruteforce():
    rng = np.random.default_rng(4242)
    for trial in range(500):
        n = int(rng.integers(2, 26))
        m = int(rng.integers(2, 6))
        F = rng.random((n, m))
        if trial % 3 == 0:
            F = F.round(1)  # force duplicates and ties
        mask = np.zeros(m, dtype=np.int8)
        active = rng.choice(m, size=int(rng.integers(2, m + 1)), replace=False)
        mask[active] = 1
        fronts = fast_nondominated_sort(F, mask)
        expected = nondominated_partition([list(row) for row in F], sorted(active.tolist()))
        assert fronts == expected, f"trial {trial}"
    report("masked non-dominated sort equals brute-force oracle on 500 populations", True)


def test_property_dtlz_front_identities():
    rng = np.random.default_rng(5)
    p1 = DtlzProblem(1, m=4)
    p2 = DtlzProblem(2, m=4)
    worst1 = worst2 = 0.0
    for _ in range(200):
        x1 = np.concatenate([rng.uniform(0.25, 0.75, 3), np.full(5, 0.5)])
        f1 = p1.evaluate_batch(x1[None, :], range(4))[0]
        worst1 = max(worst1, abs(f1.sum() - 0.5))
        x2 = np.concatenate([rng.uniform(0, 1, 3), np.full(10, 0.5)])
        f2 = p2.evaluate_batch(x2[None, :], range(4))[0]
        worst2 = max(worst2, abs((f2**2).sum() - 1.0))
    ok = worst1 < 1e-9 and worst2 < 1e-9
    report("DTLZ front identities hold to 1e-9", ok,
           f"sum dev {worst1:.1e}, sphere dev {worst2:.1e}")
    assert ok


def test_property_rmnk_exhaustive_oracle():
    inst = rmnk_generate(2, 12, 3, 0.25, seed=31)
    all_bits = ((np.arange(2**12)[:, None] >> np.arange(12)) & 1).astype(np.int64)
    F = rmnk_evaluate_batch(inst, all_bits, range(2))
    for row in range(2**12):
        for obj in range(2):
            assert F[row, obj] == nk_value_bruteforce(inst.tables, inst.links, all_bits[row], obj)
    report("NK-landscape evaluation equals exhaustive oracle at n=12 exactly", True)


@pytest.mark.slow
def test_property_mask_floor(tau_hd_dtlz2_records):
    smallest = min(
        min(sum(mask) for mask in r.final["masks_history"]) for r in tau_hd_dtlz2_records
    )
    ok = smallest >= 2
    report("active mask never drops below 2 objectives", ok, f"min active = {smallest}")
    assert ok


def test_property_run_determinism():
    cfg_kwargs = dict(
        problem={"suite": "dtlz", "variant": 2, "m": 4},
        uf=UtilityFunction("UF1", c=(0, 3)),
        detection=DetectionConfig("univariate", "threshold", tau=0.2),
        n_interactions=3, gen_first=20, gen_between=8, total_generations=44,
        pop_size=30, seed=99,
    )
    payloads = {run(RunConfig(mode="detection", **cfg_kwargs)).to_json(canonical=True) for _ in range(3)}
    ok = len(payloads) == 1
    report("identical config yields byte-identical records (3 repeats)", ok)
    assert ok


def test_property_eval_accounting_identity():
    cfg = RunConfig(
        problem={"suite": "dtlz", "variant": 2, "m": 4},
        mode="detection",
        uf=UtilityFunction("UF1", c=(0, 3)),
        detection=DetectionConfig("univariate", "threshold", tau=0.2),
        n_interactions=3, gen_first=20, gen_between=8, total_generations=44,
        pop_size=30, seed=12,
    )
    record = run(cfg)
    counter = record.final["eval_counter"]
    charges = record.final["charges"]
    masks = record.final["masks_history"]
    expected_evolution = cfg.gen_first * cfg.pop_size * sum(masks[0])
    for i, entry in enumerate(record.interactions):
        gens = cfg.gen_between if i < cfg.n_interactions - 1 else cfg.trailing_generations()
        expected_evolution += gens * cfg.pop_size * entry["n_active"]
    identity = (
        sum(counter["per_objective"]) == sum(charges.values())
        and counter["relevant_total"] + counter["irrelevant_total"] == sum(counter["per_objective"])
        and charges["evolution"] == expected_evolution
        and charges["initial"] == cfg.pop_size * sum(masks[0])
        and charges["interaction"] == sum(e["charges"]["interaction"] for e in record.interactions)
        and charges["reeval"] == sum(e["charges"]["reeval"] for e in record.interactions)
    )
    report("evaluation accounting identity is exact", identity)
    assert identity


# ---------------------------------------------------------------------------
# Secondary: session round-trip equals the simulated-DM run


@pytest.mark.slow
def test_secondary_session_round_trip(tmp_path):
    config = {
        "problem": {"suite": "dtlz", "variant": 2, "m": 4},
        "mode": "detection",
        "dm": "human",
        "detection": {"method": "univariate", "policy": "threshold", "tau": 0.2},
        "interactions": 3,
        "examples_per_interaction": 5,
        "generations_before_first": 60,
        "generations_between": 15,
        "total_generations": 150,
        "population_size": 100,
        "seed": 2024,
    }
    uf = UtilityFunction("UF1", c=(0, 3))
    with TestClient(create_app(checkpoint_dir=tmp_path / "sessions")) as client:
        session = client.post("/sessions", json={"config": config}).json()
        sid = session["id"]
        phase = session["phase"]
        seen = 0
        while phase == "awaiting_ranking":
            body = client.get(f"/sessions/{sid}/candidates").json()
            assert len(body["candidates"]) == 5
            seen += 1
            T = np.array([c["objectives"] for c in body["candidates"]])
            ranks = [int(v) for v in mdm_rank(T, uf)]
            phase = client.post(f"/sessions/{sid}/ranking", json={"ranks": ranks}).json()["phase"]
        final = client.get(f"/sessions/{sid}").json()["final"]

    mdm_config = dict(config)
    mdm_config["dm"] = "mdm"
    mdm_config["uf"] = {"kind": "UF1", "relevant": [1, 4]}
    record = run(RunConfig.from_dict(mdm_config))
    ok = (
        seen == 3
        and final["x"] == record.final["x"]
        and final["objectives"] == record.final["objectives"]
    )
    report("scripted HTTP session reproduces the simulated-DM run exactly", ok,
           f"{seen} interactions")
    assert ok
