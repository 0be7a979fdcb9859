import csv
import json
import numpy as np
import pytest

from hidopt.experiments import (
    ExperimentSuite,
    SuiteCell,
    apply_smoke,
    cell_seed,
    heatmap,
    load_records,
    run_suite,
    summarize,
    t_interval,
)


def tiny_config(mode="only_learning", **over):
    cfg = {
        "problem": {"suite": "dtlz", "variant": 2, "m": 4},
        "mode": mode,
        "uf": {"kind": "UF1", "relevant": [1, 4]},
        "dm": "mdm",
        "interactions": 2,
        "examples_per_interaction": 5,
        "generations_before_first": 8,
        "generations_between": 4,
        "total_generations": 16,
        "population_size": 16,
    }
    cfg.update(over)
    return cfg


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestSeeds:
    def test_cell_seed_stable(self):
        assert cell_seed(0, "a", 0) == cell_seed(0, "a", 0)
        assert cell_seed(0, "a", 0) != cell_seed(0, "a", 1)
        assert cell_seed(0, "a", 0) != cell_seed(0, "b", 0)
        assert cell_seed(7, "a", 0) == cell_seed(0, "a", 0) + 7

    def test_shared_seed_group_aligns_cells(self):
        a = cell_seed(1, "grp", 3)
        b = cell_seed(1, "grp", 3)
        assert a == b


class TestTInterval:
    def test_textbook_five_values(self):
        # mean 3, sd sqrt(2.5), t(0.975, 4) = 2.7764 -> half-width 1.9632
        lo, hi = t_interval(np.array([1.0, 2.0, 3.0, 4.0, 5.0]))
        assert (lo + hi) / 2 == pytest.approx(3.0)
        assert hi - lo == pytest.approx(2 * 1.9632, abs=2e-3)

    def test_identical_values_zero_width(self):
        lo, hi = t_interval(np.full(40, 1.25))
        assert lo == hi == 1.25

    def test_single_value_collapses(self):
        assert t_interval(np.array([2.0])) == (2.0, 2.0)


class TestRunSuite:
    def test_records_and_summary(self, tmp_path):
        suite = ExperimentSuite(
            name="tiny",
            repeats=3,
            seed_base=5,
            cells=[SuiteCell(id="cell-a", config=tiny_config())],
        )
        out = run_suite(suite, tmp_path / "out")
        files = sorted((out / "runs" / "cell-a").glob("rep_*.json"))
        assert len(files) == 3
        rows = read_csv(out / "summary.csv")
        assert len(rows) == 1
        assert rows[0]["schema"] == "summary-v1"
        assert rows[0]["cell_id"] == "cell-a"
        assert int(rows[0]["repeats_ok"]) == 3

    def test_rerun_byte_identical(self, tmp_path):
        suite = ExperimentSuite(
            name="tiny", repeats=2, seed_base=5,
            cells=[SuiteCell(id="cell-a", config=tiny_config())],
        )
        out1 = run_suite(suite, tmp_path / "a")
        out2 = run_suite(suite, tmp_path / "b")
        for rep in range(2):
            b1 = (out1 / "runs" / "cell-a" / f"rep_{rep}.json").read_bytes()
            b2 = (out2 / "runs" / "cell-a" / f"rep_{rep}.json").read_bytes()
            assert b1 == b2

    def test_failed_cell_does_not_stop_suite(self, tmp_path):
        bad = tiny_config()
        bad["problem"] = {"suite": "dtlz", "variant": 3, "m": 4}  # unsupported variant
        suite = ExperimentSuite(
            name="partial", repeats=1, seed_base=0,
            cells=[SuiteCell(id="bad", config=bad), SuiteCell(id="good", config=tiny_config())],
        )
        out = run_suite(suite, tmp_path / "out")
        assert (out / "runs" / "bad" / "rep_0.error.txt").exists()
        assert (out / "runs" / "good" / "rep_0.json").exists()

    def test_parallel_jobs_match_serial(self, tmp_path):
        suite = ExperimentSuite(
            name="par", repeats=2, seed_base=1,
            cells=[SuiteCell(id="cell-a", config=tiny_config())],
        )
        serial = run_suite(suite, tmp_path / "serial", jobs=1)
        parallel = run_suite(suite, tmp_path / "parallel", jobs=2)
        for rep in range(2):
            assert (serial / "runs" / "cell-a" / f"rep_{rep}.json").read_bytes() == (
                parallel / "runs" / "cell-a" / f"rep_{rep}.json"
            ).read_bytes()

    def test_smoke_profile(self, tmp_path):
        cfg = tiny_config(
            generations_before_first=200, generations_between=30, total_generations=500
        )
        assert apply_smoke(cfg)["total_generations"] == 150
        suite = ExperimentSuite(
            name="smoke", repeats=8, seed_base=0,
            cells=[SuiteCell(id="cell-a", config=tiny_config())],
        )
        out = run_suite(suite, tmp_path / "out", smoke=True)
        files = list((out / "runs" / "cell-a").glob("rep_*.json"))
        assert len(files) == 5  # smoke caps repeats
        record = json.loads(files[0].read_text())
        assert record["config"]["total_generations"] == 150


class TestAggregation:
    def _paired_suite(self, tau):
        det = tiny_config(
            mode="detection",
            detection={"method": "univariate", "policy": "threshold", "tau": tau},
        )
        return ExperimentSuite(
            name="paired",
            repeats=2,
            seed_base=3,
            cells=[
                SuiteCell(id="det", config=det, seed_group="pair"),
                SuiteCell(id="only", config=tiny_config(), seed_group="pair"),
                SuiteCell(id="gold", config=tiny_config(mode="golden"), seed_group="pair"),
            ],
        )

    def test_tau_one_summary_equals_baseline(self, tmp_path):
        out = run_suite(self._paired_suite(tau=1.0), tmp_path / "out")
        rows = {r["cell_id"]: r for r in read_csv(out / "summary.csv")}
        assert rows["det"]["mean_utility"] == rows["only"]["mean_utility"]
        assert rows["det"]["ci_low"] == rows["only"]["ci_low"]

    def test_pairs_rows(self, tmp_path):
        out = run_suite(self._paired_suite(tau=0.5), tmp_path / "out")
        pairs = {r["cell_id"]: r for r in read_csv(out / "pairs.csv")}
        assert set(pairs) == {"det", "gold"}
        assert pairs["gold"]["baseline_id"] == "only"
        diff = float(pairs["gold"]["mean_utility_diff"])
        assert diff == pytest.approx(
            float(pairs["gold"]["mean_utility"]) - float(pairs["gold"]["baseline_mean_utility"]),
            abs=1e-9,
        )

    def test_heatmap_initial_column_all_active(self, tmp_path):
        out = run_suite(self._paired_suite(tau=0.5), tmp_path / "out")
        rows = read_csv(out / "heatmap.csv")
        det_rows = [r for r in rows if r["cell_id"] == "det" and r["interaction"] == "0"]
        assert len(det_rows) == 4
        for r in det_rows:
            assert int(r["active_count"]) == int(r["repeats"])

    def test_heatmap_bounds_and_masks(self, tmp_path):
        out = run_suite(self._paired_suite(tau=0.5), tmp_path / "out")
        for r in read_csv(out / "heatmap.csv"):
            assert 0 <= int(r["active_count"]) <= int(r["repeats"])

    def test_interactions_long_format(self, tmp_path):
        out = run_suite(self._paired_suite(tau=0.5), tmp_path / "out")
        rows = read_csv(out / "interactions.csv")
        det_rows = [r for r in rows if r["cell_id"] == "det"]
        assert len(det_rows) == 2 * 2  # repeats x interactions
        assert all(r["schema"] == "interactions-v1" for r in rows)

    def test_summarize_skips_corrupt_record(self, tmp_path):
        out = run_suite(
            ExperimentSuite(
                name="tiny", repeats=2, seed_base=5,
                cells=[SuiteCell(id="cell-a", config=tiny_config())],
            ),
            tmp_path / "out",
        )
        (out / "runs" / "cell-a" / "rep_1.json").write_text("{not json", encoding="utf-8")
        records = load_records(out)
        assert len(records["cell-a"]) == 1
        summarize(out, tmp_path / "summary2.csv")
        rows = read_csv(tmp_path / "summary2.csv")
        assert int(rows[0]["repeats_ok"]) == 1


class TestSuiteFile:
    def test_round_trip(self, tmp_path):
        suite = ExperimentSuite(
            name="file", repeats=2, seed_base=9,
            cells=[SuiteCell(id="a", config=tiny_config(), seed_group="g")],
        )
        path = tmp_path / "suite.json"
        path.write_text(json.dumps(suite.to_dict()), encoding="utf-8")
        loaded = ExperimentSuite.load(path)
        assert loaded.name == "file" and loaded.cells[0].group() == "g"

    def test_duplicate_ids_rejected(self):
        with pytest.raises(Exception):
            ExperimentSuite(
                name="dup", repeats=1, seed_base=0,
                cells=[SuiteCell(id="x", config={}), SuiteCell(id="x", config={})],
            )
