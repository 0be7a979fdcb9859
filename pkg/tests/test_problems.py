import json

import numpy as np
import pytest

from hidopt.core import DomainBoundsError, ParameterError
from hidopt.problems import (
    Bounds,
    DtlzProblem,
    RmnkInstance,
    RmnkProblem,
    make_problem,
    problem_bounds,
    rmnk_evaluate,
    rmnk_evaluate_batch,
    rmnk_generate,
)
from oracles import dtlz_reference, nk_value_bruteforce


class TestDtlz:
    def test_dtlz1_center_point(self):
        prob = DtlzProblem(1, m=4)
        assert prob.n == 8
        x = np.full(8, 0.5)
        f = [prob.evaluate(x, i) for i in range(4)]
        assert f == pytest.approx([0.0625, 0.0625, 0.125, 0.25], abs=1e-12)
        assert sum(f) == pytest.approx(0.5, abs=1e-12)

    def test_dtlz1_front_sum_identity(self, rng):
        # any head with optimal tail lands on the f-sum = 0.5 simplex
        prob = DtlzProblem(1, m=4)
        for _ in range(50):
            x = np.concatenate([rng.uniform(0.25, 0.75, 3), np.full(5, 0.5)])
            f = prob.evaluate_batch(x[None, :], range(4))[0]
            assert abs(f.sum() - 0.5) < 1e-9

    def test_dtlz2_unit_sphere_identity(self, rng):
        prob = DtlzProblem(2, m=4)
        assert prob.n == 13
        for _ in range(50):
            x = np.concatenate([rng.uniform(0, 1, 3), np.full(10, 0.5)])
            f = prob.evaluate_batch(x[None, :], range(4))[0]
            assert abs((f**2).sum() - 1.0) < 1e-9

    def test_dtlz7_ranges(self, rng):
        prob = DtlzProblem(7, m=4)
        X = rng.uniform(0, 1, (100, prob.n))
        F = prob.evaluate_batch(X, range(4))
        assert np.all(F[:, :3] >= 0) and np.all(F[:, :3] <= 1)
        assert np.all(F[:, 3] >= 0)

    @pytest.mark.parametrize("variant,m", [(1, 4), (2, 4), (7, 4), (1, 10), (2, 10), (7, 6)])
    def test_matches_reference_loops(self, variant, m, rng):
        prob = DtlzProblem(variant, m=m)
        lo, hi = prob.lower, prob.upper
        X = rng.uniform(lo, hi, (100, prob.n))
        F = prob.evaluate_batch(X, range(m))
        for row in range(100):
            expected = dtlz_reference(variant, X[row], m)
            assert F[row] == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_default_decision_sizes(self):
        assert DtlzProblem(1, 4).n == 8
        assert DtlzProblem(2, 10).n == 19
        assert DtlzProblem(7, 4).n == 23

    def test_bounds(self):
        assert problem_bounds(DtlzProblem(1, 4)) == Bounds("real", 8, 0.25, 0.75)
        assert problem_bounds(DtlzProblem(2, 10)) == Bounds("real", 19, 0.0, 1.0)

    def test_out_of_domain_rejected(self):
        prob = DtlzProblem(1, m=4)
        with pytest.raises(DomainBoundsError):
            prob.evaluate(np.full(8, 0.1), 0)

    def test_single_matches_batch(self, rng):
        prob = DtlzProblem(2, m=4)
        x = rng.uniform(0, 1, prob.n)
        batch = prob.evaluate_batch(x[None, :], [2])[0, 0]
        assert prob.evaluate(x, 2) == batch


class TestRmnkGeneration:
    def test_deterministic(self):
        a = rmnk_generate(4, 10, 1, 0.0, seed=7)
        b = rmnk_generate(4, 10, 1, 0.0, seed=7)
        assert np.array_equal(a.tables, b.tables)
        assert np.array_equal(a.links, b.links)

    def test_different_seed_differs(self):
        a = rmnk_generate(4, 10, 1, 0.0, seed=7)
        b = rmnk_generate(4, 10, 1, 0.0, seed=8)
        assert not np.array_equal(a.tables, b.tables)

    def test_correlation_bound_enforced(self):
        with pytest.raises(ParameterError):
            rmnk_generate(4, 10, 1, -0.5, seed=1)

    def test_correlation_bound_edge_allowed(self):
        inst = rmnk_generate(4, 10, 1, -1.0 / 3.0, seed=1)
        assert inst.tables.shape == (4, 10, 4)

    def test_k_must_be_below_n(self):
        with pytest.raises(ParameterError):
            rmnk_generate(4, 10, 10, 0.0, seed=1)

    def test_table_range_and_links(self):
        inst = rmnk_generate(4, 12, 3, 0.25, seed=3)
        assert np.all(inst.tables >= 0) and np.all(inst.tables <= 1)
        for pos in range(12):
            nbs = inst.links[pos]
            assert len(set(nbs.tolist())) == 3
            assert pos not in nbs

    def test_empirical_correlation_near_target(self):
        inst = rmnk_generate(2, 30, 5, 0.9, seed=11)
        flat = inst.tables.reshape(2, -1)
        corr = np.corrcoef(flat[0], flat[1])[0, 1]
        assert 0.85 <= corr <= 0.95

    def test_zero_correlation_near_zero(self):
        inst = rmnk_generate(2, 30, 5, 0.0, seed=11)
        flat = inst.tables.reshape(2, -1)
        corr = np.corrcoef(flat[0], flat[1])[0, 1]
        assert abs(corr) < 0.1


class TestRmnkEvaluation:
    def test_constant_tables_constant_value(self):
        inst = rmnk_generate(1, 2, 1, 0.0, seed=0)
        inst.tables[:] = 0.5
        assert rmnk_evaluate(inst, [0, 1], 0) == pytest.approx(0.5)
        assert rmnk_evaluate(inst, [1, 1], 0) == pytest.approx(0.5)

    def test_values_in_unit_interval(self, rng):
        inst = rmnk_generate(4, 10, 2, 0.25, seed=5)
        B = rng.integers(0, 2, (50, 10))
        F = rmnk_evaluate_batch(inst, B, range(4))
        assert np.all(F >= 0) and np.all(F <= 1)

    @pytest.mark.parametrize("n,K", [(8, 1), (10, 3), (12, 2)])
    def test_exhaustive_match_with_bruteforce(self, n, K):
        inst = rmnk_generate(3, n, K, 0.5, seed=9)
        all_bits = ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(np.int64)
        F = rmnk_evaluate_batch(inst, all_bits, range(3))
        for row in range(2**n):
            for obj in range(3):
                expected = nk_value_bruteforce(inst.tables, inst.links, all_bits[row], obj)
                assert F[row, obj] == expected

    def test_single_bit_flip_locality(self):
        inst = rmnk_generate(2, 10, 1, 0.0, seed=4)
        bits = np.zeros(10, dtype=np.int64)
        base = rmnk_evaluate(inst, bits, 0)
        flipped = bits.copy()
        flipped[0] = 1
        # flipping one bit touches at most the positions linked to it plus itself
        affected = 1 + int(np.sum(inst.links == 0))
        diff_positions = 0
        for pos in range(10):
            ctx = [bits[pos]] + [bits[j] for j in inst.links[pos]]
            ctx_f = [flipped[pos]] + [flipped[j] for j in inst.links[pos]]
            if ctx != ctx_f:
                diff_positions += 1
        assert diff_positions <= affected
        assert isinstance(base, float)

    def test_length_mismatch(self):
        inst = rmnk_generate(2, 10, 1, 0.0, seed=4)
        with pytest.raises(Exception):
            rmnk_evaluate(inst, [0, 1], 0)


class TestRmnkSerialization:
    def test_round_trip(self, tmp_path):
        inst = rmnk_generate(3, 8, 2, 0.25, seed=2)
        path = tmp_path / "instance.json"
        inst.save(path)
        loaded = RmnkInstance.load(path)
        assert loaded.m == inst.m and loaded.n == inst.n and loaded.K == inst.K
        assert np.array_equal(loaded.tables, inst.tables)
        assert np.array_equal(loaded.links, inst.links)

    def test_format_field(self, tmp_path):
        inst = rmnk_generate(2, 6, 1, 0.0, seed=2)
        path = tmp_path / "instance.json"
        inst.save(path)
        data = json.loads(path.read_text())
        assert data["format"] == "rmnk-v1"

    def test_bad_format_rejected(self):
        with pytest.raises(ParameterError):
            RmnkInstance.from_dict({"format": "rmnk-v0"})


class TestFactory:
    def test_dtlz_factory(self):
        prob = make_problem({"suite": "dtlz", "variant": 2, "m": 4})
        assert isinstance(prob, DtlzProblem) and prob.m == 4

    def test_rmnk_factory_default_n(self):
        prob = make_problem({"suite": "rmnk", "m": 20, "K": 1, "rho": 0.0, "instance_seed": 1})
        assert isinstance(prob, RmnkProblem)
        assert problem_bounds(prob) == Bounds("binary", 30)

    def test_rmnk_factory_from_file(self, tmp_path):
        inst = rmnk_generate(2, 6, 1, 0.0, seed=2)
        path = tmp_path / "inst.json"
        inst.save(path)
        prob = make_problem({"suite": "rmnk", "instance_file": str(path)})
        assert prob.n == 6

    def test_unknown_suite(self):
        with pytest.raises(ParameterError):
            make_problem({"suite": "zdt"})
