import itertools
import math

import numpy as np
import pytest

from symborn.constraint_builder import ConstraintSystem
from symborn.oracles import (
    SolutionSet,
    degeneracy_count,
    enumerate_solutions,
    random_valid_search,
    solve_single_equality_dp,
    solve_single_equality_mitm,
)


def brute_force(a, b):
    n = len(a)
    out = []
    for bits in itertools.product((0, 1), repeat=n):
        if int(np.dot(a, bits)) == b:
            out.append("".join(map(str, bits)))
    return sorted(out)


def max_gap(bits):
    ones = [i for i, c in enumerate(bits) if c == "1"]
    if len(ones) < 2:
        return 0
    return max(j - i for i, j in zip(ones, ones[1:]))


class TestSolutionSet:
    def test_sorted_and_membership(self):
        s = SolutionSet(("110", "011"), complete=True)
        assert s.bitstrings == ("011", "110")
        assert "011" in s and "000" not in s
        assert len(s) == 2


class TestEnumeration:
    def test_against_brute_force(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            n = int(rng.integers(3, 10))
            m = int(rng.integers(1, 3))
            a = rng.integers(-2, 3, size=(m, n))
            x = rng.integers(0, 2, size=n)
            b = a @ x
            sys = ConstraintSystem(a, b)
            got = enumerate_solutions(sys)
            assert got.complete
            want = set()
            for bits in itertools.product((0, 1), repeat=n):
                if sys.satisfies(bits):
                    want.add("".join(map(str, bits)))
            assert set(got.bitstrings) == want

    def test_size_guard(self):
        sys = ConstraintSystem.unconstrained(30)
        with pytest.raises(ValueError):
            enumerate_solutions(sys)


class TestMitm:
    def test_against_brute_force(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            n = int(rng.integers(3, 12))
            a = rng.integers(-3, 4, size=n)
            x = rng.integers(0, 2, size=n)
            b = int(a @ x)
            got = solve_single_equality_mitm(a, b)
            assert list(got.bitstrings) == brute_force(a, b)

    def test_infeasible_target(self):
        got = solve_single_equality_mitm([2, 2, 2], 3)
        assert len(got) == 0

    def test_rejects_matrix(self):
        with pytest.raises(ValueError):
            solve_single_equality_mitm(np.ones((2, 3), dtype=int), 1)


class TestDp:
    def test_count_only_and_reconstruct(self):
        count, sols = solve_single_equality_dp([1, 1, 2], 2, reconstruct=True)
        assert count == 2
        assert list(sols.bitstrings) == ["001", "110"]
        count2, none = solve_single_equality_dp([1, 1, 2], 2)
        assert count2 == 2 and none is None

    def test_against_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n = int(rng.integers(3, 12))
            a = rng.integers(0, 5, size=n)
            b = int(rng.integers(0, max(1, int(a.sum()))))
            count, sols = solve_single_equality_dp(a, b, reconstruct=True)
            want = brute_force(a, b)
            assert count == len(want)
            assert list(sols.bitstrings) == want

    def test_big_count_no_reconstruct(self):
        count, _ = solve_single_equality_dp([1] * 50, 25)
        assert count == math.comb(50, 25)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            solve_single_equality_dp([1, -1], 0)


class TestDegeneracyCount:
    def test_anchor_at_zero_gap_excess(self):
        for kappa in range(2, 8):
            assert degeneracy_count(0, kappa, 50) == kappa - 1

    def test_matches_brute_force_bucketing(self):
        # level a counts strings whose best gap falls a short of the widest
        # achievable gap n - kappa + 1
        n = 12
        for kappa in range(2, 7):
            strings = brute_force([1] * n, kappa)
            buckets = {}
            for s in strings:
                a = (n - kappa + 1) - max_gap(s)
                buckets[a] = buckets.get(a, 0) + 1
            checked = 0
            for a, count in sorted(buckets.items()):
                if 2 * a < n - kappa:
                    assert degeneracy_count(a, kappa, n) == count, (a, kappa)
                    checked += 1
            assert checked >= 3

    def test_frozen_large_instance(self):
        best = degeneracy_count(6, 25, 50)
        assert best == 24 * math.comb(30, 6)
        assert best == 14250600
        total = math.comb(50, 25)
        assert total == 126410606437752
        assert best / total == pytest.approx(1.1273262902205426e-07, rel=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            degeneracy_count(-1, 3, 10)
        with pytest.raises(ValueError):
            degeneracy_count(0, 0, 10)
        with pytest.raises(ValueError):
            degeneracy_count(4, 3, 10)


class TestRandomValidSearch:
    def test_finds_only_valid_and_dedupes(self):
        rng = np.random.default_rng(8)
        sys = ConstraintSystem.cardinality(10, 5)
        found = random_valid_search(sys, 5000, rng)
        assert len(found) == len(set(found))
        for s in found:
            assert sys.satisfies(s)

    def test_deterministic_under_seed(self):
        sys = ConstraintSystem.cardinality(12, 4)
        a = random_valid_search(sys, 3000, np.random.default_rng(42))
        b = random_valid_search(sys, 3000, np.random.default_rng(42))
        assert a == b

    def test_infeasible_finds_nothing(self):
        sys = ConstraintSystem(np.array([[2, 2]]), np.array([3]))
        assert random_valid_search(sys, 1000, np.random.default_rng(0)) == []
