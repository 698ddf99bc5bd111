import itertools

import numpy as np
import pytest

from symborn.charges import make_charge
from symborn.constraint_builder import (
    ConstraintSystem,
    ConstraintViolation,
    build_assignment_mps,
    build_cardinality_mps,
    embed_method1,
    embed_method2,
    exact_skeleton,
    expand_degeneracy,
    link_charges_for_bitstring,
    random_mps,
    skeleton_from_link_charges,
    skeleton_from_transitions,
    uniform_fill,
    validate_seeds,
)
from symborn.symmps import enumerate_support, support_size, validate_mps

QUARTET_SEEDS = ["111000", "000111", "101010", "010101"]


def all_valid(system):
    n = system.n_bits
    out = []
    for bits in itertools.product((0, 1), repeat=n):
        if system.satisfies(bits):
            out.append("".join(map(str, bits)))
    return out


class TestConstraintSystem:
    def test_cardinality_factory(self):
        sys = ConstraintSystem.cardinality(5, 2)
        assert sys.n_rows == 1 and sys.n_bits == 5
        assert sys.satisfies("11000")
        assert not sys.satisfies("11100")
        with pytest.raises(ValueError):
            ConstraintSystem.cardinality(5, 6)

    def test_unconstrained_accepts_everything(self):
        sys = ConstraintSystem.unconstrained(4)
        assert sys.n_rows == 0
        flags = sys.satisfies_batch(np.array([[0, 0, 1, 1], [1, 1, 1, 1]]))
        assert flags.all()

    def test_assignment_factory_rejects_overlap(self):
        with pytest.raises(ValueError):
            ConstraintSystem.assignment(4, [(0, 1), (1, 2)])
        with pytest.raises(ValueError):
            ConstraintSystem.assignment(4, [(0, 5)])

    def test_check_names_first_violated_row(self):
        sys = ConstraintSystem(
            np.array([[1, 1, 1, 1], [1, 0, 1, 0]]), np.array([2, 2])
        )
        with pytest.raises(ConstraintViolation) as exc:
            sys.check("1100")
        assert exc.value.row == 1
        assert "row 1" in str(exc.value)
        sys.check("1010")

    def test_negative_coefficients(self):
        sys = ConstraintSystem(np.array([[1, -1, 2, -2]]), np.array([0]))
        assert sys.satisfies("1100")
        assert sys.satisfies("0000")
        assert sys.satisfies("1111")
        assert not sys.satisfies("1000")


class TestLinkCharges:
    def test_running_sums_single_row(self):
        sys = ConstraintSystem(np.array([[1, 1, 1, 1, 1]]), np.array([3]))
        got = link_charges_for_bitstring(sys, "11100")
        assert got == [make_charge([1]), make_charge([2]), make_charge([3]), make_charge([3])]

    def test_two_rows(self):
        sys = ConstraintSystem(np.array([[1, 1, 1, 1], [2, 0, -1, 0]]), np.array([2, 1]))
        got = link_charges_for_bitstring(sys, "1010")
        assert got == [make_charge([1, 2]), make_charge([1, 2]), make_charge([2, 1])]

    def test_rejects_invalid_seed(self):
        sys = ConstraintSystem.cardinality(4, 2)
        with pytest.raises(ConstraintViolation):
            link_charges_for_bitstring(sys, "1110")


class TestValidateSeeds:
    def test_dedupe_keeps_first_occurrence(self):
        sys = ConstraintSystem.cardinality(4, 2)
        got = validate_seeds(sys, ["1100", "0011", "1100", "1010"])
        assert got == ["1100", "0011", "1010"]

    def test_empty_raises(self):
        sys = ConstraintSystem.cardinality(4, 2)
        with pytest.raises(ValueError):
            validate_seeds(sys, [])

    def test_invalid_seed_raises(self):
        sys = ConstraintSystem.cardinality(4, 2)
        with pytest.raises(ConstraintViolation):
            validate_seeds(sys, ["1100", "1111"])


class TestEmbeddings:
    def test_method1_single_seed_is_product_state(self):
        sys = ConstraintSystem.cardinality(6, 3)
        mps = embed_method1(sys, ["110100"])
        assert set(enumerate_support(mps)) == {"110100"}
        assert mps.center == 5

    def test_method1_reference_count(self):
        sys = ConstraintSystem.cardinality(6, 3)
        mps = embed_method1(sys, QUARTET_SEEDS)
        sup = enumerate_support(mps)
        assert len(sup) == 10
        probs = {x: a * a for x, a in sup.items()}
        for p in probs.values():
            assert p == pytest.approx(1 / 10, abs=1e-12)

    def test_method2_reference_count_is_full_support(self):
        sys = ConstraintSystem.cardinality(6, 3)
        mps = embed_method2(sys, QUARTET_SEEDS)
        sup = enumerate_support(mps)
        assert len(sup) == 20
        assert set(sup) == set(all_valid(sys))
        for a in sup.values():
            assert a * a == pytest.approx(1 / 20, abs=1e-12)

    def test_method1_support_contained_in_method2(self):
        rng = np.random.default_rng(7)
        sys = ConstraintSystem(np.array([[1, 2, 1, -1, 1, 2]]), np.array([3]))
        valid = all_valid(sys)
        assert len(valid) >= 4
        seeds = list(rng.choice(valid, size=4, replace=False))
        m1 = embed_method1(sys, seeds)
        m2 = embed_method2(sys, seeds)
        s1, s2 = set(enumerate_support(m1)), set(enumerate_support(m2))
        assert set(seeds) <= s1 <= s2
        assert s2 <= set(valid)

    def test_support_grows_with_seeds(self):
        sys = ConstraintSystem.cardinality(8, 4)
        valid = all_valid(sys)
        rng = np.random.default_rng(11)
        seeds = list(rng.choice(valid, size=12, replace=False))
        prev1 = prev2 = 0
        for k in (2, 5, 12):
            n1 = support_size(embed_method1(sys, seeds[:k]))
            n2 = support_size(embed_method2(sys, seeds[:k]))
            assert n1 >= max(prev1, k)
            assert n2 >= max(prev2, k)
            prev1, prev2 = n1, n2

    def test_every_seed_has_positive_amplitude(self):
        sys = ConstraintSystem(
            np.array([[1, 1, 1, 1, 1, 1], [1, 0, 2, 0, 1, 0]]), np.array([3, 2])
        )
        valid = all_valid(sys)
        seeds = valid[:3]
        for embed in (embed_method1, embed_method2):
            mps = embed(sys, seeds)
            validate_mps(mps)
            for s in seeds:
                assert mps.amplitude(s) != 0.0


class TestSkeletons:
    def test_transitions_versus_link_charges(self):
        sys = ConstraintSystem.cardinality(6, 3)
        sk1 = skeleton_from_transitions(sys, QUARTET_SEEDS)
        sk2 = skeleton_from_link_charges(sys, QUARTET_SEEDS)
        assert sk1.support_size() == 10
        assert sk2.support_size() == 20
        for l1, l2 in zip(sk1.links, sk2.links):
            assert set(l1) == set(l2)

    def test_exact_skeleton_counts(self):
        sys = ConstraintSystem.cardinality(6, 3)
        sk = exact_skeleton(sys)
        assert sk.support_size() == 20
        assert sk.bond_dimensions() == [2, 3, 4, 3, 2]

    def test_exact_skeleton_infeasible(self):
        sys = ConstraintSystem(np.array([[2, 2, 2]]), np.array([3]))
        with pytest.raises(ValueError):
            exact_skeleton(sys)

    def test_exact_skeleton_state_cap(self):
        sys = ConstraintSystem(
            np.array([[1, 10, 100, 1000, 10000, 100000]]), np.array([111111])
        )
        with pytest.raises(RuntimeError):
            exact_skeleton(sys, max_states=3)


class TestExactBuilders:
    def test_cardinality_6_choose_3(self):
        mps = build_cardinality_mps(6, 3)
        sup = enumerate_support(mps)
        assert len(sup) == 20
        assert max(mps.bond_dimensions()) == 4
        for a in sup.values():
            assert a * a == pytest.approx(1 / 20, abs=1e-12)

    def test_cardinality_larger_count(self):
        assert support_size(build_cardinality_mps(12, 5)) == 792

    def test_cardinality_edges(self):
        assert set(enumerate_support(build_cardinality_mps(4, 0))) == {"0000"}
        assert set(enumerate_support(build_cardinality_mps(4, 4))) == {"1111"}
        ones = enumerate_support(build_cardinality_mps(5, 1))
        assert set(ones) == {"10000", "01000", "00100", "00010", "00001"}

    def test_assignment_support(self):
        mps = build_assignment_mps(5, [(0, 1), (2, 3, 4)])
        sup = set(enumerate_support(mps))
        want = set()
        for i in (0, 1):
            for j in (2, 3, 4):
                bits = ["0"] * 5
                bits[i] = "1"
                bits[j] = "1"
                want.add("".join(bits))
        assert sup == want

    def test_assignment_single_site_group(self):
        mps = build_assignment_mps(3, [(1,)])
        assert set(enumerate_support(mps)) == {"010", "011", "110", "111"}


class TestFillAndExpand:
    def test_uniform_fill_resets_to_uniform(self):
        sys = ConstraintSystem.cardinality(6, 3)
        mps = embed_method2(sys, QUARTET_SEEDS)
        # perturb, then refill
        mps.tensors[2] = mps.tensors[2].scaled(3.7)
        out = uniform_fill(mps)
        sup = enumerate_support(out)
        assert len(sup) == 20
        for a in sup.values():
            assert a * a == pytest.approx(1 / 20, abs=1e-12)

    def test_expand_degeneracy_identity(self):
        mps = build_cardinality_mps(6, 3)
        ref = enumerate_support(mps)
        out = expand_degeneracy(mps, 1)
        sup = enumerate_support(out)
        assert set(sup) == set(ref)
        assert out.bond_dimensions() == mps.bond_dimensions()
        for x, a in ref.items():
            assert sup[x] == pytest.approx(a, abs=1e-12)

    def test_expand_degeneracy_exact_at_zero_noise(self):
        mps = build_cardinality_mps(8, 4)
        ref = enumerate_support(mps)
        out = expand_degeneracy(mps, 3)
        validate_mps(out)
        sup = enumerate_support(out)
        assert set(sup) == set(ref)
        for x, a in ref.items():
            assert sup[x] == pytest.approx(a, abs=1e-12)

    def test_expand_degeneracy_with_noise_keeps_support(self):
        rng = np.random.default_rng(3)
        mps = build_cardinality_mps(8, 4)
        out = expand_degeneracy(mps, 3, noise=1e-3, rng=rng)
        assert set(enumerate_support(out)) == set(enumerate_support(mps))
        assert max(out.bond_dimensions()) > max(mps.bond_dimensions())

    def test_expand_degeneracy_argument_errors(self):
        mps = build_cardinality_mps(4, 2)
        with pytest.raises(ValueError):
            expand_degeneracy(mps, 0)
        with pytest.raises(ValueError):
            expand_degeneracy(mps, 2, noise=0.1)


class TestRandomMps:
    def test_dense_chain_shape(self):
        rng = np.random.default_rng(0)
        mps = random_mps(8, 4, rng)
        validate_mps(mps)
        assert mps.bond_dimensions() == [2, 4, 4, 4, 4, 4, 2]
        assert mps.norm_squared() == pytest.approx(1.0, rel=1e-12)

    def test_symmetric_chain_has_full_support(self):
        rng = np.random.default_rng(1)
        sys = ConstraintSystem.cardinality(8, 3)
        mps = random_mps(8, 0, rng, system=sys)
        validate_mps(mps)
        assert support_size(mps) == 56
