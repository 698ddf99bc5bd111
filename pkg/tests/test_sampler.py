import numpy as np
import pytest
from scipy import stats

from symborn.constraint_builder import (
    ConstraintSystem,
    build_cardinality_mps,
    embed_method1,
    embed_method2,
    random_mps,
)
from symborn.sampler import (
    SampleBatch,
    coverage,
    g_sol,
    kl_divergence,
    sample,
    sample_batch,
    utility,
)
from symborn.symmps import enumerate_support

QUARTET_SEEDS = ["111000", "000111", "101010", "010101"]
SYS63 = ConstraintSystem.cardinality(6, 3)


def born_probabilities(mps):
    z = mps.norm_squared()
    return {x: a * a / z for x, a in enumerate_support(mps).items()}


def random_two_row_model(seed, n=10):
    sys2 = ConstraintSystem(
        np.array([[1] * n, [2, 0, -1, 0, 1, 0, 2, 0, -1, 0][:n]]),
        np.array([n // 2, 1]),
    )
    return sys2, random_mps(n, 0, np.random.default_rng(seed), system=sys2)


class TestSample:
    def test_one_point_model_is_forced(self):
        mps = embed_method1(SYS63, ["110100"])
        rng = np.random.default_rng(0)
        for _ in range(25):
            assert sample(mps, rng) == "110100"

    def test_uniform_counts_concentrate(self):
        mps = build_cardinality_mps(6, 3)
        batch = sample_batch(mps, 100_000, seed=7)
        assert len(batch.counts) == 20
        expected = 100_000 / 20
        assert min(batch.counts.values()) >= 0.8 * expected
        assert max(batch.counts.values()) <= 1.2 * expected

    def test_total_variation_at_large_q(self):
        _, mps = random_two_row_model(5)
        exact = born_probabilities(mps)
        q = 1_000_000
        batch = sample_batch(mps, q, seed=3)
        tv = 0.5 * sum(
            abs(batch.counts.get(x, 0) / q - p) for x, p in exact.items()
        )
        tv += 0.5 * sum(
            n / q for x, n in batch.counts.items() if x not in exact
        )
        assert tv < 0.02

    def test_zero_norm_model_rejected(self):
        mps = build_cardinality_mps(4, 2)
        mps.tensors[mps.center] = mps.tensors[mps.center].scaled(0.0)
        with pytest.raises(ValueError):
            sample(mps, np.random.default_rng(0))


class TestSampleBatch:
    def test_empty_batch(self):
        mps = build_cardinality_mps(4, 2)
        batch = sample_batch(mps, 0, seed=1)
        assert len(batch) == 0 and batch.counts == {}

    def test_counts_sum_to_q(self):
        mps = build_cardinality_mps(8, 4)
        batch = sample_batch(mps, 4321, seed=2)
        assert sum(batch.counts.values()) == 4321
        assert len(batch.bitstrings) == 4321

    def test_seed_determinism(self):
        mps = build_cardinality_mps(8, 4)
        a = sample_batch(mps, 2000, seed=5)
        b = sample_batch(mps, 2000, seed=5)
        assert a.bitstrings == b.bitstrings

    def test_worker_count_does_not_change_rows(self):
        mps = build_cardinality_mps(10, 5)
        one = sample_batch(mps, 20_000, seed=3, workers=1)
        eight = sample_batch(mps, 20_000, seed=3, workers=8)
        assert one.bitstrings == eight.bitstrings

    def test_every_sample_valid_on_symmetric_models(self):
        rng = np.random.default_rng(13)
        for _ in range(5):
            n = int(rng.integers(6, 16))
            m = int(rng.integers(1, 3))
            a = rng.integers(-2, 3, size=(m, n))
            x = rng.integers(0, 2, size=n)
            sys = ConstraintSystem(a, a @ x)
            mps = random_mps(n, 0, rng, system=sys)
            batch = sample_batch(mps, 2000, seed=int(rng.integers(1 << 30)))
            assert batch.validity_rate(sys) == 1.0

    def test_cardinality_20_10_all_valid(self):
        sys = ConstraintSystem.cardinality(20, 10)
        mps = build_cardinality_mps(20, 10)
        batch = sample_batch(mps, 10_000, seed=11)
        assert batch.validity_rate(sys) == 1.0

    def test_chi_square_exactness(self):
        for seed in (0, 1, 2):
            _, mps = random_two_row_model(seed + 20)
            exact = born_probabilities(mps)
            q = 100_000
            batch = sample_batch(mps, q, seed=seed)
            keys = sorted(exact)
            obs = np.array([batch.counts.get(x, 0) for x in keys])
            exp = np.array([exact[x] for x in keys]) * q
            _, p = stats.chisquare(obs, exp)
            assert p > 0.001

    def test_argument_validation(self):
        mps = build_cardinality_mps(4, 2)
        with pytest.raises(ValueError):
            sample_batch(mps, -1, seed=0)
        with pytest.raises(ValueError):
            sample_batch(mps, 10, seed=0, workers=0)


class TestMetrics:
    def test_g_sol_excludes_seeds_and_invalid(self):
        batch = SampleBatch(
            ["111000", "101010", "110100"],
            {"111000": 1, "101010": 1, "110100": 1},
            0,
        )
        assert g_sol(batch, QUARTET_SEEDS, SYS63) == 1
        assert g_sol(batch, [], SYS63) == 3
        only_seeds = SampleBatch(["111000"], {"111000": 1}, 0)
        assert g_sol(only_seeds, QUARTET_SEEDS, SYS63) == 0

    def test_g_sol_method2_reference(self):
        mps = embed_method2(SYS63, QUARTET_SEEDS)
        batch = sample_batch(mps, 4000, seed=1)
        assert g_sol(batch, QUARTET_SEEDS, SYS63) == 16

    def test_coverage(self):
        assert coverage(16, 20, 4) == pytest.approx(1.0)
        assert coverage(0, 20, 4) == 0.0
        with pytest.raises(ValueError):
            coverage(1, 4, 4)

    def test_utility(self):
        assert utility([3.5] * 7) == pytest.approx(3.5)
        assert utility(list(range(1, 21))) == pytest.approx(1.0)
        assert utility(list(range(1, 101))) == pytest.approx(3.0)
        assert utility([4.0]) == pytest.approx(4.0)
        with pytest.raises(ValueError):
            utility([])

    def test_kl_divergence(self):
        mps = build_cardinality_mps(6, 3)
        uniform = {x: 1 / 20 for x in enumerate_support(mps)}
        assert kl_divergence(mps, uniform) == pytest.approx(0.0, abs=1e-12)
        assert kl_divergence(mps, {"110100": 1.0}) == pytest.approx(
            np.log(20), abs=1e-12
        )
        with pytest.raises(ValueError):
            kl_divergence(mps, {"111100": 1.0})
        with pytest.raises(ValueError):
            kl_divergence(mps, {"110100": 0.5})
