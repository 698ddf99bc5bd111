import struct

import numpy as np
import pytest

from symborn.constraint_builder import (
    ConstraintSystem,
    build_cardinality_mps,
    embed_method2,
    random_mps,
)
from symborn.model_io import (
    FORMAT_VERSION,
    MAGIC,
    load_mps,
    mps_from_bytes,
    mps_to_bytes,
    save_mps,
)
from symborn.symmps import enumerate_support
from symborn.trainer import TrainConfig, WeightedTrainingSet, train


def models():
    rng = np.random.default_rng(7)
    cases = [
        build_cardinality_mps(6, 3),
        build_cardinality_mps(5, 0),
        random_mps(5, 4, rng),
        random_mps(
            8,
            6,
            rng,
            system=ConstraintSystem(
                [[1, -2, 0, 1, 1, 0, 2, -1], [0, 1, 1, 0, 1, 1, 0, 1]],
                [1, 3],
            ),
        ),
        embed_method2(
            ConstraintSystem.cardinality(6, 3),
            ["111000", "000111", "101010", "010101"],
        ),
    ]
    trained = build_cardinality_mps(6, 3)
    ts = WeightedTrainingSet.uniform(["111000", "101010", "000111"])
    train(trained, ts, TrainConfig(sweeps=2, chi_max=8))
    cases.append(trained)
    return cases


class TestRoundTrip:
    @pytest.mark.parametrize("idx", range(6))
    def test_amplitudes_survive(self, idx):
        mps = models()[idx]
        clone = mps_from_bytes(mps_to_bytes(mps))
        assert clone.n_sites == mps.n_sites
        assert clone.center == mps.center
        assert clone.columns == mps.columns
        assert clone.flux == mps.flux
        assert clone.bond_dimensions() == mps.bond_dimensions()
        want = enumerate_support(mps)
        got = enumerate_support(clone)
        assert set(want) == set(got)
        for s, amp in want.items():
            assert got[s] == amp

    @pytest.mark.parametrize("idx", range(6))
    def test_save_load_save_is_byte_identical(self, idx):
        mps = models()[idx]
        first = mps_to_bytes(mps)
        second = mps_to_bytes(mps_from_bytes(first))
        assert first == second

    def test_blocks_equal_exactly(self):
        mps = models()[3]
        clone = mps_from_bytes(mps_to_bytes(mps))
        for a, b in zip(mps.tensors, clone.tensors):
            assert a.flux == b.flux
            assert a.indices == b.indices
            assert set(a.blocks) == set(b.blocks)
            for key in a.blocks:
                assert np.array_equal(a.blocks[key], b.blocks[key])

    def test_file_round_trip(self, tmp_path):
        mps = build_cardinality_mps(6, 3)
        path = tmp_path / "model.sbm"
        save_mps(mps, path)
        again = tmp_path / "again.sbm"
        save_mps(load_mps(path), again)
        assert path.read_bytes() == again.read_bytes()


class TestFormatErrors:
    def payload(self):
        return mps_to_bytes(build_cardinality_mps(4, 2))

    def test_bad_magic(self):
        data = b"NOTMODEL" + self.payload()[len(MAGIC):]
        with pytest.raises(ValueError, match="bad magic"):
            mps_from_bytes(data)

    def test_unsupported_version(self):
        data = bytearray(self.payload())
        data[len(MAGIC): len(MAGIC) + 4] = struct.pack("<I", FORMAT_VERSION + 1)
        with pytest.raises(ValueError, match="version"):
            mps_from_bytes(bytes(data))

    def test_truncated_payload(self):
        data = self.payload()
        with pytest.raises(ValueError, match="truncated"):
            mps_from_bytes(data[:-8])

    def test_trailing_bytes(self):
        data = self.payload() + b"\x00" * 8
        with pytest.raises(ValueError, match="trailing bytes"):
            mps_from_bytes(data)

    def test_corrupt_header_rejected(self):
        data = bytearray(self.payload())
        start = len(MAGIC) + 4 + 8
        data[start] = ord("X")
        with pytest.raises(ValueError):
            mps_from_bytes(bytes(data))
