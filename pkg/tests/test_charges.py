import numpy as np
import pytest
from hypothesis import given, strategies as st

from symborn.charges import (
    Charge,
    ChargedIndex,
    ChargeOverflowError,
    Direction,
    bit_sector,
    fuse,
    make_charge,
    negate,
    site_index,
    subtract,
    zero,
)

charges3 = st.tuples(*[st.integers(-50, 50)] * 3)


def test_make_charge_and_zero():
    assert make_charge([1, -2, 0]) == (1, -2, 0)
    assert make_charge(np.array([3, 4])) == (3, 4)
    assert zero(0) == ()
    assert zero(3) == (0, 0, 0)


def test_fuse_negate_subtract():
    a, b = (1, -2), (3, 5)
    assert fuse(a, b) == (4, 3)
    assert negate(a) == (-1, 2)
    assert subtract(b, a) == (2, 7)


def test_fuse_length_mismatch():
    with pytest.raises(ValueError):
        fuse((1,), (1, 2))


def test_overflow_guard():
    big = (2**62,)
    with pytest.raises(ChargeOverflowError):
        fuse(big, big)


@given(charges3, charges3, charges3)
def test_fuse_abelian_group(a, b, c):
    assert fuse(a, b) == fuse(b, a)
    assert fuse(fuse(a, b), c) == fuse(a, fuse(b, c))
    assert fuse(a, zero(3)) == a
    assert fuse(a, negate(a)) == zero(3)
    assert subtract(fuse(a, b), b) == a


def test_charged_index_validation():
    ok = ChargedIndex((((0,), 1), ((1,), 2)), Direction.IN)
    assert ok.dim == 3
    with pytest.raises(ValueError):
        ChargedIndex((((1,), 1), ((0,), 2)), Direction.IN)  # unsorted
    with pytest.raises(ValueError):
        ChargedIndex((((0,), 1), ((0,), 2)), Direction.IN)  # duplicate
    with pytest.raises(ValueError):
        ChargedIndex((((0,), 0),), Direction.IN)  # zero degeneracy
    with pytest.raises(ValueError):
        ChargedIndex((((0,), 1), ((1, 2), 1)), Direction.IN)  # ragged charges


def test_charged_index_lookup_and_offsets():
    idx = ChargedIndex((((-1,), 2), ((0,), 1), ((2,), 3)), Direction.OUT)
    assert idx.charges == ((-1,), (0,), (2,))
    assert idx.degeneracy((2,)) == 3
    assert idx.offset((-1,)) == 0
    assert idx.offset((0,)) == 2
    assert idx.offset((2,)) == 3
    assert idx.has_charge((0,)) and not idx.has_charge((1,))
    with pytest.raises(KeyError):
        idx.degeneracy((9,))


def test_dual_matching():
    out = ChargedIndex((((0,), 2), ((1,), 1)), Direction.OUT)
    inn = out.dual()
    assert inn.direction == Direction.IN
    assert out.matches_dual(inn)
    assert not out.matches_dual(out)
    other = ChargedIndex((((0,), 2), ((1,), 2)), Direction.IN)
    assert not out.matches_dual(other)


def test_site_index_nonzero_column():
    idx = site_index((2, -1))
    assert idx.sectors == (((0, 0), 1), ((2, -1), 1))
    assert idx.direction == Direction.IN
    assert bit_sector((2, -1), 0) == ((0, 0), 0)
    assert bit_sector((2, -1), 1) == ((2, -1), 0)


def test_site_index_zero_column_collapses():
    idx = site_index((0, 0))
    assert idx.sectors == (((0, 0), 2),)
    assert bit_sector((0, 0), 0) == ((0, 0), 0)
    assert bit_sector((0, 0), 1) == ((0, 0), 1)


def test_site_index_empty_charge():
    # m = 0: the unconstrained case collapses to one neutral two-slot sector.
    idx = site_index(())
    assert idx.sectors == (((), 2),)
    assert bit_sector((), 1) == ((), 1)


def test_direction_flip():
    assert Direction.IN.flipped() == Direction.OUT
    assert Direction.OUT.flipped() == Direction.IN
