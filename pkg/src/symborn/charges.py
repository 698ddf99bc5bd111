"""Abelian charge bookkeeping for block-sparse tensors.

A charge is a fixed-length tuple of signed integers, one entry per conserved
quantity (one per equality constraint row). The empty tuple is the trivial
charge group used by unconstrained ("vanilla") models, and zero() of any
length is the neutral element. Charges are compared lexicographically, which
gives every sector list a deterministic order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator

Charge = tuple[int, ...]

# Entries live in signed 64-bit range so serialized models and any future
# array-backed storage agree with the in-memory values.
_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1


class ChargeOverflowError(OverflowError):
    """A charge entry left the signed 64-bit range."""


def _check_entries(values: Iterable[int]) -> Charge:
    out = tuple(int(v) for v in values)
    for v in out:
        if v < _INT64_MIN or v > _INT64_MAX:
            raise ChargeOverflowError(f"charge entry {v} outside int64 range")
    return out


def make_charge(values: Iterable[int]) -> Charge:
    """Build a validated charge tuple from an iterable of ints."""
    return _check_entries(values)


def zero(m: int) -> Charge:
    """The neutral charge of length m."""
    if m < 0:
        raise ValueError("charge length must be >= 0")
    return (0,) * m


def fuse(a: Charge, b: Charge) -> Charge:
    """Entrywise sum of two charges of equal length, overflow-checked."""
    if len(a) != len(b):
        raise ValueError(f"cannot fuse charges of length {len(a)} and {len(b)}")
    return _check_entries(x + y for x, y in zip(a, b))


def negate(a: Charge) -> Charge:
    return _check_entries(-x for x in a)


def subtract(a: Charge, b: Charge) -> Charge:
    if len(a) != len(b):
        raise ValueError(f"cannot subtract charges of length {len(a)} and {len(b)}")
    return _check_entries(x - y for x, y in zip(a, b))


class Direction(enum.Enum):
    """Whether an index counts into or out of a tensor's conservation rule.

    Every stored block of a tensor with flux f satisfies
    f + sum(charges on IN indices) = sum(charges on OUT indices).
    """

    IN = "in"
    OUT = "out"

    def flipped(self) -> "Direction":
        return Direction.OUT if self is Direction.IN else Direction.IN


@dataclass(frozen=True)
class ChargedIndex:
    """An ordered list of (charge, degeneracy) sectors plus a direction.

    Sectors are stored sorted by charge (lexicographic) with unique charges
    and positive degeneracies, so two indices built from the same sector set
    always compare equal and slice identically.
    """

    sectors: tuple[tuple[Charge, int], ...]
    direction: Direction

    def __post_init__(self) -> None:
        charges = [c for c, _ in self.sectors]
        if sorted(charges) != charges:
            raise ValueError("sectors must be sorted by charge")
        if len(set(charges)) != len(charges):
            raise ValueError("duplicate sector charge")
        lengths = {len(c) for c in charges}
        if len(lengths) > 1:
            raise ValueError("mixed charge lengths in one index")
        for c, d in self.sectors:
            _check_entries(c)
            if d <= 0:
                raise ValueError(f"sector {c} has non-positive degeneracy {d}")

    @staticmethod
    def from_pairs(
        pairs: Iterable[tuple[Charge, int]], direction: Direction
    ) -> "ChargedIndex":
        merged: dict[Charge, int] = {}
        for c, d in pairs:
            merged[c] = merged.get(c, 0) + d
        sectors = tuple(sorted(merged.items()))
        return ChargedIndex(sectors=sectors, direction=direction)

    @property
    def dim(self) -> int:
        return sum(d for _, d in self.sectors)

    @property
    def charges(self) -> tuple[Charge, ...]:
        return tuple(c for c, _ in self.sectors)

    def degeneracy(self, charge: Charge) -> int:
        for c, d in self.sectors:
            if c == charge:
                return d
        raise KeyError(charge)

    def has_charge(self, charge: Charge) -> bool:
        return any(c == charge for c, _ in self.sectors)

    def offset(self, charge: Charge) -> int:
        """Dense offset of a sector, with sectors laid out in stored order."""
        off = 0
        for c, d in self.sectors:
            if c == charge:
                return off
            off += d
        raise KeyError(charge)

    def dual(self) -> "ChargedIndex":
        """Same sectors, flipped direction (what a contraction partner needs)."""
        return ChargedIndex(self.sectors, self.direction.flipped())

    def matches_dual(self, other: "ChargedIndex") -> bool:
        return self.sectors == other.sectors and self.direction != other.direction

    def __iter__(self) -> Iterator[tuple[Charge, int]]:
        return iter(self.sectors)


def site_index(column: Charge) -> ChargedIndex:
    """The physical index of one binary site with constraint column `column`.

    Bit value 0 contributes the neutral charge and bit value 1 contributes the
    column itself. When the column is zero (or the charge group is trivial)
    the two sectors collapse into a single sector of degeneracy 2.
    """
    z = zero(len(column))
    if column == z:
        return ChargedIndex(((z, 2),), Direction.IN)
    return ChargedIndex.from_pairs([(z, 1), (column, 1)], Direction.IN)


def bit_sector(column: Charge, bit: int) -> tuple[Charge, int]:
    """Map a bit value to (sector charge, slot within the sector)."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    z = zero(len(column))
    if column == z:
        return z, bit
    return (z, 0) if bit == 0 else (column, 0)
