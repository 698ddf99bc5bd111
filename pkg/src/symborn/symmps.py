"""Canonical matrix product states built from charge-conserving tensors.

A SymMPS is a chain of rank-3 BlockTensors, one per bit of the string. Leg
order is (left link, physical, right link) with the left link and physical
leg incoming and the right link outgoing. Site i's physical sectors are
derived from its charge column: bit 1 injects the column, bit 0 injects
nothing (a zero column collapses to one neutral sector of degeneracy two, so
an unconstrained model is the m = 0 special case of the same code path).

Exactly one tensor, the canonical center, carries a nonzero internal charge:
the negated target charge of the model. Everything to its left is a left
isometry and everything to its right a right isometry, so the squared norm
of the center tensor equals the Born normalization of the whole chain. Link
charges left of the center are running partial sums of selected columns;
links at or beyond the center are shifted down by the target, which pins the
total selected charge of every supported string to the target exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .block_tensor import (
    BlockStructureError,
    BlockTensor,
    absorb_bond_matrix,
    direct_sum,
    svd_split,
)
from .charges import (
    Charge,
    ChargedIndex,
    Direction,
    bit_sector,
    fuse,
    negate,
    site_index,
    zero,
)

def boundary_index(m: int, direction: Direction) -> ChargedIndex:
    """The trivial one-dimensional neutral index closing a chain end."""
    return ChargedIndex(((zero(m), 1),), direction)


def as_bits(x, n: int) -> tuple[int, ...]:
    """Coerce a bitstring, int sequence or 0/1 array to a tuple of bits."""
    if isinstance(x, str):
        vals = tuple(int(ch) for ch in x)
    else:
        vals = tuple(int(v) for v in x)
    if len(vals) != n:
        raise ValueError(f"expected {n} bits, got {len(vals)}")
    if any(v not in (0, 1) for v in vals):
        raise ValueError("bits must be 0 or 1")
    return vals


def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in bits)


@dataclass
class SymMPS:
    """A canonical symmetric MPS over n bits.

    Attributes
    ----------
    tensors : list of BlockTensor
        One rank-3 tensor per site.
    columns : tuple of Charge
        Charge column of each bit (column i of the constraint matrix).
    flux : Charge
        Target charge the model conserves (the constraint right-hand side).
    center : int
        Site index of the canonical center.
    """

    tensors: list[BlockTensor]
    columns: tuple[Charge, ...]
    flux: Charge
    center: int

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def charge_len(self) -> int:
        return len(self.flux)

    def bond_dimensions(self) -> list[int]:
        """Total dimension of each internal link, left to right."""
        return [t.indices[2].dim for t in self.tensors[:-1]]

    def num_parameters(self) -> int:
        return sum(t.num_parameters() for t in self.tensors)

    def copy(self) -> "SymMPS":
        return SymMPS(
            [t.copy() for t in self.tensors], self.columns, self.flux, self.center
        )

    def site_shift(self, i: int) -> Charge:
        """Charge added to the running sum when crossing site i."""
        if i == self.center:
            return negate(self.flux)
        return zero(self.charge_len)

    def amplitude(self, bits) -> float:
        """Model amplitude of one bitstring; zero when no block path exists."""
        x = as_bits(bits, self.n_sites)
        q = zero(self.charge_len)
        v = np.ones(1)
        for i in range(self.n_sites):
            c, slot = bit_sector(self.columns[i], x[i])
            q_out = fuse(fuse(q, c), self.site_shift(i))
            block = self.tensors[i].blocks.get((q, c, q_out))
            if block is None:
                return 0.0
            v = v @ block[:, slot, :]
            q = q_out
        return float(v[0])

    def amplitudes(self, xs) -> np.ndarray:
        return np.array([self.amplitude(x) for x in xs])

    def norm_squared(self, method: str = "center") -> float:
        """Born normalization, from the center tensor or by full contraction.

        "center" trusts canonical form and costs O(chi^2); "full" contracts
        the transfer network and is the independent cross-check.
        """
        if method == "center":
            nrm = self.tensors[self.center].norm()
            return float(nrm * nrm)
        if method == "full":
            env = right_environments(self)[0]
            block = env.get(zero(self.charge_len))
            return 0.0 if block is None else float(block[0, 0])
        raise ValueError(f"unknown method {method!r}")


def validate_mps(mps: SymMPS) -> None:
    """Raise BlockStructureError if the chain wiring is inconsistent."""
    n = mps.n_sites
    m = mps.charge_len
    if n == 0:
        raise BlockStructureError("empty chain")
    if len(mps.columns) != n:
        raise BlockStructureError("one charge column per site required")
    if not 0 <= mps.center < n:
        raise BlockStructureError("center out of range")
    if mps.tensors[0].indices[0].sectors != boundary_index(m, Direction.IN).sectors:
        raise BlockStructureError("left boundary must be one neutral state")
    if mps.tensors[-1].indices[2].sectors != boundary_index(m, Direction.OUT).sectors:
        raise BlockStructureError("right boundary must be one neutral state")
    for i, t in enumerate(mps.tensors):
        if t.ndim != 3:
            raise BlockStructureError(f"site {i}: rank {t.ndim} != 3")
        if t.indices[0].direction != Direction.IN:
            raise BlockStructureError(f"site {i}: left link must be incoming")
        if t.indices[1].sectors != site_index(mps.columns[i]).sectors:
            raise BlockStructureError(f"site {i}: physical sectors do not match column")
        if t.indices[2].direction != Direction.OUT:
            raise BlockStructureError(f"site {i}: right link must be outgoing")
        want = negate(mps.flux) if i == mps.center else zero(m)
        if t.flux != want:
            raise BlockStructureError(f"site {i}: flux {t.flux}, expected {want}")
        if i + 1 < n and not t.indices[2].matches_dual(mps.tensors[i + 1].indices[0]):
            raise BlockStructureError(f"link {i}: neighbor sectors disagree")


def right_environments(mps: SymMPS) -> list[dict[Charge, np.ndarray]]:
    """Per-link right environments, block-diagonal over link charges.

    Entry i maps each charge on link i (between sites i-1 and i) to the
    Gram matrix of the partial contraction of sites i..n-1 with themselves.
    Entry n is the trivial boundary; entry 0 holds the full normalization.
    """
    n = mps.n_sites
    envs: list[dict[Charge, np.ndarray]] = [dict() for _ in range(n + 1)]
    envs[n] = {zero(mps.charge_len): np.ones((1, 1))}
    for i in range(n - 1, -1, -1):
        acc: dict[Charge, np.ndarray] = {}
        for (l, _c, r), arr in mps.tensors[i].blocks.items():
            er = envs[i + 1].get(r)
            if er is None:
                continue
            contrib = np.einsum("lsr,rt,kst->lk", arr, er, arr)
            prev = acc.get(l)
            acc[l] = contrib if prev is None else prev + contrib
        envs[i] = acc
    return envs


def _move_right(mps: SymMPS, chi_max: int | None, cutoff: float) -> float:
    c = mps.center
    res = svd_split(
        mps.tensors[c], left=(0, 1), chi_max=chi_max, cutoff=cutoff,
        absorb="right", flux_side="right",
    )
    mps.tensors[c] = res.u
    mps.tensors[c + 1] = absorb_bond_matrix(mps.tensors[c + 1], res.vh, "left")
    mps.center = c + 1
    return res.error


def _move_left(mps: SymMPS, chi_max: int | None, cutoff: float) -> float:
    c = mps.center
    res = svd_split(
        mps.tensors[c], left=(0,), chi_max=chi_max, cutoff=cutoff,
        absorb="left", flux_side="left",
    )
    mps.tensors[c] = res.vh
    mps.tensors[c - 1] = absorb_bond_matrix(mps.tensors[c - 1], res.u, "right")
    mps.center = c - 1
    return res.error


def shift_center(
    mps: SymMPS, new_center: int, chi_max: int | None = None, cutoff: float = 0.0
) -> float:
    """Move the canonical center, one exact (or truncated) SVD per step.

    Returns the accumulated truncation error, zero for an exact shift.
    """
    if not 0 <= new_center < mps.n_sites:
        raise ValueError("target center out of range")
    err2 = 0.0
    while mps.center < new_center:
        err2 += _move_right(mps, chi_max, cutoff) ** 2
    while mps.center > new_center:
        err2 += _move_left(mps, chi_max, cutoff) ** 2
    return float(np.sqrt(err2))


def canonicalize(
    mps: SymMPS,
    center: int | None = None,
    chi_max: int | None = None,
    cutoff: float = 0.0,
) -> float:
    """Restore canonical form on a structurally valid but non-isometric chain.

    Sweeps the center to the left end, to the right end and back to the
    target, so every site is processed by at least one SVD regardless of
    where the chain's charge initially sits. Amplitudes are preserved
    exactly when no truncation is requested.
    """
    target = mps.center if center is None else center
    errs = [
        shift_center(mps, 0, chi_max, cutoff),
        shift_center(mps, mps.n_sites - 1, chi_max, cutoff),
        shift_center(mps, target, chi_max, cutoff),
    ]
    return float(np.sqrt(sum(e * e for e in errs)))


def normalize(mps: SymMPS) -> None:
    """Scale the center tensor so the Born distribution sums to one."""
    nrm = mps.tensors[mps.center].norm()
    if nrm == 0.0:
        raise BlockStructureError("cannot normalize a zero chain")
    mps.tensors[mps.center] = mps.tensors[mps.center].scaled(1.0 / nrm)


def mps_direct_sum(a: SymMPS, b: SymMPS, canonical_center: int | None = None) -> SymMPS:
    """Amplitude-wise sum of two chains over the same columns and target.

    Internal links concatenate sector by sector, so bond dimensions add
    where both operands carry a charge. The result is re-canonicalized
    (exactly; zero singular values from redundant directions are kept).
    """
    if a.columns != b.columns or a.flux != b.flux:
        raise BlockStructureError("direct sum needs matching columns and target")
    n = a.n_sites
    aa, bb = a.copy(), b.copy()
    shift_center(aa, 0)
    shift_center(bb, 0)
    tensors: list[BlockTensor] = []
    for i in range(n):
        if n == 1:
            summed: tuple[int, ...] = ()
        elif i == 0:
            summed = (2,)
        elif i == n - 1:
            summed = (0,)
        else:
            summed = (0, 2)
        tensors.append(direct_sum(aa.tensors[i], bb.tensors[i], summed))
    out = SymMPS(tensors, a.columns, a.flux, 0)
    canonicalize(out, 0 if canonical_center is None else canonical_center)
    return out


def enumerate_support(mps: SymMPS, limit: int = 1_000_000) -> dict[str, float]:
    """All bitstrings with a structural block path, with their amplitudes.

    Walks the charge lattice depth-first; cost is linear in the support
    size, which is capped by `limit` to protect against weakly constrained
    chains. Amplitudes that cancel to exactly 0.0 are still listed.
    """
    n = mps.n_sites
    out: dict[str, float] = {}

    def walk(i: int, q: Charge, v: np.ndarray, prefix: str) -> None:
        if i == n:
            out[prefix] = float(v[0])
            return
        for bit in (0, 1):
            c, slot = bit_sector(mps.columns[i], bit)
            q_out = fuse(fuse(q, c), mps.site_shift(i))
            block = mps.tensors[i].blocks.get((q, c, q_out))
            if block is None:
                continue
            if len(out) >= limit:
                raise RuntimeError(f"support exceeds limit of {limit} strings")
            walk(i + 1, q_out, v @ block[:, slot, :], prefix + str(bit))

    walk(0, zero(mps.charge_len), np.ones(1), "")
    return out


def support_size(mps: SymMPS) -> int:
    """Number of bitstrings with a structural block path, by exact counting."""
    counts: dict[Charge, int] = {zero(mps.charge_len): 1}
    for i in range(mps.n_sites):
        nxt: dict[Charge, int] = {}
        for q, cnt in counts.items():
            for bit in (0, 1):
                c, _slot = bit_sector(mps.columns[i], bit)
                q_out = fuse(fuse(q, c), mps.site_shift(i))
                if (q, c, q_out) in mps.tensors[i].blocks:
                    nxt[q_out] = nxt.get(q_out, 0) + cnt
        counts = nxt
    return counts.get(zero(mps.charge_len), 0)
