"""Block-sparse tensors with abelian charge conservation.

A BlockTensor stores only the dense blocks allowed by its conservation rule:
for flux f, every stored block key satisfies

    f + sum(charges on IN indices) = sum(charges on OUT indices).

Blocks are keyed by one charge per index and hold float64 arrays whose shape
matches the sector degeneracies. All operations are deterministic: sectors
are kept in lexicographic charge order and truncation ties prefer the smaller
bond charge.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .charges import Charge, ChargedIndex, Direction, fuse, negate, subtract, zero

BlockKey = tuple[Charge, ...]


class BlockStructureError(ValueError):
    """A block violates the index sectors or the conservation rule."""


class BlockTensor:
    """A charge-conserving block-sparse tensor.

    Parameters
    ----------
    indices : sequence of ChargedIndex
        One per tensor leg, in leg order.
    flux : Charge
        The tensor's own charge; zero for invariant tensors.
    blocks : mapping from block key to ndarray
        Only conservation-allowed keys may appear. Arrays are converted to
        float64 and their shapes checked against sector degeneracies.
    """

    __slots__ = ("indices", "flux", "blocks")

    def __init__(
        self,
        indices: Sequence[ChargedIndex],
        flux: Charge,
        blocks: Mapping[BlockKey, np.ndarray],
    ):
        self.indices: tuple[ChargedIndex, ...] = tuple(indices)
        self.flux: Charge = tuple(flux)
        self.blocks: dict[BlockKey, np.ndarray] = {
            key: np.asarray(arr, dtype=np.float64) for key, arr in blocks.items()
        }
        self._validate()

    def _validate(self) -> None:
        m = len(self.flux)
        for idx in self.indices:
            for c, _ in idx.sectors:
                if len(c) != m:
                    raise BlockStructureError(
                        f"index charge length {len(c)} != flux length {m}"
                    )
        for key, arr in self.blocks.items():
            if len(key) != len(self.indices):
                raise BlockStructureError(f"block key {key} has wrong arity")
            shape = []
            for q, idx in zip(key, self.indices):
                if not idx.has_charge(q):
                    raise BlockStructureError(f"charge {q} not a sector of its index")
                shape.append(idx.degeneracy(q))
            if arr.shape != tuple(shape):
                raise BlockStructureError(
                    f"block {key} has shape {arr.shape}, expected {tuple(shape)}"
                )
            if not self._conserves(key):
                raise BlockStructureError(f"block {key} violates conservation")

    def _conserves(self, key: BlockKey) -> bool:
        total = self.flux
        for q, idx in zip(key, self.indices):
            if idx.direction is Direction.IN:
                total = fuse(total, q)
            else:
                total = subtract(total, q)
        return total == zero(len(self.flux))

    @property
    def ndim(self) -> int:
        return len(self.indices)

    @property
    def charge_len(self) -> int:
        return len(self.flux)

    def norm(self) -> float:
        """Frobenius norm over all stored blocks."""
        total = 0.0
        for arr in self.blocks.values():
            total += float(np.sum(arr * arr))
        return float(np.sqrt(total))

    def num_parameters(self) -> int:
        return sum(arr.size for arr in self.blocks.values())

    def scaled(self, factor: float) -> "BlockTensor":
        return BlockTensor(
            self.indices,
            self.flux,
            {k: arr * factor for k, arr in self.blocks.items()},
        )

    def copy(self) -> "BlockTensor":
        return BlockTensor(
            self.indices, self.flux, {k: arr.copy() for k, arr in self.blocks.items()}
        )

    def __repr__(self) -> str:
        dims = "x".join(str(i.dim) for i in self.indices)
        return f"BlockTensor(dims={dims}, blocks={len(self.blocks)}, flux={self.flux})"


def _charge_balance(t: BlockTensor, key: BlockKey, positions: Iterable[int]) -> Charge:
    """sum(IN charges) - sum(OUT charges) restricted to the given legs."""
    total = zero(t.charge_len)
    for p in positions:
        if t.indices[p].direction is Direction.IN:
            total = fuse(total, key[p])
        else:
            total = subtract(total, key[p])
    return total


def contract(
    a: BlockTensor, b: BlockTensor, pairs: Sequence[tuple[int, int]]
) -> BlockTensor:
    """Contract `a` and `b` over the given (a_pos, b_pos) index pairs.

    Paired indices must carry identical sector lists and opposite directions.
    Free indices keep their order, a's first. The result flux is the fused
    flux of the operands.
    """
    if not pairs:
        raise ValueError("contract requires at least one index pair")
    a_axes = [p[0] for p in pairs]
    b_axes = [p[1] for p in pairs]
    if len(set(a_axes)) != len(a_axes) or len(set(b_axes)) != len(b_axes):
        raise ValueError("repeated index in contraction pairs")
    for i, j in pairs:
        if not a.indices[i].matches_dual(b.indices[j]):
            raise BlockStructureError(
                f"contracted pair ({i}, {j}) does not match as dual indices"
            )

    a_free = [p for p in range(a.ndim) if p not in a_axes]
    b_free = [p for p in range(b.ndim) if p not in b_axes]

    # Bucket b's blocks by the charges on its contracted legs, aligned to pair
    # order, so each a block only meets compatible partners.
    buckets: dict[tuple[Charge, ...], list[tuple[BlockKey, np.ndarray]]] = {}
    for key, arr in b.blocks.items():
        sig = tuple(key[j] for j in b_axes)
        buckets.setdefault(sig, []).append((key, arr))

    out_blocks: dict[BlockKey, np.ndarray] = {}
    for akey, aarr in a.blocks.items():
        sig = tuple(akey[i] for i in a_axes)
        for bkey, barr in buckets.get(sig, ()):
            out_key = tuple(akey[i] for i in a_free) + tuple(bkey[j] for j in b_free)
            piece = np.tensordot(aarr, barr, axes=(a_axes, b_axes))
            if out_key in out_blocks:
                out_blocks[out_key] = out_blocks[out_key] + piece
            else:
                out_blocks[out_key] = piece

    out_indices = [a.indices[i] for i in a_free] + [b.indices[j] for j in b_free]
    return BlockTensor(out_indices, fuse(a.flux, b.flux), out_blocks)


def merge_two_site(left: BlockTensor, right: BlockTensor) -> BlockTensor:
    """Contract two neighboring rank-3 MPS tensors over their shared link."""
    if left.ndim != 3 or right.ndim != 3:
        raise ValueError("merge_two_site expects rank-3 tensors")
    if not left.indices[2].matches_dual(right.indices[0]):
        raise BlockStructureError("shared link mismatch between neighbors")
    return contract(left, right, [(2, 0)])


@dataclass
class SplitResult:
    """Outcome of svd_split.

    u and vh are the two factors; `s` holds the kept singular values per bond
    charge (already multiplied into a factor when absorb != "none").
    """

    u: BlockTensor
    s: dict[Charge, np.ndarray]
    vh: BlockTensor
    bond: ChargedIndex
    error: float


def svd_split(
    t: BlockTensor,
    left: Sequence[int],
    chi_max: int | None = None,
    cutoff: float = 0.0,
    absorb: str = "none",
    flux_side: str = "right",
    truncation: str = "global",
) -> SplitResult:
    """Split a tensor across a bipartition of its legs by sector-wise SVD.

    Blocks are grouped by the charge flowing across the cut, each group is
    matricized (left legs as rows, right legs as columns, configurations in
    lexicographic charge order) and SVD'd. With truncation "global" the
    chi_max largest singular values are kept in one ranking across all bond
    charges (ties toward the lexicographically smaller charge), so the total
    bond dimension is at most chi_max but a charge sector can be emptied
    outright. With truncation "sector" each bond charge keeps its own chi_max
    largest values, which never removes a sector and bounds the total bond by
    chi_max times the sector count. Either way, values at or below
    cutoff * (largest kept value) are dropped afterwards, and bond sectors
    left empty are removed.

    The new bond is OUT on u and IN on vh. By default u has zero flux and vh
    carries the flux of t, so for MPS tensors the canonical center moves into
    the vh factor; flux_side "left" assigns the flux to u instead (used when
    the center moves leftward), which shifts every bond charge by the flux.
    absorb is "none", "left" or "right" and picks the factor the singular
    values are multiplied into.
    """
    if absorb not in ("none", "left", "right"):
        raise ValueError(f"unknown absorb mode {absorb!r}")
    if flux_side not in ("left", "right"):
        raise ValueError(f"unknown flux_side {flux_side!r}")
    if truncation not in ("global", "sector"):
        raise ValueError(f"unknown truncation mode {truncation!r}")
    left = tuple(left)
    if len(set(left)) != len(left):
        raise ValueError("repeated position in left group")
    if not left or len(left) >= t.ndim:
        raise ValueError("left group must be a proper nonempty subset of legs")
    right = tuple(p for p in range(t.ndim) if p not in left)

    m = t.charge_len

    # Group blocks by bond charge. The bond charge of a block is the charge
    # balance of its left legs, which conservation makes equal on both sides.
    groups: dict[Charge, list[BlockKey]] = {}
    for key in t.blocks:
        q = _charge_balance(t, key, left)
        groups.setdefault(q, []).append(key)

    perm = left + right
    svd_data: dict[Charge, dict] = {}
    for q in sorted(groups):
        keys = groups[q]
        row_cfgs = sorted({tuple(k[p] for p in left) for k in keys})
        col_cfgs = sorted({tuple(k[p] for p in right) for k in keys})
        row_dims = [
            int(np.prod([t.indices[p].degeneracy(c) for p, c in zip(left, cfg)]))
            for cfg in row_cfgs
        ]
        col_dims = [
            int(np.prod([t.indices[p].degeneracy(c) for p, c in zip(right, cfg)]))
            for cfg in col_cfgs
        ]
        row_off = np.concatenate([[0], np.cumsum(row_dims)])
        col_off = np.concatenate([[0], np.cumsum(col_dims)])
        mat = np.zeros((int(row_off[-1]), int(col_off[-1])))
        for key in keys:
            r = row_cfgs.index(tuple(key[p] for p in left))
            c = col_cfgs.index(tuple(key[p] for p in right))
            arr = np.transpose(t.blocks[key], perm)
            mat[row_off[r]:row_off[r + 1], col_off[c]:col_off[c + 1]] = arr.reshape(
                row_dims[r], col_dims[c]
            )
        u_q, s_q, vh_q = np.linalg.svd(mat, full_matrices=False)
        svd_data[q] = {
            "u": u_q,
            "s": s_q,
            "vh": vh_q,
            "row_cfgs": row_cfgs,
            "col_cfgs": col_cfgs,
            "row_dims": row_dims,
            "col_dims": col_dims,
            "row_off": row_off,
            "col_off": col_off,
        }

    # Global ranking across sectors; ties go to the smaller bond charge.
    ranked = sorted(
        (
            (-s, q, k)
            for q, data in svd_data.items()
            for k, s in enumerate(data["s"])
        ),
    )
    if chi_max is not None:
        if chi_max < 1:
            raise ValueError("chi_max must be >= 1")
        if truncation == "global":
            kept_entries = ranked[:chi_max]
        else:
            # entries carry the position within their sector's sorted values,
            # so position < chi_max is exactly the per-sector top chi_max
            kept_entries = [e for e in ranked if e[2] < chi_max]
    else:
        kept_entries = ranked
    if cutoff > 0.0 and kept_entries:
        smax = -kept_entries[0][0]
        kept_entries = [e for e in kept_entries if -e[0] > cutoff * smax]

    kept: dict[Charge, int] = {}
    for _, q, k in kept_entries:
        kept[q] = max(kept.get(q, 0), k + 1)
    # Singular values are sorted per sector, so keeping the k-th implies
    # keeping everything above it; count per sector is max kept position + 1.

    err2 = 0.0
    for q, data in svd_data.items():
        nk = kept.get(q, 0)
        tail = data["s"][nk:]
        err2 += float(np.sum(tail * tail))

    if not kept:
        raise BlockStructureError("truncation removed every singular value")

    # With the flux on u every bond charge is shifted by it; the grouping
    # charge q stays the internal key.
    if flux_side == "right":
        label = {q: q for q in kept}
        u_flux, vh_flux = zero(m), t.flux
    else:
        label = {q: fuse(t.flux, q) for q in kept}
        u_flux, vh_flux = t.flux, zero(m)

    bond_sectors = tuple(sorted((label[q], nk) for q, nk in kept.items() if nk > 0))
    bond_u = ChargedIndex(bond_sectors, Direction.OUT)
    bond_v = ChargedIndex(bond_sectors, Direction.IN)

    s_kept: dict[Charge, np.ndarray] = {
        label[q]: svd_data[q]["s"][:nk].copy() for q, nk in kept.items()
    }

    u_blocks: dict[BlockKey, np.ndarray] = {}
    vh_blocks: dict[BlockKey, np.ndarray] = {}
    for q, nk in kept.items():
        data = svd_data[q]
        u_mat = data["u"][:, :nk]
        vh_mat = data["vh"][:nk, :]
        if absorb == "left":
            u_mat = u_mat * data["s"][:nk][None, :]
        elif absorb == "right":
            vh_mat = vh_mat * data["s"][:nk][:, None]
        for r, cfg in enumerate(data["row_cfgs"]):
            sl = u_mat[data["row_off"][r]:data["row_off"][r + 1], :]
            dims = [t.indices[p].degeneracy(c) for p, c in zip(left, cfg)]
            u_blocks[tuple(cfg) + (label[q],)] = sl.reshape(*dims, nk)
        for c, cfg in enumerate(data["col_cfgs"]):
            sl = vh_mat[:, data["col_off"][c]:data["col_off"][c + 1]]
            dims = [t.indices[p].degeneracy(ch) for p, ch in zip(right, cfg)]
            vh_blocks[(label[q],) + tuple(cfg)] = sl.reshape(nk, *dims)

    u = BlockTensor(
        [t.indices[p] for p in left] + [bond_u], u_flux, u_blocks
    )
    vh = BlockTensor(
        [bond_v] + [t.indices[p] for p in right], vh_flux, vh_blocks
    )
    return SplitResult(u=u, s=s_kept, vh=vh, bond=bond_u, error=float(np.sqrt(err2)))


def direct_sum(
    a: BlockTensor, b: BlockTensor, summed: Sequence[int]
) -> BlockTensor:
    """Direct sum along the `summed` legs, block-diagonal per charge.

    Non-summed legs and the flux must agree exactly. On each summed leg a
    sector's degeneracy becomes d_a + d_b (zero for an operand lacking the
    charge); a's data lands in the leading corner and b's in the trailing
    corner, with the mixed corners zero.
    """
    summed = tuple(summed)
    if a.ndim != b.ndim:
        raise ValueError("operands must have equal rank")
    if a.flux != b.flux:
        raise BlockStructureError("direct_sum requires equal flux")
    for p in range(a.ndim):
        if a.indices[p].direction != b.indices[p].direction:
            raise BlockStructureError(f"direction mismatch on leg {p}")
        if p not in summed and a.indices[p].sectors != b.indices[p].sectors:
            raise BlockStructureError(f"non-summed leg {p} differs between operands")

    new_indices: list[ChargedIndex] = []
    for p in range(a.ndim):
        if p not in summed:
            new_indices.append(a.indices[p])
            continue
        charges = sorted(set(a.indices[p].charges) | set(b.indices[p].charges))
        sectors = []
        for q in charges:
            da = a.indices[p].degeneracy(q) if a.indices[p].has_charge(q) else 0
            db = b.indices[p].degeneracy(q) if b.indices[p].has_charge(q) else 0
            sectors.append((q, da + db))
        new_indices.append(ChargedIndex(tuple(sectors), a.indices[p].direction))

    def a_offset(p: int, q: Charge) -> int:
        return 0

    def b_offset(p: int, q: Charge) -> int:
        if a.indices[p].has_charge(q):
            return a.indices[p].degeneracy(q)
        return 0

    out: dict[BlockKey, np.ndarray] = {}
    for source, offset_of in ((a, a_offset), (b, b_offset)):
        for key, arr in source.blocks.items():
            if key not in out:
                shape = tuple(
                    idx.degeneracy(q) for q, idx in zip(key, new_indices)
                )
                out[key] = np.zeros(shape)
            slices = []
            for p, q in enumerate(key):
                if p in summed:
                    off = offset_of(p, q)
                    slices.append(slice(off, off + arr.shape[p]))
                else:
                    slices.append(slice(None))
            out[key][tuple(slices)] += arr

    return BlockTensor(new_indices, a.flux, out)


def absorb_bond_matrix(site: BlockTensor, bond_factor: BlockTensor, side: str) -> BlockTensor:
    """Contract a rank-2 bond factor into a rank-3 MPS tensor.

    side "left" multiplies the factor into the tensor's left link and side
    "right" into its right link; the result keeps the MPS leg order.
    """
    if side == "right":
        return contract(site, bond_factor, [(2, 0)])
    if side == "left":
        out = contract(bond_factor, site, [(1, 0)])
        return out
    raise ValueError(f"unknown side {side!r}")
