"""Build symmetric MPS skeletons from integer equality constraints.

The constraint system A x = b (integer matrix A, bits x) is turned into a
block structure: column i of A is the charge injected when bit i is one,
and b is the total charge every supported string must carry. A skeleton
records which partial-sum charges each link admits and which local charge
triples each site allows; filling its blocks with a common value yields an
MPS that is exactly uniform over the skeleton's support.

Skeletons come from three sources: the exact reachable-set construction
(every feasible string is supported), and two data-driven embeddings that
generalize a seed set of feasible strings either by reusing only observed
local transitions or by completing all transitions consistent with the
observed link charges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .block_tensor import BlockTensor
from .charges import (
    Charge,
    ChargedIndex,
    Direction,
    bit_sector,
    fuse,
    make_charge,
    negate,
    site_index,
    zero,
)
from .symmps import SymMPS, as_bits, canonicalize, normalize

Triple = tuple[Charge, Charge, Charge]


class ConstraintViolation(ValueError):
    """A bitstring fails one of the equality constraints."""

    def __init__(self, row: int, bits: str, got: int, want: int):
        self.row = row
        self.bits = bits
        super().__init__(
            f"constraint row {row} violated by {bits!r}: got {got}, want {want}"
        )


@dataclass(frozen=True)
class ConstraintSystem:
    """Integer equality constraints A x = b over n bits.

    A is an m x n integer matrix and b an integer m-vector. m = 0 is the
    unconstrained case; every downstream component treats it uniformly as
    charges of length zero.
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.int64)
        b = np.asarray(self.b, dtype=np.int64)
        if a.ndim != 2:
            raise ValueError("constraint matrix must be two-dimensional")
        if b.shape != (a.shape[0],):
            raise ValueError("right-hand side length must match the row count")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n_rows(self) -> int:
        return self.a.shape[0]

    @property
    def n_bits(self) -> int:
        return self.a.shape[1]

    def column(self, i: int) -> Charge:
        return make_charge(self.a[:, i])

    @property
    def columns(self) -> tuple[Charge, ...]:
        return tuple(self.column(i) for i in range(self.n_bits))

    @property
    def target(self) -> Charge:
        return make_charge(self.b)

    def satisfies(self, bits) -> bool:
        x = np.array(as_bits(bits, self.n_bits))
        return bool(np.array_equal(self.a @ x, self.b))

    def satisfies_batch(self, xs: np.ndarray) -> np.ndarray:
        """Row-wise feasibility of a (k, n) 0/1 array."""
        xs = np.asarray(xs, dtype=np.int64)
        if xs.ndim != 2 or xs.shape[1] != self.n_bits:
            raise ValueError("expected a (k, n) bit array")
        if self.n_rows == 0:
            return np.ones(xs.shape[0], dtype=bool)
        return np.all(self.a @ xs.T == self.b[:, None], axis=0)

    def check(self, bits) -> None:
        """Raise ConstraintViolation naming the first violated row."""
        x = np.array(as_bits(bits, self.n_bits))
        lhs = self.a @ x
        for row in range(self.n_rows):
            if lhs[row] != self.b[row]:
                raise ConstraintViolation(
                    row, "".join(str(v) for v in x), int(lhs[row]), int(self.b[row])
                )

    @classmethod
    def unconstrained(cls, n: int) -> "ConstraintSystem":
        return cls(np.zeros((0, n), dtype=np.int64), np.zeros(0, dtype=np.int64))

    @classmethod
    def cardinality(cls, n: int, kappa: int) -> "ConstraintSystem":
        """All strings with exactly kappa ones."""
        if not 0 <= kappa <= n:
            raise ValueError("kappa must lie in [0, n]")
        return cls(np.ones((1, n), dtype=np.int64), np.array([kappa], dtype=np.int64))

    @classmethod
    def assignment(cls, n: int, groups) -> "ConstraintSystem":
        """One-hot constraints: each group of bit positions sums to one."""
        seen: set[int] = set()
        a = np.zeros((len(groups), n), dtype=np.int64)
        for g, members in enumerate(groups):
            for i in members:
                if not 0 <= i < n:
                    raise ValueError(f"group {g}: bit index {i} out of range")
                if i in seen:
                    raise ValueError(f"bit {i} appears in more than one group")
                seen.add(i)
                a[g, i] = 1
        return cls(a, np.ones(len(groups), dtype=np.int64))


def _partial_sums(columns: tuple[Charge, ...], m: int, bits) -> list[Charge]:
    """Running partial-sum charges of one string, one entry per link (n+1)."""
    x = as_bits(bits, len(columns))
    out = [zero(m)]
    for col, xi in zip(columns, x):
        c = col if xi == 1 else zero(m)
        out.append(fuse(out[-1], c))
    return out


def link_charges_for_bitstring(system: ConstraintSystem, bits) -> list[Charge]:
    """Internal link charges of one feasible string, left to right.

    Entry i is the charge accumulated by bits 0..i, so the list has n-1
    entries: the trivial boundary values (zero on the left, the full target
    on the right) are omitted. Raises ConstraintViolation for an infeasible
    string, naming the first violated row.
    """
    system.check(bits)
    sums = _partial_sums(system.columns, system.n_rows, bits)
    return sums[1:-1]


def validate_seeds(system: ConstraintSystem, seeds) -> list[str]:
    """Deduplicate seed strings (first occurrence wins) and check each one.

    Raises ConstraintViolation naming the violated row on the first bad
    seed, and ValueError when nothing is left.
    """
    uniq: list[str] = []
    seen: set[str] = set()
    for s in seeds:
        bits = "".join(str(v) for v in as_bits(s, system.n_bits))
        if bits not in seen:
            seen.add(bits)
            uniq.append(bits)
    if not uniq:
        raise ValueError("at least one seed string is required")
    for s in uniq:
        system.check(s)
    return uniq


@dataclass
class Skeleton:
    """Block structure of a symmetric MPS, in unshifted link coordinates.

    links[i] lists the partial-sum charges admitted on link i (between
    sites i-1 and i), links[0] = [0] and links[n] = [target]. triples[i]
    lists the allowed (left, site, right) charge combinations of site i.
    Degeneracies are one; width beyond that comes from training.
    """

    columns: tuple[Charge, ...]
    target: Charge
    links: list[list[Charge]]
    triples: list[list[Triple]]

    @property
    def n_sites(self) -> int:
        return len(self.columns)

    def bond_dimensions(self) -> list[int]:
        return [len(qs) for qs in self.links[1:-1]]

    def support_size(self) -> int:
        """Number of strings the skeleton supports, by path counting."""
        m = len(self.target)
        counts = {zero(m): 1}
        for i in range(self.n_sites):
            allowed = set(self.triples[i])
            nxt: dict[Charge, int] = {}
            for q, cnt in counts.items():
                for bit in (0, 1):
                    c = self.columns[i] if bit == 1 else zero(m)
                    r = fuse(q, c)
                    if (q, c, r) in allowed:
                        nxt[r] = nxt.get(r, 0) + cnt
            counts = nxt
        return counts.get(self.target, 0)


def _seed_links(system: ConstraintSystem, seeds) -> tuple[list[str], list[set[Charge]]]:
    """Validate and dedupe seeds, returning their union of link charges."""
    uniq = validate_seeds(system, seeds)
    columns = system.columns
    links: list[set[Charge]] = [set() for _ in range(system.n_bits + 1)]
    for s in uniq:
        for i, q in enumerate(_partial_sums(columns, system.n_rows, s)):
            links[i].add(q)
    return uniq, links


def skeleton_from_transitions(system: ConstraintSystem, seeds) -> Skeleton:
    """Skeleton from the local transitions observed in the seed strings.

    Each seed contributes its (left charge, site charge, right charge)
    triple at every site; nothing else is allowed. The support is the set
    of strings whose every local transition was seen in some seed, which
    contains the seeds and usually little more.
    """
    uniq, links = _seed_links(system, seeds)
    columns = system.columns
    m = system.n_rows
    observed: list[set[Triple]] = [set() for _ in range(system.n_bits)]
    for s in uniq:
        x = as_bits(s, system.n_bits)
        qs = _partial_sums(columns, m, s)
        for i in range(system.n_bits):
            c = columns[i] if x[i] == 1 else zero(m)
            observed[i].add((qs[i], c, qs[i + 1]))
    return Skeleton(
        columns=columns,
        target=system.target,
        links=[sorted(qs) for qs in links],
        triples=[sorted(ts) for ts in observed],
    )


def skeleton_from_link_charges(system: ConstraintSystem, seeds) -> Skeleton:
    """Skeleton from the link charges observed in the seed strings.

    Keeps the union of partial-sum charges per link and allows every local
    transition consistent with those charges, not only the observed ones.
    The support is the set of strings whose running partial sums stay
    inside the observed charge sets; it contains the transition-embedding
    support and generalizes more aggressively.
    """
    _, links = _seed_links(system, seeds)
    columns = system.columns
    m = system.n_rows
    triples: list[list[Triple]] = []
    for i in range(system.n_bits):
        site_charges = {zero(m), columns[i]}
        ts = {
            (q, c, fuse(q, c))
            for q in links[i]
            for c in site_charges
            if fuse(q, c) in links[i + 1]
        }
        triples.append(sorted(ts))
    return Skeleton(
        columns=columns,
        target=system.target,
        links=[sorted(qs) for qs in links],
        triples=triples,
    )


def exact_skeleton(system: ConstraintSystem, max_states: int = 1_000_000) -> Skeleton:
    """Skeleton supporting every feasible string of the constraint system.

    Intersects forward-reachable partial sums with backward-coreachable
    ones, so no link charge or triple is off any full feasible path. The
    per-link state count is capped by max_states; integer matrices with
    bounded entries keep it polynomial for fixed row count.
    """
    n = system.n_bits
    m = system.n_rows
    columns = system.columns
    forward: list[set[Charge]] = [{zero(m)}]
    for i in range(n):
        cur = forward[-1]
        nxt = set(cur)
        for q in cur:
            nxt.add(fuse(q, columns[i]))
        if len(nxt) > max_states:
            raise RuntimeError(f"reachable charge set exceeds {max_states} states")
        forward.append(nxt)
    backward: list[set[Charge]] = [set() for _ in range(n + 1)]
    backward[n] = {system.target}
    for i in range(n - 1, -1, -1):
        cur = backward[i + 1]
        prv = set(cur)
        neg = negate(columns[i])
        for q in cur:
            prv.add(fuse(q, neg))
        backward[i] = prv
    links = [sorted(forward[i] & backward[i]) for i in range(n + 1)]
    if not links[n]:
        raise ValueError("constraint system has no feasible string")
    live = [set(qs) for qs in links]
    triples: list[list[Triple]] = []
    for i in range(n):
        site_charges = {zero(m), columns[i]}
        ts = {
            (q, c, fuse(q, c))
            for q in live[i]
            for c in site_charges
            if fuse(q, c) in live[i + 1]
        }
        triples.append(sorted(ts))
    return Skeleton(columns=columns, target=system.target, links=links, triples=triples)


def _shifted(q: Charge, shift_it: bool, target: Charge) -> Charge:
    return fuse(q, negate(target)) if shift_it else q


def _materialize(skeleton: Skeleton, center: int, block_fill) -> SymMPS:
    """Raw (non-canonical) chain from a skeleton; block_fill(shape) -> array."""
    n = skeleton.n_sites
    if n == 0:
        raise ValueError("cannot build an empty chain")
    if not 0 <= center < n:
        raise ValueError("center out of range")
    target = skeleton.target
    tensors: list[BlockTensor] = []
    for i in range(n):
        shift_l = i >= center + 1
        shift_r = i >= center
        left_idx = ChargedIndex(
            tuple((_shifted(q, shift_l, target), 1) for q in skeleton.links[i]),
            Direction.IN,
        )
        right_idx = ChargedIndex(
            tuple((_shifted(q, shift_r, target), 1) for q in skeleton.links[i + 1]),
            Direction.OUT,
        )
        phys = site_index(skeleton.columns[i])
        blocks = {}
        for l, c, r in skeleton.triples[i]:
            key = (_shifted(l, shift_l, target), c, _shifted(r, shift_r, target))
            blocks[key] = block_fill((1, phys.degeneracy(c), 1))
        flux = negate(target) if i == center else zero(len(target))
        tensors.append(BlockTensor([left_idx, phys, right_idx], flux, blocks))
    return SymMPS(tensors, skeleton.columns, target, center)


def skeleton_to_mps(skeleton: Skeleton, center: int = 0, fill: float = 1.0) -> SymMPS:
    """Materialize a skeleton as a normalized MPS, uniform over its support.

    Every allowed block is filled with the same positive value. Because all
    link degeneracies are one, each supported string's amplitude is the
    same product of identical scalars, so after canonicalization and
    normalization the Born distribution is exactly uniform on the support.
    """
    if fill <= 0.0:
        raise ValueError("fill value must be positive")
    mps = _materialize(skeleton, center, lambda shape: np.full(shape, fill))
    canonicalize(mps, center)
    normalize(mps)
    return mps


def embed_method1(system: ConstraintSystem, seeds, center: int | None = None) -> SymMPS:
    """Seed-transition embedding, materialized as a uniform-filled model.

    Supports exactly the strings whose every local transition occurs in a
    seed. Center and flux sit at the last site unless overridden.
    """
    sk = skeleton_from_transitions(system, seeds)
    return skeleton_to_mps(sk, sk.n_sites - 1 if center is None else center)


def embed_method2(system: ConstraintSystem, seeds, center: int | None = None) -> SymMPS:
    """Link-charge embedding, materialized as a uniform-filled model.

    Admits every transition consistent with the charges the seeds visit,
    so its support contains the transition embedding's. This is the
    default embedding for the optimization loop.
    """
    sk = skeleton_from_link_charges(system, seeds)
    return skeleton_to_mps(sk, sk.n_sites - 1 if center is None else center)


def build_cardinality_mps(n: int, kappa: int, center: int | None = None) -> SymMPS:
    """Uniform model over all length-n strings with exactly kappa ones."""
    return skeleton_to_mps(
        exact_skeleton(ConstraintSystem.cardinality(n, kappa)),
        n - 1 if center is None else center,
    )


def build_assignment_mps(n: int, groups, center: int | None = None) -> SymMPS:
    """Uniform model over one-hot assignments of the given bit groups."""
    return skeleton_to_mps(
        exact_skeleton(ConstraintSystem.assignment(n, groups)),
        n - 1 if center is None else center,
    )


def uniform_fill(mps: SymMPS, value: float = 1.0) -> SymMPS:
    """Reset every block of an existing chain to a common positive value.

    Keeps the structural tensors (sectors, degeneracies, support) and
    discards the amplitudes. For an all-degeneracy-one structure the
    result is exactly uniform over the support; with wider links it is
    only guaranteed positive on the support.
    """
    if value <= 0.0:
        raise ValueError("fill value must be positive")
    tensors = [
        BlockTensor(
            t.indices, t.flux, {k: np.full(a.shape, value) for k, a in t.blocks.items()}
        )
        for t in mps.tensors
    ]
    out = SymMPS(tensors, mps.columns, mps.flux, mps.center)
    canonicalize(out, mps.center)
    normalize(out)
    return out


def random_mps(
    n: int,
    chi: int,
    rng: np.random.Generator,
    system: ConstraintSystem | None = None,
    center: int = 0,
) -> SymMPS:
    """Random dense-filled MPS; unconstrained by default.

    Without constraints this is a plain dense MPS written as a one-sector
    chain (charges of length zero, physical degeneracy two). With a system
    it fills the exact skeleton's blocks with random positive values, so
    feasibility is still built in but the distribution is rough.
    """
    if system is None:
        system = ConstraintSystem.unconstrained(n)
    if system.n_bits != n:
        raise ValueError("system size must match n")
    if system.n_rows == 0:
        # Dense case: one neutral sector per link at the requested width.
        dims = [1] + [min(chi, 2 ** min(i, n - i)) for i in range(1, n)] + [1]
        tensors = []
        for i in range(n):
            left_idx = ChargedIndex(((zero(0), dims[i]),), Direction.IN)
            right_idx = ChargedIndex(((zero(0), dims[i + 1]),), Direction.OUT)
            arr = rng.normal(size=(dims[i], 2, dims[i + 1]))
            tensors.append(
                BlockTensor(
                    [left_idx, site_index(zero(0)), right_idx],
                    zero(0),
                    {(zero(0), zero(0), zero(0)): arr},
                )
            )
        mps = SymMPS(tensors, tuple(zero(0) for _ in range(n)), zero(0), center)
    else:
        mps = _materialize(
            exact_skeleton(system),
            center,
            lambda shape: rng.uniform(0.2, 1.0, size=shape),
        )
    canonicalize(mps, center)
    normalize(mps)
    return mps


def _link_rank_bounds(mps: SymMPS, i: int) -> dict[Charge, int]:
    """Largest useful degeneracy per charge on the link right of site i.

    A sector cannot carry more independent directions than either side
    feeds it, so the bound is the smaller of the two fan-ins computed from
    the current block structure.
    """
    from_left: dict[Charge, int] = {}
    for (l, c, r), _ in mps.tensors[i].blocks.items():
        d = mps.tensors[i].indices[0].degeneracy(l) * mps.tensors[i].indices[1].degeneracy(c)
        from_left[r] = from_left.get(r, 0) + d
    from_right: dict[Charge, int] = {}
    for (l, c, r), _ in mps.tensors[i + 1].blocks.items():
        d = mps.tensors[i + 1].indices[1].degeneracy(c) * mps.tensors[i + 1].indices[2].degeneracy(r)
        from_right[l] = from_right.get(l, 0) + d
    return {
        q: min(from_left.get(q, 0), from_right.get(q, 0))
        for q in set(from_left) | set(from_right)
    }


def expand_degeneracy(
    mps: SymMPS, d: int, noise: float = 0.0, rng: np.random.Generator | None = None
) -> SymMPS:
    """Raise internal link degeneracies toward d, never shrinking.

    Each sector on each internal link grows to min(d, local rank bound),
    existing amplitudes embedded in the leading corner and new entries
    filled with noise-scaled randomness (zeros when noise is 0, preserving
    every amplitude exactly). Training widens bonds only within the space
    the merged blocks span, so this is the explicit capacity knob.
    """
    if d < 1:
        raise ValueError("target degeneracy must be at least 1")
    if noise > 0 and rng is None:
        raise ValueError("noise requires an rng")
    n = mps.n_sites
    # Target degeneracy per internal link and charge, in tensor coordinates.
    targets: list[dict[Charge, int]] = []
    for i in range(n - 1):
        bounds = _link_rank_bounds(mps, i)
        idx = mps.tensors[i].indices[2]
        targets.append(
            {q: max(idx.degeneracy(q), min(d, bounds.get(q, 1))) for q in idx.charges}
        )
    new_tensors: list[BlockTensor] = []
    for i, t in enumerate(mps.tensors):
        left_t = targets[i - 1] if i > 0 else {}
        right_t = targets[i] if i < n - 1 else {}
        indices = [
            t.indices[0]
            if i == 0
            else ChargedIndex(
                tuple((q, left_t[q]) for q, _ in t.indices[0].sectors),
                Direction.IN,
            ),
            t.indices[1],
            t.indices[2]
            if i == n - 1
            else ChargedIndex(
                tuple((q, right_t[q]) for q, _ in t.indices[2].sectors),
                Direction.OUT,
            ),
        ]
        blocks = {}
        for key, arr in t.blocks.items():
            shape = tuple(idx.degeneracy(q) for q, idx in zip(key, indices))
            if noise > 0:
                grown = rng.normal(scale=noise, size=shape)
            else:
                grown = np.zeros(shape)
            grown[: arr.shape[0], : arr.shape[1], : arr.shape[2]] = arr
            blocks[key] = grown
        new_tensors.append(BlockTensor(indices, t.flux, blocks))
    out = SymMPS(new_tensors, mps.columns, mps.flux, mps.center)
    canonicalize(out, mps.center)
    return out
