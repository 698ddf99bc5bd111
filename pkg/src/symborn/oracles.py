"""Independent ground-truth engines for tests and benchmarks.

Everything here is deliberately naive or classical: exhaustive sweeps,
meet-in-the-middle and dynamic-programming subset-sum solvers, dense tensor
references, and the closed-form count of low-cost cardinality strings. The
main library never calls these for its own logic; they exist to check it.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import comb

import numpy as np

from .block_tensor import BlockKey, BlockTensor
from .charges import Charge, ChargedIndex, Direction, fuse, zero
from .constraint_builder import ConstraintSystem


@dataclass(frozen=True)
class SolutionSet:
    """A set of feasible bitstrings; complete means exhaustive."""

    bitstrings: tuple[str, ...]
    complete: bool

    def __post_init__(self):
        object.__setattr__(self, "bitstrings", tuple(sorted(self.bitstrings)))

    def __len__(self) -> int:
        return len(self.bitstrings)

    def __contains__(self, s: str) -> bool:
        return s in set(self.bitstrings)


def _int_to_bits(values: np.ndarray, n: int) -> np.ndarray:
    """Rows of bits, most significant first, for a vector of integers."""
    shifts = np.arange(n - 1, -1, -1, dtype=np.uint64)
    return ((values[:, None] >> shifts[None, :]) & 1).astype(np.int64)


def enumerate_solutions(system: ConstraintSystem, max_bits: int = 26) -> SolutionSet:
    """Every feasible string by exhaustive sweep; guarded at 2^max_bits."""
    n = system.n_bits
    if n > max_bits:
        raise ValueError(f"exhaustive enumeration limited to {max_bits} bits")
    found: list[str] = []
    chunk = 1 << 20
    for start in range(0, 1 << n, chunk):
        stop = min(start + chunk, 1 << n)
        vals = np.arange(start, stop, dtype=np.uint64)
        bits = _int_to_bits(vals, n)
        mask = system.satisfies_batch(bits)
        for row in bits[mask]:
            found.append("".join("1" if v else "0" for v in row))
    return SolutionSet(tuple(found), complete=True)


def solve_single_equality_mitm(a, b: int, max_bits: int = 40) -> SolutionSet:
    """All solutions of a single equality by meet in the middle.

    Splits the variables in half, enumerates both halves and joins on
    complementary partial sums, trading the 2^N sweep for 2^(N/2) work
    plus the size of the output. The output itself can still be huge;
    callers own that risk.
    """
    a = np.asarray(a, dtype=np.int64)
    if a.ndim != 1:
        raise ValueError("expected a single coefficient vector")
    n = a.shape[0]
    if n > max_bits:
        raise ValueError(f"meet-in-the-middle limited to {max_bits} bits")
    nl = n // 2
    left_cols, right_cols = a[:nl], a[nl:]

    def half_sums(cols: np.ndarray) -> dict[int, list[str]]:
        k = cols.shape[0]
        out: dict[int, list[str]] = {}
        vals = np.arange(1 << k, dtype=np.uint64)
        bits = _int_to_bits(vals, k)
        sums = bits @ cols
        for row, s in zip(bits, sums):
            out.setdefault(int(s), []).append("".join("1" if v else "0" for v in row))
        return out

    left = half_sums(left_cols)
    right = half_sums(right_cols)
    found = [
        ls + rs
        for s, lstrs in left.items()
        if (int(b) - s) in right
        for ls in lstrs
        for rs in right[int(b) - s]
    ]
    return SolutionSet(tuple(found), complete=True)


def solve_single_equality_dp(
    a, b: int, reconstruct: bool = False
) -> tuple[int, SolutionSet | None]:
    """Count (and optionally list) solutions of a nonnegative equality.

    Standard pseudopolynomial dynamic program over partial sums 0..b.
    Counts use exact big integers. Reconstruction walks the DP table
    backwards and is exponential in the output size.
    """
    a = np.asarray(a, dtype=np.int64)
    if a.ndim != 1:
        raise ValueError("expected a single coefficient vector")
    if np.any(a < 0):
        raise ValueError("dynamic program requires nonnegative coefficients")
    if b < 0:
        return 0, (SolutionSet((), True) if reconstruct else None)
    n = a.shape[0]
    # table[i][s] = number of completions of bits i..n-1 summing to s
    table: list[dict[int, int]] = [dict() for _ in range(n + 1)]
    table[n] = {0: 1}
    for i in range(n - 1, -1, -1):
        cur: dict[int, int] = {}
        for s, cnt in table[i + 1].items():
            cur[s] = cur.get(s, 0) + cnt
            s1 = s + int(a[i])
            if s1 <= b:
                cur[s1] = cur.get(s1, 0) + cnt
        table[i] = cur
    count = table[0].get(int(b), 0)
    if not reconstruct:
        return count, None
    found: list[str] = []

    def walk(i: int, need: int, prefix: str) -> None:
        if i == n:
            if need == 0:
                found.append(prefix)
            return
        if table[i + 1].get(need, 0):
            walk(i + 1, need, prefix + "0")
        rem = need - int(a[i])
        if rem >= 0 and table[i + 1].get(rem, 0):
            walk(i + 1, rem, prefix + "1")

    walk(0, int(b), "")
    return count, SolutionSet(tuple(found), complete=True)


def degeneracy_count(a: int, kappa: int, n: int) -> int:
    """Number of cardinality-kappa strings at the a-th gap-cost level.

    Counts strings of n bits with kappa ones whose largest zero gap
    between consecutive ones has size n - kappa - a, i.e. gap cost
    -n + kappa + a - 1. Exact big-integer evaluation of the two-branch
    binomial formula, restricted to the single-dominant-gap regime
    2a < n - kappa. The base level a=0 is the known anchor kappa - 1;
    the general branch formula evaluates to 3(kappa-1) there, which
    disagrees with both the anchor and brute-force counting, so a=0 is
    special-cased (see the exhaustive cross-check in the test suite).
    """
    if kappa < 1 or a < 0:
        raise ValueError("need kappa >= 1 and a >= 0")
    if 2 * a >= n - kappa:
        raise ValueError("outside the single-dominant-gap regime 2a < n - kappa")
    if a == 0:
        return kappa - 1
    total = 2 * sum(comb(i, a) for i in range(a, kappa + a - 1))
    if a % 2 == 1:
        total += 2 * sum(
            comb(i, a - j) * comb(kappa + a - 2 - i, j)
            for j in range(1, (a - 1) // 2 + 1)
            for i in range(a - j, kappa + a - 1 - j)
        )
    else:
        total += 2 * sum(
            comb(i, a - j) * comb(kappa + a - 2 - i, j)
            for j in range(1, a // 2)
            for i in range(a - j, kappa + a - 1 - j)
        )
        h = a // 2
        total += sum(comb(i, h) * comb(kappa + a - 2 - i, h) for i in range(h, kappa - 1 + h))
    return total


def random_valid_search(
    system: ConstraintSystem, budget: int, rng: np.random.Generator
) -> list[str]:
    """Uniform random strings filtered by feasibility, deduplicated.

    Spends at most `budget` evaluations and returns every distinct
    feasible string found, in first-seen order.
    """
    n = system.n_bits
    found: list[str] = []
    seen: set[str] = set()
    remaining = budget
    while remaining > 0:
        k = min(remaining, 1 << 14)
        bits = rng.integers(0, 2, size=(k, n), dtype=np.int64)
        mask = system.satisfies_batch(bits)
        for row in bits[mask]:
            s = "".join("1" if v else "0" for v in row)
            if s not in seen:
                seen.add(s)
                found.append(s)
        remaining -= k
    return found


# ---------------------------------------------------------------------------
# Dense reference helpers (test oracles for the block-sparse layer).


def to_dense(t: BlockTensor) -> np.ndarray:
    """Embed a block tensor in a plain dense array using sector offsets."""
    out = np.zeros(tuple(idx.dim for idx in t.indices))
    for key, arr in t.blocks.items():
        slices = tuple(
            slice(idx.offset(q), idx.offset(q) + idx.degeneracy(q))
            for q, idx in zip(key, t.indices)
        )
        out[slices] = arr
    return out


def allowed_keys(indices, flux: Charge) -> list[BlockKey]:
    """Every block key the conservation rule admits for these indices."""
    keys = []
    for combo in product(*[idx.charges for idx in indices]):
        total = flux
        for q, idx in zip(combo, indices):
            total = fuse(total, q) if idx.direction == Direction.IN else total
        outs = zero(len(flux))
        for q, idx in zip(combo, indices):
            if idx.direction == Direction.OUT:
                outs = fuse(outs, q)
        if total == outs:
            keys.append(tuple(combo))
    return keys


def random_charged_index(
    rng: np.random.Generator,
    m: int,
    direction: Direction,
    max_sectors: int = 3,
    max_degeneracy: int = 3,
    charge_range: int = 2,
    include_zero: bool = True,
) -> ChargedIndex:
    """A small random index for property tests.

    The zero charge is included by default so that zero-flux tensors over
    any such index combination always admit at least one block.
    """
    k = int(rng.integers(1, max_sectors + 1))
    charges: set[Charge] = {zero(m)} if include_zero else set()
    while len(charges) < k:
        charges.add(tuple(int(v) for v in rng.integers(-charge_range, charge_range + 1, m)))
    sectors = tuple(
        (q, int(rng.integers(1, max_degeneracy + 1))) for q in sorted(charges)
    )
    return ChargedIndex(sectors, direction)


def attainable_fluxes(indices) -> list[Charge]:
    """Every flux value for which at least one block key is allowed."""
    fluxes: set[Charge] = set()
    for combo in product(*[idx.charges for idx in indices]):
        bal = zero(len(combo[0]) if combo else 0)
        for q, idx in zip(combo, indices):
            if idx.direction == Direction.OUT:
                bal = fuse(bal, q)
            else:
                bal = tuple(x - y for x, y in zip(bal, q))
        fluxes.add(bal)
    return sorted(fluxes)


def random_block_tensor(
    rng: np.random.Generator,
    indices,
    flux: Charge,
    fill_probability: float = 0.8,
) -> BlockTensor:
    """Random tensor over a random nonempty subset of the allowed keys."""
    keys = allowed_keys(indices, flux)
    if not keys:
        raise ValueError("no conservation-allowed keys for these indices")
    chosen = [k for k in keys if rng.random() < fill_probability]
    if not chosen:
        chosen = [keys[int(rng.integers(len(keys)))]]
    blocks = {
        k: rng.normal(size=tuple(idx.degeneracy(q) for q, idx in zip(k, indices)))
        for k in chosen
    }
    return BlockTensor(list(indices), flux, blocks)
