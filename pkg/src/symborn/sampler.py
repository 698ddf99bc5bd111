"""Exact sampling from the Born machine and generalization metrics.

Bits are drawn site by site from the exact conditional marginals, so
every sample comes from the model distribution directly; nothing is
ever rejected. On a charge-conserving chain this means every sample
satisfies the encoded constraints by construction.

The batch path advances all pending samples through one site at a
time, grouped by their current link sector, so the heavy lifting is a
handful of matrix products per site instead of Python work per sample.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .charges import bit_sector, fuse, zero
from .constraint_builder import ConstraintSystem
from .symmps import SymMPS, right_environments


def _env_factors(envs):
    """Replace each right-environment matrix E by L with E = L L^T.

    Conditional weights become row norms ||v L||^2, which are cheap on
    stacked state vectors and can never go negative.
    """
    out = []
    for env in envs:
        here = {}
        for q, mat in env.items():
            vals, vecs = np.linalg.eigh(mat)
            keep = vals > max(vals.max(), 0.0) * 1e-15 if vals.size else vals > 0
            if not np.any(keep):
                continue
            here[q] = vecs[:, keep] * np.sqrt(vals[keep])
        out.append(here)
    return out


class _SiteMove:
    """Per-(site, incoming sector, bit) transition data."""

    __slots__ = ("q2", "block", "weight_map")

    def __init__(self, q2, block, weight_map):
        self.q2 = q2
        self.block = block  # (dim_in, dim_out) slice at this bit
        self.weight_map = weight_map  # (dim_in, r) = block @ env factor


def _transition_table(mps: SymMPS, factors):
    """moves[i][q][bit] -> _SiteMove or None, for every reachable sector."""
    n = mps.n_sites
    moves = [dict() for _ in range(n)]
    alive = {zero(mps.charge_len)}
    for i in range(n):
        t = mps.tensors[i]
        shift = mps.site_shift(i)
        nxt = set()
        for q in alive:
            pair = []
            for bit in (0, 1):
                c, slot = bit_sector(mps.columns[i], bit)
                q2 = fuse(fuse(q, c), shift)
                block = t.blocks.get((q, c, q2))
                fac = factors[i + 1].get(q2)
                if block is None or fac is None:
                    pair.append(None)
                    continue
                sl = np.ascontiguousarray(block[:, slot, :])
                pair.append(_SiteMove(q2, sl, sl @ fac))
                nxt.add(q2)
            moves[i][q] = pair
        alive = nxt
    return moves


def _run_rows(mps: SymMPS, moves, table: np.ndarray) -> list[str]:
    """Drive one uniform row per sample through the chain, grouped by sector.

    Sample j consumes only row j of the table, so the outcome does not
    depend on which other rows share the batch.
    """
    q0 = zero(mps.charge_len)
    nrows = table.shape[0]
    bits = np.zeros((nrows, mps.n_sites), dtype=np.uint8)
    groups = {q0: (np.arange(nrows), np.ones((nrows, 1)))}
    for i in range(mps.n_sites):
        merged: dict = {}
        for q in sorted(groups):
            rows, vecs = groups[q]
            pair = moves[i].get(q)
            weights = np.zeros((2, len(rows)))
            for bit in (0, 1):
                mv = pair[bit] if pair else None
                if mv is not None:
                    w = vecs @ mv.weight_map
                    weights[bit] = np.einsum("kr,kr->k", w, w)
            total = weights.sum(axis=0)
            if np.any(total <= 0.0):
                raise ValueError(
                    "conditional marginal vanished; degenerate model"
                )
            ones = table[rows, i] < weights[1] / total
            bits[rows, i] = ones
            for bit, mask in ((0, ~ones), (1, ones)):
                if not np.any(mask):
                    continue
                mv = pair[bit]
                sub = vecs[mask] @ mv.block
                sub /= np.sqrt(np.einsum("kr,kr->k", sub, sub))[:, None]
                if mv.q2 in merged:
                    merged[mv.q2].append((rows[mask], sub))
                else:
                    merged[mv.q2] = [(rows[mask], sub)]
        groups = {
            q: (
                np.concatenate([r for r, _ in parts]),
                np.concatenate([v for _, v in parts]),
            )
            for q, parts in merged.items()
        }
    raw = (bits + 48).tobytes()  # ascii '0'/'1'
    n = mps.n_sites
    return [raw[j * n : (j + 1) * n].decode("ascii") for j in range(nrows)]


def sample(mps: SymMPS, rng: np.random.Generator) -> str:
    """One exact draw from P(x) = amplitude(x)^2 / Z."""
    if mps.norm_squared("center") <= 0.0:
        raise ValueError("cannot sample from a zero-norm model")
    factors = _env_factors(right_environments(mps))
    moves = _transition_table(mps, factors)
    return _run_rows(mps, moves, rng.random(mps.n_sites)[None, :])[0]


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Q draws in row order plus their multiplicity map."""

    bitstrings: list[str]
    counts: dict[str, int]
    rng_seed: int

    def __len__(self) -> int:
        return len(self.bitstrings)

    def distinct(self) -> list[str]:
        return sorted(self.counts)

    def validity_rate(self, system: ConstraintSystem) -> float:
        if not self.bitstrings:
            return 1.0
        valid = sum(n for s, n in self.counts.items() if system.satisfies(s))
        return valid / len(self.bitstrings)


def sample_batch(
    mps: SymMPS, q: int, seed: int, workers: int = 1
) -> SampleBatch:
    """Q exact draws, reproducible from the seed alone.

    Row j of a (Q, n) uniform table drives sample j, so the result does
    not depend on how the rows are divided among workers.
    """
    if q < 0:
        raise ValueError("sample count must be nonnegative")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if q == 0:
        return SampleBatch([], {}, seed)
    if mps.norm_squared("center") <= 0.0:
        raise ValueError("cannot sample from a zero-norm model")
    factors = _env_factors(right_environments(mps))
    moves = _transition_table(mps, factors)
    table = np.random.default_rng(seed).random((q, mps.n_sites))
    if workers == 1:
        rows = _run_rows(mps, moves, table)
    else:
        chunks = np.array_split(np.arange(q), workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(
                lambda idx: _run_rows(mps, moves, table[idx]), chunks
            )
            rows = [s for part in parts for s in part]
    return SampleBatch(rows, dict(Counter(rows)), seed)


def g_sol(batch: SampleBatch, seeds, system: ConstraintSystem) -> int:
    """Distinct valid samples that are not already in the seed set."""
    seen = set(seeds)
    return sum(1 for s in batch.counts if s not in seen and system.satisfies(s))


def coverage(gsol: int, s_size: int, t_size: int) -> float:
    """Fraction of the unseen solution space the batch discovered."""
    if s_size <= t_size:
        raise ValueError("solution space no larger than the seed set")
    return gsol / (s_size - t_size)


def utility(costs) -> float:
    """Mean of the lowest 5% of costs (at least one sample)."""
    c = np.asarray(costs, dtype=np.float64)
    if c.size == 0:
        raise ValueError("utility of an empty cost list")
    k = max(1, math.ceil(0.05 * c.size))
    return float(np.mean(np.partition(c, k - 1)[:k]))


def kl_divergence(mps: SymMPS, target: dict[str, float]) -> float:
    """KL(target || model) over the target's support."""
    if not target:
        raise ValueError("empty target distribution")
    total = math.fsum(target.values())
    if abs(total - 1.0) > 1e-6 or any(p <= 0 for p in target.values()):
        raise ValueError("target must be a positive distribution summing to 1")
    z = mps.norm_squared("center")
    out = 0.0
    for x, p in target.items():
        a = mps.amplitude(x)
        if a == 0.0:
            raise ValueError(f"target string {x!r} outside model support")
        out += p * (math.log(p) - math.log(a * a / z))
    return out
