"""Two-site gradient training of the Born machine on weighted bitstrings.

The loss is the negative log-likelihood of a weighted empirical
distribution. Each update merges a neighboring pair of site tensors,
takes a gradient step on the merged tensor, renormalizes it to unit
Frobenius norm, and splits it back with truncation. Because gradients
only touch blocks that already exist, training can never move
probability outside the charge-conserving support.

Bitstrings that share a block path through a site are batched: their
boundary vectors are stacked into matrices so the per-site contractions
and the gradient accumulation run as a handful of matrix products
instead of one small product per string.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .block_tensor import BlockKey, BlockTensor, merge_two_site, svd_split
from .charges import Charge, bit_sector, fuse, negate, subtract, zero
from .symmps import SymMPS, as_bits, shift_center


class ZeroAmplitudeError(ValueError):
    """A training bitstring fell outside the model's support."""

    def __init__(self, bitstring: str):
        self.bitstring = bitstring
        super().__init__(
            f"training bitstring {bitstring!r} has zero model amplitude"
        )


def softmax_weights(costs, temperature: float) -> np.ndarray:
    """Boltzmann weights exp(-cost/T), normalized to sum 1.

    Shifted by the minimum cost before exponentiating so that large
    cost scales cannot overflow.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    c = np.asarray(costs, dtype=np.float64)
    w = np.exp(-(c - c.min()) / temperature)
    return w / w.sum()


@dataclass(frozen=True, eq=False)
class WeightedTrainingSet:
    """Distinct bitstrings with positive weights summing to one."""

    bitstrings: tuple[str, ...]
    weights: np.ndarray
    temperature: float | None = None

    def __post_init__(self):
        if len(self.bitstrings) == 0:
            raise ValueError("training set must not be empty")
        if len(self.bitstrings) != len(set(self.bitstrings)):
            raise ValueError("duplicate bitstrings; build via from_items")
        if len(self.weights) != len(self.bitstrings):
            raise ValueError("one weight per bitstring required")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        if self.temperature is not None and self.temperature <= 0:
            raise ValueError("temperature must be positive")

    def __len__(self) -> int:
        return len(self.bitstrings)

    def items(self):
        return zip(self.bitstrings, self.weights)

    def entropy(self) -> float:
        return float(-np.sum(self.weights * np.log(self.weights)))

    @classmethod
    def from_items(cls, items, temperature: float | None = None):
        """Merge duplicate bitstrings, accumulate weights, normalize."""
        acc: dict[str, float] = {}
        for bits, w in items:
            if w <= 0:
                raise ValueError(f"weight for {bits!r} must be positive")
            acc[bits] = acc.get(bits, 0.0) + float(w)
        strings = tuple(acc)
        weights = np.array([acc[s] for s in strings])
        return cls(strings, weights / weights.sum(), temperature)

    @classmethod
    def uniform(cls, bitstrings, temperature: float | None = None):
        """Weight proportional to multiplicity in the input sequence."""
        return cls.from_items(((s, 1.0) for s in bitstrings), temperature)

    @classmethod
    def from_costs(cls, bitstrings, costs, temperature: float):
        """Boltzmann-weighted set; repeats accumulate their weight."""
        w = softmax_weights(costs, temperature)
        return cls.from_items(zip(bitstrings, w), temperature)


@dataclass
class TrainConfig:
    learning_rate: float = 0.02
    chi_max: int = 64
    sweeps: int = 1
    cutoff: float = 0.0
    inner_steps: int = 1
    truncation: str = "global"

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.chi_max < 1:
            raise ValueError("chi_max must be >= 1")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.cutoff < 0:
            raise ValueError("cutoff must be nonnegative")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")
        if self.truncation not in ("global", "sector"):
            raise ValueError(f"unknown truncation mode {self.truncation!r}")


@dataclass
class _StringPath:
    """Per-bitstring lookup data reused across site updates."""

    weight: float
    bitstring: str
    sectors: list[Charge]  # physical charge per site
    slots: list[int]  # position inside the physical sector
    prefix: list[Charge]  # raw running charge, links 0..n
    suffix: list[Charge]  # prefix shifted by -flux, links 0..n


def _string_paths(mps: SymMPS, ts: WeightedTrainingSet) -> list[_StringPath]:
    n = mps.n_sites
    neg = negate(mps.flux)
    out = []
    for bits, w in ts.items():
        x = as_bits(bits, n)
        sectors, slots = [], []
        prefix = [zero(mps.charge_len)]
        for i in range(n):
            c, slot = bit_sector(mps.columns[i], x[i])
            sectors.append(c)
            slots.append(slot)
            prefix.append(fuse(prefix[-1], c))
        suffix = [fuse(q, neg) for q in prefix]
        out.append(_StringPath(float(w), bits, sectors, slots, prefix, suffix))
    return out


@dataclass
class _SiteGroup:
    """Strings whose contraction at one site hits the same block and slot.

    idx lists the positions of the member strings in training-set order;
    lkey/rkey are the block keys with the raw and the flux-shifted link
    charges (valid left and right of the canonical center).
    """

    lkey: BlockKey
    rkey: BlockKey
    slot: int
    idx: list[int]


def _site_groups(paths: list[_StringPath], j: int) -> list[_SiteGroup]:
    groups: dict[tuple, list[int]] = {}
    for k, p in enumerate(paths):
        gk = (p.prefix[j], p.sectors[j], p.prefix[j + 1], p.slots[j])
        groups.setdefault(gk, []).append(k)
    out = []
    for (q, c, q2, slot), idx in groups.items():
        p = paths[idx[0]]
        out.append(_SiteGroup(lkey=(q, c, q2),
                              rkey=(p.suffix[j], c, p.suffix[j + 1]),
                              slot=slot, idx=idx))
    return out


@dataclass
class _PairGroup:
    """Strings sharing the merged block and slot pair at sites (i, i+1)."""

    key: BlockKey  # 4-leg key on the merged tensor
    si: int
    sj: int
    idx: list[int]
    weights: np.ndarray


def _pair_groups(paths: list[_StringPath], i: int) -> list[_PairGroup]:
    groups: dict[tuple, list[int]] = {}
    for k, p in enumerate(paths):
        gk = (p.prefix[i], p.sectors[i], p.slots[i], p.sectors[i + 1],
              p.slots[i + 1], p.suffix[i + 2])
        groups.setdefault(gk, []).append(k)
    out = []
    for (q, ci, si, cj, sj, q2), idx in groups.items():
        out.append(_PairGroup(key=(q, ci, cj, q2), si=si, sj=sj, idx=idx,
                              weights=np.array([paths[k].weight
                                                for k in idx])))
    return out


def _site_key(g: _SiteGroup, j: int, center: int) -> BlockKey:
    """Block key for site j given the center: left links carry raw charges,
    links at or right of the center carry flux-shifted ones."""
    if j < center:
        return g.lkey
    if j > center:
        return g.rkey
    return (g.lkey[0], g.lkey[1], g.rkey[2])


def _amplitudes(mps: SymMPS, paths: list[_StringPath]) -> np.ndarray:
    """Model amplitude of every path, batched over shared block lookups.

    Strings whose path leaves the stored blocks get amplitude zero,
    matching SymMPS.amplitude.
    """
    k_total = len(paths)
    vs: list[np.ndarray | None] = [np.ones(1)] * k_total
    for j in range(mps.n_sites):
        for g in _site_groups(paths, j):
            live = [k for k in g.idx if vs[k] is not None]
            if not live:
                continue
            block = mps.tensors[j].blocks.get(_site_key(g, j, mps.center))
            if block is None:
                for k in live:
                    vs[k] = None
                continue
            out = np.stack([vs[k] for k in live]) @ block[:, g.slot, :]
            for t, k in enumerate(live):
                vs[k] = out[t]
    return np.array([0.0 if v is None else float(v[0]) for v in vs])


def nll(mps: SymMPS, ts: WeightedTrainingSet) -> float:
    """Negative log-likelihood -sum_x w(x) log(psi(x)^2 / Z)."""
    z = mps.norm_squared("center")
    paths = _string_paths(mps, ts)
    amps = _amplitudes(mps, paths)
    dead = np.flatnonzero(amps == 0.0)
    if dead.size:
        raise ZeroAmplitudeError(paths[int(dead[0])].bitstring)
    w = np.array([p.weight for p in paths])
    return float(-np.sum(w * (2.0 * np.log(np.abs(amps)) - math.log(z))))


def _left_vector(mps: SymMPS, path: _StringPath, link: int) -> np.ndarray:
    """Row vector from contracting sites 0..link-1 at the path's bits."""
    v = np.ones(1)
    for j in range(link):
        key = (path.prefix[j], path.sectors[j], path.prefix[j + 1])
        block = mps.tensors[j].blocks.get(key)
        if block is None:
            raise ZeroAmplitudeError(path.bitstring)
        v = v @ block[:, path.slots[j], :]
    return v


def _right_vector(mps: SymMPS, path: _StringPath, link: int) -> np.ndarray:
    """Column vector from contracting sites link..n-1 at the path's bits."""
    n = mps.n_sites
    v = np.ones(1)
    for j in range(n - 1, link - 1, -1):
        key = (path.suffix[j], path.sectors[j], path.suffix[j + 1])
        block = mps.tensors[j].blocks.get(key)
        if block is None:
            raise ZeroAmplitudeError(path.bitstring)
        v = block[:, path.slots[j], :] @ v
    return v


def _pair_amplitude(merged, path, i, lv, rv) -> float:
    key = (path.prefix[i], path.sectors[i], path.sectors[i + 1], path.suffix[i + 2])
    block = merged.blocks.get(key)
    if block is None:
        return 0.0
    return float(lv @ block[:, path.slots[i], path.slots[i + 1], :] @ rv)


def two_site_nll(mps: SymMPS, i: int, merged: BlockTensor,
                 ts: WeightedTrainingSet) -> float:
    """Loss as a function of the merged pair (i, i+1), rest of chain fixed.

    The chain outside the pair must be in canonical form with the center
    on the pair, so the normalization is the merged tensor's squared norm.
    """
    if mps.center not in (i, i + 1):
        raise ValueError("center must sit on the merged pair")
    z = merged.norm() ** 2
    total = 0.0
    for path in _string_paths(mps, ts):
        lv = _left_vector(mps, path, i)
        rv = _right_vector(mps, path, i + 2)
        psi = _pair_amplitude(merged, path, i, lv, rv)
        if psi == 0.0:
            raise ZeroAmplitudeError(path.bitstring)
        total -= path.weight * (2.0 * math.log(abs(psi)) - math.log(z))
    return total


def _stack_boundaries(groups, lvs, rvs, paths):
    """Stack each group's boundary vectors into (group, L, R) matrices."""
    out = []
    for g in groups:
        L = np.stack([lvs[k] for k in g.idx])
        R = np.stack([rvs[k] for k in g.idx])
        out.append((g, L, R))
    return out


def _pair_gradient(merged: BlockTensor, stacked, paths, z: float) -> BlockTensor:
    """d(nll)/d(merged): 2*merged/Z minus the weighted data term.

    `stacked` holds (_PairGroup, L, R) triples; each group contributes
    through two matrix products, one for the batched pair amplitudes and
    one for the rank-|group| data-term update.
    """
    grad = {k: (2.0 / z) * arr for k, arr in merged.blocks.items()}
    for g, L, R in stacked:
        block = merged.blocks.get(g.key)
        if block is None:
            raise ZeroAmplitudeError(paths[g.idx[0]].bitstring)
        sl = block[:, g.si, g.sj, :]
        psi = np.einsum("ij,ij->i", L @ sl, R)
        dead = np.flatnonzero(psi == 0.0)
        if dead.size:
            raise ZeroAmplitudeError(paths[g.idx[int(dead[0])]].bitstring)
        coef = 2.0 * g.weights / psi
        grad[g.key][:, g.si, g.sj, :] -= (L * coef[:, None]).T @ R
    return BlockTensor(merged.indices, merged.flux, grad)


def gradient_two_site(mps: SymMPS, i: int, ts: WeightedTrainingSet) -> BlockTensor:
    """Gradient of the loss over the merged tensor at sites (i, i+1)."""
    if mps.center not in (i, i + 1):
        raise ValueError("center must sit on the merged pair")
    merged = merge_two_site(mps.tensors[i], mps.tensors[i + 1])
    z = merged.norm() ** 2
    paths = _string_paths(mps, ts)
    lvs = [_left_vector(mps, p, i) for p in paths]
    rvs = [_right_vector(mps, p, i + 2) for p in paths]
    stacked = _stack_boundaries(_pair_groups(paths, i), lvs, rvs, paths)
    return _pair_gradient(merged, stacked, paths, z)


def _step(merged: BlockTensor, grad: BlockTensor, alpha: float) -> BlockTensor:
    blocks = {}
    for key, arr in merged.blocks.items():
        g = grad.blocks.get(key)
        blocks[key] = arr if g is None else arr - alpha * g
    return BlockTensor(merged.indices, merged.flux, blocks)


def _unit(merged: BlockTensor) -> BlockTensor:
    nrm = merged.norm()
    if nrm == 0.0:
        raise ZeroAmplitudeError("<merged pair>")
    return merged.scaled(1.0 / nrm)


def _update_pair(mps, paths, groups, lvs, rvs, i, cfg, moving_right: bool) -> None:
    """Gradient-update the pair (i, i+1) and split toward the new center."""
    merged = _unit(merge_two_site(mps.tensors[i], mps.tensors[i + 1]))
    stacked = _stack_boundaries(groups, lvs, rvs, paths)
    for _ in range(cfg.inner_steps):
        grad = _pair_gradient(merged, stacked, paths, 1.0)
        merged = _unit(_step(merged, grad, cfg.learning_rate))
    side = "right" if moving_right else "left"
    res = svd_split(merged, left=(0, 1), chi_max=cfg.chi_max,
                    cutoff=cfg.cutoff, absorb=side, flux_side=side,
                    truncation=cfg.truncation)
    mps.tensors[i], mps.tensors[i + 1] = res.u, res.vh
    mps.center = i + 1 if moving_right else i


def _advance_left_vectors(mps, paths, groups_j, lvs, j) -> None:
    """Extend each cached left vector across the freshly split site j."""
    for g in groups_j:
        block = mps.tensors[j].blocks.get(g.lkey)
        if block is None:
            raise ZeroAmplitudeError(paths[g.idx[0]].bitstring)
        out = np.stack([lvs[k] for k in g.idx]) @ block[:, g.slot, :]
        for t, k in enumerate(g.idx):
            lvs[k] = out[t]


def _advance_right_vectors(mps, paths, groups_j, rvs, j) -> None:
    """Extend each cached right vector across the freshly split site j."""
    for g in groups_j:
        block = mps.tensors[j].blocks.get(g.rkey)
        if block is None:
            raise ZeroAmplitudeError(paths[g.idx[0]].bitstring)
        out = np.stack([rvs[k] for k in g.idx]) @ block[:, g.slot, :].T
        for t, k in enumerate(g.idx):
            rvs[k] = out[t]


def sweep(mps: SymMPS, ts: WeightedTrainingSet, cfg: TrainConfig) -> float:
    """One full left-to-right and right-to-left pass of two-site updates.

    Mutates the chain in place and returns the loss after the pass. The
    chain ends with its center at site 0 and unit normalization.
    """
    n = mps.n_sites
    if n < 2:
        raise ValueError("two-site updates need at least two sites")
    paths = _string_paths(mps, ts)
    k_total = len(paths)
    site_groups = [_site_groups(paths, j) for j in range(n)]
    pair_groups = [_pair_groups(paths, i) for i in range(n - 1)]

    shift_center(mps, 0)
    # rightward: cached right vectors are valid because sites beyond the
    # current pair are untouched until the pair reaches them
    rv_all: list[list] = [[None] * (n + 1) for _ in range(k_total)]
    vs = [np.ones(1)] * k_total
    for k in range(k_total):
        rv_all[k][n] = vs[k]
    for j in range(n - 1, 1, -1):
        for g in site_groups[j]:
            block = mps.tensors[j].blocks.get(g.rkey)
            if block is None:
                raise ZeroAmplitudeError(paths[g.idx[0]].bitstring)
            out = np.stack([vs[k] for k in g.idx]) @ block[:, g.slot, :].T
            for t, k in enumerate(g.idx):
                vs[k] = out[t]
                rv_all[k][j] = out[t]
    lvs = [np.ones(1)] * k_total
    for i in range(n - 1):
        rvs = [rv_all[k][i + 2] for k in range(k_total)]
        _update_pair(mps, paths, pair_groups[i], lvs, rvs, i, cfg,
                     moving_right=True)
        if i < n - 2:
            _advance_left_vectors(mps, paths, site_groups[i], lvs, i)

    # leftward, mirrored
    lv_all: list[list] = [[None] * (n + 1) for _ in range(k_total)]
    vs = [np.ones(1)] * k_total
    for k in range(k_total):
        lv_all[k][0] = vs[k]
    for j in range(n - 2):
        for g in site_groups[j]:
            block = mps.tensors[j].blocks.get(g.lkey)
            if block is None:
                raise ZeroAmplitudeError(paths[g.idx[0]].bitstring)
            out = np.stack([vs[k] for k in g.idx]) @ block[:, g.slot, :]
            for t, k in enumerate(g.idx):
                vs[k] = out[t]
                lv_all[k][j + 1] = out[t]
    rvs = [np.ones(1)] * k_total
    for i in range(n - 2, -1, -1):
        lvs = [lv_all[k][i] for k in range(k_total)]
        _update_pair(mps, paths, pair_groups[i], lvs, rvs, i, cfg,
                     moving_right=False)
        if i > 0:
            _advance_right_vectors(mps, paths, site_groups[i + 1], rvs, i + 1)

    return nll(mps, ts)


def train(mps: SymMPS, ts: WeightedTrainingSet, cfg: TrainConfig) -> list[float]:
    """Run cfg.sweeps sweeps in place; return the loss after each."""
    return [sweep(mps, ts, cfg) for _ in range(cfg.sweeps)]
