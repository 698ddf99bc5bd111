"""Generator-enhanced optimization driven by the constrained Born machine.

The outer loop alternates between two ways of refreshing the model
before each training pass: odd iterations re-embed from the current
elite samples (concentrating on low-cost structure), even iterations
reset to the uniform model over the valid space (restoring reach). One
or a few training sweeps then tilt the refreshed model toward the
softmax-weighted elites, and a fresh batch of samples both scores the
iteration and feeds the next one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraint_builder import (
    ConstraintSystem,
    embed_method2,
    exact_skeleton,
    skeleton_to_mps,
    uniform_fill,
)
from .sampler import SampleBatch, sample_batch, utility
from .symmps import SymMPS
from .trainer import TrainConfig, WeightedTrainingSet, train


def negative_separation_cost(bits) -> float:
    """Minus the widest gap between consecutive ones; 0 below two ones."""
    ones = [i for i, b in enumerate(str(bits)) if b == "1"]
    if len(ones) < 2:
        return 0.0
    return -float(max(j - i for i, j in zip(ones, ones[1:])))


def iteration_temperature(costs, floor: float = 1e-9) -> float:
    """Half the population standard deviation of the elite costs."""
    sd = float(np.std(np.asarray(costs, dtype=np.float64)))
    return max(sd / 2.0, floor)


def elite_select(batch: SampleBatch, costs: dict[str, float], k: int,
                 temperature_floor: float = 1e-9) -> WeightedTrainingSet:
    """The k lowest-cost samples as a Boltzmann-weighted training set.

    Samples count with multiplicity; ties in cost break toward the
    lexicographically smaller bitstring. The temperature is derived
    from the selected costs themselves.
    """
    if k < 1:
        raise ValueError("need at least one elite")
    if len(batch) == 0:
        raise ValueError("cannot select elites from an empty batch")
    pool = []
    for s in sorted(batch.counts):
        pool.extend([s] * batch.counts[s])
    pool.sort(key=lambda s: (costs[s], s))
    chosen = pool[: min(k, len(pool))]
    chosen_costs = [costs[s] for s in chosen]
    t = iteration_temperature(chosen_costs, temperature_floor)
    return WeightedTrainingSet.from_costs(chosen, chosen_costs, t)


@dataclass
class GeoConfig:
    queries: int = 10_000
    elite_count: int = 100
    chi_max: int = 30
    learning_rate: float = 0.02
    sweeps_per_iteration: int = 1
    max_iters: int = 20
    epsilon: float | None = None  # None: 1e-6 * |previous utility|
    cutoff: float = 0.0
    inner_steps: int = 1
    truncation: str = "global"
    workers: int = 1
    merge_elites: bool = False  # pool batches across iterations
    temperature_floor: float = 1e-9

    def __post_init__(self):
        if self.queries < 1:
            raise ValueError("queries must be >= 1")
        if not (1 <= self.elite_count <= self.queries):
            raise ValueError("elite_count must lie in [1, queries]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            chi_max=self.chi_max,
            sweeps=self.sweeps_per_iteration,
            cutoff=self.cutoff,
            inner_steps=self.inner_steps,
            truncation=self.truncation,
        )


@dataclass
class IterationRecord:
    t: int
    temperature: float | None
    nll: float | None
    utility: float
    best_cost: float
    validity_rate: float
    bond_dimensions: list[int]


@dataclass
class GeoResult:
    best_bitstring: str
    best_cost: float
    utility_trace: list[float]
    iterations: list[IterationRecord]
    model: SymMPS
    cost_evaluations: int


def _batch_seed(master: int, t: int) -> int:
    return int(np.random.SeedSequence([master, t]).generate_state(1)[0])


class _CostCache:
    """Evaluate the black-box cost once per distinct bitstring."""

    def __init__(self, fn):
        self.fn = fn
        self.known: dict[str, float] = {}

    def get(self, s: str) -> float:
        if s not in self.known:
            self.known[s] = float(self.fn(s))
        return self.known[s]

    def batch_costs(self, batch: SampleBatch) -> dict[str, float]:
        missing = [s for s in batch.counts if s not in self.known]
        if missing and hasattr(self.fn, "batch"):
            for s, c in zip(missing, self.fn.batch(missing)):
                self.known[s] = float(c)
        return {s: self.get(s) for s in batch.counts}


def _expand(batch: SampleBatch, costs: dict[str, float]) -> list[float]:
    out = []
    for s, n in batch.counts.items():
        out.extend([costs[s]] * n)
    return out


def geo_run(
    system: ConstraintSystem,
    cost_fn,
    cfg: GeoConfig,
    initial: SymMPS | None = None,
    seeds=None,
    rng_seed: int = 0,
    validity_system: ConstraintSystem | None = None,
) -> GeoResult:
    """Run the alternating embed/rebuild optimization loop.

    Start from an exact valid-space model (`initial`) when one is
    available; otherwise from embedded seed strings. Returns the best
    bitstring over every cost evaluation made during the run.

    `validity_system` only changes what the per-iteration validity rate
    is measured against; the unconstrained baseline passes the real
    constraints here while sampling from a constraint-free model.
    """
    if validity_system is None:
        validity_system = system
    if initial is not None:
        base = uniform_fill(initial.copy())
        model = base.copy()
    elif seeds:
        base = None
        model = embed_method2(system, list(seeds))
    else:
        raise ValueError("need an initial model or at least one seed")

    cache = _CostCache(cost_fn)
    pool: set[str] = set(seeds) if seeds else set()
    records: list[IterationRecord] = []
    trace: list[float] = []
    best_s, best_c = None, np.inf

    def run_batch(mps, t):
        nonlocal best_s, best_c
        batch = sample_batch(mps, cfg.queries, _batch_seed(rng_seed, t),
                             workers=cfg.workers)
        costs = cache.batch_costs(batch)
        for s, c in costs.items():
            if system.satisfies(s):
                pool.add(s)
            if c < best_c:
                best_s, best_c = s, c
        return batch, costs, utility(_expand(batch, costs))

    batch, costs, u = run_batch(model, 0)
    trace.append(u)
    records.append(IterationRecord(
        t=0, temperature=None, nll=None, utility=u, best_cost=best_c,
        validity_rate=batch.validity_rate(validity_system),
        bond_dimensions=model.bond_dimensions(),
    ))

    elite_pool_batch, elite_pool_costs = batch, costs
    for t in range(1, cfg.max_iters + 1):
        ts = elite_select(elite_pool_batch, elite_pool_costs,
                          cfg.elite_count, cfg.temperature_floor)
        if t % 2 == 1:
            model = embed_method2(system, list(ts.bitstrings))
        else:
            if base is not None:
                model = base.copy()
            else:
                model = embed_method2(system, sorted(pool))
            ts = WeightedTrainingSet.uniform(ts.bitstrings)
        nll_trace = train(model, ts, cfg.train_config())
        batch, costs, u = run_batch(model, t)
        trace.append(u)
        records.append(IterationRecord(
            t=t, temperature=ts.temperature, nll=nll_trace[-1], utility=u,
            best_cost=best_c,
            validity_rate=batch.validity_rate(validity_system),
            bond_dimensions=model.bond_dimensions(),
        ))
        if cfg.merge_elites:
            merged_counts = dict(elite_pool_batch.counts)
            for s, n in batch.counts.items():
                merged_counts[s] = merged_counts.get(s, 0) + n
            elite_pool_batch = SampleBatch(
                elite_pool_batch.bitstrings + batch.bitstrings,
                merged_counts, batch.rng_seed,
            )
            elite_pool_costs = {**elite_pool_costs, **costs}
        else:
            elite_pool_batch, elite_pool_costs = batch, costs
        eps = cfg.epsilon if cfg.epsilon is not None \
            else 1e-6 * abs(trace[-2])
        if abs(trace[-1] - trace[-2]) <= eps:
            break

    return GeoResult(best_s, best_c, trace, records, model,
                     len(cache.known))


def uniform_dense_mps(n: int) -> SymMPS:
    """The exact uniform model over all n-bit strings (trivial charge)."""
    return skeleton_to_mps(
        exact_skeleton(ConstraintSystem.unconstrained(n)), center=n - 1
    )


class ValidityScreen:
    """Score infeasible strings 0.0 without consulting the black box.

    Keeps a `batch` entry point so that batched cost functions (an
    external scoring process, say) stay batched after screening.
    """

    def __init__(self, fn, system: ConstraintSystem):
        self.fn = fn
        self.system = system

    def __call__(self, s: str) -> float:
        return float(self.fn(s)) if self.system.satisfies(s) else 0.0

    def batch(self, strings) -> list[float]:
        valid = [s for s in strings if self.system.satisfies(s)]
        scores: dict[str, float] = {}
        if valid:
            if hasattr(self.fn, "batch"):
                scores = {s: float(c) for s, c in zip(valid, self.fn.batch(valid))}
            else:
                scores = {s: float(self.fn(s)) for s in valid}
        return [scores.get(s, 0.0) for s in strings]


def vanilla_geo_run(
    system: ConstraintSystem,
    cost_fn,
    cfg: GeoConfig,
    n: int,
    rng_seed: int = 0,
) -> GeoResult:
    """The unconstrained baseline: a dense model on the same workload.

    The model carries no charge structure, so its samples can violate
    the constraints; those are scored cost 0 instead of being excluded,
    and the re-embeddings degenerate to full uniform rebuilds.
    """
    free = ConstraintSystem.unconstrained(n)
    return geo_run(free, ValidityScreen(cost_fn, system), cfg,
                   initial=uniform_dense_mps(n),
                   rng_seed=rng_seed, validity_system=system)
