"""Command line front end: embed, train, sample, optimize, and check.

Every run that writes files also writes a JSON run manifest next to its
primary output: the exact command, the fully resolved configuration
(after environment-variable fallbacks), SHA-256 digests of all inputs
and outputs, and wall-clock timing. `symborn rerun MANIFEST` replays a
recorded run from the resolved configuration and verifies that every
output file reproduces byte for byte.

Exit codes: 0 on success, 2 for validation problems (bad files, bad
arguments, infeasible systems), 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import shlex
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .constraint_builder import (
    ConstraintSystem,
    ConstraintViolation,
    embed_method1,
    embed_method2,
    exact_skeleton,
    skeleton_to_mps,
)
from .geo import (
    GeoConfig,
    geo_run,
    negative_separation_cost,
    vanilla_geo_run,
)
from .model_io import load_mps, save_mps
from .oracles import (
    degeneracy_count,
    enumerate_solutions,
    random_valid_search,
    solve_single_equality_dp,
    solve_single_equality_mitm,
)
from .sampler import sample_batch
from .symmps import support_size
from .trainer import TrainConfig, WeightedTrainingSet, ZeroAmplitudeError, nll, train

ENV_PREFIX = "SYMBORN_"
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

MANIFEST_FORMAT = "symborn-run-manifest"
MANIFEST_FORMAT_VERSION = 1


class CliError(ValueError):
    """User-facing validation problem; reported on stderr, exit code 2."""


# ---------------------------------------------------------------------------
# Environment fallbacks and file helpers.


def _env(name: str, cast, fallback):
    """Default for an option, overridable via SYMBORN_<NAME>."""
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None or raw == "":
        return fallback
    try:
        return cast(raw)
    except ValueError as exc:
        raise CliError(
            f"environment variable {ENV_PREFIX}{name} is not a valid "
            f"{cast.__name__}: {raw!r}"
        ) from exc


def _json_default(obj):
    """Let numpy scalars pass through every JSON boundary."""
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_constraints(path: str) -> ConstraintSystem:
    """Load {"A": [[int, ...], ...], "b": [int, ...]} from a JSON file.

    An empty "A" needs an explicit "n" giving the number of bits.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "A" not in doc or "b" not in doc:
        raise CliError(f'{path}: expected an object with keys "A" and "b"')
    a, b = doc["A"], doc["b"]
    if not isinstance(a, list) or not all(isinstance(r, list) for r in a):
        raise CliError(f'{path}: "A" must be a list of integer rows')
    if not isinstance(b, list):
        raise CliError(f'{path}: "b" must be a list of integers')
    if len(a) != len(b):
        raise CliError(f'{path}: "A" has {len(a)} rows but "b" has {len(b)} entries')
    if a:
        widths = {len(r) for r in a}
        if len(widths) != 1:
            raise CliError(f'{path}: rows of "A" differ in length')
        n = widths.pop()
    else:
        n = doc.get("n")
        if not isinstance(n, int) or n < 1:
            raise CliError(f'{path}: empty "A" needs a positive integer "n"')
    flat = [v for r in a for v in r] + list(b)
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in flat):
        raise CliError(f"{path}: coefficients and right-hand sides must be integers")
    try:
        return ConstraintSystem(
            np.array(a, dtype=np.int64).reshape(len(a), n),
            np.array(b, dtype=np.int64),
        )
    except ValueError as exc:
        raise CliError(f"{path}: {exc}") from exc


def read_bitstring_lines(path: str) -> tuple[list[str], list[float] | None]:
    """Bitstrings, one per line, optionally followed by a cost column.

    Blank lines and lines starting with '#' are skipped. Either every
    data line carries a cost or none does.
    """
    strings: list[str] = []
    costs: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            tokens = stripped.split()
            if len(tokens) > 2:
                raise CliError(f"{path}:{lineno}: expected 'BITSTRING [COST]'")
            s = tokens[0]
            if not s or any(c not in "01" for c in s):
                raise CliError(f"{path}:{lineno}: {s!r} is not a 0/1 string")
            if strings and len(s) != len(strings[0]):
                raise CliError(
                    f"{path}:{lineno}: length {len(s)} differs from "
                    f"earlier lines of length {len(strings[0])}"
                )
            strings.append(s)
            if len(tokens) == 2:
                try:
                    costs.append(float(tokens[1]))
                except ValueError as exc:
                    raise CliError(
                        f"{path}:{lineno}: {tokens[1]!r} is not a number"
                    ) from exc
            elif costs:
                raise CliError(f"{path}:{lineno}: missing cost column")
    if not strings:
        raise CliError(f"{path}: no bitstrings found")
    if costs and len(costs) != len(strings):
        raise CliError(f"{path}: only some lines carry a cost column")
    return strings, (costs if costs else None)


def _write_lines(path: str, lines) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def _render_line_png(png_path: str, series: dict[str, list[float]],
                     xlabel: str, ylabel: str) -> None:
    """Plot one or more traces against their index and save a PNG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, values in series.items():
        ax.plot(range(len(values)), values, marker="o", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(png_path, dpi=110)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Cost functions for the optimization loop.


class ExternalCommandCost:
    """Scores bitstrings through a child process.

    Per batch, the command is run once; it reads bitstrings one per
    line on stdin and must write one cost per line on stdout, in order.
    """

    def __init__(self, command: str):
        self.command = command
        self.argv = shlex.split(command)
        if not self.argv:
            raise CliError("cost command is empty")

    def batch(self, strings) -> list[float]:
        strings = list(strings)
        if not strings:
            return []
        try:
            proc = subprocess.run(
                self.argv,
                input="".join(s + "\n" for s in strings),
                capture_output=True,
                text=True,
            )
        except OSError as exc:
            raise CliError(f"cost command {self.argv[0]!r} failed to start: {exc}")
        if proc.returncode != 0:
            detail = proc.stderr.strip() or "no diagnostic output"
            raise CliError(
                f"cost command exited with code {proc.returncode}: {detail}"
            )
        values = proc.stdout.split()
        if len(values) != len(strings):
            raise CliError(
                f"cost command wrote {len(values)} values for "
                f"{len(strings)} bitstrings"
            )
        try:
            return [float(v) for v in values]
        except ValueError as exc:
            raise CliError(f"cost command wrote a non-numeric value: {exc}")

    def __call__(self, s: str) -> float:
        return self.batch([s])[0]


def _resolve_cost(ns) -> object:
    if getattr(ns, "cost_cmd", None):
        return ExternalCommandCost(ns.cost_cmd)
    if ns.cost == "negsep":
        return negative_separation_cost
    raise CliError(f"unknown builtin cost {ns.cost!r}; use --cost-cmd for a command")


# ---------------------------------------------------------------------------
# Command implementations. Each returns (summary, input paths, output paths)
# and leaves all printing to main().


@dataclasses.dataclass
class RunResult:
    summary: dict
    inputs: list[str]
    outputs: list[str]


def _cmd_embed(ns) -> RunResult:
    system = read_constraints(ns.constraints)
    seeds, seed_costs = read_bitstring_lines(ns.seeds)
    if seed_costs is not None:
        raise CliError(f"{ns.seeds}: seed files must not carry a cost column")
    embed = embed_method1 if ns.method == 1 else embed_method2
    mps = embed(system, seeds, center=ns.center)
    save_mps(mps, ns.out)
    summary = {
        "command": "embed",
        "bits": system.n_bits,
        "rows": system.n_rows,
        "seeds": len(seeds),
        "distinct_seeds": len(set(seeds)),
        "method": ns.method,
        "bond_dimensions": mps.bond_dimensions(),
        "support_size": support_size(mps),
        "model": ns.out,
    }
    return RunResult(summary, [ns.constraints, ns.seeds], [ns.out])


def _cmd_train(ns) -> RunResult:
    mps = load_mps(ns.model)
    strings, costs = read_bitstring_lines(ns.data)
    if costs is not None and ns.temperature is None:
        raise CliError(f"{ns.data} carries costs; provide --temperature")
    if costs is None and ns.temperature is not None:
        raise CliError(f"--temperature given but {ns.data} has no cost column")
    if costs is not None:
        ts = WeightedTrainingSet.from_costs(strings, costs, ns.temperature)
    else:
        ts = WeightedTrainingSet.uniform(strings)
    cfg = TrainConfig(
        learning_rate=ns.alpha,
        chi_max=ns.chi,
        sweeps=ns.sweeps,
        cutoff=ns.cutoff,
        inner_steps=ns.inner_steps,
        truncation=ns.truncation,
    )
    nll_before = nll(mps, ts)
    trace = train(mps, ts, cfg)
    save_mps(mps, ns.out)

    loss_csv = ns.loss_csv or ns.out + ".loss.csv"
    _write_lines(
        loss_csv,
        ["sweep,nll"]
        + [f"{i},{float(v)!r}" for i, v in enumerate([nll_before] + trace)],
    )
    outputs = [ns.out, loss_csv]
    summary = {
        "command": "train",
        "bits": mps.n_sites,
        "distinct_strings": len(ts.bitstrings),
        "sweeps": ns.sweeps,
        "nll_before": nll_before,
        "nll_after": trace[-1],
        "nll_trace": trace,
        "bond_dimensions": mps.bond_dimensions(),
        "model": ns.out,
        "loss_csv": loss_csv,
    }
    if not ns.no_plot:
        png = str(Path(loss_csv).with_suffix(".png"))
        _render_line_png(png, {"nll": [nll_before] + trace}, "sweep", "nll")
        outputs.append(png)
        summary["loss_png"] = png
    return RunResult(summary, [ns.model, ns.data], outputs)


def _cmd_sample(ns) -> RunResult:
    mps = load_mps(ns.model)
    batch = sample_batch(mps, ns.num, ns.seed, workers=ns.threads)
    _write_lines(ns.out, batch.bitstrings)
    inputs = [ns.model]
    summary = {
        "command": "sample",
        "bits": mps.n_sites,
        "samples": len(batch),
        "distinct": len(batch.counts),
        "seed": ns.seed,
        "samples_file": ns.out,
    }
    if ns.constraints:
        system = read_constraints(ns.constraints)
        if system.n_bits != mps.n_sites:
            raise CliError(
                f"{ns.constraints} has {system.n_bits} bits "
                f"but the model has {mps.n_sites} sites"
            )
        summary["validity_rate"] = batch.validity_rate(system)
        inputs.append(ns.constraints)
    return RunResult(summary, inputs, [ns.out])


def _cmd_geo(ns) -> RunResult:
    system = read_constraints(ns.constraints)
    cost_fn = _resolve_cost(ns)
    cfg = GeoConfig(
        queries=ns.queries,
        elite_count=ns.elites,
        chi_max=ns.chi,
        learning_rate=ns.alpha,
        sweeps_per_iteration=ns.sweeps_per_iter,
        max_iters=ns.iters,
        epsilon=ns.epsilon,
        cutoff=ns.cutoff,
        truncation=ns.truncation,
        workers=ns.threads,
        merge_elites=ns.merge_elites,
    )
    inputs = [ns.constraints]
    if ns.vanilla:
        result = vanilla_geo_run(system, cost_fn, cfg, system.n_bits,
                                 rng_seed=ns.seed)
    elif ns.seeds:
        seeds, seed_costs = read_bitstring_lines(ns.seeds)
        if seed_costs is not None:
            raise CliError(f"{ns.seeds}: seed files must not carry a cost column")
        inputs.append(ns.seeds)
        result = geo_run(system, cost_fn, cfg, seeds=seeds, rng_seed=ns.seed)
    else:
        try:
            sk = exact_skeleton(system, max_states=ns.max_states)
        except RuntimeError as exc:
            raise CliError(
                f"{exc}; provide --seeds to start from seed strings instead"
            ) from exc
        initial = skeleton_to_mps(sk, center=system.n_bits - 1)
        result = geo_run(system, cost_fn, cfg, initial=initial, rng_seed=ns.seed)

    report = {
        "config": dataclasses.asdict(cfg),
        "vanilla": ns.vanilla,
        "rng_seed": ns.seed,
        "cost": ns.cost_cmd or ns.cost,
        "best_bitstring": result.best_bitstring,
        "best_cost": result.best_cost,
        "cost_evaluations": result.cost_evaluations,
        "utility_trace": result.utility_trace,
        "iterations": [dataclasses.asdict(r) for r in result.iterations],
    }
    with open(ns.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")

    def _opt(v) -> str:
        return "" if v is None else repr(float(v))

    trace_csv = ns.trace_csv or ns.out + ".trace.csv"
    rows = ["iteration,utility,best_cost,validity_rate,nll,temperature"]
    for r in result.iterations:
        rows.append(
            f"{r.t},{float(r.utility)!r},{float(r.best_cost)!r},"
            f"{float(r.validity_rate)!r},{_opt(r.nll)},{_opt(r.temperature)}"
        )
    _write_lines(trace_csv, rows)
    outputs = [ns.out, trace_csv]

    summary = {
        "command": "geo",
        "bits": system.n_bits,
        "rows": system.n_rows,
        "vanilla": ns.vanilla,
        "iterations": len(result.iterations) - 1,
        "cost_evaluations": result.cost_evaluations,
        "best_cost": result.best_cost,
        "best_bitstring": result.best_bitstring,
        "final_utility": result.utility_trace[-1],
        "report": ns.out,
        "trace_csv": trace_csv,
    }
    if not ns.no_plot:
        png = str(Path(trace_csv).with_suffix(".png"))
        _render_line_png(
            png,
            {
                "utility": result.utility_trace,
                "best cost": [r.best_cost for r in result.iterations],
            },
            "iteration",
            "cost",
        )
        outputs.append(png)
        summary["trace_png"] = png
    if ns.model_out:
        save_mps(result.model, ns.model_out)
        outputs.append(ns.model_out)
        summary["model"] = ns.model_out
    return RunResult(summary, inputs, outputs)


def _single_row(system: ConstraintSystem, path: str):
    if system.n_rows != 1:
        raise CliError(f"{path}: this solver needs exactly one constraint row")
    return system.a[0], int(system.b[0])


def _cmd_oracle_enumerate(ns) -> RunResult:
    system = read_constraints(ns.constraints)
    try:
        sols = enumerate_solutions(system, max_bits=ns.max_bits)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    summary = {
        "command": "oracle enumerate",
        "bits": system.n_bits,
        "count": len(sols),
    }
    outputs = []
    if ns.out:
        _write_lines(ns.out, sols.bitstrings)
        outputs.append(ns.out)
        summary["solutions_file"] = ns.out
    return RunResult(summary, [ns.constraints], outputs)


def _cmd_oracle_mitm(ns) -> RunResult:
    system = read_constraints(ns.constraints)
    a, b = _single_row(system, ns.constraints)
    sols = solve_single_equality_mitm(a, b, max_bits=ns.max_bits)
    summary = {
        "command": "oracle mitm",
        "bits": system.n_bits,
        "count": len(sols),
    }
    outputs = []
    if ns.out:
        _write_lines(ns.out, sols.bitstrings)
        outputs.append(ns.out)
        summary["solutions_file"] = ns.out
    return RunResult(summary, [ns.constraints], outputs)


def _cmd_oracle_dp(ns) -> RunResult:
    system = read_constraints(ns.constraints)
    a, b = _single_row(system, ns.constraints)
    count, sols = solve_single_equality_dp(a, b, reconstruct=bool(ns.out))
    summary = {
        "command": "oracle dp",
        "bits": system.n_bits,
        "count": count,
    }
    outputs = []
    if ns.out:
        _write_lines(ns.out, sols.bitstrings)
        outputs.append(ns.out)
        summary["solutions_file"] = ns.out
    return RunResult(summary, [ns.constraints], outputs)


def _cmd_oracle_degeneracy(ns) -> RunResult:
    summary = {
        "command": "oracle degeneracy",
        "offset": ns.offset,
        "kappa": ns.kappa,
        "bits": ns.bits,
        "count": degeneracy_count(ns.offset, ns.kappa, ns.bits),
    }
    return RunResult(summary, [], [])


def _cmd_oracle_random_search(ns) -> RunResult:
    system = read_constraints(ns.constraints)
    found = random_valid_search(
        system, ns.budget, np.random.default_rng(ns.seed)
    )
    summary = {
        "command": "oracle random-search",
        "bits": system.n_bits,
        "budget": ns.budget,
        "seed": ns.seed,
        "found": len(found),
    }
    outputs = []
    if ns.out:
        _write_lines(ns.out, found)
        outputs.append(ns.out)
        summary["solutions_file"] = ns.out
    return RunResult(summary, [ns.constraints], outputs)


def _cmd_rerun(ns) -> RunResult:
    with open(ns.manifest_file, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"{ns.manifest_file}: not valid JSON ({exc})") from exc
    for key in ("format", "command", "resolved", "inputs", "outputs"):
        if key not in doc:
            raise CliError(f"{ns.manifest_file}: missing manifest key {key!r}")
    if doc["format"] != MANIFEST_FORMAT:
        raise CliError(f"{ns.manifest_file}: not a {MANIFEST_FORMAT} file")
    command = doc["command"]
    if command not in _DISPATCH or command == "rerun":
        raise CliError(f"{ns.manifest_file}: cannot rerun command {command!r}")

    drifted = [
        path
        for path, digest in doc["inputs"].items()
        if not os.path.exists(path) or _sha256(path) != digest
    ]
    if drifted:
        raise CliError(
            "input files changed since the recorded run: " + ", ".join(drifted)
        )

    replay = argparse.Namespace(**doc["resolved"])
    _DISPATCH[command](replay)

    mismatched = [
        path
        for path, digest in doc["outputs"].items()
        if not os.path.exists(path) or _sha256(path) != digest
    ]
    summary = {
        "command": "rerun",
        "replayed": command,
        "outputs_checked": len(doc["outputs"]),
        "reproduced": not mismatched,
    }
    if mismatched:
        raise CliError(
            "outputs did not reproduce the recorded digests: "
            + ", ".join(mismatched)
        )
    return RunResult(summary, [ns.manifest_file], [])


_DISPATCH = {
    "embed": _cmd_embed,
    "train": _cmd_train,
    "sample": _cmd_sample,
    "geo": _cmd_geo,
    "oracle enumerate": _cmd_oracle_enumerate,
    "oracle mitm": _cmd_oracle_mitm,
    "oracle dp": _cmd_oracle_dp,
    "oracle degeneracy": _cmd_oracle_degeneracy,
    "oracle random-search": _cmd_oracle_random_search,
    "rerun": _cmd_rerun,
}


# ---------------------------------------------------------------------------
# Parser construction.


def _common_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--json", action="store_true",
                   help="print the run summary as JSON")
    p.add_argument("--manifest", default=None,
                   help="where to write the run manifest "
                        "(default: primary output + .manifest.json)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symborn",
        description="Constraint-respecting Born machines over bitstrings.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = [_common_parent()]

    p = sub.add_parser(
        "embed", parents=common,
        help="build a model supporting the seed strings' valid space",
    )
    p.add_argument("constraints", help='JSON file with "A" and "b"')
    p.add_argument("seeds", help="file of valid bitstrings, one per line")
    p.add_argument("--method", type=int, choices=(1, 2),
                   default=_env("METHOD", int, 2),
                   help="1: seed transitions only; 2: all transitions over "
                        "the seeds' link charges (default 2, env SYMBORN_METHOD)")
    p.add_argument("--center", type=int, default=None,
                   help="orthogonality center position (default: last site)")
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser(
        "train", parents=common,
        help="run gradient sweeps on a data file (optional cost column)",
    )
    p.add_argument("model", help="model file to start from")
    p.add_argument("data", help="lines of 'BITSTRING [COST]'")
    p.add_argument("--temperature", type=float,
                   default=_env("TEMPERATURE", float, None),
                   help="softmax temperature for the cost column "
                        "(env SYMBORN_TEMPERATURE)")
    p.add_argument("--alpha", type=float, default=_env("ALPHA", float, 0.02),
                   help="learning rate (default 0.02, env SYMBORN_ALPHA)")
    p.add_argument("--chi", type=int, default=_env("CHI", int, 64),
                   help="maximum bond dimension (default 64, env SYMBORN_CHI)")
    p.add_argument("--sweeps", type=int, default=_env("SWEEPS", int, 1),
                   help="full left-right-left passes (default 1, env SYMBORN_SWEEPS)")
    p.add_argument("--cutoff", type=float, default=_env("CUTOFF", float, 0.0),
                   help="relative singular value cutoff (default 0, env SYMBORN_CUTOFF)")
    p.add_argument("--truncation", choices=("global", "sector"),
                   default=_env("TRUNCATION", str, "global"),
                   help="bond cap applied across all charges or per charge "
                        "(default global, env SYMBORN_TRUNCATION)")
    p.add_argument("--inner-steps", type=int, default=1,
                   help="gradient steps per site pair (default 1)")
    p.add_argument("--out", required=True, help="trained model file to write")
    p.add_argument("--loss-csv", default=None,
                   help="per-sweep loss table (default: OUT.loss.csv)")
    p.add_argument("--no-plot", action="store_true",
                   help="skip rendering the loss curve PNG")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser(
        "sample", parents=common,
        help="draw exact samples from a model",
    )
    p.add_argument("model", help="model file to sample from")
    p.add_argument("--num", type=int, default=_env("NUM", int, 1000),
                   help="number of samples (default 1000, env SYMBORN_NUM)")
    p.add_argument("--seed", type=int, default=_env("SEED", int, 0),
                   help="RNG seed (default 0, env SYMBORN_SEED)")
    p.add_argument("--threads", type=int, default=_env("THREADS", int, 1),
                   help="sampling worker threads; the draw is identical for "
                        "any count (default 1, env SYMBORN_THREADS)")
    p.add_argument("--constraints", default=None,
                   help="optional system to report a validity rate against")
    p.add_argument("--out", required=True, help="samples file to write")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser(
        "geo", parents=common,
        help="run the sample/select/retrain optimization loop",
    )
    p.add_argument("constraints", help='JSON file with "A" and "b"')
    cost = p.add_mutually_exclusive_group()
    cost.add_argument("--cost", default="negsep",
                      help="builtin cost name (default negsep: negative "
                           "largest gap between consecutive ones)")
    cost.add_argument("--cost-cmd", default=None,
                      help="external scorer: reads bitstrings one per line "
                           "on stdin, writes one cost per line on stdout")
    p.add_argument("--seeds", default=None,
                   help="start from these valid strings instead of the "
                        "exact valid-space model")
    p.add_argument("--queries", type=int, default=_env("QUERIES", int, 10_000),
                   help="samples per iteration (default 10000, env SYMBORN_QUERIES)")
    p.add_argument("--elites", type=int, default=_env("ELITES", int, 100),
                   help="training samples kept per iteration "
                        "(default 100, env SYMBORN_ELITES)")
    p.add_argument("--chi", type=int, default=_env("CHI", int, 30),
                   help="maximum bond dimension (default 30, env SYMBORN_CHI)")
    p.add_argument("--alpha", type=float, default=_env("ALPHA", float, 0.02),
                   help="learning rate (default 0.02, env SYMBORN_ALPHA)")
    p.add_argument("--sweeps-per-iter", type=int, default=_env("SWEEPS", int, 1),
                   help="training sweeps per iteration (default 1, env SYMBORN_SWEEPS)")
    p.add_argument("--iters", type=int, default=_env("ITERS", int, 20),
                   help="iteration cap (default 20, env SYMBORN_ITERS)")
    p.add_argument("--epsilon", type=float, default=_env("EPSILON", float, None),
                   help="stop when the utility moves by at most this "
                        "(default: relative 1e-6, env SYMBORN_EPSILON)")
    p.add_argument("--cutoff", type=float, default=_env("CUTOFF", float, 0.0),
                   help="relative singular value cutoff (default 0, env SYMBORN_CUTOFF)")
    p.add_argument("--truncation", choices=("global", "sector"),
                   default=_env("TRUNCATION", str, "global"),
                   help="bond cap applied across all charges or per charge "
                        "(default global, env SYMBORN_TRUNCATION)")
    p.add_argument("--seed", type=int, default=_env("SEED", int, 0),
                   help="master RNG seed (default 0, env SYMBORN_SEED)")
    p.add_argument("--threads", type=int, default=_env("THREADS", int, 1),
                   help="sampling worker threads (default 1, env SYMBORN_THREADS)")
    p.add_argument("--merge-elites", action="store_true",
                   help="select elites from all batches so far, not just the last")
    p.add_argument("--max-states", type=int, default=1_000_000,
                   help="cap on link charges when building the exact "
                        "initial model (default 1000000)")
    p.add_argument("--vanilla", action="store_true",
                   help="unconstrained dense baseline; infeasible samples "
                        "score 0 without calling the cost")
    p.add_argument("--out", required=True, help="report JSON to write")
    p.add_argument("--trace-csv", default=None,
                   help="per-iteration table (default: OUT.trace.csv)")
    p.add_argument("--model-out", default=None,
                   help="also save the final model here")
    p.add_argument("--no-plot", action="store_true",
                   help="skip rendering the trace PNG")
    p.set_defaults(func=_cmd_geo)

    p = sub.add_parser("oracle", help="exact reference solvers")
    osub = p.add_subparsers(dest="oracle_command", required=True)

    q = osub.add_parser("enumerate", parents=common,
                        help="exhaustively list every feasible string")
    q.add_argument("constraints")
    q.add_argument("--max-bits", type=int, default=26,
                   help="refuse systems wider than this (default 26)")
    q.add_argument("--out", default=None, help="write the strings here")
    q.set_defaults(func=_cmd_oracle_enumerate)

    q = osub.add_parser("mitm", parents=common,
                        help="meet-in-the-middle solver for one equality row")
    q.add_argument("constraints")
    q.add_argument("--max-bits", type=int, default=40,
                   help="refuse systems wider than this (default 40)")
    q.add_argument("--out", default=None, help="write the strings here")
    q.set_defaults(func=_cmd_oracle_mitm)

    q = osub.add_parser("dp", parents=common,
                        help="count solutions of one nonnegative equality row")
    q.add_argument("constraints")
    q.add_argument("--out", default=None,
                   help="also reconstruct and write the strings here")
    q.set_defaults(func=_cmd_oracle_dp)

    q = osub.add_parser("degeneracy", parents=common,
                        help="count fixed-cardinality strings at a gap-cost level")
    q.add_argument("--offset", type=int, required=True,
                   help="levels below the widest achievable gap")
    q.add_argument("--kappa", type=int, required=True, help="number of ones")
    q.add_argument("--bits", type=int, required=True, help="string length")
    q.set_defaults(func=_cmd_oracle_degeneracy)

    q = osub.add_parser("random-search", parents=common,
                        help="uniform random strings filtered by feasibility")
    q.add_argument("constraints")
    q.add_argument("--budget", type=int, required=True,
                   help="number of random strings to try")
    q.add_argument("--seed", type=int, default=_env("SEED", int, 0),
                   help="RNG seed (default 0, env SYMBORN_SEED)")
    q.add_argument("--out", default=None, help="write the found strings here")
    q.set_defaults(func=_cmd_oracle_random_search)

    p = sub.add_parser(
        "rerun", parents=common,
        help="replay a recorded run and verify byte-identical outputs",
    )
    p.add_argument("manifest_file", help="manifest JSON from an earlier run")
    p.set_defaults(func=_cmd_rerun)

    return parser


# ---------------------------------------------------------------------------
# Entry point.


def _command_name(ns) -> str:
    if ns.command == "oracle":
        return f"oracle {ns.oracle_command}"
    return ns.command


def _resolved_config(ns) -> dict:
    return {k: v for k, v in vars(ns).items() if k != "func"}


def _write_manifest(path: str, command: str, argv: list[str], ns,
                    inputs: list[str], outputs: list[str],
                    seconds: float) -> None:
    doc = {
        "format": MANIFEST_FORMAT,
        "format_version": MANIFEST_FORMAT_VERSION,
        "package_version": __version__,
        "command": command,
        "argv": argv,
        "resolved": _resolved_config(ns),
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": {p: _sha256(p) for p in outputs},
        "timings": {"total_seconds": round(seconds, 6)},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _print_summary(summary: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(summary, indent=2, default=_json_default))
        return
    for key, value in summary.items():
        if isinstance(value, (list, dict)):
            value = json.dumps(value, default=_json_default)
        print(f"{key}: {value}")


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        parser = build_parser()
        try:
            ns = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        start = time.perf_counter()
        result = ns.func(ns)
        seconds = time.perf_counter() - start
        command = _command_name(ns)
        manifest = ns.manifest
        if manifest is None and result.outputs and command != "rerun":
            manifest = result.outputs[0] + ".manifest.json"
        if manifest is not None and command != "rerun":
            _write_manifest(manifest, command, argv, ns,
                            result.inputs, result.outputs, seconds)
            result.summary["manifest"] = manifest
        _print_summary(result.summary, ns.json)
        return EXIT_OK
    except (ZeroAmplitudeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (CliError, ConstraintViolation, ValueError, RuntimeError,
            OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
