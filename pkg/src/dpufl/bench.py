"""Parameter-grid benchmark producing one CSV row per (instance, epsilon, seed) run.

Config (JSON)::

    {"seed": 7,
     "runs": [{"generator": "random-hst", "instances": 2, "n": 12, "depth": 4,
               "lambda": 1.5, "epsilon": [0.5, 1.0], "seeds": 3},
              {"generator": "random-euclidean", "n": 10, "epsilon": [1.0]},
              {"generator": "star", "n": 8, "f": 1.0, "epsilon": [0.25]}]}

Every row is computed from seeds derived from the master seed and the row's
position in the grid, so the output does not depend on the worker count.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .generators import dyadic, random_clients, random_euclidean, random_hst
from .general import solve_general, solve_general_base
from .lowerbound import StarFamily, make_star_instance, sample_client_vector, star_exact_opt
from .oracle import approx_ratio, opt_exhaustive, opt_tree_dp
from .serialize import ParseError
from .tree_solver import TreeSolver

GENERATORS = ("random-hst", "random-euclidean", "star")
COLUMNS = ("instance", "generator", "n", "epsilon", "lambda", "seed", "facility_cost",
           "base_cost", "cost", "opt", "base_ratio", "ratio", "runtime")
TIMING_COLUMNS = ("runtime",)

_RUN_KEYS = {"generator", "instances", "n", "depth", "lambda", "epsilon", "seeds", "f",
             "dim", "max_children"}


@dataclass(frozen=True)
class RunSpec:
    label: str
    generator: str
    index: int  # instance index within its run block
    block: int
    params: tuple  # sorted (key, value) pairs of the run block
    epsilon: float
    seed: int


def max_workers() -> int:
    env = os.environ.get("DPUFL_THREADS")
    cpu = os.cpu_count() or 1
    if env is None or env == "":
        return cpu
    try:
        k = int(env)
    except ValueError:
        raise ValueError(f"DPUFL_THREADS must be an integer, got {env!r}") from None
    return max(1, min(k, cpu))


def _num_list(x, path):
    xs = x if isinstance(x, list) else [x]
    if not xs:
        raise ParseError(path, "empty list")
    for i, v in enumerate(xs):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise ParseError(f"{path}[{i}]", f"expected a positive number, got {v!r}")
    return [float(v) for v in xs]


def _pos_int(block, key, default, path):
    v = block.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ParseError(f"{path}.{key}", f"expected a positive integer, got {v!r}")
    return v


def parse_config(text) -> tuple[int, list[RunSpec]]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError("", f"malformed JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ParseError("", "top level must be an object")
    for k in doc:
        if k not in ("seed", "runs"):
            raise ParseError(k, "unknown field")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ParseError("seed", "expected a non-negative integer")
    runs = doc.get("runs")
    if not isinstance(runs, list) or not runs:
        raise ParseError("runs", "expected a non-empty list")
    specs = []
    for b, block in enumerate(runs):
        path = f"runs[{b}]"
        if not isinstance(block, dict):
            raise ParseError(path, "expected an object")
        for k in block:
            if k not in _RUN_KEYS:
                raise ParseError(f"{path}.{k}", "unknown field")
        gen = block.get("generator")
        if gen not in GENERATORS:
            raise ParseError(f"{path}.generator", f"expected one of {list(GENERATORS)}, got {gen!r}")
        n = _pos_int(block, "n", 8, path)
        if gen == "random-euclidean" and n > 20:
            raise ParseError(f"{path}.n", "exact optimum needs n <= 20 for random-euclidean")
        _pos_int(block, "instances", 1, path)
        _pos_int(block, "seeds", 1, path)
        _pos_int(block, "depth", 4, path)
        _pos_int(block, "dim", 2, path)
        _pos_int(block, "max_children", 3, path)
        lam = block.get("lambda", 1.5)
        if isinstance(lam, bool) or not isinstance(lam, (int, float)) or not 1 < lam <= 2:
            raise ParseError(f"{path}.lambda", f"must lie in (1, 2], got {lam!r}")
        eps_list = _num_list(block.get("epsilon", 1.0), f"{path}.epsilon")
        if gen == "star" and any(e >= 1 for e in eps_list):
            raise ParseError(f"{path}.epsilon", "star family needs epsilon < 1")
        if "f" in block:
            _num_list(block["f"], f"{path}.f")
        params = tuple(sorted((k, json.dumps(v, sort_keys=True)) for k, v in block.items()))
        for i in range(block.get("instances", 1)):
            for eps in eps_list:
                for s in range(block.get("seeds", 1)):
                    specs.append(RunSpec(f"{gen}/{b}/{i}", gen, i, b, params, eps, s))
    return seed, specs


def _params(spec: RunSpec) -> dict:
    return {k: json.loads(v) for k, v in spec.params}


def _f_value(p, rng, default_range):
    f = p.get("f")
    if f is None:
        return dyadic(rng, *default_range)
    if isinstance(f, list):
        return dyadic(rng, min(f), max(f)) if len(f) == 2 else float(f[0])
    return float(f)


def run_one(master_seed: int, spec: RunSpec) -> dict:
    p = _params(spec)
    lam = float(p.get("lambda", 1.5))
    n = int(p.get("n", 8))
    # instance depends on (master, block, index) only; the noise additionally on the seed slot
    inst_rng = np.random.default_rng([master_seed, spec.block, spec.index])
    noise_seed = int(np.random.default_rng([master_seed, spec.block, spec.index, spec.seed + 1])
                     .integers(2 ** 31))
    t0 = time.perf_counter()
    if spec.generator == "random-hst":
        t = random_hst(inst_rng, n, int(p.get("depth", 4)), lam, int(p.get("max_children", 3)))
        clients = random_clients(inst_rng, n)
        f = _f_value(p, inst_rng, (0.5, 8.0))
        solver = TreeSolver(t, clients, f, spec.epsilon)
        base = solver.solve_base().costs.total
        cost = solver.dp_cost(noise_seed).total
        opt = opt_tree_dp(t, clients, f).opt_cost
    elif spec.generator == "random-euclidean":
        inst = random_euclidean(inst_rng, n, int(p.get("dim", 2)))
        if "f" in p:
            inst = type(inst)(inst.metric, _f_value(p, inst_rng, (0.5, 8.0)), inst.clients)
        f = inst.facility_cost
        base = solve_general_base(inst, spec.epsilon, lam, noise_seed).cost_in_original.total
        cost = solve_general(inst, spec.epsilon, lam, noise_seed).cost_in_original.total
        opt = opt_exhaustive(inst).opt_cost
    else:
        f = float(p.get("f", 1.0))
        fam = StarFamily(n, f, spec.epsilon)
        clients = sample_client_vector(fam, inst_rng)
        inst = make_star_instance(n, spec.epsilon, f).with_clients(clients)
        base = solve_general_base(inst, spec.epsilon, lam, noise_seed).cost_in_original.total
        cost = solve_general(inst, spec.epsilon, lam, noise_seed).cost_in_original.total
        opt = star_exact_opt(clients, fam)
    runtime = time.perf_counter() - t0
    return {
        "instance": spec.label, "generator": spec.generator, "n": n,
        "epsilon": spec.epsilon, "lambda": lam, "seed": noise_seed, "facility_cost": f,
        "base_cost": base, "cost": cost, "opt": opt,
        "base_ratio": approx_ratio(base, opt), "ratio": approx_ratio(cost, opt),
        "runtime": runtime,
    }


def _run_star(args):
    return run_one(*args)


def run_bench(config_text, workers: int | None = None) -> list[dict]:
    master, specs = parse_config(config_text)
    workers = max_workers() if workers is None else max(1, workers)
    jobs = [(master, s) for s in specs]
    if workers == 1 or len(jobs) < 2:
        return [run_one(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_star, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _fmt(v) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def rows_to_csv(rows: list[dict], include_timing: bool = True) -> str:
    cols = [c for c in COLUMNS if include_timing or c not in TIMING_COLUMNS]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(_fmt(r[c]) for c in cols))
    return "\n".join(lines) + "\n"


def timing_csv(rows: list[dict]) -> str:
    return "row,instance,runtime\n" + "".join(
        f"{i},{r['instance']},{r['runtime']!r}\n" for i, r in enumerate(rows))
