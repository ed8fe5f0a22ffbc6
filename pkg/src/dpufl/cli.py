"""Command-line front end.

Every document written carries a ``manifest`` (command, flags, seed, versions,
timestamp); ``dpufl replay FILE`` re-runs the command a manifest describes.
Exit codes: 0 success, 1 invalid input, 2 usage error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import platform
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import rows_to_csv, run_bench, timing_csv
from .frt import frt_embed, rescale_metric
from .general import solve_general, solve_general_base
from .lowerbound import Policy, StarFamily, default_n, evaluate_policy, expected_opt_per_leaf
from .oracle import opt_exhaustive, opt_tree_dp
from .privacy import audit
from .serialize import (ParseError, dumps, parse_client_doc, parse_instance, parse_tree,
                        solution_to_doc, tree_to_doc)
from .tree_solver import SolverParams, TreeSolver

EXHAUSTIVE_LIMIT = 20
MANIFEST_PREFIX = "# manifest "


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- manifest ---------------------------------------------------------------------------

def _manifest(command: str, args: argparse.Namespace) -> dict:
    # output destinations are not part of the computation; replays choose their own
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "out", "csv", "timing")}
    return {
        "command": command,
        "flags": flags,
        "seed": flags.get("seed"),
        "versions": {"dpufl": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }


def argv_from_manifest(manifest: dict) -> list[str]:
    argv = [manifest["command"]]
    for dest, value in sorted(manifest["flags"].items()):
        flag = "--" + dest.rstrip("_").replace("_", "-")
        if value is None or value is False:
            continue
        if value is True:
            argv.append(flag)
        else:
            argv += [flag, str(value) if not isinstance(value, float) else repr(value)]
    return argv


def read_manifest(path: str) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith(MANIFEST_PREFIX):
        return json.loads(text.splitlines()[0][len(MANIFEST_PREFIX):])
    doc = json.loads(text)
    if not isinstance(doc, dict) or "manifest" not in doc:
        raise ParseError("manifest", "document carries no manifest")
    return doc["manifest"]


def strip_timestamp(text: str) -> str:
    """Output with the manifest timestamp blanked, for replay comparisons."""
    if text.startswith(MANIFEST_PREFIX):
        head, _, rest = text.partition("\n")
        m = json.loads(head[len(MANIFEST_PREFIX):])
        m["timestamp"] = None
        return MANIFEST_PREFIX + json.dumps(m, sort_keys=True) + "\n" + rest
    doc = json.loads(text)
    doc["manifest"]["timestamp"] = None
    return dumps(doc)


# -- helpers ----------------------------------------------------------------------------

def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _emit(doc: dict, args, manifest: dict, out) -> None:
    doc = dict(doc, manifest=manifest)
    text = dumps(doc, pretty=args.pretty) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)


def _csv_text(body: str, manifest: dict) -> str:
    return MANIFEST_PREFIX + json.dumps(manifest, sort_keys=True) + "\n" + body


def _seed(args) -> None:
    if getattr(args, "seed", None) is None and hasattr(args, "seed"):
        args.seed = secrets.randbits(31)


def _num(x: float):
    return "inf" if math.isinf(x) else x


# -- subcommands ------------------------------------------------------------------------

def cmd_embed(args, out):
    inst = parse_instance(_read(args.input))
    if (inst.metric.dist > 0).any():
        metric, scale = rescale_metric(inst.metric)
        emb = frt_embed(metric, args.lambda_, np.random.default_rng([args.seed, 0]))
    else:
        raise ParseError("distances", "degenerate metric: every point coincides")
    doc = tree_to_doc(emb.tree)
    doc["embedding"] = {
        "beta": emb.beta,
        "permutation": list(emb.permutation),
        "leaf_of_point": list(emb.leaf_of_point),
        "scale": scale,
    }
    return doc


def cmd_solve_tree(args, out):
    tree = parse_tree(_read(args.tree))
    f, clients = parse_client_doc(_read(args.clients or args.input), tree.n_points)
    if args.f is not None:
        f = args.f
    solver = TreeSolver(tree, clients, f, args.epsilon)
    if args.base:
        sol = solver.solve_base(return_all_marked=args.return_all_marked)
    else:
        sol = solver.solve_dp(np.random.default_rng([args.seed, 1]),
                              return_all_marked=args.return_all_marked)
    doc = solution_to_doc(sol.superset, sol.open, sol.assignment, sol.costs, args.seed)
    doc["algorithm"] = "base" if args.base else "private"
    doc["marked"] = sorted(sol.marked.vertices)
    if sol.tree.n_vertices != tree.n_vertices:
        doc["extended_tree"] = tree_to_doc(sol.tree)
    return doc


def cmd_solve(args, out):
    inst = parse_instance(_read(args.input))
    run = solve_general_base if args.base else solve_general
    g = run(inst, args.epsilon, args.lambda_, args.seed, tree_seed=args.tree_seed)
    doc = solution_to_doc(g.superset, g.open, g.assignment, g.cost_in_original, args.seed)
    doc["algorithm"] = "base" if args.base else "private"
    doc["tree_seed"] = args.tree_seed
    doc["cost_in_tree"] = {"facility_cost": g.cost_in_tree.facility,
                           "connection_cost": g.cost_in_tree.connection,
                           "total": g.cost_in_tree.total}
    doc["tree"] = tree_to_doc(g.embedding.tree)
    doc["tree"]["embedding"] = {"beta": g.embedding.beta,
                                "permutation": list(g.embedding.permutation),
                                "leaf_of_point": list(g.embedding.leaf_of_point),
                                "scale": g.scale}
    doc["tree_solution"] = solution_to_doc(
        g.tree_solution.superset, g.tree_solution.open, g.tree_solution.assignment,
        g.tree_solution.costs, None)
    return doc


def cmd_opt(args, out):
    if args.tree:
        tree = parse_tree(_read(args.tree))
        f, clients = parse_client_doc(_read(args.input), tree.n_points)
        leaf = opt_tree_dp(tree, clients, f, leaves_only=True)
        anywhere = opt_tree_dp(tree, clients, f)
        # report facilities at leaves by point id
        pts = sorted(int(tree.point[v]) for v in leaf.opt_set)
        return {"opt_cost": leaf.opt_cost, "opt_set": pts, "metric": "tree",
                "method": "tree-dp", "vertex_opt_cost": anywhere.opt_cost,
                "vertex_opt_set": sorted(anywhere.opt_set)}
    inst = parse_instance(_read(args.input))
    if inst.n > EXHAUSTIVE_LIMIT:
        raise ParseError("n", f"exhaustive optimum supports at most {EXHAUSTIVE_LIMIT} points")
    r = opt_exhaustive(inst)
    return {"opt_cost": r.opt_cost, "opt_set": sorted(r.opt_set), "metric": "input",
            "method": "exhaustive"}


def cmd_audit(args, out):
    p = SolverParams(args.epsilon, args.f, args.lambda_)
    rep = audit(p, maxN=args.max_n, mc_samples=args.mc_samples,
                rng=np.random.default_rng([args.seed, 2]))
    led = rep.ledger
    return {
        "L_prime": p.L_prime,
        "per_level_epsilon": list(led.per_level),
        "scales": [1 / e for e in led.per_level],
        "total": led.total,
        "closed_form": led.closed_form,
        "budget": led.budget,
        "ratio_checks": [{"level": c.level, "max_ratio": _num(c.max_ratio),
                          "bound": _num(c.bound), "worst_N": c.worst_N, "ok": c.ok}
                         for c in rep.ratio_checks],
        "monte_carlo": [{"level": l, "N": N, "exact": ex, "empirical": em, "sigma": s, "ok": ok}
                        for l, N, ex, em, s, ok in rep.monte_carlo],
        "checks": rep.checks,
        "passed": rep.passed,
    }


def cmd_lowerbound(args, out):
    n = args.n if args.n is not None else default_n(args.epsilon)
    fam = StarFamily(n, args.f, args.epsilon)
    policy = Policy.parse(args.policy, lam=args.lambda_)
    res = evaluate_policy(policy, fam, args.trials, args.seed)
    s = math.sqrt(fam.m)
    if args.csv:
        body = "trial,cost,opt,ratio\n" + "".join(
            f"{k},{c!r},{o!r},{c / o!r}\n"
            for k, (c, o) in enumerate(zip(res.costs.tolist(), res.opts.tolist())))
        Path(args.csv).write_text(_csv_text(body, args.manifest_), encoding="utf-8")
    return {
        "policy": args.policy, "n": n, "m": fam.m, "radius": fam.radius, "trials": args.trials,
        "ratio_of_means": res.ratio_of_means, "mean_ratio": res.mean_ratio,
        "max_ratio": res.max_ratio,
        "averaged_leaf_cost": res.lhs,
        "averaged_leaf_bound": 0.2 * fam.f * s / (s + 1),
        "leaf_cost_one_client": res.cond_cost_one, "leaf_cost_m_clients": res.cond_cost_m,
        "expected_opt_per_leaf": expected_opt_per_leaf(fam.f, fam.m),
    }


def cmd_bench(args, out):
    rows = run_bench(_read(args.config).decode("utf-8"))
    # wall-clock runtimes would break replay identity, so they go to a separate file
    text = _csv_text(rows_to_csv(rows, include_timing=False), args.manifest_)
    if args.timing:
        Path(args.timing).write_text(timing_csv(rows), encoding="utf-8")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return None


def cmd_replay(args, out):
    manifest = read_manifest(args.file)
    argv = argv_from_manifest(manifest)
    if args.out:
        argv += ["--out", args.out]
    if args.csv:
        argv += ["--csv", args.csv]
    return argv


# -- parser -----------------------------------------------------------------------------

def _positive(x: str) -> float:
    v = float(x)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {x}")
    return v


def _count(x: str) -> int:
    v = int(x)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {x}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dpufl", description="Differentially private facility location on tree metrics.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        sp.add_argument("--out", help="write the output here instead of standard output")
        sp.add_argument("--pretty", action="store_true", help="indented JSON")
        if seed:
            sp.add_argument("--seed", type=_count, help="master seed (random when omitted)")

    sp = sub.add_parser("embed", help="embed an instance's metric into a random HST")
    sp.add_argument("--input", required=True)
    sp.add_argument("--lambda", dest="lambda_", type=_positive, default=1.5)
    common(sp)

    sp = sub.add_parser("solve-tree", help="solve on a given HST")
    sp.add_argument("--tree", required=True)
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--clients", help="instance document with facility_cost and clients")
    src.add_argument("--input", help="alias of --clients")
    sp.add_argument("--epsilon", type=_positive, required=True)
    sp.add_argument("--f", type=_positive, help="override the document's facility cost")
    sp.add_argument("--base", action="store_true", help="noiseless marking")
    sp.add_argument("--return-all-marked", action="store_true",
                    help="publish every marked vertex instead of the minimal ones")
    common(sp)

    sp = sub.add_parser("solve", help="embed and solve a general instance")
    sp.add_argument("--input", required=True)
    sp.add_argument("--epsilon", type=_positive, required=True)
    sp.add_argument("--lambda", dest="lambda_", type=_positive, default=1.5)
    sp.add_argument("--tree-seed", type=_count, help="pin the embedding separately from the noise")
    sp.add_argument("--base", action="store_true")
    common(sp)

    sp = sub.add_parser("opt", help="exact optimum")
    sp.add_argument("--input", required=True)
    sp.add_argument("--tree", help="use this HST's metric instead of the input distances")
    common(sp, seed=False)

    sp = sub.add_parser("audit", help="privacy ledger and neighbour-ratio checks")
    sp.add_argument("--lambda", dest="lambda_", type=_positive, required=True)
    sp.add_argument("--f", type=_positive, required=True)
    sp.add_argument("--epsilon", type=_positive, required=True)
    sp.add_argument("--mc-samples", type=_count, default=0)
    sp.add_argument("--max-n", type=_count, help="largest count checked (default 10*ceil(f))")
    common(sp)

    sp = sub.add_parser("lowerbound", help="evaluate a policy on the uniform-star family")
    sp.add_argument("--epsilon", type=_positive, required=True)
    sp.add_argument("--f", type=_positive, default=1.0)
    sp.add_argument("--n", type=int, help="leaves (default 100*sqrt(m))")
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--policy", default="dp-solver",
                    help="open-all | open-none | threshold[:k] | dp-solver[:epsilon]")
    sp.add_argument("--lambda", dest="lambda_", type=_positive, default=1.5)
    sp.add_argument("--csv", help="per-trial rows: trial, cost, opt, ratio")
    common(sp)

    sp = sub.add_parser("bench", help="run a benchmark grid, CSV output")
    sp.add_argument("--config", required=True)
    sp.add_argument("--timing", help="write per-row wall-clock runtimes here")
    common(sp)

    sp = sub.add_parser("replay", help="re-run the command recorded in an output's manifest")
    sp.add_argument("file")
    sp.add_argument("--out")
    sp.add_argument("--csv", help="redirect a recorded --csv output")
    return p


COMMANDS = {
    "embed": cmd_embed, "solve-tree": cmd_solve_tree, "solve": cmd_solve, "opt": cmd_opt,
    "audit": cmd_audit, "lowerbound": cmd_lowerbound, "bench": cmd_bench,
}


def dispatch(argv, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "replay":
            return dispatch(cmd_replay(args, stdout), stdout, stderr)
        if args.command == "lowerbound" and args.trials < 1:
            raise UsageError("lowerbound: --trials must be at least 1")
        if args.command == "lowerbound":
            Policy.parse(args.policy)  # unknown policy is a usage error
    except UsageError as e:
        print(f"usage error: {e}", file=stderr)
        return 2
    except (ParseError, json.JSONDecodeError, KeyError, OSError) as e:  # bad replay file
        print(f"error: {e}", file=stderr)
        return 1
    except ValueError as e:
        print(f"usage error: {e}", file=stderr)
        return 2
    _seed(args)
    manifest = _manifest(args.command, args)
    args.manifest_ = manifest
    try:
        doc = COMMANDS[args.command](args, stdout)
        if doc is not None:
            _emit(doc, args, manifest, stdout)
    except (ValueError, OSError) as e:  # ParseError is a ValueError
        print(f"error: {e}", file=stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
