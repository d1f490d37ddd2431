"""Command line driver: generate instances, run the embedders, re-verify.

Exit codes: 0 verified success, 1 invariant breach (or a red verification),
2 invalid instance, 3 budget exhausted.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
import traceback
from typing import Any, Mapping

import networkx as nx

from . import apps
from .embedder import (EmbedParams, instance_from_json, instance_to_json, rainbow_blowup_embed,
                       validate_instance, verify_embedding)
from .errors import BudgetExhausted, InstanceError, InvariantBreach
from .generate import (blowup_instance, bounded_colouring, paths_and_cycles, planted_cycle_host,
                       random_bounded_tree, random_host, reduced_graph)
from .graphcore import PartitionedGraph, colour_boundedness, graph_from_json, graph_to_json
from .rng import derive

EXIT_OK, EXIT_BREACH, EXIT_INVALID, EXIT_BUDGET = 0, 1, 2, 3
GEN_KINDS = ("matchings-blowup", "general-blowup", "dirac-tree", "quasirandom", "partial")


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default)


def _default(o):
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    if hasattr(o, "item"):
        return o.item()
    if hasattr(o, "tolist"):
        return o.tolist()
    return str(o)


def _tree_json(g: nx.Graph) -> dict:
    return graph_to_json(PartitionedGraph([list(range(g.number_of_nodes()))], g.edges))


def _nx_from_json(obj) -> nx.Graph:
    G, _ = graph_from_json(obj)
    g = nx.Graph()
    g.add_nodes_from(range(G.vertex_count))
    g.add_edges_from(G.edges)
    return g


# generation

def gen_instance(kind: str, seed: int = 0, *, r: int = 3, cluster: int = 24, p: float = 0.8, k: int = 2,
                 delta_c: int = 1, palette: int | None = None, delta: int = 2, x0: int = 0,
                 n: int = 120, reduced: str = "path", eps: float | None = None, d: float | None = None,
                 x_size: int = 4, y_size: int = 5) -> dict:
    """Instance JSON for one of GEN_KINDS; deterministic per seed."""
    if kind == "matchings-blowup":
        I = blowup_instance("matchings", r, cluster, p, k, delta_c, palette, reduced, delta, 0,
                            eps=0.15 if eps is None else eps, d=d, seed=seed)
        obj = instance_to_json(I)
    elif kind == "general-blowup":
        I = blowup_instance("general", r, cluster, p, k, delta_c, palette, reduced, delta, x0,
                            eps=0.15 if eps is None else eps, d=d, seed=seed)
        obj = instance_to_json(I)
    elif kind == "dirac-tree":
        G, c = planted_cycle_host(n, r, p, k, delta_c, seed=seed)
        T = random_bounded_tree(n, delta, seed=derive(seed, "tree-gen"))
        obj = {"G": graph_to_json(G, c), "T": _tree_json(T),
               "params": {"eps": 0.25 if eps is None else eps, "d": 0.5 if d is None else d,
                          "delta": delta, "mu": colour_boundedness(c)[0] / n}}
    elif kind == "quasirandom":
        G, c = random_host(n, p, k, delta_c, seed=seed)
        H = paths_and_cycles(n, seed=derive(seed, "H-gen"))
        obj = {"G": graph_to_json(G, c), "H": graph_to_json(H),
               "params": {"eps": 0.25 if eps is None else eps, "d": 0.3 if d is None else d,
                          "mu": colour_boundedness(c)[0] / n}}
    elif kind == "partial":
        obj = _gen_partial(seed, r, cluster, p, k, delta_c, delta, x_size, y_size, eps, d)
    else:
        raise InstanceError(f"unknown instance kind {kind!r}; choose from {', '.join(GEN_KINDS)}")
    obj["kind"] = kind
    return obj


def _gen_partial(seed, r, cluster, p, k, delta_c, delta, x_size, y_size, eps, d) -> dict:
    rng = derive(seed, "partial-gen")
    parts = [[]] + [list(range(i * cluster, (i + 1) * cluster)) for i in range(r)]
    R = reduced_graph("complete", r)
    edges = []
    for i in range(1, r + 1):
        for j in range(i + 1, r + 1):
            M = rng.random((cluster, cluster)) < p
            edges += [(parts[i][a], parts[j][b]) for a, b in zip(*M.nonzero())]
    G = PartitionedGraph(parts, edges)
    c = bounded_colouring(G.edges, k, delta_c, seed=derive(seed, "partial-colours"))
    N = x_size + y_size
    where = {z: int(rng.integers(1, r + 1)) for z in range(N)}
    H = nx.Graph()
    H.add_nodes_from(range(N))
    for _ in range(4 * N):
        a, b = (int(z) for z in rng.integers(N, size=2))
        if (a != b and where[a] != where[b] and min(a, b) < x_size
                and H.degree[a] < delta and H.degree[b] < delta):
            H.add_edge(a, b)
    X = {str(i): [z for z in range(x_size) if where[z] == i] for i in range(1, r + 1)}
    Y = {str(i): [z for z in range(x_size, N) if where[z] == i] for i in range(1, r + 1)}
    n = G.vertex_count
    return {"G": graph_to_json(G, c), "H": _tree_json(H), "X": X, "Y": Y,
            "R": sorted([min(e), max(e)] for e in R.edges),
            "params": {"eps": 0.4 if eps is None else eps, "d_prime": 0.02 if d is None else d,
                       "mu": colour_boundedness(c)[0] / n}}


# running

def _params(flags: Mapping[str, Any]) -> EmbedParams:
    P = EmbedParams()
    for key in ("eps", "d", "mu", "strategy", "reservation"):
        if flags.get(key) is not None:
            setattr(P, key, flags[key])
    if flags.get("budget_rounds") is not None:
        P.round_retries = int(flags["budget_rounds"])
    if flags.get("budget_attempts") is not None:
        P.conflict_attempts = int(flags["budget_attempts"])
        P.split_attempts = max(1, int(flags["budget_attempts"]))
    if flags.get("mode") is not None:
        P.reg_mode = flags["mode"]
    return P


def _phi_json(phi: Mapping) -> list:
    return sorted([int(x), int(v)] for x, v in phi.items())


def _kind(obj: Mapping) -> str:
    kind = obj.get("kind")
    if kind in (None, "matchings-blowup", "general-blowup", "blowup"):
        return "blowup"
    return kind


def _run(command: str, obj: Mapping, flags: Mapping[str, Any]) -> tuple[dict, dict]:
    seed = flags.get("seed", 0)
    kind = _kind(obj)
    prm = dict(obj.get("params", {}))
    for key in ("eps", "d", "mu"):
        if flags.get(key) is not None:
            prm[key] = flags[key]
    mode = flags.get("mode") or "auto"
    if command == "embed":
        if kind != "blowup":
            raise InstanceError(f"`embed` needs a blow-up instance, got {kind!r}")
        I = instance_from_json(obj)
        val = validate_instance(I, mode=mode, seed=derive(seed, "validate"))
        if not val["ok"]:
            raise InstanceError(f"[validate] {[k for k, v in val['checks'].items() if not v['ok']]}")
        res = rainbow_blowup_embed(I, I.phi0, seed, _params(flags))
        rep = dict(res.report)
        rep["validation"] = val
        return {"phi": _phi_json(res.phi), "verified": bool(rep["verification"]["ok"]),
                "rounds": rep.get("rounds", [])}, rep
    if command == "tree-embed":
        if kind != "dirac-tree":
            raise InstanceError(f"`tree-embed` needs a dirac-tree instance, got {kind!r}")
        G, c = graph_from_json(obj["G"])
        T = _nx_from_json(obj["T"])
        budget = flags.get("budget_attempts")
        res = apps.dirac_tree_embed(G, c, T, prm.get("mu"), _params(flags) if _overrides(flags) else None,
                                    seed, eps=prm.get("eps", 0.25), d=prm.get("d", 0.5),
                                    delta=int(prm.get("delta", 3)), reg_mode=mode,
                                    attempts=20 if budget is None else max(1, int(budget)))
        return {"phi": _phi_json(res.phi), "verified": bool(res.report["verification"]["ok"]),
                "rounds": res.report["embed"].get("rounds", [])}, res.report
    if command == "quasirandom-embed":
        if kind != "quasirandom":
            raise InstanceError(f"`quasirandom-embed` needs a quasirandom instance, got {kind!r}")
        G = _nx_from_json(obj["G"])
        _, c = graph_from_json(obj["G"])
        H = _nx_from_json(obj["H"])
        res = apps.quasirandom_embed(G, H, c, prm.get("mu"), prm.get("eps", 0.25), prm.get("d", 0.3), seed,
                                     _params(flags) if _overrides(flags) else None,
                                     reg_mode="sampled" if mode == "auto" else mode)
        return {"phi": _phi_json(res.phi), "verified": bool(res.report["verification"]["ok"]),
                "rounds": res.report["embed"].get("rounds", [])}, res.report
    if command == "partial-embed":
        if kind != "partial":
            raise InstanceError(f"`partial-embed` needs a partial instance, got {kind!r}")
        G, c, H, X, Y, R = _partial_inputs(obj)
        budget = flags.get("budget_attempts")
        res = apps.partial_embed(G, c, H, X, Y, R, prm.get("mu"), prm.get("eps", 0.4), prm.get("d_prime", 0.02),
                                 seed, conflict_attempts=500 if budget is None else max(1, int(budget)),
                                 attempts=10 if flags.get("budget_rounds") is None
                                 else max(1, int(flags["budget_rounds"])))
        return {"phi": _phi_json(res.phi), "verified": bool(res.report["verification"]["ok"]),
                "C_prime": sorted(res.C_prime), "S": sorted([y, sorted(s)] for y, s in res.S.items()),
                "rounds": res.report.get("rounds", [])}, res.report
    raise InstanceError(f"unknown command {command!r}")


def _overrides(flags) -> bool:
    return any(flags.get(k) is not None for k in ("budget_rounds", "budget_attempts", "strategy", "reservation"))


def _partial_inputs(obj):
    G, c = graph_from_json(obj["G"])
    H = _nx_from_json(obj["H"])
    X = {int(i): list(v) for i, v in obj["X"].items()}
    Y = {int(i): list(v) for i, v in obj["Y"].items()}
    R = nx.Graph()
    R.add_nodes_from(range(1, G.r + 1))
    R.add_edges_from(tuple(e) for e in obj["R"])
    return G, c, H, X, Y, R


def run_pipeline(command: str, instance: Mapping | str, flags: Mapping[str, Any] | None = None) -> tuple[int, dict, dict]:
    """Run a command on an instance (parsed JSON or its text).  Returns
    (exit code, output JSON, report JSON); never raises for the documented
    failure kinds."""
    flags = dict(flags or {})
    t0 = time.perf_counter()
    report: dict = {"command": command, "seed": flags.get("seed", 0),
                    "flags": {k: v for k, v in flags.items() if v is not None}}
    out: dict = {"phi": [], "verified": False, "rounds": []}
    try:
        obj = json.loads(instance) if isinstance(instance, str) else instance
        if not isinstance(obj, Mapping):
            raise InstanceError("instance JSON must be an object")
        out, rep = _run(command, obj, flags)
        report.update(rep)
        code = EXIT_OK if out["verified"] else EXIT_BREACH
    except json.JSONDecodeError as exc:
        code, report["error"] = EXIT_INVALID, f"not valid JSON: {exc}"
    except (InstanceError, KeyError, TypeError) as exc:
        code, report["error"] = EXIT_INVALID, f"invalid instance: {exc}"
    except BudgetExhausted as exc:
        code, report["error"] = EXIT_BUDGET, str(exc)
        report["diagnostics"] = exc.diagnostics
    except (InvariantBreach, AssertionError) as exc:
        code, report["error"] = EXIT_BREACH, f"invariant breach: {exc}"
        report["traceback"] = traceback.format_exc()
    report["exit_code"] = code
    report["verified"] = bool(out.get("verified")) and code == EXIT_OK
    report["seconds"] = time.perf_counter() - t0
    return code, out, report


# independent re-verification

def verify_report(instance: Mapping, embedding: Mapping) -> dict:
    """Re-check an embedding against its instance from scratch."""
    kind = _kind(instance)
    try:
        phi = {int(x): int(v) for x, v in embedding["phi"]}
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"malformed embedding JSON: {exc}") from exc
    if kind == "blowup":
        I = instance_from_json(instance)
        _structure(phi, range(I.H.vertex_count), I.G.vertex_count)
        rep = verify_embedding(I, phi, I.phi0)
    elif kind in ("dirac-tree", "quasirandom"):
        G, c = graph_from_json(instance["G"])
        g = _nx_from_json(instance["T" if kind == "dirac-tree" else "H"])
        _structure(phi, g.nodes, G.vertex_count)
        rep = apps.verify_spanning_embedding(G, c, g, phi)
    elif kind == "partial":
        G, c, H, X, Y, R = _partial_inputs(instance)
        Xall = [x for v in X.values() for x in v]
        _structure(phi, Xall, G.vertex_count, spanning=False)
        res = apps.PartialEmbedding(set(embedding.get("C_prime", [])), phi,
                                    {int(y): set(s) for y, s in embedding.get("S", [])}, [], {})
        rep = apps.verify_partial_embedding(G, c, H, X, Y, res, float(instance.get("params", {}).get("d_prime", 0)))
    else:
        raise InstanceError(f"unknown instance kind {kind!r}")
    return {"kind": kind, "ok": bool(rep["ok"]), "checks": rep.get("checks", rep)}


def _structure(phi: Mapping[int, int], domain, n: int, spanning: bool = True) -> None:
    dom = set(domain)
    if set(phi) != dom:
        raise InstanceError(f"structural mismatch: embedding domain has {len(phi)} vertices, "
                            f"instance has {len(dom)}")
    if any(not 0 <= v < n for v in phi.values()):
        raise InstanceError("structural mismatch: image outside the host")


# argparse front end

def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("instance", help="instance JSON file ('-' for stdin)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget-rounds", type=int, default=None, help="retries per embedding round")
    p.add_argument("--budget-attempts", type=int, default=None, help="rejection-sampling attempts")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--d", type=float, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--mode", choices=("exact", "sampled"), default=None, help="regularity test mode")
    p.add_argument("--strategy", choices=("reduce", "direct"), default=None)
    p.add_argument("--reservation", choices=("split", "ledger", "auto"), default=None)
    p.add_argument("--report", default=None, help="write the full report JSON here")
    p.add_argument("--out", default=None, help="write the embedding JSON here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rainbowblowup", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("embed", "tree-embed", "partial-embed", "quasirandom-embed"):
        _add_run_flags(sub.add_parser(name, help=f"run {name} on an instance"))
    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("kind", choices=GEN_KINDS)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--r", type=int, default=3)
    g.add_argument("--cluster", type=int, default=24)
    g.add_argument("--n", type=int, default=120)
    g.add_argument("--p", type=float, default=0.8)
    g.add_argument("--k", type=int, default=2, help="colour bound: each colour on at most k edges")
    g.add_argument("--delta-c", type=int, default=1, help="colours per edge")
    g.add_argument("--palette", type=int, default=None)
    g.add_argument("--delta", type=int, default=2)
    g.add_argument("--x0", type=int, default=0)
    g.add_argument("--reduced", choices=("path", "cycle", "complete"), default="path")
    g.add_argument("--eps", type=float, default=None)
    g.add_argument("--d", type=float, default=None)
    g.add_argument("--out", default=None)
    v = sub.add_parser("verify", help="re-verify an embedding against its instance")
    v.add_argument("instance")
    v.add_argument("embedding")
    v.add_argument("--report", default=None)
    return ap


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "gen":
        try:
            obj = gen_instance(args.kind, args.seed, r=args.r, cluster=args.cluster, p=args.p, k=args.k,
                               delta_c=args.delta_c, palette=args.palette, delta=args.delta, x0=args.x0,
                               n=args.n, reduced=args.reduced, eps=args.eps, d=args.d)
        except InstanceError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        _write(args.out, _dump(obj))
        return EXIT_OK
    if args.command == "verify":
        try:
            rep = verify_report(json.loads(_read(args.instance)), json.loads(_read(args.embedding)))
        except (OSError, json.JSONDecodeError, InstanceError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        text = json.dumps(rep, indent=1, sort_keys=True, default=_default)
        _write(args.report, text)
        return EXIT_OK if rep["ok"] else EXIT_BREACH
    try:
        text = _read(args.instance)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    flags = {k: getattr(args, k) for k in ("seed", "budget_rounds", "budget_attempts", "eps", "d", "mu",
                                           "mode", "strategy", "reservation")}
    code, out, rep = run_pipeline(args.command, text, flags)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(rep, fh, indent=1, sort_keys=True, default=_default)
    _write(args.out, _dump(out))
    if code != EXIT_OK:
        print(f"error: {rep.get('error', 'failed')}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
