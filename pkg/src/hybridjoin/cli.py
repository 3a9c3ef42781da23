"""Command-line front end: catalogue, run, explain, spectrum and qerror subcommands."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import dataclass

from .catalogue import CatalogueFormatError, build_catalogue, estimate_cardinality, load_catalogue, save_catalogue
from .cost_model import CostModel, CostWeights
from .datasets import random_walk_queries
from .executor import (HOMOMORPHISM, ICOST_FULL, ICOST_MODES, ISOMORPHISM, ExecStats, execute, execute_parallel,
                       make_adaptive, stream)
from .graph_store import GraphFormatError, ReferentialError, load_graph
from .oracle import OracleGuardExceeded, brute_force_count, q_error
from .planner import SPECTRUM_MAX_VERTICES, GuardExceeded, enumerate_spectrum, optimize, wco_plan
from .plans import explain
from .query import QuerySyntaxError, QueryValidationError, parse_query

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VALIDATION, EXIT_GUARD = 0, 1, 2, 3, 4
BUCKETS = (2, 3, 5, 10)

log = logging.getLogger("hybridjoin")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    vertices: str
    edges: str
    header: bool = False
    catalogue: str | None = None
    query: str | None = None
    h: int = 3
    z: int = 1000
    seed: int = 0
    w1: float = 3.0
    w2: float = 1.0
    workers: int = 1
    adaptive: bool = False
    cache: bool = True
    semantics: str = HOMOMORPHISM
    icost_mode: str = ICOST_FULL
    gallop: bool = True
    mode: str = "count"

    def __post_init__(self):
        if self.h < 2:
            raise UsageError("h must be at least 2")
        if self.z < 1:
            raise UsageError("z must be at least 1")
        if self.workers < 1:
            raise UsageError("workers must be at least 1")


def _config(args) -> RunConfig:
    fields = RunConfig.__dataclass_fields__
    return RunConfig(**{k: v for k, v in vars(args).items() if k in fields})


def _graph_args(p):
    p.add_argument("--vertices", required=True, help="vertex CSV: id[,label]")
    p.add_argument("--edges", required=True, help="edge CSV: src,dst[,label]")
    p.add_argument("--header", action="store_true", help="skip a header row in both files")


def _catalogue_args(p):
    p.add_argument("--h", type=int, default=3, help="largest sub-query size stored (default 3)")
    p.add_argument("--z", type=int, default=1000, help="sampled matches per pattern (default 1000)")
    p.add_argument("--seed", type=int, default=0)


def _plan_args(p):
    _graph_args(p)
    _catalogue_args(p)
    p.add_argument("--catalogue", help="catalogue file; built in memory when omitted")
    p.add_argument("--query", required=True, help="pattern such as '(a)-[:E]->(b),(b)-[:E]->(c)'")
    p.add_argument("--w1", type=float, default=3.0, help="hash-join build weight")
    p.add_argument("--w2", type=float, default=1.0, help="hash-join probe weight")


def _exec_args(p):
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--adaptive", action="store_true", help="pick E/I orders per tuple")
    p.add_argument("--no-cache", dest="cache", action="store_false", help="disable the intersection cache")
    p.add_argument("--no-gallop", dest="gallop", action="store_false",
                   help="merge adjacency lists in full instead of binary-searching skewed pairs")
    p.add_argument("--semantics", choices=(HOMOMORPHISM, ISOMORPHISM), default=HOMOMORPHISM)
    p.add_argument("--icost-mode", choices=ICOST_MODES, default=ICOST_FULL,
                   help="charge whole lists (full) or only entries not already in the match (unmatched)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybridjoin", description="Subgraph queries with WCO, binary-join and hybrid plans.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("catalogue", help="build and save a catalogue")
    _graph_args(p)
    _catalogue_args(p)
    p.add_argument("--out", required=True, help="output catalogue path")

    for name in ("run", "explain"):
        p = sub.add_parser(name, help="plan and execute a query" if name == "run" else "print the chosen plan")
        _plan_args(p)
        _exec_args(p)
        p.add_argument("--mode", choices=("count", "stream"), default="count")
        p.add_argument("--stats", action="store_true", help="print execution statistics")
        p.add_argument("--qvo", help="comma-separated vertex order; runs that WCO plan instead of optimising")
        p.add_argument("--explain", action="store_true", default=name == "explain",
                       help="print the plan instead of running it")

    p = sub.add_parser("spectrum", help="time every plan of a query")
    _plan_args(p)
    _exec_args(p)
    p.add_argument("--force", action="store_true", help="enumerate beyond the size guard")
    p.add_argument("--max-vertices", type=int, default=SPECTRUM_MAX_VERTICES)

    p = sub.add_parser("qerror", help="estimation accuracy over a query suite")
    _graph_args(p)
    _catalogue_args(p)
    p.add_argument("--catalogue")
    p.add_argument("--queries", help="file with one pattern per line; generated when omitted")
    p.add_argument("--count", type=int, default=100, help="generated queries")
    p.add_argument("--size", type=int, default=5, help="vertices per generated query")
    p.add_argument("--suite-seed", type=int, default=0)
    return parser


def _load(cfg: RunConfig):
    g = load_graph(cfg.vertices, cfg.edges, header=cfg.header)
    if cfg.catalogue:
        cat = load_catalogue(cfg.catalogue)
    else:
        cat = build_catalogue(g, h=cfg.h, z=cfg.z, seed=cfg.seed)
    return g, cat


def cmd_catalogue(args, out) -> int:
    cfg = _config(args)
    g = load_graph(cfg.vertices, cfg.edges, header=cfg.header)
    t0 = time.perf_counter()
    cat = build_catalogue(g, h=cfg.h, z=cfg.z, seed=cfg.seed)
    elapsed = time.perf_counter() - t0
    save_catalogue(cat, args.out)
    w = csv.writer(out)
    w.writerow(["entries", "patterns", "build_seconds"])
    w.writerow([len(cat), len(cat.patterns), f"{elapsed:.6f}"])
    return EXIT_OK


def cmd_run(args, out) -> int:
    cfg = _config(args)
    g, cat = _load(cfg)
    q = parse_query(args.query)
    cm = CostModel(q, cat, CostWeights(cfg.w1, cfg.w2))
    if args.qvo:
        plan = wco_plan(q, [v.strip() for v in args.qvo.split(",")])
    else:
        plan = optimize(q, cat, cost_model=cm)
    if cfg.adaptive:
        plan = make_adaptive(plan)
    if args.explain:
        out.write(explain(plan, cm) + "\n")
        return EXIT_OK
    kw = dict(cache=cfg.cache, semantics=cfg.semantics, icost_mode=cfg.icost_mode, catalogue=cat,
              gallop=cfg.gallop)
    if cfg.mode == "stream":
        if cfg.workers > 1:
            log.warning("stream mode runs serially; --workers ignored")
        stats = ExecStats()
        out.write("\t".join(plan.vertices) + "\n")
        for t in stream(plan, g, stats, **kw):
            out.write("\t".join(map(str, t)) + "\n")
    elif cfg.workers > 1:
        r = execute_parallel(plan, g, cfg.workers, **kw)
        stats = r.stats
        out.write(f"{r.count}\n")
    else:
        r = execute(plan, g, "count", **kw)
        stats = r.stats
        out.write(f"{r.count}\n")
    if args.stats:
        out.write(stats.as_text() + "\n")
    return EXIT_OK


def cmd_spectrum(args, out) -> int:
    cfg = _config(args)
    g, cat = _load(cfg)
    q = parse_query(args.query)
    cm = CostModel(q, cat, CostWeights(cfg.w1, cfg.w2))
    plans = enumerate_spectrum(q, cat, cost_model=cm, force=args.force, max_vertices=args.max_vertices)
    chosen = optimize(q, cat, cost_model=cm).root
    w = csv.writer(out)
    w.writerow(["plan_id", "plan", "estimated_cost", "seconds", "icost", "output_count", "chosen"])
    for i, rp in enumerate(plans):
        plan = make_adaptive(rp.plan) if cfg.adaptive else rp.plan
        kw = dict(cache=cfg.cache, semantics=cfg.semantics, icost_mode=cfg.icost_mode, catalogue=cat,
                  gallop=cfg.gallop)
        execute(plan, g, **kw)  # warm-up
        t0 = time.perf_counter()
        r = execute_parallel(plan, g, cfg.workers, **kw) if cfg.workers > 1 else execute(plan, g, **kw)
        secs = time.perf_counter() - t0
        w.writerow([i, rp.plan.signature(), f"{rp.cost:.6g}", f"{secs:.6f}", r.stats.icost_actual, r.count,
                    int(rp.plan.root == chosen)])
    return EXIT_OK


def bucket_counts(errors) -> dict[str, int]:
    """Queries with q-error at most each threshold, plus those above 20."""
    out = {f"<={b}": sum(1 for e in errors if e <= b) for b in BUCKETS}
    out[">20"] = sum(1 for e in errors if e > 20)
    return out


def cmd_qerror(args, out) -> int:
    cfg = _config(args)
    g, cat = _load(cfg)
    if args.queries:
        with open(args.queries, encoding="utf-8") as f:
            queries = [parse_query(line) for line in f if line.strip() and not line.startswith("#")]
    else:
        queries = random_walk_queries(g, args.count, args.size, seed=args.suite_seed)
    w = csv.writer(out)
    w.writerow(["query_id", "query", "true", "estimate", "q_error"])
    errors = []
    for i, q in enumerate(queries):
        truth = brute_force_count(q, g)
        est = estimate_cardinality(cat, q)
        e = q_error(est, truth)
        errors.append(e)
        w.writerow([i, q.to_text(), truth, f"{est:.6g}", f"{e:.6g}"])
    out.write("\n")
    buckets = bucket_counts(errors)
    w.writerow(["≤2", "≤3", "≤5", "≤10", ">20"])
    w.writerow(list(buckets.values()))
    return EXIT_OK


COMMANDS = {"catalogue": cmd_catalogue, "run": cmd_run, "explain": cmd_run,
            "spectrum": cmd_spectrum, "qerror": cmd_qerror}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, GraphFormatError, CatalogueFormatError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (GuardExceeded, OracleGuardExceeded) as e:
        print(f"refused: {e}", file=sys.stderr)
        return EXIT_GUARD
    except (QuerySyntaxError, QueryValidationError, ReferentialError, ValueError) as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
