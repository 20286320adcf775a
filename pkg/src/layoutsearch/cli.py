"""Command-line interface: parse, solve, render, rank, eval and pipeline."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import relations, solver
from .config import RunConfig, load_config, override
from .projection import ProjectionError, ReferenceLayout, generate_references, placed_from_record, render_svg
from .query import Lexicon, ParseError, Query, parse_dsl, parse_english, render_dsl
from .retrieval import (
    RankEntry,
    ground_truth_ranks,
    load_detections,
    median_rank,
    rank_baseline,
    rank_database,
    recall_at_k,
)
from .scene_model import ObjectLibrary

EXIT_OK, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_BUDGET, EXIT_IO = 0, 2, 3, 4, 5
DEFAULT_K = (1, 10, 50, 100, 500)


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# ------------------------------------------------------------------ helpers

def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise CommandError(f"{path}: invalid JSON ({exc})", EXIT_IO) from None


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path: str | Path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _library(cfg: RunConfig) -> ObjectLibrary:
    return ObjectLibrary.load(cfg.paths.object_library)


def _parse_query(text: str, fmt: str, cfg: RunConfig, library: ObjectLibrary) -> Query:
    if not text.strip():
        raise ParseError("empty query")
    if fmt == "auto":
        first = next(l.strip() for l in text.splitlines() if l.strip())
        fmt = "dsl" if first.startswith(("(", "#", "count ", "attr ")) or _looks_dsl(first) else "english"
    if fmt == "dsl":
        q = parse_dsl(text, library)
    else:
        lex = Lexicon.load(cfg.paths.relation_dictionary, library)
        q = parse_english(text, library, lex)
    if not q.triplets and not q.counts:
        raise ParseError("no objects or relations found")
    return q


def _looks_dsl(line: str) -> bool:
    words = line.split()
    return len(words) == 3 and all("-" in w or w.isalpha() for w in words) and \
        any(ch.isdigit() for ch in words[0])


def _config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    solver_over = {
        "K": getattr(args, "K", None),
        "tol": getattr(args, "tol", None),
        "max_expansions": getattr(args, "max_expansions", None),
        "seed": getattr(args, "seed", None),
    }
    if getattr(args, "no_shrinkage", False):
        solver_over["shrinkage_enabled"] = False
    if getattr(args, "no_early_stop", False):
        solver_over["early_stopping"] = False
    match_over = {"mode": getattr(args, "mode", None), "stride": getattr(args, "stride", None)}
    top = {
        "layouts": getattr(args, "layouts", None),
        "cameras": getattr(args, "cameras", None),
        "seed": getattr(args, "seed", None),
    }
    paths = {"object_library": getattr(args, "library", None),
             "relation_dictionary": getattr(args, "lexicon", None)}
    return override(cfg, solver=solver_over, match=match_over, paths=paths, top=top)


def _query_id(path: str) -> str:
    return "stdin" if path == "-" else Path(path).stem


# ------------------------------------------------------------------ stages

def do_solve(text: str, fmt: str, query_id: str, cfg: RunConfig, out=sys.stdout) -> dict:
    library = _library(cfg)
    q = _parse_query(text, fmt, cfg, library)
    c = relations.compile(q, library, cfg.relations, cfg.room)
    result = solver.solve(c, cfg=cfg.solver)
    st = result.stats
    print(f"{query_id}: {result.status}, {st.solutions} solutions, {st.expansions} expansions, "
          f"{st.prunes} prunes, {st.wall_time:.2f} s", file=out)
    if result.status == solver.INFEASIBLE:
        raise CommandError(f"{query_id}: proven infeasible (queue exhausted, no solution)", EXIT_INFEASIBLE)
    if not result.solutions:
        raise CommandError(f"{query_id}: no solution found within budget", EXIT_BUDGET)
    record = solver.dump_solutions(c, result, cfg.solver.seed)
    record["query_id"] = query_id
    record["query"] = render_dsl(q)
    return record


def do_render(record: dict, cfg: RunConfig) -> dict:
    layouts = placed_from_record(record)
    try:
        refs = generate_references(layouts, cfg.layouts, cfg.cameras, cfg.seed, cfg.intrinsics)
    except ProjectionError as exc:
        raise CommandError(f"{record.get('query_id', '?')}: {exc}", EXIT_INFEASIBLE) from None
    return {
        "query_id": record.get("query_id"),
        "query": record.get("query"),
        "references": [r.to_dict() for r in refs],
    }


def do_rank(refs_record: dict, det_dir: str, cfg: RunConfig, baseline: Optional[str] = None,
            workers: int = 1) -> dict:
    try:
        db = load_detections(det_dir)
    except FileNotFoundError as exc:
        raise CommandError(str(exc), EXIT_IO) from None
    if baseline == "h":
        q = parse_dsl(refs_record["query"], _library(cfg))
        ranking = rank_baseline(q, db, cfg.match)
        mode = "baseline-h"
    else:
        refs = [ReferenceLayout.from_dict(r) for r in refs_record["references"]]
        ranking = rank_database(refs, db, cfg.match, workers)
        mode = cfg.match.mode
    return {"query_id": refs_record.get("query_id"), "mode": mode,
            "ranking": [e.to_dict() for e in ranking]}


def do_eval(rankings: Sequence[dict], truth: dict, ks: Sequence[int]) -> dict:
    ranks = []
    for r in rankings:
        qid = r.get("query_id")
        if qid not in truth or not truth[qid]:
            raise CommandError(f"no ground truth for query {qid!r}", EXIT_PARSE)
        entries = [RankEntry(e["rank"], e["image_id"], e["score"]) for e in r["ranking"]]
        try:
            ranks.append(ground_truth_ranks(entries, truth[qid]))
        except ValueError as exc:
            raise CommandError(f"{qid}: {exc}", EXIT_PARSE) from None
    out = {f"R@{k}": recall_at_k(ranks, k) for k in ks}
    out["median"] = median_rank(ranks)
    out["queries"] = len(ranks)
    return out


def format_metrics(m: dict, ks: Sequence[int]) -> str:
    cols = [f"R@{k}" for k in ks] + ["median"]
    head = " ".join(f"{c:>8}" for c in cols)
    row = " ".join(f"{m[c]:8.3f}" if c != "median" else f"{m[c]:8.1f}" for c in cols)
    return head + "\n" + row + "\n"


# ------------------------------------------------------------------ commands

def cmd_parse(args) -> int:
    cfg = _config(args)
    library = _library(cfg)
    fmt = "dsl" if args.dsl else "english" if args.english else "auto"
    q = _parse_query(_read_text(args.input), fmt, cfg, library)
    for d in q.diagnostics:
        print(f"line {d.line}: {d.severity}: {d.message}", file=sys.stderr)
    text = render_dsl(q) if args.canonical else q.render() + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _config(args)
    fmt = "dsl" if args.dsl else "english" if args.english else "auto"
    record = do_solve(_read_text(args.query), fmt, _query_id(args.query), cfg)
    _write(args.out, _dumps(record))
    return EXIT_OK


def cmd_render(args) -> int:
    cfg = _config(args)
    out = do_render(_read_json(args.solutions), cfg)
    _write(args.out, _dumps(out))
    if args.svg_dir:
        for r in out["references"]:
            ref = ReferenceLayout.from_dict(r)
            name = f"{out['query_id']}-{ref.provenance[0]:02d}-{ref.provenance[1]:02d}.svg"
            _write(Path(args.svg_dir) / name, render_svg(ref))
    return EXIT_OK


def cmd_rank(args) -> int:
    cfg = _config(args)
    out = do_rank(_read_json(args.references), args.detections, cfg, args.baseline, args.workers)
    _write(args.out, _dumps(out))
    return EXIT_OK


def cmd_eval(args) -> int:
    truth = _read_json(args.ground_truth)
    rankings = [_read_json(p) for p in args.rankings]
    m = do_eval(rankings, truth, args.k)
    sys.stdout.write(format_metrics(m, args.k))
    if args.out:
        _write(args.out, _dumps(m))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _config(args)
    work = Path(args.work_dir)
    rankings = []
    for path in args.queries:
        qid = _query_id(path)
        record = do_solve(_read_text(path), "auto", qid, cfg)
        refs = do_render(record, cfg)
        rank = do_rank(refs, args.detections, cfg, args.baseline, args.workers)
        _write(work / f"{qid}.solutions.json", _dumps(record))
        _write(work / f"{qid}.references.json", _dumps(refs))
        _write(work / f"{qid}.ranking.json", _dumps(rank))
        rankings.append(rank)
    if args.ground_truth:
        m = do_eval(rankings, _read_json(args.ground_truth), args.k)
        sys.stdout.write(format_metrics(m, args.k))
        _write(work / "metrics.json", _dumps(m))
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file (default: $LAYOUTSEARCH_CONFIG)")
    p.add_argument("--library", help="object library YAML")
    p.add_argument("--lexicon", help="relation dictionary YAML")
    p.add_argument("--seed", type=int)


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("-K", type=int, help="stop after this many solutions")
    p.add_argument("--tol", type=float, help="split tolerance in meters")
    p.add_argument("--max-expansions", type=int)
    p.add_argument("--no-shrinkage", action="store_true")
    p.add_argument("--no-early-stop", action="store_true")


def _render_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("-m", "--layouts", type=int, help="layouts per query")
    p.add_argument("-v", "--cameras", type=int, help="cameras per layout")


def _rank_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["hard", "soft"])
    p.add_argument("--stride", type=float)
    p.add_argument("--baseline", choices=["h"], help="rank by category histograms instead")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="layoutsearch", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="print the triplets of a query")
    p.add_argument("input", help="query file or - for stdin")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--english", action="store_true")
    g.add_argument("--dsl", action="store_true")
    p.add_argument("--canonical", action="store_true", help="emit the DSL, counts included")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("solve", help="solve a query into layout boxes")
    p.add_argument("query")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--english", action="store_true")
    g.add_argument("--dsl", action="store_true")
    p.add_argument("--out", required=True)
    _common(p)
    _solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("render", help="project solutions to 2D reference layouts")
    p.add_argument("solutions")
    p.add_argument("--out", required=True)
    p.add_argument("--svg-dir")
    _common(p)
    _render_flags(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("rank", help="rank detection files against reference layouts")
    p.add_argument("references")
    p.add_argument("detections", help="directory of detection JSON files")
    p.add_argument("--out", required=True)
    _common(p)
    _rank_flags(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("eval", help="recall at k and median rank")
    p.add_argument("rankings", nargs="+")
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--k", type=int, nargs="+", default=list(DEFAULT_K))
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="solve, render, rank and evaluate query files")
    p.add_argument("queries", nargs="+")
    p.add_argument("--detections", required=True)
    p.add_argument("--ground-truth")
    p.add_argument("--work-dir", required=True)
    p.add_argument("--k", type=int, nargs="+", default=list(DEFAULT_K))
    _common(p)
    _solver_flags(p)
    _render_flags(p)
    _rank_flags(p)
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (OSError, KeyError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
