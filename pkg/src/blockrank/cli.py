"""Command-line entry point: ``blockrank <command> ...``.

Any long option may also be supplied through ``--config FILE``, a plain-text file of
``key = value`` lines (keys use the option name, dashes or underscores).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from blockrank.aggregation import METHODS, AggregatorConfig, aggregate
from blockrank.designs import FAMILIES, CoverageStats, build_design, coverage_stats
from blockrank.llm import HttpRanker, LlmConfig
from blockrank.model import BlockDesign, DesignError, Ranking, TournamentGraph
from blockrank.pipeline import JointRankConfig, full_context_rerank, jointrank_rerank, sliding_window_rerank
from blockrank.rankers import DispatchConfig, OracleRanker
from blockrank.synthetic import SyntheticConfig, run_coverage, run_synthetic, sweep, write_rows_csv
from blockrank.trec import evaluate_run, read_candidates, read_qrels, read_run, write_run

log = logging.getLogger("blockrank")


def read_config(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _methods(values: list[str]) -> tuple[str, ...]:
    if "all" in values:
        return METHODS
    return tuple(values)


def _write_csv(header: list[str], rows, out: str | None) -> None:
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if out:
            fh.close()


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{x:.6f}" if isinstance(x, float) else str(x)


def cmd_design(args: argparse.Namespace) -> None:
    design = build_design(args.family, args.v, args.k, args.b, seed=args.seed, cyclic=not args.acyclic)
    text = design.to_text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_coverage(args: argparse.Namespace) -> None:
    if args.design:
        design = BlockDesign.load(args.design)
        rng = np.random.default_rng(args.seed)
        totals = dict.fromkeys(CoverageStats.COLUMNS, 0.0)
        for _ in range(args.trials):
            truth = Ranking(tuple(int(x) for x in rng.permutation(design.v)))
            for name, value in coverage_stats(design, truth).as_dict().items():
                totals[name] += value
        stats = CoverageStats(**{name: total / args.trials for name, total in totals.items()})
    else:
        if not (args.family and args.v and args.k):
            raise SystemExit("coverage needs --design FILE or --family/--v/--k [--b]")
        stats = run_coverage(args.family, args.v, args.k, args.b, args.trials, args.seed)
    values = stats.as_dict()
    _write_csv(list(CoverageStats.COLUMNS), [[_fmt(values[c]) for c in CoverageStats.COLUMNS]], args.out)


def _aggregator(args: argparse.Namespace) -> AggregatorConfig:
    return AggregatorConfig(method=args.method, damping=args.damping, tolerance=args.tolerance,
                            max_iterations=args.max_iterations, elo_k=args.elo_k,
                            regularization=args.regularization, seed=args.seed)


def cmd_aggregate(args: argparse.Namespace) -> None:
    triplets = []
    for lineno, line in enumerate(Path(args.graph).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            i, j, w = line.split()
            triplets.append((int(i), int(j), float(w)))
        except ValueError:
            raise SystemExit(f"{args.graph}:{lineno}: expected 'i j weight'") from None
    v = args.v or 1 + max(max(i, j) for i, j, _ in triplets)
    ranking = aggregate(TournamentGraph.from_triplets(v, triplets), _aggregator(args))
    for w in ranking.warnings:
        log.warning(w)
    rank_of = ranking.positions()
    rows = [[item, repr(ranking.scores[item]), rank_of[item] + 1] for item in ranking.order]
    _write_csv(["item", "score", "rank"], rows, args.out)


def cmd_synthetic(args: argparse.Namespace) -> None:
    cfg = SyntheticConfig(args.v, args.design, args.k, args.b, _methods(args.aggregator), args.trials,
                          args.seed, args.cutoff, args.workers)
    result = run_synthetic(cfg)
    write_rows_csv(result.rows(), args.out)


def cmd_sweep(args: argparse.Namespace) -> None:
    bs = args.b or [None]
    rows = sweep(args.v, args.design, args.k, bs, _methods(args.aggregator), args.trials, args.seed,
                 args.cutoff, args.workers)
    write_rows_csv(rows, args.out)


def _ranker(args: argparse.Namespace, candidates):
    if args.ranker == "oracle":
        if not (args.qrels and args.query_id):
            raise SystemExit("the oracle ranker needs --qrels and --query-id")
        judged = read_qrels(args.qrels).get(args.query_id, {})
        return OracleRanker({c.external_id: judged.get(c.external_id, 0) for c in candidates})
    if not (args.endpoint and args.model):
        raise SystemExit("the http ranker needs --endpoint and --model")
    return HttpRanker(LlmConfig(args.endpoint, args.model, args.api_key_env, args.temperature,
                                request_timeout=args.timeout, max_block_size=len(candidates)))


def cmd_rerank(args: argparse.Namespace) -> None:
    candidates = read_candidates(args.candidates)
    ranker = _ranker(args, candidates)
    dispatch = DispatchConfig(args.max_inflight, args.timeout, args.retries)
    if args.strategy == "jointrank":
        r, b = (None, args.b) if args.b else (args.r, None)
        cfg = JointRankConfig(k=args.k, r=r, b=b, design_family=args.design, aggregator=_aggregator(args),
                              dispatch=dispatch, seed=args.seed)
        result = jointrank_rerank(args.query, candidates, cfg, ranker)
    elif args.strategy == "fullcontext":
        result = full_context_rerank(args.query, candidates, ranker, dispatch)
    else:
        result = sliding_window_rerank(args.query, candidates, args.w, args.s, ranker, dispatch)
    for w in result.warnings:
        log.warning(w)
    docids = [c.external_id for c in result.candidates]
    scores = None
    if result.ranking.scores is not None:
        scores = [result.ranking.scores[i] for i in result.ranking.order]
    write_run(args.out, args.query_id or "0", docids, scores, args.tag)
    usage = result.usage_total
    print(f"inferences={result.inference_count} prompt_tokens={usage.prompt_tokens} "
          f"generated_tokens={usage.generated_tokens} span={result.span:.3f}s", file=sys.stderr)


def cmd_eval(args: argparse.Namespace) -> None:
    scores = evaluate_run(read_run(args.run), read_qrels(args.qrels), args.k)
    _write_csv(["query_id", f"ndcg@{args.k}"], [[q, f"{s:.4f}"] for q, s in scores.items()], args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blockrank", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="file of 'key = value' defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    agg = argparse.ArgumentParser(add_help=False)
    agg.add_argument("--damping", type=float, default=0.85)
    agg.add_argument("--tolerance", type=float, default=1e-9)
    agg.add_argument("--max-iterations", type=int, default=1000)
    agg.add_argument("--elo-k", type=float, default=32.0)
    agg.add_argument("--regularization", type=float, default=1e-6)

    p = sub.add_parser("design", help="build a block design and write it in flat-text form")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--v", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--b", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--acyclic", action="store_true", help="naive non-wrapping sliding window")
    p.add_argument("--out")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("coverage", help="coverage statistics of a design file or a design family")
    p.add_argument("--design", help="design file; otherwise use --family/--v/--k/--b")
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--v", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--b", type=int)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("aggregate", parents=[agg], help="rank items from an 'i j weight' win graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--method", choices=METHODS, default="pagerank")
    p.add_argument("--v", type=int, help="item count (default: largest index + 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_aggregate)

    for name, func, helptext in (("synthetic", cmd_synthetic, "oracle simulation at one design point"),
                                 ("sweep", cmd_sweep, "oracle simulation over a parameter grid")):
        grid = name == "sweep"
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--v", type=int, required=True)
        p.add_argument("--design", choices=FAMILIES, required=True, nargs="+" if grid else None)
        p.add_argument("--k", type=int, required=True, nargs="+" if grid else None)
        p.add_argument("--b", type=int, nargs="+" if grid else None)
        p.add_argument("--aggregator", nargs="+", default=["pagerank"], choices=[*METHODS, "all"])
        p.add_argument("--trials", type=int, default=1000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--cutoff", type=int, default=10)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("rerank", parents=[agg], help="rerank a candidate TSV and write a TREC run")
    p.add_argument("--strategy", choices=("jointrank", "fullcontext", "window"), default="jointrank")
    p.add_argument("--candidates", required=True, help="TSV of external_id<TAB>text in first-stage order")
    p.add_argument("--query", required=True)
    p.add_argument("--query-id", default=None)
    p.add_argument("--ranker", choices=("oracle", "http"), default="http")
    p.add_argument("--qrels", help="relevance judgments for the oracle ranker")
    p.add_argument("--design", choices=FAMILIES, default="ebd")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--r", type=float, default=4.0)
    p.add_argument("--b", type=int)
    p.add_argument("--method", choices=METHODS, default="pagerank")
    p.add_argument("--w", type=int, default=20)
    p.add_argument("--s", type=int, default=10)
    p.add_argument("--max-inflight", type=int, default=16)
    p.add_argument("--retries", type=int, default=2)
    p.add_argument("--timeout", type=float, default=120.0)
    p.add_argument("--endpoint")
    p.add_argument("--model")
    p.add_argument("--api-key-env", default="OPENAI_API_KEY")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tag", default="blockrank")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("eval", help="nDCG@k of a run file against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str] | None) -> None:
    pre_parser = argparse.ArgumentParser(add_help=False)
    pre_parser.add_argument("--config")
    pre, rest = pre_parser.parse_known_args(argv)
    commands = parser._subparsers._group_actions[0].choices  # noqa: SLF001
    command = next((tok for tok in rest if tok in commands), None)
    if not pre.config or command is None:
        return
    values = read_config(pre.config)
    sub = commands[command]
    known = {a.dest: a for a in sub._actions}  # noqa: SLF001
    defaults = {}
    for key, raw in values.items():
        action = known.get(key)
        if action is None:
            continue
        convert = action.type or (lambda s: s)
        if action.nargs in ("+", "*"):
            defaults[key] = [convert(tok) for tok in raw.split()]
        elif isinstance(action, argparse._StoreTrueAction):  # noqa: SLF001
            defaults[key] = raw.lower() in ("1", "true", "yes")
        else:
            defaults[key] = convert(raw)
        action.required = False
    sub.set_defaults(**defaults)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (DesignError, ValueError, OSError) as exc:
        print(f"blockrank: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
