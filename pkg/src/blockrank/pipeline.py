"""End-to-end reranking strategies: overlapping-block joint ranking and two baselines."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

from blockrank.aggregation import AggregatorConfig, aggregate, extract_comparisons
from blockrank.designs import FAMILIES, build_design, is_connected
from blockrank.model import BlockDesign, Candidate, DesignError, Ranking
from blockrank.rankers import DispatchConfig, DispatchReport, ListwiseRanker, UsageRecord, dispatch_blocks

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class JointRankConfig:
    """Exactly one of ``r`` (target replication, ``b = round(r*N/k)``) or ``b`` must be set."""

    k: int = 20
    r: float | None = None
    b: int | None = None
    design_family: str = "ebd"
    aggregator: AggregatorConfig = field(default_factory=AggregatorConfig)
    dispatch: DispatchConfig = field(default_factory=DispatchConfig)
    seed: int = 0
    connectivity_attempts: int = 10

    def __post_init__(self) -> None:
        if (self.r is None) == (self.b is None):
            raise ValueError("set exactly one of r and b")
        if self.k < 2:
            raise ValueError("block size k must be at least 2")
        if self.design_family not in FAMILIES:
            raise ValueError(f"unknown design family {self.design_family!r}")
        if self.connectivity_attempts < 1:
            raise ValueError("connectivity_attempts must be at least 1")

    def block_count(self, n: int) -> int:
        if self.b is not None:
            return self.b
        return max(1, round(self.r * n / self.k))


@dataclass
class RerankResult:
    """``ranking`` is over first-stage positions; ``candidates`` is the reranked list."""

    ranking: Ranking
    candidates: list[Candidate]
    inference_count: int
    usage_total: UsageRecord
    reports: list[DispatchReport]
    design: BlockDesign | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def span(self) -> float:
        """Sequential sum of per-dispatch makespans."""
        return sum(rep.span for rep in self.reports)


def first_stage_order(candidates: Sequence[Candidate]) -> list[Candidate]:
    ordered = sorted(candidates, key=lambda c: c.initial_rank)
    if [c.initial_rank for c in ordered] != list(range(len(ordered))):
        raise ValueError("candidate initial_rank values must form a permutation of range(N)")
    if len({c.external_id for c in ordered}) != len(ordered):
        raise ValueError("candidate external_id values must be unique")
    return ordered


def make_design(family: str, v: int, k: int, b: int, seed: int, attempts: int = 10,
                require_connected: bool = True) -> BlockDesign:
    """Build a design, reseeding randomized families with ``seed+1, seed+2, ...`` until connected."""
    for attempt in range(attempts):
        design = build_design(family, v, k, b, seed=seed + attempt)
        if not require_connected or is_connected(design):
            return design
        if family not in ("ebd", "random"):
            break
        log.info("%s design (v=%d, k=%d, b=%d, seed=%d) is disconnected; reseeding",
                 family, v, k, b, seed + attempt)
    raise DesignError(f"no connected {family} design with v={v}, k={k}, b={b} after {attempts} attempts")


def _result(order: Sequence[int], scores, ordered: list[Candidate], reports: list[DispatchReport],
            design: BlockDesign | None = None, extra: Sequence[str] = ()) -> RerankResult:
    ranking = Ranking(tuple(order), scores)
    warnings = [w for rep in reports for w in rep.warnings] + list(extra)
    usage = UsageRecord()
    for rep in reports:
        usage = usage + rep.usage
    return RerankResult(
        ranking=ranking,
        candidates=[ordered[i] for i in ranking.order],
        inference_count=sum(rep.inference_count for rep in reports),
        usage_total=usage,
        reports=reports,
        design=design,
        warnings=warnings,
    )


def jointrank_rerank(query: str, candidates: Sequence[Candidate], cfg: JointRankConfig,
                     ranker: ListwiseRanker) -> RerankResult:
    """Rank overlapping blocks in one parallel batch and aggregate their implicit comparisons."""
    ordered = first_stage_order(candidates)
    n = len(ordered)
    if n < 2:
        raise ValueError("need at least two candidates")
    if cfg.k > n:
        raise DesignError(f"block size k={cfg.k} exceeds candidate count {n}")
    design = make_design(cfg.design_family, n, cfg.k, cfg.block_count(n), cfg.seed,
                         cfg.connectivity_attempts)
    # blocks are shown in first-stage order, so a block whose calls all fail keeps that order
    blocks = [tuple(sorted(block)) for block in design.blocks]
    block_rankings, report = dispatch_blocks(ranker, query, ordered, blocks, cfg.dispatch)
    if all(o.failed for o in report.outcomes):
        return _result(range(n), None, ordered, [report], design,
                       ["every block failed; returning the first-stage order"])
    graph = extract_comparisons(block_rankings, n)
    ranking = aggregate(graph, cfg.aggregator, Ranking.identity(n))
    return _result(ranking.order, ranking.scores, ordered, [report], design, ranking.warnings)


def full_context_rerank(query: str, candidates: Sequence[Candidate], ranker: ListwiseRanker,
                        dispatch: DispatchConfig | None = None) -> RerankResult:
    """A single ranker call over the whole candidate list."""
    ordered = first_stage_order(candidates)
    if not ordered:
        raise ValueError("need at least one candidate")
    (block,), report = dispatch_blocks(ranker, query, ordered, [tuple(range(len(ordered)))], dispatch)
    return _result(block.order, None, ordered, [report])


def sliding_window_starts(n: int, w: int, s: int) -> list[int]:
    starts = list(range(n - w, -1, -s))
    if starts[-1] != 0:
        starts.append(0)
    return starts


def sliding_window_rerank(query: str, candidates: Sequence[Candidate], w: int, s: int,
                          ranker: ListwiseRanker, dispatch: DispatchConfig | None = None) -> RerankResult:
    """One bottom-to-top pass of a size-``w`` window moving up by ``s``; each call reorders in place."""
    ordered = first_stage_order(candidates)
    n = len(ordered)
    if not 1 <= s < w <= n:
        raise ValueError(f"need 1 <= s < w <= N, got s={s}, w={w}, N={n}")
    current = list(range(n))
    reports = []
    for start in sliding_window_starts(n, w, s):
        window = tuple(current[start:start + w])
        (block,), report = dispatch_blocks(ranker, query, ordered, [window], dispatch)
        current[start:start + w] = block.order
        reports.append(report)
    return _result(current, None, ordered, reports)
