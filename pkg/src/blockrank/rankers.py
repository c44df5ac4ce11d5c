"""Listwise ranker interface, the oracle ranker, and the bounded-parallel block dispatcher."""

from __future__ import annotations

import heapq
import logging
import time
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

from blockrank.model import BlockRanking, Candidate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class UsageRecord:
    prompt_tokens: int = 0
    generated_tokens: int = 0
    latency: float = 0.0

    def __post_init__(self) -> None:
        if min(self.prompt_tokens, self.generated_tokens, self.latency) < 0:
            raise ValueError("usage counters must be nonnegative")

    def __add__(self, other: UsageRecord) -> UsageRecord:
        return UsageRecord(self.prompt_tokens + other.prompt_tokens,
                           self.generated_tokens + other.generated_tokens,
                           self.latency + other.latency)


@runtime_checkable
class ListwiseRanker(Protocol):
    """Orders a list of candidates for a query.

    ``rank_block`` returns a permutation of ``range(len(items))``, best first. Rankers that
    know their token usage may also provide ``rank_block_with_usage`` returning
    ``(permutation, UsageRecord)``.
    """

    def rank_block(self, query: str, items: Sequence[Candidate]) -> Sequence[int]: ...


def oracle_rank(block_items: Sequence[int], relevance: Mapping[int, float] | Sequence[float]) -> list[int]:
    """Sort ``block_items`` by descending ground-truth relevance."""
    try:
        return sorted(block_items, key=lambda item: -relevance[item])
    except (KeyError, IndexError) as exc:
        raise KeyError(f"no relevance value for item {exc.args[0]}") from exc


class OracleRanker:
    """Ranks candidates by known relevance, keyed by ``external_id``."""

    def __init__(self, relevance: Mapping[str, float]) -> None:
        self.relevance = dict(relevance)

    def rank_block(self, query: str, items: Sequence[Candidate]) -> list[int]:
        rel = [self.relevance[c.external_id] for c in items]
        return oracle_rank(range(len(items)), rel)


class IdentityRanker:
    """Returns every block unchanged; useful as a no-op baseline."""

    def rank_block(self, query: str, items: Sequence[Candidate]) -> list[int]:
        return list(range(len(items)))


@dataclass(frozen=True)
class DispatchConfig:
    max_inflight: int = 16
    per_call_timeout: float | None = None
    retries: int = 2
    retry_backoff: float = 0.0

    def __post_init__(self) -> None:
        if self.max_inflight < 1:
            raise ValueError("max_inflight must be at least 1")
        if self.retries < 0:
            raise ValueError("retries must be nonnegative")


@dataclass
class BlockOutcome:
    block_index: int
    latency: float = 0.0
    attempts: int = 0
    failed: bool = False
    error: str | None = None
    usage: UsageRecord = field(default_factory=UsageRecord)


@dataclass
class DispatchReport:
    outcomes: list[BlockOutcome]
    max_inflight: int
    wall_time: float = 0.0

    @property
    def inference_count(self) -> int:
        return sum(o.attempts for o in self.outcomes)

    @property
    def usage(self) -> UsageRecord:
        total = UsageRecord()
        for o in self.outcomes:
            total = total + o.usage
        return total

    @property
    def warnings(self) -> list[str]:
        return [f"block {o.block_index} fell back to input order: {o.error}"
                for o in self.outcomes if o.failed]

    @property
    def span(self) -> float:
        """Makespan of the recorded per-block latencies scheduled on ``max_inflight`` slots."""
        slots = [0.0] * min(self.max_inflight, max(len(self.outcomes), 1))
        for o in self.outcomes:
            heapq.heappush(slots, heapq.heappop(slots) + o.latency)
        return max(slots)


def _check_permutation(order: Sequence[int], n: int) -> list[int]:
    order = [int(x) for x in order]
    if sorted(order) != list(range(n)):
        raise ValueError(f"ranker returned {order!r}, not a permutation of range({n})")
    return order


def _call(ranker: ListwiseRanker, query: str, items: Sequence[Candidate]) -> tuple[list[int], UsageRecord | None]:
    with_usage = getattr(ranker, "rank_block_with_usage", None)
    if with_usage is not None:
        order, usage = with_usage(query, items)
        return list(order), usage
    return list(ranker.rank_block(query, items)), None


def _rank_one(ranker: ListwiseRanker, query: str, items: Sequence[Candidate],
              outcome: BlockOutcome, cfg: DispatchConfig) -> list[int]:
    for attempt in range(cfg.retries + 1):
        outcome.attempts += 1
        start = time.perf_counter()
        try:
            order, usage = _call(ranker, query, items)
            elapsed = time.perf_counter() - start
            if cfg.per_call_timeout is not None and elapsed > cfg.per_call_timeout:
                raise TimeoutError(f"call took {elapsed:.3f}s > {cfg.per_call_timeout}s")
            order = _check_permutation(order, len(items))
        except Exception as exc:  # noqa: BLE001 - any ranker failure is retried, then degraded
            elapsed = time.perf_counter() - start
            outcome.latency += elapsed
            outcome.error = f"{type(exc).__name__}: {exc}"
            log.debug("block %d attempt %d failed: %s", outcome.block_index, attempt + 1, outcome.error)
            if cfg.retry_backoff and attempt < cfg.retries:
                time.sleep(cfg.retry_backoff * 2 ** attempt)
            continue
        usage = usage or UsageRecord(latency=elapsed)
        outcome.latency += usage.latency or elapsed
        outcome.usage = outcome.usage + usage
        outcome.error = None
        return order
    outcome.failed = True
    log.warning("block %d failed after %d attempts; keeping input order", outcome.block_index, outcome.attempts)
    return list(range(len(items)))


def dispatch_blocks(ranker: ListwiseRanker, query: str, candidates: Sequence[Candidate],
                    blocks: Sequence[Sequence[int]], cfg: DispatchConfig | None = None
                    ) -> tuple[list[BlockRanking], DispatchReport]:
    """Rank every block with at most ``cfg.max_inflight`` concurrent ranker calls.

    ``blocks`` hold indices into ``candidates``. Results are aligned to block index. A block
    whose calls all fail keeps its input order and is flagged in the report.
    """
    cfg = cfg or DispatchConfig()
    if not blocks:
        raise ValueError("no blocks to dispatch")
    outcomes = [BlockOutcome(j) for j in range(len(blocks))]

    def work(j: int) -> BlockRanking:
        block = blocks[j]
        order = _rank_one(ranker, query, [candidates[i] for i in block], outcomes[j], cfg)
        return BlockRanking(j, tuple(block[p] for p in order))

    start = time.perf_counter()
    if cfg.max_inflight == 1 or len(blocks) == 1:
        rankings = [work(j) for j in range(len(blocks))]
    else:
        with ThreadPoolExecutor(max_workers=min(cfg.max_inflight, len(blocks))) as pool:
            rankings = list(pool.map(work, range(len(blocks))))
    report = DispatchReport(outcomes, cfg.max_inflight, time.perf_counter() - start)
    return rankings, report
