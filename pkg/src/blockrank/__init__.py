"""Single-pass listwise reranking of large candidate sets over overlapping block designs."""

from blockrank.aggregation import AggregatorConfig, aggregate, extract_comparisons
from blockrank.designs import (
    CoverageStats,
    build_equireplicate,
    build_latin_square,
    build_random,
    build_sliding_window,
    build_triangular,
    coverage_stats,
    is_connected,
)
from blockrank.model import BlockDesign, BlockRanking, Candidate, DesignError, Ranking, TournamentGraph, validate_design
from blockrank.pipeline import JointRankConfig, RerankResult, full_context_rerank, jointrank_rerank, sliding_window_rerank
from blockrank.rankers import DispatchConfig, ListwiseRanker, OracleRanker, UsageRecord, dispatch_blocks, oracle_rank

__all__ = [
    "AggregatorConfig", "BlockDesign", "BlockRanking", "Candidate", "CoverageStats", "DesignError",
    "DispatchConfig", "JointRankConfig", "ListwiseRanker", "OracleRanker", "Ranking", "RerankResult",
    "TournamentGraph", "UsageRecord", "aggregate", "build_equireplicate", "build_latin_square",
    "build_random", "build_sliding_window", "build_triangular", "coverage_stats", "dispatch_blocks",
    "extract_comparisons", "full_context_rerank", "is_connected", "jointrank_rerank", "oracle_rank",
    "sliding_window_rerank", "validate_design",
]
