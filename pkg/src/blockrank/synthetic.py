"""Oracle-ranker simulations over block designs, and averaged coverage statistics.

Each trial draws a fresh relevance assignment ``2^1 .. 2^v`` over the items (the first-stage
order is therefore random), ranks every block with the oracle, aggregates, and scores the
result with nDCG using the raw relevance as gain. Trials are seeded independently by
``seed + trial``, so results are reproducible and may run in parallel.
"""

from __future__ import annotations

import csv
import itertools
import math
import sys
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from blockrank.aggregation import METHODS, AggregatorConfig, aggregate, extract_comparisons
from blockrank.designs import FAMILIES, CoverageStats, build_design, coverage_stats
from blockrank.metrics import accuracy_at_1, ndcg_of_ranking
from blockrank.model import BlockRanking, DesignError, Ranking
from blockrank.pipeline import make_design
from blockrank.rankers import oracle_rank

MAX_V = 1020


@dataclass(frozen=True)
class SyntheticConfig:
    v: int
    design: str
    k: int
    b: int | None = None
    methods: tuple[str, ...] = ("pagerank",)
    trials: int = 1000
    seed: int = 0
    cutoff: int = 10
    workers: int = 1

    def __post_init__(self) -> None:
        if self.design not in FAMILIES:
            raise DesignError(f"unknown design family {self.design!r}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not 2 <= self.k <= self.v:
            raise DesignError(f"need 2 <= k <= v, got k={self.k}, v={self.v}")
        if self.v > MAX_V:
            raise ValueError(f"v={self.v} exceeds {MAX_V}: relevance 2^v would overflow")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown aggregation methods {sorted(unknown)}")


@dataclass(frozen=True)
class SummaryRow:
    design: str
    aggregator: str
    v: int
    k: int
    b: int
    trials: int
    ndcg: float
    ndcg_stderr: float
    acc1: float
    acc1_stderr: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class SyntheticResult:
    config: SyntheticConfig
    b: int
    ndcg: dict[str, np.ndarray] = field(default_factory=dict)
    acc1: dict[str, np.ndarray] = field(default_factory=dict)

    def rows(self) -> list[SummaryRow]:
        out = []
        for m in self.config.methods:
            n, a = self.ndcg[m], self.acc1[m]
            out.append(SummaryRow(self.config.design, m, self.config.v, self.config.k, self.b,
                                  n.size, float(n.mean()), _stderr(n), float(a.mean()), _stderr(a)))
        return out

    def best(self) -> SummaryRow:
        return max(self.rows(), key=lambda row: row.ndcg)


def _stderr(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def relevance_for_trial(v: int, rng: np.random.Generator) -> np.ndarray:
    """Item ``i`` gets relevance ``2^(p_i + 1)`` for a random permutation ``p``."""
    return 2.0 ** (rng.permutation(v) + 1)


def run_trial(cfg: SyntheticConfig, trial: int) -> dict[str, tuple[float, int]]:
    trial_seed = cfg.seed + trial
    rng = np.random.default_rng(trial_seed)
    relevance = relevance_for_trial(cfg.v, rng)
    design = make_design(cfg.design, cfg.v, cfg.k, cfg.b, seed=int(rng.integers(2**31)),
                         attempts=1, require_connected=False)
    rankings = [BlockRanking(j, tuple(oracle_rank(block, relevance))) for j, block in enumerate(design.blocks)]
    graph = extract_comparisons(rankings, cfg.v)
    tiebreak = Ranking.identity(cfg.v)
    out = {}
    for method in cfg.methods:
        ranking = aggregate(graph, AggregatorConfig(method=method, seed=trial_seed), tiebreak)
        out[method] = (ndcg_of_ranking(ranking, relevance, cfg.cutoff), accuracy_at_1(ranking, relevance))
    return out


def _run_chunk(args: tuple[SyntheticConfig, Sequence[int]]) -> list[dict[str, tuple[float, int]]]:
    cfg, trials = args
    return [run_trial(cfg, t) for t in trials]


def _design_b(cfg: SyntheticConfig) -> int:
    return build_design(cfg.design, cfg.v, cfg.k, cfg.b, seed=0).b


def run_synthetic(cfg: SyntheticConfig) -> SyntheticResult:
    """Mean nDCG@cutoff and Accuracy@1 per aggregation method over ``cfg.trials`` oracle trials."""
    b = _design_b(cfg)
    trials = list(range(cfg.trials))
    if cfg.workers > 1:
        chunks = [trials[i::cfg.workers] for i in range(cfg.workers)]
        with ProcessPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(_run_chunk, [(cfg, c) for c in chunks]))
        by_trial = {t: res for c, part in zip(chunks, parts) for t, res in zip(c, part)}
        results = [by_trial[t] for t in trials]
    else:
        results = _run_chunk((cfg, trials))
    result = SyntheticResult(cfg, b)
    for m in cfg.methods:
        result.ndcg[m] = np.array([r[m][0] for r in results])
        result.acc1[m] = np.array([r[m][1] for r in results], dtype=float)
    return result


def run_coverage(family: str, v: int, k: int, b: int | None = None, trials: int = 1000,
                 seed: int = 0) -> CoverageStats:
    """Coverage statistics averaged over ``trials`` seeded designs and random ground-truth orders."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    acc = {name: 0.0 for name in CoverageStats.COLUMNS}
    for t in range(trials):
        rng = np.random.default_rng(seed + t)
        truth = Ranking(tuple(int(x) for x in rng.permutation(v)))
        design = build_design(family, v, k, b, seed=int(rng.integers(2**31)))
        stats = coverage_stats(design, truth).as_dict()
        for name in acc:
            acc[name] += stats[name]
    return CoverageStats(**{name: total / trials for name, total in acc.items()})


def sweep(v: int, designs: Iterable[str], ks: Iterable[int], bs: Iterable[int | None],
          methods: Sequence[str], trials: int, seed: int = 0, cutoff: int = 10,
          workers: int = 1) -> list[SummaryRow]:
    """Cross product of design families, block sizes and block counts; infeasible points are skipped."""
    rows: list[SummaryRow] = []
    for design, k, b in itertools.product(designs, ks, bs):
        try:
            cfg = SyntheticConfig(v, design, k, b, tuple(methods), trials, seed, cutoff, workers)
            rows.extend(run_synthetic(cfg).rows())
        except DesignError:
            continue
    return rows


def write_rows_csv(rows: Iterable[SummaryRow], path: str | Path | None = None, fh=None) -> None:
    out = fh or (open(path, "w", newline="") if path else sys.stdout)
    try:
        writer = csv.writer(out)
        writer.writerow(SummaryRow.columns())
        for row in rows:
            writer.writerow([f"{x:.6f}" if isinstance(x, float) else x for x in
                             (getattr(row, c) for c in SummaryRow.columns())])
    finally:
        if path and fh is None:
            out.close()
