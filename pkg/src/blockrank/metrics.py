"""Ranking quality metrics."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence

import numpy as np

from blockrank.model import Ranking


def dcg(gains: Sequence[float], cutoff: int) -> float:
    g = np.asarray(gains, dtype=float)[:cutoff]
    return float((g / np.log2(np.arange(2, g.size + 2))).sum())


def ndcg_at_k(ranked_gains: Sequence[float], ideal_gains: Sequence[float], cutoff: int = 10) -> float:
    """DCG of ``ranked_gains`` over DCG of ``ideal_gains`` sorted descending, both cut at ``cutoff``.

    Returns 0 when the ideal DCG is 0.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    ideal = dcg(np.sort(np.asarray(ideal_gains, dtype=float))[::-1], cutoff)
    return dcg(ranked_gains, cutoff) / ideal if ideal > 0 else 0.0


def ndcg_of_ranking(ranking: Ranking | Sequence[int], gains: Sequence[float], cutoff: int = 10) -> float:
    """nDCG of an item permutation, where ``gains[item]`` is the item's gain."""
    order = ranking.order if isinstance(ranking, Ranking) else ranking
    g = np.asarray(gains, dtype=float)
    return ndcg_at_k(g[list(order[:cutoff])], g, cutoff)


def accuracy_at_1(ranking: Ranking | Sequence[int], relevance: Sequence[float]) -> int:
    order = ranking.order if isinstance(ranking, Ranking) else ranking
    return int(order[0] == int(np.argmax(relevance)))


def trec_gain(grade: float) -> float:
    return 2.0 ** grade - 1.0


def ndcg_for_query(docids: Sequence[str], judgments: Mapping[str, int], cutoff: int = 10) -> float:
    """trec_eval-style nDCG: gain ``2^grade - 1``, ideal list from all judged documents."""
    ranked = [trec_gain(judgments.get(d, 0)) for d in docids[:cutoff]]
    ideal = [trec_gain(g) for g in judgments.values() if g > 0]
    return ndcg_at_k(ranked, ideal, cutoff)


def mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values) if values else float("nan")
