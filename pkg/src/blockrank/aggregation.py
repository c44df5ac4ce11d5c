"""Pairwise-comparison extraction and tournament rank aggregation."""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from blockrank.model import BlockRanking, Ranking, TournamentGraph

log = logging.getLogger(__name__)

METHODS = ("pagerank", "winrate", "elo", "rank_centrality", "bradley_terry", "eigen")


@dataclass(frozen=True)
class AggregatorConfig:
    method: str = "pagerank"
    damping: float = 0.85
    tolerance: float = 1e-9
    max_iterations: int = 1000
    elo_k: float = 32.0
    elo_initial: float = 1500.0
    regularization: float = 1e-6
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown aggregation method {self.method!r}; choose from {METHODS}")
        if not 0 < self.damping < 1:
            raise ValueError(f"damping must lie in (0, 1), got {self.damping}")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


def extract_comparisons(block_rankings: Iterable[BlockRanking], v: int) -> TournamentGraph:
    """Every ordered pair within a best-first block ranking counts as one win for the earlier item."""
    wins = np.zeros((v, v))
    for br in block_rankings:
        order = np.asarray(br.order, dtype=np.int64)
        if order.size and (order.min() < 0 or order.max() >= v):
            raise IndexError(f"block {br.block_index} references an item outside range({v})")
        hi, lo = np.triu_indices(order.size, 1)
        np.add.at(wins, (order[hi], order[lo]), 1.0)
    return TournamentGraph(wins)


def _power_iterate(step: Callable[[np.ndarray], np.ndarray], x: np.ndarray, cfg: AggregatorConfig,
                   name: str) -> tuple[np.ndarray, bool]:
    for _ in range(cfg.max_iterations):
        nxt = step(x)
        if np.abs(nxt - x).sum() < cfg.tolerance:
            return nxt, True
        x = nxt
    log.warning("%s did not converge in %d iterations", name, cfg.max_iterations)
    return x, False


def pagerank_scores(wins: np.ndarray, cfg: AggregatorConfig) -> tuple[np.ndarray, bool]:
    """Damped random walk along loser -> winner edges; undefeated items teleport uniformly."""
    v = wins.shape[0]
    losses = wins.T.copy()
    out = losses.sum(axis=1)
    dangling = out == 0
    transition = np.divide(losses, out[:, None], out=np.zeros_like(losses), where=~dangling[:, None])
    transition[dangling] = 1.0 / v
    d = cfg.damping

    def step(x: np.ndarray) -> np.ndarray:
        return d * (x @ transition) + (1 - d) / v

    x, ok = _power_iterate(step, np.full(v, 1.0 / v), cfg, "pagerank")
    return x / x.sum(), ok


def winrate_scores(wins: np.ndarray) -> np.ndarray:
    won = wins.sum(axis=1)
    played = won + wins.sum(axis=0)
    return np.divide(won, played, out=np.full_like(won, 0.5), where=played > 0)


def elo_scores(wins: np.ndarray, cfg: AggregatorConfig, tiebreak: Ranking | None = None) -> np.ndarray:
    """One pass of the logistic Elo update over the comparison multiset in seeded random order.

    Comparisons are enumerated in ``tiebreak`` order before shuffling, so relabeling the items
    (and the tiebreak with them) relabels the result and nothing else.
    """
    order = np.asarray((tiebreak or Ranking.identity(wins.shape[0])).order)
    rows, cols = np.nonzero(wins[np.ix_(order, order)])
    rows, cols = order[rows], order[cols]
    counts = np.rint(wins[rows, cols]).astype(np.int64)
    winners = np.repeat(rows, counts)
    losers = np.repeat(cols, counts)
    perm = np.random.default_rng(cfg.seed).permutation(winners.size)
    rating = np.full(wins.shape[0], cfg.elo_initial)
    k = cfg.elo_k
    for w, l in zip(winners[perm].tolist(), losers[perm].tolist()):
        expected = 1.0 / (1.0 + 10.0 ** ((rating[l] - rating[w]) / 400.0))
        delta = k * (1.0 - expected)
        rating[w] += delta
        rating[l] -= delta
    return rating


def rank_centrality_scores(wins: np.ndarray, cfg: AggregatorConfig) -> tuple[np.ndarray, bool]:
    """Stationary distribution of a walk that moves from each item towards the items that beat it.

    ``p(i -> j) = frac(j beat i) / d_max``; a uniform teleport of weight ``regularization``
    keeps the chain ergodic.
    """
    v = wins.shape[0]
    games = wins + wins.T
    frac = np.divide(wins.T, games, out=np.zeros_like(wins), where=games > 0)
    d_max = max(int((games > 0).sum(axis=1).max()), 1)
    transition = frac / d_max
    transition[np.diag_indices(v)] = 1.0 - transition.sum(axis=1)
    eps = cfg.regularization
    transition = (1 - eps) * transition + eps / v

    x, ok = _power_iterate(lambda x: x @ transition, np.full(v, 1.0 / v), cfg, "rank_centrality")
    return x / x.sum(), ok


def strongly_connected(wins: np.ndarray) -> bool:
    """True iff every item reaches every other along observed win edges."""
    n, _ = connected_components(wins > 0, directed=True, connection="strong")
    return n == 1


def bradley_terry_scores(wins: np.ndarray, cfg: AggregatorConfig) -> tuple[np.ndarray, bool]:
    """Minorize-maximize updates of Bradley-Terry strengths, renormalized to sum one.

    The maximum-likelihood estimate exists only when the observed comparisons form a
    strongly connected digraph. Otherwise (e.g. any acyclic tournament) no estimate is
    returned: scores are uniform and the caller's tiebreak decides the order.
    """
    v = wins.shape[0]
    if not strongly_connected(wins):
        return np.full(v, 1.0 / v), False
    games = wins + wins.T
    won = wins.sum(axis=1) + cfg.regularization

    def step(p: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = (games / (p[:, None] + p[None, :])).sum(axis=1)
            nxt = np.nan_to_num(won / denom, nan=0.0, posinf=0.0)
        total = nxt.sum()
        return nxt / total if total > 0 else np.full(v, 1.0 / v)

    return _power_iterate(step, np.full(v, 1.0 / v), cfg, "bradley_terry")


def eigen_scores(wins: np.ndarray, cfg: AggregatorConfig) -> tuple[np.ndarray, bool]:
    """Principal eigenvector of the win matrix (plus ``regularization`` everywhere), by power iteration.

    As with Bradley-Terry, the observed win matrix must be irreducible for the Perron vector
    to carry information; ``regularization`` only stabilizes the arithmetic.
    """
    v = wins.shape[0]
    if not strongly_connected(wins):
        return np.full(v, 1.0 / v), False
    matrix = wins + cfg.regularization

    def step(x: np.ndarray) -> np.ndarray:
        nxt = matrix @ x
        return nxt / nxt.sum()

    return _power_iterate(step, np.full(v, 1.0 / v), cfg, "eigen")


def rank_by_scores(scores: np.ndarray, tiebreak: Ranking) -> tuple[int, ...]:
    """Items by descending score; exact ties keep their order in ``tiebreak``."""
    pos = np.asarray(tiebreak.positions())
    return tuple(int(i) for i in np.lexsort((pos, -scores)))


def aggregate(graph: TournamentGraph, cfg: AggregatorConfig | None = None,
              tiebreak: Ranking | None = None) -> Ranking:
    """Global ranking from a tournament graph by the method named in ``cfg``.

    An all-zero graph returns ``tiebreak`` unchanged. Non-convergence of an iterative
    method returns the last iterate with a warning attached to the result.
    """
    cfg = cfg or AggregatorConfig()
    v = graph.v
    tiebreak = tiebreak or Ranking.identity(v)
    if len(tiebreak) != v:
        raise ValueError(f"tiebreak ranks {len(tiebreak)} items, graph has {v}")
    wins = np.asarray(graph.wins, dtype=float)
    if not wins.any():
        return Ranking(tiebreak.order, tuple([0.0] * v))

    converged = True
    if cfg.method == "pagerank":
        scores, converged = pagerank_scores(wins, cfg)
    elif cfg.method == "winrate":
        scores = winrate_scores(wins)
    elif cfg.method == "elo":
        scores = elo_scores(wins, cfg, tiebreak)
    elif cfg.method == "rank_centrality":
        scores, converged = rank_centrality_scores(wins, cfg)
    elif cfg.method == "bradley_terry":
        scores, converged = bradley_terry_scores(wins, cfg)
    else:
        scores, converged = eigen_scores(wins, cfg)

    if converged:
        warnings: tuple[str, ...] = ()
    elif cfg.method in ("bradley_terry", "eigen") and not strongly_connected(wins):
        warnings = (f"{cfg.method}: comparison graph is not strongly connected; no estimate exists",)
    else:
        warnings = (f"{cfg.method} did not converge in {cfg.max_iterations} iterations",)
    scores = np.nan_to_num(scores, nan=0.0, posinf=0.0, neginf=0.0)
    return Ranking(rank_by_scores(scores, tiebreak), tuple(float(s) for s in scores), warnings)
