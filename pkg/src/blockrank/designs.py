"""Block-design constructors and coverage diagnostics.

Five families are provided: random, sliding window, randomized equi-replicate (EBD),
Latin-square PBIBD and triangular PBIBD. All constructors are pure; randomized ones
take an explicit seed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from itertools import combinations

import numpy as np

from blockrank.model import BlockDesign, DesignError, Ranking

FAMILIES = ("random", "window", "ebd", "latin", "triangular")


def _check_vk(v: int, k: int) -> None:
    if k < 2:
        raise DesignError(f"block size k={k} must be at least 2")
    if k > v:
        raise DesignError(f"block size k={k} exceeds item count v={v}")


def build_random(v: int, k: int, b: int, seed: int | None = None) -> BlockDesign:
    """Each block is an independent uniform k-subset of ``range(v)`` in random order."""
    _check_vk(v, k)
    if b < 1:
        raise DesignError(f"block count b={b} must be positive")
    rng = np.random.default_rng(seed)
    blocks = [tuple(int(x) for x in rng.choice(v, size=k, replace=False)) for _ in range(b)]
    return BlockDesign(v=v, k=k, blocks=tuple(blocks), family="random")


def build_sliding_window(v: int, k: int, b: int, cyclic: bool = True) -> BlockDesign:
    """Overlapping windows of ``k`` consecutive indices advanced by ``round(v / b)``.

    With ``cyclic=True`` windows wrap modulo ``v`` so the last block links back to the
    first. ``cyclic=False`` gives the naive chain, where windows are clipped at ``v``.
    """
    _check_vk(v, k)
    if b < math.ceil(v / k):
        raise DesignError(f"b={b} windows of size {k} cannot cover {v} items")
    step = max(1, int(v / b + 0.5))
    if step >= k and b > 1:
        raise DesignError(f"window step {step} >= k={k}: consecutive windows would not overlap")
    if cyclic:
        blocks = [tuple((j * step + t) % v for t in range(k)) for j in range(b)]
    else:
        blocks = [tuple(range(j * step, min(j * step + k, v))) for j in range(b)]
        blocks = [blk for blk in blocks if blk]
    design = BlockDesign(v=v, k=k, blocks=tuple(blocks), family="window")
    if 0 in design.replication:
        raise DesignError(f"b={b} windows with step {step} leave items uncovered")
    return design


def build_equireplicate(v: int, k: int, b: int, seed: int | None = None) -> BlockDesign:
    """Randomized equi-replicate design: concatenated shuffles cut into blocks of ``k``.

    ``r = ceil(b*k / v)`` shuffles are generated and only the first ``b`` blocks kept, so
    replication is constant exactly when ``v*r == b*k``. A block that straddles two shuffles
    never repeats an item: duplicates are swapped with a later element of the new shuffle
    (always possible since ``k <= v``).
    """
    _check_vk(v, k)
    if b < 1:
        raise DesignError(f"block count b={b} must be positive")
    rng = np.random.default_rng(seed)
    r = math.ceil(b * k / v)
    stream: list[int] = []
    for _ in range(r):
        perm = [int(x) for x in rng.permutation(v)]
        tail = set(stream[len(stream) - len(stream) % k:])
        need = (k - len(tail)) % k
        for pos in range(need):
            if perm[pos] not in tail:
                continue
            later = [q for q in range(need, v) if perm[q] not in tail]
            q = later[int(rng.integers(len(later)))]
            perm[pos], perm[q] = perm[q], perm[pos]
        stream.extend(perm)
    blocks = [tuple(stream[j * k:(j + 1) * k]) for j in range(b)]
    return BlockDesign(v=v, k=k, blocks=tuple(blocks), family="ebd")


def build_latin_square(k: int) -> BlockDesign:
    """Items laid out in a ``k x k`` grid; rows are blocks ``0..k-1``, columns ``k..2k-1``."""
    if k < 2:
        raise DesignError(f"grid side k={k} must be at least 2")
    rows = [tuple(i * k + j for j in range(k)) for i in range(k)]
    cols = [tuple(i * k + j for i in range(k)) for j in range(k)]
    return BlockDesign(v=k * k, k=k, blocks=tuple(rows + cols), family="latin")


def triangular_items(n: int) -> list[tuple[int, int]]:
    """Item ``t`` of the triangular design is the ``t``-th pair of ``combinations(range(n), 2)``."""
    return list(combinations(range(n), 2))


def build_triangular(n: int) -> BlockDesign:
    """Triangular association-scheme design on the ``n(n-1)/2`` pairs of an ``n``-set.

    Block ``i`` holds every pair containing ``i``; any two blocks share exactly one item.
    """
    if n < 3:
        raise DesignError(f"triangular design needs n >= 3, got {n}")
    pairs = triangular_items(n)
    blocks = [tuple(t for t, pair in enumerate(pairs) if i in pair) for i in range(n)]
    return BlockDesign(v=len(pairs), k=n - 1, blocks=tuple(blocks), family="triangular")


def triangular_n_for(v: int) -> int:
    n = int((1 + math.isqrt(1 + 8 * v)) // 2)
    if n * (n - 1) // 2 != v:
        raise DesignError(f"v={v} is not a triangular number n(n-1)/2")
    return n


def build_design(family: str, v: int, k: int, b: int | None = None, seed: int | None = None,
                 cyclic: bool = True) -> BlockDesign:
    """Dispatch on design family name. ``latin`` and ``triangular`` derive ``b`` themselves."""
    if family == "latin":
        if v != k * k:
            raise DesignError(f"latin-square design needs v = k^2, got v={v}, k={k}")
        design = build_latin_square(k)
    elif family == "triangular":
        n = triangular_n_for(v)
        if k != n - 1:
            raise DesignError(f"triangular design on v={v} has k={n - 1}, got k={k}")
        design = build_triangular(n)
    else:
        if b is None:
            raise DesignError(f"family {family!r} needs an explicit block count")
        if family == "random":
            design = build_random(v, k, b, seed)
        elif family == "window":
            design = build_sliding_window(v, k, b, cyclic=cyclic)
        elif family == "ebd":
            design = build_equireplicate(v, k, b, seed)
        else:
            raise DesignError(f"unknown design family {family!r}; choose from {FAMILIES}")
    if b is not None and design.b != b:
        raise DesignError(f"{family} design with v={v}, k={k} has b={design.b}, not {b}")
    return design


def is_connected(design: BlockDesign) -> bool:
    """True iff the item/block incidence graph is one component spanning all items."""
    parent = list(range(design.v))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for block in design.blocks:
        if not block:
            continue
        root = find(block[0])
        for x in block[1:]:
            parent[find(x)] = root
    return len({find(x) for x in range(design.v)}) == 1


def cooccurrence(design: BlockDesign) -> np.ndarray:
    """``v x v`` matrix of pair co-occurrence counts, zero on the diagonal."""
    inc = design.incidence().astype(np.int64)
    co = inc.T @ inc
    np.fill_diagonal(co, 0)
    return co


@dataclass(frozen=True)
class CoverageStats:
    direct_coverage: float
    second_order_coverage: float | None
    avg_degree: float
    min_degree: float
    max_degree: float
    cooccurrence_mean: float
    cooccurrence_max: float
    connected: float

    COLUMNS = ("direct_coverage", "second_order_coverage", "avg_degree", "min_degree",
               "max_degree", "cooccurrence_mean", "cooccurrence_max", "connected")

    def as_dict(self) -> dict[str, float | None]:
        return asdict(self)


def second_order_coverage(adjacent: np.ndarray, truth: Ranking) -> float:
    """Fraction of pairs compared directly or through an intermediary ranked between them."""
    v = adjacent.shape[0]
    order = np.asarray(truth.order)
    a = adjacent[np.ix_(order, order)].astype(bool)
    reach = np.triu(a, 1)
    for c in range(1, v - 1):
        reach[:c, c + 1:] |= np.outer(a[:c, c], a[c, c + 1:])
    return float(np.triu(reach, 1).sum()) / (v * (v - 1) / 2)


def coverage_stats(design: BlockDesign, truth: Ranking | None = None) -> CoverageStats:
    """Coverage diagnostics of ``design``.

    The second-order rate needs a ground-truth order ``truth`` (an intermediary must sit
    between the two items in true relevance); without it the field is None.
    """
    v = design.v
    co = cooccurrence(design)
    adjacent = co > 0
    pairs = v * (v - 1) / 2
    upper = np.triu_indices(v, 1)
    degree = adjacent.sum(axis=1)
    return CoverageStats(
        direct_coverage=float(adjacent[upper].sum()) / pairs,
        second_order_coverage=None if truth is None else second_order_coverage(adjacent, truth),
        avg_degree=float(degree.mean()),
        min_degree=float(degree.min()),
        max_degree=float(degree.max()),
        cooccurrence_mean=float(co[upper].sum()) / pairs,
        cooccurrence_max=float(co.max()),
        connected=float(is_connected(design)),
    )
