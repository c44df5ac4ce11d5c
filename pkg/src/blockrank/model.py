"""Shared domain types: candidates, block designs, block rankings, tournament graphs, rankings."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DesignError(ValueError):
    """Raised when block-design parameters are outside the constructible domain."""


@dataclass(frozen=True)
class Candidate:
    external_id: str
    text: str
    initial_rank: int


@dataclass(frozen=True)
class BlockDesign:
    """A family of blocks over the item universe ``range(v)``.

    ``k`` is the nominal block size; ``replication[i]`` counts the blocks holding item ``i``.
    """

    v: int
    k: int
    blocks: tuple[tuple[int, ...], ...]
    family: str = "custom"

    @classmethod
    def from_blocks(cls, v: int, blocks: Iterable[Sequence[int]], family: str = "custom") -> BlockDesign:
        blocks = tuple(tuple(int(x) for x in block) for block in blocks)
        k = max((len(block) for block in blocks), default=0)
        return cls(v=v, k=k, blocks=blocks, family=family)

    @property
    def b(self) -> int:
        return len(self.blocks)

    @property
    def replication(self) -> tuple[int, ...]:
        counts = Counter(x for block in self.blocks for x in block)
        return tuple(counts.get(i, 0) for i in range(self.v))

    @property
    def r(self) -> int | None:
        """Constant replication, or None when items occur an unequal number of times."""
        reps = set(self.replication)
        return reps.pop() if len(reps) == 1 else None

    @property
    def total_slots(self) -> int:
        return sum(len(block) for block in self.blocks)

    def incidence(self) -> np.ndarray:
        """Boolean ``b x v`` block/item incidence matrix."""
        inc = np.zeros((self.b, self.v), dtype=bool)
        for j, block in enumerate(self.blocks):
            inc[j, list(block)] = True
        return inc

    def to_text(self) -> str:
        lines = [f"{self.v} {self.k} {self.b}"]
        lines += [" ".join(str(x) for x in block) for block in self.blocks]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, family: str = "custom") -> BlockDesign:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise DesignError("empty design file")
        try:
            v, k, b = (int(tok) for tok in lines[0].split())
            blocks = tuple(tuple(int(tok) for tok in ln.split()) for ln in lines[1:])
        except ValueError as exc:
            raise DesignError(f"malformed design file: {exc}") from exc
        if len(blocks) != b:
            raise DesignError(f"header declares {b} blocks but {len(blocks)} were found")
        return cls(v=v, k=k, blocks=blocks, family=family)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> BlockDesign:
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class Violation:
    block: int | None
    message: str

    def __str__(self) -> str:
        where = "design" if self.block is None else f"block {self.block}"
        return f"{where}: {self.message}"


def validate_design(design: BlockDesign) -> list[Violation]:
    """Return every structural violation found in ``design``; an empty list means valid."""
    report: list[Violation] = []
    if design.v < 1:
        report.append(Violation(None, f"item count v={design.v} must be positive"))
    for j, block in enumerate(design.blocks):
        if not block:
            report.append(Violation(j, "empty block"))
        if len(block) > design.k:
            report.append(Violation(j, f"block size {len(block)} exceeds k={design.k}"))
        out = [x for x in block if not 0 <= x < design.v]
        if out:
            report.append(Violation(j, f"item index out of range: {out}"))
        dupes = sorted(x for x, c in Counter(block).items() if c > 1)
        if dupes:
            report.append(Violation(j, f"duplicate item {dupes}"))
    missing = [i for i, c in enumerate(design.replication) if c == 0]
    if missing:
        report.append(Violation(None, f"{len(missing)} items never appear in a block"))
    return report


@dataclass(frozen=True)
class BlockRanking:
    block_index: int
    order: tuple[int, ...]


@dataclass(frozen=True)
class TournamentGraph:
    """``wins[i, j]`` counts the blocks in which item ``i`` was ranked above item ``j``."""

    wins: np.ndarray

    def __post_init__(self) -> None:
        self.wins.setflags(write=False)

    @property
    def v(self) -> int:
        return self.wins.shape[0]

    @property
    def total_weight(self) -> float:
        return float(self.wins.sum())

    def triplets(self) -> list[tuple[int, int, float]]:
        rows, cols = np.nonzero(self.wins)
        return [(int(i), int(j), float(self.wins[i, j])) for i, j in zip(rows, cols)]

    @classmethod
    def from_triplets(cls, v: int, triplets: Iterable[tuple[int, int, float]]) -> TournamentGraph:
        wins = np.zeros((v, v))
        for i, j, w in triplets:
            if i == j:
                raise ValueError(f"self-comparison on item {i}")
            wins[i, j] += w
        return cls(wins)


@dataclass(frozen=True)
class Ranking:
    """A permutation of ``range(v)``, most relevant first, with optional per-item scores."""

    order: tuple[int, ...]
    scores: tuple[float, ...] | None = None
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("ranking order is not a permutation of range(v)")
        if self.scores is not None:
            if len(self.scores) != len(self.order):
                raise ValueError("score vector length differs from ranking length")
            if not all(np.isfinite(self.scores)):
                raise ValueError("score vector has non-finite entries")

    @classmethod
    def identity(cls, v: int) -> Ranking:
        return cls(tuple(range(v)))

    def positions(self) -> tuple[int, ...]:
        """Inverse permutation: ``positions()[item]`` is the item's rank (0 = top)."""
        pos = [0] * len(self.order)
        for rank, item in enumerate(self.order):
            pos[item] = rank
        return tuple(pos)

    def __len__(self) -> int:
        return len(self.order)
