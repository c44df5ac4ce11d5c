import itertools
from pathlib import Path

import numpy as np

from blockrank.model import Candidate

FIXTURES = Path(__file__).parent / "fixtures"


def make_candidates(n: int, prefix: str = "d") -> list[Candidate]:
    return [Candidate(f"{prefix}{i}", f"passage number {i}", i) for i in range(n)]


def complete_design_blocks(v: int, k: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(v), k))


def relevance_from_order(order) -> np.ndarray:
    """Relevance vector whose descending sort is ``order``."""
    v = len(order)
    rel = np.empty(v)
    rel[list(order)] = np.arange(v, 0, -1, dtype=float)
    return rel


def parse_fuzz_corpus(size: int = 200, seed: int = 0) -> list[tuple[str, int]]:
    """Model-output strings of the kinds seen in practice, paired with the block size."""
    rng = np.random.default_rng(seed)
    fixed = [
        ("", 5), ("   ", 3), ("I cannot rank these passages.", 4), ("[]", 2), ("[0]", 1),
        ("[1] > [1] > [1]", 3), ("[7] > [8] > [9]", 3), ("[-1] > [2]", 2), ("[1]>[2]>[3]", 3),
        ("[3] [2] [1]", 3), ("1 > 2 > 3", 3), ("[1000000000000000000000] > [1]", 2),
        ("Ranking: [2] > [1].\nExplanation: [2] mentions the query.", 2), ("[2", 2), ("2]", 2),
        ("[01] > [002]", 2), ("【1】 > [2]", 2), ("[1] > [2] > [3]" * 20, 3),
    ]
    corpus = list(fixed)
    prose = ["Sure! ", "The ranking is: ", "Here you go:\n", "", "Answer: "]
    tails = ["", ".", " Hope this helps.", "\n\nReasoning: passage [1] is off topic."]
    while len(corpus) < size:
        n = int(rng.integers(1, 25))
        ids = list(rng.permutation(n) + 1)
        kind = len(corpus) % 4
        if kind == 0:    # drop some
            ids = ids[: int(rng.integers(0, n + 1))]
        elif kind == 1:  # duplicate some
            ids = ids + [int(x) for x in rng.choice(ids, size=int(rng.integers(1, 4)))]
        elif kind == 2:  # out of range
            ids = ids + [n + int(rng.integers(1, 50)), 0]
        rng.shuffle(ids)
        body = " > ".join(f"[{i}]" for i in ids)
        corpus.append((str(rng.choice(prose)) + body + str(rng.choice(tails)), n))
    return corpus[:size]
