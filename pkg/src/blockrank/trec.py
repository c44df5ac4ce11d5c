"""TREC qrels / run-file reading and writing, candidate TSV ingestion, run evaluation."""

from __future__ import annotations

import csv
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

from blockrank.metrics import mean, ndcg_for_query
from blockrank.model import Candidate


class FormatError(ValueError):
    def __init__(self, path: str | Path, lineno: int, message: str) -> None:
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


QrelSet = dict[str, dict[str, int]]


@dataclass(frozen=True)
class RunEntry:
    docid: str
    rank: int
    score: float
    tag: str = "blockrank"


def read_qrels(path: str | Path) -> QrelSet:
    """``qid iter docid grade`` lines into ``{qid: {docid: grade}}``."""
    qrels: QrelSet = defaultdict(dict)
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FormatError(path, lineno, f"expected 4 fields, got {len(parts)}")
            qid, _, docid, grade = parts
            try:
                g = int(grade)
            except ValueError:
                raise FormatError(path, lineno, f"relevance grade {grade!r} is not an integer") from None
            if g < 0:
                g = 0
            qrels[qid][docid] = g
    return dict(qrels)


def strictly_descending(scores: Sequence[float], eps: float = 1e-9) -> list[float]:
    out: list[float] = []
    for s in scores:
        out.append(s if not out or s < out[-1] else out[-1] - eps)
    return out


def write_run(path: str | Path, query_id: str, docids: Sequence[str],
              scores: Sequence[float] | None = None, tag: str = "blockrank", append: bool = False) -> None:
    """Write ``qid Q0 docid rank score tag`` lines, ranks from 1, scores strictly descending."""
    if scores is None:
        scores = [float(len(docids) - i) for i in range(len(docids))]
    if len(scores) != len(docids):
        raise ValueError("scores and docids differ in length")
    scores = strictly_descending([float(s) for s in scores])
    with open(path, "a" if append else "w") as fh:
        for rank, (docid, score) in enumerate(zip(docids, scores), start=1):
            fh.write(f"{query_id} Q0 {docid} {rank} {score!r} {tag}\n")


def read_run(path: str | Path) -> dict[str, list[RunEntry]]:
    run: dict[str, list[RunEntry]] = defaultdict(list)
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise FormatError(path, lineno, f"expected 6 fields, got {len(parts)}")
            qid, _, docid, rank, score, tag = parts
            try:
                run[qid].append(RunEntry(docid, int(rank), float(score), tag))
            except ValueError as exc:
                raise FormatError(path, lineno, str(exc)) from None
    return {qid: sorted(entries, key=lambda e: e.rank) for qid, entries in run.items()}


def evaluate_run(run: dict[str, list[RunEntry]], qrels: QrelSet, cutoff: int = 10) -> dict[str, float]:
    """Per-query nDCG@cutoff for queries present in both run and qrels, plus ``"all"`` (the mean)."""
    per_query = {
        qid: ndcg_for_query([e.docid for e in entries], qrels[qid], cutoff)
        for qid, entries in run.items() if qid in qrels
    }
    per_query["all"] = mean(list(per_query.values()))
    return per_query


def read_candidates(path: str | Path) -> list[Candidate]:
    """``external_id <TAB> text`` rows in first-stage order."""
    out: list[Candidate] = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE), start=1):
            if not row or not row[0].strip():
                continue
            if len(row) < 2:
                raise FormatError(path, lineno, "expected external_id<TAB>text")
            out.append(Candidate(row[0], "\t".join(row[1:]), len(out)))
    return out
