"""Listwise ranker backed by a chat-completions HTTP endpoint.

Items are labelled ``[1]..[n]`` in the prompt and the model is asked for an ordering of the
form ``[3] > [1] > [2]``. Parsing never fails: unusable output is repaired into a complete
permutation and the repair is reported.
"""

from __future__ import annotations

import json
import os
import re
import time
from collections.abc import Sequence
from dataclasses import dataclass, field

import httpx

from blockrank.model import Candidate
from blockrank.rankers import UsageRecord

PROMPT_VERSION = "listwise-v1"

SYSTEM_PROMPT = "You are an assistant that ranks passages by their relevance to a search query."

_IDENT = re.compile(r"\[(\d+)\]")


@dataclass(frozen=True)
class LlmConfig:
    endpoint_url: str
    model_name: str
    api_key_env_var: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_output_tokens: int = 1024
    request_timeout: float = 60.0
    max_block_size: int = 100
    max_passage_chars: int = 1200

    def __post_init__(self) -> None:
        if not self.endpoint_url:
            raise ValueError("endpoint_url must be nonempty")
        if self.temperature < 0:
            raise ValueError("temperature must be nonnegative")


def build_prompt(query: str, items: Sequence[Candidate], max_block_size: int = 100,
                 max_passage_chars: int = 1200) -> list[dict[str, str]]:
    if not items:
        raise ValueError("cannot build a ranking prompt for an empty block")
    if len(items) > max_block_size:
        raise ValueError(f"block of {len(items)} items exceeds the cap of {max_block_size}")
    n = len(items)
    passages = "\n".join(
        f"[{i}] {' '.join(c.text.split())[:max_passage_chars]}" for i, c in enumerate(items, start=1)
    )
    user = (
        f"I will provide you with {n} passages, each indicated by a numerical identifier []. "
        f"Rank the passages based on their relevance to the search query: {query}\n\n"
        f"{passages}\n\n"
        f"Search Query: {query}\n"
        f"Rank all {n} passages above based on their relevance to the search query. "
        "List every identifier exactly once, in descending order of relevance, using the "
        "format [a] > [b] > ... Answer with the ranking only."
    )
    return [{"role": "system", "content": SYSTEM_PROMPT}, {"role": "user", "content": user}]


@dataclass
class ParseReport:
    found: int = 0
    duplicates: list[int] = field(default_factory=list)
    out_of_range: list[int] = field(default_factory=list)
    appended: list[int] = field(default_factory=list)

    @property
    def repaired(self) -> bool:
        return bool(self.duplicates or self.out_of_range or self.appended)

    @property
    def full_repair(self) -> bool:
        return self.found == 0


def parse_permutation(text: str, n: int) -> tuple[list[int], ParseReport]:
    """Read ``[i]`` identifiers (1-based) from model output into a 0-based permutation of ``range(n)``.

    Duplicates after the first occurrence and out-of-range identifiers are dropped; missing
    identifiers are appended in input order.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    report = ParseReport()
    seen: set[int] = set()
    order: list[int] = []
    for match in _IDENT.finditer(text or ""):
        ident = int(match.group(1))
        if not 1 <= ident <= n:
            report.out_of_range.append(ident)
            continue
        if ident - 1 in seen:
            report.duplicates.append(ident)
            continue
        seen.add(ident - 1)
        order.append(ident - 1)
    report.found = len(order)
    report.appended = [i for i in range(n) if i not in seen]
    return order + report.appended, report


def render_permutation(order: Sequence[int]) -> str:
    return " > ".join(f"[{i + 1}]" for i in order)


def _approx_tokens(text: str) -> int:
    # rough English average of four characters per token
    return max(1, len(text) // 4) if text else 0


def http_rank_block(cfg: LlmConfig, query: str, items: Sequence[Candidate],
                    client: httpx.Client | None = None) -> tuple[list[int], UsageRecord]:
    """One chat-completions call for ``items``; returns the parsed permutation and token usage.

    Transport, timeout and HTTP-status errors propagate. A malformed body is parsed as empty
    text, which yields the input order.
    """
    messages = build_prompt(query, items, cfg.max_block_size, cfg.max_passage_chars)
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(cfg.api_key_env_var)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    payload = {
        "model": cfg.model_name,
        "messages": messages,
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_output_tokens,
    }
    owns_client = client is None
    client = client or httpx.Client(timeout=cfg.request_timeout)
    start = time.perf_counter()
    try:
        response = client.post(cfg.endpoint_url, json=payload, headers=headers,
                               timeout=cfg.request_timeout)
        response.raise_for_status()
    finally:
        if owns_client:
            client.close()
    latency = time.perf_counter() - start

    try:
        body = response.json()
        content = body["choices"][0]["message"]["content"] or ""
    except (json.JSONDecodeError, KeyError, IndexError, TypeError):
        body, content = {}, ""
    order, _ = parse_permutation(content, len(items))

    usage = body.get("usage") if isinstance(body, dict) else None
    if isinstance(usage, dict) and "prompt_tokens" in usage:
        record = UsageRecord(int(usage["prompt_tokens"]), int(usage.get("completion_tokens", 0)), latency)
    else:
        prompt_text = "".join(m["content"] for m in messages)
        record = UsageRecord(_approx_tokens(prompt_text), _approx_tokens(content), latency)
    return order, record


class HttpRanker:
    """``ListwiseRanker`` over a chat-completions endpoint. One shared connection pool."""

    def __init__(self, cfg: LlmConfig, client: httpx.Client | None = None) -> None:
        self.cfg = cfg
        self.client = client or httpx.Client(timeout=cfg.request_timeout)

    def rank_block_with_usage(self, query: str, items: Sequence[Candidate]) -> tuple[list[int], UsageRecord]:
        return http_rank_block(self.cfg, query, items, self.client)

    def rank_block(self, query: str, items: Sequence[Candidate]) -> list[int]:
        return self.rank_block_with_usage(query, items)[0]

    def close(self) -> None:
        self.client.close()
