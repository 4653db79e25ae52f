"""The route engine: query parsing, cosine scoring, and top-k ranking by
a weighted blend of server-summary and tool-description similarity.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from .backends import EmbeddingBackend
from .catalog import Catalog
from .errors import DimensionMismatch, EmptyCatalog, QueryFormatError

DEFAULT_K = 5
DEFAULT_WEIGHTS = (0.5, 0.5)

_BLOCK_RE = re.compile(r"<tool_assistant>(.*?)</tool_assistant>", re.DOTALL)


@dataclass(frozen=True)
class RouteQuery:
    server_part: str
    tool_part: str
    raw: str


@dataclass(frozen=True)
class RankedCandidate:
    server_name: str
    tool_name: str
    score: float
    server_sim: float
    tool_sim: float


def parse_route_query(raw: str) -> RouteQuery:
    """Extract the server/tool halves from a <tool_assistant> block.

    Trailing '#' comments on each line are stripped. Raises QueryFormatError
    naming the missing element: "block", "server", or "tool".
    """
    match = _BLOCK_RE.search(raw)
    if match is None:
        raise QueryFormatError("block")
    server_part = tool_part = None
    for line in match.group(1).splitlines():
        line = line.split("#", 1)[0].strip()
        if line.lower().startswith("server:"):
            server_part = line.split(":", 1)[1].strip()
        elif line.lower().startswith("tool:"):
            tool_part = line.split(":", 1)[1].strip()
    if not server_part:
        raise QueryFormatError("server")
    if not tool_part:
        raise QueryFormatError("tool")
    return RouteQuery(server_part=server_part, tool_part=tool_part, raw=raw)


def cosine(a, b) -> float:
    """Cosine similarity; for unit-norm inputs this is the dot product."""
    if len(a) != len(b):
        raise DimensionMismatch(f"dim {len(a)} vs {len(b)}")
    return float(np.dot(np.asarray(a, dtype=float), np.asarray(b, dtype=float)))


def route(catalog: Catalog, query: RouteQuery, embedder: EmbeddingBackend,
          k: int = DEFAULT_K,
          weights: tuple[float, float] = DEFAULT_WEIGHTS) -> list[RankedCandidate]:
    """Top-k tools under score = w_s * cos(server_part, summary)
    + w_t * cos(tool_part, tool description).

    Deterministic tie-break: (server_name, tool_name) ascending. Ranking
    compares scores quantized to 9 decimals, so candidates whose scores are
    mathematically equal sort identically regardless of floating-point
    summation order. Returns fewer than k only when the catalog is smaller.
    """
    if not catalog.tools:
        raise EmptyCatalog("catalog has no tools")
    w_s, w_t = weights
    query_server, query_tool = embedder.embed([query.server_part, query.tool_part])

    tool_matrix = np.array([t.embedding for t in catalog.tools], dtype=float)
    summary_matrix = np.array(
        [catalog.summaries[t.server_name].embedding for t in catalog.tools], dtype=float)
    server_sims = summary_matrix @ np.asarray(query_server, dtype=float)
    tool_sims = tool_matrix @ np.asarray(query_tool, dtype=float)
    scores = w_s * server_sims + w_t * tool_sims

    order = sorted(
        range(len(catalog.tools)),
        key=lambda i: (-round(float(scores[i]), 9),
                       catalog.tools[i].server_name,
                       catalog.tools[i].tool_name),
    )
    return [
        RankedCandidate(
            server_name=catalog.tools[i].server_name,
            tool_name=catalog.tools[i].tool_name,
            score=float(scores[i]),
            server_sim=float(server_sims[i]),
            tool_sim=float(tool_sims[i]),
        )
        for i in order[:k]
    ]


def _escape_tags(text: str) -> str:
    # keep rendered observations re-parseable: neutralize embedded tag literals
    return (text.replace("<tool_assistant>", "&lt;tool_assistant&gt;")
                .replace("</tool_assistant>", "&lt;/tool_assistant&gt;"))


def render_route_result(candidates: list[RankedCandidate],
                        catalog: Catalog) -> str:
    """Render ranked candidates as the text observation the agent sees:
    one block per candidate with server, tool, description, and schema.
    """
    blocks = []
    for i, cand in enumerate(candidates, start=1):
        record = catalog.tool(cand.server_name, cand.tool_name)
        description = _escape_tags(record.description if record else "")
        schema = json.dumps(record.input_schema if record else {}, sort_keys=True)
        blocks.append(
            f"[{i}] server: {cand.server_name}\n"
            f"    tool: {cand.tool_name}\n"
            f"    description: {description}\n"
            f"    parameters: {schema}\n"
            f"    score: {cand.score:.4f}"
        )
    return "\n\n".join(blocks)
