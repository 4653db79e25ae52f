"""Fleet configuration loading, tool enumeration, server summarization,
and the persisted immutable tool catalog.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import protocol, prompts
from .backends import ChatBackend, EmbeddingBackend
from .errors import (
    ConfigError,
    EmptyCatalog,
    HandshakeTimeout,
    SpawnError,
    ToolgateError,
    VersionMismatch,
)

logger = logging.getLogger(__name__)

CATALOG_FORMAT_VERSION = 1
DEFAULT_BUILD_PARALLELISM = 8

CATEGORIES = (
    "Discovery",
    "Visualization",
    "File Access",
    "Code",
    "Entertainment",
    "Finance",
    "Location",
    "Miscellaneous",
)


@dataclass(frozen=True)
class ServerConfig:
    server_name: str
    command: str
    args: tuple[str, ...] = ()
    env: dict = field(default_factory=dict)
    category: str | None = None
    description: str = ""


@dataclass(frozen=True)
class ToolRecord:
    server_name: str
    tool_name: str
    description: str
    input_schema: dict
    embedding: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ServerSummary:
    server_name: str
    summary_text: str
    prompt_version: int = prompts.PROMPT_VERSION
    embedding: tuple[float, ...] | None = None


@dataclass(frozen=True)
class Catalog:
    """Immutable snapshot of the indexed fleet.

    ``skipped`` records servers that failed to launch, with reasons.
    """

    tools: tuple[ToolRecord, ...]
    summaries: dict[str, ServerSummary]
    skipped: tuple[tuple[str, str], ...] = ()
    embedding_backend_id: str | None = None
    embedding_dim: int | None = None

    def tool(self, server_name: str, tool_name: str) -> ToolRecord | None:
        for rec in self.tools:
            if rec.server_name == server_name and rec.tool_name == tool_name:
                return rec
        return None

    @property
    def server_names(self) -> list[str]:
        return sorted(self.summaries)


def load_fleet(path) -> list[ServerConfig]:
    """Load and validate a fleet config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"fleet config not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    servers = doc.get("servers")
    if not isinstance(servers, list):
        raise ConfigError(f"{path}: missing 'servers' list")
    configs: list[ServerConfig] = []
    seen: set[str] = set()
    for i, entry in enumerate(servers):
        name = entry.get("server_name")
        if not name:
            raise ConfigError(f"{path}: servers[{i}]: missing server_name")
        if name in seen:
            raise ConfigError(f"{path}: duplicate server_name {name!r}")
        seen.add(name)
        command = entry.get("command")
        if not command:
            raise ConfigError(f"{path}: servers[{i}] ({name}): missing command")
        category = entry.get("category")
        if category is not None and category not in CATEGORIES:
            raise ConfigError(
                f"{path}: servers[{i}] ({name}): unknown category {category!r}")
        configs.append(ServerConfig(
            server_name=name,
            command=command,
            args=tuple(entry.get("args", [])),
            env=dict(entry.get("env", {})),
            category=category,
            description=entry.get("description", ""),
        ))
    return configs


def summarize_server(config: ServerConfig,
                     tools: Sequence[protocol.ToolDescriptor],
                     chat: ChatBackend) -> ServerSummary:
    tool_descriptions = "\n".join(f"- {t.name}: {t.description}" for t in tools)
    prompt = prompts.SERVER_SUMMARY_PROMPT.format(
        server_name=config.server_name,
        server_desc=config.description or "(none)",
        tool_descriptions=tool_descriptions,
    )
    turn = chat.complete([{"role": "user", "content": prompt}])
    text = (turn.text or "").strip()
    if not text:
        text = tool_descriptions or config.server_name
    return ServerSummary(server_name=config.server_name, summary_text=text)


def _index_one(config: ServerConfig, chat: ChatBackend,
               handshake_timeout: float, call_timeout: float):
    handle = protocol.launch_server(config, handshake_timeout=handshake_timeout,
                                    call_timeout=call_timeout)
    try:
        tools = protocol.list_tools(handle)
        records = [ToolRecord(config.server_name, t.name, t.description, t.input_schema)
                   for t in tools]
        summary = summarize_server(config, tools, chat)
        return records, summary
    finally:
        handle.stop()


def build_catalog(fleet: Sequence[ServerConfig], chat: ChatBackend,
                  parallelism: int = DEFAULT_BUILD_PARALLELISM,
                  handshake_timeout: float = protocol.DEFAULT_HANDSHAKE_TIMEOUT,
                  call_timeout: float = protocol.DEFAULT_CALL_TIMEOUT) -> Catalog:
    """Connect to every server in the fleet, enumerate tools, and summarize.

    Servers that fail to launch are recorded as skipped; the catalog covers
    the healthy subset. Raises EmptyCatalog if no server becomes ready.
    """
    tools: list[ToolRecord] = []
    summaries: dict[str, ServerSummary] = {}
    skipped: list[tuple[str, str]] = []
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        futures = {pool.submit(_index_one, c, chat, handshake_timeout, call_timeout): c
                   for c in fleet}
        for fut, config in futures.items():
            try:
                records, summary = fut.result()
            except (SpawnError, HandshakeTimeout, ToolgateError) as exc:
                logger.warning("skipping %s: %s", config.server_name, exc)
                skipped.append((config.server_name, str(exc)))
                continue
            tools.extend(records)
            summaries[config.server_name] = summary

    if not summaries:
        raise EmptyCatalog("no server in the fleet became ready")
    tools.sort(key=lambda r: (r.server_name, r.tool_name))
    return Catalog(tools=tuple(tools), summaries=summaries, skipped=tuple(skipped))


def attach_embeddings(catalog: Catalog, embedder: EmbeddingBackend) -> Catalog:
    """Return a new catalog with unit-norm vectors for every summary and
    tool description, plus the backend's identity and dimension.
    """
    summary_names = sorted(catalog.summaries)
    summary_vecs = embedder.embed(
        [catalog.summaries[n].summary_text for n in summary_names])
    tool_vecs = embedder.embed([t.description for t in catalog.tools])
    summaries = {
        name: ServerSummary(
            server_name=s.server_name,
            summary_text=s.summary_text,
            prompt_version=s.prompt_version,
            embedding=tuple(vec),
        )
        for name, vec, s in (
            (n, v, catalog.summaries[n]) for n, v in zip(summary_names, summary_vecs))
    }
    tools = tuple(
        ToolRecord(t.server_name, t.tool_name, t.description, t.input_schema,
                   embedding=tuple(vec))
        for t, vec in zip(catalog.tools, tool_vecs)
    )
    return Catalog(tools=tools, summaries=summaries, skipped=catalog.skipped,
                   embedding_backend_id=embedder.backend_id, embedding_dim=embedder.dim)


def persist_catalog(catalog: Catalog, path) -> Path:
    path = Path(path)
    doc = {
        "format_version": CATALOG_FORMAT_VERSION,
        "embedding_backend_id": catalog.embedding_backend_id,
        "embedding_dim": catalog.embedding_dim,
        "skipped": [list(s) for s in catalog.skipped],
        "summaries": [
            {
                "server_name": s.server_name,
                "summary_text": s.summary_text,
                "prompt_version": s.prompt_version,
                "embedding": list(s.embedding) if s.embedding else None,
            }
            for s in (catalog.summaries[n] for n in sorted(catalog.summaries))
        ],
        "tools": [
            {
                "server_name": t.server_name,
                "tool_name": t.tool_name,
                "description": t.description,
                "input_schema": t.input_schema,
                "embedding": list(t.embedding) if t.embedding else None,
            }
            for t in catalog.tools
        ],
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")
    tmp.replace(path)
    return path


def load_catalog(path) -> Catalog:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load catalog {path}: {exc}") from exc
    version = doc.get("format_version")
    if version != CATALOG_FORMAT_VERSION:
        raise VersionMismatch(
            f"{path}: catalog format {version!r}, supported {CATALOG_FORMAT_VERSION}")
    summaries = {
        s["server_name"]: ServerSummary(
            server_name=s["server_name"],
            summary_text=s["summary_text"],
            prompt_version=s.get("prompt_version", 0),
            embedding=tuple(s["embedding"]) if s.get("embedding") else None,
        )
        for s in doc.get("summaries", [])
    }
    tools = tuple(
        ToolRecord(
            server_name=t["server_name"],
            tool_name=t["tool_name"],
            description=t["description"],
            input_schema=t.get("input_schema", {}),
            embedding=tuple(t["embedding"]) if t.get("embedding") else None,
        )
        for t in doc.get("tools", [])
    )
    return Catalog(
        tools=tools,
        summaries=summaries,
        skipped=tuple((s[0], s[1]) for s in doc.get("skipped", [])),
        embedding_backend_id=doc.get("embedding_backend_id"),
        embedding_dim=doc.get("embedding_dim"),
    )
