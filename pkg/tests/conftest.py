import sys

import pytest

from toolgate import catalog as catalog_mod
from toolgate import fixtures
from toolgate.agent import Step, Trajectory
from toolgate.backends import DeterministicChatBackend, HashEmbeddingBackend
from toolgate.catalog import Catalog, ServerConfig, ServerSummary, ToolRecord
from toolgate.copilot import ToolCallRecord


def mock_config(server_name: str, behavior_file: str, **kwargs) -> ServerConfig:
    """ServerConfig running the bundled mock server under this interpreter."""
    return ServerConfig(
        server_name=server_name,
        command=sys.executable,
        args=("-m", "toolgate.mockserver",
              str(fixtures.behavior_path(behavior_file))),
        **kwargs,
    )


@pytest.fixture(scope="session")
def mock_fleet() -> list[ServerConfig]:
    return [mock_config(name, behavior, category=category, description=desc)
            for name, behavior, category, desc in fixtures.MOCK_FLEET]


@pytest.fixture(scope="session")
def embedder() -> HashEmbeddingBackend:
    return HashEmbeddingBackend(dim=64, seed=0)


@pytest.fixture(scope="session")
def mock_catalog(mock_fleet, embedder) -> Catalog:
    """The 4-server / 9-tool catalog, built once, with embeddings attached."""
    built = catalog_mod.build_catalog(mock_fleet, DeterministicChatBackend(),
                                      handshake_timeout=10, call_timeout=10)
    return catalog_mod.attach_embeddings(built, embedder)


def make_vector_catalog(entries, summaries) -> Catalog:
    """Catalog built directly from (server, tool, description, vector) tuples
    and {server: (summary_text, vector)}; vectors are taken as given.
    """
    dim = len(next(iter(summaries.values()))[1])
    return Catalog(
        tools=tuple(
            ToolRecord(server_name=s, tool_name=t, description=d,
                       input_schema={"type": "object", "properties": {}},
                       embedding=tuple(v))
            for s, t, d, v in entries
        ),
        summaries={
            name: ServerSummary(server_name=name, summary_text=text,
                                embedding=tuple(vec))
            for name, (text, vec) in summaries.items()
        },
        embedding_backend_id="test-vectors",
        embedding_dim=dim,
    )


def synth_trajectory(steps: int, tools: int, executes: int, routes: int,
                     task_id: str = "synthetic",
                     model_id: str = "synthetic-model") -> Trajectory:
    """Build a trajectory whose trajectory_stats equals the given quadruple.

    Requires tools <= executes and steps >= routes + executes + 1 when
    steps > 0 (last step is the response).
    """
    assert tools <= executes
    records = []
    for i in range(routes):
        records.append(ToolCallRecord(
            seq=len(records) + 1, action="route",
            request={"query": f"q{i}"}, observation="obs", outcome="ok"))
    for i in range(executes):
        tool_name = f"tool{i if i < tools else 0}"
        outcome = "ok" if tools > 0 else "tool_error"
        records.append(ToolCallRecord(
            seq=len(records) + 1, action="execute",
            request={"server_name": "srv", "tool_name": tool_name, "params": {}},
            observation="obs", outcome=outcome))
    step_list = []
    for rec in records:
        step_list.append(Step(index=len(step_list), action=rec.action,
                              action_payload=rec.request, observation=rec.observation))
    while len(step_list) < steps - 1:
        step_list.append(Step(index=len(step_list), action="route",
                              action_payload={"query": "padding"}, observation="obs"))
    if steps > 0:
        step_list.append(Step(index=len(step_list), action="response",
                              action_payload={"text": "done"}))
    assert len(step_list) == steps
    return Trajectory(task_id=task_id, model_id=model_id, steps=step_list,
                      tool_call_records=records, terminal="responded",
                      final_response="done")
