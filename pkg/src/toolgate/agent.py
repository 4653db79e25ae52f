"""ReACT driver: runs one task against the gateway, alternating model
turns and observations until a final response or budget exhaustion, and
emits the full trajectory.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from . import prompts
from .backends import ChatBackend, ChatTurn
from .copilot import GatewaySession, ToolCallRecord
from .errors import BackendError, ConfigError

logger = logging.getLogger(__name__)

TRAJECTORY_FORMAT_VERSION = 1
DEFAULT_BUDGET = 40
DEFAULT_TEMPERATURE = 0.7
BACKEND_RETRIES = 3

DOMAINS = ("Office", "Lifestyle", "Leisure", "Finance", "Travel", "Shopping")


@dataclass(frozen=True)
class Task:
    task_id: str
    domain: str
    instruction: str
    key_points: tuple[str, ...] = ()

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ConfigError(f"task {self.task_id}: unknown domain {self.domain!r}")
        if not self.instruction:
            raise ConfigError(f"task {self.task_id}: empty instruction")


@dataclass
class Step:
    index: int
    action: str  # "route" | "execute" | "response"
    thought: str | None = None
    action_payload: dict | None = None
    observation: str | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "action": self.action,
            "thought": self.thought,
            "action_payload": self.action_payload,
            "observation": self.observation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Step":
        return cls(**data)


@dataclass
class Trajectory:
    task_id: str
    model_id: str
    steps: list[Step] = field(default_factory=list)
    tool_call_records: list[ToolCallRecord] = field(default_factory=list)
    prompt_tokens: int = 0
    completion_tokens: int = 0
    started_at: float = 0.0
    finished_at: float = 0.0
    terminal: str = "aborted"  # responded | budget_exhausted | aborted
    final_response: str | None = None

    def to_dict(self) -> dict:
        return {
            "format_version": TRAJECTORY_FORMAT_VERSION,
            "task_id": self.task_id,
            "model_id": self.model_id,
            "steps": [s.to_dict() for s in self.steps],
            "tool_call_records": [r.to_dict() for r in self.tool_call_records],
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "terminal": self.terminal,
            "final_response": self.final_response,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        return cls(
            task_id=data["task_id"],
            model_id=data["model_id"],
            steps=[Step.from_dict(s) for s in data.get("steps", [])],
            tool_call_records=[ToolCallRecord.from_dict(r)
                               for r in data.get("tool_call_records", [])],
            prompt_tokens=data.get("prompt_tokens", 0),
            completion_tokens=data.get("completion_tokens", 0),
            started_at=data.get("started_at", 0.0),
            finished_at=data.get("finished_at", 0.0),
            terminal=data.get("terminal", "aborted"),
            final_response=data.get("final_response"),
        )

    def save(self, path) -> Path:
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        tmp.replace(path)
        return path

    @classmethod
    def load(cls, path) -> "Trajectory":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_tasks(path) -> list[Task]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        Task(task_id=t["task_id"], domain=t["domain"],
             instruction=t["instruction"],
             key_points=tuple(t.get("key_points", [])))
        for t in doc.get("tasks", [])
    ]


def _complete_with_retries(chat: ChatBackend, messages, temperature, tools) -> ChatTurn:
    delay = 0.1
    for attempt in range(BACKEND_RETRIES):
        try:
            return chat.complete(messages, temperature=temperature, tools=tools)
        except BackendError:
            raise  # script exhaustion / hard backend error: no point retrying
        except Exception as exc:  # transient SDK/transport hiccups
            if attempt == BACKEND_RETRIES - 1:
                raise BackendError(f"{chat.model_id}: {exc}") from exc
            logger.warning("backend retry %d: %s", attempt + 1, exc)
            time.sleep(delay)
            delay *= 2
    raise BackendError("unreachable")


def run_task(task: Task, gateway: GatewaySession, chat: ChatBackend,
             budget: int = DEFAULT_BUDGET,
             temperature: float = DEFAULT_TEMPERATURE) -> Trajectory:
    """Run one task to completion, budget exhaustion, or abort.

    The trajectory is always returned (and savable) regardless of the
    terminal state; backend failures never escape as exceptions.
    """
    traj = Trajectory(task_id=task.task_id, model_id=chat.model_id,
                      started_at=time.time())
    base_records = len(gateway.records)
    messages: list[dict] = [
        {"role": "system", "content": prompts.AGENT_SYSTEM_PROMPT},
        {"role": "user", "content": task.instruction},
    ]
    tool_schemas = [t.to_dict() for t in gateway.meta_tools()]

    while len(traj.steps) < budget:
        try:
            turn = _complete_with_retries(chat, messages, temperature, tool_schemas)
        except BackendError as exc:
            logger.warning("task %s aborted: %s", task.task_id, exc)
            traj.terminal = "aborted"
            break
        traj.prompt_tokens += turn.prompt_tokens
        traj.completion_tokens += turn.completion_tokens

        if turn.tool_name in ("route", "execute"):
            observation = gateway.call_meta(turn.tool_name, turn.tool_args or {})
            traj.steps.append(Step(
                index=len(traj.steps),
                action=turn.tool_name,
                thought=turn.text,
                action_payload=turn.tool_args or {},
                observation=observation,
            ))
            messages.append({"role": "assistant",
                             "content": turn.text or "",
                             "tool_call": {"name": turn.tool_name,
                                           "arguments": turn.tool_args or {}}})
            messages.append({"role": "tool", "content": observation})
        else:
            traj.steps.append(Step(
                index=len(traj.steps),
                action="response",
                thought=None,
                action_payload={"text": turn.text or ""},
            ))
            traj.final_response = turn.text or ""
            traj.terminal = "responded"
            break
    else:
        traj.terminal = "budget_exhausted"

    traj.tool_call_records = list(gateway.records[base_records:])
    traj.finished_at = time.time()
    return traj


class TrajectoryStats(NamedTuple):
    steps: int
    tools: int
    executes: int
    routes: int


def trajectory_stats(traj: Trajectory) -> TrajectoryStats:
    """(steps, tools, executes, routes): dialogue turns, distinct
    successfully-executed (server, tool) pairs, execute attempts that
    reached the gateway, and route calls. Pure function of the trajectory.
    """
    steps = len(traj.steps)
    routes = sum(1 for r in traj.tool_call_records if r.action == "route")
    executes = sum(1 for r in traj.tool_call_records if r.action == "execute")
    distinct = {
        (r.request.get("server_name"), r.request.get("tool_name"))
        for r in traj.tool_call_records
        if r.action == "execute" and r.outcome == "ok"
    }
    return TrajectoryStats(steps=steps, tools=len(distinct),
                           executes=executes, routes=routes)
