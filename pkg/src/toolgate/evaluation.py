"""Trajectory grading and aggregate metrics: key-point extraction, the
binary judge, success rates, human agreement, efficiency means, error
distributions, and the cost/performance Pareto frontier.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from . import prompts
from .agent import Task, Trajectory, trajectory_stats
from .backends import ChatBackend
from .errors import (
    ConfigError,
    CoverageMismatch,
    MissingJudgment,
    UnparseableResponse,
    UnparseableVerdict,
)

logger = logging.getLogger(__name__)

JUDGE_RETRIES = 3
ERROR_CATEGORIES = ("QueryError", "RetrieveError", "ToolError", "OtherError")


def round2(value: float) -> float:
    """Half-up rounding to 2 decimals, as in the reported tables."""
    return float(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass
class Judgment:
    task_id: str
    judge_model_id: str
    thoughts: str
    status: str  # "Success" | "Failure"
    key_points_source: str = "human"  # "human" | "generated"

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "judge_model_id": self.judge_model_id,
            "thoughts": self.thoughts,
            "status": self.status,
            "key_points_source": self.key_points_source,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Judgment":
        return cls(**data)


@dataclass(frozen=True)
class ErrorLabel:
    task_id: str
    category: str
    annotator: str = ""

    def __post_init__(self):
        if self.category not in ERROR_CATEGORIES:
            raise ConfigError(f"unknown error category {self.category!r}")


# --- key points ------------------------------------------------------------

_NUMBERED_RE = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*$")


def parse_key_points(text: str) -> list[str]:
    """Pull the numbered list out of model output; tolerates preambles."""
    points = []
    for line in (text or "").splitlines():
        match = _NUMBERED_RE.match(line)
        if match:
            points.append(match.group(1))
    return points


def extract_key_points(task: Task, chat: ChatBackend,
                       temperature: float = 0.7) -> list[str]:
    """Ask the model for the task's explicit key points (numbered list)."""
    prompt = prompts.KEY_POINTS_PROMPT.format(task=task.instruction)
    for _ in range(JUDGE_RETRIES):
        turn = chat.complete([{"role": "user", "content": prompt}],
                             temperature=temperature)
        points = parse_key_points(turn.text or "")
        if points:
            return points
    raise UnparseableResponse(
        f"task {task.task_id}: no numbered key-point list after {JUDGE_RETRIES} asks")


# --- judging ---------------------------------------------------------------

_STATUS_RE = re.compile(r"^\s*status\s*[::]\s*[\"']?\s*(success|failure)\b",
                        re.IGNORECASE)
_THOUGHTS_RE = re.compile(r"^\s*thoughts\s*[::]\s*(.*)$", re.IGNORECASE)


def parse_judgment(text: str) -> tuple[str, str]:
    """Total parser: returns (thoughts, "Success"|"Failure") or raises
    UnparseableVerdict. Never raises anything else on arbitrary text.
    """
    thoughts_parts: list[str] = []
    status: str | None = None
    for line in (text or "").splitlines():
        status_match = _STATUS_RE.match(line)
        if status_match:
            status = status_match.group(1).lower()
            continue
        thoughts_match = _THOUGHTS_RE.match(line)
        if thoughts_match:
            thoughts_parts.append(thoughts_match.group(1))
    if status is None:
        raise UnparseableVerdict("no 'Status: success|failure' line found")
    thoughts = " ".join(p for p in thoughts_parts if p).strip() or "(no thoughts given)"
    return thoughts, "Success" if status == "success" else "Failure"


def format_tool_calls(trajectory: Trajectory) -> str:
    lines = []
    for rec in trajectory.tool_call_records:
        request = json.dumps(rec.request, sort_keys=True)
        observation = rec.observation
        if len(observation) > 2000:
            observation = observation[:2000] + " …[truncated]"
        lines.append(f"[{rec.seq}] {rec.action} {request} -> ({rec.outcome}) {observation}")
    return "\n".join(lines) or "(no tool calls)"


def judge(task: Task, key_points: list[str], trajectory: Trajectory,
          tool_descriptions: str, chat: ChatBackend,
          key_points_source: str = "human",
          temperature: float = 0.7) -> Judgment:
    """Binary verdict over (task, key points, trajectory, tool
    descriptions) via the two-line judge format.
    """
    prompt = prompts.EVALUATION_PROMPT.format(
        task=task.instruction,
        key_points="\n".join(f"{i + 1}. {p}" for i, p in enumerate(key_points))
        or "(none)",
        response=trajectory.final_response or "(no final response)",
        tool_calls=format_tool_calls(trajectory),
        tool_descriptions=tool_descriptions or "(none)",
    )
    last_exc: UnparseableVerdict | None = None
    for _ in range(JUDGE_RETRIES):
        turn = chat.complete([{"role": "user", "content": prompt}],
                             temperature=temperature)
        try:
            thoughts, status = parse_judgment(turn.text or "")
        except UnparseableVerdict as exc:
            last_exc = exc
            continue
        return Judgment(task_id=task.task_id, judge_model_id=chat.model_id,
                        thoughts=thoughts, status=status,
                        key_points_source=key_points_source)
    raise last_exc or UnparseableVerdict("empty judge output")


def used_tool_descriptions(trajectory: Trajectory, catalog) -> str:
    """Descriptors for every tool the trajectory executed (the judge's
    tool-description context)."""
    seen = []
    for rec in trajectory.tool_call_records:
        if rec.action != "execute":
            continue
        key = (rec.request.get("server_name"), rec.request.get("tool_name"))
        if key in seen:
            continue
        seen.append(key)
    blocks = []
    for server_name, tool_name in seen:
        record = catalog.tool(server_name, tool_name) if catalog else None
        if record is None:
            blocks.append(f"{server_name}/{tool_name}: (not in catalog)")
        else:
            schema = json.dumps(record.input_schema, sort_keys=True)
            blocks.append(f"{server_name}/{tool_name}: {record.description} "
                          f"parameters: {schema}")
    return "\n".join(blocks)


# --- aggregate metrics -----------------------------------------------------

@dataclass
class SuccessReport:
    per_domain: dict[str, float]
    per_domain_counts: dict[str, tuple[int, int]]  # domain -> (successes, total)
    overall: float
    successes: int
    total: int


def success_rates(judgments: list[Judgment], tasks: list[Task]) -> SuccessReport:
    """Per-domain and overall success percentages, 2-decimal half-up."""
    by_id = {t.task_id: t for t in tasks}
    judged = {j.task_id: j for j in judgments}
    missing = set(by_id) - set(judged)
    if missing:
        raise MissingJudgment(missing)
    counts: dict[str, list[int]] = {}
    for task in tasks:
        success = judged[task.task_id].status == "Success"
        bucket = counts.setdefault(task.domain, [0, 0])
        bucket[0] += int(success)
        bucket[1] += 1
    per_domain = {d: round2(100.0 * s / t) for d, (s, t) in counts.items()}
    successes = sum(s for s, _ in counts.values())
    total = sum(t for _, t in counts.values())
    overall = round2(100.0 * successes / total) if total else 0.0
    return SuccessReport(
        per_domain=per_domain,
        per_domain_counts={d: (s, t) for d, (s, t) in counts.items()},
        overall=overall,
        successes=successes,
        total=total,
    )


def agreement_rate(judgments: list[Judgment], human_labels: dict[str, str]) -> float:
    """Fraction of tasks (as a percentage) where judge status matches the
    human status. Label values are "Success"/"Failure".
    """
    judged = {j.task_id: j.status for j in judgments}
    if set(judged) != set(human_labels):
        raise CoverageMismatch(
            f"judge covers {len(judged)} tasks, human labels cover "
            f"{len(human_labels)}; symmetric difference "
            f"{sorted(set(judged) ^ set(human_labels))[:5]}")
    if not judged:
        return 0.0
    matches = sum(1 for tid, status in judged.items()
                  if status == human_labels[tid])
    return round2(100.0 * matches / len(judged))


@dataclass
class EfficiencyRow:
    model_id: str
    steps: float
    tools: float
    executes: float
    routes: float
    overall: float | None = None  # success %, when judgments are supplied


def efficiency_table(trajectories_by_model: dict[str, list[Trajectory]],
                     success_by_model: dict[str, float] | None = None
                     ) -> list[EfficiencyRow]:
    """Arithmetic means of trajectory stats per model, joined with the
    success rate when available. Sorted by overall desc, then model id.
    """
    rows = []
    for model_id, trajectories in trajectories_by_model.items():
        stats = [trajectory_stats(t) for t in trajectories]
        n = len(stats)
        rows.append(EfficiencyRow(
            model_id=model_id,
            steps=round2(sum(s.steps for s in stats) / n) if n else 0.0,
            tools=round2(sum(s.tools for s in stats) / n) if n else 0.0,
            executes=round2(sum(s.executes for s in stats) / n) if n else 0.0,
            routes=round2(sum(s.routes for s in stats) / n) if n else 0.0,
            overall=(success_by_model or {}).get(model_id),
        ))
    rows.sort(key=lambda r: (-(r.overall if r.overall is not None else -1.0),
                             r.model_id))
    return rows


@dataclass(frozen=True)
class ParetoPoint:
    model_id: str
    cost: float
    success: float


def pareto_frontier(points: list[ParetoPoint]) -> list[ParetoPoint]:
    """Points not dominated by any other (cost <= and success >=, one
    strict). Identical points are both retained. Sorted by cost ascending.
    """
    frontier = []
    for p in points:
        dominated = any(
            q.cost <= p.cost and q.success >= p.success
            and (q.cost < p.cost or q.success > p.success)
            for q in points
        )
        if not dominated:
            frontier.append(p)
    frontier.sort(key=lambda p: (p.cost, -p.success, p.model_id))
    return frontier


@dataclass
class ErrorDistribution:
    counts: dict[str, int]
    proportions: dict[str, float] | None  # None when there are no labels

    @property
    def modal_category(self) -> str | None:
        if not any(self.counts.values()):
            return None
        return max(self.counts, key=lambda c: (self.counts[c], c))


def error_distribution(labels: list[ErrorLabel]) -> ErrorDistribution:
    counts = {c: 0 for c in ERROR_CATEGORIES}
    for label in labels:
        counts[label.category] += 1
    total = sum(counts.values())
    if total == 0:
        return ErrorDistribution(counts=counts, proportions=None)
    proportions = {c: counts[c] / total for c in ERROR_CATEGORIES}
    return ErrorDistribution(counts=counts, proportions=proportions)


# --- report assembly -------------------------------------------------------

@dataclass
class MetricsReport:
    success: dict[str, SuccessReport] = field(default_factory=dict)  # by model
    efficiency: list[EfficiencyRow] = field(default_factory=list)
    agreement: dict[str, float] = field(default_factory=dict)  # by judge model
    pareto_points: list[ParetoPoint] = field(default_factory=list)
    pareto_frontier: list[ParetoPoint] = field(default_factory=list)
    errors: ErrorDistribution | None = None
    notices: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "success": {
                model: {
                    "per_domain": rep.per_domain,
                    "per_domain_counts": {d: list(c)
                                          for d, c in rep.per_domain_counts.items()},
                    "overall": rep.overall,
                    "successes": rep.successes,
                    "total": rep.total,
                }
                for model, rep in self.success.items()
            },
            "efficiency": [vars(r) for r in self.efficiency],
            "agreement": self.agreement,
            "pareto_points": [vars(p) for p in self.pareto_points],
            "pareto_frontier": [vars(p) for p in self.pareto_frontier],
            "errors": (None if self.errors is None else {
                "counts": self.errors.counts,
                "proportions": self.errors.proportions,
            }),
            "notices": self.notices,
        }


def render_success_table(reports: dict[str, SuccessReport]) -> str:
    """Plain-text success table: Model, the six domains, Overall;
    rows sorted by Overall descending.
    """
    order = ("Office", "Leisure", "Travel", "Lifestyle", "Finance", "Shopping")
    header = ["Model", *order, "Overall (%)"]
    rows = []
    for model, rep in sorted(reports.items(), key=lambda kv: -kv[1].overall):
        cells = [model]
        for domain in order:
            value = rep.per_domain.get(domain)
            cells.append("-" if value is None else f"{value:.2f}")
        cells.append(f"{rep.overall:.2f}")
        rows.append(cells)
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths))
             for r in [header, *rows]]
    return "\n".join(lines)


def render_efficiency_table(rows: list[EfficiencyRow]) -> str:
    header = ["Model", "Steps", "Tools", "execute", "route", "Overall (%)"]
    body = [[r.model_id, f"{r.steps:.2f}", f"{r.tools:.2f}", f"{r.executes:.2f}",
             f"{r.routes:.2f}",
             "-" if r.overall is None else f"{r.overall:.2f}"] for r in rows]
    widths = [max(len(str(r[i])) for r in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths))
             for r in [header, *body]]
    return "\n".join(lines)


def load_human_labels(path) -> dict[str, str]:
    """Human label file: {"labels": [{"task_id": ..., "status": ...}]} or a
    flat {task_id: status} object. Status values: Success/Failure.
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, dict) and "labels" in doc:
        return {l["task_id"]: l["status"] for l in doc["labels"]}
    return dict(doc)


def load_error_labels(path) -> list[ErrorLabel]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [ErrorLabel(task_id=l["task_id"], category=l["category"],
                       annotator=l.get("annotator", ""))
            for l in doc.get("error_labels", [])]
