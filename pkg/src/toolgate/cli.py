"""Operator commands: index the fleet, serve the gateway, run tasks,
judge trajectories, and render reports.

Exit codes: 0 success, 1 partial (some tasks failed), 2 usage/config error.
"""

from __future__ import annotations

import json
import sys
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import agent, catalog as catalog_mod, copilot, evaluation, retrieval
from .backends import HashEmbeddingBackend, make_chat_backend
from .errors import ConfigError, EmptyCatalog, ToolgateError, UnparseableVerdict

MANIFEST_NAME = "manifest.json"


def _fail(message: str, code: int = 2):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _embedder(dim: int, seed: int) -> HashEmbeddingBackend:
    return HashEmbeddingBackend(dim=dim, seed=seed)


@click.group()
@click.option("--verbose", is_flag=True, default=False)
def main(verbose: bool):
    """MCP aggregation gateway, agent runner, and trajectory evaluator."""
    import logging
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING)


@main.command()
@click.option("--fleet", "fleet_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--summarizer", default="mock", show_default=True,
              help="chat backend spec for server summaries")
@click.option("--embedding-dim", default=64, show_default=True)
@click.option("--embedding-seed", default=0, show_default=True)
@click.option("--handshake-timeout", default=30.0, show_default=True)
def index(fleet_path, out_path, summarizer, embedding_dim, embedding_seed,
          handshake_timeout):
    """Build and persist the tool catalog for a fleet."""
    try:
        fleet = catalog_mod.load_fleet(fleet_path)
        chat = make_chat_backend(summarizer)
        built = catalog_mod.build_catalog(fleet, chat,
                                          handshake_timeout=handshake_timeout)
        built = catalog_mod.attach_embeddings(
            built, _embedder(embedding_dim, embedding_seed))
        catalog_mod.persist_catalog(built, out_path)
    except (ConfigError, EmptyCatalog, ToolgateError) as exc:
        _fail(str(exc))
    click.echo(f"{len(built.summaries)} servers, {len(built.tools)} tools, "
               f"{len(built.skipped)} skipped")


@main.command()
@click.option("--catalog", "catalog_path", required=True, type=click.Path())
@click.option("--fleet", "fleet_path", required=True, type=click.Path())
@click.option("--k", default=retrieval.DEFAULT_K, show_default=True)
@click.option("--weight-server", default=0.5, show_default=True)
@click.option("--weight-tool", default=0.5, show_default=True)
@click.option("--embedding-seed", default=0, show_default=True)
@click.option("--call-timeout", default=60.0, show_default=True)
def serve(catalog_path, fleet_path, k, weight_server, weight_tool,
          embedding_seed, call_timeout):
    """Serve the gateway as an MCP server on stdio."""
    try:
        cat = catalog_mod.load_catalog(catalog_path)
        fleet = catalog_mod.load_fleet(fleet_path)
    except ToolgateError as exc:
        _fail(str(exc))
    embedder = _embedder(cat.embedding_dim or 64, embedding_seed)
    session = copilot.GatewaySession(cat, fleet, embedder, k=k,
                                     weights=(weight_server, weight_tool),
                                     call_timeout=call_timeout)
    with session:
        copilot.serve_stdio(session)


@main.command()
@click.option("--catalog", "catalog_path", required=True, type=click.Path())
@click.option("--fleet", "fleet_path", required=True, type=click.Path())
@click.option("--tasks", "tasks_path", required=True, type=click.Path())
@click.option("--backend", "backend_spec", required=True,
              help='"mock", "scripted:PATH", or "http:BASE_URL,MODEL"')
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--budget", default=agent.DEFAULT_BUDGET, show_default=True)
@click.option("--temperature", default=agent.DEFAULT_TEMPERATURE, show_default=True)
@click.option("--k", default=retrieval.DEFAULT_K, show_default=True)
@click.option("--weight-server", default=0.5, show_default=True)
@click.option("--weight-tool", default=0.5, show_default=True)
@click.option("--embedding-seed", default=0, show_default=True)
@click.option("--call-timeout", default=60.0, show_default=True)
@click.option("--parallelism", default=4, show_default=True)
def run(catalog_path, fleet_path, tasks_path, backend_spec, out_dir, budget,
        temperature, k, weight_server, weight_tool, embedding_seed,
        call_timeout, parallelism):
    """Run every task against the gateway, writing one trajectory per task."""
    try:
        cat = catalog_mod.load_catalog(catalog_path)
        fleet = catalog_mod.load_fleet(fleet_path)
        tasks = agent.load_tasks(tasks_path)
    except ToolgateError as exc:
        _fail(str(exc))
    if not tasks:
        _fail("no tasks in task file")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    manifest = {
        "run_id": uuid.uuid4().hex[:12],
        "status": "partial",
        "created_at": time.time(),
        "config": {
            "backend": backend_spec,
            "budget": budget,
            "temperature": temperature,
            "route_k": k,
            "route_weight_server": weight_server,
            "route_weight_tool": weight_tool,
            "embedding_backend_id": cat.embedding_backend_id,
            "catalog": str(catalog_path),
            "fleet": str(fleet_path),
        },
        "task_ids": [t.task_id for t in tasks],
        "tasks_file": str(Path(tasks_path).resolve()),
        "artifacts": {},
        "failures": {},
    }
    manifest_path = out / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")

    embedder = _embedder(cat.embedding_dim or 64, embedding_seed)

    def run_one(task: agent.Task):
        chat = make_chat_backend(backend_spec, task_id=task.task_id)
        session = copilot.GatewaySession(cat, fleet, embedder, k=k,
                                         weights=(weight_server, weight_tool),
                                         call_timeout=call_timeout)
        with session:
            traj = agent.run_task(task, session, chat, budget=budget,
                                  temperature=temperature)
        path = out / f"trajectory_{task.task_id}.json"
        traj.save(path)
        return task.task_id, path, traj.terminal

    failures = {}
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        futures = {pool.submit(run_one, t): t for t in tasks}
        for fut, task in futures.items():
            try:
                task_id, path, terminal = fut.result()
            except Exception as exc:  # per-task failure: batch continues
                failures[task.task_id] = str(exc)
                click.echo(f"{task.task_id}: FAILED ({exc})", err=True)
                continue
            manifest["artifacts"][task_id] = str(path)
            click.echo(f"{task_id}: {terminal} -> {path}")

    manifest["failures"] = failures
    manifest["status"] = "complete" if not failures else "partial"
    manifest_path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    sys.exit(0 if not failures else 1)


def _load_run(run_dir: Path):
    manifest_path = run_dir / MANIFEST_NAME
    if not manifest_path.exists():
        _fail(f"no {MANIFEST_NAME} in {run_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    trajectories = {}
    for task_id, path in manifest.get("artifacts", {}).items():
        trajectories[task_id] = agent.Trajectory.load(path)
    return manifest, trajectories


@main.command()
@click.option("--run-dir", required=True, type=click.Path())
@click.option("--backend", "backend_spec", default="mock", show_default=True)
@click.option("--tasks", "tasks_path", default=None, type=click.Path(),
              help="task file; defaults to the one recorded in the manifest")
@click.option("--generate-key-points", is_flag=True, default=False,
              help="use model-extracted key points instead of the task file's")
@click.option("--temperature", default=0.7, show_default=True)
def judge(run_dir, backend_spec, tasks_path, generate_key_points, temperature):
    """Judge every trajectory in a run directory."""
    run_path = Path(run_dir)
    manifest, trajectories = _load_run(run_path)
    tasks_file = tasks_path or manifest.get("tasks_file")
    if not tasks_file or not Path(tasks_file).exists():
        _fail("task file not found; pass --tasks")
    tasks = {t.task_id: t for t in agent.load_tasks(tasks_file)}
    try:
        cat = catalog_mod.load_catalog(manifest["config"]["catalog"])
    except ToolgateError:
        cat = None

    chat = make_chat_backend(backend_spec)
    judgments = []
    failures = {}
    for task_id, traj in sorted(trajectories.items()):
        task = tasks.get(task_id)
        if task is None:
            failures[task_id] = "no matching task"
            continue
        try:
            if generate_key_points:
                key_points = evaluation.extract_key_points(task, chat,
                                                           temperature=temperature)
                source = "generated"
            else:
                key_points = list(task.key_points)
                source = "human"
            verdict = evaluation.judge(
                task, key_points, traj,
                evaluation.used_tool_descriptions(traj, cat),
                chat, key_points_source=source, temperature=temperature)
        except (UnparseableVerdict, ToolgateError) as exc:
            failures[task_id] = str(exc)
            click.echo(f"{task_id}: UNJUDGED ({exc})", err=True)
            continue
        judgments.append(verdict.to_dict())
        click.echo(f"{task_id}: {verdict.status}")

    out_path = run_path / "judgments.json"
    out_path.write_text(json.dumps({
        "judge_backend": backend_spec,
        "judgments": judgments,
        "failures": failures,
    }, indent=2), encoding="utf-8")
    click.echo(f"{len(judgments)} judgments -> {out_path}")
    sys.exit(0 if not failures else 1)


@main.command()
@click.option("--run-dir", "run_dirs", multiple=True, required=True,
              type=click.Path())
@click.option("--human-labels", default=None, type=click.Path())
@click.option("--prices", default=None, type=click.Path(),
              help='JSON {"model_id": cost_per_run_or_per_token, ...}')
@click.option("--error-labels", default=None, type=click.Path())
@click.option("--out", "out_path", default=None, type=click.Path())
def report(run_dirs, human_labels, prices, error_labels, out_path):
    """Render success/efficiency tables and optional agreement, Pareto,
    and error-distribution sections."""
    rep = evaluation.MetricsReport()
    trajectories_by_model: dict[str, list[agent.Trajectory]] = {}
    success_by_model: dict[str, float] = {}

    for run_dir in run_dirs:
        run_path = Path(run_dir)
        manifest, trajectories = _load_run(run_path)
        if not trajectories:
            continue
        model_id = next(iter(trajectories.values())).model_id
        trajectories_by_model.setdefault(model_id, []).extend(trajectories.values())

        judgments_path = run_path / "judgments.json"
        if not judgments_path.exists():
            rep.notices.append(f"{run_dir}: no judgments.json; success table skipped")
            continue
        doc = json.loads(judgments_path.read_text(encoding="utf-8"))
        judgments = [evaluation.Judgment.from_dict(j) for j in doc["judgments"]]
        tasks = agent.load_tasks(manifest["tasks_file"])
        tasks = [t for t in tasks if t.task_id in {j.task_id for j in judgments}]
        try:
            success = evaluation.success_rates(judgments, tasks)
        except ToolgateError as exc:
            rep.notices.append(f"{run_dir}: {exc}")
            continue
        rep.success[model_id] = success
        success_by_model[model_id] = success.overall

        if human_labels:
            labels = evaluation.load_human_labels(human_labels)
            covered = {tid: labels[tid] for tid in labels
                       if tid in {j.task_id for j in judgments}}
            if covered and len(covered) == len(judgments):
                judge_id = judgments[0].judge_model_id
                rep.agreement[f"{judge_id} on {model_id}"] = \
                    evaluation.agreement_rate(judgments, covered)

    rep.efficiency = evaluation.efficiency_table(trajectories_by_model,
                                                 success_by_model)

    if prices:
        price_table = json.loads(Path(prices).read_text(encoding="utf-8"))
        points = [evaluation.ParetoPoint(model_id=m, cost=float(c),
                                         success=success_by_model.get(m, 0.0))
                  for m, c in price_table.items() if m in trajectories_by_model]
        rep.pareto_points = points
        rep.pareto_frontier = evaluation.pareto_frontier(points)
    else:
        rep.notices.append("no price table; Pareto section omitted")

    if error_labels:
        rep.errors = evaluation.error_distribution(
            evaluation.load_error_labels(error_labels))
    elif human_labels is None:
        rep.notices.append("no labels; agreement and error sections omitted")

    if rep.success:
        click.echo("== Success rates ==")
        click.echo(evaluation.render_success_table(rep.success))
    click.echo("\n== Efficiency ==")
    click.echo(evaluation.render_efficiency_table(rep.efficiency))
    if rep.agreement:
        click.echo("\n== Agreement ==")
        for name, rate in rep.agreement.items():
            click.echo(f"{name}: {rate:.2f}%")
    if rep.pareto_frontier:
        click.echo("\n== Pareto frontier (cost asc) ==")
        for p in rep.pareto_frontier:
            click.echo(f"{p.model_id}: cost={p.cost} success={p.success:.2f}")
    if rep.errors is not None:
        click.echo("\n== Error distribution ==")
        for cat_name, count in rep.errors.counts.items():
            share = ("-" if rep.errors.proportions is None
                     else f"{100 * rep.errors.proportions[cat_name]:.1f}%")
            click.echo(f"{cat_name}: {count} ({share})")
    for notice in rep.notices:
        click.echo(f"notice: {notice}", err=True)

    if out_path:
        Path(out_path).write_text(json.dumps(rep.to_dict(), indent=2),
                                  encoding="utf-8")
        click.echo(f"report -> {out_path}")


if __name__ == "__main__":
    main()
