"""Acceptance gate: one test per criterion, each printing a pass line
(visible with -v/-s) and enforcing its stated tolerance and runtime.
"""

import json
import random
import string
import subprocess
import sys
import time

import pytest

from toolgate import fixtures
from toolgate.agent import Task, Trajectory, run_task
from toolgate.backends import ScriptedChatBackend
from toolgate.catalog import Catalog, ToolRecord
from toolgate.copilot import ExecuteRequest, GatewaySession
from toolgate.errors import ParseError, TransportExhausted, UnparseableVerdict
from toolgate.evaluation import (
    Judgment,
    ParetoPoint,
    agreement_rate,
    efficiency_table,
    parse_judgment,
    pareto_frontier,
    round2,
    success_rates,
)
from toolgate.protocol import RpcMessage, frame_and_parse, parse_line, serialize
from toolgate.retrieval import RouteQuery, route

from conftest import make_vector_catalog, mock_config
from test_evaluation import build_judged_fixture, make_95_trajectory_fixture
from test_retrieval import WEIGHT_GRID, FixedEmbedder, brute_force_route, random_catalog


def report(criterion: int, message: str) -> None:
    print(f"ACCEPTANCE {criterion}: PASS - {message}")


# -- 1. protocol round-trip -------------------------------------------------

def _random_message(rng: random.Random) -> RpcMessage:
    def value(depth=0):
        choice = rng.random()
        if depth >= 2 or choice < 0.3:
            return rng.choice([None, True, False, rng.randint(-10**6, 10**6),
                               "".join(rng.choices(string.printable[:70], k=8))])
        if choice < 0.65:
            return [value(depth + 1) for _ in range(rng.randint(0, 3))]
        return {f"k{i}": value(depth + 1) for i in range(rng.randint(0, 3))}

    kind = rng.choice(["request", "notification", "response", "error"])
    msg_id = rng.choice([rng.randint(0, 10**6), f"id-{rng.randint(0, 999)}"])
    if kind == "request":
        return RpcMessage(kind=kind, id=msg_id, method=f"m{rng.randint(0, 99)}",
                          payload=value())
    if kind == "notification":
        return RpcMessage(kind=kind, method=f"n{rng.randint(0, 99)}", payload=value())
    if kind == "response":
        return RpcMessage(kind=kind, id=msg_id, payload=value())
    return RpcMessage(kind=kind, id=msg_id,
                      payload={"code": rng.randint(-40000, 0), "message": "x"})


def test_criterion_01_protocol_round_trip():
    rng = random.Random(1)
    start = time.monotonic()
    for _ in range(1000):
        msg = _random_message(rng)
        assert parse_line(serialize(msg)) == msg
    # malformed-line fuzzing never crashes the framer
    for _ in range(500):
        junk = "".join(rng.choices(string.printable, k=rng.randint(0, 60)))
        for event in frame_and_parse([junk + "\n"]):
            assert isinstance(event, (RpcMessage, ParseError))
    elapsed = time.monotonic() - start
    assert elapsed < 10, f"took {elapsed:.1f}s"
    report(1, f"1000 round-trips + 500 fuzz lines in {elapsed:.2f}s")


# -- 2. retrieval oracle ----------------------------------------------------

def test_criterion_02_retrieval_oracle():
    rng = random.Random(2)
    start = time.monotonic()
    checked = 0
    for c in range(100):
        dim = 16
        n_tools = rng.randint(1, 200)
        n_servers = rng.randint(1, max(1, n_tools // 3))
        cat = random_catalog(rng, n_servers, n_tools, dim)
        if rng.random() < 0.3 and n_tools >= 2:
            # force exact ties by duplicating one tool vector
            tools = list(cat.tools)
            tools[1] = ToolRecord(tools[1].server_name, tools[1].tool_name,
                                  tools[1].description, tools[1].input_schema,
                                  embedding=tools[0].embedding)
            cat = Catalog(tools=tuple(tools), summaries=cat.summaries,
                          embedding_backend_id=cat.embedding_backend_id,
                          embedding_dim=dim)
        embedder = FixedEmbedder({}, dim=dim)
        for q in range(20):
            server_part, tool_part = f"qs-{c}-{q}", f"qt-{c}-{q}"
            query = RouteQuery(server_part, tool_part, "")
            qs, qt = embedder.embed([server_part, tool_part])
            for weights in WEIGHT_GRID:
                got = route(cat, query, embedder, k=5, weights=weights)
                expected = brute_force_route(cat, qs, qt, 5, weights)
                assert [(r.server_name, r.tool_name) for r in got] == expected
                checked += 1
    elapsed = time.monotonic() - start
    assert elapsed < 60, f"took {elapsed:.1f}s"
    report(2, f"{checked} route calls matched the exhaustive oracle "
              f"in {elapsed:.1f}s")


# -- 3. retry discipline ----------------------------------------------------

def _flaky_session(embedder):
    cat = make_vector_catalog(
        entries=[("flaky", name, f"flaky {name}",
                  [1.0] + [0.0] * 15)
                 for name in ("fail_twice", "fail_thrice",
                              "always_semantic_error")],
        summaries={"flaky": ("flaky server", [1.0] + [0.0] * 15)},
    )
    fleet = [mock_config("flaky", "flaky.json")]
    return GatewaySession(cat, fleet, embedder, handshake_timeout=10,
                          call_timeout=0.5)


def test_criterion_03_retry_discipline(embedder):
    with _flaky_session(embedder) as sess:
        text = sess.handle_execute(ExecuteRequest("flaky", "fail_twice", {}))
        assert text == "recovered"
        assert sess.records[-1].attempts == 3

        with pytest.raises(TransportExhausted) as excinfo:
            sess.handle_execute(ExecuteRequest("flaky", "fail_thrice", {}))
        assert excinfo.value.attempts == 3

        sess.handle_execute(ExecuteRequest("flaky", "always_semantic_error", {}))
        assert sess.records[-1].outcome == "tool_error"
        assert sess.records[-1].attempts == 1
    report(3, "fail-twice ok@3, fail-thrice exhausted@3, semantic error @1")


# -- 4. end-to-end offline run ----------------------------------------------

def test_criterion_04_end_to_end_offline(tmp_path):
    start = time.monotonic()
    fleet = fixtures.write_mock_fleet_config(tmp_path / "fleet.json")
    catalog_path = tmp_path / "catalog.json"
    run_dir = tmp_path / "run"
    base = [sys.executable, "-m", "toolgate.cli"]
    subprocess.run([*base, "index", "--fleet", str(fleet),
                    "--out", str(catalog_path)], check=True, capture_output=True)
    subprocess.run([*base, "run", "--catalog", str(catalog_path),
                    "--fleet", str(fleet),
                    "--tasks", str(fixtures.tasks_path()),
                    "--backend", f"scripted:{fixtures.script_path()}",
                    "--out-dir", str(run_dir)], check=True, capture_output=True)
    subprocess.run([*base, "judge", "--run-dir", str(run_dir),
                    "--backend", "mock"], check=True, capture_output=True)
    out = subprocess.run([*base, "report", "--run-dir", str(run_dir)],
                         check=True, capture_output=True, text=True)
    trajectories = sorted(run_dir.glob("trajectory_*.json"))
    assert len(trajectories) == 3
    for path in trajectories:
        assert Trajectory.load(path).terminal == "responded"
    judgments = json.loads((run_dir / "judgments.json").read_text())
    assert len(judgments["judgments"]) == 3
    assert "Efficiency" in out.stdout
    elapsed = time.monotonic() - start
    assert elapsed < 30, f"took {elapsed:.1f}s"
    report(4, f"index -> run -> judge -> report offline in {elapsed:.1f}s")


# -- 5. success-rate table arithmetic ---------------------------------------

def test_criterion_05_success_table_arithmetic():
    tasks, judgments = build_judged_fixture(
        {"Office": 28, "Leisure": 9, "Travel": 9, "Lifestyle": 12,
         "Finance": 11, "Shopping": 6})
    rep = success_rates(judgments, tasks)
    assert rep.per_domain == {"Office": 90.32, "Leisure": 64.29,
                              "Travel": 75.00, "Lifestyle": 80.00,
                              "Finance": 78.57, "Shopping": 66.67}
    assert rep.overall == 78.95
    report(5, "domain rates (90.32, 64.29, 75.00, 80.00, 78.57, 66.67), "
              "overall 78.95 exact")


# -- 6. efficiency means ----------------------------------------------------

def test_criterion_06_efficiency_means():
    rows = efficiency_table({"m": make_95_trajectory_fixture()})
    row = rows[0]
    for got, want in [(row.steps, 20.09), (row.tools, 2.71),
                      (row.executes, 5.59), (row.routes, 2.98)]:
        assert abs(got - want) <= 0.01, (got, want)
    report(6, f"95-trajectory means ({row.steps}, {row.tools}, "
              f"{row.executes}, {row.routes}) within +/-0.01")


# -- 7. agreement arithmetic ------------------------------------------------

def test_criterion_07_agreement_arithmetic():
    judgments = [Judgment(task_id=f"t{i}", judge_model_id="j", thoughts="t",
                          status="Success") for i in range(95)]
    labels_77 = {f"t{i}": ("Success" if i < 77 else "Failure")
                 for i in range(95)}
    assert agreement_rate(judgments, labels_77) == 81.05
    assert agreement_rate(judgments,
                          {f"t{i}": "Success" for i in range(95)}) == 100.0
    assert agreement_rate(judgments,
                          {f"t{i}": "Failure" for i in range(95)}) == 0.0
    report(7, "77/95 -> 81.05%, identical -> 100%, disjoint -> 0%")


# -- 8. pareto vs brute force -----------------------------------------------

def test_criterion_08_pareto_brute_force():
    rng = random.Random(8)
    start = time.monotonic()
    for _ in range(1000):
        n = rng.randint(1, 50)
        points = []
        for i in range(n):
            cost = rng.choice([rng.uniform(0.1, 10), rng.randint(1, 5)])
            success = rng.choice([rng.uniform(0, 100), float(rng.randint(0, 10) * 10)])
            points.append(ParetoPoint(f"m{i}", float(cost), success))
        expected = sorted(
            (p for p in points
             if not any(q.cost <= p.cost and q.success >= p.success
                        and (q.cost < p.cost or q.success > p.success)
                        for q in points)),
            key=lambda p: (p.cost, -p.success, p.model_id))
        assert pareto_frontier(points) == expected
    elapsed = time.monotonic() - start
    assert elapsed < 10, f"took {elapsed:.1f}s"
    report(8, f"1000 random point sets matched O(n^2) dominance in {elapsed:.1f}s")


# -- 9. judge-parser totality -----------------------------------------------

def test_criterion_09_parser_totality():
    rng = random.Random(9)
    vocab = ["Status:", "status", "success", "failure", "Thoughts:", '"',
             "'", ":", "\n", " ", "\t", "::", "SUCCESS", "Failure", "статус",
             "".join(rng.choices(string.printable, k=5))]
    parsed = unparsed = 0
    for _ in range(10_000):
        text = "".join(rng.choices(vocab, k=rng.randint(0, 25)))
        try:
            _, status = parse_judgment(text)
            assert status in ("Success", "Failure")
            parsed += 1
        except UnparseableVerdict:
            unparsed += 1
    assert parsed + unparsed == 10_000
    report(9, f"10000 fuzzed verdicts: {parsed} parsed, {unparsed} "
              "unparseable, zero escapes")


# -- 10. invariant suite ----------------------------------------------------

def test_criterion_10_invariants(embedder):
    rng = random.Random(10)

    # argmax weight-degeneracy: permuting the unused half changes nothing
    for trial in range(10):
        cat = random_catalog(rng, 4, 30, 8)
        emb = FixedEmbedder({}, dim=8)
        query = RouteQuery(f"s{trial}", f"t{trial}", "")
        shuffled_tools = list(cat.tools)
        vecs = [t.embedding for t in shuffled_tools]
        rng.shuffle(vecs)
        permuted = Catalog(
            tools=tuple(ToolRecord(t.server_name, t.tool_name, t.description,
                                   t.input_schema, embedding=v)
                        for t, v in zip(shuffled_tools, vecs)),
            summaries=cat.summaries, embedding_backend_id="x",
            embedding_dim=8)
        key = lambda res: [(r.server_name, r.tool_name) for r in res]
        assert key(route(cat, query, emb, k=5, weights=(1.0, 0.0))) == \
            key(route(permuted, query, emb, k=5, weights=(1.0, 0.0)))

    # ranking monotonicity: boosting tool_sim never lowers rank
    for trial in range(10):
        cat = random_catalog(rng, 3, 20, 8)
        emb = FixedEmbedder({}, dim=8)
        query = RouteQuery(f"ms{trial}", f"mt{trial}", "")
        (qt_vec,) = emb.embed([f"mt{trial}"])
        full = route(cat, query, emb, k=20, weights=(0.5, 0.5))
        target = full[rng.randrange(len(full))]
        boosted = Catalog(
            tools=tuple(
                ToolRecord(t.server_name, t.tool_name, t.description,
                           t.input_schema,
                           embedding=tuple(qt_vec)
                           if (t.server_name, t.tool_name) ==
                              (target.server_name, target.tool_name)
                           else t.embedding)
                for t in cat.tools),
            summaries=cat.summaries, embedding_backend_id="x", embedding_dim=8)
        after = route(boosted, query, emb, k=20, weights=(0.5, 0.5))
        pairs = lambda res: [(r.server_name, r.tool_name) for r in res]
        assert pairs(after).index((target.server_name, target.tool_name)) <= \
            pairs(full).index((target.server_name, target.tool_name))

    # trajectory single-response and budget safety under adversarial scripts
    class NullGateway:
        records = []

        def meta_tools(self):
            return []

        def call_meta(self, name, params):
            return "ok"

    task = Task(task_id="inv", domain="Office", instruction="x")
    for trial in range(20):
        budget = rng.randint(1, 15)
        turns = []
        for _ in range(rng.randint(0, 25)):
            if rng.random() < 0.7:
                turns.append({"tool": rng.choice(["route", "execute"]),
                              "params": {}})
            else:
                turns.append({"text": "done"})
        traj = run_task(task, NullGateway(), ScriptedChatBackend(turns),
                        budget=budget)
        assert len(traj.steps) <= budget
        responses = [s for s in traj.steps if s.action == "response"]
        assert len(responses) <= 1
        if responses:
            assert traj.steps[-1].action == "response"

    # aggregation consistency: overall = task-weighted mean of domain rates
    from toolgate.agent import DOMAINS
    for trial in range(20):
        tasks, judgments = [], []
        for i in range(rng.randint(1, 120)):
            tasks.append(Task(task_id=f"a{i}", domain=rng.choice(DOMAINS),
                              instruction="x"))
            judgments.append(Judgment(
                task_id=f"a{i}", judge_model_id="j", thoughts="t",
                status=rng.choice(["Success", "Failure"])))
        rep = success_rates(judgments, tasks)
        total_success = sum(s for s, _ in rep.per_domain_counts.values())
        assert rep.overall == round2(100.0 * total_success / rep.total)
        assert sum(t for _, t in rep.per_domain_counts.values()) == rep.total

    report(10, "weight degeneracy, monotonicity, single-response, "
               "budget safety, aggregation consistency")
