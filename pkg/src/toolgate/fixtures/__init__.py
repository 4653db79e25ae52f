"""Bundled deterministic fixtures: mock server behaviors, sample tasks,
and scripted backend scripts, plus helpers to materialize fleet configs.

Everything here runs fully offline.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

FIXTURES_DIR = Path(__file__).resolve().parent

# (server_name, behavior file, category, description) for the 4-server mock fleet
MOCK_FLEET = [
    ("arithmetic", "arithmetic.json", "Miscellaneous",
     "Basic integer arithmetic over two operands."),
    ("newsdesk", "newsdesk.json", "Discovery",
     "News retrieval: headlines and keyword search."),
    ("filestore", "filestore.json", "File Access",
     "Local text file reading and writing."),
    ("textkit", "textkit.json", "Miscellaneous",
     "Small text utilities: echo, case folding, counting."),
]


def behavior_path(name: str) -> Path:
    """Path to a bundled behavior file, e.g. behavior_path("arithmetic.json")."""
    path = FIXTURES_DIR / "behaviors" / name
    if not path.exists():
        raise FileNotFoundError(path)
    return path


def tasks_path() -> Path:
    return FIXTURES_DIR / "tasks" / "sample_tasks.json"


def script_path() -> Path:
    return FIXTURES_DIR / "scripts" / "sample_script.json"


def mock_server_entry(server_name: str, behavior_file: str,
                      category: str | None = None,
                      description: str = "") -> dict:
    """One fleet-config server entry running the bundled mock server."""
    entry = {
        "server_name": server_name,
        "command": sys.executable,
        "args": ["-m", "toolgate.mockserver", str(behavior_path(behavior_file))],
        "env": {},
        "description": description,
    }
    if category is not None:
        entry["category"] = category
    return entry


def write_mock_fleet_config(path, servers=None) -> Path:
    """Write a fleet config pointing at the bundled mock servers.

    ``servers`` defaults to the full 4-server / 9-tool mock fleet.
    """
    if servers is None:
        servers = [mock_server_entry(n, f, c, d) for n, f, c, d in MOCK_FLEET]
    path = Path(path)
    path.write_text(json.dumps({"servers": servers}, indent=2), encoding="utf-8")
    return path
