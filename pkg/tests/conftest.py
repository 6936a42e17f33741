import json
import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tracemend.interp import InputSet
from tracemend.lower import lower_source
from tracemend.model import Memory
from tracemend.store import load_problem

REPO_ROOT = Path(__file__).resolve().parent.parent
PROBLEMS = REPO_ROOT / "problems"


def load_attempts(problem: str) -> dict:
    out = {}
    for path in sorted((PROBLEMS / problem / "attempts").glob("*.mini")):
        text = path.read_text()
        out[path.stem] = (text, lower_source(text, path.stem))
    return out


def load_inputs(problem: str) -> InputSet:
    memories = []
    for path in sorted((PROBLEMS / problem / "inputs").glob("*.json")):
        memories.append(Memory(json.loads(path.read_text())))
    return InputSet(tuple(memories))


@pytest.fixture(scope="session")
def derivative():
    return load_attempts("derivative")


@pytest.fixture(scope="session")
def derivative_inputs():
    return load_inputs("derivative")


@pytest.fixture(scope="session")
def fibcount():
    return load_attempts("fibcount")


@pytest.fixture(scope="session")
def fibcount_inputs():
    return load_inputs("fibcount")


@pytest.fixture(scope="session")
def problem_copies(tmp_path_factory):
    """Per-session scratch copies of all problem dirs (stores get written
    into them)."""
    root = tmp_path_factory.mktemp("problems")
    for problem in sorted(p.name for p in PROBLEMS.iterdir() if p.is_dir()):
        shutil.copytree(PROBLEMS / problem, root / problem)
    return root


@pytest.fixture(scope="session")
def clustered_problems(problem_copies):
    """Scratch problems with cluster stores built once."""
    from tracemend.cli import cmd_cluster

    for problem in sorted(p.name for p in problem_copies.iterdir() if p.is_dir()):
        cmd_cluster(problem_copies / problem,
                    problem_copies / problem / "attempts")
    return problem_copies
