"""Problem directories and the on-disk cluster store.

A problem directory holds::

    problem.toml          statement, fallback text, limits, expected outputs
    inputs/<name>.json    one JSON object per test input: parameter -> value
    attempts/*.mini       corpus attempts (used by the batch commands)
    clusters/             written by clustering:
        store.json
        <rep-id>/rep.mini
        <rep-id>/members/<id>.mini

Inputs are ordered by file name; expected outputs are keyed by input file
stem in problem.toml.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

from .clustering import Clustering, ProgramEntry
from .interp import DEFAULT_STEP_LIMIT, InputSet, Ok, run_all
from .lower import lower
from .minilang import SourceUnit, parse
from .model import Memory, Program, primed, values_equal

STORE_SCHEMA_VERSION = 1
DEFAULT_COST_FALLBACK = 100
DEFAULT_TIMEOUT_S = 60.0


class StoreError(Exception):
    pass


@dataclass
class ProblemConfig:
    problem_id: str
    root: Path
    statement: str
    fallback_text: str
    params: List[str]
    inputs: InputSet
    input_names: List[str]
    expected: List[object]
    step_limit: int = DEFAULT_STEP_LIMIT
    cost_fallback_threshold: int = DEFAULT_COST_FALLBACK
    timeout_s: float = DEFAULT_TIMEOUT_S
    grow_store: bool = False


def load_problem(problem_dir) -> ProblemConfig:
    root = Path(problem_dir)
    cfg_path = root / "problem.toml"
    if not cfg_path.is_file():
        raise StoreError(f"no problem.toml in {root}")
    with open(cfg_path, "rb") as fh:
        raw = tomllib.load(fh)
    for key in ("statement", "fallback_text", "params"):
        if key not in raw:
            raise StoreError(f"{cfg_path}: missing key {key!r}")
    inputs_dir = root / "inputs"
    input_files = sorted(inputs_dir.glob("*.json"))
    if not input_files:
        raise StoreError(f"no inputs in {inputs_dir}")
    expected_map = raw.get("expected_outputs", {})
    memories = []
    expected = []
    names = []
    for path in input_files:
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise StoreError(f"{path}: input must be a JSON object")
        if set(data) != set(raw["params"]):
            raise StoreError(
                f"{path}: binds {sorted(data)}, expected {sorted(raw['params'])}")
        if path.stem not in expected_map:
            raise StoreError(f"{cfg_path}: no expected output for {path.stem!r}")
        memories.append(Memory(data))
        expected.append(expected_map[path.stem])
        names.append(path.stem)
    return ProblemConfig(
        problem_id=raw.get("id", root.name),
        root=root,
        statement=raw["statement"],
        fallback_text=raw["fallback_text"],
        params=list(raw["params"]),
        inputs=InputSet(tuple(memories)),
        input_names=names,
        expected=expected,
        step_limit=int(raw.get("step_limit", DEFAULT_STEP_LIMIT)),
        cost_fallback_threshold=int(
            raw.get("cost_fallback_threshold", DEFAULT_COST_FALLBACK)),
        timeout_s=float(raw.get("timeout_s", DEFAULT_TIMEOUT_S)),
        grow_store=bool(raw.get("grow_store", False)),
    )


def parse_attempt(text: str, name: str) -> ProgramEntry:
    program = lower(parse(SourceUnit(text, name)))
    return ProgramEntry(id=name, program=program, source=text)


def is_correct(program: Program, config: ProblemConfig) -> bool:
    """Exact expected-output comparison on every input (the clustering gate)."""
    if set(program.params) != set(config.params):
        return False
    outcomes = run_all(program, config.inputs, config.step_limit)
    for outcome, want in zip(outcomes, config.expected):
        if not isinstance(outcome, Ok):
            return False
        got = outcome.trace.final_memory().get(primed("$ret"))
        if not values_equal(got, want):
            return False
    return True


# ---------------------------------------------------------------------------
# Cluster store persistence


def save_store(c: Clustering, problem_dir) -> Path:
    """Write the cluster store; replaces any existing one."""
    root = Path(problem_dir) / "clusters"
    if root.exists():
        shutil.rmtree(root)
    root.mkdir(parents=True)
    meta = {"schema_version": STORE_SCHEMA_VERSION, "representatives": list(c.reps)}
    (root / "store.json").write_text(json.dumps(meta, indent=2) + "\n")
    for rep in c.reps:
        rep_dir = root / rep
        rep_dir.mkdir()
        (rep_dir / "rep.mini").write_text(c.programs[rep].source)
        members_dir = rep_dir / "members"
        members_dir.mkdir()
        for member in sorted(c.members[rep]):
            if member == rep:
                continue
            (members_dir / f"{member}.mini").write_text(c.programs[member].source)
    return root


def load_store(problem_dir) -> Clustering:
    """Read a cluster store back; empty store when none was written yet."""
    root = Path(problem_dir) / "clusters"
    c = Clustering()
    if not root.exists():
        return c
    meta_path = root / "store.json"
    if not meta_path.is_file():
        raise StoreError(f"{root}: store.json missing")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise StoreError(f"{meta_path}: corrupted store metadata: {exc}")
    if meta.get("schema_version") != STORE_SCHEMA_VERSION:
        raise StoreError(
            f"{meta_path}: schema version {meta.get('schema_version')!r}, "
            f"expected {STORE_SCHEMA_VERSION}")
    for rep in meta.get("representatives", []):
        rep_dir = root / rep
        rep_file = rep_dir / "rep.mini"
        if not rep_file.is_file():
            raise StoreError(f"{rep_file}: missing representative source")
        entries = [(rep, rep_file)]
        members_dir = rep_dir / "members"
        if members_dir.is_dir():
            entries += [(f.stem, f) for f in sorted(members_dir.glob("*.mini"))]
        member_ids = set()
        for attempt_id, path in entries:
            text = path.read_text()
            try:
                entry = parse_attempt(text, attempt_id)
            except Exception as exc:
                raise StoreError(f"{path}: cannot parse stored attempt: {exc}")
            c.programs[attempt_id] = entry
            member_ids.add(attempt_id)
        c.reps.append(rep)
        c.members[rep] = member_ids
    return c
