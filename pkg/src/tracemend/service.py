"""HTTP facade for the playground.

Endpoints (JSON over HTTP/1.1, CORS open):

    GET  /problems                      -> [{id, statement}]
    POST /problems/{id}/attempts        {source} ->
         {status: correct|feedback|no_feedback, feedback?, attempt_id,
          elapsed_ms, reason?}
    POST /attempts/{id}/grade           {grade: 1..5, comment?} -> 204

Attempts and grades append to one newline-delimited JSON log per problem;
replaying the log reproduces the same feedback because the engine is pure.
Correct attempts can grow the cluster store when the problem opts in
(off by default: a student's later correct attempt must not become the
reference that repairs their earlier one).
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Dict, Optional

from .clustering import Clustering, add_attempt
from .feedback import render
from .lower import LoweringError
from .minilang import ParseError
from .repair import repair_best
from .store import (
    ProblemConfig,
    StoreError,
    is_correct,
    load_problem,
    load_store,
    parse_attempt,
    save_store,
)

MAX_COMMENT_BYTES = 2048


@dataclass
class _ProblemState:
    config: ProblemConfig
    clustering: Clustering
    lock: threading.Lock = field(default_factory=threading.Lock)


class PlaygroundService:
    """Problem registry, engine calls, and the append-only attempt log."""

    def __init__(self, problems_root, data_dir=None):
        self.root = Path(problems_root)
        self.data_dir = Path(data_dir) if data_dir else self.root / "_data"
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.problems: Dict[str, _ProblemState] = {}
        self.attempts: Dict[str, dict] = {}  # attempt_id -> {problem, status}
        self._discover()
        self._replay_logs()

    def _discover(self):
        for cfg in sorted(self.root.glob("*/problem.toml")):
            problem_dir = cfg.parent
            config = load_problem(problem_dir)
            clustering = load_store(problem_dir)
            self.problems[config.problem_id] = _ProblemState(config, clustering)

    def _log_path(self, problem_id: str) -> Path:
        return self.data_dir / f"{problem_id}.jsonl"

    def _replay_logs(self):
        for problem_id in self.problems:
            path = self._log_path(problem_id)
            if not path.is_file():
                continue
            with open(path) as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    record = json.loads(line)
                    if record.get("type") == "attempt":
                        self.attempts[record["attempt_id"]] = {
                            "problem": problem_id,
                            "status": record["status"],
                        }

    def _append(self, problem_id: str, record: dict):
        line = json.dumps(record, sort_keys=True)
        with open(self._log_path(problem_id), "a") as fh:
            fh.write(line + "\n")

    # -- API operations

    def list_problems(self):
        return [
            {"id": pid, "statement": st.config.statement}
            for pid, st in sorted(self.problems.items())
        ]

    def submit_attempt(self, problem_id: str, source: str) -> dict:
        state = self.problems.get(problem_id)
        if state is None:
            raise ApiError(404, f"unknown problem {problem_id!r}")
        started = time.monotonic()
        try:
            entry = parse_attempt(source, f"attempt-{uuid.uuid4().hex[:12]}")
        except (ParseError, LoweringError) as exc:
            detail = {"error": str(exc)}
            if isinstance(exc, ParseError):
                detail["line"] = exc.line
                detail["col"] = exc.col
            elif isinstance(exc, LoweringError):
                detail["line"] = exc.line
            raise ApiError(422, "attempt does not parse", detail)
        config = state.config
        if set(entry.program.params) != set(config.params):
            raise ApiError(422, "attempt does not parse", {
                "error": f"parameters {list(entry.program.params)} do not match "
                         f"the problem's {config.params}",
                "line": 1, "col": 1,
            })
        attempt_id = entry.id
        if is_correct(entry.program, config):
            if config.grow_store:
                with state.lock:
                    try:
                        state.clustering = add_attempt(
                            state.clustering, entry, config.inputs,
                            config.step_limit)
                        save_store(state.clustering, config.root)
                    except Exception:
                        pass  # growth is best-effort; the attempt is recorded
            response = {
                "status": "correct",
                "attempt_id": attempt_id,
                "elapsed_ms": _ms(started),
            }
            self._record_attempt(problem_id, source, response)
            return response
        specs = [(e.id, e.program) for e in state.clustering.rep_programs()]
        best = repair_best(specs, entry.program, config.inputs,
                           budget=config.timeout_s,
                           step_limit=config.step_limit)
        fb = render(best.result, entry.program, config.fallback_text,
                    config.cost_fallback_threshold)
        if fb.items:
            response = {
                "status": "feedback",
                "attempt_id": attempt_id,
                "elapsed_ms": _ms(started),
                "feedback": fb.to_record(),
            }
        else:
            if best.timed_out:
                reason = "timeout"
            elif best.result is None:
                reason = "no_match"
            else:
                reason = "cost_threshold"
            response = {
                "status": "no_feedback",
                "attempt_id": attempt_id,
                "elapsed_ms": _ms(started),
                "reason": reason,
                "feedback": fb.to_record(),
            }
        self._record_attempt(problem_id, source, response)
        return response

    def _record_attempt(self, problem_id: str, source: str, response: dict):
        state = self.problems[problem_id]
        with state.lock:
            self._append(problem_id, {
                "type": "attempt",
                "ts": time.time(),
                "source": source,
                **response,
            })
        self.attempts[response["attempt_id"]] = {
            "problem": problem_id,
            "status": response["status"],
        }

    def grade_attempt(self, attempt_id: str, grade, comment: Optional[str]):
        info = self.attempts.get(attempt_id)
        if info is None:
            raise ApiError(404, f"unknown attempt {attempt_id!r}")
        if info["status"] not in ("feedback", "no_feedback"):
            raise ApiError(404, "attempt had no feedback to grade")
        if not isinstance(grade, int) or isinstance(grade, bool) \
                or not 1 <= grade <= 5:
            raise ApiError(400, "grade must be an integer between 1 and 5")
        if comment is not None and len(comment.encode()) > MAX_COMMENT_BYTES:
            raise ApiError(400, "comment too long")
        state = self.problems[info["problem"]]
        with state.lock:
            self._append(info["problem"], {
                "type": "grade",
                "ts": time.time(),
                "attempt_id": attempt_id,
                "grade": grade,
                "comment": comment,
            })


class ApiError(Exception):
    def __init__(self, status: int, message: str, detail: Optional[dict] = None):
        super().__init__(message)
        self.status = status
        self.message = message
        self.detail = detail or {}


def _ms(started: float) -> int:
    return int((time.monotonic() - started) * 1000)


class _Handler(BaseHTTPRequestHandler):
    service: PlaygroundService = None  # set by make_server
    protocol_version = "HTTP/1.1"

    # -- plumbing

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, payload=None):
        body = b""
        if payload is not None:
            body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        if payload is not None:
            self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if body:
            self.wfile.write(body)

    def _read_json(self):
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise ApiError(400, "empty request body")
        try:
            data = json.loads(raw)
        except json.JSONDecodeError:
            raise ApiError(400, "request body is not valid JSON")
        if not isinstance(data, dict):
            raise ApiError(400, "request body must be a JSON object")
        return data

    # -- routing

    def do_OPTIONS(self):
        self._send(204)

    def do_GET(self):
        try:
            if self.path.rstrip("/") in ("", "/problems"):
                self._send(200, self.service.list_problems())
                return
            raise ApiError(404, "not found")
        except ApiError as exc:
            self._send(exc.status, {"error": exc.message, **exc.detail})

    def do_POST(self):
        try:
            parts = [p for p in self.path.split("/") if p]
            if len(parts) == 3 and parts[0] == "problems" and parts[2] == "attempts":
                data = self._read_json()
                source = data.get("source")
                if not isinstance(source, str):
                    raise ApiError(400, "missing string field 'source'")
                try:
                    response = self.service.submit_attempt(parts[1], source)
                except ApiError:
                    raise
                except Exception as exc:
                    raise ApiError(503, f"engine failure: {exc}")
                self._send(200, response)
                return
            if len(parts) == 3 and parts[0] == "attempts" and parts[2] == "grade":
                data = self._read_json()
                self.service.grade_attempt(parts[1], data.get("grade"),
                                           data.get("comment"))
                self._send(204)
                return
            raise ApiError(404, "not found")
        except ApiError as exc:
            self._send(exc.status, {"error": exc.message, **exc.detail})


def make_server(problems_root, port: int = 0,
                data_dir=None) -> ThreadingHTTPServer:
    service = PlaygroundService(problems_root, data_dir)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer(("127.0.0.1", port), handler)
    server.service = service
    return server


def serve_forever(problems_root, port: int = 8000, data_dir=None):
    server = make_server(problems_root, port=port, data_dir=data_dir)
    host, actual_port = server.server_address[:2]
    print(f"playground API listening on http://{host}:{actual_port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
