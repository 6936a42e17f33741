import json
import shutil
import threading
import urllib.error
import urllib.request
from pathlib import Path

import pytest

from tracemend.service import make_server

from conftest import PROBLEMS


@pytest.fixture(scope="module")
def server(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc_problems")
    shutil.copytree(PROBLEMS / "derivative", root / "derivative")
    from tracemend.cli import cmd_cluster
    import io

    cmd_cluster(root / "derivative", root / "derivative" / "attempts",
                out=io.StringIO())
    srv = make_server(root, port=0, data_dir=tmp_path_factory.mktemp("svc_data"))
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    host, port = srv.server_address[:2]
    yield f"http://{host}:{port}", srv
    srv.shutdown()


def _request(base, method, path, payload=None):
    data = json.dumps(payload).encode() if payload is not None else None
    req = urllib.request.Request(base + path, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req) as resp:
            body = resp.read()
            return resp.status, json.loads(body) if body else None
    except urllib.error.HTTPError as err:
        body = err.read()
        return err.code, json.loads(body) if body else None


I1_SOURCE = (PROBLEMS / "derivative" / "attempts" / "i1.mini").read_text()
C2_SOURCE = (PROBLEMS / "derivative" / "attempts" / "c2.mini").read_text()


def test_list_problems(server):
    base, _ = server
    status, body = _request(base, "GET", "/problems")
    assert status == 200
    assert body == [{"id": "derivative",
                     "statement": body[0]["statement"]}]
    assert "derivative" in body[0]["statement"].lower() or body[0]["statement"]


def test_incorrect_attempt_gets_feedback(server):
    base, _ = server
    status, body = _request(base, "POST", "/problems/derivative/attempts",
                            {"source": I1_SOURCE})
    assert status == 200
    assert body["status"] == "feedback"
    items = body["feedback"]["items"]
    assert len(items) == 1
    assert items[0]["line"] == 3
    assert "+" in items[0]["message"] and "-" in items[0]["message"]
    assert body["elapsed_ms"] >= 0
    assert body["attempt_id"]


def test_correct_attempt(server):
    base, _ = server
    status, body = _request(base, "POST", "/problems/derivative/attempts",
                            {"source": C2_SOURCE})
    assert status == 200
    assert body["status"] == "correct"
    assert "feedback" not in body


def test_gibberish_is_422(server):
    base, _ = server
    status, body = _request(base, "POST", "/problems/derivative/attempts",
                            {"source": "def broken(:\n"})
    assert status == 422
    assert body["line"] == 1
    assert "col" in body


def test_unknown_problem_404(server):
    base, _ = server
    status, _ = _request(base, "POST", "/problems/nope/attempts",
                         {"source": I1_SOURCE})
    assert status == 404


def test_grade_flow(server):
    base, srv = server
    _, body = _request(base, "POST", "/problems/derivative/attempts",
                       {"source": I1_SOURCE})
    attempt_id = body["attempt_id"]
    status, _ = _request(base, "POST", f"/attempts/{attempt_id}/grade",
                         {"grade": 5, "comment": "helpful"})
    assert status == 204
    # persisted append-only
    log = srv.service.data_dir / "derivative.jsonl"
    records = [json.loads(line) for line in log.read_text().splitlines()]
    grades = [r for r in records if r.get("type") == "grade"
              and r["attempt_id"] == attempt_id]
    assert grades and grades[0]["grade"] == 5


def test_grade_out_of_range(server):
    base, _ = server
    _, body = _request(base, "POST", "/problems/derivative/attempts",
                       {"source": I1_SOURCE})
    status, _ = _request(base, "POST", f"/attempts/{body['attempt_id']}/grade",
                         {"grade": 0})
    assert status == 400
    status, _ = _request(base, "POST", f"/attempts/{body['attempt_id']}/grade",
                         {"grade": "five"})
    assert status == 400


def test_grade_on_correct_attempt_rejected(server):
    base, _ = server
    _, body = _request(base, "POST", "/problems/derivative/attempts",
                       {"source": C2_SOURCE})
    status, _ = _request(base, "POST", f"/attempts/{body['attempt_id']}/grade",
                         {"grade": 3})
    assert status == 404


def test_grade_unknown_attempt(server):
    base, _ = server
    status, _ = _request(base, "POST", "/attempts/doesnotexist/grade",
                         {"grade": 3})
    assert status == 404


def test_oversized_comment_rejected(server):
    base, _ = server
    _, body = _request(base, "POST", "/problems/derivative/attempts",
                       {"source": I1_SOURCE})
    status, _ = _request(base, "POST", f"/attempts/{body['attempt_id']}/grade",
                         {"grade": 4, "comment": "x" * 3000})
    assert status == 400


def test_feedback_is_reproducible(server):
    """Engine purity: the same source yields identical feedback records."""
    base, _ = server
    _, a = _request(base, "POST", "/problems/derivative/attempts",
                    {"source": I1_SOURCE})
    _, b = _request(base, "POST", "/problems/derivative/attempts",
                    {"source": I1_SOURCE})
    assert a["feedback"] == b["feedback"]


def test_attempt_log_appends(server):
    base, srv = server
    log = srv.service.data_dir / "derivative.jsonl"
    before = len(log.read_text().splitlines())
    _request(base, "POST", "/problems/derivative/attempts",
             {"source": C2_SOURCE})
    after = len(log.read_text().splitlines())
    assert after == before + 1


def test_cors_headers(server):
    base, _ = server
    req = urllib.request.Request(base + "/problems", method="OPTIONS")
    with urllib.request.urlopen(req) as resp:
        assert resp.status == 204
        assert resp.headers["Access-Control-Allow-Origin"] == "*"
