import io
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from tracemend.cli import (
    EXIT_NO_MATCH,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_TIMEOUT,
    cmd_cluster,
    cmd_eval,
    cmd_repair,
    main,
)
from tracemend.store import StoreError, load_problem, load_store

from conftest import PROBLEMS


@pytest.fixture()
def scratch(tmp_path):
    """Fresh copy of the derivative problem."""
    target = tmp_path / "derivative"
    shutil.copytree(PROBLEMS / "derivative", target)
    return target


def test_cmd_cluster_counts(scratch):
    counts = cmd_cluster(scratch, scratch / "attempts", out=io.StringIO())
    assert counts == {"N": 5, "NC": 3, "S": 2}
    store = load_store(scratch)
    assert store.reps == ["c1", "c3"]
    assert store.members["c1"] == {"c1", "c2"}


def test_cmd_cluster_warns_on_unparseable(scratch, capsys):
    (scratch / "attempts" / "zz_bad.mini").write_text("def broken(:\n")
    counts = cmd_cluster(scratch, scratch / "attempts", out=io.StringIO())
    assert counts["N"] == 6 and counts["NC"] == 3
    assert "zz_bad" in capsys.readouterr().err


def test_cmd_cluster_empty_dir(scratch, tmp_path):
    empty = tmp_path / "none"
    empty.mkdir()
    counts = cmd_cluster(scratch, empty, out=io.StringIO())
    assert counts == {"N": 0, "NC": 0, "S": 0}


def test_cmd_repair_i1(scratch):
    cmd_cluster(scratch, scratch / "attempts", out=io.StringIO())
    out = io.StringIO()
    code = cmd_repair(scratch, scratch / "attempts" / "i1.mini", out=out)
    assert code == EXIT_OK
    text = out.getvalue()
    assert "total cost 1" in text
    assert "Change + to - in the loop condition at line 3." in text


def test_cmd_repair_member_is_free(scratch):
    cmd_cluster(scratch, scratch / "attempts", out=io.StringIO())
    out = io.StringIO()
    code = cmd_repair(scratch, scratch / "attempts" / "c2.mini", out=out)
    assert code == EXIT_OK
    assert "total cost 0" in out.getvalue()


def test_cmd_repair_parse_error(scratch, tmp_path):
    cmd_cluster(scratch, scratch / "attempts", out=io.StringIO())
    bad = tmp_path / "bad.mini"
    bad.write_text("def f(poly):\n    y = poly.size()\n    return y\n")
    assert cmd_repair(scratch, bad) == EXIT_PARSE


def test_cmd_repair_no_structure_match(scratch, tmp_path):
    cmd_cluster(scratch, scratch / "attempts", out=io.StringIO())
    stranger = tmp_path / "stranger.mini"
    stranger.write_text(
        "def computeDeriv(poly):\n"
        "    a = 0\n"
        "    while a < len(poly):\n"
        "        a = a + 1\n"
        "    b = 0\n"
        "    while b < a:\n"
        "        b = b + 1\n"
        "    return [0.0]\n")
    assert cmd_repair(scratch, stranger) == EXIT_NO_MATCH


def test_cmd_repair_json_round_trips(scratch):
    cmd_cluster(scratch, scratch / "attempts", out=io.StringIO())
    out = io.StringIO()
    code = cmd_repair(scratch, scratch / "attempts" / "i2.mini",
                      as_json=True, out=out)
    assert code == EXIT_OK
    record = json.loads(out.getvalue())
    assert record["status"] == "repaired"
    assert record["spec_id"] == "c1"
    assert record["total_cost"] == 9
    assert len(record["modifications"]) == 2
    assert record["feedback"]["items"][0]["line"] == 9
    assert json.loads(json.dumps(record)) == record


def test_cmd_eval_row(scratch):
    cmd_cluster(scratch, scratch / "attempts", out=io.StringIO())
    row = cmd_eval(scratch, scratch / "attempts", out=io.StringIO())
    assert row["N"] == 5
    assert row["NC"] == 3
    assert row["S"] == 2
    assert row["NI"] == 2
    assert row["R"] == 2
    assert row["RC"] == 1  # I2's statement insertion; I1's is a plain edit
    assert row["TA"] >= 0 and row["TM"] >= 0


def test_cmd_eval_only_correct_attempts(scratch, tmp_path):
    cmd_cluster(scratch, scratch / "attempts", out=io.StringIO())
    only_correct = tmp_path / "correct"
    only_correct.mkdir()
    for name in ("c1", "c2", "c3"):
        shutil.copy(scratch / "attempts" / f"{name}.mini", only_correct)
    row = cmd_eval(scratch, only_correct, out=io.StringIO())
    assert row["NI"] == 0 and row["R"] == 0


def test_cmd_eval_requires_store(scratch):
    with pytest.raises(StoreError):
        cmd_eval(scratch, scratch / "attempts", out=io.StringIO())


def test_cmd_eval_jobs_flag(scratch):
    cmd_cluster(scratch, scratch / "attempts", out=io.StringIO())
    row = cmd_eval(scratch, scratch / "attempts", jobs=2, out=io.StringIO())
    assert row["R"] == 2


def test_main_exit_codes(scratch):
    assert main(["cluster", str(scratch), str(scratch / "attempts")]) == 0
    assert main(["repair", str(scratch),
                 str(scratch / "attempts" / "i1.mini")]) == EXIT_OK


def test_console_script_installed():
    proc = subprocess.run([sys.executable, "-m", "tracemend.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "cluster" in proc.stdout and "repair" in proc.stdout
