"""Batch command line: build cluster stores, repair single attempts, produce
corpus statistics, and serve the HTTP playground API.

Exit codes of ``repair``: 0 repaired, 2 no structure match against any
representative, 3 timeout, 4 parse error.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .clustering import CorpusError, cluster
from .feedback import render
from .lower import LoweringError, format_expr
from .minilang import ParseError
from .repair import BestRepair, RepairResult, repair_best
from .store import (
    ProblemConfig,
    StoreError,
    is_correct,
    load_problem,
    load_store,
    parse_attempt,
    save_store,
)

EXIT_OK = 0
EXIT_NO_MATCH = 2
EXIT_TIMEOUT = 3
EXIT_PARSE = 4


def _load_attempt_files(attempts_dir: Path):
    if not attempts_dir.is_dir():
        raise StoreError(f"not a directory: {attempts_dir}")
    return sorted(attempts_dir.glob("*.mini"))


def _parse_corpus(files, config: ProblemConfig):
    """(parsed entries, warnings).  Parse failures are reported, not fatal."""
    entries = []
    warnings = []
    for path in files:
        try:
            entry = parse_attempt(path.read_text(), path.stem)
        except (ParseError, LoweringError) as exc:
            warnings.append(f"warning: {path.name}: {exc}")
            continue
        if set(entry.program.params) != set(config.params):
            warnings.append(
                f"warning: {path.name}: parameters {list(entry.program.params)} "
                f"do not match the problem's {config.params}")
            continue
        entries.append(entry)
    return entries, warnings


def cmd_cluster(problem_dir: str, attempts_dir: str, out=sys.stdout) -> dict:
    """Filter correct attempts, cluster them, write the store."""
    config = load_problem(problem_dir)
    files = _load_attempt_files(Path(attempts_dir))
    entries, warnings = _parse_corpus(files, config)
    for w in warnings:
        print(w, file=sys.stderr)
    correct = [e for e in entries if is_correct(e.program, config)]
    clustering = cluster(correct, config.inputs, config.step_limit)
    save_store(clustering, config.root)
    counts = {
        "N": len(files),
        "NC": len(correct),
        "S": clustering.cluster_count(),
    }
    print(f"problem={config.problem_id} NC={counts['NC']} S={counts['S']}",
          file=out)
    return counts


def repair_result_record(best: BestRepair, config: ProblemConfig,
                         impl, elapsed_s: float) -> dict:
    result = best.result
    fb = render(result, impl, config.fallback_text,
                config.cost_fallback_threshold)
    record = {
        "status": "repaired" if result else ("timeout" if best.timed_out
                                             else "no_match"),
        "elapsed_s": round(elapsed_s, 2),
        "feedback": fb.to_record(),
    }
    if result:
        record.update({
            "spec_id": result.spec_id,
            "total_cost": result.total_cost,
            "mapping": dict(sorted(result.pi.items())),
            "reordered": result.reordered,
            "modifications": [
                {
                    "location": m.impl_loc,
                    "variable": m.impl_var,
                    "old": format_expr(m.old_expr),
                    "new": None if m.is_deletion else format_expr(m.new_expr),
                    "deleted": m.is_deletion,
                    "cost": m.cost,
                }
                for m in result.mods
            ],
        })
    return record


def cmd_repair(problem_dir: str, attempt_file: str, timeout: float = None,
               as_json: bool = False, out=sys.stdout) -> int:
    config = load_problem(problem_dir)
    clustering = load_store(config.root)
    budget = timeout if timeout is not None else config.timeout_s
    path = Path(attempt_file)
    try:
        entry = parse_attempt(path.read_text(), path.stem)
    except (ParseError, LoweringError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if set(entry.program.params) != set(config.params):
        print(f"parse error: parameters {list(entry.program.params)} do not "
              f"match the problem's {config.params}", file=sys.stderr)
        return EXIT_PARSE
    specs = [(e.id, e.program) for e in clustering.rep_programs()]
    start = time.monotonic()
    best = repair_best(specs, entry.program, config.inputs, budget=budget,
                       step_limit=config.step_limit)
    elapsed = time.monotonic() - start
    if as_json:
        print(json.dumps(repair_result_record(best, config, entry.program,
                                              elapsed), indent=2), file=out)
    if best.result is None:
        if not as_json:
            reason = "timeout" if best.timed_out else "no structure match"
            print(f"no repair: {reason} (elapsed {elapsed:.2f}s)", file=out)
        return EXIT_TIMEOUT if best.timed_out else EXIT_NO_MATCH
    result = best.result
    if not as_json:
        print(f"repaired against {result.spec_id} with total cost "
              f"{result.total_cost} in {elapsed:.2f}s", file=out)
        for m in result.mods:
            new = "DELETED" if m.is_deletion else format_expr(m.new_expr)
            print(f"  location {m.impl_loc}, {m.impl_var}: "
                  f"{format_expr(m.old_expr)} -> {new} (cost {m.cost})",
                  file=out)
        fb = render(result, entry.program, config.fallback_text,
                    config.cost_fallback_threshold)
        for item in fb.items:
            print(f"  feedback: {item.message}", file=out)
    return EXIT_OK


def cmd_eval(problem_dir: str, attempts_dir: str, jobs: int = 1,
             timeout: float = None, out=sys.stdout) -> dict:
    """Corpus statistics: N, NC, S, NI, R, RC, TA, TM."""
    config = load_problem(problem_dir)
    clustering = load_store(config.root)
    if not clustering.reps:
        raise StoreError(
            f"no cluster store in {config.root}; run the cluster command first")
    budget = timeout if timeout is not None else config.timeout_s
    files = _load_attempt_files(Path(attempts_dir))
    entries, warnings = _parse_corpus(files, config)
    for w in warnings:
        print(w, file=sys.stderr)
    correct = []
    incorrect = []
    for e in entries:
        (correct if is_correct(e.program, config) else incorrect).append(e)
    specs = [(e.id, e.program) for e in clustering.rep_programs()]

    def one(entry):
        start = time.monotonic()
        best = repair_best(specs, entry.program, config.inputs, budget=budget,
                           step_limit=config.step_limit)
        return entry.id, best, time.monotonic() - start

    if jobs > 1 and len(incorrect) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, incorrect))
    else:
        results = [one(e) for e in incorrect]
    results.sort(key=lambda r: r[0])

    repaired = [(rid, b, t) for rid, b, t in results if b.result is not None]
    complicated = [
        rid for rid, b, _ in repaired
        if b.result.inserts or b.result.reordered
    ]
    times = [t for _, _, t in repaired]
    row = {
        "N": len(files),
        "NC": len(correct),
        "S": clustering.cluster_count(),
        "NI": len(incorrect),
        "R": len(repaired),
        "RC": len(complicated),
        "TA": round(sum(times) / len(times), 2) if times else 0.0,
        "TM": round(statistics.median(times), 2) if times else 0.0,
    }
    header = f"{'problem':<16}" + "".join(f"{k:>8}" for k in row)
    values = f"{config.problem_id:<16}" + "".join(
        f"{row[k]:>8.2f}" if k in ("TA", "TM") else f"{row[k]:>8}" for k in row)
    print(header, file=out)
    print(values, file=out)
    return row


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tracemend",
        description="Cluster correct attempts and repair incorrect ones.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_cluster = sub.add_parser("cluster", help="build the cluster store")
    p_cluster.add_argument("problem_dir")
    p_cluster.add_argument("attempts_dir")

    p_repair = sub.add_parser("repair", help="repair one attempt")
    p_repair.add_argument("problem_dir")
    p_repair.add_argument("attempt_file")
    p_repair.add_argument("--timeout", type=float, default=None,
                          help="repair budget in seconds (default: problem "
                               "config, 60s)")
    p_repair.add_argument("--json", action="store_true", dest="as_json")

    p_eval = sub.add_parser("eval", help="corpus statistics table")
    p_eval.add_argument("problem_dir")
    p_eval.add_argument("attempts_dir")
    p_eval.add_argument("--jobs", type=int, default=1)
    p_eval.add_argument("--timeout", type=float, default=None)

    p_serve = sub.add_parser("serve", help="run the playground HTTP service")
    p_serve.add_argument("problems_root")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--data", default=None,
                         help="attempt log directory (default: <root>/_data)")

    args = parser.parse_args(argv)
    try:
        if args.command == "cluster":
            cmd_cluster(args.problem_dir, args.attempts_dir)
            return EXIT_OK
        if args.command == "repair":
            return cmd_repair(args.problem_dir, args.attempt_file,
                              timeout=args.timeout, as_json=args.as_json)
        if args.command == "eval":
            cmd_eval(args.problem_dir, args.attempts_dir, jobs=args.jobs,
                     timeout=args.timeout)
            return EXIT_OK
        if args.command == "serve":
            from .service import serve_forever
            serve_forever(args.problems_root, port=args.port,
                          data_dir=args.data)
            return EXIT_OK
    except (StoreError, CorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
