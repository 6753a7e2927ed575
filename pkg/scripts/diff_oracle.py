#!/usr/bin/env python3
"""Cross-check `sct check` against `sct oracle` on a generated corpus.

Writes each corpus process to a temporary file, runs both subcommands in a
subprocess with `--format json`, and prints one JSON object summarizing the
verdicts and every disagreement to stdout.

Usage:
    python scripts/diff_oracle.py [--count 200] [--seed 0]

Exit codes:
    0 - the checkers agree on every case
    1 - at least one disagreement (listed in the JSON)
    2 - environment error (a subprocess could not be started or printed no JSON)
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import tempfile
from pathlib import Path
from typing import Dict, List, Optional

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from sessions.corpus import CorpusCase, CorpusGenerator
from sessions.processes import format_process

CLI = Path(__file__).parent.parent / "src" / "sessions" / "session_cli.py"


def run_cli(command: str, case: CorpusCase, process_path: str) -> Optional[str]:
    """Run one subcommand and return its verdict ("accept", "reject" or "error")."""
    cmd = [
        sys.executable, str(CLI), "--format", "json", "--no-ambient-bools",
        command, "--context", case.context_text, process_path,
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if not proc.stdout.strip():
        return None
    return json.loads(proc.stdout).get("verdict")


def compare(cases: List[CorpusCase], workdir: str) -> Dict:
    summary = {"cases": 0, "accepted": 0, "rejected": 0, "errors": 0, "disagreements": 0}
    disagreements: List[Dict] = []

    for index, case in enumerate(cases):
        path = os.path.join(workdir, f"case{index}.proc")
        with open(path, "w", encoding="utf-8") as f:
            f.write(format_process(case.process))

        algorithmic = run_cli("check", case, path)
        declarative = run_cli("oracle", case, path)
        if algorithmic is None or declarative is None:
            raise RuntimeError(f"no JSON output for case {index}")

        summary["cases"] += 1
        if "error" in (algorithmic, declarative):
            summary["errors"] += 1
        elif algorithmic == "accept":
            summary["accepted"] += 1
        else:
            summary["rejected"] += 1

        if algorithmic != declarative:
            summary["disagreements"] += 1
            entry = case.to_dict()
            entry.update({"check": algorithmic, "oracle": declarative})
            disagreements.append(entry)

    return {"summary": summary, "disagreements": disagreements}


def main() -> int:
    parser = argparse.ArgumentParser(description="Compare sct check with sct oracle")
    parser.add_argument("--count", type=int, default=200, help="Number of corpus cases")
    parser.add_argument("--seed", type=int, default=0, help="Corpus seed")
    args = parser.parse_args()

    cases = CorpusGenerator(seed=args.seed).generate(args.count)
    with tempfile.TemporaryDirectory() as tmpdir:
        try:
            result = compare(cases, tmpdir)
        except (OSError, RuntimeError, json.JSONDecodeError) as e:
            payload = {"error": "execution_failed", "detail": str(e)}
            print(json.dumps(payload, ensure_ascii=False))
            return 2

    print(json.dumps(result, ensure_ascii=False, indent=2))
    return 0 if result["summary"]["disagreements"] == 0 else 1


if __name__ == "__main__":
    raise SystemExit(main())
