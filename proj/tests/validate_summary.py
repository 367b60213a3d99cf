#!/usr/bin/env python3
"""Runs plmc on each COMMAND:CONFIG pair and validates the summary JSON."""
import json
import pathlib
import subprocess
import sys

import jsonschema


def main():
    if len(sys.argv) < 5:
        sys.exit("usage: validate_summary.py SCHEMA PLMC OUTDIR COMMAND:CONFIG...")
    schema = json.loads(pathlib.Path(sys.argv[1]).read_text())
    plmc, outdir = sys.argv[2], pathlib.Path(sys.argv[3])
    validator = jsonschema.Draft202012Validator(schema)
    failed = False
    for job in sys.argv[4:]:
        command, config = job.split(":", 1)
        run_dir = outdir / f"{command}_{pathlib.Path(config).stem}"
        run_dir.mkdir(parents=True, exist_ok=True)
        for old in run_dir.glob("*.summary.json"):
            old.unlink()
        proc = subprocess.run([plmc, command, config, "--output-dir", str(run_dir)],
                              capture_output=True, text=True)
        summaries = list(run_dir.glob("*.summary.json"))
        if len(summaries) != 1:
            print(f"[FAIL] {job}: expected one summary, found {len(summaries)}"
                  f" (exit {proc.returncode}): {proc.stderr.strip()}")
            failed = True
            continue
        summary = json.loads(summaries[0].read_text())
        errors = [e.message for e in validator.iter_errors(summary)]
        expected_exit = 0 if summary.get("status") == "pass" else 1
        if proc.returncode != expected_exit:
            errors.append(f"exit code {proc.returncode} disagrees with status"
                          f" {summary.get('status')!r}")
        if summary.get("command") != command:
            errors.append(f"command field {summary.get('command')!r}")
        status = "FAIL" if errors else "PASS"
        print(f"[{status}] {job}: {summaries[0].name}")
        for e in errors:
            print(f"    {e}")
        failed = failed or bool(errors)
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
