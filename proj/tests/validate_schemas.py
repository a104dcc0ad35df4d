#!/usr/bin/env python3
"""Run every shipped config through the CLI and validate the reports.

usage: validate_schemas.py <cli> <schemas dir> <configs dir>

Config files are named <command>.<name>.json.
"""
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema


def main():
    cli, schema_dir, config_dir = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
    schemas = {}
    for path in sorted(schema_dir.glob("*.schema.json")):
        schema = json.loads(path.read_text())
        jsonschema.Draft202012Validator.check_schema(schema)
        schemas[path.name[: -len(".schema.json")]] = jsonschema.Draft202012Validator(schema)

    failures = 0
    configs = sorted(config_dir.glob("*.json"))
    if not configs:
        print("no configs found")
        return 1
    with tempfile.TemporaryDirectory() as tmp:
        for config in configs:
            command = config.name.split(".")[0]
            out = pathlib.Path(tmp) / (config.stem + ".report.json")
            proc = subprocess.run([cli, "--config", str(config), "--output", str(out), command],
                                  capture_output=True, text=True)
            if proc.returncode != 0:
                print(f"FAIL {config.name}: exit {proc.returncode}: {proc.stderr.strip()}")
                failures += 1
                continue
            report = json.loads(out.read_text())
            errors = sorted(schemas[command].iter_errors(report), key=lambda e: list(e.path))
            if errors:
                failures += 1
                for e in errors[:5]:
                    print(f"FAIL {config.name}: {'/'.join(map(str, e.path))}: {e.message}")
            else:
                print(f"ok   {config.name}")

        # Unknown configuration keys are rejected before any work is done.
        bad = pathlib.Path(tmp) / "bad.json"
        bad.write_text(json.dumps({"dgp": "mundlak-linear", "reps": 1, "unknown_key": 1}))
        proc = subprocess.run([cli, "--config", str(bad), "--output", str(pathlib.Path(tmp) / "x.json"), "simulate"],
                              capture_output=True, text=True)
        if proc.returncode != 1 or "unknown_key" not in proc.stderr:
            print(f"FAIL unknown key: exit {proc.returncode}: {proc.stderr.strip()}")
            failures += 1
        else:
            print("ok   unknown key rejected")

    print(f"{failures} failure(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
