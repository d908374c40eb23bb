"""Smoke test of the Python bindings and of the CLI summary format.

    pip install --no-build-isolation -e crates/py
    python python/smoke_test.py [path/to/focal]

The CLI part is skipped when no `focal` binary is found.
"""

import csv
import io
import json
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

import jsonschema

import finsler_focal_py as ff

ROOT = pathlib.Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"


def scenario(name):
    return (SCENARIOS / f"{name}.toml").read_text()


def check_bindings():
    circle = scenario("circle")
    (lam,) = ff.focal_times(circle, [0.3], 1)
    assert abs(lam - 1.0) < 1e-6, lam
    d = ff.distance(circle, [0.3, 0.0])
    assert abs(d - 0.7) < 1e-9, d

    focal, lambdas = ff.focal_scan(circle)
    rows = list(csv.DictReader(io.StringIO(focal)))
    assert len(rows) == 360
    assert all(abs(float(r["time"]) - 1.0) < 1e-6 for r in rows)
    assert len(list(csv.DictReader(io.StringIO(lambdas)))) == 360

    line = scenario("line")
    focal, _ = ff.focal_scan(line)
    assert list(csv.DictReader(io.StringIO(focal))) == []

    report = json.loads(ff.verify(circle, "adjoint"))
    assert report["status"] == "pass", report

    try:
        ff.focal_scan("name = 'x'\n[metric]\nkind = 'nope'\n")
    except ValueError:
        pass
    else:
        raise AssertionError("invalid scenario accepted")

    schema = json.loads(ff.scenario_schema())
    jsonschema.Draft202012Validator.check_schema(schema)
    print(f"bindings ok (version {ff.__version__})")


def check_cli(binary):
    schema = json.loads((ROOT / "docs" / "summary.schema.json").read_text())
    with tempfile.TemporaryDirectory() as out:
        subprocess.run(
            [binary, "focal-scan", "--scenario", str(SCENARIOS / "circle.toml"), "--out", out],
            check=True,
        )
        summary = json.loads((pathlib.Path(out) / "focal_summary.json").read_text())
        jsonschema.validate(summary, schema)
        assert summary["results"]["focal_records"] == 360
        for name in summary["files"]:
            assert (pathlib.Path(out) / name).is_file(), name
        rows = list(csv.DictReader(open(pathlib.Path(out) / "focal.csv")))
        assert all(math.isfinite(float(r["x0"])) for r in rows)
    print("cli ok")


def main():
    check_bindings()
    binary = sys.argv[1] if len(sys.argv) > 1 else None
    if binary is None:
        for p in (ROOT / "target" / "release" / "focal", ROOT / "target" / "debug" / "focal"):
            if p.is_file():
                binary = str(p)
                break
    binary = binary or shutil.which("focal")
    if binary is None:
        print("cli skipped: no focal binary")
    else:
        check_cli(binary)


if __name__ == "__main__":
    main()
