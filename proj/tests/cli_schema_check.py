"""Runs the cavlab CLI on small inputs and validates every report.

usage: cli_schema_check.py <cavlab binary> <source dir> <scratch dir>
"""

import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import jsonschema
from referencing import Registry, Resource

CLI, SRC, SCRATCH = Path(sys.argv[1]), Path(sys.argv[2]), Path(sys.argv[3])
failures = []


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def run(*args):
    return subprocess.run([str(CLI), *map(str, args)], capture_output=True, text=True)


def load(p):
    with open(p) as f:
        return json.load(f)


weight_schema = load(SRC / "docs" / "weight_spec.schema.json")
summary_schema = load(SRC / "docs" / "summary.schema.json")
registry = Registry().with_resources(
    [(s["$id"], Resource.from_contents(s)) for s in (weight_schema, summary_schema)]
    + [("weight_spec.schema.json", Resource.from_contents(weight_schema))]
)
summary_validator = jsonschema.Draft202012Validator(summary_schema, registry=registry)
weight_validator = jsonschema.Draft202012Validator(weight_schema, registry=registry)


def valid(validator, doc, what):
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    for e in errors[:5]:
        print("    ", list(e.path), e.message)
    check(not errors, what)


def read_dump(p):
    lines = Path(p).read_text().split("\n")
    head = lines[0].split()
    d = int(head[0])
    dims = [int(x) for x in head[1 : 1 + d]]
    count = 1
    for n in dims:
        count *= n
    values = [float(x) for x in lines[1 : 1 + count]]
    return d, dims, float(head[1 + d]), values


shutil.rmtree(SCRATCH, ignore_errors=True)
SCRATCH.mkdir(parents=True)

# Every weight example and every weight embedded in a config validates.
for p in sorted((SRC / "configs" / "weights").glob("*.json")):
    valid(weight_validator, load(p), f"weight example {p.name} matches the schema")
for p in sorted((SRC / "configs").glob("*.json")):
    cfg = load(p)
    if "weight" in cfg:
        valid(weight_validator, cfg["weight"], f"weight in {p.name} matches the schema")

r = run("list-scenarios")
check(r.returncode == 0 and "singular-line" in r.stdout and "ramp" in r.stdout, "list-scenarios lists presets and scenarios")

# Full run with a seed override.
out = SCRATCH / "quick"
r = run("run", SRC / "configs" / "quick-singular.json", "--output-dir", out, "--seed", 11)
check(r.returncode in (0, 1), f"run exits 0 or 1 (got {r.returncode}: {r.stderr.strip()})")
summary = load(out / "summary.json")
valid(summary_validator, summary, "run summary.json matches the schema")
check(summary["seed"] == 11, "--seed reaches the summary")
check(summary["exit_code"] == r.returncode, "summary exit_code equals the process exit code")
for name in ("u.dump", "energy.csv", "growth.csv", "holder.csv", "density.csv"):
    check((out / name).is_file(), f"run writes {name}")
with open(out / "energy.csv") as f:
    rows = list(csv.reader(f))
check(rows[0] == ["sweep", "dirichlet", "volume", "total"], "energy.csv header")
check(all(float(rows[k][3]) <= float(rows[k - 1][3]) + 1e-12 for k in range(2, len(rows))), "energy.csv total is nonincreasing")
d, dims, h, values = read_dump(out / "u.dump")
check(d == 2 and dims == [65, 65] and abs(h - 2 / 64) < 1e-15 and len(values) == 65 * 65, "u.dump header and size")
check(min(values) >= 0.0 and max(values) <= 0.1, "u.dump values satisfy the maximum principle")

check(any(k["name"] == "growth_window" and not k["pass"] for k in summary["checks"]), "n = 65 reports a short growth window")

# Growth subcommand restricts the analyses; the n = 257 preset has four usable radii.
out = SCRATCH / "growth"
r = run("--output-dir", out, "growth", SRC / "configs" / "singular-line.json")
check(r.returncode == 0, f"growth on the singular-line preset exits 0 (got {r.returncode})")
summary = load(out / "summary.json")
valid(summary_validator, summary, "growth summary.json matches the schema")
check(set(summary["analyses"]) == {"growth", "nondeg"}, "growth subcommand runs growth and nondeg only")
fit = summary["results"]["growth"]["fitted_exponent"]
check(1.10 <= fit <= 1.40, f"singular-line fitted exponent {fit:.4f} in [1.10, 1.40]")
for name in ("growth.csv", "decay.csv"):
    check((out / name).is_file(), f"growth writes {name}")

# A2 estimate of the constant weight.
out = SCRATCH / "a2"
r = run("a2", SRC / "configs" / "weights" / "constant.json", "--output-dir", out)
check(r.returncode == 0, "a2 on the constant weight exits 0")
summary = load(out / "summary.json")
valid(summary_validator, summary, "a2 summary.json matches the schema")
check(abs(summary["results"]["a2"]["c1_estimate"] - 1.0) <= 1e-12, "a2 constant weight gives c1 = 1")
valid(weight_validator, summary["weight"], "a2 summary weight matches the schema")

# Exit codes.
bad = SCRATCH / "bad.json"
bad.write_text('{"weight": ')
check(run("run", bad).returncode == 2, "malformed config exits 2")
check(run("a2", bad).returncode == 2, "malformed weight spec exits 2")
check(run("run", SCRATCH / "absent.json").returncode == 2, "missing config exits 2")
check(run("frobnicate").returncode == 2, "unknown subcommand exits 2")
check(run("run").returncode == 2, "missing positional argument exits 2")
unknown = SCRATCH / "unknown_key.json"
unknown.write_text(json.dumps({"preset": "ac-classical", "gird": {"n": 33}}))
check(run("run", unknown).returncode == 2, "unknown config key exits 2")
stalled = SCRATCH / "stalled.json"
cfg = load(SRC / "configs" / "quick-singular.json")
cfg["solver"]["max_sweeps"] = 3
stalled.write_text(json.dumps(cfg))
out = SCRATCH / "stalled"
r = run("run", stalled, "--output-dir", out)
check(r.returncode == 3, "non-convergence exits 3")
summary = load(out / "summary.json")
valid(summary_validator, summary, "non-converged summary.json matches the schema")
check(summary["status"] == "nonconvergence", "non-converged status recorded")
failing = SCRATCH / "failing.json"
cfg = load(SRC / "configs" / "quick-singular.json")
cfg["options"]["density_threshold"] = 0.99
cfg["analyses"] = ["density"]
failing.write_text(json.dumps(cfg))
check(run("run", failing, "--output-dir", SCRATCH / "failing").returncode == 1, "failed check exits 1")

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
