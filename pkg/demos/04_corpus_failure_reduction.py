"""
Corpus-level failure reduction
==============================

The command-line interface strings the pieces together: generate a seeded
synthetic corpus, score every scene's mode 1, then re-run with guidance
and compare the failure counts. This is the batch workflow the `drivesafer`
console script exposes; here we call the same entry point in-process.
"""

import json
import tempfile
from pathlib import Path

from drivesafer.cli import main

workdir = Path(tempfile.mkdtemp(prefix="drivesafer-demo-"))
corpus = workdir / "corpus"

# 100 scenes across the five templates. pedestrian_crossing, oncoming, and
# narrow_corridor are constructed so that mode 1 fails; straight and
# left_turn are benign.
args = ["gen", str(corpus), "--seed", "42"]
for template in ("straight", "left_turn", "pedestrian_crossing", "oncoming",
                 "narrow_corridor"):
    args += ["--count", f"{template}=20"]
main(args)

# Score the raw planner output.
score_out = workdir / "score"
main(["score", str(corpus), "--out", str(score_out)])
raw = json.loads((score_out / "report.json").read_text())
print("\nraw mode-1 scoring")
print(f"  scenes        : {raw['total_scenes']}")
print(f"  pdms zero     : {raw['pdms_zero_count']}")
print(f"  mean pdms     : {raw['mean_percent']['pdms']:.1f}%")
print(f"  cause counts  : {raw['cause_counts']}")

# Re-run with guidance. The report now holds a before/after pair.
guide_out = workdir / "guide"
main(["guide", str(corpus), "--out", str(guide_out), "--jobs", "1"])
report = json.loads((guide_out / "report.json").read_text())
before, after = report["before"], report["after"]
print("\nwith guidance")
print(f"  pdms zero     : {before['pdms_zero_count']} -> {after['pdms_zero_count']}")
print(f"  mean pdms     : {before['mean_percent']['pdms']:.1f}% -> "
      f"{after['mean_percent']['pdms']:.1f}%")
print(f"  rescued scenes: {after['improved_from_zero_count']}")

# Each line of records.ndjson carries the full per-scene story: both scores,
# the chosen perturbation, and whether the brake fallback fired.
lines = (guide_out / "records.ndjson").read_text().splitlines()
record = next(
    r for r in map(json.loads, lines)
    if r["improved"] and r["before"]["pdms"] == 0.0
)
print(f"\nexample rescued scene: {record['scene_id']}")
print(f"  before pdms {record['before']['pdms']:.3f} "
      f"(causes {record['before']['causes']})")
print(f"  after  pdms {record['after']['pdms']:.3f}")
print(f"  selected    {record['selected']}")
print(f"\nartifacts in {workdir}")
