"""Command-line surface: score corpora, run guidance, generate scenes,
and recompute failure reports from saved records.

Exit codes: 0 success, 1 usage error, 2 data error. Per-scene work can run
in a process pool; records land in scene-id order either way, so outputs
are byte-identical for any --jobs value.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ParseError, ValidationError
from .forecast import FORECASTERS, make_forecaster
from .guidance import PerturbationConfig, guide
from .losses import DacMode, LossConfig
from .metrics import MetricConfig, score, trajectory_from_candidate
from .scene import (
    SceneTemplate,
    generate_scene,
    load_corpus,
    parse_scene,
    serialize_scene,
)

SUBMETRICS = ("nc", "dac", "ddc", "ttc", "comf", "ep")
ZERO_COUNTED = ("nc", "dac", "ddc", "ttc", "comf")
CAUSES = ("Collision", "OffDrivableArea", "DirectionViolation")
HISTOGRAM_BINS = 20
BIN_WIDTH = 0.05


# ---------------------------------------------------------------------------
# config loading

_CONFIG_SECTIONS = {
    "metrics": (MetricConfig, ()),
    "losses": (LossConfig, ()),
    "perturbation": (PerturbationConfig, ("heading_scales", "speed_scales",
                                          "lateral_offsets_m", "brake_decels_mps2")),
}


def load_config(path):
    """Read a TOML config with [metrics], [losses], [perturbation] sections."""
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise ParseError(f"{path}: {e}")
    configs = {"metrics": MetricConfig(), "losses": LossConfig(),
               "perturbation": PerturbationConfig()}
    for section, values in data.items():
        if section not in _CONFIG_SECTIONS:
            raise ValidationError(f"unknown config section [{section}]", field=section)
        cls, tuple_keys = _CONFIG_SECTIONS[section]
        known = set(cls.__dataclass_fields__)
        kwargs = {}
        for key, value in values.items():
            if key not in known:
                raise ValidationError(f"unknown key {key!r} in [{section}]", field=key)
            if key in tuple_keys:
                value = tuple(value)
            if key == "dac_mode":
                value = DacMode(value)
            kwargs[key] = value
        configs[section] = cls(**kwargs)
    return configs["metrics"], configs["losses"], configs["perturbation"]


# ---------------------------------------------------------------------------
# per-scene workers (top level so they pickle for the process pool)


def _score_worker(payload):
    scene_bytes, metric_cfg, forecaster_name = payload
    scene = parse_scene(scene_bytes)
    try:
        traj = trajectory_from_candidate(scene, 1)
    except ValidationError as e:
        return {"scene_id": scene.scene_id, "ok": False, "error": str(e)}
    forecaster = make_forecaster(forecaster_name)
    result = score(traj, scene, forecaster.forecast(scene), metric_cfg)
    return {"scene_id": scene.scene_id, "ok": True, "score": result.as_dict()}


def _guide_worker(payload):
    scene_bytes, metric_cfg, perturb_cfg, forecaster_name = payload
    scene = parse_scene(scene_bytes)
    if 1 not in scene.candidates:
        return {"scene_id": scene.scene_id, "ok": False,
                "error": "scene has no mode-1 candidate"}
    modes = [trajectory_from_candidate(scene, rank) for rank in sorted(scene.candidates)]
    forecaster = make_forecaster(forecaster_name)
    result = guide(modes, scene, forecaster, metric_cfg, perturb_cfg)
    return {
        "scene_id": scene.scene_id,
        "ok": True,
        "before": result.raw_mode1_score.as_dict(),
        "after": result.selected.score.as_dict(),
        "selected": result.selected.provenance.as_dict(),
        "improved": result.improved,
        "fallback_used": result.fallback_used,
        "candidates": [
            {"provenance": c.provenance.as_dict(), "pdms": c.score.pdms}
            for c in result.all_candidates
        ],
    }


def _run_pool(worker, payloads, jobs):
    if jobs <= 1:
        return [worker(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, payloads))


# ---------------------------------------------------------------------------
# aggregation


def _check_score_record(s):
    required = set(SUBMETRICS) | {"pdms", "causes"}
    missing = required - set(s)
    if missing:
        raise ValidationError(f"record missing fields {sorted(missing)}", field="records")
    if (s["pdms"] == 0.0) != bool(s["causes"]):
        raise ValidationError(
            "record invariant violated: pdms is 0 iff causes are nonempty", field="records"
        )


def aggregate_scores(scores, skipped=0, improved_from_zero=None):
    """Build a failure report dict from per-scene score dicts."""
    for s in scores:
        _check_score_record(s)
    n = len(scores)
    histogram = [0] * HISTOGRAM_BINS
    for s in scores:
        idx = min(int(s["pdms"] / BIN_WIDTH), HISTOGRAM_BINS - 1)
        histogram[idx] += 1
    report = {
        "total_scenes": n,
        "skipped": skipped,
        "pdms_zero_count": sum(1 for s in scores if s["pdms"] == 0.0),
        "cause_counts": {
            c: sum(1 for s in scores if c in s["causes"]) for c in CAUSES
        },
        "submetric_zero_counts": {
            m: sum(1 for s in scores if s[m] == 0.0) for m in ZERO_COUNTED
        },
        "mean_percent": {
            m: round(100.0 * sum(s[m] for s in scores) / n, 1) if n else 0.0
            for m in SUBMETRICS + ("pdms",)
        },
        "histogram": histogram,
    }
    if improved_from_zero is not None:
        report["improved_from_zero_count"] = improved_from_zero
    return report


def _reports_from_records(records):
    """Rebuild the report (or before/after pair) from parsed records."""
    skipped = sum(1 for r in records if not r.get("ok"))
    scored = [r for r in records if r.get("ok")]
    guided = any("before" in r for r in scored)
    if guided:
        improved = sum(
            1 for r in scored if r["before"]["pdms"] == 0.0 and r["after"]["pdms"] > 0.0
        )
        before = aggregate_scores([r["before"] for r in scored], skipped)
        after = aggregate_scores(
            [r["after"] for r in scored], skipped, improved_from_zero=improved
        )
        return {"before": before, "after": after}
    return aggregate_scores([r["score"] for r in scored], skipped)


# ---------------------------------------------------------------------------
# output


def _dump_record(record) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def _write_outputs(out_dir, records, report):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "records.ndjson"), "w") as fh:
        for record in records:
            fh.write(_dump_record(record) + "\n")
    _write_report(out_dir, report)


def _write_report(out_dir, report):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    histogram = report["after"]["histogram"] if "after" in report else report["histogram"]
    with open(os.path.join(out_dir, "histogram.tsv"), "w") as fh:
        fh.write("bin_low\tbin_high\tcount\n")
        for i, count in enumerate(histogram):
            fh.write(f"{i * BIN_WIDTH:.2f}\t{(i + 1) * BIN_WIDTH:.2f}\t{count}\n")


def _format_single(report, title):
    lines = [title]
    lines.append(f"  scenes scored    {report['total_scenes']}")
    lines.append(f"  scenes skipped   {report['skipped']}")
    lines.append(f"  pdms zero        {report['pdms_zero_count']}")
    for cause in CAUSES:
        lines.append(f"    {cause:<18} {report['cause_counts'][cause]}")
    means = report["mean_percent"]
    header = "  " + "".join(f"{m:>8}" for m in SUBMETRICS + ("pdms",))
    values = "  " + "".join(f"{means[m]:>8.1f}" for m in SUBMETRICS + ("pdms",))
    lines.append("  mean submetrics (%):")
    lines.append(header)
    lines.append(values)
    if "improved_from_zero_count" in report:
        lines.append(f"  improved from zero  {report['improved_from_zero_count']}")
    return "\n".join(lines)


def _print_report(report):
    if "after" in report:
        print(_format_single(report["before"], "before guidance:"))
        print(_format_single(report["after"], "after guidance:"))
    else:
        print(_format_single(report, "score report:"))


# ---------------------------------------------------------------------------
# commands


def cmd_score(args) -> int:
    metric_cfg, _, _ = load_config(args.config) if args.config else (
        MetricConfig(), None, None)
    corpus = load_corpus(args.corpus)
    payloads = [(serialize_scene(s), metric_cfg, args.forecaster) for s in corpus]
    records = sorted(_run_pool(_score_worker, payloads, args.jobs),
                     key=lambda r: r["scene_id"])
    report = _reports_from_records(records)
    _write_outputs(args.out, records, report)
    _print_report(report)
    if len(corpus) and report["total_scenes"] == 0:
        print("error: every scene was skipped", file=sys.stderr)
        return 2
    return 0


def cmd_guide(args) -> int:
    if args.config:
        metric_cfg, _, perturb_cfg = load_config(args.config)
    else:
        metric_cfg, perturb_cfg = MetricConfig(), PerturbationConfig()
    corpus = load_corpus(args.corpus)
    payloads = [
        (serialize_scene(s), metric_cfg, perturb_cfg, args.forecaster) for s in corpus
    ]
    records = sorted(_run_pool(_guide_worker, payloads, args.jobs),
                     key=lambda r: r["scene_id"])
    report = _reports_from_records(records)
    _write_outputs(args.out, records, report)
    _print_report(report)
    if len(corpus) and all(not r.get("ok") for r in records):
        print("error: every scene was skipped", file=sys.stderr)
        return 2
    return 0


def _parse_counts(args) -> dict:
    counts = {t: args.count_each for t in SceneTemplate}
    for item in args.count or []:
        name, _, num = item.partition("=")
        try:
            template = SceneTemplate(name)
            counts[template] = int(num)
        except ValueError:
            raise ValidationError(
                f"expected TEMPLATE=N with a known template, got {item!r}", field="--count"
            )
        if counts[template] < 0:
            raise ValidationError("counts must be >= 0", field="--count")
    return counts


def cmd_gen(args) -> int:
    counts = _parse_counts(args)
    os.makedirs(args.out_dir, exist_ok=True)
    total = 0
    parts = []
    for template in SceneTemplate:
        n = counts[template]
        for i in range(n):
            scene = generate_scene(args.seed + i, template)
            path = os.path.join(args.out_dir, f"{scene.scene_id}.scene.json")
            with open(path, "wb") as fh:
                fh.write(serialize_scene(scene))
        total += n
        parts.append(f"{template.value}={n}")
    print(f"{total} scenes ({', '.join(parts)})")
    return 0


def cmd_analyze(args) -> int:
    with open(args.records) as fh:
        lines = fh.read().splitlines()
    records = []
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise ParseError(f"{args.records}: {e.msg}", line=i)
    report = _reports_from_records(records)
    if args.out:
        _write_report(args.out, report)
    _print_report(report)
    return 0


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_shared(sub):
    sub.add_argument("--config", help="TOML config file")
    sub.add_argument("--forecaster", choices=sorted(FORECASTERS), default="cv")
    sub.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drivesafer", description="Trajectory safety scoring and guidance.")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = subs.add_parser("score", help="score mode-1 candidates of a corpus")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    _add_shared(p)
    p.set_defaults(fn=cmd_score)

    p = subs.add_parser("guide", help="run safety guidance over a corpus")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    _add_shared(p)
    p.set_defaults(fn=cmd_guide)

    p = subs.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count-each", type=int, default=0)
    p.add_argument("--count", action="append", metavar="TEMPLATE=N")
    p.set_defaults(fn=cmd_gen)

    p = subs.add_parser("analyze", help="recompute a report from saved records")
    p.add_argument("records")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args)
    except (ValidationError, ParseError, OSError) as e:
        print(f"drivesafer: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
