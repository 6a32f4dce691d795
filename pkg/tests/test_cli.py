"""Command-line interface tests: commands, exit codes, file outputs."""

import json
import math

import numpy as np
import pytest

from drivesafer.cli import aggregate_scores, load_config, main
from drivesafer.errors import ValidationError
from drivesafer.geometry import Polygon, PolygonSet, Polyline
from drivesafer.losses import DacMode
from drivesafer.scene import (
    AgentClass,
    AgentTrack,
    Command,
    EgoState,
    Scene,
    serialize_scene,
)


def rect(x0, x1, y0, y1):
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def write_scene(tmp_path, scene):
    (tmp_path / f"{scene.scene_id}.scene.json").write_bytes(serialize_scene(scene))


def safe_scene(scene_id="safe-00000", speed=4.0):
    """A scene whose mode-1 saturates every submetric (pdms exactly 1).

    The route ends at the projection of the final waypoint, so progress
    saturates the EP denominator.
    """
    n = 8
    pts = np.column_stack([np.arange(1, n + 1) * speed * 0.5, np.zeros(n)])
    return Scene(
        scene_id=scene_id,
        dt=0.5,
        horizon_steps=n,
        ego=EgoState(position=np.zeros(2), heading=0.0, speed=speed),
        agents=(),
        drivable_area=PolygonSet(outers=(Polygon(rect(-20, 40, -8, 8)),)),
        route=Polyline([[pts[0, 0], 0.0], [pts[-1, 0], 0.0]]),
        intended_command=Command.STRAIGHT,
        candidates={1: pts},
    )


def colliding_scene(scene_id="crash-00000"):
    scene = safe_scene(scene_id)
    blocker = AgentTrack(
        agent_id="wall",
        agent_class=AgentClass.VEHICLE,
        position=np.array([6.0, 0.0]),
        velocity=np.zeros(2),
        heading=0.0,
        extent=(4.5, 2.0),
    )
    return Scene(
        scene_id=scene_id,
        dt=scene.dt,
        horizon_steps=scene.horizon_steps,
        ego=scene.ego,
        agents=(blocker,),
        drivable_area=scene.drivable_area,
        route=scene.route,
        intended_command=scene.intended_command,
        candidates=dict(scene.candidates),
    )


def offroad_scene(scene_id="offroad-00000"):
    scene = safe_scene(scene_id)
    return Scene(
        scene_id=scene_id,
        dt=scene.dt,
        horizon_steps=scene.horizon_steps,
        ego=scene.ego,
        agents=(),
        drivable_area=PolygonSet(outers=(Polygon(rect(-20, 10, -8, 8)),)),
        route=scene.route,
        intended_command=scene.intended_command,
        candidates=dict(scene.candidates),
    )


def misdirected_scene(scene_id="wrongway-00000"):
    scene = safe_scene(scene_id)
    return Scene(
        scene_id=scene_id,
        dt=scene.dt,
        horizon_steps=scene.horizon_steps,
        ego=scene.ego,
        agents=(),
        drivable_area=scene.drivable_area,
        route=scene.route,
        intended_command=Command.RIGHT,
        candidates=dict(scene.candidates),
    )


# ---------------------------------------------------------------------------
# score


def test_score_safe_corpus_mean_100(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    write_scene(corpus, safe_scene())
    out = tmp_path / "out"
    assert main(["score", str(corpus), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["total_scenes"] == 1
    assert report["pdms_zero_count"] == 0
    assert report["mean_percent"]["pdms"] == 100.0
    assert sum(report["histogram"]) == report["total_scenes"]
    assert report["histogram"][-1] == 1
    assert "100.0" in capsys.readouterr().out


def test_score_three_injected_failures(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    write_scene(corpus, colliding_scene())
    write_scene(corpus, offroad_scene())
    write_scene(corpus, misdirected_scene())
    out = tmp_path / "out"
    assert main(["score", str(corpus), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["total_scenes"] == 3
    assert report["pdms_zero_count"] == 3
    assert report["cause_counts"] == {
        "Collision": 1,
        "OffDrivableArea": 1,
        "DirectionViolation": 1,
    }
    records = [
        json.loads(line)
        for line in (out / "records.ndjson").read_text().splitlines()
    ]
    assert [r["scene_id"] for r in records] == sorted(r["scene_id"] for r in records)


def test_score_histogram_partition_property(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    assert main(["gen", str(corpus), "--seed", "3", "--count-each", "4"]) == 0
    out = tmp_path / "out"
    assert main(["score", str(corpus), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert sum(report["histogram"]) == report["total_scenes"] == 20
    lines = (out / "histogram.tsv").read_text().splitlines()
    assert lines[0] == "bin_low\tbin_high\tcount"
    assert len(lines) == 21
    assert sum(int(line.split("\t")[2]) for line in lines[1:]) == 20


def test_score_skips_scene_without_mode1(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    good = safe_scene("good-00000")
    orphan = safe_scene("orphan-00000")
    body = json.loads(serialize_scene(orphan))
    body["candidates"] = {"2": body["candidates"]["1"]}
    (corpus / "orphan-00000.scene.json").write_text(json.dumps(body))
    write_scene(corpus, good)
    out = tmp_path / "out"
    assert main(["score", str(corpus), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["total_scenes"] == 1
    assert report["skipped"] == 1


def test_score_all_skipped_exits_2(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    orphan = safe_scene("orphan-00000")
    body = json.loads(serialize_scene(orphan))
    body["candidates"] = {}
    (corpus / "orphan-00000.scene.json").write_text(json.dumps(body))
    out = tmp_path / "out"
    assert main(["score", str(corpus), "--out", str(out)]) == 2


def test_score_missing_corpus_exits_2(tmp_path):
    assert main(["score", str(tmp_path / "nope"), "--out", str(tmp_path / "out")]) == 2


# ---------------------------------------------------------------------------
# guide


def test_guide_safe_corpus_before_equals_after(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for i in range(3):
        write_scene(corpus, safe_scene(f"safe-{i:05d}", speed=3.0 + i * 0.5))
    out = tmp_path / "out"
    assert main(["guide", str(corpus), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    after = dict(report["after"])
    assert after.pop("improved_from_zero_count") == 0
    assert report["before"] == after


def test_guide_recovers_injected_failures(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    assert main(["gen", str(corpus), "--seed", "0",
                 "--count", "narrow_corridor=5", "--count", "pedestrian_crossing=5"]) == 0
    out = tmp_path / "out"
    assert main(["guide", str(corpus), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    before, after = report["before"], report["after"]
    assert before["pdms_zero_count"] == 10
    assert after["pdms_zero_count"] <= before["pdms_zero_count"]
    assert after["improved_from_zero_count"] >= 8
    assert after["mean_percent"]["pdms"] >= before["mean_percent"]["pdms"]


def test_guide_records_carry_provenance(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    assert main(["gen", str(corpus), "--seed", "2", "--count", "oncoming=1"]) == 0
    out = tmp_path / "out"
    assert main(["guide", str(corpus), "--out", str(out)]) == 0
    (record,) = [
        json.loads(line) for line in (out / "records.ndjson").read_text().splitlines()
    ]
    assert record["ok"]
    assert set(record) >= {"before", "after", "selected", "improved", "fallback_used",
                           "candidates"}
    assert record["after"]["pdms"] >= record["before"]["pdms"]
    assert len(record["candidates"]) >= 11


# ---------------------------------------------------------------------------
# gen


def test_gen_zero_counts(tmp_path, capsys):
    out_dir = tmp_path / "corpus"
    assert main(["gen", str(out_dir)]) == 0
    assert "0 scenes" in capsys.readouterr().out
    assert list(out_dir.iterdir()) == []


def test_gen_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for target in (a, b):
        assert main(["gen", str(target), "--seed", "7", "--count-each", "2"]) == 0
    files_a = sorted(p.name for p in a.iterdir())
    assert files_a == sorted(p.name for p in b.iterdir())
    assert len(files_a) == 10
    for name in files_a:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_gen_pedestrian_scenes_all_collide(tmp_path):
    corpus = tmp_path / "corpus"
    assert main(["gen", str(corpus), "--count", "pedestrian_crossing=5"]) == 0
    out = tmp_path / "out"
    assert main(["score", str(corpus), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["total_scenes"] == 5
    assert report["submetric_zero_counts"]["nc"] == 5
    assert report["cause_counts"]["Collision"] == 5


def test_gen_bad_count_spec_exits_2(tmp_path):
    assert main(["gen", str(tmp_path / "c"), "--count", "motorway=3"]) == 2


def test_gen_unwritable_path_exits_2(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["gen", str(blocker / "corpus"), "--count-each", "1"]) == 2


# ---------------------------------------------------------------------------
# analyze


def test_analyze_reproduces_report(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    assert main(["gen", str(corpus), "--seed", "5", "--count-each", "2"]) == 0
    out = tmp_path / "out"
    assert main(["score", str(corpus), "--out", str(out)]) == 0
    redo = tmp_path / "redo"
    assert main(["analyze", str(out / "records.ndjson"), "--out", str(redo)]) == 0
    assert (redo / "report.json").read_bytes() == (out / "report.json").read_bytes()


def test_analyze_guide_records_roundtrip(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    assert main(["gen", str(corpus), "--seed", "1", "--count", "narrow_corridor=3"]) == 0
    out = tmp_path / "out"
    assert main(["guide", str(corpus), "--out", str(out)]) == 0
    redo = tmp_path / "redo"
    assert main(["analyze", str(out / "records.ndjson"), "--out", str(redo)]) == 0
    assert (redo / "report.json").read_bytes() == (out / "report.json").read_bytes()


def test_analyze_empty_records(tmp_path, capsys):
    records = tmp_path / "records.ndjson"
    records.write_text("")
    assert main(["analyze", str(records)]) == 0
    assert "0" in capsys.readouterr().out


def test_analyze_malformed_line_numbered(tmp_path, capsys):
    records = tmp_path / "records.ndjson"
    records.write_text('{"ok": true, "score": {}}\n{nope\n')
    assert main(["analyze", str(records)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_analyze_tampered_invariant_rejected(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    write_scene(corpus, safe_scene())
    out = tmp_path / "out"
    assert main(["score", str(corpus), "--out", str(out)]) == 0
    record = json.loads((out / "records.ndjson").read_text())
    record["score"]["pdms"] = 0.0  # causes stay empty: invariant broken
    tampered = tmp_path / "tampered.ndjson"
    tampered.write_text(json.dumps(record) + "\n")
    assert main(["analyze", str(tampered)]) == 2
    assert "invariant" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# config and shared flags


def test_config_file_applies(tmp_path):
    cfg = tmp_path / "drivesafer.toml"
    cfg.write_text(
        "[metrics]\n"
        "w_ttc = 1.0\n"
        "ttc_projection_horizon = 0.5\n"
        "[losses]\n"
        "d_col = 1.5\n"
        'dac_mode = "indicator"\n'
        "[perturbation]\n"
        "lateral_offsets_m = [-0.25, 0.0, 0.25]\n"
        "use_modes_up_to = 2\n"
    )
    metric_cfg, loss_cfg, perturb_cfg = load_config(str(cfg))
    assert metric_cfg.w_ttc == 1.0
    assert metric_cfg.ttc_projection_horizon == 0.5
    assert metric_cfg.w_comf == 2.0  # untouched defaults survive
    assert loss_cfg.d_col == 1.5
    assert loss_cfg.dac_mode is DacMode.INDICATOR
    assert perturb_cfg.lateral_offsets_m == (-0.25, 0.0, 0.25)
    assert perturb_cfg.use_modes_up_to == 2


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[metrics]\nw_warp = 9\n")
    with pytest.raises(ValidationError, match="w_warp"):
        load_config(str(cfg))
    cfg.write_text("[warphood]\nx = 1\n")
    with pytest.raises(ValidationError, match="warphood"):
        load_config(str(cfg))


def test_config_flag_reaches_scoring(tmp_path):
    # a tiny TTC horizon turns the oncoming near-miss into a pass
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    scene = safe_scene("cfg-00000", speed=4.0)
    agent = AgentTrack(
        agent_id="ahead",
        agent_class=AgentClass.VEHICLE,
        position=np.array([22.0, 0.0]),
        velocity=np.zeros(2),
        heading=0.0,
        extent=(4.5, 2.0),
    )
    scene = Scene(
        scene_id=scene.scene_id,
        dt=scene.dt,
        horizon_steps=scene.horizon_steps,
        ego=scene.ego,
        agents=(agent,),
        drivable_area=scene.drivable_area,
        route=scene.route,
        intended_command=scene.intended_command,
        candidates=dict(scene.candidates),
    )
    write_scene(corpus, scene)
    out_default = tmp_path / "out1"
    assert main(["score", str(corpus), "--out", str(out_default)]) == 0
    default_report = json.loads((out_default / "report.json").read_text())
    assert default_report["submetric_zero_counts"]["ttc"] == 1
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("[metrics]\nttc_projection_horizon = 0.05\n")
    out_cfg = tmp_path / "out2"
    assert main(["score", str(corpus), "--out", str(out_cfg), "--config", str(cfg)]) == 0
    cfg_report = json.loads((out_cfg / "report.json").read_text())
    assert cfg_report["submetric_zero_counts"]["ttc"] == 0


def test_jobs_parallel_outputs_identical(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    assert main(["gen", str(corpus), "--seed", "11", "--count-each", "3"]) == 0
    serial = tmp_path / "serial"
    parallel = tmp_path / "parallel"
    assert main(["guide", str(corpus), "--out", str(serial), "--jobs", "1"]) == 0
    assert main(["guide", str(corpus), "--out", str(parallel), "--jobs", "4"]) == 0
    for name in ("records.ndjson", "report.json", "histogram.tsv"):
        assert (serial / name).read_bytes() == (parallel / name).read_bytes()


def test_usage_errors_exit_1():
    assert main(["score"]) == 1
    assert main(["warp", "x"]) == 1
    assert main(["score", "corpus", "--out", "o", "--forecaster", "psychic"]) == 1


def test_ctrv_forecaster_flag(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    write_scene(corpus, colliding_scene())
    out = tmp_path / "out"
    assert main(["score", str(corpus), "--out", str(out), "--forecaster", "ctrv"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["total_scenes"] == 1


# ---------------------------------------------------------------------------
# aggregation unit checks


def test_aggregate_scores_invariants():
    scores = [
        {"nc": 1.0, "dac": 1.0, "ddc": 1.0, "ttc": 1.0, "comf": 1.0, "ep": 1.0,
         "pdms": 1.0, "causes": []},
        {"nc": 0.0, "dac": 1.0, "ddc": 1.0, "ttc": 1.0, "comf": 1.0, "ep": 0.4,
         "pdms": 0.0, "causes": ["Collision"]},
    ]
    report = aggregate_scores(scores)
    assert report["pdms_zero_count"] == 1
    assert report["cause_counts"]["Collision"] == 1
    assert report["mean_percent"]["pdms"] == 50.0
    assert sum(report["histogram"]) == 2
    assert report["histogram"][0] == 1 and report["histogram"][-1] == 1


def test_aggregate_rejects_missing_fields():
    with pytest.raises(ValidationError, match="missing"):
        aggregate_scores([{"pdms": 1.0}])
