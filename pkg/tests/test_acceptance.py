"""Acceptance suite: one test per shipped guarantee.

Each test prints a PASS line on success (run with ``pytest -s`` to see
them). Budgets are enforced with a coarse wall-clock assertion where the
guarantee names one.
"""

import io
import json
import time
import zipfile

import numpy as np
import pytest

from helpers import memory_sequence
from oracles import box_whiskers, mine_exhaustive
from replays import replay_archive
from regen_goldens import GOLDEN_PATHS, drive_pipeline
from sotverse import attributes, calibration, imageio, spaces
from sotverse.attributes import (
    fast_motion_value,
    illumination_value,
    laplacian_sharpness,
    pearson_corrcoef,
    static_attributes,
)
from sotverse.calibration import ThresholdRule, default_thresholds, summarize_values
from sotverse.engine import ScriptedSession, Trajectory, run_rope
from sotverse.geometry import BoundingBox, FrameRef, center_distance, iou
from sotverse.metrics import CHALLENGING_THRESHOLDS, SUCCESS_THRESHOLDS, score_sequence
from sotverse.spaces import StartPointList, screen_subsequences, deduplicate


def _ok(name: str, started: float, budget: float) -> None:
    elapsed = time.monotonic() - started
    assert elapsed < budget, f"{name} exceeded its {budget}s budget ({elapsed:.1f}s)"
    print(f"ACCEPTANCE PASS: {name} ({elapsed:.2f}s)")


def test_a01_default_thresholds_match_published_constants():
    t0 = time.monotonic()
    shipped = default_thresholds()
    expected = {
        "ratio": ThresholdRule("outside", (0.28, 2.38)),
        "relative_scale": ThresholdRule("outside", (0.02, 0.39)),
        "illumination": ThresholdRule("outside", (0.01, 0.13)),
        "blur": ThresholdRule("below", (95.0,)),
        "delta_ratio": ThresholdRule("above", (0.2,)),
        "delta_relative_scale": ThresholdRule("above", (0.01,)),
        "delta_illumination": ThresholdRule("above", (0.0012,)),
        "delta_blur": ThresholdRule("above", (250.0,)),
        "fast_motion": ThresholdRule("above", (0.16,)),
        "corrcoef": ThresholdRule("below", (0.75,)),
    }
    assert dict(shipped.rules) == expected
    assert shipped.provenance == "paper-default"
    _ok("default thresholds equal the published table", t0, 1.0)


def test_a02_mining_equals_exhaustive_oracle():
    t0 = time.monotonic()
    rng = np.random.default_rng(101)
    for trial in range(100):
        n = int(rng.integers(10, 301))
        density = float(rng.uniform(0.2, 0.95))
        flags = (rng.random(n) < density).tolist()
        starts = sorted(
            int(v) for v in np.flatnonzero(rng.random(n) < rng.uniform(0.05, 1.0))
        )
        cands = screen_subsequences(flags, StartPointList("s", tuple(starts)))
        got = sorted((c.start, c.end) for c in deduplicate(cands))
        want = mine_exhaustive(flags, starts)
        assert got == want, f"trial {trial}"
    _ok("subsequence mining equals the exhaustive oracle (100 runs)", t0, 60.0)


def test_a03_attribute_invariance_suite():
    t0 = time.monotonic()
    rng = np.random.default_rng(102)

    for _ in range(400):  # geometry attributes under uniform rescale
        w, h = rng.uniform(1, 50, 2)
        W, H = rng.uniform(60, 600, 2)
        x, y = rng.uniform(0, 10, 2)
        k = float(rng.uniform(0.05, 40))
        frame = FrameRef("s", 0, "f", W, H)
        frame_k = FrameRef("s", 0, "f", W * k, H * k)
        g, s, _, _ = static_attributes(BoundingBox(x, y, w, h), frame)
        gk, sk, _, _ = static_attributes(
            BoundingBox(x * k, y * k, w * k, h * k), frame_k
        )
        assert gk == pytest.approx(g, rel=1e-9)
        assert sk == pytest.approx(s, rel=1e-9)
        a = BoundingBox(*rng.uniform(0, 40, 2), *rng.uniform(1, 30, 2))
        b = BoundingBox(*rng.uniform(0, 40, 2), *rng.uniform(1, 30, 2))
        ak = BoundingBox(a.x * k, a.y * k, a.w * k, a.h * k)
        bk = BoundingBox(b.x * k, b.y * k, b.w * k, b.h * k)
        assert fast_motion_value(ak, bk) == pytest.approx(
            fast_motion_value(a, b), rel=1e-9
        )

    for _ in range(300):  # correlation under positive affine grayscale maps
        grid_a = rng.random((int(rng.integers(4, 24)), int(rng.integers(4, 24))))
        grid_b = rng.random(grid_a.shape)
        gain = float(rng.uniform(0.05, 10))
        bias = float(rng.uniform(-5, 5))
        base = pearson_corrcoef(grid_a, grid_b)
        assert pearson_corrcoef(gain * grid_a + bias, grid_b) == pytest.approx(
            base, rel=1e-9, abs=1e-9
        )

    for _ in range(300):  # constant images: sharpness and illumination exact
        value = float(rng.uniform(0.01, 1.0))
        hgt, wid = int(rng.integers(3, 30)), int(rng.integers(3, 30))
        gray_img = np.full((hgt, wid, 3), value)
        assert illumination_value(gray_img) == 0.0
        assert laplacian_sharpness(np.full((hgt, wid), value * 255.0)) == 0.0
        color = np.zeros((hgt, wid, 3))
        color[...] = rng.uniform(0.05, 1.0, 3)[None, None, :]
        assert laplacian_sharpness(imageio.to_gray(color) * 255.0) == 0.0

    _ok("attribute invariance suite (1000 randomized cases)", t0, 30.0)


def test_a04_calibration_matches_direct_formula():
    t0 = time.monotonic()
    rng = np.random.default_rng(103)
    for _ in range(1000):
        n = int(rng.integers(2, 300))
        kind = rng.integers(0, 3)
        if kind == 0:
            values = rng.normal(0, float(rng.uniform(0.1, 10)), n)
        elif kind == 1:
            values = rng.uniform(-5, 5, n)
        else:
            values = np.round(rng.normal(0, 2, n), 1)  # heavy ties
        summary = summarize_values("ratio", values)
        q1, q2, q3, lo, hi = box_whiskers(values.tolist())
        assert summary.q1 == pytest.approx(q1, rel=1e-9, abs=1e-12)
        assert summary.q2 == pytest.approx(q2, rel=1e-9, abs=1e-12)
        assert summary.q3 == pytest.approx(q3, rel=1e-9, abs=1e-12)
        assert summary.whisker_low == pytest.approx(lo, rel=1e-9, abs=1e-12)
        assert summary.whisker_high == pytest.approx(hi, rel=1e-9, abs=1e-12)
    _ok("quartile/whisker calibration matches the direct formula (1000 samples)", t0, 5.0)


def test_a05_metric_brute_force_recounts():
    t0 = time.monotonic()
    rng = np.random.default_rng(104)
    for _ in range(1000):
        n = int(rng.integers(2, 40))
        seq = memory_sequence(
            [
                (float(x), float(y), float(w), float(h))
                for x, y, w, h in zip(
                    rng.uniform(0, 30, n), rng.uniform(0, 30, n),
                    rng.uniform(2, 20, n), rng.uniform(2, 20, n),
                )
            ]
        )
        preds = [
            BoundingBox(float(x), float(y), float(w), float(h))
            for x, y, w, h in zip(
                rng.uniform(0, 30, n), rng.uniform(0, 30, n),
                rng.uniform(2, 20, n), rng.uniform(2, 20, n),
            )
        ]
        rho = [float(v) for v in rng.uniform(0, 1, n)]
        flag_rows = tuple(tuple(bool(b) for b in rng.random(10) < 0.3) for _ in range(n))
        traj = Trajectory(
            tracker_id="t", sequence_id=seq.id, mechanism="ope",
            boxes=tuple(preds), states=("tracking",) * n, times_ms=(0.0,) * n,
        )
        table = attributes.AttributeTable(
            sequence_id=seq.id,
            records=tuple(attributes.AttributeRecord(corrcoef=r) for r in rho),
        )
        flags = calibration.ChallengeFlags(sequence_id=seq.id, rows=flag_rows)
        scores = score_sequence(traj, seq, table, flags)

        d = [center_distance(p, g) for p, g in zip(preds, seq.groundtruth)]
        s = [iou(p, g) for p, g in zip(preds, seq.groundtruth)]
        assert scores.precision.headline == pytest.approx(
            sum(1 for v in d if v <= 20.0) / n, abs=1e-12
        )
        want_auc = sum(
            sum(1 for v in s if v >= theta) / n for theta in SUCCESS_THRESHOLDS
        ) / len(SUCCESS_THRESHOLDS)
        assert scores.success_auc == pytest.approx(want_auc, abs=1e-12)
        theta = 0.75
        in_ch = [t for t in range(n) if rho[t] <= theta]
        want_c = (
            sum(1 for t in in_ch if s[t] >= 0.5) / len(in_ch) if in_ch else None
        )
        got_c = scores.challenging.values[CHALLENGING_THRESHOLDS.index(0.75)]
        if want_c is None:
            assert got_c is None
        else:
            assert got_c == pytest.approx(want_c, abs=1e-12)
        fails = [t for t in range(n) if s[t] < 0.5]
        for k, name in enumerate(attributes.ATTRIBUTE_NAMES):
            want_r = (
                sum(1 for t in fails if flag_rows[t][k]) / len(fails) if fails else None
            )
            got_r = scores.attribute_ratios[name]
            if want_r is None:
                assert got_r is None
            else:
                assert got_r == pytest.approx(want_r, abs=1e-12)
    _ok("metric headlines equal brute-force recounts (1000 trajectories)", t0, 30.0)


def test_a06_challenging_plot_separates_easy_from_hard():
    t0 = time.monotonic()
    n = 100
    seq = memory_sequence([(10.0, 10.0, 10.0, 10.0)] * n)
    rho, boxes = [], []
    for t in range(n):
        if t < 90:  # easy: high correlation, tracked perfectly
            rho.append(0.95)
            boxes.append(seq.groundtruth[t])
        else:  # challenging: low correlation, tracking failed
            rho.append(0.4)
            boxes.append(BoundingBox(500.0, 500.0, 10.0, 10.0))
    traj = Trajectory(
        tracker_id="t", sequence_id=seq.id, mechanism="ope",
        boxes=tuple(boxes), states=("tracking",) * n, times_ms=(0.0,) * n,
    )
    table = attributes.AttributeTable(
        sequence_id=seq.id,
        records=tuple(attributes.AttributeRecord(corrcoef=r) for r in rho),
    )
    scores = score_sequence(traj, seq, table)
    overall = scores.success.values[SUCCESS_THRESHOLDS.index(0.5)]
    assert overall == 0.9  # exact: 90 of 100 frames tracked
    at_075 = scores.challenging.values[CHALLENGING_THRESHOLDS.index(0.75)]
    assert at_075 == 0.0  # every challenging frame failed
    _ok("challenging plot separates easy from hard frames", t0, 5.0)


def test_a07_rope_state_machine_trace():
    t0 = time.monotonic()
    n = 200
    seq = memory_sequence([(5.0 + t, 10.0, 12.0, 10.0) for t in range(n)])

    def policy(init, t):
        if 100 <= t < 110:
            return BoundingBox(1500.0, 1500.0, 5.0, 5.0)
        return seq.groundtruth[t]

    traj, log = run_rope(
        ScriptedSession(policy, name="scripted"),
        seq,
        StartPointList(seq.id, tuple(range(n))),
    )
    assert log.restart_count == 1
    assert log.events == ((109, 110),)
    assert log.segments == ((0, 100), (110, 200))
    assert traj.states[110] == "init"
    _ok("restart state machine reproduces the scripted trace", t0, 5.0)


def test_a08_end_to_end_determinism(tmp_path, goldens_dir):
    t0 = time.monotonic()
    corpus_dir = tmp_path / "corpus"
    import corpus as corpus_mod

    corpus_mod.build_corpus(corpus_dir)
    manifest = corpus_dir / "manifest.json"
    work1, work2 = tmp_path / "w1", tmp_path / "w2"
    drive_pipeline(manifest, work1)
    drive_pipeline(manifest, work2)

    produced = sorted(
        p.relative_to(work1).as_posix() for p in work1.rglob("*") if p.is_file()
    )
    assert produced, "pipeline produced no files"
    for rel in produced:
        assert (work2 / rel).is_file(), f"second run missing {rel}"
        assert (work1 / rel).read_bytes() == (work2 / rel).read_bytes(), (
            f"pipeline output differs between runs: {rel}"
        )
    for rel in GOLDEN_PATHS:
        golden = goldens_dir / rel
        assert golden.is_file(), f"missing golden {rel}"
        assert (work1 / rel).read_bytes() == golden.read_bytes(), (
            f"pipeline output differs from checked-in golden: {rel}"
        )
    _ok("end-to-end pipeline is byte-identical and matches goldens", t0, 120.0)


def test_a09_service_equals_local_scoring(tmp_path, corpus_root, pipeline_dir, fixture_env):
    t0 = time.monotonic()
    import shutil

    from sotverse import scoring
    from sotverse.engine import parse_trajectory
    from sotverse.report import build_report_document, dump_report
    from sotverse.scoring import RunDefinition
    from sotverse.service import EvalService
    from test_service import http, multipart_body, wait_scored

    data = tmp_path / "data"
    data.mkdir()
    doc = json.loads((corpus_root / "manifest.json").read_text())
    for entry in doc["sequences"]:
        entry["dir"] = str(corpus_root / entry["id"])
    (data / "manifest.json").write_text(json.dumps(doc))
    shutil.copytree(pipeline_dir / "attrs", data / "attributes")

    svc = EvalService(data)
    svc.start()
    try:
        base = f"http://{svc.host}:{svc.port}"
        _, entries = spaces.resolve_space(fixture_env, None)
        archive = replay_archive(fixture_env, entries, dx=3.0, dy=4.0)
        meta = {"tracker": "offset34", "space": "fixture-env", "mechanism": "ope"}
        body, ctype = multipart_body(meta, archive)
        status, payload = http("POST", f"{base}/api/v1/submissions", body, ctype)
        assert status == 201
        wait_scored(base, payload["id"])

        seq_ids = [s.id for s in fixture_env.sequences]
        run = RunDefinition(
            tracker="offset34", space="fixture-env", mechanism="ope",
            manifest=str(data / "manifest.json"), entries=tuple(entries),
        )
        tables = scoring.load_attribute_tables(data / "attributes", seq_ids)
        flag_tables = scoring.load_flag_tables(data / "attributes", seq_ids)
        with zipfile.ZipFile(io.BytesIO(archive)) as zf:
            def provider(entry, seq):
                text = zf.read(f"{entry.id}.csv").decode()
                return parse_trajectory(text, seq, f"{entry.id}.csv", "offset34"), None

            local = scoring.score_entries(fixture_env, run, provider, tables, flag_tables)
        local_bytes = dump_report(build_report_document([local]))
        service_bytes = (data / "submissions" / payload["id"] / "report.json").read_bytes()
        assert service_bytes == local_bytes

        body2, ctype2 = multipart_body(meta, archive)
        status2, payload2 = http("POST", f"{base}/api/v1/submissions", body2, ctype2)
        assert status2 == 200 and payload2["id"] == payload["id"]
        assert payload2["duplicate"] is True
    finally:
        svc.close()
    _ok("service scoring equals local scoring byte for byte", t0, 30.0)
