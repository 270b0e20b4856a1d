import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import memory_sequence
from oracles import mine_exhaustive, screen_literal
from sotverse import spaces
from sotverse.attributes import AttributeRecord, AttributeTable
from sotverse.calibration import ChallengeFlags, classify_table, default_thresholds
from sotverse.errors import LoadError
from sotverse.geometry import Environment
from sotverse.spaces import (
    Candidate,
    StartPointList,
    StartPointPolicy,
    SubsequenceRef,
    construct_subspace,
    deduplicate,
    find_start_points,
    mine_sequence,
    read_subspace,
    resolve_space,
    screen_subsequences,
    write_subspace,
)


def table_for(seq, scale=0.1, sharpness=500.0):
    records = tuple(
        AttributeRecord()
        if g is None
        else AttributeRecord(relative_scale=scale, blur=sharpness)
        for g in seq.groundtruth
    )
    return AttributeTable(sequence_id=seq.id, records=records)


class TestFindStartPoints:
    def test_every_frame_eligible(self):
        seq = memory_sequence([(0, 0, 10, 10)] * 30)
        pts = find_start_points(seq, table_for(seq))
        assert pts.points == tuple(range(30))

    def test_absence_margin_exclusion(self):
        boxes = [(0, 0, 10, 10)] * 100
        for i in range(50, 60):
            boxes[i] = None
        seq = memory_sequence(boxes)
        pts = find_start_points(seq, table_for(seq), StartPointPolicy(absence_margin=10))
        excluded = set(range(40, 60))
        assert set(pts.points) == set(range(100)) - excluded

    def test_small_scale_excluded(self):
        seq = memory_sequence([(0, 0, 10, 10)] * 5)
        records = list(table_for(seq).records)
        records[2] = AttributeRecord(relative_scale=0.01, blur=500.0)
        table = AttributeTable(sequence_id=seq.id, records=tuple(records))
        pts = find_start_points(seq, table, StartPointPolicy(min_scale=0.02))
        assert 2 not in pts.points and 1 in pts.points

    def test_blurry_excluded_but_unavailable_passes(self):
        seq = memory_sequence([(0, 0, 10, 10)] * 4)
        records = [
            AttributeRecord(relative_scale=0.1, blur=10.0),
            AttributeRecord(relative_scale=0.1, blur=None),
            AttributeRecord(relative_scale=0.1, blur=200.0),
            AttributeRecord(relative_scale=0.1, blur=95.0),
        ]
        table = AttributeTable(sequence_id=seq.id, records=tuple(records))
        pts = find_start_points(seq, table, StartPointPolicy(min_sharpness=95.0))
        assert pts.points == (1, 2, 3)


class TestScreening:
    def test_all_challenging_single_start(self):
        starts = StartPointList("s", (0,))
        cands = screen_subsequences([True] * 12, starts)
        assert cands == [Candidate(0, 12, 1.0)]

    def test_all_normal_no_candidates(self):
        starts = StartPointList("s", tuple(range(10)))
        assert screen_subsequences([False] * 10, starts) == []

    def test_maximal_end_with_exact_half_density(self):
        flags = [True, True, False, False, True, True, False, False]
        cands = screen_subsequences(flags, StartPointList("s", (0, 4)))
        assert [(c.start, c.end) for c in cands] == [(0, 8), (4, 8)]
        assert screen_literal(flags, [0, 4]) == [(0, 8), (4, 8)]
        assert cands[0].density == 0.5

    @settings(max_examples=150, deadline=None)
    @given(st.lists(st.booleans(), min_size=1, max_size=60), st.data())
    def test_matches_literal_loop(self, flags, data):
        n = len(flags)
        starts = sorted(
            data.draw(st.sets(st.integers(min_value=0, max_value=n - 1), max_size=10))
        )
        got = [
            (c.start, c.end)
            for c in screen_subsequences(flags, StartPointList("s", tuple(starts)))
        ]
        assert got == screen_literal(flags, starts)


class TestDedup:
    def test_single_long_candidate_kept(self):
        kept = deduplicate([Candidate(0, 150, 0.8)])
        assert kept == [Candidate(0, 150, 0.8)]

    def test_contained_candidate_discarded(self):
        a = Candidate(0, 200, 0.7)
        b = Candidate(50, 200, 0.7)  # overlap 150/150 = 1.0
        assert deduplicate([a, b]) == [a]

    def test_short_candidate_discarded_even_if_disjoint(self):
        a = Candidate(0, 150, 0.9)
        b = Candidate(300, 399, 0.9)  # length 99
        assert deduplicate([a, b]) == [a]

    def test_idempotent(self):
        rng = np.random.default_rng(31)
        cands = [
            Candidate(int(s), int(s + l), 0.6)
            for s, l in zip(rng.integers(0, 500, 40), rng.integers(50, 400, 40))
        ]
        once = deduplicate(cands)
        assert deduplicate(once) == once

    def test_tie_broken_by_earlier_start(self):
        a = Candidate(100, 220, 0.6)
        b = Candidate(0, 120, 0.6)  # same length, earlier start, overlap 20
        kept = deduplicate([a, b])
        assert kept[0] == b  # visited first


class TestMineSequence:
    def _flags_from_pattern(self, pattern):
        rows = tuple(
            tuple(bool(int(p)) if k == 0 else False for k in range(10)) for p in pattern
        )
        return ChallengeFlags(sequence_id="s", rows=rows)

    def test_refs_satisfy_constraints(self):
        rng = np.random.default_rng(33)
        for _ in range(20):
            n = int(rng.integers(120, 300))
            pattern = (rng.random(n) < 0.6).astype(int)
            seq = memory_sequence([(0, 0, 10, 10)] * n)
            refs = mine_sequence(
                seq, table_for(seq), self._flags_from_pattern(pattern), "ratio"
            )
            for r in refs:
                assert r.length >= 100
                assert r.challenge_density >= 0.5

    def test_maximality_of_emitted_refs(self):
        rng = np.random.default_rng(34)
        for _ in range(20):
            n = int(rng.integers(120, 300))
            pattern = (rng.random(n) < 0.55).astype(int)
            seq = memory_sequence([(0, 0, 10, 10)] * n)
            refs = mine_sequence(
                seq, table_for(seq), self._flags_from_pattern(pattern), "ratio"
            )
            for r in refs:
                if r.end < n:
                    ext = pattern[r.start : r.end + 1]
                    assert ext.sum() / len(ext) < 0.5

    def test_oracle_equivalence_random_patterns(self):
        """Pipeline output equals exhaustive enumeration + dedup, exactly."""
        rng = np.random.default_rng(35)
        for trial in range(100):
            n = int(rng.integers(10, 300))
            density = rng.uniform(0.3, 0.9)
            pattern = (rng.random(n) < density).astype(int)
            start_mask = rng.random(n) < rng.uniform(0.05, 1.0)
            starts = tuple(np.flatnonzero(start_mask).tolist())
            seq = memory_sequence([(0, 0, 10, 10)] * n)
            flags = self._flags_from_pattern(pattern)
            cands = screen_subsequences(flags.column("ratio"), StartPointList("s", starts))
            kept = sorted(
                (c.start, c.end) for c in deduplicate(cands)
            )
            want = mine_exhaustive([bool(p) for p in pattern], list(starts))
            assert kept == want, f"trial {trial}: {kept} != {want}"


class TestConstructSubspace:
    def _env_and_tables(self):
        n = 220
        boxes = []
        for t in range(n):
            if 10 <= t < 150:
                boxes.append((0.0, 0.0, 7.0, 28.0))  # ratio 4.0, abnormal
            else:
                boxes.append((0.0, 0.0, 14.0, 14.0))
        seq = memory_sequence(boxes, seq_id="stretchy")
        records = tuple(
            AttributeRecord(
                ratio=b[3] / b[2], relative_scale=0.2, blur=500.0
            )
            for b in boxes
        )
        table = AttributeTable(sequence_id="stretchy", records=records)
        env = Environment("mini", "normal", (seq,))
        return env, {"stretchy": table}

    def test_zero_challenging_frames_empty_subspace(self):
        seq = memory_sequence([(0, 0, 10, 10)] * 150, seq_id="quiet")
        table = table_for(seq)
        env = Environment("mini", "normal", (seq,))
        sub = construct_subspace(env, "fast_motion", default_thresholds(), {"quiet": table})
        assert len(sub) == 0

    def test_mined_ref_matches_flags(self):
        env, tables = self._env_and_tables()
        sub = construct_subspace(env, "ratio", default_thresholds(), tables)
        assert len(sub) >= 1
        flags = classify_table(tables["stretchy"], default_thresholds())
        col = flags.column("ratio")
        for ref in sub.refs:
            window = col[ref.start : ref.end]
            assert sum(window) / len(window) >= 0.5
            assert ref.length >= 100
        # the dominant challenging stretch is covered by some ref
        assert any(r.start <= 30 and r.end >= 130 for r in sub.refs)

    def test_subspace_round_trip(self, tmp_path):
        env, tables = self._env_and_tables()
        sub = construct_subspace(env, "ratio", default_thresholds(), tables)
        path = tmp_path / "ratio.json"
        write_subspace(sub, path)
        back = read_subspace(path)
        assert back.attribute == "ratio"
        assert [(r.sequence_id, r.start, r.end) for r in back.refs] == [
            (r.sequence_id, r.start, r.end) for r in sub.refs
        ]

    def test_resolve_space_whole_env(self):
        env, _ = self._env_and_tables()
        space_id, entries = resolve_space(env, None)
        assert space_id == "mini"
        assert [(e.id, e.start, e.end) for e in entries] == [("stretchy", 0, 220)]

    def test_resolve_space_rejects_dangling_ref(self, tmp_path):
        env, tables = self._env_and_tables()
        sub = spaces.Subspace(
            attribute="ratio",
            refs=(SubsequenceRef("stretchy", 0, 500, "ratio", 0.9),),
        )
        path = tmp_path / "bad.json"
        write_subspace(sub, path)
        with pytest.raises(LoadError, match="exceeds"):
            resolve_space(env, path)
