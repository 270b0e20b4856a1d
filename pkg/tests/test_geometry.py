import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import raster_iou
from sotverse.errors import ConfigError, DomainError
from sotverse.geometry import (
    BoundingBox,
    FrameRef,
    Sequence,
    TaskSpec,
    center_distance,
    iou,
    normalized_center_distance,
)

boxes = st.builds(
    BoundingBox,
    x=st.floats(-500, 500, allow_nan=False),
    y=st.floats(-500, 500, allow_nan=False),
    w=st.floats(0.1, 400, allow_nan=False),
    h=st.floats(0.1, 400, allow_nan=False),
)


class TestIoU:
    def test_identity(self):
        b = BoundingBox(3.5, -2.0, 10.0, 7.25)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(BoundingBox(0, 0, 10, 10), BoundingBox(20, 20, 10, 10)) == 0.0

    def test_half_shift(self):
        # inter = 50, union = 150
        a = BoundingBox(0, 0, 10, 10)
        b = BoundingBox(5, 0, 10, 10)
        assert iou(a, b) == pytest.approx(1.0 / 3.0, abs=1e-15)
        assert iou(a, b) == pytest.approx(raster_iou((0, 0, 10, 10), (5, 0, 10, 10)), abs=1e-12)

    def test_matches_rasterization_on_integer_boxes(self):
        import random

        rnd = random.Random(7)
        for _ in range(200):
            a = (rnd.randint(-5, 20), rnd.randint(-5, 20), rnd.randint(1, 15), rnd.randint(1, 15))
            b = (rnd.randint(-5, 20), rnd.randint(-5, 20), rnd.randint(1, 15), rnd.randint(1, 15))
            got = iou(BoundingBox(*a), BoundingBox(*b))
            assert got == pytest.approx(raster_iou(a, b), abs=1e-12)

    @settings(max_examples=300)
    @given(a=boxes, b=boxes)
    def test_symmetric_and_bounded(self, a, b):
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0

    @settings(max_examples=200)
    @given(a=boxes, b=boxes, dx=st.floats(-100, 100), dy=st.floats(-100, 100))
    def test_translation_invariant(self, a, b, dx, dy):
        a2 = BoundingBox(a.x + dx, a.y + dy, a.w, a.h)
        b2 = BoundingBox(b.x + dx, b.y + dy, b.w, b.h)
        assert iou(a2, b2) == pytest.approx(iou(a, b), rel=1e-12, abs=1e-12)
        assert center_distance(a2, b2) == pytest.approx(
            center_distance(a, b), rel=1e-12, abs=1e-12
        )

    def test_absent_operand_rejected(self):
        b = BoundingBox(0, 0, 1, 1)
        with pytest.raises(DomainError):
            iou(None, b)
        with pytest.raises(DomainError):
            center_distance(b, None)
        with pytest.raises(DomainError):
            normalized_center_distance(None, b)


class TestCenterDistance:
    def test_identical(self):
        b = BoundingBox(1, 2, 3, 4)
        assert center_distance(b, b) == 0.0

    def test_three_four_five(self):
        assert center_distance(BoundingBox(0, 0, 10, 10), BoundingBox(3, 4, 10, 10)) == 5.0

    def test_nested_centers(self):
        # centers (1,1) and (2,2)
        got = center_distance(BoundingBox(0, 0, 2, 2), BoundingBox(0, 0, 4, 4))
        assert got == pytest.approx(math.sqrt(2.0), rel=1e-15)

    @settings(max_examples=200)
    @given(a=boxes, b=boxes, k=st.floats(0.01, 50, allow_nan=False))
    def test_scaling_law(self, a, b, k):
        a2 = BoundingBox(a.x * k, a.y * k, a.w * k, a.h * k)
        b2 = BoundingBox(b.x * k, b.y * k, b.w * k, b.h * k)
        assert center_distance(a2, b2) == pytest.approx(
            k * center_distance(a, b), rel=1e-9, abs=1e-9
        )
        assert normalized_center_distance(a2, b2) == pytest.approx(
            normalized_center_distance(a, b), rel=1e-9, abs=1e-12
        )


class TestNormalizedCenterDistance:
    def test_identical(self):
        b = BoundingBox(5, 5, 10, 20)
        assert normalized_center_distance(b, b) == 0.0

    def test_unit_offset(self):
        g = BoundingBox(0, 0, 10, 20)
        p = BoundingBox(10, 0, 10, 20)  # centers offset by exactly (g.w, 0)
        assert normalized_center_distance(p, g) == pytest.approx(1.0, rel=1e-15)

    def test_hand_computed(self):
        # p center (15, 10), g center (5, 10): dx/w = 1, dy/h = 0
        p = BoundingBox(10, 0, 10, 20)
        g = BoundingBox(0, 0, 10, 20)
        assert normalized_center_distance(p, g) == pytest.approx(1.0, rel=1e-15)


class TestTypes:
    def test_degenerate_box_rejected(self):
        with pytest.raises(DomainError):
            BoundingBox(0, 0, 0, 10)
        with pytest.raises(DomainError):
            BoundingBox(0, 0, 5, -1)

    def test_sequence_validation(self):
        frames = tuple(FrameRef("s", i, f"frames/{i:06d}.ppm", 64, 48) for i in range(3))
        gt = (BoundingBox(0, 0, 5, 5),) * 3
        seq = Sequence("s", frames, gt)
        assert len(seq) == 3
        with pytest.raises(DomainError):
            Sequence("s", frames, gt[:2])
        with pytest.raises(DomainError):
            Sequence("s", frames, (None,) + gt[:2])

    def test_taskspec_validation(self):
        spec = TaskSpec("env", ("ope", "rope"), ("precision", "success"))
        spec.validate(["precision", "success"])
        with pytest.raises(ConfigError):
            TaskSpec("env", ("vot-style",), ("precision",)).validate(["precision"])
        with pytest.raises(ConfigError):
            TaskSpec("env", ("ope",), ("unknown",)).validate(["precision"])
