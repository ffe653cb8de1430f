import pytest
from hypothesis import given
from hypothesis import strategies as st

from lago.geometry import (
    BoundingBox,
    InvalidBoxError,
    clamp_to_image,
    diverse_top_k,
    generate_neighbors,
    iou,
)

boxes = st.builds(
    BoundingBox,
    x=st.floats(-0.5, 1.5),
    y=st.floats(-0.5, 1.5),
    w=st.floats(0.01, 1.5),
    h=st.floats(0.01, 1.5),
)
clamped_boxes = boxes.map(clamp_to_image)


class TestClamp:
    def test_translates_left_overhang(self):
        assert clamp_to_image(BoundingBox(-0.1, 0.2, 0.5, 0.5)) == BoundingBox(0.0, 0.2, 0.5, 0.5)

    def test_translates_bottom_right_overhang(self):
        assert clamp_to_image(BoundingBox(0.8, 0.8, 0.5, 0.5)) == BoundingBox(0.5, 0.5, 0.5, 0.5)

    def test_caps_width_then_translates(self):
        assert clamp_to_image(BoundingBox(0.2, 0.2, 1.5, 0.5)) == BoundingBox(0.0, 0.2, 1.0, 0.5)

    @pytest.mark.parametrize("w,h", [(0.0, 0.5), (-0.1, 0.5), (0.5, 0.0)])
    def test_rejects_non_positive_sides(self, w, h):
        with pytest.raises(InvalidBoxError):
            clamp_to_image(BoundingBox(0.1, 0.1, w, h))

    @given(boxes)
    def test_idempotent(self, b):
        once = clamp_to_image(b)
        assert clamp_to_image(once) == once

    @given(boxes)
    def test_result_inside_image(self, b):
        c = clamp_to_image(b)
        assert 0.0 <= c.x and 0.0 <= c.y
        assert c.x + c.w <= 1.0 + 1e-12 and c.y + c.h <= 1.0 + 1e-12
        assert c.w > 0 and c.h > 0


class TestIoU:
    def test_identity(self):
        b = BoundingBox(0, 0, 0.5, 0.5)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(BoundingBox(0, 0, 0.2, 0.2), BoundingBox(0.5, 0.5, 0.2, 0.2)) == 0.0

    def test_analytic_overlap(self):
        got = iou(BoundingBox(0, 0, 0.2, 0.2), BoundingBox(0.1, 0, 0.2, 0.2))
        # inter = 0.1*0.2, union = 2*0.04 - 0.02
        assert got == pytest.approx((0.1 * 0.2) / (0.04 + 0.04 - 0.02), abs=1e-12)

    @given(clamped_boxes, clamped_boxes)
    def test_symmetric(self, a, b):
        assert iou(a, b) == pytest.approx(iou(b, a), abs=1e-12)

    @given(clamped_boxes, clamped_boxes)
    def test_bounded(self, a, b):
        assert 0.0 <= iou(a, b) <= 1.0 + 1e-12


class TestGenerateNeighbors:
    def test_rule_forced_members(self):
        ns = generate_neighbors(BoundingBox(0.4, 0.4, 0.2, 0.2), 0.5, 0.2)
        tuples = [n.as_tuple() for n in ns]
        assert (0.4 - 0.1, 0.4, 0.2, 0.2) in tuples  # -x shift by delta*w
        scaled = next(n for n in ns if n.w > 0.2)
        assert scaled.w == pytest.approx(0.24, abs=1e-12)
        assert scaled.x == pytest.approx(0.38, abs=1e-12)
        assert (scaled.y, scaled.h) == (0.4, 0.2)

    def test_translation_step_is_box_relative(self):
        ns = generate_neighbors(BoundingBox(0.5, 0.5, 0.1, 0.1), 0.5, 0.2)
        assert ns[0].as_tuple() == (0.55, 0.5, 0.1, 0.1)

    def test_full_image_box_keeps_only_shrunk_variants(self):
        ns = generate_neighbors(BoundingBox(0, 0, 1, 1), 0.5, 0.2)
        assert len(ns) == 2
        assert all(n.w < 1 or n.h < 1 for n in ns)

    def test_deterministic_order(self):
        b = BoundingBox(0.4, 0.4, 0.2, 0.2)
        assert generate_neighbors(b, 0.3, 0.2) == generate_neighbors(b, 0.3, 0.2)

    @given(clamped_boxes, st.floats(0.05, 1.0), st.floats(0.05, 0.95))
    def test_members_clamped_and_bounded(self, b, delta, rho):
        ns = generate_neighbors(b, delta, rho)
        assert len(ns) <= 8
        for n in ns:
            assert clamp_to_image(n) == n
            assert n != b

    def test_rejects_bad_parameters(self):
        b = BoundingBox(0.4, 0.4, 0.2, 0.2)
        with pytest.raises(ValueError):
            generate_neighbors(b, 0.0, 0.2)
        with pytest.raises(ValueError):
            generate_neighbors(b, 0.3, 1.0)


class TestDiverseTopK:
    def test_identical_boxes_collapse_to_one(self):
        b = BoundingBox(0.1, 0.1, 0.3, 0.3)
        out = diverse_top_k([(b, s) for s in (0.1, 0.9, 0.5, 0.7, 0.2)], k=3, tau_search=0.6)
        assert out == [(b, 0.9)]

    def test_plain_top_k_when_disjoint(self):
        cands = [
            (BoundingBox(0.0, 0.0, 0.2, 0.2), 0.9),
            (BoundingBox(0.4, 0.4, 0.2, 0.2), 0.5),
            (BoundingBox(0.8, 0.8, 0.2, 0.2), 0.7),
        ]
        out = diverse_top_k(cands, k=2, tau_search=0.5)
        assert [s for _, s in out] == [0.9, 0.7]

    def test_threshold_suppresses_overlapping_pair(self):
        a = BoundingBox(0.0, 0.0, 0.5, 0.6)
        b = BoundingBox(0.0, 0.0, 0.5, 1.0)  # IoU = 0.6
        assert iou(a, b) == pytest.approx(0.6, abs=1e-12)
        out = diverse_top_k([(a, 0.9), (b, 0.8)], k=2, tau_search=0.5)
        assert out == [(a, 0.9)]

    def test_empty_input(self):
        assert diverse_top_k([], k=3, tau_search=0.5) == []

    def test_tie_break_stable_by_position(self):
        cands = [
            (BoundingBox(0.0, 0.0, 0.2, 0.2), 0.5),
            (BoundingBox(0.5, 0.5, 0.2, 0.2), 0.5),
        ]
        out = diverse_top_k(cands, k=1, tau_search=0.9)
        assert out == [cands[0]]

    @given(
        st.lists(st.tuples(clamped_boxes, st.floats(-1, 1)), max_size=24),
        st.integers(1, 6),
        st.floats(0.05, 1.0),
    )
    def test_output_contract(self, cands, k, tau):
        out = diverse_top_k(cands, k=k, tau_search=tau)
        assert len(out) <= k
        scores = [s for _, s in out]
        assert scores == sorted(scores, reverse=True)
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                assert iou(out[i][0], out[j][0]) < tau
