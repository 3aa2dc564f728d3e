"""Stage 2 descriptors, Eq-style integer scoring, candidate retrieval,
and mask-intersection RGB transfer."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelcollage import (
    InstanceMap,
    LabelMap,
    UNLABELED,
    build_descriptor,
    build_record,
    extract_shapes,
    retrieve_candidates,
    score_shape,
    transfer_shape_rgb,
)
from labelcollage.canvas import Canvas
from labelcollage.index import ExemplarLibrary
from labelcollage.shapes import ShapeDescriptor
from labelcollage import pngio, toygen

from conftest import SMALL_SPEC


def _descriptor(m_vals, v_vals, side):
    return ShapeDescriptor(
        side=side,
        m=np.array(m_vals, dtype=np.int8).reshape(side, side),
        v=np.array(v_vals, dtype=np.uint16).reshape(side, side),
        aspect=1.0,
    )


def random_descriptor(rng, side=50):
    return ShapeDescriptor(
        side=side,
        m=rng.choice(np.array([-1, 1], dtype=np.int8), size=(side, side)),
        v=rng.integers(0, 12, size=(side, side)).astype(np.uint16),
        aspect=float(rng.uniform(0.3, 3.0)),
    )


class TestBuildDescriptor:
    def test_full_bbox_square_mask_all_plus_one(self):
        lab = np.full((20, 20), UNLABELED, dtype=np.uint16)
        lab[4:12, 4:12] = 3
        shapes = extract_shapes(LabelMap(lab, 8), InstanceMap(np.zeros((20, 20), np.uint16)))
        d = build_descriptor(shapes[0], LabelMap(lab, 8), side=10)
        assert (d.m == 1).all()
        assert (d.v == 3).all()

    def test_aspect_is_width_over_height(self):
        lab = np.full((120, 120), UNLABELED, dtype=np.uint16)
        lab[10:60, 10:110] = 2  # 50 rows x 100 cols
        shapes = extract_shapes(LabelMap(lab, 8), InstanceMap(np.zeros((120, 120), np.uint16)))
        d = build_descriptor(shapes[0], LabelMap(lab, 8))
        assert d.aspect == 2.0

    def test_no_resample_round_trip(self):
        rng = np.random.default_rng(0)
        lab = np.full((50, 50), 5, dtype=np.uint16)
        mask = rng.random((50, 50)) < 0.6
        mask[0] = mask[-1] = True
        mask[:, 0] = mask[:, -1] = True
        inst = np.where(mask, 1, 0).astype(np.uint16)
        lab2 = np.where(mask, 2, lab).astype(np.uint16)
        shapes = extract_shapes(LabelMap(lab2, 8), InstanceMap(inst))
        thing = [s for s in shapes if s.instance_id == 1][0]
        d = build_descriptor(thing, LabelMap(lab2, 8), side=50)
        assert ((d.m == 1) == thing.mask).all()


class TestScoreShape:
    def test_identical_reaches_maximum(self):
        rng = np.random.default_rng(1)
        d = random_descriptor(rng)
        assert score_shape(d, d) == 2 * 50 * 50

    def test_opposed_mask_disjoint_context(self):
        d1 = _descriptor([1] * 2500, [1] * 2500, 50)
        d2 = _descriptor([-1] * 2500, [2] * 2500, 50)
        assert score_shape(d1, d2) == -2500

    def test_side_two_hand_computed(self):
        # mask products: +1 -1 +1 -1 = 0; context matches at entries 0 and 2.
        d_q = _descriptor([1, 1, -1, -1], [3, 3, 0, 0], 2)
        d_e = _descriptor([1, -1, -1, 1], [3, 5, 0, 7], 2)
        assert score_shape(d_q, d_e) == 2

    def test_side_mismatch_raises(self):
        rng = np.random.default_rng(2)
        with pytest.raises(ValueError):
            score_shape(random_descriptor(rng, 50), random_descriptor(rng, 40))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 6))
    def test_symmetry_bounds_and_pure_python_oracle(self, seed, side):
        rng = np.random.default_rng(seed)
        a = random_descriptor(rng, side)
        b = random_descriptor(rng, side)
        s = score_shape(a, b)
        assert s == score_shape(b, a)
        assert -side * side <= s <= 2 * side * side
        # entry-by-entry oracle
        expected = 0
        for i in range(side):
            for j in range(side):
                expected += int(a.m[i, j]) * int(b.m[i, j])
                expected += 1 if a.v[i, j] == b.v[i, j] else 0
        assert s == expected

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_self_score_is_unique_maximum(self, seed):
        rng = np.random.default_rng(seed)
        d = random_descriptor(rng, 4)
        other = random_descriptor(rng, 4)
        assert score_shape(d, d) == 32
        if not ((d.m == other.m).all() and (d.v == other.v).all()):
            assert score_shape(d, other) < 32


def _self_scale_shape(scale):
    base = np.zeros((8, 8), dtype=bool)
    base[1:7, 2:6] = True
    base[3, 0:2] = True  # limb, keeps it non-square
    big = np.kron(base, np.ones((scale, scale), dtype=bool))
    lab = np.full(big.shape, UNLABELED, dtype=np.uint16)
    lab[big] = 4
    inst = np.where(big, 1, 0).astype(np.uint16)
    return extract_shapes(LabelMap(lab, 8), InstanceMap(inst))[0], LabelMap(lab, 8)


@pytest.mark.parametrize("scale", [1, 2, 4])
def test_integer_upscaling_preserves_descriptor(scale):
    s1, l1 = _self_scale_shape(1)
    s2, l2 = _self_scale_shape(scale)
    d1 = build_descriptor(s1, l1, side=8)
    d2 = build_descriptor(s2, l2, side=8)
    assert (d1.m == d2.m).all() and (d1.v == d2.v).all()
    assert score_shape(d2, d2) == 2 * 64


class TestRetrieveCandidates:
    def test_verbatim_shape_ranks_first_with_max_score(self, small_lib):
        rec = small_lib.record(4)
        target = max(rec.shapes, key=lambda s: s.area)
        cs = retrieve_candidates(target, rec.labels, list(range(len(small_lib))),
                                 small_lib, k=5)
        top = cs.candidates[0]
        assert (top.exemplar_id, top.shape_id) == (4, target.shape_id)
        assert top.score == 2 * 50 * 50

    def test_aspect_gate_excludes(self, tmp_path):
        # query aspect 1.0 vs candidate aspect 0.4 -> quotient 2.5 > 2.
        lab_q = np.full((30, 30), UNLABELED, dtype=np.uint16)
        lab_q[5:15, 5:15] = 1
        q_labels = LabelMap(lab_q, 4)
        q_shape = extract_shapes(q_labels, InstanceMap(np.zeros((30, 30), np.uint16)))[0]

        lab_e = np.full((40, 40), UNLABELED, dtype=np.uint16)
        lab_e[5:30, 5:15] = 1  # 25 rows x 10 cols -> aspect 0.4
        rec = build_record(0, "images/0.png", LabelMap(lab_e, 4),
                           InstanceMap(np.zeros((40, 40), np.uint16)))
        lib = ExemplarLibrary(tmp_path, [rec], 4, list("abcd"))
        cs = retrieve_candidates(q_shape, q_labels, [0], lib, k=5)
        assert len(cs) == 0

    def test_gate_boundary_inclusive(self, tmp_path):
        lab_q = np.full((30, 30), UNLABELED, dtype=np.uint16)
        lab_q[5:15, 5:15] = 1  # aspect 1.0
        q_labels = LabelMap(lab_q, 4)
        q_shape = extract_shapes(q_labels, InstanceMap(np.zeros((30, 30), np.uint16)))[0]
        lab_e = np.full((40, 40), UNLABELED, dtype=np.uint16)
        lab_e[5:25, 5:15] = 1  # aspect 0.5 -> quotient exactly 2.0
        rec = build_record(0, "images/0.png", LabelMap(lab_e, 4),
                           InstanceMap(np.zeros((40, 40), np.uint16)))
        lib = ExemplarLibrary(tmp_path, [rec], 4, list("abcd"))
        cs = retrieve_candidates(q_shape, q_labels, [0], lib, k=5)
        assert len(cs) == 1

    def test_empty_pool_empty_set(self, small_lib):
        lab = np.full((20, 20), UNLABELED, dtype=np.uint16)
        reserved = SMALL_SPEC.categories - 1  # toygen never uses it
        lab[2:10, 2:10] = reserved
        labels = LabelMap(lab, SMALL_SPEC.categories)
        shape = extract_shapes(labels, InstanceMap(np.zeros((20, 20), np.uint16)))[0]
        cs = retrieve_candidates(shape, labels, list(range(len(small_lib))), small_lib, k=5)
        assert len(cs) == 0

    def test_matches_exhaustive_oracle(self, small_lib):
        from labelcollage.shapes import ASPECT_MAX, ASPECT_MIN

        rng = np.random.default_rng(33)
        top = list(range(len(small_lib)))
        for salt in range(6):
            q_labels, q_inst = toygen.scene_maps(SMALL_SPEC, 900 + salt, seed_salt=21)
            q_shapes = extract_shapes(q_labels, q_inst)
            shape = q_shapes[rng.integers(0, len(q_shapes))]
            got = retrieve_candidates(shape, q_labels, top, small_lib, k=5)

            d_q = build_descriptor(shape, q_labels)
            scored = []
            for ex, sid in small_lib.shape_catalog.get(shape.category, []):
                cand = small_lib.shape(ex, sid)
                quotient = d_q.aspect / cand.aspect
                if quotient < ASPECT_MIN or quotient > ASPECT_MAX:
                    continue
                d_e = build_descriptor(cand, small_lib.record(ex).labels)
                scored.append((ex, sid, score_shape(d_q, d_e)))
            scored.sort(key=lambda t: (-t[2], t[0], t[1]))
            expected = scored[:5]
            assert [(c.exemplar_id, c.shape_id, c.score) for c in got.candidates] == expected


class TestTransfer:
    def _single_shape_library(self, tmp_path, size=40):
        rng = np.random.default_rng(9)
        lab = np.full((size, size), 0, dtype=np.uint16)
        mask = np.zeros((size, size), dtype=bool)
        mask[8:30, 10:34] = True
        mask[12:16, 4:10] = True
        lab[mask] = 2
        inst = np.where(mask, 1, 0).astype(np.uint16)
        img = rng.integers(10, 240, size=(size, size, 3), dtype=np.uint8)
        root = tmp_path / "data"
        (root / "images").mkdir(parents=True)
        pngio.write_rgb(root / "images" / "000000.png", img)
        rec = build_record(0, "images/000000.png", LabelMap(lab, 4), InstanceMap(inst))
        lib = ExemplarLibrary(root, [rec], 4, list("abcd"))
        return lib, img

    def test_self_transfer_exact(self, tmp_path):
        lib, img = self._single_shape_library(tmp_path)
        rec = lib.record(0)
        thing = [s for s in rec.shapes if s.instance_id == 1][0]
        canvas = Canvas(40, 40)
        cs = retrieve_candidates(thing, rec.labels, [0], lib, k=1)
        report = transfer_shape_rgb(thing, cs.candidates[0], lib, canvas)
        assert report.pixels_written == thing.area
        r0, c0, rows, cols = thing.bbox
        region = canvas.image[r0 : r0 + rows, c0 : c0 + cols]
        assert (region[thing.mask] == img[r0 : r0 + rows, c0 : c0 + cols][thing.mask]).all()

    def test_partial_mask_fill_fraction(self, tmp_path):
        lib, _ = self._single_shape_library(tmp_path)
        rec = lib.record(0)
        thing = [s for s in rec.shapes if s.instance_id == 1][0]
        # Query shape: same bbox grid but a larger mask (superset).
        r0, c0, rows, cols = thing.bbox
        big_mask = np.ones((rows, cols), dtype=bool)
        from labelcollage import ShapeInstance

        query = ShapeInstance(0, 2, 1, thing.bbox, big_mask, rows * cols)
        canvas = Canvas(40, 40)
        from labelcollage.shapes import Candidate

        report = transfer_shape_rgb(query, Candidate(0, thing.shape_id, 0), lib, canvas)
        # Candidate bbox equals query bbox, so no resampling: intersection
        # is the candidate mask itself.
        assert report.pixels_written == int(thing.mask.sum())
        assert report.pixels_written == int((big_mask & thing.mask).sum())

    def test_never_overwrites_filled(self, tmp_path):
        lib, _ = self._single_shape_library(tmp_path)
        rec = lib.record(0)
        thing = [s for s in rec.shapes if s.instance_id == 1][0]
        canvas = Canvas(40, 40)
        canvas.filled[:] = True
        canvas.image[:] = 7
        cs = retrieve_candidates(thing, rec.labels, [0], lib, k=1)
        report = transfer_shape_rgb(thing, cs.candidates[0], lib, canvas)
        assert report.pixels_written == 0
        assert (canvas.image == 7).all()

    def test_never_writes_outside_query_mask(self, tmp_path):
        lib, _ = self._single_shape_library(tmp_path)
        rec = lib.record(0)
        thing = [s for s in rec.shapes if s.instance_id == 1][0]
        canvas = Canvas(40, 40)
        cs = retrieve_candidates(thing, rec.labels, [0], lib, k=1)
        transfer_shape_rgb(thing, cs.candidates[0], lib, canvas)
        r0, c0, rows, cols = thing.bbox
        outside = np.ones((40, 40), dtype=bool)
        outside[r0 : r0 + rows, c0 : c0 + cols][thing.mask] = False
        assert not canvas.filled[outside].any()
