import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import brute_force_raster, random_convex_polygon
from wmscore.errors import InvalidAnnotationError, InvalidDimensionsError, InvalidParameterError
from wmscore.masks import (
    AnnotationSet,
    BinaryMask,
    ImageDecision,
    LikelihoodMap,
    classify_image,
    hybrid_combine,
    hybrid_labels,
    rasterize_polygons,
    threshold_likelihood,
)


def test_empty_annotation_is_all_zero():
    mask = rasterize_polygons(AnnotationSet("neg", 10, 10, ()))
    assert mask.shape == (10, 10)
    assert mask.count == 0


def test_full_extent_rectangle_is_all_one():
    ann = AnnotationSet("full", 8, 8, (((0, 0), (8, 0), (8, 8), (0, 8)),))
    assert rasterize_polygons(ann) == BinaryMask.ones(8, 8)


def test_corner_square_has_25_pixels():
    # frozen from brute_force_raster over all 100 centers
    ann = AnnotationSet("sq", 10, 10, (((0, 0), (5, 0), (5, 5), (0, 5)),))
    mask = rasterize_polygons(ann)
    assert mask.count == 25
    assert mask.values[:5, :5].all()
    np.testing.assert_array_equal(mask.values, brute_force_raster(10, 10, ann.polygons))


def test_overlapping_polygons_stay_binary():
    a = ((1, 1), (6, 1), (6, 6), (1, 6))
    b = ((3, 3), (8, 3), (8, 8), (3, 8))
    mask = rasterize_polygons(AnnotationSet("ov", 10, 10, (a, b)))
    assert set(np.unique(mask.values)) <= {0, 1}
    assert mask.count == 25 + 25 - 9


def test_self_intersecting_uses_even_odd():
    # a pentagram: the inner pentagon is crossed twice and stays empty
    import math

    pts = [(10 + 9 * math.cos(math.pi / 2 + k * 4 * math.pi / 5), 10 - 9 * math.sin(math.pi / 2 + k * 4 * math.pi / 5)) for k in range(5)]
    ann = AnnotationSet("star", 20, 20, (tuple(pts),))
    mask = rasterize_polygons(ann)
    assert mask.values[10, 10] == 0
    np.testing.assert_array_equal(mask.values, brute_force_raster(20, 20, [pts]))


def test_degenerate_polygon_rasterizes_to_nothing():
    ann = AnnotationSet("line", 10, 10, (((1, 1), (5, 5), (9, 9)),))
    assert rasterize_polygons(ann).count == 0


def test_fractional_and_out_of_bounds_vertices():
    ann = AnnotationSet("oob", 6, 6, (((-3.2, -1.0), (4.7, -2.0), (4.7, 3.3), (-3.2, 3.3)),))
    np.testing.assert_array_equal(rasterize_polygons(ann).values, brute_force_raster(6, 6, ann.polygons))


def test_annotation_errors():
    with pytest.raises(InvalidAnnotationError):
        AnnotationSet("bad", 10, 10, (((0, 0), (1, 1)),))
    with pytest.raises(InvalidDimensionsError):
        AnnotationSet("bad", 0, 10, ())
    with pytest.raises(InvalidDimensionsError):
        AnnotationSet("bad", 5, -1, ())


def test_annotation_dict_round_trip():
    ann = AnnotationSet("x", 7, 5, (((0.5, 1), (3, 1), (2, 4.25)),))
    assert AnnotationSet.from_dict(ann.to_dict()) == ann
    with pytest.raises(InvalidAnnotationError):
        AnnotationSet.from_dict({"image_id": "x", "width": 3})


def test_random_convex_polygons_match_oracle(rng):
    for _ in range(40):
        w, h = int(rng.integers(1, 33)), int(rng.integers(1, 33))
        polys = [random_convex_polygon(rng, w, h) for _ in range(int(rng.integers(1, 3)))]
        ann = AnnotationSet("r", w, h, tuple(tuple(p) for p in polys))
        np.testing.assert_array_equal(rasterize_polygons(ann).values, brute_force_raster(w, h, polys))


def test_threshold_examples():
    assert threshold_likelihood(LikelihoodMap.filled(4, 3, 0.8), 0.75) == BinaryMask.ones(4, 3)
    assert threshold_likelihood(LikelihoodMap.filled(4, 3, 0.5), 0.75) == BinaryMask.zeros(4, 3)
    lmap = LikelihoodMap(np.array([[0.9, 0.7], [0.75, 0.2]]))
    np.testing.assert_array_equal(threshold_likelihood(lmap, 0.75).values, [[1, 0], [1, 0]])


def test_threshold_limits():
    lmap = LikelihoodMap(np.array([[0.0, 0.3], [1.0, 0.99]]))
    assert threshold_likelihood(lmap, 0.0).count == 4
    np.testing.assert_array_equal(threshold_likelihood(lmap, 1.0).values, [[0, 0], [1, 0]])
    with pytest.raises(InvalidParameterError):
        threshold_likelihood(lmap, 1.5)


def test_likelihood_map_validation():
    with pytest.raises(InvalidParameterError):
        LikelihoodMap(np.array([[0.5, 1.2]]))
    with pytest.raises(InvalidDimensionsError):
        LikelihoodMap(np.zeros((0, 3)))
    with pytest.raises(InvalidParameterError):
        BinaryMask(np.array([[0, 2]]))


def test_types_are_immutable():
    mask = BinaryMask.zeros(3, 3)
    with pytest.raises(ValueError):
        mask.values[0, 0] = 1
    src = np.zeros((2, 2))
    lmap = LikelihoodMap(src)
    src[0, 0] = 1.0
    assert lmap.values[0, 0] == 0.0


def test_classify_examples():
    assert classify_image(BinaryMask.zeros(100, 100), 0.001).w == 0
    for t in (0.0, 0.001, 0.5, 0.999):
        assert classify_image(BinaryMask.ones(10, 10), t).w == 1
    vals = np.zeros((100, 100), dtype=np.uint8)
    vals[0, :5] = 1
    d = classify_image(BinaryMask(vals), 0.001)
    assert (d.w, d.watermark_pixel_count, d.threshold_used) == (0, 5, 10)


def test_classify_boundary_is_strict():
    vals = np.zeros((100, 100), dtype=np.uint8)
    vals.flat[:10] = 1
    assert classify_image(BinaryMask(vals), 0.001).w == 0
    vals.flat[10] = 1
    assert classify_image(BinaryMask(vals), 0.001).w == 1


def test_image_decision_invariant():
    with pytest.raises(InvalidParameterError):
        ImageDecision(w=1, watermark_pixel_count=3, threshold_used=5)


def test_hybrid_examples(rng):
    seg = BinaryMask(rng.random((6, 7)) > 0.5)
    off = ImageDecision(0, 0, 0)
    on = ImageDecision(1, 5, 0)
    assert hybrid_combine(off, seg) == BinaryMask.zeros(7, 6)
    assert hybrid_combine(on, seg) == seg
    assert hybrid_combine(on, BinaryMask.zeros(7, 6)) == BinaryMask.zeros(7, 6)


def test_hybrid_labels_with_separate_classifier():
    seg_map = LikelihoodMap(np.full((10, 10), 0.9))
    quiet = LikelihoodMap(np.zeros((10, 10)))
    decision, labels = hybrid_labels(seg_map, 0.75, 0.001, classifier_map=quiet)
    assert decision.w == 0 and labels.is_empty()
    decision, labels = hybrid_labels(seg_map, 0.75, 0.001)
    assert decision.w == 1 and labels.count == 100


likelihoods = arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.floats(0, 1))


@given(likelihoods, st.floats(0, 1), st.floats(0, 1))
def test_threshold_monotone(values, p1, p2):
    lo, hi = sorted((p1, p2))
    lmap = LikelihoodMap(values)
    strict = threshold_likelihood(lmap, hi).values
    loose = threshold_likelihood(lmap, lo).values
    assert np.all(strict <= loose)


@given(likelihoods, st.floats(0, 1), st.floats(0, 0.2))
def test_hybrid_is_subset_of_segmentation(values, p, t_frac):
    lmap = LikelihoodMap(values)
    seg = threshold_likelihood(lmap, p)
    _, labels = hybrid_labels(lmap, p, t_frac)
    assert np.all(labels.values <= seg.values)


@settings(max_examples=50)
@given(st.integers(1, 20), st.integers(1, 20), st.floats(0, 1), st.data())
def test_classify_monotone_in_count(w, h, t_frac, data):
    n = w * h
    k1 = data.draw(st.integers(0, n))
    k2 = data.draw(st.integers(k1, n))
    a, b = np.zeros(n, np.uint8), np.zeros(n, np.uint8)
    a[:k1], b[:k2] = 1, 1
    da = classify_image(BinaryMask(a.reshape(h, w)), t_frac)
    db = classify_image(BinaryMask(b.reshape(h, w)), t_frac)
    assert da.w <= db.w
