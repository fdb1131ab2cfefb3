import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wmscore.errors import DimensionMismatchError, InvalidParameterError
from wmscore.masks import BinaryMask
from wmscore.metrics import (
    ImageConfusion,
    PixelConfusion,
    background_iou,
    dataset_pixel_confusion,
    e_precision,
    image_confusion,
    mean_iou,
    pairwise_ranking_table,
    pixel_confusion,
    pixel_metrics,
)


def test_perfect_prediction(rng):
    m = BinaryMask(rng.random((8, 8)) > 0.6)
    c = pixel_confusion(m, m)
    assert c.fp == c.fn == 0
    pm = pixel_metrics(c)
    assert pm.precision == pm.recall == pm.iou == 1.0


def test_disjoint_prediction():
    a = np.zeros((4, 4), np.uint8)
    b = np.zeros((4, 4), np.uint8)
    a[0, :2], b[3, 2:] = 1, 1
    pm = pixel_metrics(pixel_confusion(BinaryMask(a), BinaryMask(b)))
    assert pm.precision == pm.recall == pm.iou == 0.0


def test_two_by_two_by_hand():
    c = pixel_confusion(BinaryMask(np.array([[1, 1], [0, 0]])), BinaryMask(np.array([[1, 0], [1, 0]])))
    assert (c.tp, c.fp, c.fn, c.tn) == (1, 1, 1, 1)
    pm = pixel_metrics(c)
    assert (pm.precision, pm.recall) == (0.5, 0.5)
    assert pm.iou == pytest.approx(1 / 3, abs=1e-15)


def test_pixel_metric_arithmetic():
    pm = pixel_metrics(PixelConfusion(tp=1, fp=0, fn=0, tn=5))
    assert pm.precision == pm.recall == pm.iou == 1.0
    pm = pixel_metrics(PixelConfusion(tp=0, fp=0, fn=0, tn=9))
    assert pm.precision is None and pm.recall is None and pm.iou is None
    pm = pixel_metrics(PixelConfusion(tp=3, fp=1, fn=2, tn=0))
    assert (pm.precision, pm.recall, pm.iou) == (0.75, 0.6, 0.5)


def test_background_iou():
    assert background_iou(PixelConfusion(tp=1, fp=1, fn=1, tn=1)) == pytest.approx(1 / 3)
    assert background_iou(PixelConfusion(tp=4)) is None


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        pixel_confusion(BinaryMask.ones(2, 3), BinaryMask.ones(3, 2))


def test_aggregate_equals_concatenation(rng):
    pairs = [(BinaryMask(rng.random((5, 7)) > 0.5), BinaryMask(rng.random((5, 7)) > 0.4)) for _ in range(6)]
    total = dataset_pixel_confusion(pairs)
    big_pred = BinaryMask(np.concatenate([p.values for p, _ in pairs]))
    big_truth = BinaryMask(np.concatenate([t.values for _, t in pairs]))
    assert total == pixel_confusion(big_pred, big_truth)
    # partial sums in any grouping give the same total
    halves = dataset_pixel_confusion(pairs[:3]) + dataset_pixel_confusion(pairs[3:])
    assert halves == total


def test_mean_iou():
    assert mean_iou(1.0, 1.0) == 1.0
    assert mean_iou(0.5, 1.0) == 0.75
    assert mean_iou(0.5, 1.0, (0.06, 0.94)) == pytest.approx(0.06 * 0.5 + 0.94)
    with pytest.raises(InvalidParameterError):
        mean_iou(0.5, 1.0, (0.5, 0.6))
    with pytest.raises(InvalidParameterError):
        mean_iou(1.5, 1.0)


def test_image_confusion():
    assert image_confusion([(True, True), (False, False)]) == ImageConfusion(1, 0, 0, 1)
    assert image_confusion([(False, True)]).ifn == 1
    mixed = [(True, True), (True, False), (False, True), (False, False)]
    assert image_confusion(mixed) == ImageConfusion(itp=1, ifp=1, ifn=1, itn=1)
    c = image_confusion([(True, True)] * 3 + [(True, False)])
    assert c.iprecision == 0.75 and c.irecall == 1.0


@pytest.mark.parametrize(
    "iprecision,expected",
    # ePrecision column of the image-level comparison tables, beta = 0.1
    [(0.7610, 0.2613), (0.9721, 0.7951), (0.9424, 0.6451)],
)
def test_e_precision_reported_values(iprecision, expected):
    itp, ifp = round(iprecision * 10000), round((1 - iprecision) * 10000)
    assert e_precision(itp, ifp, 0.1) == pytest.approx(expected, abs=5e-4)


def test_e_precision_properties():
    assert e_precision(30, 10, 0.5) == 0.75
    assert e_precision(0, 0, 0.1) is None
    values = [e_precision(30, 10, b) for b in (0.01, 0.1, 0.3, 0.5, 0.9)]
    assert values == sorted(values) and len(set(values)) == len(values)
    with pytest.raises(InvalidParameterError):
        e_precision(1, 1, 1.0)


@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_e_precision_half_is_iprecision(itp, ifp):
    if itp + ifp == 0:
        assert e_precision(itp, ifp, 0.5) is None
    else:
        assert e_precision(itp, ifp, 0.5) == pytest.approx(itp / (itp + ifp), rel=1e-15)


def test_ranking_examples():
    monotone = [(0.1, 0), (0.2, 0), (0.4, 1), (0.5, 2), (0.7, 2), (0.9, 3)]
    table = pairwise_ranking_table(monotone)
    assert all(c.percentage == 100.0 for c in table.cells.values())
    assert set(table.cells) == {(a, b) for a in range(4) for b in range(4) if a > b}

    flat = pairwise_ranking_table([(0.5, lv) for lv in (0, 1, 2, 3, 3)])
    assert all(c.percentage == 0.0 for c in flat.cells.values())

    table = pairwise_ranking_table([(0.9, 3), (0.4, 3), (0.5, 1), (0.1, 1)])
    assert table.cells[(3, 1)].correct == 3 and table.cells[(3, 1)].total == 4
    assert table.accuracy(3, 1) == 75.0
    assert table.accuracy(2, 1) is None


def brute_force_ranking(items):
    cells = {}
    for (sa, la), (sb, lb) in itertools.permutations(items, 2):
        if la > lb:
            c, t = cells.get((la, lb), (0, 0))
            cells[(la, lb)] = (c + (sa > sb), t + 1)
    return cells


def test_ranking_matches_brute_force(rng):
    for _ in range(20):
        n = int(rng.integers(2, 40))
        items = [(float(rng.integers(0, 6)) / 5, int(rng.integers(0, 4))) for _ in range(n)]
        if len({lv for _, lv in items}) < 2:
            continue
        got = {k: (c.correct, c.total) for k, c in pairwise_ranking_table(items).cells.items()}
        assert got == brute_force_ranking(items)


def test_ranking_level_filter_and_errors():
    items = [(0.1, 0), (0.5, 1), (0.9, 3)]
    table = pairwise_ranking_table(items, include_levels={1, 2, 3})
    assert set(table.cells) == {(3, 1)}
    with pytest.raises(InvalidParameterError):
        pairwise_ranking_table([(0.1, 2), (0.3, 2)])
    with pytest.raises(InvalidParameterError):
        pairwise_ranking_table([(0.1, 5), (0.3, 2)])


def test_ranking_csv_layout():
    table = pairwise_ranking_table([(0.9, 3), (0.4, 3), (0.5, 1), (0.1, 1), (0.0, 0)])
    lines = table.to_csv().splitlines()
    assert lines[0] == ",3,2,1"
    assert lines[1] == "0,100.00,N/A,100.00"
    assert lines[2] == "1,75.00,N/A,N/A"
    assert lines[3] == "2,N/A,N/A,N/A"
