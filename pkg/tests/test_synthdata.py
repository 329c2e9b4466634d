import math

import numpy as np
import pytest

from tablestruct import core, synthdata
from tablestruct.core import AXIS_COL, AXIS_ROW
from tablestruct.errors import InvalidInputError
from tablestruct.synthdata import TableSpec, WarpParams, apply_warp, derive_targets, generate_table

IN_BAND_FLOOR = 10.0 ** -0.25


def test_three_by_three_counts():
    img, ann = generate_table(TableSpec(seed=7, n_rows=3, n_cols=3, span_prob=0.0))
    assert len(ann.cells) == 9
    assert len(ann.row_separators) == 2
    assert len(ann.col_separators) == 2
    assert img.dtype == np.uint8 and img.shape[2] == 3
    assert np.array_equal(img[:, :, 0], img[:, :, 1])  # grayscale replicated


def test_generation_is_deterministic():
    spec = TableSpec(seed=42, n_rows=5, n_cols=4, span_prob=0.4, empty_prob=0.2,
                     warp=WarpParams(rotation_deg=1.0, amp_y=3.0, wavelength=150.0))
    img1, ann1 = generate_table(spec)
    img2, ann2 = generate_table(spec)
    assert np.array_equal(img1, img2)
    assert core.annotation_to_dict(ann1) == core.annotation_to_dict(ann2)


def test_forced_spanning():
    _, ann = generate_table(TableSpec(seed=1, n_rows=2, n_cols=2, span_prob=1.0))
    assert any(c.row_span > 1 or c.col_span > 1 for c in ann.cells)


def test_spec_bounds_validated():
    with pytest.raises(InvalidInputError):
        TableSpec(seed=0, n_rows=1, n_cols=3)
    with pytest.raises(InvalidInputError):
        TableSpec(seed=0, n_rows=3, n_cols=9)
    with pytest.raises(InvalidInputError):
        TableSpec(seed=0, n_rows=3, n_cols=3, span_prob=1.5)


def test_identity_warp_is_identity():
    _, ann = generate_table(TableSpec(seed=5, n_rows=3, n_cols=3))
    img = np.full((*ann.image_size, 3), 255, np.uint8)
    _, out = apply_warp(img, ann, WarpParams())
    for a, b in zip(ann.row_separators, out.row_separators):
        assert np.allclose(a.center.values, b.center.values, atol=1e-9)
    for a, b in zip(ann.cells, out.cells):
        assert np.allclose(a.polygon, b.polygon, atol=1e-9)


def test_quarter_rotation_swaps_axes():
    ann = core.TableAnnotation(
        image_size=(100, 100), cells=[],
        row_separators=[core.straight_separator(AXIS_ROW, 40.0, 100, half_width=3.0)],
        col_separators=[])
    img = np.full((100, 100, 3), 255, np.uint8)
    _, out = apply_warp(img, ann, WarpParams(rotation_deg=90.0))
    assert len(out.row_separators) == 0
    assert len(out.col_separators) == 1
    # (x, y) -> (cx - (y - cy), cy + (x - cx)) about the center (49.5, 49.5)
    assert np.allclose(out.col_separators[0].center.values, 59.0, atol=1e-9)


def test_sinusoid_warp_matches_formula_at_canonical_positions():
    ann = core.TableAnnotation(
        image_size=(100, 100), cells=[],
        row_separators=[core.straight_separator(AXIS_ROW, 40.0, 100, half_width=3.0)],
        col_separators=[])
    img = np.full((100, 100, 3), 255, np.uint8)
    w = WarpParams(amp_y=5.0, wavelength=120.0, phase=0.7)
    _, out = apply_warp(img, ann, w)
    sep = out.row_separators[0]
    expected = 40.0 + 5.0 * np.sin(2 * np.pi * sep.sample_positions / 120.0 + 0.7)
    assert np.allclose(sep.center.values, expected, atol=1e-9)


def _two_row_annotation(h=64, w=64, center=12.0, half=4.0):
    return core.TableAnnotation(
        image_size=(h, w),
        cells=[core.CellBox(0, 0, 0, 0, polygon=[[0, 0], [w, 0], [w, center], [0, center]]),
               core.CellBox(1, 1, 0, 0, polygon=[[0, center], [w, center], [w, h], [0, h]])],
        row_separators=[core.straight_separator(AXIS_ROW, center, w, half_width=half)],
        col_separators=[])


def test_heatmap_worked_values():
    t = derive_targets(_two_row_annotation(), (64, 64))
    assert t.row_heatmap[12] == 1.0
    assert abs(t.row_heatmap[8] - IN_BAND_FLOOR) < 1e-9
    assert t.row_heatmap[17] == 0.0


def test_heatmap_band_floor_and_peak():
    g = np.random.default_rng(0)
    for _ in range(20):
        center = float(g.uniform(15, 45))
        half = float(g.uniform(0.8, 5.0))
        t = derive_targets(_two_row_annotation(center=center, half=half), (64, 64))
        ic = int(round(center))
        assert t.row_heatmap[ic] == 1.0
        w_band = max(2 * half, 1.0)
        inside = [i for i in range(64) if abs(i - ic) <= w_band / 2]
        assert all(t.row_heatmap[i] >= IN_BAND_FLOOR - 1e-9 for i in inside)
        assert t.row_heatmap.max() == 1.0


def test_masks_of_same_axis_separators_are_disjoint():
    g = np.random.default_rng(4)
    for i in range(10):
        spec = synthdata.random_spec(g, seed=500 + i, curve_prob=0.5, borderless_prob=0.5)
        _, ann = generate_table(spec)
        h, w = ann.image_size
        total = np.zeros((h, w), np.int64)
        for sep in ann.row_separators:
            single = core.TableAnnotation(ann.image_size, ann.cells, [sep], [])
            total += derive_targets(single, (h, w)).row_mask.astype(np.int64)
        assert total.max() <= 1


def test_regression_targets_normalized_and_ordered():
    _, ann = generate_table(TableSpec(seed=9, n_rows=5, n_cols=4))
    h, w = ann.image_size
    t = derive_targets(ann, (h, w))
    assert t.row_regression.shape == (4, 45)
    assert t.col_regression.shape == (3, 45)
    assert (t.row_regression >= 0).all() and (t.row_regression <= 1).all()
    centers = t.row_regression[:, 15 + 7] * h  # middle sample of the center line
    assert np.all(np.diff(centers) > 0)


def test_merge_labels_mark_span_members():
    _, ann = generate_table(TableSpec(seed=13, n_rows=4, n_cols=4, span_prob=0.9))
    t = derive_targets(ann, ann.image_size)
    from tablestruct.merge import adjacent_pairs

    pairs = adjacent_pairs(4, 4)
    owner = {}
    for i, c in enumerate(ann.cells):
        for r in range(c.row_start, c.row_end + 1):
            for cc in range(c.col_start, c.col_end + 1):
                owner[(r, cc)] = i
    expected = np.array([1 if owner[a] == owner[b] else 0 for a, b in pairs], np.uint8)
    assert np.array_equal(t.merge_labels, expected)
    assert expected.sum() > 0


def test_zero_thickness_band_is_widened_and_flagged():
    ann = _two_row_annotation(half=0.0)
    with pytest.warns(UserWarning):
        t = derive_targets(ann, (64, 64))
    assert t.row_mask.sum() >= 64  # at least one pixel row per column


def test_dataset_round_trip(tmp_path):
    manifest = synthdata.generate_dataset(tmp_path, count=3, seed=5, val_count=1,
                                          test_count=1, curve_prob=0.5)
    assert len(manifest["train"]) == 3
    assert len(manifest["val"]) == 1 and len(manifest["test"]) == 1
    img, ann = synthdata.load_sample(tmp_path, manifest["train"][0])
    assert img.shape[:2] == ann.image_size
    assert (tmp_path / "manifest.json").exists()


def test_overfit_suite_composition(tmp_path):
    specs = synthdata.overfit_specs()
    assert len(specs) == 8
    assert sum(s.span_prob > 0 for s in specs) >= 2
    assert sum(not s.warp.is_identity for s in specs) >= 2
    assert any(s.bordered for s in specs) and any(not s.bordered for s in specs)
    manifest = synthdata.write_specs(tmp_path, specs)
    assert len(manifest["train"]) == 8
