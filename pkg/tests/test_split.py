import numpy as np
import pytest
import torch

from tablestruct import core
from tablestruct.core import AXIS_COL, AXIS_ROW
from tablestruct.split import (
    ReferencePoint,
    SeparatorPrediction,
    SplitBranch,
    detect_reference_points,
    predictions_to_separators,
    sample_prior_features,
    select_reference_indices,
)


def brute_force_select(scores, window=7, topk=100, thresh=0.05):
    n = len(scores)
    half = window // 2
    keep = [i for i in range(n)
            if scores[i] == max(scores[max(0, i - half):min(n, i + half + 1)])]
    keep.sort(key=lambda i: (-scores[i], i))
    keep = [i for i in keep[:topk] if scores[i] >= thresh]
    return sorted(keep)


def test_select_two_close_peaks():
    s = np.full(64, 0.01)
    s[10] = 0.9
    s[12] = 0.8
    assert select_reference_indices(s).tolist() == [10]


def test_select_all_below_threshold():
    s = np.full(64, 0.04)
    assert select_reference_indices(s).size == 0


def test_select_top_100_of_150_peaks():
    s = np.zeros(1500)
    g = np.random.default_rng(0)
    scores = g.uniform(0.05, 0.95, 150)
    for k in range(150):
        s[10 * k + 3] = scores[k]
    out = select_reference_indices(s)
    assert out.size == 100
    expected = sorted(sorted(range(150), key=lambda k: -scores[k])[:100])
    assert out.tolist() == [10 * k + 3 for k in expected]


def test_select_matches_brute_force():
    g = np.random.default_rng(42)
    for _ in range(200):
        n = int(g.integers(5, 400))
        s = np.round(g.random(n), 3)  # duplicates exercise tie-breaking
        got = select_reference_indices(s).tolist()
        assert got == brute_force_select(s)


def _tiny_branch(axis=AXIS_ROW):
    torch.manual_seed(0)
    return SplitBranch(axis, in_channels=8, hr_channels=32, heads=4, ffn_dim=64,
                       decoder_layers=2).eval()


def test_detection_ignores_off_prior_columns():
    branch = _tiny_branch()
    hr = torch.randn(1, 32, 64, 96)
    with torch.no_grad():
        refs_a = detect_reference_points(branch, hr)
        perturbed = hr.clone()
        tau = core.prior_position(96)
        mask = torch.ones(96, dtype=torch.bool)
        mask[tau] = False
        perturbed[:, :, :, mask] += torch.randn_like(perturbed[:, :, :, mask]) * 5
        refs_b = detect_reference_points(branch, perturbed)
    assert [r.index for r in refs_a] == [r.index for r in refs_b]


def test_sample_prior_features_is_a_gather():
    branch = _tiny_branch()
    hr = torch.randn(1, 32, 128, 512)
    got = sample_prior_features(branch, hr)
    assert got.shape == (1, 32, 128, 15)
    xs = core.canonical_positions(512).astype(int)
    assert xs.tolist() == [32 * i for i in range(1, 16)]
    for j, x in enumerate(xs):
        assert torch.equal(got[:, :, :, j], hr[:, :, :, x])


def test_decoder_output_shapes():
    branch = _tiny_branch()
    mem = torch.randn(32, 48, 15)
    refs = [ReferencePoint(i * 7, 0.9, torch.randn(32)) for i in range(5)]
    with torch.no_grad():
        preds = branch.decode(refs, mem, (48, 96), tau=24)
    assert len(preds) == 5
    for p in preds:
        assert p.coords.shape == (45,)
        assert p.class_logit.dim() == 0
        assert float(p.coords.min()) >= 0.0 and float(p.coords.max()) <= 1.0


def test_decoder_empty_refs():
    branch = _tiny_branch()
    assert branch.decode([], torch.randn(32, 48, 15), (48, 96), 24) == []


def test_decoder_permutation_equivariance():
    branch = _tiny_branch()
    mem = torch.randn(32, 48, 15)
    refs = [ReferencePoint(int(i), 0.9, torch.randn(32)) for i in (3, 11, 25, 40)]
    with torch.no_grad():
        preds = branch.decode(refs, mem, (48, 96), 24)
        perm = [2, 0, 3, 1]
        preds_p = branch.decode([refs[i] for i in perm], mem, (48, 96), 24)
    for out_idx, src_idx in enumerate(perm):
        assert torch.allclose(preds_p[out_idx].coords, preds[src_idx].coords, atol=1e-5)
        assert torch.allclose(preds_p[out_idx].class_logit, preds[src_idx].class_logit,
                              atol=1e-5)


def _pred(logit, coords):
    return SeparatorPrediction(torch.tensor(float(logit)), torch.as_tensor(coords).float())


def test_predictions_to_separators_denormalizes():
    seps = predictions_to_separators([_pred(5.0, np.full(45, 0.5))], AXIS_ROW, (200, 160))
    assert len(seps) == 1
    sep = seps[0]
    assert np.allclose(sep.center.values, 100.0)
    assert np.allclose(sep.top.values, sep.bottom.values)
    assert np.array_equal(sep.sample_positions, core.canonical_positions(160))


def test_predictions_identical_bands_deduplicated():
    a = _pred(3.0, np.full(45, 0.5))
    b = _pred(1.0, np.full(45, 0.5))
    seps = predictions_to_separators([a, b], AXIS_ROW, (200, 160))
    assert len(seps) == 1
    assert seps[0].score == pytest.approx(torch.sigmoid(torch.tensor(3.0)).item())


def test_predictions_threshold():
    lo = torch.logit(torch.tensor(0.4)).item()
    hi = torch.logit(torch.tensor(0.9)).item()
    coords_hi = np.full(45, 0.3)
    coords_lo = np.full(45, 0.7)
    seps = predictions_to_separators(
        [_pred(hi, coords_hi), _pred(lo, coords_lo)], AXIS_ROW, (200, 160), score_thresh=0.5)
    assert len(seps) == 1
    assert np.allclose(seps[0].center.values, 0.3 * 200)


def test_predictions_column_axis_uses_width_scale():
    seps = predictions_to_separators([_pred(5.0, np.full(45, 0.25))], AXIS_COL, (128, 400))
    assert len(seps) == 1
    assert np.allclose(seps[0].center.values, 100.0)  # 0.25 * W
    assert np.array_equal(seps[0].sample_positions, core.canonical_positions(128))


def test_predictions_unsorted_triple_is_reordered():
    coords = np.concatenate([np.full(15, 0.6), np.full(15, 0.5), np.full(15, 0.4)])
    sep = predictions_to_separators([_pred(5.0, coords)], AXIS_ROW, (100, 160))[0]
    assert np.all(sep.top.values <= sep.center.values)
    assert np.all(sep.center.values <= sep.bottom.values)
