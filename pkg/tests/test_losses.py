import itertools
import math

import numpy as np
import pytest
import torch

from tablestruct import core, losses
from tablestruct.core import AXIS_ROW
from tablestruct.errors import TrainingAbortError
from tablestruct.losses import (
    INF_COST,
    aux_seg_loss,
    line_loss,
    merge_loss_ohem,
    plain_match,
    prior_enhanced_match,
    ref_point_loss,
    total_loss,
)
from tablestruct.split import ReferencePoint, SeparatorPrediction


def _ref(index):
    return ReferencePoint(index, 1.0, torch.zeros(4))


def _sep(center, half, extent=256):
    return core.straight_separator(AXIS_ROW, center, extent, half_width=half)


# ---------------------------------------------------------------------------
# reference point loss
# ---------------------------------------------------------------------------

def test_ref_loss_perfect_prediction_is_zero():
    pred = torch.tensor([1.0, 0.0, 0.0])
    target = torch.tensor([1.0, 0.0, 0.0])
    assert float(ref_point_loss(pred, target, 1)) < 1e-5


def test_ref_loss_positive_worked_value():
    val = float(ref_point_loss(torch.tensor([0.5]), torch.tensor([1.0]), 1))
    assert abs(val - 0.25 * math.log(2.0)) < 1e-9
    assert abs(val - 0.1733) < 1e-4


def test_ref_loss_negative_branch_worked_value():
    t = 10.0 ** -0.25
    val = float(ref_point_loss(torch.tensor([0.1]), torch.tensor([t]), 1))
    expected = (1.0 - t) ** 4 * 0.1 ** 2 * (-math.log(0.9))
    assert abs(val - expected) < 1e-9


def test_ref_loss_no_separators_flagged_zero():
    with pytest.warns(UserWarning):
        val = ref_point_loss(torch.tensor([0.3]), torch.tensor([0.0]), 0)
    assert float(val) == 0.0


def test_ref_loss_permutation_invariant():
    g = torch.Generator().manual_seed(0)
    pred = torch.rand(64, generator=g)
    target = torch.rand(64, generator=g)
    target[5] = 1.0
    perm = torch.randperm(64, generator=g)
    a = ref_point_loss(pred, target, 3)
    b = ref_point_loss(pred[perm], target[perm], 3)
    assert torch.allclose(a, b)


# ---------------------------------------------------------------------------
# matching
# ---------------------------------------------------------------------------

def brute_force_match_cost(indices, gts, x_tau):
    """Minimum total cost over every maximal assignment (oracle)."""
    nq, ng = len(indices), len(gts)
    cost = np.full((nq, ng), INF_COST)
    for g, sep in enumerate(gts):
        top, bottom = sep.band_at(x_tau)
        c = sep.center_at(x_tau)
        for q, idx in enumerate(indices):
            if top < idx < bottom:
                cost[q, g] = abs(idx - c)
    # Finite costs are tiny next to the sentinel, so minimizing the total is
    # the same as minimizing (#sentinel pairs, finite sum) lexicographically;
    # comparing that pair avoids float noise at the 1e9 scale.
    best = (math.inf, math.inf)
    if nq <= ng:
        assignments = (tuple(zip(range(nq), cols))
                       for cols in itertools.permutations(range(ng), nq))
    else:
        assignments = (tuple(zip(rows, range(ng)))
                       for rows in itertools.permutations(range(nq), ng))
    for pairs in assignments:
        n_inf = sum(cost[q, g] >= INF_COST / 2 for q, g in pairs)
        finite = sum(cost[q, g] for q, g in pairs if cost[q, g] < INF_COST / 2)
        best = min(best, (n_inf, finite))
    return best, cost


def test_match_two_refs_two_bands():
    refs = [_ref(10), _ref(50)]
    gts = [_sep(12, 4), _sep(52, 4)]
    a = prior_enhanced_match(refs, gts, x_tau=64)
    assert sorted(a.pairs) == [(0, 0), (1, 1)]
    assert a.unmatched_queries == [] and a.unmatched_gts == []
    assert abs(a.total_cost - 4.0) < 1e-12


def test_match_out_of_band_ref_unmatched():
    a = prior_enhanced_match([_ref(30)], [_sep(12, 4)], x_tau=64)
    assert a.pairs == []
    assert a.unmatched_queries == [0]
    assert a.unmatched_gts == [0]


def test_match_two_refs_one_band():
    refs = [_ref(11), _ref(13)]
    a = prior_enhanced_match(refs, [_sep(12, 4)], x_tau=64)
    assert len(a.pairs) == 1
    q, g = a.pairs[0]
    assert g == 0 and q in (0, 1)
    assert len(a.unmatched_queries) == 1


def test_match_equals_brute_force_small():
    g = np.random.default_rng(11)
    for _ in range(200):
        nq = int(g.integers(0, 6))
        ng = int(g.integers(0, 6))
        refs = [_ref(int(g.integers(0, 200))) for _ in range(nq)]
        centers = np.sort(g.uniform(5, 195, ng))
        gts = [_sep(c, float(g.uniform(0.6, 6.0))) for c in centers]
        a = prior_enhanced_match(refs, gts, x_tau=64)
        if nq and ng:
            best, cost = brute_force_match_cost([r.index for r in refs], gts, 64)
            n_inf = min(nq, ng) - len(a.pairs)
            finite = sum(cost[q, gi] for q, gi in a.pairs)
            assert n_inf == best[0]
            assert abs(finite - best[1]) < 1e-9
            for q, gi in a.pairs:
                assert cost[q, gi] < INF_COST / 2


def test_match_stability_unique_band():
    g = np.random.default_rng(5)
    for _ in range(100):
        centers = np.sort(g.uniform(10, 240, 4))
        if np.min(np.diff(centers)) < 15:
            continue
        gts = [_sep(c, 5.0) for c in centers]
        refs = [_ref(int(round(c + g.uniform(-4, 4)))) for c in centers]
        a = prior_enhanced_match(refs, gts, x_tau=64)
        for q, gi in a.pairs:
            top, bottom = gts[gi].band_at(64)
            assert top < refs[q].index < bottom


def test_plain_match_ignores_bands():
    a = plain_match([_ref(30)], [_sep(12, 4)], x_tau=64)
    assert a.pairs == [(0, 0)]


# ---------------------------------------------------------------------------
# line loss
# ---------------------------------------------------------------------------

def _pred(logit, coords):
    return SeparatorPrediction(torch.tensor(float(logit)), torch.as_tensor(coords).float())


def test_line_loss_perfect_match_is_zero():
    gt = np.full((1, 45), 0.5)
    preds = [_pred(30.0, gt[0])]
    a = prior_enhanced_match([_ref(10)], [_sep(10, 2)], 64)
    val = float(line_loss(preds, gt, a))
    assert val < 1e-6


def test_line_loss_uniform_coordinate_offset():
    gt = np.full((1, 45), 0.4)
    preds = [_pred(30.0, gt[0] + 0.1)]
    a = prior_enhanced_match([_ref(10)], [_sep(10, 2)], 64)
    val = float(line_loss(preds, gt, a))
    assert abs(val - 0.1) < 1e-5


def test_line_loss_empty_queries():
    assert float(line_loss([], np.zeros((0, 45)), prior_enhanced_match([], [], 64))) == 0.0


# ---------------------------------------------------------------------------
# auxiliary segmentation loss
# ---------------------------------------------------------------------------

def test_aux_loss_near_perfect():
    gt = np.zeros((16, 16), np.uint8)
    gt[4:8] = 1
    pred = torch.where(torch.as_tensor(gt) == 1, torch.tensor(1.0 - 1e-7),
                       torch.tensor(1e-7))
    assert float(aux_seg_loss(pred, gt, 64, 64, seed=0)) < 1e-5


def test_aux_loss_uniform_half_is_log2():
    gt = np.zeros((32, 32), np.uint8)
    gt[:8] = 1
    pred = torch.full((32, 32), 0.5)
    val = float(aux_seg_loss(pred, gt, 128, 128, seed=1))
    assert abs(val - math.log(2.0)) < 1e-6


def test_aux_loss_all_negative_class():
    gt = np.zeros((64, 64), np.uint8)
    pred = torch.full((64, 64), 0.2)
    val = float(aux_seg_loss(pred, gt, 1024, 1024, seed=2))
    assert abs(val - (-math.log(0.8))) < 1e-6


def test_aux_loss_sampled_set_size():
    gt = np.zeros((8, 8), np.uint8)
    gt[0, :3] = 1  # only 3 positives available
    sel = losses.sample_pixel_set(gt, 1024, 10, seed=3)
    assert (np.asarray(gt).reshape(-1)[sel] == 1).sum() == 3
    assert (np.asarray(gt).reshape(-1)[sel] == 0).sum() == 10


# ---------------------------------------------------------------------------
# merge OHEM loss
# ---------------------------------------------------------------------------

def test_ohem_perfect_pairs():
    probs = torch.tensor([1.0 - 1e-7, 1e-7, 1e-7])
    labels = np.array([1, 0, 0])
    assert float(merge_loss_ohem(probs, labels)) < 1e-5


def test_ohem_hard_negative_selection():
    probs = torch.cat([torch.full((50,), 0.9), torch.full((50,), 0.1)])
    labels = np.zeros(100)
    val = float(merge_loss_ohem(probs, labels, 64, 64))
    expected = (50 * -math.log(0.1) + 14 * -math.log(0.9)) / 64
    assert abs(val - expected) < 1e-5


def test_ohem_single_positive_half():
    val = float(merge_loss_ohem(torch.tensor([0.5]), np.array([1])))
    assert abs(val - math.log(2.0)) < 1e-6


def test_ohem_empty_flagged_zero():
    with pytest.warns(UserWarning):
        val = merge_loss_ohem(torch.zeros(0), np.zeros(0))
    assert float(val) == 0.0


# ---------------------------------------------------------------------------
# total loss
# ---------------------------------------------------------------------------

def test_total_loss_zero():
    z = torch.zeros(())
    bundle = total_loss(z, z, z, z, z, z, z)
    assert float(bundle.total) == 0.0


def test_total_loss_all_ones():
    one = torch.ones((), dtype=torch.float64)
    bundle = total_loss(one, one, one, one, one, one, one, lam=0.2)
    assert abs(float(bundle.total) - 5.4) < 1e-9


def test_total_loss_single_component():
    z = torch.zeros((), dtype=torch.float64)
    bundle = total_loss(torch.tensor(2.0, dtype=torch.float64), z, z, z, z, z, z, lam=0.2)
    assert abs(float(bundle.total) - 0.4) < 1e-9


def test_total_loss_aborts_on_nan():
    z = torch.zeros(())
    with pytest.raises(TrainingAbortError):
        total_loss(torch.tensor(float("nan")), z, z, z, z, z, z)


def test_all_losses_nonnegative_random():
    g = torch.Generator().manual_seed(3)
    for _ in range(20):
        pred = torch.rand(32, generator=g)
        target = torch.rand(32, generator=g)
        target[int(torch.randint(0, 32, (1,), generator=g))] = 1.0
        assert float(ref_point_loss(pred, target, 2)) >= 0.0
        probs = torch.rand(10, generator=g).clamp(1e-6, 1 - 1e-6)
        labels = (torch.rand(10, generator=g) > 0.5).numpy().astype(np.uint8)
        assert float(merge_loss_ohem(probs, labels, 4, 4)) >= 0.0


# ---------------------------------------------------------------------------
# gradient checks (central finite differences, double precision)
# ---------------------------------------------------------------------------

def _central_diff(fn, x, i, h=1e-6):
    xp = x.clone()
    xm = x.clone()
    xp.view(-1)[i] += h
    xm.view(-1)[i] -= h
    return (fn(xp) - fn(xm)) / (2 * h)


def _check_grad(fn, x, n_checks=5, rel=1e-3, seed=0):
    x = x.double().requires_grad_(True)
    fn(x).backward()
    g = np.random.default_rng(seed)
    for i in g.choice(x.numel(), size=min(n_checks, x.numel()), replace=False):
        fd = float(_central_diff(lambda v: fn(v.detach()), x.detach(), int(i)))
        auto = float(x.grad.view(-1)[int(i)])
        denom = max(abs(fd), abs(auto), 1e-8)
        assert abs(fd - auto) / denom < rel, (fd, auto)


def test_grad_ref_point_loss():
    g = torch.Generator().manual_seed(1)
    target = torch.rand(24, generator=g).double()
    target[3] = 1.0
    pred = torch.rand(24, generator=g).double() * 0.8 + 0.1
    _check_grad(lambda p: ref_point_loss(p, target, 2), pred)


def test_grad_line_loss_coords_and_logits():
    g = torch.Generator().manual_seed(2)
    gt = np.random.default_rng(0).uniform(0.2, 0.8, (2, 45))
    a = prior_enhanced_match([_ref(10), _ref(50)], [_sep(10, 3), _sep(50, 3)], 64)

    def fn(flat):
        preds = [
            SeparatorPrediction(flat[0], flat[2:47]),
            SeparatorPrediction(flat[1], flat[47:92]),
        ]
        return line_loss(preds, gt, a)

    x = torch.cat([torch.randn(2, generator=g), torch.rand(90, generator=g)])
    _check_grad(fn, x)


def test_grad_aux_seg_loss():
    gt = np.zeros((8, 8), np.uint8)
    gt[:3] = 1
    g = torch.Generator().manual_seed(4)
    pred = torch.rand(8, 8, generator=g) * 0.8 + 0.1
    _check_grad(lambda p: aux_seg_loss(p, gt, 16, 16, seed=5), pred)


def test_grad_merge_ohem():
    g = torch.Generator().manual_seed(5)
    labels = np.array([1, 1, 0, 0, 0, 1, 0, 0])
    probs = torch.rand(8, generator=g) * 0.8 + 0.1
    _check_grad(lambda p: merge_loss_ohem(p, labels, 2, 3), probs)
