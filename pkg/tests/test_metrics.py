import numpy as np
import pytest

from ooro.core import OcclusionRelations, from_signed, relations_from_edges, relations_new, SignedOrderMatrix
from ooro.metrics import EmptyEvaluation, SceneEvaluation, aggregate, all_zero_rate, reports_to_csv, scene_accuracy

from .conftest import random_relations
from .oracles import accuracy_oracle

GT2 = relations_from_edges(3, [(0, 2), (1, 2)])

TOWER_PRED_6 = [
    [0, 0, 0, 0, 0, 1],
    [0, 0, 0, 1, 0, 0],
    [0, 0, 0, 0, 0, 1],
    [0, -1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1],
    [-1, 0, -1, 0, -1, 0],
]


def test_identity_scores_one():
    rng = np.random.default_rng(0)
    for n in range(2, 7):
        r = random_relations(rng, n)
        e = scene_accuracy(r, r)
        assert e.correct_pairs == e.total_pairs == n * (n - 1)


def test_missing_edge_five_of_six():
    pred = relations_from_edges(3, [(1, 2)])
    e = scene_accuracy(pred, GT2)
    assert (e.correct_pairs, e.total_pairs) == (5, 6)
    assert e.accuracy == pytest.approx(5 / 6)


def test_missing_edge_gt_occluded_mode():
    pred = relations_from_edges(3, [(1, 2)])
    e = scene_accuracy(pred, GT2, "gt-occluded")
    # scored pairs: (0,2), (2,0), (1,2), (2,1)
    assert (e.correct_pairs, e.total_pairs) == (3, 4)


def test_dimension_mismatch_incomparable():
    pred = from_signed(SignedOrderMatrix(TOWER_PRED_6))
    e = scene_accuracy(pred, GT2)
    assert not e.comparable
    assert e.accuracy is None


def test_all_zero_prediction_on_all_zero_gt_scores_one():
    e = scene_accuracy(relations_new(4), relations_new(4))
    assert e.accuracy == 1.0 and e.all_zero_prediction


def test_symmetric_in_all_mode():
    rng = np.random.default_rng(4)
    for _ in range(200):
        n = int(rng.integers(2, 6))
        a, b = random_relations(rng, n), random_relations(rng, n)
        assert scene_accuracy(a, b).correct_pairs == scene_accuracy(b, a).correct_pairs


def test_permutation_invariance():
    rng = np.random.default_rng(6)
    for _ in range(200):
        n = int(rng.integers(2, 6))
        a, b = random_relations(rng, n), random_relations(rng, n)
        p = rng.permutation(n)
        ap = OcclusionRelations(a.adj[np.ix_(p, p)])
        bp = OcclusionRelations(b.adj[np.ix_(p, p)])
        for mode in ("all", "gt-occluded"):
            assert scene_accuracy(a, b, mode) == scene_accuracy(ap, bp, mode)


@pytest.mark.parametrize("mode", ["all", "gt-occluded"])
def test_matches_enumeration(mode):
    rng = np.random.default_rng(12)
    for _ in range(300):
        n = int(rng.integers(0, 6))
        a, b = random_relations(rng, n), random_relations(rng, n)
        e = scene_accuracy(a, b, mode)
        assert (e.correct_pairs, e.total_pairs) == accuracy_oracle(a.adj.tolist(), b.adj.tolist(), mode)


def _ev(correct, total, zero=False, comparable=True, image_id=0):
    return SceneEvaluation(image_id, 3, correct, total, zero, comparable)


def test_aggregate_two_scenes():
    r = aggregate([_ev(5, 6), _ev(6, 6)], "area", "fixture")
    assert r.micro_accuracy == pytest.approx(11 / 12)
    assert r.macro_accuracy == pytest.approx((5 / 6 + 1.0) / 2)


def test_aggregate_all_incomparable():
    with pytest.raises(EmptyEvaluation):
        aggregate([_ev(0, 0, comparable=False)] * 3, "gpt", "fixture")


def test_aggregate_skips_incomparable_and_empty():
    r = aggregate([_ev(5, 6), _ev(0, 0, comparable=False), _ev(0, 0)], "gpt", "x")
    assert r.micro_accuracy == pytest.approx(5 / 6)
    assert r.incomparable_count == 1
    assert r.scenes_scored == 1


def test_all_zero_rate_counts():
    assert all_zero_rate([_ev(6, 6)] * 10) == 0.0
    assert all_zero_rate([_ev(6, 6, zero=True)] + [_ev(6, 6)] * 12) == pytest.approx(1 / 13)
    evals = [_ev(6, 6, zero=True)] + [_ev(6, 6)] * 19
    assert aggregate(evals, "gpt", "x").all_zero_rate == pytest.approx(0.05)


def test_micro_matches_pooled_brute_force():
    rng = np.random.default_rng(31)
    evals, correct, total = [], 0, 0
    for k in range(1000):
        n = int(rng.integers(0, 6))
        a, b = random_relations(rng, n), random_relations(rng, n)
        evals.append(scene_accuracy(a, b, image_id=k))
        c, t = accuracy_oracle(a.adj.tolist(), b.adj.tolist())
        correct += c
        total += t
    assert aggregate(evals, "m", "d").micro_accuracy == correct / total


def test_csv_shape():
    r = aggregate([_ev(5, 6)], "area", "cocoa")
    lines = reports_to_csv([r]).splitlines()
    assert lines[0] == "method,dataset,pair_mode,micro,macro,all_zero_rate,incomparable"
    assert lines[1].startswith("area,cocoa,all,0.833333,")
