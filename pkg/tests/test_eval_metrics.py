import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import pose_at
from errors import ConfigError, DomainError, UndefinedMetricError
from eval_metrics import (
    EvalConfig,
    FrameTally,
    Matching,
    MatchPolicy,
    association_accuracy,
    auc_rel,
    evaluate,
    match_people,
    mpjpe,
    ordinal_class,
    pck3d,
    pcod,
    report_from_tally,
    root_distance_matrix,
    rt_error,
    tally_frame,
)
from pose_decoder import decode_frame
from repr_encoder import encode
from scene_synth import SynthConfig, synth_scene
from skeleton import AbsolutePose3D

BOTH = Matching(((0, 0), (1, 1)), ())


def _base(spec):
    j = np.arange(spec.num_joints, dtype=np.float64)
    return np.stack([20.0 * j, 30.0 * j, np.zeros_like(j)], axis=1)


@pytest.fixture
def people(spec):
    """Duas pessoas com erros inteiros conhecidos por junta."""
    base = _base(spec)
    visible = np.ones(spec.num_joints, dtype=bool)
    gt_a = base + [-500.0, 0.0, 3000.0]
    gt_b = base + [500.0, 0.0, 5000.0]
    pred_a = gt_a + [0.0, 0.0, 160.0]
    z_shift = np.zeros(spec.num_joints)
    z_shift[1:4] = 200.0
    z_shift[4:8] = 100.0
    pred_b = gt_b + [30.0, 40.0, 0.0]
    pred_b[:, 2] += z_shift
    gt = [AbsolutePose3D(gt_a, visible), AbsolutePose3D(gt_b, visible)]
    pred = [AbsolutePose3D(pred_a, visible), AbsolutePose3D(pred_b, visible)]
    return pred, gt


AUC_EXPECTED = (102.5 * (23 / 30 * 100) + 47.5 * (27 / 30 * 100)) / 150


def test_matching_pairs_both_people(people, cam, spec):
    pred, gt = people
    matching = match_people(pred, gt, MatchPolicy(), cam, spec)
    assert matching == BOTH


def test_individual_metrics(people, spec):
    pred, gt = people
    assert mpjpe(pred, gt, BOTH, spec) == pytest.approx(1000.0 / 15.0 / 2.0)
    assert rt_error(pred, gt, BOTH, spec) == pytest.approx(105.0)
    assert pck3d(pred, gt, BOTH, spec, 150.0, "rel") == pytest.approx(90.0)
    assert pck3d(pred, gt, BOTH, spec, 150.0, "abs") == pytest.approx(40.0)
    assert pck3d(pred, gt, BOTH, spec, 150.0, "root") == pytest.approx(50.0)
    assert auc_rel(pred, gt, BOTH, spec) == pytest.approx(AUC_EXPECTED)
    assert pcod(pred, gt, BOTH, spec, tie=300.0) == 100.0
    assert pcod(pred, gt, BOTH, spec, tie=1900.0) == 0.0


def test_evaluate_report_matches_individual_metrics(people, cam, spec):
    pred, gt = people
    report = evaluate([pred], [gt], [cam], spec, EvalConfig())
    assert report.recall == 100.0
    assert report.mpjpe == pytest.approx(1000.0 / 30.0)
    assert report.rt_error == pytest.approx(105.0)
    assert (report.pck_rel, report.pck_abs, report.pck_root) == pytest.approx((90.0, 40.0, 50.0))
    assert report.pck_rel_matched == pytest.approx(90.0)
    assert report.auc_rel == pytest.approx(AUC_EXPECTED)
    assert report.pcod == 100.0
    assert (report.frames, report.gt_people, report.matched_people) == (1, 2, 2)
    assert report.config["auc_thresholds"][-1] == 150.0


def test_unmatched_gt_counts_as_wrong_only_in_all_scope(people, cam, spec):
    pred, gt = people
    far = pose_at(spec, cam, 780.0, 60.0, 7000.0)
    report = evaluate([pred], [[*gt, far]], [cam], spec, EvalConfig())
    assert report.recall == pytest.approx(200.0 / 3.0)
    assert report.pck_rel == pytest.approx(27.0 / 45.0 * 100.0)
    assert report.pck_rel_matched == pytest.approx(90.0)
    assert report.pck_root == pytest.approx(100.0 / 3.0)
    assert report.mpjpe == pytest.approx(1000.0 / 30.0)


def test_missing_predicted_joint(people, spec):
    pred, gt = people
    visible = pred[1].visible.copy()
    visible[14] = False
    pred = [pred[0], AbsolutePose3D(pred[1].joints, visible)]
    # MPJPE ignora a junta ausente; PCK a conta como errada.
    assert mpjpe(pred, gt, BOTH, spec) == pytest.approx((0.0 + 1000.0 / 14.0) / 2.0)
    assert pck3d(pred, gt, BOTH, spec, 150.0, "rel") == pytest.approx(26.0 / 30.0 * 100.0)


def test_greedy_and_optimal_matching_differ(spec, cam):
    gt = [pose_at(spec, cam, 100.0, 256.0, 4000.0), pose_at(spec, cam, 130.0, 256.0, 4000.0)]
    pred = [pose_at(spec, cam, 118.0, 256.0, 4000.0), pose_at(spec, cam, 150.0, 256.0, 4000.0)]
    greedy = match_people(pred, gt, MatchPolicy(40.0, "greedy"), cam, spec)
    optimal = match_people(pred, gt, MatchPolicy(40.0, "optimal"), cam, spec)
    assert greedy == Matching(((0, 1),), (0,))
    assert optimal == Matching(((0, 0), (1, 1)), ())
    with pytest.raises(ConfigError):
        match_people(pred, gt, MatchPolicy(40.0, "hungaro"), cam, spec)


def test_gate_rejects_far_predictions(spec, cam):
    gt = [pose_at(spec, cam, 100.0, 256.0, 4000.0)]
    pred = [pose_at(spec, cam, 141.0, 256.0, 4000.0)]
    assert match_people(pred, gt, MatchPolicy(40.0), cam, spec).pairs == ()
    assert match_people(pred, gt, MatchPolicy(41.5), cam, spec).pairs == ((0, 0),)


def test_undefined_metrics(people, spec, cam):
    pred, gt = people
    empty = Matching((), (0, 1))
    with pytest.raises(UndefinedMetricError):
        mpjpe(pred, gt, empty, spec)
    with pytest.raises(UndefinedMetricError):
        rt_error(pred, gt, empty, spec)
    with pytest.raises(UndefinedMetricError):
        pcod(pred, gt, Matching(((0, 0),), (1,)), spec)
    report = evaluate([[]], [[]], [cam], spec, EvalConfig())
    assert report.recall is None
    assert report.mpjpe is None
    assert report.pck_rel is None
    assert report.auc_rel is None
    assert report.pcod is None


def test_threshold_domain(people, spec):
    pred, gt = people
    with pytest.raises(DomainError):
        pck3d(pred, gt, BOTH, spec, 0.0)
    with pytest.raises(DomainError):
        auc_rel(pred, gt, BOTH, spec, thresholds=(10.0, 5.0))
    with pytest.raises(ConfigError):
        EvalConfig(pck_threshold=-1.0)
    with pytest.raises(ConfigError):
        EvalConfig(match_method="aleatorio")


def test_ordinal_class():
    assert ordinal_class(-301.0, 300.0) == -1
    assert ordinal_class(300.0, 300.0) == 0
    assert ordinal_class(0.0, 0.0) == 0
    assert ordinal_class(0.5, 0.0) == 1


def test_frame_tally_is_additive(people, spec, cam):
    pred, gt = people
    cfg = EvalConfig()
    first = tally_frame(pred, gt, cam, spec, cfg)
    second = tally_frame(pred[:1], gt, cam, spec, cfg)
    assert first + second == second + first
    assert sum([first, second]) == first + second
    assert FrameTally() + first == first
    combined = evaluate([pred, pred[:1]], [gt, gt], [cam, cam], spec, cfg)
    assert combined == report_from_tally(first + second, cfg)
    assert combined.frames == 2
    assert combined.recall == pytest.approx(75.0)


def test_evaluate_requires_aligned_inputs(people, spec, cam):
    pred, gt = people
    with pytest.raises(DomainError):
        evaluate([pred], [gt, gt], [cam], spec, EvalConfig())


@settings(max_examples=25, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(order=st.permutations(list(range(4))))
def test_report_ignores_person_order(spec, cam, order):
    rng = np.random.default_rng(3)
    gt = [pose_at(spec, cam, u, 256.0, 3000.0 + 900.0 * i, rng.uniform(-300, 300, (spec.num_joints, 3)))
          for i, u in enumerate((100.0, 300.0, 500.0, 700.0))]
    pred = [AbsolutePose3D(p.joints + rng.normal(0.0, 60.0, p.joints.shape), p.visible) for p in gt]
    cfg = EvalConfig()
    base = evaluate([pred], [gt], [cam], spec, cfg)
    shuffled = evaluate([[pred[i] for i in order]], [gt], [cam], spec, cfg)
    for key in ("recall", "mpjpe", "rt_error", "pck_rel", "pck_abs", "pck_root", "auc_rel", "pcod"):
        assert getattr(shuffled, key) == pytest.approx(getattr(base, key), rel=1e-12)


def test_association_accuracy_on_clean_decode(spec, stats, enc, assoc):
    scene = synth_scene(SynthConfig(seed=4, min_people=2, max_people=3), spec, stats)
    result = decode_frame(encode(scene, spec, enc), scene.cam, spec, stats, assoc, "dapa")
    correct, total = association_accuracy(result, scene.people, scene.cam, spec)
    assert total >= 2 * spec.num_joints
    assert correct >= 0.95 * total


def _best_assignment(dist, gate):
    """Força bruta: máximo de pares admissíveis e, entre eles, menor soma."""
    n, m = dist.shape
    flip = n > m
    if flip:
        dist, n, m = dist.T, m, n
    best = (0, 0.0)
    for perm in itertools.permutations(range(m), n):
        picked = [dist[i, j] for i, j in enumerate(perm) if dist[i, j] <= gate]
        key = (len(picked), sum(picked))
        if key[0] > best[0] or (key[0] == best[0] and key[1] < best[1]):
            best = key
    return best


roots = st.lists(st.tuples(st.floats(100.0, 200.0), st.floats(200.0, 300.0)), min_size=0, max_size=4)


@settings(max_examples=60, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(pred_roots=roots, gt_roots=roots)
def test_optimal_matching_agrees_with_exhaustive_search(spec, cam, pred_roots, gt_roots):
    pred = [pose_at(spec, cam, u, v, 4000.0) for u, v in pred_roots]
    gt = [pose_at(spec, cam, u, v, 4000.0) for u, v in gt_roots]
    matching = match_people(pred, gt, MatchPolicy(40.0, "optimal"), cam, spec)
    dist = root_distance_matrix(pred, gt, cam, spec)
    count, total = _best_assignment(dist, 40.0) if pred and gt else (0, 0.0)
    assert len(matching.pairs) == count
    assert sum(dist[p, g] for p, g in matching.pairs) == pytest.approx(total, abs=1e-3)
    assert len({p for p, _ in matching.pairs}) == len(matching.pairs)


def test_pck_boundary_is_strict(spec):
    gt = AbsolutePose3D(_base(spec) + [0.0, 0.0, 4000.0], np.ones(spec.num_joints, dtype=bool))
    pred = AbsolutePose3D(gt.joints + [0.0, 90.0, 120.0], gt.visible)
    one = Matching(((0, 0),), ())
    for mode in ("abs", "root"):
        assert pck3d([pred], [gt], one, spec, 150.0, mode) == 0.0
        assert pck3d([pred], [gt], one, spec, 150.001, mode) == 100.0


@settings(max_examples=30, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(seed=st.integers(0, 2**31 - 1), scale=st.floats(10.0, 200.0))
def test_pck_grows_with_threshold_and_bounds_auc(spec, seed, scale):
    rng = np.random.default_rng(seed)
    visible = np.ones(spec.num_joints, dtype=bool)
    gt = [AbsolutePose3D(_base(spec) + [x, 0.0, z], visible) for x, z in ((-600.0, 3000.0), (600.0, 4500.0))]
    pred = [AbsolutePose3D(p.joints + rng.normal(scale=scale, size=p.joints.shape), visible) for p in gt]
    grid = np.arange(5.0, 152.5, 5.0)
    curve = [pck3d(pred, gt, BOTH, spec, t, "rel") for t in grid]
    assert all(a <= b for a, b in zip(curve, curve[1:]))
    auc = auc_rel(pred, gt, BOTH, spec, thresholds=grid)
    assert curve[0] - 1e-9 <= auc <= curve[-1] + 1e-9


@pytest.mark.parametrize("shift", [-900.0, 250.0, 1234.5])
def test_pcod_ignores_constant_depth_shift(spec, shift):
    visible = np.ones(spec.num_joints, dtype=bool)
    depths = (3000.0, 3200.0, 5000.0, 8000.0)
    gt = [AbsolutePose3D(_base(spec) + [400.0 * i, 0.0, z], visible) for i, z in enumerate(depths)]
    errors = (150.0, 500.0, 400.0, -100.0)
    pred = [AbsolutePose3D(p.joints + [0.0, 0.0, e], visible) for p, e in zip(gt, errors)]
    moved = [AbsolutePose3D(p.joints + [0.0, 0.0, shift], visible) for p in pred]
    everyone = Matching(tuple((i, i) for i in range(4)), ())
    base = pcod(pred, gt, everyone, spec)
    assert 0.0 < base < 100.0
    assert pcod(moved, gt, everyone, spec) == base
