import math
import random

import numpy as np
import pytest

from curbsim.core import AgentKind, Shape
from curbsim.metrics import (
    MetricsError,
    PredictionSet,
    WindowError,
    ade,
    aggregate,
    build_cv_predictions,
    choose_interactive_split,
    collision_counts,
    constant_velocity_baseline,
    evaluate_scene,
    fde,
    filter_interactive,
    format_report,
    gt_futures,
    min_joint,
    min_marginal,
    read_predictions,
    scene_is_interactive,
    trajectory_headings,
    write_predictions,
)
from curbsim.recorder import AgentFrameRecord, AgentMeta, SceneFile, SceneHeader

from oracles import (
    oracle_ade,
    oracle_collision_counts,
    oracle_filter,
    oracle_fde,
    oracle_min_joint,
    oracle_min_marginal,
    random_instance,
)

CAR = Shape(4.5, 2.0, 1.6)
PED = Shape(0.5, 0.5, 1.8)


def straight(n, start=(0.0, 0.0), step=(1.0, 0.0)):
    return np.array([[start[0] + step[0] * i, start[1] + step[1] * i] for i in range(n)])


class TestAde:
    def test_identity(self):
        t = straight(6)
        assert ade(t, t) == 0.0

    def test_constant_offset(self):
        t = straight(8)
        assert ade(t + np.array([3.0, 4.0]), t) == pytest.approx(5.0)

    def test_random_pair_matches_oracle(self):
        rng = random.Random(31)
        for _ in range(20):
            a = [(rng.uniform(-9, 9), rng.uniform(-9, 9)) for _ in range(12)]
            b = [(rng.uniform(-9, 9), rng.uniform(-9, 9)) for _ in range(12)]
            assert ade(a, b) == pytest.approx(oracle_ade(a, b), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(MetricsError):
            ade(straight(5), straight(6))


class TestFde:
    def test_identity(self):
        t = straight(4)
        assert fde(t, t) == 0.0

    def test_final_point(self):
        a = np.array([[0.0, 0.0], [0.0, 0.0]])
        b = np.array([[5.0, 5.0], [0.0, 2.0]])
        assert fde(a, b) == pytest.approx(2.0)

    def test_bounded_by_max_step_distance(self):
        rng = random.Random(32)
        for _ in range(20):
            a = [(rng.uniform(-9, 9), rng.uniform(-9, 9)) for _ in range(10)]
            b = [(rng.uniform(-9, 9), rng.uniform(-9, 9)) for _ in range(10)]
            per_step = [math.hypot(p[0] - q[0], p[1] - q[1]) for p, q in zip(a, b)]
            assert fde(a, b) <= max(per_step) + 1e-12


class TestMinMarginal:
    def test_min_of_two(self):
        gt = straight(5)
        samples = np.stack([gt + np.array([2.0, 0.0]), gt + np.array([1.0, 0.0])])
        res = min_marginal(samples, gt)
        assert res.min_ade == pytest.approx(1.0)
        assert res.ade_index == 1

    def test_identity_member(self):
        gt = straight(6)
        rng = np.random.default_rng(3)
        samples = rng.uniform(-5, 5, size=(10, 6, 2))
        samples[4] = gt
        res = min_marginal(samples, gt)
        assert res.min_ade == 0.0 and res.min_fde == 0.0
        assert res.ade_index == 4 and res.fde_index == 4

    def test_ties_take_lowest_index(self):
        gt = straight(4)
        offset = gt + np.array([1.0, 0.0])
        samples = np.stack([offset, offset])
        res = min_marginal(samples, gt)
        assert res.ade_index == 0

    def test_fuzzed_vs_bruteforce(self):
        rng = random.Random(33)
        for _ in range(50):
            samples, gts, _ = random_instance(rng, max_agents=1)
            got = min_marginal(samples[0], gts[0])
            want_ade, want_fde, ai, fi = oracle_min_marginal(samples[0], gts[0])
            assert got.min_ade == pytest.approx(want_ade, abs=1e-9)
            assert got.min_fde == pytest.approx(want_fde, abs=1e-9)
            assert got.ade_index == ai and got.fde_index == fi

    def test_empty_errors(self):
        with pytest.raises(MetricsError):
            min_marginal(np.zeros((0, 4, 2)), straight(4))


class TestMinJoint:
    def test_worked_two_agent_example(self):
        # per-(agent, sample) ADEs a1=[1,3], a2=[3,1]: minJADE = 2.0 while the
        # mean of per-agent minADE is 1.0
        T = 5
        gt_a, gt_b = straight(T), straight(T, start=(10.0, 10.0))
        samples = {
            1: np.stack([gt_a + np.array([1.0, 0.0]), gt_a + np.array([3.0, 0.0])]),
            2: np.stack([gt_b + np.array([3.0, 0.0]), gt_b + np.array([1.0, 0.0])]),
        }
        gts = {1: gt_a, 2: gt_b}
        res = min_joint(samples, gts)
        assert res.min_jade == pytest.approx(2.0)
        marginal_mean = (min_marginal(samples[1], gt_a).min_ade
                         + min_marginal(samples[2], gt_b).min_ade) / 2
        assert marginal_mean == pytest.approx(1.0)
        assert res.jade_index == 0  # tie between k=0 and k=1 takes the lowest

    def test_all_sample0_equal_gt(self):
        gts = {i: straight(4, start=(i * 5.0, 0.0)) for i in range(3)}
        rng = np.random.default_rng(11)
        samples = {}
        for i, gt in gts.items():
            arr = rng.uniform(-9, 9, size=(4, 4, 2))
            arr[0] = gt
            samples[i] = arr
        res = min_joint(samples, gts)
        assert res.min_jade == 0.0 and res.jade_index == 0

    def test_single_agent_reduces_to_marginal(self):
        gt = straight(6)
        rng = np.random.default_rng(12)
        samples = rng.uniform(-5, 5, size=(5, 6, 2))
        joint = min_joint({7: samples}, {7: gt})
        marg = min_marginal(samples, gt)
        assert joint.min_jade == pytest.approx(marg.min_ade, abs=1e-12)

    def test_ragged_k_errors(self):
        gt = straight(4)
        with pytest.raises(MetricsError):
            min_joint({0: np.zeros((2, 4, 2)), 1: np.zeros((3, 4, 2))},
                      {0: gt, 1: gt})

    def test_fuzzed_vs_bruteforce(self):
        rng = random.Random(34)
        for _ in range(40):
            samples, gts, _ = random_instance(rng)
            got = min_joint(samples, gts)
            want_jade, want_jfde, ji, fi = oracle_min_joint(samples, gts)
            assert got.min_jade == pytest.approx(want_jade, abs=1e-9)
            assert got.min_jfde == pytest.approx(want_jfde, abs=1e-9)
            assert got.jade_index == ji and got.jfde_index == fi


class TestHeadings:
    def test_straight_east(self):
        h = trajectory_headings(straight(5))
        assert np.allclose(h, 0.0)

    def test_stationary_keeps_previous(self):
        traj = np.array([[0, 0], [1, 1], [1, 1], [2, 2]], dtype=float)
        h = trajectory_headings(traj)
        assert h[1] == pytest.approx(45.0)
        assert h[2] == pytest.approx(45.0)   # held
        assert h[0] == pytest.approx(45.0)   # first step from first segment

    def test_fully_stationary(self):
        h = trajectory_headings(np.zeros((4, 2)))
        assert np.allclose(h, 0.0)


class TestCollisionCounts:
    def test_stationary_far_apart(self):
        samples = {0: np.zeros((1, 10, 2)), 1: np.zeros((1, 10, 2)) + 10.0}
        stats = collision_counts(samples, {0: CAR, 1: CAR})
        assert stats.rate == 0.0

    def test_identical_positions(self):
        samples = {0: np.zeros((1, 10, 2)), 1: np.zeros((1, 10, 2))}
        stats = collision_counts(samples, {0: CAR, 1: CAR})
        assert stats.rate == 1.0

    def test_crossing_paths_half(self):
        # sample 0: the two footprints coincide at step 3; sample 1: far apart
        T = 6
        a0 = np.array([[-6.0 + 2 * t, 0.0] for t in range(T)])
        b0 = np.array([[0.0, -6.0 + 2 * t] for t in range(T)])
        a1 = a0 + np.array([0.0, 50.0])
        b1 = b0 + np.array([100.0, 0.0])
        samples = {0: np.stack([a0, a1]), 1: np.stack([b0, b1])}
        shapes = {0: CAR, 1: CAR}
        stats = collision_counts(samples, shapes)
        assert stats.rate == pytest.approx(0.5)
        want, total = oracle_collision_counts(samples, shapes)
        assert (stats.collisions, stats.total) == (want, total)

    def test_missing_shape_errors(self):
        with pytest.raises(MetricsError):
            collision_counts({0: np.zeros((1, 4, 2)), 1: np.zeros((1, 4, 2))}, {0: CAR})

    def test_agent_relabeling_invariance(self):
        rng = random.Random(35)
        for _ in range(10):
            samples, _, shapes = random_instance(rng, tight=True)
            stats = collision_counts(samples, shapes)
            remap = {aid: 100 - aid for aid in samples}
            samples2 = {remap[a]: s for a, s in samples.items()}
            shapes2 = {remap[a]: s for a, s in shapes.items()}
            stats2 = collision_counts(samples2, shapes2)
            assert stats.rate == pytest.approx(stats2.rate)

    def test_fuzzed_vs_shapely_oracle(self):
        rng = random.Random(36)
        for i in range(30):
            samples, _, shapes = random_instance(rng, tight=(i % 2 == 0))
            stats = collision_counts(samples, shapes)
            want, total = oracle_collision_counts(samples, shapes)
            assert (stats.collisions, stats.total) == (want, total)

    def test_best_mode_evaluates_one_sample(self):
        rng = random.Random(37)
        samples, gts, shapes = random_instance(rng, tight=True)
        joint = min_joint(samples, gts)
        stats = collision_counts(samples, shapes, mode="best",
                                 joint_index=joint.jade_index)
        assert stats.total == len(samples)  # one sample per agent
        want, total = oracle_collision_counts(samples, shapes,
                                              sample_indices=[joint.jade_index])
        assert (stats.collisions, stats.total) == (want, total)

    def test_best_mode_requires_index(self):
        with pytest.raises(MetricsError):
            collision_counts({0: np.zeros((2, 4, 2))}, {0: CAR}, mode="best")


class TestRigidInvariance:
    def test_all_metrics_invariant(self):
        rng = random.Random(37)
        for _ in range(10):
            samples, gts, shapes = random_instance(rng, tight=True)
            theta = rng.uniform(-math.pi, math.pi)
            tx, ty = rng.uniform(-50, 50), rng.uniform(-50, 50)
            c, s = math.cos(theta), math.sin(theta)

            def rigid(pts):
                arr = np.asarray(pts, dtype=float)
                out = arr.copy()
                out[..., 0] = arr[..., 0] * c - arr[..., 1] * s + tx
                out[..., 1] = arr[..., 0] * s + arr[..., 1] * c + ty
                return out

            samples_t = {a: rigid(v) for a, v in samples.items()}
            gts_t = {a: rigid(v) for a, v in gts.items()}
            for aid in samples:
                r0 = min_marginal(samples[aid], gts[aid])
                r1 = min_marginal(samples_t[aid], gts_t[aid])
                assert r1.min_ade == pytest.approx(r0.min_ade, abs=1e-9)
                assert r1.min_fde == pytest.approx(r0.min_fde, abs=1e-9)
            j0 = min_joint(samples, gts)
            j1 = min_joint(samples_t, gts_t)
            assert j1.min_jade == pytest.approx(j0.min_jade, abs=1e-9)
            assert j1.min_jfde == pytest.approx(j0.min_jfde, abs=1e-9)
            c0 = collision_counts(samples, shapes)
            c1 = collision_counts(samples_t, shapes)
            assert c0.rate == pytest.approx(c1.rate)

    def test_k1_degeneracy(self):
        rng = random.Random(38)
        samples, gts, _ = random_instance(rng, max_k=1)
        for aid in samples:
            res = min_marginal(samples[aid], gts[aid])
            assert res.min_ade == pytest.approx(ade(samples[aid][0], gts[aid]))
        joint = min_joint(samples, gts)
        mean_ade = sum(ade(samples[a][0], gts[a]) for a in samples) / len(samples)
        assert joint.min_jade == pytest.approx(mean_ade, abs=1e-12)


def make_synthetic_scene(scenario="synthetic", agents=None, frames=24, rate=2):
    """2 Hz scene with prescribed per-agent linear motion."""
    if agents is None:
        # (id, kind, start, velocity m/s)
        agents = [(0, AgentKind.CAR, (-20.0, 0.0), (4.0, 0.0)),
                  (1, AgentKind.PEDESTRIAN, (0.0, -6.0), (0.0, 1.2))]
    metas = []
    records = []
    for aid, kind, start, vel in agents:
        shape = CAR if kind is AgentKind.CAR else PED
        metas.append(AgentMeta(aid, kind, shape))
        for f in range(frames):
            t = f / rate
            records.append(AgentFrameRecord(
                frame=f, t=t, agent_id=aid, kind=kind,
                position=(start[0] + vel[0] * t, start[1] + vel[1] * t, 0.0),
                rotation=(0.0, 0.0, 0.0),
                velocity=(vel[0], vel[1], 0.0),
                acceleration=(0.0, 0.0, 0.0)))
    records.sort(key=lambda r: (r.frame, r.agent_id))
    header = SceneHeader(scenario=scenario, seed=0, rate_hz=rate, frames=frames,
                         agents=tuple(sorted(metas, key=lambda m: m.id)))
    return SceneFile(header, records)


class TestFilterInteractive:
    def test_moving_vehicle_near_pedestrian_kept(self):
        scene = make_synthetic_scene(agents=[
            (0, AgentKind.CAR, (-10.0, 3.0), (2.0, 0.0)),
            (1, AgentKind.PEDESTRIAN, (0.0, 0.0), (0.0, 0.0))])
        assert scene_is_interactive(scene)

    def test_parked_vehicle_dropped(self):
        scene = make_synthetic_scene(agents=[
            (0, AgentKind.CAR, (0.0, 3.0), (0.0, 0.0)),
            (1, AgentKind.PEDESTRIAN, (0.0, 0.0), (0.0, 0.0))])
        assert not scene_is_interactive(scene)

    def test_far_vehicle_dropped(self):
        scene = make_synthetic_scene(agents=[
            (0, AgentKind.CAR, (0.0, 50.0), (2.0, 0.0)),
            (1, AgentKind.PEDESTRIAN, (0.0, 0.0), (0.0, 0.0))])
        assert not scene_is_interactive(scene)

    def test_fuzzed_matches_full_scan(self):
        rng = random.Random(40)
        scenes = []
        for i in range(30):
            agents = [(0, AgentKind.CAR,
                       (rng.uniform(-30, 30), rng.uniform(-10, 10)),
                       (rng.choice([0.0, rng.uniform(0.2, 8.0)]), 0.0)),
                      (1, AgentKind.PEDESTRIAN,
                       (rng.uniform(-30, 30), rng.uniform(-10, 10)),
                       (rng.uniform(-1, 1), rng.uniform(-1, 1)))]
            scenes.append(make_synthetic_scene(f"s{i}", agents))
        kept = filter_interactive(scenes)
        want = oracle_filter(scenes, 8.0, 0.5)
        assert [s.header.scenario for s in kept] == [s.header.scenario for s in want]


class TestConstantVelocityBaseline:
    def test_linear_extrapolation(self):
        hist = np.array([[0.0, 0.0], [0.5, 0.0]])
        out = constant_velocity_baseline(hist, 4, 1, seed=0)
        assert np.allclose(out[0], [[1.0, 0.0], [1.5, 0.0], [2.0, 0.0], [2.5, 0.0]])

    def test_stationary(self):
        hist = np.zeros((5, 2)) + 3.0
        out = constant_velocity_baseline(hist, 6, 10, seed=1)
        assert np.allclose(out, 3.0)

    def test_deterministic(self):
        hist = np.array([[0.0, 0.0], [1.0, 0.4]])
        a = constant_velocity_baseline(hist, 5, 10, seed=99)
        b = constant_velocity_baseline(hist, 5, 10, seed=99)
        assert np.array_equal(a, b)

    def test_offsets_within_20_degrees(self):
        hist = np.array([[0.0, 0.0], [1.0, 0.0]])
        out = constant_velocity_baseline(hist, 1, 50, seed=5)
        angles = np.degrees(np.arctan2(out[:, 0, 1], out[:, 0, 0] - 1.0))
        assert np.all(np.abs(angles) <= 20.0 + 1e-9)

    def test_single_point_history(self):
        out = constant_velocity_baseline(np.array([[2.0, 2.0]]), 3, 4, seed=0)
        assert np.allclose(out, 2.0)


class TestPredictionIO:
    def test_roundtrip(self):
        rng = np.random.default_rng(7)
        pred = PredictionSet(scene="jaywalk_seed1", rate_hz=2, horizon_steps=6,
                             k=3, start_step=4)
        pred.samples = {0: rng.uniform(-9, 9, (3, 6, 2)),
                        5: rng.uniform(-9, 9, (3, 6, 2))}
        parsed = read_predictions(write_predictions(pred))
        assert parsed.scene == pred.scene
        assert parsed.start_step == 4
        for aid in pred.samples:
            assert np.array_equal(parsed.samples[aid], pred.samples[aid])

    def test_wrong_length_rejected(self):
        pred = PredictionSet(scene="x", rate_hz=2, horizon_steps=6, k=1, start_step=4)
        pred.samples = {0: np.zeros((1, 5, 2))}
        with pytest.raises(MetricsError):
            write_predictions(pred)


class TestEvaluateScene:
    def test_perfect_predictions_zero_error(self):
        scene = make_synthetic_scene()
        gts = gt_futures(scene, 4, 6)
        pred = PredictionSet(scene="synthetic", rate_hz=2, horizon_steps=6,
                             k=2, start_step=4)
        for aid, gt in gts.items():
            pred.samples[aid] = np.stack([gt, gt + 5.0])
        m = evaluate_scene(pred, scene)
        assert m.sum_min_ade == 0.0 and m.min_jade == 0.0

    def test_window_error_when_scene_short(self):
        scene = make_synthetic_scene(frames=8)
        pred = PredictionSet(scene="synthetic", rate_hz=2, horizon_steps=6,
                             k=1, start_step=4)
        pred.samples = {0: np.zeros((1, 6, 2)), 1: np.zeros((1, 6, 2))}
        with pytest.raises(WindowError):
            evaluate_scene(pred, scene)

    def test_aggregate_accounting(self):
        scenes = [make_synthetic_scene(f"s{i}") for i in range(3)]
        metrics = []
        for scene in scenes:
            gts = gt_futures(scene, 4, 6)
            pred = PredictionSet(scene=scene.header.scenario, rate_hz=2,
                                 horizon_steps=6, k=2, start_step=4)
            for aid, gt in gts.items():
                pred.samples[aid] = np.stack([gt + 1.0, gt])
            metrics.append(evaluate_scene(pred, scene))
        report = aggregate(metrics, skipped=1)
        assert report.scenes == 3
        assert report.agents == 6
        assert report.skipped == 1
        assert report.min_ade == 0.0
        assert 0.0 <= report.collision_rate <= 1.0
        text = format_report(report)
        assert "minJADE" in text and "CR mean" in text

    def test_joint_geq_marginal_on_jaywalk_style_instances(self):
        rng = random.Random(41)
        for _ in range(30):
            samples, gts, _ = random_instance(rng)
            joint = min_joint(samples, gts)
            mean_marginal = sum(min_marginal(samples[a], gts[a]).min_ade
                                for a in samples) / len(samples)
            assert joint.min_jade >= mean_marginal - 1e-9


class TestChooseSplit:
    def test_picks_interaction_moment(self):
        from curbsim.metrics import scene_tracks
        scene = make_synthetic_scene(agents=[
            (0, AgentKind.CAR, (-40.0, 0.0), (4.0, 0.0)),
            (1, AgentKind.PEDESTRIAN, (0.0, 0.0), (0.4, 0.4))], frames=30)
        split = choose_interactive_split(scene, 4, 6)
        assert 4 <= split <= 24
        tracks = scene_tracks(scene)
        d = np.linalg.norm(tracks[0][split] - tracks[1][split])
        assert d <= 10.5  # at the chosen split the pair is within the near radius

    def test_falls_back_to_midpoint(self):
        scene = make_synthetic_scene(agents=[
            (0, AgentKind.CAR, (0.0, 100.0), (1.0, 0.0)),
            (1, AgentKind.PEDESTRIAN, (0.0, 0.0), (0.0, 0.0))], frames=24)
        assert choose_interactive_split(scene, 4, 6) == (4 + 18) // 2

    def test_build_cv_predictions_shapes(self):
        scene = make_synthetic_scene()
        pred = build_cv_predictions(scene, 4, 6, k=10, seed=3)
        assert pred.k == 10
        for arr in pred.samples.values():
            assert arr.shape == (10, 6, 2)
