import numpy as np
import pytest

from lipcert.errors import IntegrityError, UsageError
from lipcert.linalg import PNorm, vec_norm
from lipcert.propcert import (LabeledDataset, min_cross_class_distance,
                              nearest_out_of_class_distances, prop1_certify_training,
                              prop1_classify, prop1_classify_batch, prop1_score,
                              sample_in_ball, separation_stats)
from oracles import nn_distances_loop

VEC_NORM = {PNorm.P1: lambda v: float(np.sum(np.abs(v))),
            PNorm.P2: lambda v: float(np.linalg.norm(v)),
            PNorm.PINF: lambda v: float(np.max(np.abs(v)))}


def two_blob_data(rng, n=40, gap=6.0):
    a = rng.standard_normal((n, 3)) * 0.4
    b = rng.standard_normal((n, 3)) * 0.4
    b[:, 0] += gap
    return LabeledDataset(np.vstack([a, b]),
                          np.concatenate([np.zeros(n, int), np.ones(n, int)]))


class TestLabeledDataset:
    def test_label_shape_checked(self):
        with pytest.raises(UsageError):
            LabeledDataset(np.zeros((3, 2)), np.zeros(4, int))

    def test_non_finite_rejected(self):
        X = np.zeros((2, 2))
        X[0, 0] = np.nan
        with pytest.raises(UsageError):
            LabeledDataset(X, np.zeros(2, int))

    def test_float_labels_must_be_integral(self):
        with pytest.raises(UsageError):
            LabeledDataset(np.zeros((2, 2)), np.array([0.0, 0.5]))

    def test_integral_float_labels_accepted(self):
        d = LabeledDataset(np.zeros((2, 2)), np.array([0.0, 1.0]))
        assert d.labels.tolist() == [0, 1]

    def test_subsample_deterministic(self):
        rng = np.random.default_rng(0)
        d = two_blob_data(rng)
        s1 = d.subsample(10, seed=7)
        s2 = d.subsample(10, seed=7)
        assert np.array_equal(s1.points, s2.points)
        assert s1.n == 10


class TestNearestOutOfClass:
    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(-3, 3, size=(60, 4))
        y = rng.integers(0, 3, size=60)
        data = LabeledDataset(X, y)
        for p in PNorm:
            got = nearest_out_of_class_distances(data, p)
            want = nn_distances_loop(X, y, VEC_NORM[p])
            assert got == pytest.approx(want, abs=1e-12)

    def test_chunking_invariant(self):
        rng = np.random.default_rng(2)
        data = two_blob_data(rng, n=30)
        a = nearest_out_of_class_distances(data, PNorm.P2, chunk=7)
        b = nearest_out_of_class_distances(data, PNorm.P2, chunk=512)
        assert np.array_equal(a, b)

    def test_needs_two_classes(self):
        data = LabeledDataset(np.zeros((3, 2)), np.zeros(3, int))
        with pytest.raises(UsageError):
            nearest_out_of_class_distances(data, PNorm.P1)

    def test_permutation_consistency(self):
        rng = np.random.default_rng(3)
        data = two_blob_data(rng, n=25)
        perm = rng.permutation(data.n)
        shuffled = LabeledDataset(data.points[perm], data.labels[perm])
        d0 = nearest_out_of_class_distances(data, PNorm.PINF)
        d1 = nearest_out_of_class_distances(shuffled, PNorm.PINF)
        assert d0[perm] == pytest.approx(d1, abs=0)


class TestSeparationStats:
    def test_lower_order_statistic(self):
        # 1-D points: two tight clusters, one straggler in between
        pts = np.array([[0.0], [0.1], [10.0], [9.9], [5.0]])
        labels = np.array([0, 0, 1, 1, 0])
        data = LabeledDataset(pts, labels)
        stats = separation_stats(data, PNorm.P1, percentile=95.0)
        # distances: 9.9, 9.8, 4.9, 4.9, 4.9; rank = ceil(0.05*5) = 1 -> min
        assert stats.percentile_c == pytest.approx(4.9)

    def test_median(self):
        pts = np.array([[0.0], [1.0], [3.0], [7.0]])
        labels = np.array([0, 1, 0, 1])
        data = LabeledDataset(pts, labels)
        stats = separation_stats(data, PNorm.PINF, percentile=50.0)
        # distances 1, 1, 2, 4 sorted; rank = ceil(0.5*4) = 2 -> 1.0
        assert stats.percentile_c == 1.0

    def test_percentile_range_checked(self):
        rng = np.random.default_rng(4)
        data = two_blob_data(rng, n=5)
        with pytest.raises(UsageError):
            separation_stats(data, PNorm.P2, percentile=100.0)

    def test_min_cross_class_duplicate_points(self):
        data = LabeledDataset(np.array([[1.0, 2.0], [1.0, 2.0]]),
                              np.array([0, 1]))
        with pytest.raises(IntegrityError):
            min_cross_class_distance(data, PNorm.P2)


class TestProp1Score:
    def setup_method(self):
        self.data = LabeledDataset(np.array([[0.0], [6.0]]), np.array([0, 1]))
        self.c = 5.0

    def test_near_own_class(self):
        s = prop1_score(self.data, self.c, PNorm.P1, 0, [1.25])
        assert s == pytest.approx(1.0 - (2.0 / 5.0) * 1.25)

    def test_dead_zone(self):
        assert prop1_score(self.data, self.c, PNorm.P1, 0, [2.5]) == 0.0

    def test_near_other_class(self):
        assert prop1_score(self.data, self.c, PNorm.P1, 0, [6.0]) == -1.0

    def test_on_training_point(self):
        assert prop1_score(self.data, self.c, PNorm.P1, 0, [0.0]) == 1.0

    def test_c_must_be_below_min_distance(self):
        with pytest.raises(UsageError):
            prop1_score(self.data, 6.0, PNorm.P1, 0, [0.0])

    def test_unknown_class(self):
        with pytest.raises(UsageError):
            prop1_score(self.data, self.c, PNorm.P1, 7, [0.0])

    def test_empirical_lipschitz(self):
        rng = np.random.default_rng(5)
        data = two_blob_data(rng, n=20)
        for p in PNorm:
            c = 0.9 * min_cross_class_distance(data, p)
            lip = 2.0 / c
            for _ in range(300):
                x1 = rng.uniform(-2, 8, size=3)
                x2 = rng.uniform(-2, 8, size=3)
                lhs = abs(prop1_score(data, c, p, 0, x1)
                          - prop1_score(data, c, p, 0, x2))
                assert lhs <= lip * VEC_NORM[p](x1 - x2) + 1e-9


class TestClassify:
    def test_training_points_keep_labels(self):
        rng = np.random.default_rng(6)
        data = two_blob_data(rng, n=30)
        c = 0.9 * min_cross_class_distance(data, PNorm.PINF)
        labels, margins, no_cert = prop1_classify_batch(
            data, c, PNorm.PINF, data.points)
        assert np.array_equal(labels, data.labels)
        assert np.all(margins > 0)
        assert not np.any(no_cert)

    def test_far_point_has_no_certificate(self):
        data = LabeledDataset(np.array([[0.0], [6.0]]), np.array([0, 1]))
        res = prop1_classify(data, 5.0, PNorm.P1, [3.0])
        assert res.no_certificate
        assert res.margin == 0.0

    def test_single_matches_batch(self):
        rng = np.random.default_rng(7)
        data = two_blob_data(rng, n=15)
        c = 0.5 * min_cross_class_distance(data, PNorm.P2)
        Q = rng.uniform(-1, 7, size=(20, 3))
        labels, margins, no_cert = prop1_classify_batch(data, c, PNorm.P2, Q)
        for q in range(20):
            res = prop1_classify(data, c, PNorm.P2, Q[q])
            assert res.label == labels[q]
            assert res.margin == pytest.approx(margins[q], abs=0)


class TestSampleInBall:
    def test_within_radius(self):
        rng = np.random.default_rng(8)
        for p in PNorm:
            deltas = sample_in_ball(rng, 500, 6, 2.5, p)
            norms = np.array([VEC_NORM[p](d) for d in deltas])
            assert np.all(norms <= 2.5 + 1e-12)

    def test_fills_the_ball(self):
        rng = np.random.default_rng(9)
        for p in PNorm:
            deltas = sample_in_ball(rng, 2000, 3, 1.0, p)
            norms = np.array([VEC_NORM[p](d) for d in deltas])
            assert np.max(norms) > 0.9


class TestCertifyTraining:
    def test_no_violations_at_certified_radius(self):
        rng = np.random.default_rng(10)
        data = two_blob_data(rng, n=20)
        for p in PNorm:
            c = 0.9 * min_cross_class_distance(data, p)
            report = prop1_certify_training(data, c, p, trials=50, seed=0)
            assert report.ok
            assert report.checked == data.n * 50

    def test_violations_possible_beyond_contract(self):
        data = LabeledDataset(np.array([[0.0], [2.0]]), np.array([0, 1]))
        report = prop1_certify_training(data, 1.9, PNorm.P1, trials=500,
                                        seed=0, radius=3.0)
        assert not report.ok

    def test_trials_checked(self):
        data = LabeledDataset(np.array([[0.0], [2.0]]), np.array([0, 1]))
        with pytest.raises(UsageError):
            prop1_certify_training(data, 1.0, PNorm.P1, trials=0, seed=0)
