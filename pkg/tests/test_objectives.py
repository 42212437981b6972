import math

import numpy as np
import pytest

from spanemo.errors import DimensionError, UsageError
from spanemo.objectives import (
    BCE_EPS,
    LossConfig,
    bce_loss,
    joint_loss,
    joint_loss_with_grad,
    lca_loss,
)


# ---------------------------------------------------------------------------
# Scalar oracles: straight-line re-implementations used only by the tests.
# ---------------------------------------------------------------------------

def oracle_bce(y, y_hat):
    total = 0.0
    for yi, pi in zip(y, y_hat):
        pi = min(max(pi, BCE_EPS), 1.0 - BCE_EPS)
        total += -(yi * math.log(pi) + (1 - yi) * math.log(1.0 - pi))
    return total / len(y)


def oracle_lca(y, y_hat):
    positives = [i for i, b in enumerate(y) if b == 1]
    negatives = [i for i, b in enumerate(y) if b == 0]
    if not positives or not negatives:
        return 0.0
    total = 0.0
    for p in negatives:
        for q in positives:
            total += math.exp(y_hat[p] - y_hat[q])
    return total / (len(positives) * len(negatives))


def oracle_joint(batch_y, batch_y_hat, alpha):
    bce_part = sum(oracle_bce(y, h) for y, h in zip(batch_y, batch_y_hat)) / len(batch_y)
    lca_part = sum(oracle_lca(y, h) for y, h in zip(batch_y, batch_y_hat)) / len(batch_y)
    return (1.0 - alpha) * bce_part + alpha * lca_part, bce_part, lca_part


def random_instance(rng, n_classes=None):
    c = int(n_classes if n_classes is not None else rng.integers(2, 12))
    y = (rng.random(c) < rng.uniform(0.1, 0.6)).astype(np.int8)
    y_hat = rng.uniform(0.005, 0.995, size=c)
    return y, y_hat


class TestBce:
    def test_perfect_prediction_near_zero(self):
        value = bce_loss([1, 0], [1.0 - BCE_EPS, BCE_EPS])
        assert value == pytest.approx(0.0, abs=1e-6)

    def test_uninformative_prediction_is_ln2(self):
        assert bce_loss([1, 0], [0.5, 0.5]) == pytest.approx(0.6931471805599453, abs=1e-12)

    def test_hand_value(self):
        # oracle_bce([1,1,0],[0.9,0.2,0.3]) frozen:
        assert bce_loss([1, 1, 0], [0.9, 0.2, 0.3]) == pytest.approx(
            0.6904911240102196, abs=1e-9
        )

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            y, y_hat = random_instance(rng)
            assert bce_loss(y, y_hat) == pytest.approx(oracle_bce(y, y_hat), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            bce_loss([1, 0], [0.5])


class TestLca:
    def test_constant_predictions_give_one(self):
        for c in (0.0, 0.3, 1.0):
            assert lca_loss([1, 0, 1, 0], [c] * 4) == pytest.approx(1.0, abs=1e-12)

    def test_single_pair(self):
        assert lca_loss([1, 0], [1.0, 0.0]) == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_four_pair_enumeration(self):
        # oracle_lca([1,1,0,0],[0.8,0.6,0.3,0.1]) frozen:
        assert lca_loss([1, 1, 0, 0], [0.8, 0.6, 0.3, 0.1]) == pytest.approx(
            0.6126162109745985, abs=1e-12
        )

    def test_neutral_and_saturated_are_exactly_zero(self):
        assert lca_loss([0, 0, 0], [0.2, 0.5, 0.9]) == 0.0
        assert lca_loss([1, 1, 1], [0.2, 0.5, 0.9]) == 0.0

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            y, y_hat = random_instance(rng)
            assert lca_loss(y, y_hat) == pytest.approx(oracle_lca(y, y_hat), abs=1e-12)

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            y, y_hat = random_instance(rng)
            if y.sum() in (0, len(y)):
                continue
            shift = rng.uniform(-0.004, 0.004)
            assert lca_loss(y, y_hat + shift) == pytest.approx(lca_loss(y, y_hat), rel=1e-9)

    def test_strictly_decreases_when_positive_score_rises(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            y, y_hat = random_instance(rng)
            positives = np.flatnonzero(y == 1)
            if positives.size == 0 or positives.size == len(y):
                continue
            bumped = y_hat.copy()
            bumped[positives[0]] = min(bumped[positives[0]] + 0.003, 1.0)
            assert lca_loss(y, bumped) < lca_loss(y, y_hat)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            lca_loss([1, 0, 0], [0.5, 0.5])


class TestJoint:
    def test_alpha_zero_is_pure_bce(self):
        rng = np.random.default_rng(0)
        ys = [random_instance(rng, 6)[0] for _ in range(4)]
        hs = [random_instance(rng, 6)[1] for _ in range(4)]
        value = joint_loss(ys, hs, LossConfig(alpha=0.0))
        assert value.total == value.bce_part

    def test_alpha_one_is_pure_lca(self):
        rng = np.random.default_rng(1)
        ys = [random_instance(rng, 6)[0] for _ in range(4)]
        hs = [random_instance(rng, 6)[1] for _ in range(4)]
        value = joint_loss(ys, hs, LossConfig(alpha=1.0))
        assert value.total == value.lca_part

    def test_hand_composed_batch(self):
        batch_y = [[1, 1, 0, 0], [0, 1, 0, 0]]
        batch_h = [[0.8, 0.6, 0.3, 0.1], [0.5, 0.5, 0.5, 0.5]]
        value = joint_loss(batch_y, batch_h, LossConfig(alpha=0.2))
        # frozen from oracle_joint:
        assert value.bce_part == pytest.approx(0.4960741696145675, abs=1e-12)
        assert value.lca_part == pytest.approx(0.8063081054872993, abs=1e-12)
        assert value.total == pytest.approx(0.5581209567891139, abs=1e-12)

    def test_total_decomposition_invariant(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(1, 6))
            c = int(rng.integers(2, 12))
            ys = [random_instance(rng, c)[0] for _ in range(n)]
            hs = [random_instance(rng, c)[1] for _ in range(n)]
            alpha = float(rng.uniform(0, 1))
            value = joint_loss(ys, hs, LossConfig(alpha=alpha))
            assert value.total == pytest.approx(
                (1 - alpha) * value.bce_part + alpha * value.lca_part, abs=1e-9
            )

    def test_affine_in_alpha(self):
        rng = np.random.default_rng(9)
        ys = [random_instance(rng, 8)[0] for _ in range(3)]
        hs = [random_instance(rng, 8)[1] for _ in range(3)]
        t0 = joint_loss(ys, hs, LossConfig(alpha=0.0)).total
        t_half = joint_loss(ys, hs, LossConfig(alpha=0.5)).total
        t1 = joint_loss(ys, hs, LossConfig(alpha=1.0)).total
        assert t_half == pytest.approx(0.5 * (t0 + t1), abs=1e-12)

    def test_neutral_contributes_bce_only(self):
        value = joint_loss([[0, 0, 0]], [[0.2, 0.5, 0.9]], LossConfig(alpha=1.0))
        assert value.lca_part == 0.0
        assert value.bce_part > 0.0
        assert value.total == 0.0

    def test_empty_batch_rejected(self):
        with pytest.raises(UsageError):
            joint_loss([], [], LossConfig())

    def test_batch_size_mismatch(self):
        with pytest.raises(DimensionError):
            joint_loss([[1, 0]], [], LossConfig())

    def test_ragged_batch_rejected(self):
        with pytest.raises(DimensionError):
            joint_loss([[1, 0], [1, 0, 1]], [[0.5, 0.5], [0.5, 0.5, 0.5]], LossConfig())


class TestGradient:
    def finite_difference(self, batch_y, batch_h, alpha, step=1e-5):
        grad = np.zeros_like(batch_h)
        cfg = LossConfig(alpha=alpha)
        for i in range(batch_h.shape[0]):
            for j in range(batch_h.shape[1]):
                plus = batch_h.copy()
                minus = batch_h.copy()
                plus[i, j] += step
                minus[i, j] -= step
                grad[i, j] = (
                    joint_loss(batch_y, plus, cfg).total - joint_loss(batch_y, minus, cfg).total
                ) / (2 * step)
        return grad

    @pytest.mark.parametrize("alpha", [0.0, 0.2, 0.5, 1.0])
    def test_matches_central_differences(self, alpha):
        rng = np.random.default_rng(int(alpha * 100) + 1)
        for _ in range(30):
            n = int(rng.integers(1, 4))
            c = int(rng.integers(2, 12))
            ys = np.stack([random_instance(rng, c)[0] for _ in range(n)])
            hs = np.stack([random_instance(rng, c)[1] for _ in range(n)])
            if rng.random() < 0.3:
                ys[0] = 0  # include neutral examples
            _, analytic = joint_loss_with_grad(ys, hs, LossConfig(alpha=alpha))
            numeric = self.finite_difference(ys, hs, alpha)
            scale = np.maximum(np.abs(numeric), 1e-4)
            assert (np.abs(analytic - numeric) / scale).max() < 1e-4

    def test_gradient_zero_where_clamped(self):
        ys = np.array([[1, 0]], dtype=float)
        hs = np.array([[1.0, 0.0]])  # outside the clamp band on both sides
        _, grad = joint_loss_with_grad(ys, hs, LossConfig(alpha=0.0))
        assert grad[0, 0] == 0.0
        assert grad[0, 1] == 0.0
