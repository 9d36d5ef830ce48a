import numpy as np
import pytest

from glacierseg.tensorops import ShapeMismatch
from glacierseg.train import (
    AdamState,
    EmptyTrainingSet,
    InvalidCode,
    LossConfig,
    TrainConfig,
    adam_step,
    bce_loss,
    combined_loss_and_grad,
    dice_loss,
    one_hot,
    sigmoid_probs,
    train,
)
from glacierseg.unet import UNetConfig

from test_unet import FD_STEP, FD_TOL, fd_grad, max_rel_err


class TestOneHot:
    def test_single_codes(self):
        out = one_hot(np.array([[1]]))
        assert out.shape == (1, 3, 1, 1)
        assert out.ravel().tolist() == [1, 0, 0]  # clean_ice is channel 0
        assert one_hot(np.array([[0]])).ravel().tolist() == [0, 0, 1]
        assert one_hot(np.array([[2]])).ravel().tolist() == [0, 1, 0]

    def test_channel_sum_is_one(self):
        rng = np.random.default_rng(0)
        mask = rng.integers(0, 3, (8, 8))
        assert np.allclose(one_hot(mask).sum(axis=1), 1.0)

    def test_invalid_code(self):
        with pytest.raises(InvalidCode):
            one_hot(np.array([[3]]))


class TestSigmoid:
    def test_zero(self):
        assert sigmoid_probs(np.zeros((1, 1, 1, 1)))[0, 0, 0, 0] == 0.5

    def test_monotone(self):
        z = np.linspace(-5, 5, 50).reshape(1, 1, 1, 50)
        p = sigmoid_probs(z)
        assert np.all(np.diff(p.ravel()) > 0)

    def test_saturation_stable(self):
        z = np.array([40.0, -40.0]).reshape(1, 1, 1, 2)
        p = sigmoid_probs(z)
        assert np.all(np.isfinite(p))
        assert abs(p[0, 0, 0, 0] - 1.0) < 1e-7
        assert abs(p[0, 0, 0, 1]) < 1e-7


class TestBceLoss:
    def test_half_probs(self):
        rng = np.random.default_rng(1)
        t = (rng.random((1, 3, 4, 4)) > 0.5).astype(np.float64)
        p = np.full_like(t, 0.5)
        assert np.isclose(bce_loss(p, t), np.log(2.0))

    def test_perfect_prediction_near_zero(self):
        t = np.array([1.0, 0.0]).reshape(1, 1, 1, 2)
        assert bce_loss(t, t) <= -np.log(1.0 - 1e-7) + 1e-12

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(2)
        p = rng.uniform(0.01, 0.99, (1, 2, 3, 3))
        t = (rng.random((1, 2, 3, 3)) > 0.5).astype(np.float64)
        direct = 0.0
        for idx in np.ndindex(p.shape):
            direct -= t[idx] * np.log(p[idx]) + (1 - t[idx]) * np.log(1 - p[idx])
        assert np.isclose(bce_loss(p, t), direct / p.size, atol=1e-6)

    def test_nonnegative(self):
        rng = np.random.default_rng(3)
        p = rng.uniform(0, 1, (1, 3, 4, 4))
        t = (rng.random((1, 3, 4, 4)) > 0.5).astype(np.float64)
        assert bce_loss(p, t) >= 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            bce_loss(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 3, 3)))


class TestDiceLoss:
    def test_perfect_is_zero(self):
        rng = np.random.default_rng(4)
        t = (rng.random((1, 3, 4, 4)) > 0.5).astype(np.float64)
        assert dice_loss(t, t) == 0.0

    def test_all_ones_against_half(self):
        n = 64
        t = np.zeros((1, 1, 8, 8))
        t[0, 0, :4, :] = 1.0  # half the pixels
        p = np.ones_like(t)
        s = 1e-9
        expected = 1.0 - (n + s) / (1.5 * n + s)
        assert np.isclose(dice_loss(p, t, smooth=s), expected, atol=1e-6)

    def test_disjoint_approaches_one(self):
        t = np.ones((1, 1, 32, 32))
        p = np.zeros_like(t)
        val = dice_loss(p, t, smooth=1.0)
        assert np.isclose(val, 1.0 - 1.0 / (32 * 32 + 1.0))

    def test_symmetric_on_binary(self):
        rng = np.random.default_rng(5)
        a = (rng.random((1, 2, 4, 4)) > 0.5).astype(np.float64)
        b = (rng.random((1, 2, 4, 4)) > 0.5).astype(np.float64)
        assert np.isclose(dice_loss(a, b), dice_loss(b, a))

    def test_bounded(self):
        rng = np.random.default_rng(6)
        p = rng.uniform(0, 1, (1, 3, 4, 4))
        t = (rng.random((1, 3, 4, 4)) > 0.5).astype(np.float64)
        val = dice_loss(p, t)
        assert 0.0 <= val <= 1.0 + 1e-9


class TestCombinedLoss:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        logits = rng.standard_normal((1, 3, 4, 4))
        t = np.zeros((1, 3, 4, 4))
        t[0, rng.integers(0, 3, (4, 4)), np.arange(4)[:, None], np.arange(4)] = 1
        cfg = LossConfig()
        loss, grad = combined_loss_and_grad(logits, t, cfg)
        fd = fd_grad(lambda z: combined_loss_and_grad(z, t, cfg)[0], logits)
        assert max_rel_err(grad, fd) < FD_TOL

    def test_confident_correct_is_tiny(self):
        t = np.zeros((1, 3, 2, 2))
        t[0, 0] = 1.0
        logits = np.where(t == 1.0, 40.0, -40.0)
        loss, _ = combined_loss_and_grad(logits, t, LossConfig())
        assert loss < 1e-5

    def test_bce_only_decomposition(self):
        rng = np.random.default_rng(8)
        logits = rng.standard_normal((1, 3, 4, 4))
        t = (rng.random((1, 3, 4, 4)) > 0.5).astype(np.float64)
        cfg = LossConfig(bce_weight=1.0, dice_weight=0.0)
        loss, _ = combined_loss_and_grad(logits, t, cfg)
        assert np.isclose(loss, bce_loss(sigmoid_probs(logits), t, cfg.clamp_eps))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            combined_loss_and_grad(np.zeros((1, 3, 2, 2)), np.zeros((1, 3, 4, 4)), LossConfig())


def scalar_params(value=0.0):
    return {"w": (np.array([[value]], dtype=np.float32), np.zeros(1, dtype=np.float32))}


class TestAdam:
    def test_zero_grads_no_motion(self):
        params = scalar_params(1.0)
        grads = {"w": (np.zeros((1, 1), dtype=np.float32), np.zeros(1, dtype=np.float32))}
        state = AdamState.init(params, l2_lambda=0.0)
        params2, state2 = adam_step(params, grads, state)
        assert params2["w"][0][0, 0] == 1.0
        assert state2.t == 1

    def test_reference_scalar_trace(self):
        params = scalar_params(0.0)
        grads = {"w": (np.ones((1, 1), dtype=np.float32), np.zeros(1, dtype=np.float32))}
        state = AdamState.init(params, l2_lambda=0.0)
        params2, _ = adam_step(params, grads, state)
        # bias-corrected m_hat = v_hat = 1 after one unit-gradient step
        expected = -state.lr * 1.0 / (1.0 + state.eps)
        assert np.isclose(params2["w"][0][0, 0], expected, rtol=1e-6)

    def test_l2_decays_weight(self):
        params = scalar_params(1.0)
        grads = {"w": (np.zeros((1, 1), dtype=np.float32), np.zeros(1, dtype=np.float32))}
        state = AdamState.init(params, l2_lambda=5e-4)
        w = params["w"][0][0, 0]
        for _ in range(5):
            params, state = adam_step(params, grads, state)
            assert params["w"][0][0, 0] < w
            w = params["w"][0][0, 0]

    def test_l2_not_applied_to_biases(self):
        params = {"w": (np.zeros((1, 1), dtype=np.float32), np.ones(1, dtype=np.float32))}
        grads = {"w": (np.zeros((1, 1), dtype=np.float32), np.zeros(1, dtype=np.float32))}
        state = AdamState.init(params, l2_lambda=0.1)
        params2, _ = adam_step(params, grads, state)
        assert params2["w"][1][0] == 1.0

    def test_replay_reproduces_bit_exactly(self):
        rng = np.random.default_rng(9)
        grads_seq = [
            {"w": (rng.standard_normal((2, 2)).astype(np.float32), rng.standard_normal(2).astype(np.float32))}
            for _ in range(4)
        ]
        results = []
        for _ in range(2):
            params = {"w": (np.ones((2, 2), dtype=np.float32), np.zeros(2, dtype=np.float32))}
            state = AdamState.init(params)
            for g in grads_seq:
                params, state = adam_step(params, g, state)
            results.append(params["w"][0].tobytes())
        assert results[0] == results[1]

    def test_shape_mismatch(self):
        params = scalar_params()
        grads = {"w": (np.zeros((2, 2), dtype=np.float32), np.zeros(1, dtype=np.float32))}
        with pytest.raises(ShapeMismatch):
            adam_step(params, grads, AdamState.init(params))


class TestTrainLoop:
    def test_empty_training_set(self):
        with pytest.raises(EmptyTrainingSet):
            train([], TrainConfig(), LossConfig(), UNetConfig())

    def test_determinism_bit_exact(self, tmp_path, overfit_run):
        patches = overfit_run["patches"][:4]
        cfg = UNetConfig(base_channels=4)
        tcfg = TrainConfig(epochs=2, batch_size=2, seed=3, patch_size=64, checkpoint_every=2)
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            out.mkdir()
            train(patches, tcfg, LossConfig(), cfg, seed=3, out_dir=str(out))
            outs.append((out / "ckpt_final.glck").read_bytes())
        assert outs[0] == outs[1]

    def test_curve_epochs_contiguous(self, overfit_run):
        curve = overfit_run["curve"]
        epochs = [e for e, _ in curve.points]
        assert epochs == list(range(1, len(epochs) + 1))

    def test_overfit_smoke(self, overfit_run):
        losses = [v for _, v in overfit_run["curve"].points]
        assert losses[-1] < 0.2 * losses[0]

    def test_curve_csv(self, tmp_path, overfit_run):
        path = tmp_path / "loss.csv"
        overfit_run["curve"].write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,loss"
        assert len(lines) == len(overfit_run["curve"].points) + 1
