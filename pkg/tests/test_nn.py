import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bcdrive import nn
from bcdrive.errors import ContractError, ShapeError

from _oracles import TINY, adam_scalar_steps, conv2d_loops, dense_loops, maxpool2_scan


def rng(seed=0):
    return np.random.default_rng(seed)


class TestConv2d:
    def test_identity_kernel(self):
        image = rng().uniform(0, 1, (5, 7))
        out = nn.conv2d(image, np.ones((1, 1, 1)), np.zeros(1))
        assert np.array_equal(out[0], image)

    def test_zero_input_gives_bias(self):
        bias = np.array([0.3, -1.5])
        out = nn.conv2d(np.zeros((6, 6)), rng().normal(size=(2, 3, 3)), bias)
        assert np.allclose(out[0], 0.3) and np.allclose(out[1], -1.5)

    def test_matches_loop_oracle(self):
        image = rng(1).uniform(0, 1, (4, 4))
        weights = rng(2).normal(size=(2, 3, 3))
        bias = rng(3).normal(size=2)
        expected = conv2d_loops(image, weights, bias)
        assert np.allclose(nn.conv2d(image, weights, bias), expected, atol=1e-12)

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 2\).*\(3, 3\)"):
            nn.conv2d(np.zeros((2, 2)), np.zeros((1, 3, 3)), np.zeros(1))

    def test_bias_mismatch(self):
        with pytest.raises(ShapeError):
            nn.conv2d(np.zeros((4, 4)), np.zeros((2, 3, 3)), np.zeros(3))


class TestActivations:
    def test_elu_negative_closed_form(self):
        assert nn.elu(np.array([-1.0]))[0] == pytest.approx(np.e ** -1 - 1, abs=1e-12)

    def test_elu_positive_is_identity(self):
        x = np.array([0.0, 0.5, 3.0])
        assert np.array_equal(nn.elu(x), x)

    def test_relu(self):
        assert np.array_equal(nn.relu(np.array([-2.0, 0.0, 3.0])), [0.0, 0.0, 3.0])

    def test_softmax_uniform(self):
        assert np.allclose(nn.softmax(np.zeros(3)), [1 / 3] * 3)

    def test_softmax_rejects_rank2(self):
        with pytest.raises(ShapeError):
            nn.softmax(np.zeros((2, 3)))

    @given(arrays(np.float64, 3, elements=st.floats(-50, 50)))
    def test_softmax_simplex(self, logits):
        probs = nn.softmax(logits)
        assert np.all(probs >= 0)
        assert abs(probs.sum() - 1.0) <= 1e-6

    @given(arrays(np.float64, 3, elements=st.floats(-50, 50)),
           st.floats(-100, 100))
    def test_softmax_shift_invariant(self, logits, shift):
        assert np.allclose(nn.softmax(logits), nn.softmax(logits + shift), atol=1e-9)


class TestMaxpool:
    def test_single_window(self):
        pooled, idx = nn.maxpool2(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        assert pooled[0, 0, 0] == 4.0
        assert idx[0, 0, 0] == 3

    def test_constant_ties_break_to_first(self):
        pooled, idx = nn.maxpool2(np.full((2, 4, 4), 7.0))
        assert np.all(pooled == 7.0)
        assert np.all(idx == 0)

    def test_matches_scan_oracle(self):
        x = rng(4).normal(size=(1, 4, 4))
        pooled, _ = nn.maxpool2(x)
        assert np.array_equal(pooled, maxpool2_scan(x))

    def test_odd_dims_rejected(self):
        with pytest.raises(ShapeError):
            nn.maxpool2(np.zeros((1, 3, 4)))

    @given(arrays(np.float64, (2, 4, 6), elements=st.floats(-10, 10)))
    def test_dominates_covered_elements(self, x):
        pooled, _ = nn.maxpool2(x)
        for di in range(2):
            for dj in range(2):
                assert np.all(pooled >= x[:, di::2, dj::2])

    def test_backward_routes_to_argmax(self):
        x = np.array([[[1.0, 2.0], [4.0, 3.0]]])
        pooled, idx = nn.maxpool2(x)
        grad = nn.maxpool2_backward(np.array([[[5.0]]]), idx)
        assert np.array_equal(grad, [[[0.0, 0.0], [5.0, 0.0]]])


class TestDense:
    def test_identity(self):
        x = rng(5).normal(size=4)
        assert np.array_equal(nn.dense(x, np.eye(4), np.zeros(4)), x)

    def test_zero_weights_give_bias(self):
        bias = np.array([1.0, -2.0])
        assert np.array_equal(nn.dense(np.ones(3), np.zeros((2, 3)), bias), bias)

    def test_matches_loop_oracle(self):
        x = rng(6).normal(size=4)
        w = rng(7).normal(size=(3, 4))
        b = rng(8).normal(size=3)
        assert np.allclose(nn.dense(x, w, b), dense_loops(x, w, b), atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            nn.dense(np.zeros(4), np.zeros((3, 5)), np.zeros(3))


class TestForward:
    def test_probs_form_distribution(self):
        params = nn.init_params(TINY, 0)
        probs, _ = nn.forward(params, rng(9).uniform(0, 1, (8, 8)))
        assert np.all(probs >= 0) and np.all(probs <= 1)
        assert abs(probs.sum() - 1.0) <= 1e-6

    def test_zero_network_predicts_uniform(self):
        params = nn.init_params(TINY, 0)
        for name in nn.PARAM_FIELDS:
            getattr(params, name)[:] = 0.0
        probs, _ = nn.forward(params, rng(10).uniform(0, 1, (8, 8)))
        assert np.allclose(probs, [1 / 3] * 3)

    def test_deterministic(self):
        params = nn.init_params(TINY, 3)
        frame = rng(11).uniform(0, 1, (8, 8))
        p1, _ = nn.forward(params, frame)
        p2, _ = nn.forward(params, frame)
        assert p1.tobytes() == p2.tobytes()

    def test_rejects_unnormalized_input(self):
        params = nn.init_params(TINY, 0)
        frame = np.full((8, 8), 0.5)
        frame[0, 0] = 1.5
        with pytest.raises(ContractError, match="normalized"):
            nn.forward(params, frame)

    def test_rejects_wrong_shape(self):
        params = nn.init_params(TINY, 0)
        with pytest.raises(ShapeError):
            nn.forward(params, np.zeros((9, 8)))


class TestMseLoss:
    def test_perfect_prediction_is_zero(self):
        target = np.array([0.0, 1.0, 0.0])
        loss, grad = nn.mse_loss(target.copy(), target)
        assert loss == 0.0
        assert np.array_equal(grad, np.zeros(3))

    def test_uniform_vs_one_hot(self):
        loss, _ = nn.mse_loss(np.full(3, 1 / 3), np.array([1.0, 0.0, 0.0]))
        assert loss == pytest.approx(2 / 9, abs=1e-12)

    @given(arrays(np.float64, 3, elements=st.floats(0, 1)), st.sampled_from([0, 1, 2]))
    def test_nonnegative(self, probs, hot):
        target = np.zeros(3)
        target[hot] = 1.0
        loss, _ = nn.mse_loss(probs, target)
        assert loss >= 0.0

    def test_rejects_non_one_hot(self):
        with pytest.raises(ContractError):
            nn.mse_loss(np.full(3, 1 / 3), np.array([0.5, 0.5, 0.0]))


class TestCrossEntropy:
    def test_perfect_prediction(self):
        target = np.array([0.0, 0.0, 1.0])
        loss, _ = nn.cross_entropy_loss(target.copy(), target)
        assert loss == pytest.approx(0.0, abs=1e-9)

    def test_uniform_value(self):
        loss, _ = nn.cross_entropy_loss(np.full(3, 1 / 3), np.array([1.0, 0.0, 0.0]))
        assert loss == pytest.approx(np.log(3), abs=1e-12)


class TestBackward:
    def test_zero_upstream_gives_zero_gradients(self):
        params = nn.init_params(TINY, 1)
        _, cache = nn.forward(params, rng(12).uniform(0, 1, (8, 8)))
        grads = nn.backward(params, cache, np.zeros(3))
        for name in nn.PARAM_FIELDS:
            assert not np.any(grads[name])

    def test_matches_finite_differences(self):
        from _oracles import generic_params, loss_gradient_max_rel_error
        params = generic_params(TINY, 2)
        frame = rng(13).uniform(0, 1, (8, 8))
        target = np.array([0.0, 1.0, 0.0])
        assert loss_gradient_max_rel_error(params, frame, target) <= 1e-4

    def test_deterministic(self):
        params = nn.init_params(TINY, 4)
        frame = rng(14).uniform(0, 1, (8, 8))
        _, cache = nn.forward(params, frame)
        dprobs = np.array([0.1, -0.2, 0.1])
        g1 = nn.backward(params, cache, dprobs)
        g2 = nn.backward(params, cache, dprobs)
        for name in nn.PARAM_FIELDS:
            assert g1[name].tobytes() == g2[name].tobytes()

    def test_rejects_mismatched_cache(self):
        params = nn.init_params(TINY, 5)
        other = nn.init_params(nn.ArchitectureConfig(
            input_height=12, input_width=12, conv_filters=2, conv_kernel=3,
            dense1_units=4, dense2_units=4), 5)
        _, cache = nn.forward(other, rng(15).uniform(0, 1, (12, 12)))
        with pytest.raises(ContractError):
            nn.backward(params, cache, np.zeros(3))


class TestAdam:
    def test_first_step_hand_value(self):
        params = nn.init_params(TINY, 0)
        params.conv_b[:] = 1.0
        grads = nn.zero_gradients(params)
        grads["conv_b"][:] = 1.0
        updated = nn.adam_step(params, grads, nn.AdamConfig())
        assert updated.conv_b[0] == pytest.approx(0.999, abs=1e-9)
        assert updated.adam_t == 1

    def test_zero_gradient_changes_nothing_but_t(self):
        params = nn.init_params(TINY, 6)
        updated = nn.adam_step(params, nn.zero_gradients(params), nn.AdamConfig())
        assert updated.adam_t == params.adam_t + 1
        for name in nn.PARAM_FIELDS:
            assert np.array_equal(getattr(updated, name), getattr(params, name))

    def test_two_steps_match_scalar_oracle(self):
        params = nn.init_params(TINY, 0)
        params.conv_b[:] = 1.0
        grads = nn.zero_gradients(params)
        grads["conv_b"][:] = 1.0
        stepped = nn.adam_step(params, grads, nn.AdamConfig())
        stepped = nn.adam_step(stepped, grads, nn.AdamConfig())
        expected = adam_scalar_steps(1.0, [1.0, 1.0])
        assert stepped.conv_b[0] == pytest.approx(expected, rel=1e-12)

    def test_t_strictly_increments(self):
        params = nn.init_params(TINY, 7)
        for expected_t in (1, 2, 3):
            params = nn.adam_step(params, nn.zero_gradients(params), nn.AdamConfig())
            assert params.adam_t == expected_t

    def test_shape_mismatch_rejected(self):
        params = nn.init_params(TINY, 8)
        grads = nn.zero_gradients(params)
        grads["conv_w"] = np.zeros((1, 3, 3))
        with pytest.raises(ShapeError):
            nn.adam_step(params, grads, nn.AdamConfig())


class TestInitParams:
    def test_same_seed_bit_identical(self):
        a = nn.init_params(TINY, 42)
        b = nn.init_params(TINY, 42)
        for name in nn.PARAM_FIELDS:
            assert getattr(a, name).tobytes() == getattr(b, name).tobytes()

    def test_biases_zero_and_adam_fresh(self):
        params = nn.init_params(TINY, 9)
        for name in ("conv_b", "dense1_b", "dense2_b", "out_b"):
            assert not np.any(getattr(params, name))
        assert params.adam_t == 0
        for name in nn.PARAM_FIELDS:
            assert not np.any(params.adam_m[name])
            assert not np.any(params.adam_v[name])

    def test_out_layer_respects_glorot_bound(self):
        config = nn.ArchitectureConfig(input_height=8, input_width=8, conv_filters=2,
                                       conv_kernel=3, dense1_units=4, dense2_units=4)
        bound = np.sqrt(6.0 / 7.0)  # fan_in 4, fan_out 3
        for seed in range(20):
            out_w = nn.init_params(config, seed).out_w
            assert np.all(np.abs(out_w) <= bound)


class TestArchitectureConfig:
    def test_rejects_odd_conv_output(self):
        with pytest.raises(ContractError):
            nn.ArchitectureConfig(input_height=9, input_width=9, conv_kernel=3)

    def test_rejects_kernel_larger_than_input(self):
        with pytest.raises(ContractError):
            nn.ArchitectureConfig(input_height=4, input_width=4, conv_kernel=7)

    def test_rejects_nonstandard_pool_or_classes(self):
        with pytest.raises(ContractError):
            nn.ArchitectureConfig(pool=3)
        with pytest.raises(ContractError):
            nn.ArchitectureConfig(classes=4)

    def test_adam_config_validation(self):
        for kwargs in ({"beta1": 1.0}, {"beta2": 0.0}, {"epsilon": 0.0},
                       {"learning_rate": -1.0}):
            with pytest.raises(ContractError):
                nn.AdamConfig(**kwargs)
