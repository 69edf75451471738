"""Unit tests for the differentiable kernels: forward values against hand
computations, gradients against central finite differences, and the
conv/conv-transpose adjoint identity."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from min2net.errors import ShapeError
from min2net.nn import (
    Adam,
    AvgPoolTime,
    BatchNorm,
    ConvTime,
    ConvTransposeTime,
    Dense,
    Elu,
    Param,
    Softmax,
    grad_check,
)


def _rng(seed=0):
    return np.random.default_rng(seed)


def _as_input(v):
    """(T,) vector -> (1, 1, T, 1) single-channel batch."""
    v = np.asarray(v, dtype=np.float64)
    return v[None, None, :, None]


def _set_kernel(conv, taps):
    """Install explicit taps on a 1-in/1-out channel conv and zero the bias."""
    taps = np.asarray(taps, dtype=conv.w.value.dtype)
    conv.w.value = taps.reshape(-1, 1, 1)
    conv.b.value[:] = 0.0


class TestConvTime:
    def test_ones_input_box_kernel(self):
        conv = ConvTime(1, 1, 3, rng=_rng()).astype(np.float64)
        _set_kernel(conv, [1, 1, 1])
        out = conv.forward(_as_input([1, 1, 1, 1]))
        np.testing.assert_allclose(out[0, 0, :, 0], [2, 3, 3, 2])

    def test_identity_kernel(self):
        conv = ConvTime(1, 1, 3, rng=_rng()).astype(np.float64)
        _set_kernel(conv, [0, 1, 0])
        x = _as_input(_rng(1).standard_normal(16))
        np.testing.assert_allclose(conv.forward(x), x)

    def test_channel_mismatch_rejected(self):
        conv = ConvTime(3, 2, 5, rng=_rng())
        with pytest.raises(ShapeError):
            conv.forward(np.zeros((2, 1, 16, 4), dtype=np.float32))

    def test_stride_divides_output_length(self):
        conv = ConvTime(2, 3, 8, stride=4, rng=_rng()).astype(np.float64)
        out = conv.forward(_rng(2).standard_normal((2, 1, 16, 2)))
        assert out.shape == (2, 1, 4, 3)

    def test_gradients_match_finite_differences(self):
        conv = ConvTime(3, 2, 5, rng=_rng(3)).astype(np.float64)
        x0 = _rng(4).standard_normal((2, 1, 16, 3))
        co = _rng(5).standard_normal((2, 1, 16, 2))

        def loss_wrt_input(x):
            out = conv.forward(x)
            conv.zero_grad()
            dx = conv.backward(co)
            return float((out * co).sum()), dx

        assert grad_check(loss_wrt_input, x0) < 1e-4

        for param in conv.params:
            def loss_wrt_param(v, param=param):
                param.value = v
                out = conv.forward(x0)
                conv.zero_grad()
                conv.backward(co)
                return float((out * co).sum()), param.grad.copy()

            assert grad_check(loss_wrt_param, param.value.copy()) < 1e-4


class TestConvTransposeTime:
    def test_upsampled_lengths(self):
        # the two decoder configurations: 25 -> 100 and 100 -> 400
        up4 = ConvTransposeTime(10, 10, 64, 4, rng=_rng()).astype(np.float64)
        assert up4.forward(np.zeros((1, 1, 25, 10))).shape == (1, 1, 100, 10)
        assert up4.forward(np.zeros((1, 1, 100, 10))).shape == (1, 1, 400, 10)

    def test_direct_summation_oracle(self):
        """Scatter semantics: out[t] += w[k] * x[l] where t = l*s + k - pad."""
        deconv = ConvTransposeTime(1, 1, 4, 2, rng=_rng()).astype(np.float64)
        taps = np.array([0.5, -1.0, 2.0, 0.25])
        deconv.w.value = taps.reshape(4, 1, 1)
        deconv.b.value[:] = 0.0
        x = np.array([3.0, -2.0])
        out = deconv.forward(_as_input(x))[0, 0, :, 0]

        pad_left = (4 - 1) // 2
        expect = np.zeros(4)
        for l, xv in enumerate(x):
            for k, w in enumerate(taps):
                t = l * 2 + k - pad_left
                if 0 <= t < 4:
                    expect[t] += w * xv
        np.testing.assert_allclose(out, expect)

    @pytest.mark.parametrize("in_ch,out_ch,kernel,stride,L",
                             [(10, 10, 64, 4, 25), (10, 3, 32, 4, 100),
                              (1, 1, 4, 2, 6), (2, 3, 8, 4, 8)])
    def test_adjoint_of_strided_conv(self, in_ch, out_ch, kernel, stride, L):
        """<conv_strided(u), v> == <u, conv_transpose(v)> with tied weights."""
        rng = _rng(7)
        deconv = ConvTransposeTime(in_ch, out_ch, kernel, stride,
                                   rng=rng).astype(np.float64)
        conv = ConvTime(out_ch, in_ch, kernel, stride=stride,
                        rng=rng).astype(np.float64)
        # both kernels are (K, out_ch, in_ch) once the roles are swapped
        conv.w.value = deconv.w.value.copy()
        conv.b.value[:] = 0.0
        deconv.b.value[:] = 0.0
        u = rng.standard_normal((2, 1, L * stride, out_ch))
        v = rng.standard_normal((2, 1, L, in_ch))
        lhs = float((conv.forward(u) * v).sum())
        rhs = float((u * deconv.forward(v)).sum())
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_gradients_match_finite_differences(self):
        deconv = ConvTransposeTime(2, 3, 6, 2, rng=_rng(8)).astype(np.float64)
        x0 = _rng(9).standard_normal((2, 1, 8, 2))
        co = _rng(10).standard_normal((2, 1, 16, 3))

        def loss_wrt_input(x):
            out = deconv.forward(x)
            deconv.zero_grad()
            return float((out * co).sum()), deconv.backward(co)

        assert grad_check(loss_wrt_input, x0) < 1e-4

        for param in deconv.params:
            def loss_wrt_param(v, param=param):
                param.value = v
                out = deconv.forward(x0)
                deconv.zero_grad()
                deconv.backward(co)
                return float((out * co).sum()), param.grad.copy()

            assert grad_check(loss_wrt_param, param.value.copy()) < 1e-4


class TestBatchNorm:
    def test_constant_input_maps_to_beta(self):
        bn = BatchNorm(3, dtype=np.float64)
        bn.gamma.value[:] = 2.5
        x = np.full((4, 1, 8, 3), 7.0)
        out = bn.forward(x, train=True)
        assert np.abs(out).max() <= 1e-3

    def test_standardized_input_passthrough(self):
        rng = _rng(11)
        x = rng.standard_normal((8, 1, 50, 2))
        x = (x - x.mean(axis=(0, 1, 2))) / x.std(axis=(0, 1, 2))
        bn = BatchNorm(2, dtype=np.float64)
        out = bn.forward(x, train=True)
        np.testing.assert_allclose(out, x / np.sqrt(1 + 1e-3), atol=1e-6)

    def test_train_statistics_property(self):
        rng = _rng(12)
        bn = BatchNorm(4, dtype=np.float64)
        bn.gamma.value[:] = [1.0, 2.0, 0.5, 3.0]
        x = rng.standard_normal((6, 1, 30, 4))
        x = (x - x.mean(axis=(0, 1, 2))) / x.std(axis=(0, 1, 2)) + 1.0
        out = bn.forward(x, train=True)
        mean = out.mean(axis=(0, 1, 2))
        var = out.var(axis=(0, 1, 2))
        assert np.abs(mean).max() <= 1e-5
        expect_var = bn.gamma.value ** 2 / (1 + 1e-3)
        np.testing.assert_allclose(var, expect_var, atol=1e-3)

    def test_batch_of_one_rejected_in_train_mode(self):
        bn = BatchNorm(2)
        with pytest.raises(ShapeError):
            bn.forward(np.zeros((1, 1, 8, 2), dtype=np.float32), train=True)
        bn.forward(np.zeros((1, 1, 8, 2), dtype=np.float32), train=False)

    def test_gradients_match_finite_differences(self):
        bn = BatchNorm(3, dtype=np.float64)
        bn.gamma.value[:] = [1.5, 0.5, 2.0]
        bn.beta.value[:] = [0.1, -0.2, 0.0]
        x0 = _rng(13).standard_normal((4, 1, 10, 3))
        co = _rng(14).standard_normal((4, 1, 10, 3))

        def loss_wrt_input(x):
            out = bn.forward(x, train=True)
            bn.zero_grad()
            return float((out * co).sum()), bn.backward(co)

        assert grad_check(loss_wrt_input, x0) < 1e-4

        for param in bn.params:
            def loss_wrt_param(v, param=param):
                param.value = v
                out = bn.forward(x0, train=True)
                bn.zero_grad()
                bn.backward(co)
                return float((out * co).sum()), param.grad.copy()

            assert grad_check(loss_wrt_param, param.value.copy()) < 1e-4


class TestAvgPoolTime:
    def test_hand_means(self):
        pool = AvgPoolTime(2)
        out = pool.forward(_as_input([1, 3, 5, 7]))
        np.testing.assert_allclose(out[0, 0, :, 0], [2, 6])

    def test_table_length(self):
        pool = AvgPoolTime(4)
        assert pool.forward(np.zeros((2, 1, 400, 20))).shape == (2, 1, 100, 20)

    def test_indivisible_length_rejected(self):
        with pytest.raises(ShapeError):
            AvgPoolTime(3).forward(np.zeros((1, 1, 8, 1)))

    def test_gradients_match_finite_differences(self):
        pool = AvgPoolTime(4)
        x0 = _rng(15).standard_normal((2, 1, 16, 3))
        co = _rng(16).standard_normal((2, 1, 4, 3))

        def fn(x):
            out = pool.forward(x)
            return float((out * co).sum()), pool.backward(co)

        assert grad_check(fn, x0) < 1e-6


class TestDense:
    def test_identity_map(self):
        fc = Dense(4, 4, rng=_rng()).astype(np.float64)
        fc.w.value = np.eye(4)
        fc.b.value[:] = 0.0
        x = _rng(17).standard_normal((3, 4))
        np.testing.assert_allclose(fc.forward(x), x)

    def test_latent_row_parameter_count(self):
        fc = Dense(250, 20, rng=_rng())
        assert sum(p.size for p in fc.params) == 5020

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            Dense(4, 2, rng=_rng()).forward(np.zeros((3, 5)))

    def test_gradients_match_finite_differences(self):
        fc = Dense(6, 4, rng=_rng(18)).astype(np.float64)
        x0 = _rng(19).standard_normal((5, 6))
        co = _rng(20).standard_normal((5, 4))

        def loss_wrt_input(x):
            out = fc.forward(x)
            fc.zero_grad()
            return float((out * co).sum()), fc.backward(co)

        assert grad_check(loss_wrt_input, x0) < 1e-5

        for param in fc.params:
            def loss_wrt_param(v, param=param):
                param.value = v
                out = fc.forward(x0)
                fc.zero_grad()
                fc.backward(co)
                return float((out * co).sum()), param.grad.copy()

            assert grad_check(loss_wrt_param, param.value.copy()) < 1e-5


class TestElu:
    def test_fixed_points(self):
        elu = Elu()
        np.testing.assert_allclose(elu.forward(np.array([1.0, 0.0])), [1.0, 0.0])

    def test_negative_branch(self):
        out = Elu().forward(np.array([-1.0]))
        np.testing.assert_allclose(out, [np.exp(-1) - 1], atol=1e-12)

    @given(st.lists(st.integers(-10_000, 10_000), min_size=2, max_size=20,
                    unique=True))
    def test_strictly_increasing(self, grid):
        xs = np.sort(np.asarray(grid, dtype=np.float64)) / 1000.0
        ys = Elu().forward(xs)
        assert np.all(np.diff(ys) > 0)

    def test_gradients_match_finite_differences(self):
        elu = Elu()
        x0 = _rng(21).standard_normal(40)
        co = _rng(22).standard_normal(40)

        def fn(x):
            out = elu.forward(x)
            return float((out * co).sum()), elu.backward(co)

        assert grad_check(fn, x0) < 1e-4


class TestSoftmax:
    def test_symmetry(self):
        out = Softmax().forward(np.array([[0.0, 0.0]]))
        np.testing.assert_allclose(out, [[0.5, 0.5]])

    def test_shift_invariance(self):
        v = _rng(23).standard_normal((4, 5))
        sm = Softmax()
        np.testing.assert_allclose(sm.forward(v), sm.forward(v + 17.0),
                                   atol=1e-7)

    def test_no_overflow_on_large_logits(self):
        out = Softmax().forward(np.array([[1000.0, 0.0]]))
        np.testing.assert_allclose(out, [[1.0, 0.0]])

    def test_rows_sum_to_one(self):
        out = Softmax().forward(_rng(24).standard_normal((8, 6)))
        np.testing.assert_allclose(out.sum(axis=1), np.ones(8), atol=1e-6)

    def test_gradients_match_finite_differences(self):
        sm = Softmax()
        x0 = _rng(25).standard_normal((3, 4))
        co = _rng(26).standard_normal((3, 4))

        def fn(x):
            out = sm.forward(x)
            return float((out * co).sum()), sm.backward(co)

        assert grad_check(fn, x0) < 1e-4


class TestAdam:
    def test_first_step_magnitude_equals_lr(self):
        p = Param("w", np.array([0.0]))
        opt = Adam([p], learning_rate=1e-3)
        p.grad[:] = 1.0
        opt.step()
        np.testing.assert_allclose(p.value, [-1e-3], rtol=1e-6)

    def test_zero_gradient_null_update(self):
        p = Param("w", np.array([1.0, -2.0]))
        opt = Adam([p])
        opt.step()
        np.testing.assert_allclose(p.value, [1.0, -2.0])
        assert opt.step_count == 1

    def test_descends_quadratic(self):
        p = Param("w", np.array([1.0]))
        opt = Adam([p], learning_rate=0.05)
        values = []
        for _ in range(10):
            p.grad[:] = 2.0 * p.value
            values.append(float(p.value[0] ** 2))
            opt.step()
        assert float(p.value[0] ** 2) < values[0]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_nonfinite_gradient_names_parameter(self):
        p = Param("enc.conv1.weight", np.zeros(3))
        opt = Adam([p])
        p.grad[:] = [0.0, np.nan, 0.0]
        with pytest.raises(FloatingPointError, match="enc.conv1.weight"):
            opt.step()

    def test_external_scheduler_can_mutate_lr(self):
        p = Param("w", np.array([0.0]))
        opt = Adam([p], learning_rate=1e-3)
        opt.learning_rate = 5e-4
        p.grad[:] = 1.0
        opt.step()
        np.testing.assert_allclose(p.value, [-5e-4], rtol=1e-6)


class TestGradCheck:
    def test_quadratic_is_nearly_exact(self):
        def fn(x):
            return float((x ** 2).sum()), 2.0 * x

        assert grad_check(fn, _rng(27).standard_normal(20)) <= 1e-8

    def test_corrupted_gradient_detected(self):
        def fn(x):
            return float((x ** 2).sum()), 2.02 * x  # gradient scaled by 1.01

        assert grad_check(fn, _rng(28).standard_normal(20)) >= 1e-3

    def test_nonfinite_gradient_reported_as_failure(self):
        def fn(x):
            g = np.full_like(x, np.nan)
            return float(x.sum()), g

        assert grad_check(fn, np.ones(3)) == np.inf


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(1, 4), st.integers(1, 16))
def test_shape_algebra_is_total(batch, channels, length):
    """Any mismatched wiring fails loudly before computing."""
    conv = ConvTime(channels + 1, 2, 3, rng=_rng(29))
    with pytest.raises(ShapeError):
        conv.forward(np.zeros((batch, 1, length, channels), dtype=np.float32))
