"""Single-step recurrent cells: activations, Elman, LSTM, initialization."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pricecast.errors import DomainError
from pricecast.neural.cells import (
    DenseParams,
    ElmanParams,
    LstmParams,
    LstmState,
    activation_derivative,
    apply_activation,
    elman_step,
    init_dense,
    init_elman,
    init_lstm,
    logistic,
    lstm_step,
)

TANH_HALF = 0.46211715726000974       # tanh(0.5)
LOGISTIC_03 = 0.57444251681165903     # 1 / (1 + exp(-0.3))


class TestActivations:
    def test_logistic_values(self):
        assert logistic(0.0) == 0.5
        assert abs(logistic(0.3) - LOGISTIC_03) < 1e-15
        assert abs(logistic(-0.3) - (1 - LOGISTIC_03)) < 1e-15

    def test_logistic_saturates_without_overflow(self):
        big = np.array([-1e4, -750.0, 750.0, 1e4])
        out = logistic(big)
        assert np.isfinite(out).all()
        assert out[0] == 0.0 and out[-1] == 1.0

    def test_apply_activation_kinds(self):
        x = np.array([-0.7, 0.0, 1.3])
        assert (apply_activation("identity", x) == x).all()
        assert np.allclose(apply_activation("tanh", x), np.tanh(x))
        assert np.allclose(apply_activation("logistic", x), logistic(x))

    @given(st.floats(-5, 5))
    def test_derivatives_from_output(self, x):
        # derivative helpers take the activation OUTPUT, not the input
        y_t = np.tanh(x)
        assert activation_derivative("tanh", np.array(y_t)) == pytest.approx(
            1 - y_t ** 2, abs=1e-12)
        y_l = float(logistic(x))
        assert activation_derivative("logistic", np.array(y_l)) == pytest.approx(
            y_l * (1 - y_l), abs=1e-12)
        assert activation_derivative("identity", np.array(x)) == 1.0


def _scalar_elman():
    return ElmanParams(
        W_h=np.array([[0.5]]), U_h=np.array([[0.25]]), b_h=np.array([0.1]),
        W_y=np.array([[2.0]]), b_y=np.array([-0.3]))


class TestElmanStep:
    def test_hand_recursion(self):
        # h1 = tanh(0.5*1 + 0.1), h2 = tanh(0.5*0.5 + 0.25*h1 + 0.1)
        p = _scalar_elman()
        h1, y1 = elman_step(p, np.array([1.0]), np.array([0.0]))
        assert abs(h1[0] - 0.5370495669980353) < 1e-15
        h2, y2 = elman_step(p, np.array([0.5]), h1)
        assert abs(h2[0] - 0.44965071643779692) < 1e-15
        assert abs(y2[0] - 0.5993014328755939) < 1e-15

    def test_zero_weights_give_bias(self):
        p = ElmanParams(np.zeros((3, 2)), np.zeros((3, 3)), np.zeros(3),
                        np.zeros((2, 3)), np.array([0.7, -0.2]))
        h, y = elman_step(p, np.array([5.0, 5.0]), np.zeros(3))
        assert (h == 0).all()
        assert y.tolist() == [0.7, -0.2]

    def test_batched_matches_loop(self):
        rng = np.random.default_rng(4)
        p = init_elman(3, 5, 2, rng)
        x = rng.uniform(-1, 1, size=(6, 3))
        h0 = rng.uniform(-1, 1, size=(6, 5))
        h_b, y_b = elman_step(p, x, h0)
        for i in range(6):
            h_i, y_i = elman_step(p, x[i], h0[i])
            assert np.allclose(h_b[i], h_i, atol=1e-15)
            assert np.allclose(y_b[i], y_i, atol=1e-15)

    def test_shape_validation(self):
        with pytest.raises(DomainError):
            ElmanParams(np.zeros((3, 2)), np.zeros((2, 2)), np.zeros(3),
                        np.zeros((1, 3)), np.zeros(1))


def _zero_lstm(hidden=1, inputs=1):
    z = lambda *s: np.zeros(s)
    return LstmParams(
        W_f=z(hidden, inputs), U_f=z(hidden, hidden), b_f=z(hidden),
        W_i=z(hidden, inputs), U_i=z(hidden, hidden), b_i=z(hidden),
        W_o=z(hidden, inputs), U_o=z(hidden, hidden), b_o=z(hidden),
        W_c=z(hidden, inputs), U_c=z(hidden, hidden), b_c=z(hidden))


class TestLstmStep:
    def test_zero_params_halve_the_cell(self):
        # all gates sit at logistic(0) = 1/2 and the candidate at tanh(0) = 0,
        # so each step halves c and emits h = tanh(c)/2
        p = _zero_lstm()
        s1 = lstm_step(p, np.array([9.9]), LstmState(np.array([1.0]), np.array([0.0])))
        assert s1.c[0] == 0.5
        assert abs(s1.h[0] - 0.23105857863000487) < 1e-15
        s2 = lstm_step(p, np.array([-3.0]), s1)
        assert s2.c[0] == 0.25
        assert abs(s2.h[0] - 0.12245933120185457) < 1e-15

    def test_forget_one_input_zero_conserves_cell(self):
        # f == 1, i == 0: the cell state rides through unchanged
        p = _zero_lstm(hidden=2, inputs=3)
        p.b_f[:] = 60.0   # logistic(60) == 1 to double precision
        p.b_i[:] = -60.0
        c0 = np.array([0.37, -1.2])
        state = LstmState(c0.copy(), np.zeros(2))
        rng = np.random.default_rng(0)
        for _ in range(10):
            state = lstm_step(p, rng.uniform(-2, 2, size=3), state)
        assert np.allclose(state.c, c0, atol=1e-12)

    @settings(max_examples=25)
    @given(st.integers(0, 2 ** 31 - 1))
    def test_gates_stay_in_unit_interval(self, seed):
        rng = np.random.default_rng(seed)
        p = init_lstm(2, 4, rng)
        state = LstmState.zeros(4)
        for _ in range(5):
            state = lstm_step(p, rng.uniform(-3, 3, size=2), state)
            # h = o * tanh(c) with o in (0,1) implies |h| < 1; c stays bounded
            # by the running gate products
            assert np.all(np.abs(state.h) < 1.0)
            assert np.isfinite(state.c).all()

    def test_batched_matches_loop(self):
        rng = np.random.default_rng(12)
        p = init_lstm(3, 4, rng)
        x = rng.uniform(-1, 1, size=(5, 3))
        state = LstmState(rng.uniform(-1, 1, (5, 4)), rng.uniform(-1, 1, (5, 4)))
        out = lstm_step(p, x, state)
        for i in range(5):
            one = lstm_step(p, x[i], LstmState(state.c[i], state.h[i]))
            assert np.allclose(out.c[i], one.c, atol=1e-15)
            assert np.allclose(out.h[i], one.h, atol=1e-15)

    def test_state_zeros_and_copy(self):
        s = LstmState.zeros(3, batch=2)
        assert s.c.shape == (2, 3) and (s.c == 0).all()
        t = s.copy()
        t.c[0, 0] = 5.0
        assert s.c[0, 0] == 0.0


class TestInit:
    def test_uniform_bounds_scale_with_fan_in(self):
        rng = np.random.default_rng(0)
        p = init_elman(16, 8, 4, rng)
        assert np.abs(p.W_h).max() <= 1 / np.sqrt(16)
        assert np.abs(p.U_h).max() <= 1 / np.sqrt(8)
        assert np.abs(p.W_y).max() <= 1 / np.sqrt(8)
        assert (p.b_h == 0).all() and (p.b_y == 0).all()

    def test_lstm_forget_bias_starts_open(self):
        rng = np.random.default_rng(0)
        p = init_lstm(4, 6, rng)
        assert (p.b_f == 1.0).all()
        assert (p.b_i == 0).all() and (p.b_o == 0).all() and (p.b_c == 0).all()

    def test_dense(self):
        rng = np.random.default_rng(0)
        d = init_dense(9, 2, rng)
        assert d.W.shape == (2, 9)
        assert np.abs(d.W).max() <= 1 / 3
        assert (d.b == 0).all()

    def test_deterministic_given_seed(self):
        a = init_lstm(3, 5, np.random.default_rng(42))
        b = init_lstm(3, 5, np.random.default_rng(42))
        assert (a.W_f == b.W_f).all() and (a.U_c == b.U_c).all()

    def test_size_validation(self):
        with pytest.raises(DomainError):
            init_elman(0, 4, 1, np.random.default_rng(0))
        with pytest.raises(DomainError):
            init_lstm(3, 0, np.random.default_rng(0))

    def test_nondefault_activations_rejected(self):
        rng = np.random.default_rng(0)
        p = init_lstm(2, 3, rng)
        with pytest.raises(DomainError):
            LstmParams(**{**p.__dict__, "sigma_g": "tanh"})
