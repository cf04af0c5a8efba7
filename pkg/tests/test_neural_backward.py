"""Backpropagation against independent finite differences.

The oracle here is a plain central-difference loop written in the test
itself, so the production gradient checker is itself checked against an
implementation it shares no code with.
"""

import numpy as np
import pytest

from pricecast.errors import DomainError, UsageError
from pricecast.neural.gradcheck import GradCheckReport, grad_check
from pricecast.neural.models import backward, build_model, forward_sequence, mse_loss

# frozen one-step Elman hand gradients: W_h=0.5 U_h=0.25 b_h=0.1 W_y=2 b_y=-0.3,
# window [[1.0]], target [0.2]; see the derivation constants below
H1 = 0.5370495669980353            # tanh(0.6)
Y1 = 0.77409913399607055           # 2*h1 - 0.3
DWY = 0.6166393826530735           # 2*(y-t)*h1
DBY = 1.1481982679921412           # 2*(y-t)
DWH = 1.6340647090887446           # 2*(y-t)*W_y*(1-h1^2)*x


def _loss(model, window, target):
    return mse_loss(forward_sequence(model, window).prediction, target)


def _numeric_grads(model, window, target, names, eps=1e-6, max_entries=40):
    """Central differences over (a sample of) each tensor's entries."""
    out = {}
    tensors = model.tensors()
    for name in names:
        arr = tensors[name]
        flat = arr.reshape(-1)
        grad = np.zeros_like(flat)
        idx = range(flat.size) if flat.size <= max_entries else \
            np.linspace(0, flat.size - 1, max_entries, dtype=int)
        for k in idx:
            keep = flat[k]
            flat[k] = keep + eps
            up = _loss(model, window, target)
            flat[k] = keep - eps
            down = _loss(model, window, target)
            flat[k] = keep
            grad[k] = (up - down) / (2 * eps)
        out[name] = grad.reshape(arr.shape)
    return out


def _compare(analytic, numeric, checked_only=True):
    worst = 0.0
    for name, num in numeric.items():
        ana = analytic[name]
        mask = num != 0 if checked_only else np.ones_like(num, bool)
        denom = np.maximum(np.maximum(np.abs(ana), np.abs(num)), 1e-8)
        rel = np.abs(ana - num) / denom
        if mask.any():
            worst = max(worst, float(rel[num != 0].max()))
    return worst


class TestHandGradients:
    def test_one_step_elman(self):
        model = build_model("elman", 1, 1, 1, seed=0)
        t = model.tensors()
        t["W_h"][...] = 0.5
        t["U_h"][...] = 0.25
        t["b_h"][...] = 0.1
        t["W_y"][...] = 2.0
        t["b_y"][...] = -0.3
        model.bump_version()
        window = np.array([[1.0]])
        result = forward_sequence(model, window)
        assert abs(result.prediction[0] - Y1) < 1e-14
        grads = backward(model, result.cache, np.array([0.2]))
        assert abs(grads["W_y"][0, 0] - DWY) < 1e-13
        assert abs(grads["b_y"][0] - DBY) < 1e-13
        assert abs(grads["W_h"][0, 0] - DWH) < 1e-13
        assert abs(grads["b_h"][0] - DWH) < 1e-13   # x was 1, so dW_h == db_h
        assert grads["U_h"][0, 0] == 0.0            # h0 is zero

    def test_perfect_prediction_gives_zero_grads(self):
        model = build_model("lstm", 2, 2, 3, seed=1)
        window = np.random.default_rng(0).uniform(0, 1, (4, 2))
        result = forward_sequence(model, window)
        grads = backward(model, result.cache, result.prediction.copy())
        assert all(np.abs(g).max() < 1e-15 for g in grads.values())


class TestAgainstFiniteDifferences:
    def _run(self, kind, hidden, seed, batch=None, eps=1e-6, tol=1e-6):
        rng = np.random.default_rng(seed)
        model = build_model(kind, 2, 2, hidden, seed=seed)
        shape = (6, 2) if batch is None else (batch, 6, 2)
        window = rng.uniform(0, 1, shape)
        target = rng.uniform(0, 1, (2,) if batch is None else (batch, 2))
        result = forward_sequence(model, window)
        analytic = backward(model, result.cache, target)
        assert set(analytic) == set(model.tensors())
        numeric = _numeric_grads(model, window, target, list(analytic), eps=eps)
        assert _compare(analytic, numeric) < tol

    def test_elman(self):
        self._run("elman", 5, seed=2)

    def test_elman_batched(self):
        self._run("elman", 4, seed=3, batch=3)

    def test_lstm_single(self):
        self._run("lstm", 4, seed=4)

    def test_lstm_stacked(self):
        # deep-layer recurrent gradients sit near 1e-6, where the difference
        # quotient is roundoff-limited; a larger step keeps the oracle honest
        self._run("lstm", [4, 3], seed=5, eps=1e-4, tol=1e-6)

    def test_lstm_stacked_batched(self):
        self._run("lstm", [3, 3], seed=6, batch=2, eps=1e-4, tol=1e-6)

    def test_gradients_flow_through_initial_state(self):
        # carried-in states are constants; gradients w.r.t. parameters must
        # still match numerics when the pass starts from a nonzero state
        model = build_model("lstm", 2, 2, 3, seed=7)
        rng = np.random.default_rng(7)
        warm = forward_sequence(model, rng.uniform(0, 1, (4, 2)))
        states = warm.final_states
        window = rng.uniform(0, 1, (5, 2))
        target = rng.uniform(0, 1, 2)

        def loss():
            return mse_loss(
                forward_sequence(model, window, initial_states=states).prediction,
                target)

        result = forward_sequence(model, window, initial_states=states)
        analytic = backward(model, result.cache, target)
        name = "layers.0.U_f"
        arr = model.tensors()[name]
        eps = 1e-6
        num = np.zeros_like(arr)
        for k in range(arr.size):
            keep = arr.reshape(-1)[k]
            arr.reshape(-1)[k] = keep + eps
            up = loss()
            arr.reshape(-1)[k] = keep - eps
            down = loss()
            arr.reshape(-1)[k] = keep
            num.reshape(-1)[k] = (up - down) / (2 * eps)
        denom = np.maximum(np.maximum(np.abs(analytic[name]), np.abs(num)), 1e-8)
        assert (np.abs(analytic[name] - num) / denom).max() < 1e-6


class TestGradCheckTool:
    def test_passes_on_clean_model(self):
        model = build_model("lstm", 3, 3, 4, seed=0)
        rng = np.random.default_rng(0)
        report = grad_check(model, rng.uniform(0, 1, (15, 3)), rng.uniform(0, 1, 3))
        assert isinstance(report, GradCheckReport)
        assert report.passed()
        assert report.max_discrepancy < 1e-4

    def test_catches_a_planted_bug(self):
        # corrupting one analytic gradient must push the discrepancy to ~2
        # (sign flip makes |a - n| == 2|n| with max(|a|,|n|) == |n|)
        model = build_model("elman", 2, 2, 3, seed=1)
        rng = np.random.default_rng(1)
        window = rng.uniform(0, 1, (6, 2))
        target = rng.uniform(0, 1, 2)
        real_backward = model.backward

        def lying_backward(cache, t):
            grads = real_backward(cache, t)
            grads["W_y"] = -grads["W_y"]
            return grads

        model.backward = lying_backward
        try:
            report = grad_check(model, window, target)
        finally:
            model.backward = real_backward
        assert not report.passed()
        assert report.worst_tensor == "W_y"
        assert report.max_discrepancy > 1.0

    def test_deterministic(self):
        model = build_model("lstm", 2, 2, 3, seed=2)
        rng = np.random.default_rng(5)
        w = rng.uniform(0, 1, (8, 2))
        t = rng.uniform(0, 1, 2)
        a = grad_check(model, w, t)
        b = grad_check(model, w, t)
        assert a.max_discrepancy == b.max_discrepancy

    def test_perturbations_are_restored(self):
        model = build_model("lstm", 2, 2, 3, seed=3)
        before = {k: v.copy() for k, v in model.tensors().items()}
        rng = np.random.default_rng(6)
        grad_check(model, rng.uniform(0, 1, (6, 2)), rng.uniform(0, 1, 2))
        after = model.tensors()
        assert all((before[k] == after[k]).all() for k in before)

    def test_bad_epsilon(self):
        model = build_model("elman", 1, 1, 2, seed=0)
        with pytest.raises(DomainError):
            grad_check(model, np.ones((3, 1)), np.ones(1), epsilon=0.0)

    def test_report_text_mentions_every_tensor(self):
        model = build_model("elman", 2, 2, 3, seed=4)
        rng = np.random.default_rng(2)
        report = grad_check(model, rng.uniform(0, 1, (5, 2)), rng.uniform(0, 1, 2))
        text = report.to_text()
        for name in model.tensors():
            assert name in text


class TestStaleCache:
    def test_backward_rejects_outdated_cache(self):
        model = build_model("elman", 2, 2, 3, seed=0)
        result = forward_sequence(model, np.ones((4, 2)) * 0.5)
        model.tensors()["W_y"][...] += 0.1
        model.bump_version()
        with pytest.raises(UsageError):
            backward(model, result.cache, np.zeros(2))
