"""Sequence regression models built on the recurrent cells.

Both model families share one calling convention:

* ``forward(window, initial_states=None) -> ForwardResult``
* ``backward(cache, target) -> dict`` of gradients keyed like ``tensors()``
* ``tensors() -> dict`` of live views of every trainable array

Windows are (steps, features) for a single sample or (batch, steps,
features) for a batch; predictions mirror the input arity. Gradients are
exact for the mean squared error over the whole prediction array, the same
quantity :func:`mse_loss` computes, so optimization and gradient checking
agree on the objective. Forward never mutates the model; caches are tied to
a parameter version and go stale once an optimizer step runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DomainError, UsageError
from .cells import (
    DenseParams,
    ElmanParams,
    LstmParams,
    LstmState,
    activation_derivative,
    apply_activation,
    init_dense,
    init_elman,
    init_lstm,
    logistic,
)

ELMAN = "elman"
LSTM = "lstm"


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    hidden_units: int
    returns_sequence: bool

    def __post_init__(self):
        if self.kind != LSTM:
            raise DomainError(f"unsupported layer kind {self.kind!r}")
        if self.hidden_units < 1:
            raise DomainError("hidden_units must be at least 1")


@dataclass(frozen=True)
class StackedSpec:
    """Shape of an LSTM stack: every layer but the last feeds its full
    hidden sequence upward; the last layer's final step feeds a linear head."""

    input_dim: int
    output_dim: int
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if min(self.input_dim, self.output_dim) < 1:
            raise DomainError("all layer sizes must be at least 1")
        if not self.layers:
            raise DomainError("a stack needs at least one layer")
        for spec in self.layers[:-1]:
            if not spec.returns_sequence:
                raise DomainError("inner layers must return sequences")
        if self.layers[-1].returns_sequence:
            raise DomainError("the last layer must return a single step")

    @classmethod
    def from_hidden(cls, hidden_units: Sequence[int], input_dim: int,
                    output_dim: int) -> "StackedSpec":
        units = list(hidden_units)
        if not units:
            raise DomainError("a stack needs at least one layer")
        layers = tuple(
            LayerSpec(LSTM, h, returns_sequence=(k < len(units) - 1))
            for k, h in enumerate(units)
        )
        return cls(input_dim=input_dim, output_dim=output_dim, layers=layers)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "layers": [
                {"kind": s.kind, "hidden_units": s.hidden_units,
                 "returns_sequence": s.returns_sequence}
                for s in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StackedSpec":
        layers = tuple(
            LayerSpec(d["kind"], int(d["hidden_units"]), bool(d["returns_sequence"]))
            for d in data["layers"]
        )
        return cls(input_dim=int(data["input_dim"]),
                   output_dim=int(data["output_dim"]), layers=layers)


@dataclass
class ForwardResult:
    prediction: np.ndarray
    cache: object
    final_states: object


def mse_loss(prediction, target) -> float:
    p = np.asarray(prediction, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise DomainError(f"prediction shape {p.shape} does not match target {t.shape}")
    # a diverged model may overflow the square; the training loop treats the
    # resulting inf as a divergence signal, so no warning is wanted here
    with np.errstate(over="ignore"):
        return float(np.mean((p - t) ** 2))


def _as_batch(window, input_dim: int):
    w = np.asarray(window, dtype=np.float64)
    if w.ndim == 2:
        return w[None], True
    if w.ndim != 3:
        raise DomainError("window must be (steps, features) or (batch, steps, features)")
    if w.shape[1] < 1:
        raise DomainError("window must contain at least one step")
    if w.shape[2] != input_dim:
        raise DomainError(f"window feature dim {w.shape[2]} != model input dim {input_dim}")
    return w, False


def _promote_state(arr, batch: int, hidden: int, name: str) -> np.ndarray:
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 1:
        if a.shape != (hidden,):
            raise DomainError(f"{name}: expected length {hidden}, got {a.shape}")
        return np.broadcast_to(a, (batch, hidden)).copy()
    if a.shape != (batch, hidden):
        raise DomainError(f"{name}: expected shape {(batch, hidden)}, got {a.shape}")
    return a.copy()


def copy_states(states):
    """Deep-copy whatever ``forward`` returned as final states."""
    if states is None:
        return None
    if isinstance(states, np.ndarray):
        return states.copy()
    return [s.copy() for s in states]


@dataclass
class _ElmanTape:
    window: np.ndarray   # (B, T, D)
    h0: np.ndarray       # (B, H)
    H: np.ndarray        # (B, T, H)
    y: np.ndarray        # (B, out), post-activation
    squeeze: bool
    version: int


class ElmanNetwork:
    """Single-hidden-layer recurrent network with a per-step output map;
    only the final step's output is the window prediction."""

    kind = ELMAN

    def __init__(self, params: ElmanParams):
        self.params = params
        self.param_version = 0

    @classmethod
    def create(cls, input_dim: int, hidden_units: int, output_dim: int,
               seed: int = 0) -> "ElmanNetwork":
        rng = np.random.default_rng(seed)
        return cls(init_elman(input_dim, hidden_units, output_dim, rng))

    @property
    def input_dim(self) -> int:
        return self.params.input_dim

    @property
    def output_dim(self) -> int:
        return self.params.output_dim

    def spec_dict(self) -> dict:
        return {
            "input_dim": self.params.input_dim,
            "hidden_units": self.params.hidden_units,
            "output_dim": self.params.output_dim,
        }

    def tensors(self) -> dict[str, np.ndarray]:
        p = self.params
        return {"W_h": p.W_h, "U_h": p.U_h, "b_h": p.b_h,
                "W_y": p.W_y, "b_y": p.b_y}

    def bump_version(self):
        self.param_version += 1

    def forward(self, window, initial_states=None) -> ForwardResult:
        p = self.params
        w, squeeze = _as_batch(window, p.input_dim)
        B, T, _ = w.shape
        H = p.hidden_units
        if initial_states is None:
            h = np.zeros((B, H))
        else:
            h = _promote_state(initial_states, B, H, "initial hidden state")
        h0 = h
        hs = np.empty((B, T, H))
        # Input projections for every step at once; the loop only carries h.
        xz = w @ p.W_h.T + p.b_h
        for t in range(T):
            h = apply_activation(p.sigma_h, xz[:, t] + h @ p.U_h.T)
            hs[:, t] = h
        y = apply_activation(p.sigma_y, h @ p.W_y.T + p.b_y)
        tape = _ElmanTape(window=w, h0=h0, H=hs, y=y, squeeze=squeeze,
                          version=self.param_version)
        prediction = y[0] if squeeze else y
        final = h[0].copy() if squeeze else h.copy()
        return ForwardResult(prediction=prediction, cache=tape, final_states=final)

    def backward(self, cache: _ElmanTape, target) -> dict[str, np.ndarray]:
        if cache.version != self.param_version:
            raise UsageError("cache is stale: parameters changed since forward")
        p = self.params
        y = cache.y
        t_arr = np.asarray(target, dtype=np.float64)
        if cache.squeeze and t_arr.ndim == y.ndim - 1:
            t_arr = t_arr[None]
        if t_arr.shape != y.shape:
            raise DomainError(f"target shape {t_arr.shape} does not match prediction {y.shape}")

        dy = (2.0 / y.size) * (y - t_arr)
        dz_y = dy * activation_derivative(p.sigma_y, y)
        h_last = cache.H[:, -1]
        grads = {
            "W_y": dz_y.T @ h_last,
            "b_y": dz_y.sum(axis=0),
            "W_h": np.zeros_like(p.W_h),
            "U_h": np.zeros_like(p.U_h),
            "b_h": np.zeros_like(p.b_h),
        }
        dh = dz_y @ p.W_y
        T = cache.H.shape[1]
        for t in range(T - 1, -1, -1):
            h_t = cache.H[:, t]
            h_prev = cache.H[:, t - 1] if t > 0 else cache.h0
            dzh = dh * activation_derivative(p.sigma_h, h_t)
            grads["W_h"] += dzh.T @ cache.window[:, t]
            grads["U_h"] += dzh.T @ h_prev
            grads["b_h"] += dzh.sum(axis=0)
            dh = dzh @ p.U_h
        return grads


@dataclass
class _LayerTape:
    X: np.ndarray    # layer input sequence (B, T, Din)
    F: np.ndarray
    I: np.ndarray
    O: np.ndarray
    G: np.ndarray
    C: np.ndarray
    TC: np.ndarray   # tanh(C)
    H: np.ndarray
    c0: np.ndarray
    h0: np.ndarray


@dataclass
class _StackTape:
    layers: list
    y: np.ndarray
    squeeze: bool
    version: int


class LstmStack:
    """One or more LSTM layers followed by a linear head on the final step."""

    kind = LSTM

    def __init__(self, spec: StackedSpec, layers: list[LstmParams], dense: DenseParams):
        if len(layers) != len(spec.layers):
            raise DomainError("parameter count does not match the layer specs")
        for params, layer_spec in zip(layers, spec.layers):
            if params.hidden_units != layer_spec.hidden_units:
                raise DomainError("layer widths do not match the spec")
        self.spec = spec
        self.layers = layers
        self.dense = dense
        self.param_version = 0

    @classmethod
    def create(cls, spec: StackedSpec, seed: int = 0) -> "LstmStack":
        rng = np.random.default_rng(seed)
        layers = []
        width = spec.input_dim
        for layer_spec in spec.layers:
            layers.append(init_lstm(width, layer_spec.hidden_units, rng))
            width = layer_spec.hidden_units
        dense = init_dense(width, spec.output_dim, rng)
        return cls(spec, layers, dense)

    @property
    def input_dim(self) -> int:
        return self.spec.input_dim

    @property
    def output_dim(self) -> int:
        return self.spec.output_dim

    def spec_dict(self) -> dict:
        return self.spec.to_dict()

    def tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for k, params in enumerate(self.layers):
            for name in ("W_f", "U_f", "b_f", "W_i", "U_i", "b_i",
                         "W_o", "U_o", "b_o", "W_c", "U_c", "b_c"):
                out[f"layers.{k}.{name}"] = getattr(params, name)
        out["dense.W"] = self.dense.W
        out["dense.b"] = self.dense.b
        return out

    def bump_version(self):
        self.param_version += 1

    def zero_states(self, batch: int | None = None) -> list[LstmState]:
        return [LstmState.zeros(s.hidden_units, batch) for s in self.spec.layers]

    def forward(self, window, initial_states=None) -> ForwardResult:
        w, squeeze = _as_batch(window, self.spec.input_dim)
        B, T, _ = w.shape
        if initial_states is None:
            states = [(np.zeros((B, s.hidden_units)), np.zeros((B, s.hidden_units)))
                      for s in self.spec.layers]
        else:
            if len(initial_states) != len(self.layers):
                raise DomainError("one initial state per layer is required")
            states = []
            for k, st in enumerate(initial_states):
                hidden = self.spec.layers[k].hidden_units
                states.append((
                    _promote_state(st.c, B, hidden, f"layer {k} cell state"),
                    _promote_state(st.h, B, hidden, f"layer {k} hidden state"),
                ))

        tapes = []
        final_states = []
        X = w
        for k, p in enumerate(self.layers):
            H = p.hidden_units
            F = np.empty((B, T, H))
            I = np.empty((B, T, H))
            O = np.empty((B, T, H))
            G = np.empty((B, T, H))
            C = np.empty((B, T, H))
            TC = np.empty((B, T, H))
            Hs = np.empty((B, T, H))
            c0, h0 = states[k]
            # One big input projection per gate; the time loop adds only
            # the recurrent term.
            xf = X @ p.W_f.T + p.b_f
            xi = X @ p.W_i.T + p.b_i
            xo = X @ p.W_o.T + p.b_o
            xc = X @ p.W_c.T + p.b_c
            c, h = c0, h0
            for t in range(T):
                f = logistic(xf[:, t] + h @ p.U_f.T)
                i = logistic(xi[:, t] + h @ p.U_i.T)
                o = logistic(xo[:, t] + h @ p.U_o.T)
                g = np.tanh(xc[:, t] + h @ p.U_c.T)
                c = f * c + i * g
                tc = np.tanh(c)
                h = o * tc
                F[:, t], I[:, t], O[:, t], G[:, t] = f, i, o, g
                C[:, t], TC[:, t], Hs[:, t] = c, tc, h
            tapes.append(_LayerTape(X=X, F=F, I=I, O=O, G=G, C=C, TC=TC,
                                    H=Hs, c0=c0, h0=h0))
            final_states.append(LstmState(c.copy(), h.copy()))
            X = Hs

        y = X[:, -1] @ self.dense.W.T + self.dense.b
        tape = _StackTape(layers=tapes, y=y, squeeze=squeeze,
                          version=self.param_version)
        if squeeze:
            prediction = y[0]
            final_states = [LstmState(s.c[0].copy(), s.h[0].copy())
                            for s in final_states]
        else:
            prediction = y
        return ForwardResult(prediction=prediction, cache=tape,
                             final_states=final_states)

    def backward(self, cache: _StackTape, target) -> dict[str, np.ndarray]:
        if cache.version != self.param_version:
            raise UsageError("cache is stale: parameters changed since forward")
        y = cache.y
        t_arr = np.asarray(target, dtype=np.float64)
        if cache.squeeze and t_arr.ndim == y.ndim - 1:
            t_arr = t_arr[None]
        if t_arr.shape != y.shape:
            raise DomainError(f"target shape {t_arr.shape} does not match prediction {y.shape}")

        dy = (2.0 / y.size) * (y - t_arr)
        top = cache.layers[-1]
        grads = {
            "dense.W": dy.T @ top.H[:, -1],
            "dense.b": dy.sum(axis=0),
        }
        B, T, H_top = top.H.shape
        dH = np.zeros((B, T, H_top))
        dH[:, -1] = dy @ self.dense.W
        for k in range(len(self.layers) - 1, -1, -1):
            layer_grads, dX = _lstm_layer_backward(self.layers[k], cache.layers[k], dH)
            for name, g in layer_grads.items():
                grads[f"layers.{k}.{name}"] = g
            dH = dX
        return grads


def _lstm_layer_backward(p: LstmParams, tape: _LayerTape, dH_ext: np.ndarray):
    """Backprop one LSTM layer. ``dH_ext`` holds the loss gradient w.r.t.
    every step's hidden output; returns (parameter grads, gradient w.r.t.
    the layer's input sequence). Initial states are treated as constants."""
    B, T, H = tape.F.shape
    grads = {name: np.zeros_like(getattr(p, name))
             for name in ("W_f", "U_f", "b_f", "W_i", "U_i", "b_i",
                          "W_o", "U_o", "b_o", "W_c", "U_c", "b_c")}
    dX = np.zeros_like(tape.X)
    dh_carry = np.zeros((B, H))
    dc_carry = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        f, i, o, g = tape.F[:, t], tape.I[:, t], tape.O[:, t], tape.G[:, t]
        tc = tape.TC[:, t]
        c_prev = tape.C[:, t - 1] if t > 0 else tape.c0
        h_prev = tape.H[:, t - 1] if t > 0 else tape.h0
        x_t = tape.X[:, t]

        dh = dH_ext[:, t] + dh_carry
        do = dh * tc
        dc = dc_carry + dh * o * (1.0 - tc * tc)
        df = dc * c_prev
        di = dc * g
        dg = dc * i
        dc_carry = dc * f

        dzf = df * f * (1.0 - f)
        dzi = di * i * (1.0 - i)
        dzo = do * o * (1.0 - o)
        dzg = dg * (1.0 - g * g)

        grads["W_f"] += dzf.T @ x_t
        grads["U_f"] += dzf.T @ h_prev
        grads["b_f"] += dzf.sum(axis=0)
        grads["W_i"] += dzi.T @ x_t
        grads["U_i"] += dzi.T @ h_prev
        grads["b_i"] += dzi.sum(axis=0)
        grads["W_o"] += dzo.T @ x_t
        grads["U_o"] += dzo.T @ h_prev
        grads["b_o"] += dzo.sum(axis=0)
        grads["W_c"] += dzg.T @ x_t
        grads["U_c"] += dzg.T @ h_prev
        grads["b_c"] += dzg.sum(axis=0)

        dX[:, t] = dzf @ p.W_f + dzi @ p.W_i + dzo @ p.W_o + dzg @ p.W_c
        dh_carry = dzf @ p.U_f + dzi @ p.U_i + dzo @ p.U_o + dzg @ p.U_c
    return grads, dX


def forward_sequence(model, window, initial_states=None) -> ForwardResult:
    """Run a model over a window; function form of ``model.forward``."""
    return model.forward(window, initial_states)


def backward(model, cache, target) -> dict:
    """Gradients of the MSE for a cached forward pass; function form of
    ``model.backward``."""
    return model.backward(cache, target)


def build_model(kind: str, input_dim: int, output_dim: int,
                hidden_units, seed: int = 0):
    """Construct a freshly initialized model.

    ``hidden_units`` is an int (or single-item sequence) for ``elman`` and a
    sequence of layer widths for ``lstm``.
    """
    if kind == ELMAN:
        if isinstance(hidden_units, (list, tuple)):
            if len(hidden_units) != 1:
                raise DomainError("the simple recurrent model takes one hidden width")
            hidden_units = hidden_units[0]
        return ElmanNetwork.create(input_dim, int(hidden_units), output_dim, seed)
    if kind == LSTM:
        if isinstance(hidden_units, int):
            hidden_units = [hidden_units]
        spec = StackedSpec.from_hidden(hidden_units, input_dim, output_dim)
        return LstmStack.create(spec, seed)
    raise DomainError(f"unknown model kind {kind!r}")
