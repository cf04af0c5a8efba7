"""Recurrent cells: parameter containers, single-step math, initialization.

Matrices follow the hidden x input orientation, so a step computes
``x @ W.T + h_prev @ U.T + b`` and accepts either a single vector or a batch
with a leading batch axis. Everything is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError

LOGISTIC = "logistic"
TANH = "tanh"
IDENTITY = "identity"


def logistic(x: np.ndarray) -> np.ndarray:
    # exp only ever sees non-positive arguments, so large |x| cannot overflow
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


_ACTIVATIONS = {
    LOGISTIC: logistic,
    TANH: np.tanh,
    IDENTITY: lambda x: x,
}

# Derivative expressed through the activation output y.
_DERIVATIVES = {
    LOGISTIC: lambda y: y * (1.0 - y),
    TANH: lambda y: 1.0 - y * y,
    IDENTITY: lambda y: np.ones_like(y),
}


def apply_activation(kind: str, x: np.ndarray) -> np.ndarray:
    try:
        return _ACTIVATIONS[kind](x)
    except KeyError:
        raise DomainError(f"unknown activation {kind!r}") from None


def activation_derivative(kind: str, y: np.ndarray) -> np.ndarray:
    return _DERIVATIVES[kind](y)


def _check_dims(name: str, got: int, want: int):
    if got != want:
        raise DomainError(f"{name}: dimension mismatch (got {got}, expected {want})")


@dataclass
class ElmanParams:
    """Weights of the single-hidden-layer recurrent regression network."""

    W_h: np.ndarray  # (hidden, input)
    U_h: np.ndarray  # (hidden, hidden)
    b_h: np.ndarray  # (hidden,)
    W_y: np.ndarray  # (output, hidden)
    b_y: np.ndarray  # (output,)
    sigma_h: str = TANH
    sigma_y: str = IDENTITY

    def __post_init__(self):
        h, d = self.W_h.shape
        if self.U_h.shape != (h, h) or self.b_h.shape != (h,):
            raise DomainError("Elman hidden parameter shapes are inconsistent")
        if self.W_y.shape[1] != h or self.b_y.shape != (self.W_y.shape[0],):
            raise DomainError("Elman output parameter shapes are inconsistent")
        for kind in (self.sigma_h, self.sigma_y):
            if kind not in _ACTIVATIONS:
                raise DomainError(f"unknown activation {kind!r}")

    @property
    def hidden_units(self) -> int:
        return self.W_h.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_h.shape[1]

    @property
    def output_dim(self) -> int:
        return self.W_y.shape[0]


def elman_step(params: ElmanParams, x: np.ndarray, h_prev: np.ndarray
               ) -> tuple[np.ndarray, np.ndarray]:
    """One recurrence step: new hidden state and the step output.

    ``h = sigma_h(W_h x + U_h h_prev + b_h)``;
    ``y = sigma_y(W_y h + b_y)``.
    """
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    _check_dims("x", x.shape[-1], params.input_dim)
    _check_dims("h_prev", h_prev.shape[-1], params.hidden_units)
    h = apply_activation(params.sigma_h,
                         x @ params.W_h.T + h_prev @ params.U_h.T + params.b_h)
    y = apply_activation(params.sigma_y, h @ params.W_y.T + params.b_y)
    return h, y


@dataclass
class LstmParams:
    """Per-gate weights of one LSTM layer.

    Gate activations are the original choices (logistic gates, tanh candidate
    and output squashing); the fields exist so checkpoints record them, and
    other values are rejected.
    """

    W_f: np.ndarray
    U_f: np.ndarray
    b_f: np.ndarray
    W_i: np.ndarray
    U_i: np.ndarray
    b_i: np.ndarray
    W_o: np.ndarray
    U_o: np.ndarray
    b_o: np.ndarray
    W_c: np.ndarray
    U_c: np.ndarray
    b_c: np.ndarray
    sigma_g: str = LOGISTIC
    sigma_c: str = TANH
    sigma_h: str = TANH

    def __post_init__(self):
        h, d = self.W_f.shape
        for name in ("f", "i", "o", "c"):
            if getattr(self, f"W_{name}").shape != (h, d):
                raise DomainError(f"W_{name} shape differs across gates")
            if getattr(self, f"U_{name}").shape != (h, h):
                raise DomainError(f"U_{name} shape is not hidden x hidden")
            if getattr(self, f"b_{name}").shape != (h,):
                raise DomainError(f"b_{name} length is not the hidden size")
        if (self.sigma_g, self.sigma_c, self.sigma_h) != (LOGISTIC, TANH, TANH):
            raise DomainError("LSTM activations are fixed to logistic gates and tanh")

    @property
    def hidden_units(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_f.shape[1]


@dataclass
class LstmState:
    """Cell and hidden vectors; leading batch axis optional."""

    c: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        if self.c.shape != self.h.shape:
            raise DomainError("cell and hidden state shapes differ")

    @classmethod
    def zeros(cls, hidden_units: int, batch: int | None = None) -> "LstmState":
        shape = (hidden_units,) if batch is None else (batch, hidden_units)
        return cls(np.zeros(shape), np.zeros(shape))

    def copy(self) -> "LstmState":
        return LstmState(self.c.copy(), self.h.copy())


def lstm_step(params: LstmParams, x: np.ndarray, state: LstmState) -> LstmState:
    """One LSTM step; the returned state's ``h`` is the step output.

    Gates gate elementwise: ``c = f o c_prev + i o tanh(W_c x + U_c h_prev + b_c)``
    and ``h = o o tanh(c)``.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_dims("x", x.shape[-1], params.input_dim)
    _check_dims("state", state.h.shape[-1], params.hidden_units)
    h_prev, c_prev = state.h, state.c
    f = logistic(x @ params.W_f.T + h_prev @ params.U_f.T + params.b_f)
    i = logistic(x @ params.W_i.T + h_prev @ params.U_i.T + params.b_i)
    o = logistic(x @ params.W_o.T + h_prev @ params.U_o.T + params.b_o)
    g = np.tanh(x @ params.W_c.T + h_prev @ params.U_c.T + params.b_c)
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return LstmState(c, h)


@dataclass
class DenseParams:
    """Linear output head mapping the last hidden state to the prediction."""

    W: np.ndarray  # (output, hidden)
    b: np.ndarray  # (output,)

    def __post_init__(self):
        if self.b.shape != (self.W.shape[0],):
            raise DomainError("dense bias length does not match the weight rows")


def _uniform_fan_in(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    s = 1.0 / np.sqrt(cols)
    return rng.uniform(-s, s, size=(rows, cols))


def init_elman(input_dim: int, hidden_units: int, output_dim: int,
               rng: np.random.Generator) -> ElmanParams:
    if min(input_dim, hidden_units, output_dim) < 1:
        raise DomainError("all layer sizes must be at least 1")
    return ElmanParams(
        W_h=_uniform_fan_in(rng, hidden_units, input_dim),
        U_h=_uniform_fan_in(rng, hidden_units, hidden_units),
        b_h=np.zeros(hidden_units),
        W_y=_uniform_fan_in(rng, output_dim, hidden_units),
        b_y=np.zeros(output_dim),
    )


def init_lstm(input_dim: int, hidden_units: int, rng: np.random.Generator) -> LstmParams:
    """Fan-in uniform weights; biases zero except the forget gate, which
    starts at 1 so early training retains memory."""
    if min(input_dim, hidden_units) < 1:
        raise DomainError("all layer sizes must be at least 1")
    blocks = {}
    for name in ("f", "i", "o", "c"):
        blocks[f"W_{name}"] = _uniform_fan_in(rng, hidden_units, input_dim)
        blocks[f"U_{name}"] = _uniform_fan_in(rng, hidden_units, hidden_units)
        blocks[f"b_{name}"] = np.zeros(hidden_units)
    blocks["b_f"] = np.ones(hidden_units)
    return LstmParams(**blocks)


def init_dense(hidden_units: int, output_dim: int, rng: np.random.Generator) -> DenseParams:
    if min(hidden_units, output_dim) < 1:
        raise DomainError("all layer sizes must be at least 1")
    return DenseParams(W=_uniform_fan_in(rng, output_dim, hidden_units),
                       b=np.zeros(output_dim))
