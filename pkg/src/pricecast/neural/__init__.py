"""Recurrent networks implemented directly on numpy.

Cells hold the single-step math, models assemble them into window-to-value
regressors with exact backpropagation through time, and the surrounding
modules supply gradient checking, SGD, and JSON checkpoints.
"""

from .cells import (
    DenseParams,
    ElmanParams,
    LstmParams,
    LstmState,
    elman_step,
    init_dense,
    init_elman,
    init_lstm,
    logistic,
    lstm_step,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import DEFAULT_TOLERANCE, GradCheckReport, TensorCheck, grad_check
from .models import (
    ELMAN,
    LSTM,
    ElmanNetwork,
    ForwardResult,
    LayerSpec,
    LstmStack,
    StackedSpec,
    backward,
    build_model,
    copy_states,
    forward_sequence,
    mse_loss,
)
from .optim import SgdConfig, global_grad_norm, optimizer_step

__all__ = [
    "DEFAULT_TOLERANCE",
    "DenseParams",
    "ELMAN",
    "ElmanNetwork",
    "ElmanParams",
    "ForwardResult",
    "GradCheckReport",
    "LSTM",
    "LayerSpec",
    "LstmParams",
    "LstmStack",
    "LstmState",
    "SgdConfig",
    "StackedSpec",
    "TensorCheck",
    "backward",
    "build_model",
    "copy_states",
    "elman_step",
    "forward_sequence",
    "global_grad_norm",
    "grad_check",
    "init_dense",
    "init_elman",
    "init_lstm",
    "load_checkpoint",
    "logistic",
    "lstm_step",
    "mse_loss",
    "optimizer_step",
    "save_checkpoint",
]
