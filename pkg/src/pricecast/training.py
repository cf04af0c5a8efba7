"""Training loops, the metrics log, and rolling multi-step prediction.

Two regimes share the metrics/result plumbing:

* stateless: every window is an independent sample; batches are drawn
  uniformly at random with replacement (or from reshuffled epochs when
  ``shuffle_epochs`` is set) and start from zero recurrent state.
* stateful: fixed lanes advance chronologically, the final recurrent states
  of each step's forward pass seed the next step, and states reset only at
  epoch boundaries. Validation replays the lanes from zero states and lets
  the held-out tail continue from the training-region states, so the test
  windows see realistic memory.

A metrics record is (step, MSE of the step's training batch before the
update, validation MSE after it). A non-finite loss or gradient raises
ConvergenceError with the metrics recorded so far attached as ``partial``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, FormatError, NumericError, UsageError
from .neural.models import copy_states, mse_loss
from .neural.optim import SgdConfig, optimizer_step
from .seriesprep import (
    NormalizationParams,
    StatefulBatchLayout,
    WindowedDataset,
    apply_normalization,
    denormalize,
)

STATELESS = "stateless"
STATEFUL = "stateful"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    total_steps: int
    batch_size: int = 32
    eval_every: int = 100
    seed: int = 0
    mode: str = STATELESS
    clip_threshold: float | None = None
    shuffle_epochs: bool = False  # stateless only: epoch reshuffles instead of resampling

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise DomainError("learning rate must be positive")
        if self.total_steps < 1:
            raise DomainError("total_steps must be at least 1")
        if self.batch_size < 1:
            raise DomainError("batch_size must be at least 1")
        if self.eval_every < 1:
            raise DomainError("eval_every must be at least 1")
        if self.mode not in (STATELESS, STATEFUL):
            raise DomainError(f"unknown training mode {self.mode!r}")

    def sgd(self) -> SgdConfig:
        return SgdConfig(self.learning_rate, self.clip_threshold)


@dataclass(frozen=True)
class MetricsRow:
    step: int
    train_mse: float
    val_mse: float


METRICS_HEADER = ("step", "train_mse", "val_mse")


@dataclass
class MetricsLog:
    rows: list = field(default_factory=list)

    def record(self, step: int, train_mse: float, val_mse: float):
        self.rows.append(MetricsRow(int(step), float(train_mse), float(val_mse)))

    def best(self) -> MetricsRow:
        if not self.rows:
            raise UsageError("metrics log is empty")
        return min(self.rows, key=lambda r: r.val_mse)

    def final(self) -> MetricsRow:
        if not self.rows:
            raise UsageError("metrics log is empty")
        return self.rows[-1]

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(METRICS_HEADER)
            for r in self.rows:
                writer.writerow([r.step, repr(r.train_mse), repr(r.val_mse)])

    @classmethod
    def read_csv(cls, path) -> "MetricsLog":
        log = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != METRICS_HEADER:
                raise FormatError(f"{path}: expected header {','.join(METRICS_HEADER)}")
            for line, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    log.record(int(row[0]), float(row[1]), float(row[2]))
                except (ValueError, IndexError):
                    raise FormatError(f"{path}: bad metrics row at line {line}") from None
        return log


@dataclass
class TrainResult:
    model: object
    metrics: MetricsLog
    best_step: int
    best_val_mse: float
    best_tensors: dict

    def restore_best(self):
        """Copy the best-validation snapshot back into the live model."""
        for name, arr in self.model.tensors().items():
            arr[...] = self.best_tensors[name]
        self.model.bump_version()


def evaluate(model, inputs, targets) -> float:
    """Mean MSE over the samples via one batched forward pass from zero
    states; never mutates the model."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 3 or inputs.shape[0] == 0:
        raise DomainError("evaluate needs a non-empty (samples, window, features) array")
    return mse_loss(model.forward(inputs).prediction, targets)


def _snapshot(model) -> dict:
    return {name: arr.copy() for name, arr in model.tensors().items()}


class _BestTracker:
    def __init__(self):
        self.step = -1
        self.val_mse = np.inf
        self.tensors = None

    def consider(self, model, step: int, val_mse: float):
        if val_mse < self.val_mse:
            self.step = step
            self.val_mse = val_mse
            self.tensors = _snapshot(model)


def _check_finite(value: float, what: str, step: int, metrics: MetricsLog):
    if not np.isfinite(value):
        raise ConvergenceError(
            f"training diverged: {what} is not finite at step {step}; "
            f"reduce the learning rate or enable gradient clipping",
            partial=metrics,
        )


def _guarded_step(model, grads, sgd: SgdConfig, step: int, metrics: MetricsLog):
    try:
        optimizer_step(model, grads, sgd)
    except NumericError as exc:
        raise ConvergenceError(f"training diverged at step {step}: {exc}",
                               partial=metrics) from None


def _batch_indices(config: TrainConfig, n_train: int, rng: np.random.Generator):
    """Yield one index array per step, forever."""
    if config.shuffle_epochs:
        order = np.empty(0, dtype=np.int64)
        while True:
            if len(order) < config.batch_size:
                order = np.concatenate([order, rng.permutation(n_train)])
            yield order[: config.batch_size]
            order = order[config.batch_size:]
    else:
        while True:
            yield rng.integers(0, n_train, size=config.batch_size)


def train_stateless(model, dataset: WindowedDataset, config: TrainConfig) -> TrainResult:
    """SGD over independently sampled window batches."""
    if config.mode != STATELESS:
        raise UsageError(f"config mode is {config.mode!r}, expected {STATELESS!r}")
    if dataset.split is None:
        raise UsageError("dataset has no train/validation split; call split_dataset first")
    tr_in = dataset.inputs[dataset.split.train]
    tr_tg = dataset.targets[dataset.split.train]
    va_in = dataset.inputs[dataset.split.validation]
    va_tg = dataset.targets[dataset.split.validation]
    if len(va_in) == 0:
        raise UsageError("validation split is empty")

    rng = np.random.default_rng(config.seed)
    metrics = MetricsLog()
    best = _BestTracker()
    sgd = config.sgd()
    batches = _batch_indices(config, len(tr_in), rng)
    for step in range(1, config.total_steps + 1):
        idx = next(batches)
        target = tr_tg[idx]
        result = model.forward(tr_in[idx])
        batch_mse = mse_loss(result.prediction, target)
        _check_finite(batch_mse, "batch loss", step, metrics)
        grads = model.backward(result.cache, target)
        _guarded_step(model, grads, sgd, step, metrics)
        if step % config.eval_every == 0 or step == config.total_steps:
            val_mse = evaluate(model, va_in, va_tg)
            _check_finite(val_mse, "validation MSE", step, metrics)
            metrics.record(step, batch_mse, val_mse)
            best.consider(model, step, val_mse)
    return TrainResult(model, metrics, best.step, best.val_mse, best.tensors)


def stateful_sweep(model, layout: StatefulBatchLayout) -> tuple[float, float]:
    """Replay all lanes from zero states and score both regions.

    The held-out steps continue from the states reached at the end of the
    training region. Returns (train region MSE, held-out MSE)."""
    states = None
    sq_train = 0.0
    n_train = 0
    for s in range(layout.train_steps):
        result = model.forward(layout.inputs[:, s], states)
        states = result.final_states
        diff = result.prediction - layout.targets[:, s]
        sq_train += float(np.sum(diff * diff))
        n_train += diff.size
    sq_test = 0.0
    n_test = 0
    states = copy_states(states)
    for s in range(layout.train_steps, layout.steps_per_batch):
        result = model.forward(layout.inputs[:, s], states)
        states = result.final_states
        diff = result.prediction - layout.targets[:, s]
        sq_test += float(np.sum(diff * diff))
        n_test += diff.size
    if n_test == 0:
        raise UsageError("layout has no held-out steps")
    return sq_train / n_train, sq_test / n_test


def train_stateful(model, layout: StatefulBatchLayout, config: TrainConfig) -> TrainResult:
    """SGD over the lane layout with recurrent state carried between steps.

    One epoch visits the training steps in chronological order; the states
    produced by each forward pass seed the next step and are zeroed only
    when a new epoch starts. ``config.batch_size`` is ignored here: the
    batch is the fixed set of lanes.
    """
    if config.mode != STATEFUL:
        raise UsageError(f"config mode is {config.mode!r}, expected {STATEFUL!r}")
    metrics = MetricsLog()
    best = _BestTracker()
    sgd = config.sgd()
    step = 0
    while step < config.total_steps:
        states = None  # epoch boundary: forget everything
        for s in range(layout.train_steps):
            if step >= config.total_steps:
                break
            step += 1
            result = model.forward(layout.inputs[:, s], states)
            states = result.final_states
            target = layout.targets[:, s]
            batch_mse = mse_loss(result.prediction, target)
            _check_finite(batch_mse, "batch loss", step, metrics)
            grads = model.backward(result.cache, target)
            _guarded_step(model, grads, sgd, step, metrics)
            if step % config.eval_every == 0 or step == config.total_steps:
                _, val_mse = stateful_sweep(model, layout)
                _check_finite(val_mse, "validation MSE", step, metrics)
                metrics.record(step, batch_mse, val_mse)
                best.consider(model, step, val_mse)
    return TrainResult(model, metrics, best.step, best.val_mse, best.tensors)


def predict_horizon(model, history_prices, steps: int,
                    norm: NormalizationParams | None) -> np.ndarray:
    """Roll the model forward ``steps`` months beyond the provided history.

    ``history_prices`` is a (window, districts) block of raw prices; each
    prediction is appended to the window (oldest row dropped) and fed back.
    Returns the predicted prices, shape (steps, districts).
    """
    if norm is None:
        raise UsageError("normalization parameters are required to forecast prices")
    if steps < 1:
        raise DomainError("steps must be at least 1")
    history = np.asarray(history_prices, dtype=np.float64)
    if history.ndim != 2:
        raise DomainError(f"history must be (window, districts), got shape {history.shape}")
    if history.shape[1] != model.input_dim:
        raise DomainError(f"history has {history.shape[1]} columns, "
                          f"model expects {model.input_dim}")
    window = apply_normalization(history, norm)
    preds = np.empty((steps, history.shape[1]))
    for k in range(steps):
        y = model.forward(window).prediction
        preds[k] = y
        window = np.vstack([window[1:], y[None, :]])
    return denormalize(preds, norm)
