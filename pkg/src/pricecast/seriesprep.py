"""Dataset preparation: normalization, sliding windows, splits, batch layout.

Everything here is pure: each operation returns new arrays and leaves its
input untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError
from .ingest import PriceMatrix

GLOBAL = "global"
PER_DISTRICT = "per-district"


@dataclass(frozen=True)
class NormalizationParams:
    """Affine map of prices onto [0, 1] and back.

    ``scope`` is ``"per-district"`` (one lo/hi per column) or ``"global"``
    (scalar lo/hi over the whole grid).
    """

    scope: str
    lo: np.ndarray
    hi: np.ndarray

    def to_dict(self) -> dict:
        return {"scope": self.scope, "lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(d["scope"], np.asarray(d["lo"], dtype=np.float64),
                   np.asarray(d["hi"], dtype=np.float64))


def normalize(
    matrix: PriceMatrix | np.ndarray,
    scope: str = PER_DISTRICT,
    stats_rows: int | None = None,
) -> tuple[np.ndarray, NormalizationParams]:
    """Map values onto [0, 1] within each scope unit.

    ``stats_rows`` restricts the min/max statistics to the first n rows
    (leakage-safe mode); by default the full series is used, so later rows
    may then map outside [0, 1] only in leakage-safe mode.
    """
    if isinstance(matrix, PriceMatrix):
        values = matrix.values
        names = matrix.districts
    else:
        values = np.asarray(matrix, dtype=np.float64)
        names = [str(j) for j in range(values.shape[1])]
    if np.isnan(values).any():
        raise DomainError("matrix has missing cells; fill gaps before normalizing")

    stats = values if stats_rows is None else values[:stats_rows]
    if scope == PER_DISTRICT:
        lo, hi = stats.min(axis=0), stats.max(axis=0)
        flat = hi <= lo
        if flat.any():
            j = int(np.argmax(flat))
            raise DomainError(f"district {names[j]!r} is constant; cannot normalize per-district")
    elif scope == GLOBAL:
        lo, hi = np.asarray(stats.min()), np.asarray(stats.max())
        if hi <= lo:
            raise DomainError("matrix is constant; cannot normalize")
    else:
        raise DomainError(f"unknown normalization scope {scope!r}")
    return (values - lo) / (hi - lo), NormalizationParams(scope, lo, hi)


def apply_normalization(values: np.ndarray, params: NormalizationParams) -> np.ndarray:
    """Map new rows with previously fitted constants (inverse of denormalize)."""
    return (np.asarray(values, dtype=np.float64) - params.lo) / (params.hi - params.lo)


def denormalize(values: np.ndarray, params: NormalizationParams) -> np.ndarray:
    return np.asarray(values) * (params.hi - params.lo) + params.lo


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    validation: np.ndarray


@dataclass(frozen=True)
class WindowedDataset:
    """Supervised samples: ``window_len`` consecutive rows -> the next row.

    ``inputs[k]`` is rows ``k .. k+window_len-1`` of the source matrix and
    ``targets[k]`` is row ``k+window_len``; samples are in chronological
    order. ``split`` is None until :func:`split_dataset` populates it.
    """

    window_len: int
    inputs: np.ndarray   # (N, window_len, D)
    targets: np.ndarray  # (N, D)
    split: SplitIndices | None = None

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_districts(self) -> int:
        return self.inputs.shape[2]


def make_windows(values: np.ndarray, window_len: int = 15) -> WindowedDataset:
    """Slice an (M, D) matrix into M - window_len supervised samples."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise DomainError(f"expected a 2-D matrix, got shape {values.shape}")
    m = values.shape[0]
    if window_len < 1:
        raise DomainError("window_len must be at least 1")
    if m <= window_len:
        raise DomainError(f"need more than {window_len} months, got {m}")
    n = m - window_len
    inputs = np.stack([values[k:k + window_len] for k in range(n)])
    targets = values[window_len:].copy()
    return WindowedDataset(window_len, inputs, targets)


def split_dataset(dataset: WindowedDataset, n_val: int = 14) -> WindowedDataset:
    """Chronological holdout: the last ``n_val`` samples become validation."""
    n = dataset.n_samples
    if not 0 <= n_val < n:
        raise DomainError(f"n_val={n_val} must satisfy 0 <= n_val < {n}")
    indices = np.arange(n)
    return replace(dataset, split=SplitIndices(indices[: n - n_val], indices[n - n_val:]))


@dataclass(frozen=True)
class StatefulBatchLayout:
    """Row-major lane layout for stateful training.

    Flat sample ``s`` sits at lane ``s // steps_per_batch``, step
    ``s % steps_per_batch``; each lane is a contiguous chronological slice of
    the flat dataset, so carried state advances through real time within a
    lane. The inner axis splits into a training slice (steps 0..train_steps)
    and a test slice (the remainder).
    """

    batch_size: int
    steps_per_batch: int
    train_steps: int
    inputs: np.ndarray        # (batch_size, steps_per_batch, window_len, D)
    targets: np.ndarray       # (batch_size, steps_per_batch, D)
    sample_index: np.ndarray  # (batch_size, steps_per_batch)

    @property
    def train_inputs(self) -> np.ndarray:
        return self.inputs[:, : self.train_steps]

    @property
    def train_targets(self) -> np.ndarray:
        return self.targets[:, : self.train_steps]

    @property
    def test_inputs(self) -> np.ndarray:
        return self.inputs[:, self.train_steps:]

    @property
    def test_targets(self) -> np.ndarray:
        return self.targets[:, self.train_steps:]


def stateful_reshape(
    dataset: WindowedDataset,
    batch_size: int = 5,
    steps_per_batch: int = 27,
    train_steps: int = 25,
) -> StatefulBatchLayout:
    """Fold the first ``batch_size * steps_per_batch`` samples into lanes."""
    used = batch_size * steps_per_batch
    if batch_size < 1 or steps_per_batch < 1:
        raise DomainError("batch_size and steps_per_batch must be positive")
    if used > dataset.n_samples:
        raise DomainError(
            f"layout needs {used} samples but the dataset has {dataset.n_samples}"
        )
    if not 0 < train_steps <= steps_per_batch:
        raise DomainError(f"train_steps={train_steps} must be in 1..{steps_per_batch}")
    d = dataset.n_districts
    w = dataset.window_len
    inputs = dataset.inputs[:used].reshape(batch_size, steps_per_batch, w, d)
    targets = dataset.targets[:used].reshape(batch_size, steps_per_batch, d)
    sample_index = np.arange(used).reshape(batch_size, steps_per_batch)
    return StatefulBatchLayout(batch_size, steps_per_batch, train_steps,
                               inputs, targets, sample_index)
