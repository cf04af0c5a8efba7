"""Finite-difference verification of the analytic gradients.

The numeric side is a central difference of the scalar training loss with
one parameter entry nudged at a time; agreement is judged by the relative
discrepancy ``|a - n| / max(|a|, |n|, 1e-8)`` so tiny gradients do not
divide by zero. Entries are perturbed in place and always restored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, NumericError
from .models import mse_loss

DEFAULT_TOLERANCE = 1e-4


@dataclass
class TensorCheck:
    name: str
    entries_checked: int
    max_discrepancy: float
    worst_index: tuple
    analytic: float
    numeric: float


@dataclass
class GradCheckReport:
    epsilon: float
    max_discrepancy: float
    worst_tensor: str
    checks: list[TensorCheck]

    def passed(self, threshold: float = DEFAULT_TOLERANCE) -> bool:
        return self.max_discrepancy < threshold

    def to_text(self) -> str:
        lines = [f"epsilon {self.epsilon:g}",
                 f"max relative discrepancy {self.max_discrepancy:.3e} "
                 f"(tensor {self.worst_tensor})"]
        width = max(len(c.name) for c in self.checks)
        for c in self.checks:
            lines.append(
                f"  {c.name:<{width}}  {c.max_discrepancy:.3e}  "
                f"analytic {c.analytic: .6e}  numeric {c.numeric: .6e}  "
                f"at {c.worst_index}"
            )
        return "\n".join(lines)


def grad_check(model, window, target, initial_states=None,
               epsilon: float = 1e-5, max_entries_per_tensor: int | None = None,
               seed: int = 0) -> GradCheckReport:
    """Compare analytic and numeric gradients entry by entry.

    Checks every entry of every tensor by default; pass
    ``max_entries_per_tensor`` to sample that many entries (deterministic
    given ``seed``) from each oversized tensor.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")

    def loss() -> float:
        value = mse_loss(model.forward(window, initial_states).prediction, target)
        if not np.isfinite(value):
            raise NumericError("loss is not finite during gradient check")
        return value

    loss()  # fail fast if the base point is already bad
    result = model.forward(window, initial_states)
    analytic = model.backward(result.cache, target)
    rng = np.random.default_rng(seed)

    checks = []
    for name, arr in model.tensors().items():
        flat = arr.reshape(-1)
        ana_flat = analytic[name].reshape(-1)
        n = flat.size
        if max_entries_per_tensor is not None and n > max_entries_per_tensor:
            indices = np.sort(rng.choice(n, size=max_entries_per_tensor, replace=False))
        else:
            indices = range(n)

        worst = -1.0
        worst_j = 0
        worst_ana = 0.0
        worst_num = 0.0
        count = 0
        for j in indices:
            orig = flat[j]
            try:
                flat[j] = orig + epsilon
                lp = loss()
                flat[j] = orig - epsilon
                lm = loss()
            finally:
                flat[j] = orig
            num = (lp - lm) / (2.0 * epsilon)
            ana = float(ana_flat[j])
            rel = abs(ana - num) / max(abs(ana), abs(num), 1e-8)
            count += 1
            if rel > worst:
                worst, worst_j, worst_ana, worst_num = rel, int(j), ana, num
        checks.append(TensorCheck(
            name=name, entries_checked=count, max_discrepancy=worst,
            worst_index=tuple(int(v) for v in np.unravel_index(worst_j, arr.shape)),
            analytic=worst_ana, numeric=worst_num,
        ))

    top = max(checks, key=lambda c: c.max_discrepancy)
    return GradCheckReport(epsilon=epsilon, max_discrepancy=top.max_discrepancy,
                           worst_tensor=top.name, checks=checks)
