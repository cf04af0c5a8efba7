"""Deterministic synthetic transaction generator.

Monthly district means follow ``base_d + trend*t + amplitude*sin(2*pi*t /
period + phase_step*d)`` (additive mode, the default) where ``base_d``
scales the base price by ``1 + d*district_spread`` so columns are
distinguishable. Multiplicative mode compounds the trend and applies the
seasonal factor as a fraction, giving a mildly nonlinear series. Individual
transactions add gaussian noise around the cell mean; the same spec and
seed always produce byte-identical output.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError
from .months import add_months, format_month, month_range, parse_month

ADDITIVE = "additive"
MULTIPLICATIVE = "multiplicative"


@dataclass(frozen=True)
class SyntheticSpec:
    districts: int = 4
    months: int = 154
    start: str = "2004-01"
    base_price: float = 20000.0
    district_spread: float = 0.1
    trend: float = 60.0          # price units per month (additive) or growth rate (multiplicative)
    amplitude: float = 800.0     # price units (additive) or fraction of the level (multiplicative)
    period: int = 12
    phase_step: float = 0.0      # radians of seasonal phase added per district index
    noise: float = 0.0           # stdev of per-transaction noise, price units
    txns_per_cell: int = 8
    missing_prob: float = 0.0
    seasonal_mode: str = ADDITIVE
    seed: int = 0

    def __post_init__(self):
        if self.districts < 1:
            raise DomainError("districts must be at least 1")
        if self.months < 1:
            raise DomainError("months must be at least 1")
        if self.base_price <= 0:
            raise DomainError("base_price must be positive")
        if self.period < 2:
            raise DomainError("period must be at least 2")
        if self.txns_per_cell < 1:
            raise DomainError("txns_per_cell must be at least 1")
        if not 0.0 <= self.missing_prob < 1.0:
            raise DomainError("missing_prob must lie in [0, 1)")
        if self.noise < 0:
            raise DomainError("noise must be non-negative")
        if self.seasonal_mode not in (ADDITIVE, MULTIPLICATIVE):
            raise DomainError(f"unknown seasonal_mode {self.seasonal_mode!r}")
        try:
            parse_month(self.start)
        except ValueError as exc:
            raise DomainError(str(exc)) from None


def district_names(spec: SyntheticSpec) -> list[str]:
    width = max(2, len(str(spec.districts - 1)))
    return [f"d{j:0{width}d}" for j in range(spec.districts)]


def month_labels(spec: SyntheticSpec) -> list[str]:
    return month_range(spec.start, add_months(spec.start, spec.months - 1))


def cell_means(spec: SyntheticSpec) -> np.ndarray:
    """The noise-free (months, districts) price surface; the oracle every
    round-trip test compares against."""
    t = np.arange(spec.months, dtype=np.float64)[:, None]
    d = np.arange(spec.districts, dtype=np.float64)[None, :]
    base = spec.base_price * (1.0 + d * spec.district_spread)
    phase = 2.0 * math.pi * t / spec.period + spec.phase_step * d
    if spec.seasonal_mode == ADDITIVE:
        means = base + spec.trend * t + spec.amplitude * np.sin(phase)
    else:
        means = base * (1.0 + spec.trend) ** t * (1.0 + spec.amplitude * np.sin(phase))
    if np.any(means <= 0):
        raise DomainError(
            "generator settings produce non-positive prices; reduce amplitude "
            "or trend, or raise base_price"
        )
    return means


def generate_rows(spec: SyntheticSpec) -> list[tuple[str, str, float]]:
    """CSV-ready (date, district, price) rows, deterministic given the spec.

    Cells vanish entirely with probability ``missing_prob`` so downstream
    gap filling has something to do. Draw order is fixed: per cell, one
    missing draw, then days, then prices.
    """
    means = cell_means(spec)
    labels = month_labels(spec)
    names = district_names(spec)
    rng = np.random.default_rng(spec.seed)
    rows = []
    for t, label in enumerate(labels):
        for j, name in enumerate(names):
            if spec.missing_prob > 0 and rng.random() < spec.missing_prob:
                continue
            days = rng.integers(1, 29, size=spec.txns_per_cell)
            prices = means[t, j] + spec.noise * rng.standard_normal(spec.txns_per_cell)
            if np.any(prices <= 0):
                raise DomainError(
                    "generator settings produce non-positive prices; reduce "
                    "noise or amplitude, or raise base_price"
                )
            for day, price in zip(days, prices):
                rows.append((f"{label}-{day:02d}", name, float(price)))
    return rows


def write_transactions_csv(spec: SyntheticSpec, path: str | Path) -> int:
    """Write the generated transactions; returns the row count."""
    rows = generate_rows(spec)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("date", "district", "price"))
        for date, district, price in rows:
            writer.writerow((date, district, repr(price)))
    return len(rows)
