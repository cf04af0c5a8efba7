"""Figure rendering for CLI reports.

Every function takes plain data and a target path, renders with the Agg
backend, and closes its figure, so commands can emit PNGs next to their
CSV/JSON outputs without a display.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _month_ticks(ax, labels, every: int = 12):
    idx = list(range(0, len(labels), max(1, every)))
    ax.set_xticks(idx)
    ax.set_xticklabels([labels[i] for i in idx], rotation=45, ha="right", fontsize=8)


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_convergence(metrics, path, title: str = "Training convergence"):
    """Batch and validation MSE against the optimizer step."""
    steps = [r.step for r in metrics.rows]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(steps, [r.train_mse for r in metrics.rows], label="training batch MSE")
    ax.plot(steps, [r.val_mse for r in metrics.rows], label="validation MSE")
    ax.set_xlabel("step")
    ax.set_ylabel("MSE")
    ax.set_yscale("log")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    _finish(fig, path)


def plot_matrix_series(months, values, districts, path,
                       title: str = "Monthly average price", max_lines: int = 8):
    """Overview of up to ``max_lines`` district price series."""
    values = np.asarray(values)
    fig, ax = plt.subplots(figsize=(9, 4.5))
    shown = min(len(districts), max_lines)
    for j in range(shown):
        ax.plot(values[:, j], label=districts[j], linewidth=1.2)
    if len(districts) > shown:
        title = f"{title} (first {shown} of {len(districts)} districts)"
    _month_ticks(ax, months)
    ax.set_ylabel("price")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    _finish(fig, path)


def plot_forecast(history_months, history, forecast_months, forecast,
                  districts, path, title: str = "Rolling forecast",
                  max_lines: int = 6):
    """History with the forecast continuation dashed, per district."""
    history = np.asarray(history)
    forecast = np.asarray(forecast)
    labels = list(history_months) + list(forecast_months)
    m = history.shape[0]
    fig, ax = plt.subplots(figsize=(9, 4.5))
    shown = min(len(districts), max_lines)
    for j in range(shown):
        line, = ax.plot(range(m), history[:, j], linewidth=1.2, label=districts[j])
        ax.plot(range(m - 1, m + len(forecast)),
                np.concatenate([[history[-1, j]], forecast[:, j]]),
                linestyle="--", color=line.get_color())
    if len(districts) > shown:
        title = f"{title} (first {shown} of {len(districts)} districts)"
    ax.axvline(m - 0.5, color="grey", linewidth=0.8, alpha=0.6)
    _month_ticks(ax, labels)
    ax.set_ylabel("price")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    _finish(fig, path)


def plot_baseline(months, actual, forecast_start: int, forecast, path,
                  title: str = "ARIMA baseline"):
    """One district's actual prices with the model's held-out forecast."""
    actual = np.asarray(actual)
    forecast = np.asarray(forecast)
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.plot(range(len(actual)), actual, label="actual", linewidth=1.2)
    ax.plot(range(forecast_start, forecast_start + len(forecast)), forecast,
            linestyle="--", marker="o", markersize=3, label="forecast")
    ax.axvline(forecast_start - 0.5, color="grey", linewidth=0.8, alpha=0.6)
    _month_ticks(ax, months)
    ax.set_ylabel("price")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    _finish(fig, path)


def plot_sweep(units, best_val, final_val, path,
               title: str = "Hidden-units sweep"):
    """Validation MSE against hidden width."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(units, best_val, marker="o", label="best validation MSE")
    ax.plot(units, final_val, marker="s", label="final validation MSE")
    ax.set_xscale("log", base=2)
    ax.set_xticks(list(units))
    ax.set_xticklabels([str(u) for u in units])
    ax.set_xlabel("hidden units")
    ax.set_ylabel("MSE")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    _finish(fig, path)
