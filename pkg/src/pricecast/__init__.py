"""District-level house price forecasting.

Recurrent networks (Elman, LSTM, stacked and stateful variants) trained on
sliding windows of monthly average prices, compared against a classical
ARMA-on-returns baseline. Everything runs on numpy float64; scipy is used
only for baseline optimization.
"""

__version__ = "0.1.0"
