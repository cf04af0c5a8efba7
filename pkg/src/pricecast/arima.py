"""ARMA baseline on price returns, fitted by conditional maximum likelihood.

Prices are converted to period returns, a Gaussian ARMA(p, q) with optional
constant is fitted by maximizing the conditional log-likelihood (innovations
recursed from presample conventions, scale concentrated out), standard errors
come from the inverse numeric Hessian, and forecasts iterate the one-step
conditional mean.

Model convention::

    y_t = c + sum_i ar_i * y_{t-i} + sum_j ma_j * e_{t-j} + e_t

with presample y taken as the series mean and presample e as zero. The
likelihood sums the terms with t >= max(p, q).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, DomainError, NumericError

SIMPLE = "simple"
LOG = "log"

_LOG_2PI = math.log(2.0 * math.pi)


def to_returns(prices: np.ndarray, kind: str = SIMPLE) -> np.ndarray:
    """Per-period relative changes ``(p_t - p_{t-1}) / p_{t-1}``.

    ``kind="log"`` gives log-differences instead; both require a strictly
    positive series of length >= 2.
    """
    prices = np.asarray(prices, dtype=np.float64)
    if prices.ndim != 1 or prices.size < 2:
        raise DomainError("need a 1-D price series of length >= 2")
    if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
        raise DomainError("prices must be finite and positive")
    if kind == SIMPLE:
        return np.diff(prices) / prices[:-1]
    if kind == LOG:
        return np.diff(np.log(prices))
    raise DomainError(f"unknown return kind {kind!r}")


def from_returns(anchor_price: float, returns: np.ndarray, kind: str = SIMPLE) -> np.ndarray:
    """Reconstruct prices from an anchor and a return series (anchor included)."""
    returns = np.asarray(returns, dtype=np.float64)
    if not (np.isfinite(anchor_price) and anchor_price > 0):
        raise DomainError("anchor price must be finite and positive")
    if kind == SIMPLE:
        if np.any(returns <= -1):
            raise DomainError("simple return <= -1 would drive the price to or below zero")
        factors = np.cumprod(1.0 + returns)
    elif kind == LOG:
        factors = np.exp(np.cumsum(returns))
    else:
        raise DomainError(f"unknown return kind {kind!r}")
    return np.concatenate([[anchor_price], anchor_price * factors])


@dataclass(frozen=True)
class ArimaSpec:
    """Model orders. Differencing is fixed at 0: the returns transform plays
    that role."""

    p: int = 4
    d: int = 0
    q: int = 4
    with_constant: bool = True

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise DomainError("orders must be non-negative")
        if self.d != 0:
            raise DomainError("differencing is not supported; model returns instead")

    @property
    def n_mean_params(self) -> int:
        return int(self.with_constant) + self.p + self.q


@dataclass
class ArimaFit:
    """Fitted coefficients plus the attained log-likelihood.

    ``std_errors``/``zvalues`` stay None until :func:`std_errors` fills them;
    both align with :meth:`param_labels` (scale included).
    """

    spec: ArimaSpec
    constant: float
    ar: np.ndarray
    ma: np.ndarray
    scale: float
    loglik: float
    std_errors: np.ndarray | None = None
    zvalues: np.ndarray | None = None

    def __post_init__(self):
        self.ar = np.asarray(self.ar, dtype=np.float64)
        self.ma = np.asarray(self.ma, dtype=np.float64)
        if self.ar.shape != (self.spec.p,) or self.ma.shape != (self.spec.q,):
            raise DomainError("coefficient vector lengths do not match the spec")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise DomainError("innovation scale must be positive")

    def param_labels(self) -> list[str]:
        labels = ["Constant"] if self.spec.with_constant else []
        labels += [f"AR({i})" for i in range(1, self.spec.p + 1)]
        labels += [f"MA({j})" for j in range(1, self.spec.q + 1)]
        labels.append("Normal Scale")
        return labels

    def param_vector(self) -> np.ndarray:
        head = [self.constant] if self.spec.with_constant else []
        return np.concatenate([head, self.ar, self.ma, [self.scale]])


def _unpack(spec: ArimaSpec, theta: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    k = 0
    constant = 0.0
    if spec.with_constant:
        constant = float(theta[0])
        k = 1
    ar = theta[k:k + spec.p]
    ma = theta[k + spec.p:k + spec.p + spec.q]
    return constant, ar, ma


def innovations(spec: ArimaSpec, constant: float, ar: np.ndarray, ma: np.ndarray,
                series: np.ndarray) -> np.ndarray:
    """Recursive one-step innovations over the full series.

    Presample observations are replaced by the series mean and presample
    innovations by zero.
    """
    y = np.asarray(series, dtype=np.float64)
    n = y.size
    presample = y.mean() if n else 0.0
    eps = np.zeros(n)
    for t in range(n):
        acc = constant
        for i in range(spec.p):
            lag = t - 1 - i
            acc += ar[i] * (y[lag] if lag >= 0 else presample)
        for j in range(spec.q):
            lag = t - 1 - j
            if lag >= 0:
                acc += ma[j] * eps[lag]
        eps[t] = y[t] - acc
    return eps


def arma_loglik(spec: ArimaSpec, fit: ArimaFit, series: np.ndarray) -> float:
    """Conditional Gaussian log-likelihood of ``series`` under ``fit``."""
    return _loglik(spec, fit.constant, fit.ar, fit.ma, fit.scale, np.asarray(series, float))


def _loglik(spec, constant, ar, ma, scale, series) -> float:
    if not scale > 0:
        raise DomainError("scale must be positive")
    m = max(spec.p, spec.q)
    if series.size <= m:
        raise DomainError(f"series length {series.size} must exceed max(p, q) = {m}")
    eps = innovations(spec, constant, ar, ma, series)[m:]
    var = scale * scale
    return float(-0.5 * eps.size * (_LOG_2PI + math.log(var)) - 0.5 * np.sum(eps * eps) / var)


def _concentrated_negll(spec, theta, series) -> float:
    # Scale is profiled out: at the optimum sigma^2 equals the mean squared
    # innovation, which collapses the Gaussian likelihood to a function of
    # the mean parameters alone.
    constant, ar, ma = _unpack(spec, theta)
    m = max(spec.p, spec.q)
    eps = innovations(spec, constant, ar, ma, series)[m:]
    msq = float(np.mean(eps * eps))
    if not np.isfinite(msq) or msq <= 0:
        return np.inf
    return 0.5 * eps.size * (_LOG_2PI + math.log(msq) + 1.0)


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "Nelder-Mead"
    maxiter: int = 40000
    xtol: float = 1e-9
    ftol: float = 1e-12
    restarts: int = 0
    restart_scale: float = 0.1
    seed: int = 0


def fit_mle(spec: ArimaSpec, series: np.ndarray,
            config: OptimizerConfig = OptimizerConfig()) -> ArimaFit:
    """Maximize the conditional likelihood from a zero start.

    The constant starts at the series mean and all AR/MA coefficients at
    zero; optional restarts perturb that start with seeded noise and the best
    local optimum wins. The result never has lower likelihood than the start.
    Raises :class:`ConvergenceError` (carrying the best fit so far) when the
    optimizer exhausts its budget.
    """
    y = np.asarray(series, dtype=np.float64)
    m = max(spec.p, spec.q)
    if y.size <= m + 1:
        raise DomainError(f"series length {y.size} too short for ARMA({spec.p},{spec.q})")

    start = np.zeros(spec.n_mean_params)
    if spec.with_constant:
        start[0] = y.mean()

    starts = [start]
    if config.restarts > 0:
        rng = np.random.default_rng(config.seed)
        starts += [start + rng.normal(0.0, config.restart_scale, start.shape)
                   for _ in range(config.restarts)]

    best_theta, best_val = start, _concentrated_negll(spec, start, y)
    converged = spec.n_mean_params == 0
    for theta0 in starts:
        if spec.n_mean_params == 0:
            break
        res = optimize.minimize(
            lambda th: _concentrated_negll(spec, th, y),
            theta0,
            method=config.method,
            options={"maxiter": config.maxiter, "xatol": config.xtol,
                     "fatol": config.ftol, "maxfev": config.maxiter},
        )
        if res.fun < best_val:
            best_theta, best_val = res.x, res.fun
        converged = converged or bool(res.success)

    constant, ar, ma = _unpack(spec, best_theta)
    eps = innovations(spec, constant, ar, ma, y)[m:]
    scale = float(np.sqrt(np.mean(eps * eps)))
    if scale <= 0:
        raise NumericError("residuals are identically zero; likelihood is unbounded")
    fit = ArimaFit(spec, constant, ar.copy(), ma.copy(), scale,
                   _loglik(spec, constant, ar, ma, scale, y))
    _warn_if_explosive(fit)
    if not converged:
        raise ConvergenceError(
            f"optimizer did not converge within {config.maxiter} iterations", partial=fit)
    return fit


def _warn_if_explosive(fit: ArimaFit):
    # Characteristic roots on or inside the unit circle mean the fitted
    # process is non-stationary (AR) or non-invertible (MA).
    if fit.spec.p and np.any(fit.ar != 0):
        roots = np.roots(np.concatenate([-fit.ar[::-1], [1.0]]))
        if roots.size and np.min(np.abs(roots)) <= 1.0:
            warnings.warn("fitted AR polynomial has roots inside the unit circle "
                          "(non-stationary)", stacklevel=3)
    if fit.spec.q and np.any(fit.ma != 0):
        roots = np.roots(np.concatenate([fit.ma[::-1], [1.0]]))
        if roots.size and np.min(np.abs(roots)) <= 1.0:
            warnings.warn("fitted MA polynomial has roots inside the unit circle "
                          "(non-invertible)", stacklevel=3)


def _full_negll(spec: ArimaSpec, x: np.ndarray, series: np.ndarray) -> float:
    constant, ar, ma = _unpack(spec, x[:-1])
    scale = float(x[-1])
    if scale <= 0:
        return np.inf
    try:
        return -_loglik(spec, constant, ar, ma, scale, series)
    except DomainError:
        return np.inf


def std_errors(fit: ArimaFit, series: np.ndarray) -> ArimaFit:
    """Standard errors from the inverse numeric Hessian at the fit.

    Returns a copy of ``fit`` with ``std_errors`` and ``zvalues`` populated
    (aligned with :meth:`ArimaFit.param_labels`, scale last). Entries whose
    inverse-Hessian diagonal is not positive come back as NaN instead of
    raising.
    """
    y = np.asarray(series, dtype=np.float64)
    x0 = fit.param_vector()
    k = x0.size
    h = 1e-4 * np.maximum(np.abs(x0), 1.0)

    def f(x):
        return _full_negll(fit.spec, x, y)

    hess = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            ei = np.zeros(k); ei[i] = h[i]
            ej = np.zeros(k); ej[j] = h[j]
            hess[i, j] = hess[j, i] = (
                f(x0 + ei + ej) - f(x0 + ei - ej) - f(x0 - ei + ej) + f(x0 - ei - ej)
            ) / (4.0 * h[i] * h[j])

    se = np.full(k, np.nan)
    try:
        cov = np.linalg.inv(hess)
        diag = np.diag(cov)
        good = diag > 0
        se[good] = np.sqrt(diag[good])
    except np.linalg.LinAlgError:
        pass
    z = z_values(x0, se)
    return replace(fit, std_errors=se, zvalues=z)


def z_values(estimates: np.ndarray, errors: np.ndarray) -> np.ndarray:
    """Elementwise estimate / std-error with NaN where the error is missing."""
    estimates = np.asarray(estimates, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    out = np.full(estimates.shape, np.nan)
    good = np.isfinite(errors) & (errors > 0)
    out[good] = estimates[good] / errors[good]
    return out


def forecast(fit: ArimaFit, series: np.ndarray, horizon: int) -> np.ndarray:
    """Iterated conditional-mean forecasts.

    Future innovations are set to zero and forecast values feed back into the
    recursion as it advances.
    """
    if horizon < 1:
        raise DomainError("horizon must be at least 1")
    y = np.asarray(series, dtype=np.float64)
    n = y.size
    presample = y.mean() if n else 0.0
    eps = innovations(fit.spec, fit.constant, fit.ar, fit.ma, y)
    extended = list(y)
    out = np.empty(horizon)
    for h in range(horizon):
        t = n + h
        acc = fit.constant
        for i in range(fit.spec.p):
            lag = t - 1 - i
            acc += fit.ar[i] * (extended[lag] if lag >= 0 else presample)
        for j in range(fit.spec.q):
            lag = t - 1 - j
            if 0 <= lag < n:
                acc += fit.ma[j] * eps[lag]
        extended.append(acc)
        out[h] = acc
    return out


# ---------------------------------------------------------------------------
# Fit report (table of latent variables, JSON and aligned text)

@dataclass(frozen=True)
class FitReportRow:
    label: str
    estimate: float
    std_error: float | None
    z: float | None


@dataclass(frozen=True)
class FitReport:
    title: str
    rows: list[FitReportRow] = field(default_factory=list)
    loglik: float = math.nan

    def to_json_dict(self) -> dict:
        return {
            "title": self.title,
            "loglik": self.loglik,
            "rows": [
                {"latent_variable": r.label, "estimate": r.estimate,
                 "std_error": r.std_error, "z": r.z}
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    def to_text(self) -> str:
        headers = ("Latent Variable", "Estimate", "Std Error", "z")
        cells = [
            (r.label, f"{r.estimate:.4f}",
             "" if r.std_error is None or math.isnan(r.std_error) else f"{r.std_error:.4f}",
             "" if r.z is None or math.isnan(r.z) else f"{r.z:.4f}")
            for r in self.rows
        ]
        widths = [max(len(h), *(len(c[i]) for c in cells)) for i, h in enumerate(headers)]
        lines = [self.title,
                 "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
                 "  ".join("-" * w for w in widths)]
        for c in cells:
            lines.append("  ".join(c[i].ljust(widths[i]) for i in range(4)))
        lines.append(f"Log-likelihood: {self.loglik:.4f}")
        return "\n".join(lines)


def build_fit_report(fit: ArimaFit) -> FitReport:
    labels = fit.param_labels()
    estimates = fit.param_vector()
    se = fit.std_errors if fit.std_errors is not None else np.full(estimates.shape, np.nan)
    z = fit.zvalues if fit.zvalues is not None else np.full(estimates.shape, np.nan)
    rows = [
        FitReportRow(lab, float(est), float(s) if np.isfinite(s) else None,
                     float(zz) if np.isfinite(zz) else None)
        for lab, est, s, zz in zip(labels, estimates, se, z)
    ]
    title = f"Normal ARIMA({fit.spec.p}, {fit.spec.d}, {fit.spec.q})"
    return FitReport(title, rows, fit.loglik)
