"""Command-line entry point.

Seven subcommands cover the pipeline: ``synth`` fabricates transactions,
``ingest`` turns transactions into a monthly price matrix, ``train`` fits a
recurrent model, ``baseline`` fits the ARMA comparison, ``forecast`` rolls
a trained model forward, ``gradcheck`` verifies gradients, and ``sweep``
trains one model per hidden width.

Every command resolves its settings as defaults < config file < flags,
writes the resolved state to ``effective-config.ini`` beside its outputs,
and renders figures next to the delimited files unless ``--no-figures`` is
given. Output location: ``--out`` wins; otherwise ``<root>/<command>``
where root comes from ``[output] root``, then $PRICECAST_OUT, then the
working directory. Library errors map to stable exit codes (usage 2,
format 3, domain 4, convergence 5, numeric 6, I/O 7).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .arima import (
    ArimaSpec,
    OptimizerConfig,
    build_fit_report,
    fit_mle,
    forecast as arima_forecast,
    from_returns,
    innovations,
    std_errors,
    to_returns,
)
from .errors import (
    EXIT_CONVERGENCE,
    EXIT_IO,
    EXIT_NUMERIC,
    EXIT_OK,
    ConvergenceError,
    PricecastError,
    UsageError,
)
from .ingest import (
    GapPolicy,
    aggregate_monthly,
    fill_gaps,
    parse_transactions,
    read_matrix_csv,
    write_matrix_csv,
    write_rejection_report,
)
from .months import add_months, parse_month
from .neural.checkpoint import load_checkpoint, save_checkpoint
from .neural.gradcheck import grad_check
from .neural.models import build_model
from .runconfig import RunConfig
from .seriesprep import (
    NormalizationParams,
    apply_normalization,
    make_windows,
    normalize,
    split_dataset,
    stateful_reshape,
)
from .synth import SyntheticSpec, cell_means, district_names, month_labels, write_transactions_csv
from .training import (
    STATEFUL,
    STATELESS,
    TrainConfig,
    predict_horizon,
    train_stateful,
    train_stateless,
)

ENV_OUT = "PRICECAST_OUT"

_GAP_POLICIES = {
    "interpolate": GapPolicy.INTERPOLATE,
    "drop-district": GapPolicy.DROP_DISTRICT,
    "drop_district": GapPolicy.DROP_DISTRICT,
}


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    if getattr(args, "no_figures", False):
        cfg.override("output", "figures", False)
    return cfg


def _apply_overrides(cfg: RunConfig, args, mapping):
    """mapping: (attr name on args, section, key) for every value flag."""
    for attr, section, key in mapping:
        value = getattr(args, attr)
        if value is not None:
            cfg.override(section, key, value)


def _resolve_out(args, cfg: RunConfig, command: str) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        root = cfg.get_opt_str("output", "root") or os.environ.get(ENV_OUT) or "."
        out = Path(root) / command
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- ingest --

def cmd_ingest(args) -> int:
    cfg = _load_config(args)
    _apply_overrides(cfg, args, [
        ("input", "ingest", "input"),
        ("start", "ingest", "start"),
        ("end", "ingest", "end"),
        ("alt_date_format", "ingest", "alt_date_format"),
        ("gap_policy", "data", "gap_policy"),
    ])
    out = _resolve_out(args, cfg, "ingest")

    source = cfg.get_opt_str("ingest", "input")
    if source is None:
        raise UsageError("an input transaction CSV is required (positional or [ingest] input)")
    start = cfg.get_opt_str("ingest", "start")
    end = cfg.get_opt_str("ingest", "end")
    if (start is None) != (end is None):
        raise UsageError("--start and --end must be given together")
    calendar = (start, end) if start else None

    records, rejected = parse_transactions(
        source, calendar=calendar,
        alt_date_format=cfg.get_opt_str("ingest", "alt_date_format"))
    if calendar is None:
        if not records:
            raise UsageError("input contains no usable rows")
        # Infer the calendar from the data itself.
        labels = [r.month for r in records]
        calendar = (min(labels, key=parse_month), max(labels, key=parse_month))

    matrix = aggregate_monthly(records, calendar)
    missing = int(np.isnan(matrix.values).sum())
    policy = _GAP_POLICIES[cfg.get("data", "gap_policy")]
    filled = fill_gaps(matrix, policy)

    write_matrix_csv(filled, out / "matrix.csv", out / "coverage.csv")
    write_rejection_report(rejected, out / "rejections.csv")
    summary = {
        "first_month": filled.months[0],
        "last_month": filled.months[-1],
        "months": len(filled.months),
        "districts": len(filled.districts),
        "district_names": filled.districts,
        "rows_accepted": len(records),
        "rows_rejected": len(rejected),
        "gap_policy": cfg.get("data", "gap_policy"),
        "cells_filled": missing if policy is GapPolicy.INTERPOLATE else 0,
        "districts_dropped": (len(matrix.districts) - len(filled.districts)),
    }
    _write_json(out / "ingest-summary.json", summary)
    if cfg.get_bool("output", "figures"):
        from .figures import plot_matrix_series
        plot_matrix_series(filled.months, filled.values, filled.districts,
                           out / "series.png")
    cfg.write(out / "effective-config.ini")
    print(f"ingest: {len(records)} rows -> {len(filled.months)}x{len(filled.districts)} "
          f"matrix ({summary['rows_rejected']} rejected) in {out}")
    return EXIT_OK


# ----------------------------------------------------------------- synth --

def cmd_synth(args) -> int:
    cfg = _load_config(args)
    _apply_overrides(cfg, args, [
        ("districts", "synth", "districts"),
        ("months", "synth", "months"),
        ("start", "synth", "start"),
        ("base_price", "synth", "base_price"),
        ("district_spread", "synth", "district_spread"),
        ("trend", "synth", "trend"),
        ("amplitude", "synth", "amplitude"),
        ("period", "synth", "period"),
        ("phase_step", "synth", "phase_step"),
        ("noise", "synth", "noise"),
        ("txns_per_cell", "synth", "txns_per_cell"),
        ("missing_prob", "synth", "missing_prob"),
        ("seasonal_mode", "synth", "seasonal_mode"),
        ("seed", "synth", "seed"),
    ])
    out = _resolve_out(args, cfg, "synth")

    spec = SyntheticSpec(
        districts=cfg.get_int("synth", "districts"),
        months=cfg.get_int("synth", "months"),
        start=cfg.get("synth", "start"),
        base_price=cfg.get_float("synth", "base_price"),
        district_spread=cfg.get_float("synth", "district_spread"),
        trend=cfg.get_float("synth", "trend"),
        amplitude=cfg.get_float("synth", "amplitude"),
        period=cfg.get_int("synth", "period"),
        phase_step=cfg.get_float("synth", "phase_step"),
        noise=cfg.get_float("synth", "noise"),
        txns_per_cell=cfg.get_int("synth", "txns_per_cell"),
        missing_prob=cfg.get_float("synth", "missing_prob"),
        seasonal_mode=cfg.get("synth", "seasonal_mode"),
        seed=cfg.get_int("synth", "seed"),
    )
    count = write_transactions_csv(spec, out / "transactions.csv")
    if cfg.get_bool("output", "figures"):
        from .figures import plot_matrix_series
        plot_matrix_series(month_labels(spec), cell_means(spec), district_names(spec),
                           out / "synth-truth.png",
                           title="Synthetic price surface (cell means)")
    cfg.write(out / "effective-config.ini")
    print(f"synth: wrote {count} transactions for {spec.districts} districts x "
          f"{spec.months} months in {out}")
    return EXIT_OK


# ----------------------------------------------------------------- train --

def _training_job(values: dict, out_dir: str) -> dict:
    """Shared train pipeline (also the sweep worker; must stay picklable).

    Writes metrics/checkpoints/summary/figure into ``out_dir`` and returns
    the summary dict. On divergence the partial metrics are still written
    before the ConvergenceError propagates.
    """
    cfg = RunConfig(values)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    matrix_path = cfg.get_opt_str("train", "matrix")
    if matrix_path is None:
        raise UsageError("a price matrix is required (--matrix or [train] matrix)")
    matrix = read_matrix_csv(matrix_path)
    district = cfg.get_opt_str("train", "district")
    if district is not None:
        series = matrix.district_column(district)[:, None]
        names = [district]
    else:
        series = matrix.values
        names = matrix.districts

    scope = cfg.get("data", "normalization")
    normed, norm = normalize(series, scope=scope,
                             stats_rows=cfg.get_opt_int("data", "stats_rows"))
    window = cfg.get_int("data", "window")
    dataset = make_windows(normed, window)

    mode = cfg.get("train", "mode")
    seed = cfg.get_int("train", "seed")
    kind = cfg.get("model", "kind")
    hidden = cfg.get_int_list("model", "hidden")
    d = dataset.n_districts
    model = build_model(kind, d, d, hidden, seed)
    train_cfg = TrainConfig(
        learning_rate=cfg.get_float("train", "learning_rate"),
        total_steps=cfg.get_int("train", "total_steps"),
        batch_size=cfg.get_int("train", "batch_size"),
        eval_every=cfg.get_int("train", "eval_every"),
        seed=seed,
        mode=mode,
        clip_threshold=cfg.get_opt_float("train", "clip"),
        shuffle_epochs=cfg.get_bool("train", "shuffle_epochs"),
    )
    figures = cfg.get_bool("output", "figures")

    try:
        if mode == STATELESS:
            ds = split_dataset(dataset, cfg.get_int("data", "val_samples"))
            result = train_stateless(model, ds, train_cfg)
        else:
            layout = stateful_reshape(
                dataset,
                batch_size=cfg.get_int("train", "lanes"),
                steps_per_batch=cfg.get_int("train", "lane_steps"),
                train_steps=cfg.get_int("train", "lane_train_steps"),
            )
            result = train_stateful(model, layout, train_cfg)
    except ConvergenceError as exc:
        log = exc.partial
        if log is not None and log.rows:
            log.to_csv(out / "metrics.csv")
            if figures:
                from .figures import plot_convergence
                plot_convergence(log, out / "convergence.png")
        cfg.write(out / "effective-config.ini")
        raise

    result.metrics.to_csv(out / "metrics.csv")
    extras = {
        "normalization": norm.to_dict(),
        "districts": names,
        "window": window,
        "last_month": matrix.months[-1],
        "mode": mode,
    }
    save_checkpoint(model, out / "checkpoint.json", seed=seed, extras=extras)
    if result.best_tensors is not None:
        result.restore_best()
        save_checkpoint(model, out / "checkpoint-best.json", seed=seed, extras=extras)
    final = result.metrics.final()
    summary = {
        "kind": kind,
        "hidden": hidden,
        "mode": mode,
        "districts": names,
        "window": window,
        "normalization": scope,
        "total_steps": train_cfg.total_steps,
        "final_step": final.step,
        "final_train_mse": final.train_mse,
        "final_val_mse": final.val_mse,
        "best_step": result.best_step,
        "best_val_mse": result.best_val_mse,
    }
    _write_json(out / "train-summary.json", summary)
    if figures:
        from .figures import plot_convergence
        plot_convergence(result.metrics, out / "convergence.png")
    cfg.write(out / "effective-config.ini")
    return summary


_TRAIN_FLAGS = [
    ("matrix", "train", "matrix"),
    ("district", "train", "district"),
    ("kind", "model", "kind"),
    ("hidden", "model", "hidden"),
    ("learning_rate", "train", "learning_rate"),
    ("steps", "train", "total_steps"),
    ("batch_size", "train", "batch_size"),
    ("eval_every", "train", "eval_every"),
    ("seed", "train", "seed"),
    ("clip", "train", "clip"),
    ("lanes", "train", "lanes"),
    ("lane_steps", "train", "lane_steps"),
    ("lane_train_steps", "train", "lane_train_steps"),
    ("window", "data", "window"),
    ("val_samples", "data", "val_samples"),
    ("normalization", "data", "normalization"),
    ("stats_rows", "data", "stats_rows"),
]


def cmd_train(args) -> int:
    cfg = _load_config(args)
    _apply_overrides(cfg, args, _TRAIN_FLAGS)
    if args.stateful:
        cfg.override("train", "mode", STATEFUL)
    if args.shuffle_epochs:
        cfg.override("train", "shuffle_epochs", True)
    out = _resolve_out(args, cfg, "train")
    try:
        summary = _training_job(cfg._values, str(out))
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"train: diverged; partial metrics retained in {out}", file=sys.stderr)
        return EXIT_CONVERGENCE
    print(f"train: {summary['kind']} {summary['hidden']} ({summary['mode']}) "
          f"best val MSE {summary['best_val_mse']:.6f} at step {summary['best_step']}; "
          f"outputs in {out}")
    return EXIT_OK


# -------------------------------------------------------------- baseline --

def cmd_baseline(args) -> int:
    cfg = _load_config(args)
    _apply_overrides(cfg, args, [
        ("matrix", "baseline", "matrix"),
        ("district", "baseline", "district"),
        ("p", "baseline", "p"),
        ("d", "baseline", "d"),
        ("q", "baseline", "q"),
        ("horizon", "baseline", "horizon"),
        ("restarts", "baseline", "restarts"),
        ("seed", "baseline", "seed"),
        ("return_kind", "baseline", "return_kind"),
    ])
    if args.no_constant:
        cfg.override("baseline", "constant", False)
    out = _resolve_out(args, cfg, "baseline")

    matrix_path = cfg.get_opt_str("baseline", "matrix")
    if matrix_path is None:
        raise UsageError("a price matrix is required (--matrix or [baseline] matrix)")
    matrix = read_matrix_csv(matrix_path)
    district = cfg.get_opt_str("baseline", "district") or matrix.districts[0]
    series = matrix.district_column(district)

    horizon = cfg.get_int("baseline", "horizon")
    if horizon < 1:
        raise UsageError("horizon must be at least 1")
    m = len(series)
    if m - horizon < 3:
        raise UsageError(f"series has {m} months; too few to hold out {horizon}")
    train_prices = series[: m - horizon]
    heldout = series[m - horizon:]

    kind = cfg.get("baseline", "return_kind")
    returns = to_returns(train_prices, kind)
    spec = ArimaSpec(
        p=cfg.get_int("baseline", "p"),
        d=cfg.get_int("baseline", "d"),
        q=cfg.get_int("baseline", "q"),
        with_constant=cfg.get_bool("baseline", "constant"),
    )
    opt = OptimizerConfig(restarts=cfg.get_int("baseline", "restarts"),
                          seed=cfg.get_int("baseline", "seed"))
    converged = True
    note = ""
    try:
        fit = fit_mle(spec, returns, opt)
    except ConvergenceError as exc:
        if exc.partial is None:
            raise
        fit = exc.partial
        converged = False
        note = str(exc)
        print(f"warning: {exc}; reporting best parameters found", file=sys.stderr)
    fit = std_errors(fit, returns)

    report = build_fit_report(fit)
    (out / "fit-table.txt").write_text(report.to_text() + "\n", encoding="utf-8")
    (out / "fit-table.json").write_text(report.to_json() + "\n", encoding="utf-8")

    fut_returns = arima_forecast(fit, returns, horizon)
    predicted = from_returns(train_prices[-1], fut_returns, kind)[1:]

    # Both models are scored in the same [0,1] units: min-max over the
    # full series of this district.
    _, norm = normalize(series[:, None])
    val_mse = float(np.mean(
        (apply_normalization(predicted[:, None], norm)
         - apply_normalization(heldout[:, None], norm)) ** 2))

    # In-sample one-step view: subtract each innovation from its return.
    eps = innovations(fit.spec, fit.constant, fit.ar, fit.ma, returns)
    fitted_returns = returns - eps
    if kind == "log":
        fitted_prices = train_prices[:-1] * np.exp(fitted_returns)
    else:
        fitted_prices = train_prices[:-1] * (1.0 + fitted_returns)
    train_mse = float(np.mean(
        (apply_normalization(fitted_prices[:, None], norm)
         - apply_normalization(train_prices[1:][:, None], norm)) ** 2))

    heldout_months = matrix.months[m - horizon:]
    with open(out / "baseline-forecast.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("month,actual_price,predicted_price\n")
        for label, actual, pred in zip(heldout_months, heldout, predicted):
            fh.write(f"{label},{float(actual)!r},{float(pred)!r}\n")

    summary = {
        "district": district,
        "order": [spec.p, spec.d, spec.q],
        "constant": spec.with_constant,
        "return_kind": kind,
        "horizon": horizon,
        "train_months": int(m - horizon),
        "loglik": fit.loglik,
        "converged": converged,
        "note": note,
        "train_mse_normalized": train_mse,
        "val_mse_normalized": val_mse,
    }
    _write_json(out / "baseline-summary.json", summary)
    if cfg.get_bool("output", "figures"):
        from .figures import plot_baseline
        plot_baseline(matrix.months, series, m - horizon, predicted,
                      out / "baseline.png",
                      title=f"ARIMA({spec.p}, {spec.d}, {spec.q}) on {district}")
    cfg.write(out / "effective-config.ini")
    print(f"baseline: ARIMA({spec.p}, {spec.d}, {spec.q}) on {district}: "
          f"held-out normalized MSE {val_mse:.6f}; outputs in {out}")
    return EXIT_OK if converged else EXIT_CONVERGENCE


# -------------------------------------------------------------- forecast --

def cmd_forecast(args) -> int:
    cfg = _load_config(args)
    _apply_overrides(cfg, args, [
        ("checkpoint", "forecast", "checkpoint"),
        ("matrix", "forecast", "matrix"),
        ("steps", "forecast", "steps"),
    ])
    out = _resolve_out(args, cfg, "forecast")

    ckpt_path = cfg.get_opt_str("forecast", "checkpoint")
    matrix_path = cfg.get_opt_str("forecast", "matrix")
    if ckpt_path is None or matrix_path is None:
        raise UsageError("forecast needs --checkpoint and --matrix")
    steps = cfg.get_int("forecast", "steps")

    model, meta = load_checkpoint(ckpt_path)
    extras = meta.get("extras") or {}
    for key in ("normalization", "districts", "window"):
        if key not in extras:
            raise UsageError(f"checkpoint lacks the {key!r} record needed for forecasting")
    norm = NormalizationParams.from_dict(extras["normalization"])
    window = int(extras["window"])

    matrix = read_matrix_csv(matrix_path)
    if list(matrix.districts) != list(extras["districts"]):
        raise UsageError(
            "matrix districts do not match the checkpoint "
            f"({matrix.districts} vs {extras['districts']})")
    if len(matrix.months) < window:
        raise UsageError(f"matrix has {len(matrix.months)} months; "
                         f"the model needs a {window}-month history")

    history = matrix.values[-window:]
    predicted = predict_horizon(model, history, steps, norm)
    future = [add_months(matrix.months[-1], k + 1) for k in range(steps)]

    with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("district,month,predicted_price\n")
        for j, name in enumerate(matrix.districts):
            for k, label in enumerate(future):
                fh.write(f"{name},{label},{float(predicted[k, j])!r}\n")

    if cfg.get_bool("output", "figures"):
        from .figures import plot_forecast
        plot_forecast(matrix.months, matrix.values, future, predicted,
                      matrix.districts, out / "forecast.png")
    cfg.write(out / "effective-config.ini")
    print(f"forecast: {steps} month(s) x {len(matrix.districts)} district(s) "
          f"-> {out / 'predictions.csv'}")
    return EXIT_OK


# ------------------------------------------------------------- gradcheck --

def cmd_gradcheck(args) -> int:
    cfg = _load_config(args)
    _apply_overrides(cfg, args, [
        ("kind", "gradcheck", "kind"),
        ("hidden", "gradcheck", "hidden"),
        ("input_dim", "gradcheck", "input_dim"),
        ("window", "gradcheck", "window"),
        ("epsilon", "gradcheck", "epsilon"),
        ("tolerance", "gradcheck", "tolerance"),
        ("seed", "gradcheck", "seed"),
    ])
    out = _resolve_out(args, cfg, "gradcheck")

    kind = cfg.get("gradcheck", "kind")
    hidden = cfg.get_int_list("gradcheck", "hidden")
    input_dim = cfg.get_int("gradcheck", "input_dim")
    window_len = cfg.get_int("gradcheck", "window")
    seed = cfg.get_int("gradcheck", "seed")
    tolerance = cfg.get_float("gradcheck", "tolerance")

    model = build_model(kind, input_dim, input_dim, hidden, seed)
    rng = np.random.default_rng(seed)
    window = rng.uniform(0.0, 1.0, size=(window_len, input_dim))
    target = rng.uniform(0.0, 1.0, size=input_dim)
    report = grad_check(model, window, target,
                        epsilon=cfg.get_float("gradcheck", "epsilon"))

    passed = report.passed(tolerance)
    verdict = "PASS" if passed else "FAIL"
    text = (f"{verdict}: max relative discrepancy {report.max_discrepancy:.3e} "
            f"vs tolerance {tolerance:g}\n" + report.to_text() + "\n")
    (out / "gradcheck-report.txt").write_text(text, encoding="utf-8")
    cfg.write(out / "effective-config.ini")
    print(text, end="")
    return EXIT_OK if passed else EXIT_NUMERIC


# ----------------------------------------------------------------- sweep --

def _sweep_job(values: dict, out_dir: str, units: int) -> dict:
    values = {s: dict(kv) for s, kv in values.items()}
    values["model"]["hidden"] = str(units)
    try:
        summary = _training_job(values, out_dir)
        return {"units": units, "ok": True, "summary": summary}
    except PricecastError as exc:
        return {"units": units, "ok": False, "error": str(exc),
                "exit_code": exc.exit_code}


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    _apply_overrides(cfg, args, [
        ("matrix", "sweep", "matrix"),
        ("units", "sweep", "units"),
        ("workers", "sweep", "workers"),
        ("kind", "model", "kind"),
        ("district", "train", "district"),
        ("learning_rate", "train", "learning_rate"),
        ("steps", "train", "total_steps"),
        ("batch_size", "train", "batch_size"),
        ("eval_every", "train", "eval_every"),
        ("seed", "train", "seed"),
        ("window", "data", "window"),
        ("val_samples", "data", "val_samples"),
        ("normalization", "data", "normalization"),
    ])
    out = _resolve_out(args, cfg, "sweep")

    matrix_path = cfg.get_opt_str("sweep", "matrix") or cfg.get_opt_str("train", "matrix")
    if matrix_path is None:
        raise UsageError("a price matrix is required (--matrix or [sweep] matrix)")
    cfg.override("train", "matrix", matrix_path)
    units = cfg.get_int_list("sweep", "units")
    if len(set(units)) != len(units):
        raise UsageError("sweep units must be distinct")
    workers = cfg.get_int("sweep", "workers")
    if workers < 1:
        raise UsageError("workers must be at least 1")

    jobs = [(cfg._values, str(out / f"units-{u}"), u) for u in units]
    if workers == 1:
        results = [_sweep_job(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_sweep_job, *job) for job in jobs]
            results = [f.result() for f in futures]

    ok = [r for r in results if r["ok"]]
    with open(out / "sweep-metrics.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("units,best_step,best_val_mse,final_val_mse\n")
        for r in ok:
            s = r["summary"]
            fh.write(f"{r['units']},{s['best_step']},{s['best_val_mse']!r},"
                     f"{s['final_val_mse']!r}\n")
    _write_json(out / "sweep-summary.json", {"units": units, "runs": results})
    if ok and cfg.get_bool("output", "figures"):
        from .figures import plot_sweep
        plot_sweep([r["units"] for r in ok],
                   [r["summary"]["best_val_mse"] for r in ok],
                   [r["summary"]["final_val_mse"] for r in ok],
                   out / "sweep.png")
    cfg.write(out / "effective-config.ini")

    for r in results:
        if r["ok"]:
            s = r["summary"]
            print(f"sweep: units={r['units']} best val MSE {s['best_val_mse']:.6f} "
                  f"at step {s['best_step']}")
        else:
            print(f"sweep: units={r['units']} FAILED: {r['error']}", file=sys.stderr)
    if len(ok) != len(results):
        return EXIT_CONVERGENCE
    print(f"sweep: outputs in {out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser --

def _common_flags(sub):
    sub.add_argument("--config", help="run configuration file (INI)")
    sub.add_argument("--out", help="output directory (default <root>/<command>)")
    sub.add_argument("--no-figures", action="store_true",
                     help="skip PNG rendering next to the delimited outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pricecast",
        description="District house-price forecasting: recurrent models vs an ARMA baseline.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", help="aggregate raw transactions into a monthly price matrix")
    _common_flags(p)
    p.add_argument("input", nargs="?", help="transaction CSV (date,district,price)")
    p.add_argument("--start", help="first calendar month YYYY-MM (with --end)")
    p.add_argument("--end", help="last calendar month YYYY-MM (with --start)")
    p.add_argument("--gap-policy", choices=sorted(_GAP_POLICIES),
                   dest="gap_policy", help="how to resolve empty cells")
    p.add_argument("--alt-date-format", dest="alt_date_format",
                   help="fallback strptime pattern for dates")
    p.set_defaults(func=cmd_ingest)

    p = subs.add_parser("synth", help="generate a deterministic synthetic transaction CSV")
    _common_flags(p)
    p.add_argument("--districts")
    p.add_argument("--months")
    p.add_argument("--start")
    p.add_argument("--base-price", dest="base_price")
    p.add_argument("--district-spread", dest="district_spread")
    p.add_argument("--trend")
    p.add_argument("--amplitude")
    p.add_argument("--period")
    p.add_argument("--phase-step", dest="phase_step")
    p.add_argument("--noise")
    p.add_argument("--txns-per-cell", dest="txns_per_cell")
    p.add_argument("--missing-prob", dest="missing_prob")
    p.add_argument("--seasonal-mode", dest="seasonal_mode",
                   choices=["additive", "multiplicative"])
    p.add_argument("--seed")
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("train", help="train a recurrent model on a price matrix")
    _common_flags(p)
    p.add_argument("--matrix")
    p.add_argument("--district")
    p.add_argument("--kind", choices=["elman", "lstm"])
    p.add_argument("--hidden", help="comma-separated layer widths, e.g. 64,64,64")
    p.add_argument("--learning-rate", dest="learning_rate")
    p.add_argument("--steps")
    p.add_argument("--batch-size", dest="batch_size")
    p.add_argument("--eval-every", dest="eval_every")
    p.add_argument("--seed")
    p.add_argument("--clip", help="global gradient-norm clip threshold")
    p.add_argument("--stateful", action="store_true",
                   help="carry recurrent state between chronological batches")
    p.add_argument("--shuffle-epochs", dest="shuffle_epochs", action="store_true",
                   help="stateless mode: reshuffled epochs instead of resampling")
    p.add_argument("--lanes")
    p.add_argument("--lane-steps", dest="lane_steps")
    p.add_argument("--lane-train-steps", dest="lane_train_steps")
    p.add_argument("--window")
    p.add_argument("--val-samples", dest="val_samples")
    p.add_argument("--normalization", choices=["per-district", "global"])
    p.add_argument("--stats-rows", dest="stats_rows",
                   help="rows used for normalization statistics (leakage-safe mode)")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("baseline", help="fit the ARMA baseline and score its forecast")
    _common_flags(p)
    p.add_argument("--matrix")
    p.add_argument("--district")
    p.add_argument("--p")
    p.add_argument("--d")
    p.add_argument("--q")
    p.add_argument("--no-constant", dest="no_constant", action="store_true")
    p.add_argument("--horizon")
    p.add_argument("--restarts")
    p.add_argument("--seed")
    p.add_argument("--return-kind", dest="return_kind", choices=["simple", "log"])
    p.set_defaults(func=cmd_baseline)

    p = subs.add_parser("forecast", help="roll a trained model past the end of its history")
    _common_flags(p)
    p.add_argument("--checkpoint")
    p.add_argument("--matrix")
    p.add_argument("--steps")
    p.set_defaults(func=cmd_forecast)

    p = subs.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    _common_flags(p)
    p.add_argument("--kind", choices=["elman", "lstm"])
    p.add_argument("--hidden")
    p.add_argument("--input-dim", dest="input_dim")
    p.add_argument("--window")
    p.add_argument("--epsilon")
    p.add_argument("--tolerance")
    p.add_argument("--seed")
    p.set_defaults(func=cmd_gradcheck)

    p = subs.add_parser("sweep", help="train one model per hidden width and compare")
    _common_flags(p)
    p.add_argument("--matrix")
    p.add_argument("--units", help="comma-separated widths, e.g. 4,16,64,256")
    p.add_argument("--workers")
    p.add_argument("--kind", choices=["elman", "lstm"])
    p.add_argument("--district")
    p.add_argument("--learning-rate", dest="learning_rate")
    p.add_argument("--steps")
    p.add_argument("--batch-size", dest="batch_size")
    p.add_argument("--eval-every", dest="eval_every")
    p.add_argument("--seed")
    p.add_argument("--window")
    p.add_argument("--val-samples", dest="val_samples")
    p.add_argument("--normalization", choices=["per-district", "global"])
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PricecastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
