"""End-to-end ``solve`` and ``study`` drivers behind the CLI."""

from __future__ import annotations

import logging
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .greedy import run
from .problems import generate_candidates, predicted_exponent, test_grid
from .reports import atomic_write_text, csv_text, dump_json, trace_rows, versions
from .study import default_window, error_curves, fit_slope, power_products, windowed_min

log = logging.getLogger(__name__)

__all__ = ["solve", "study", "refit_report", "fit_curves"]


def _setup(cfg: RunConfig):
    spec = cfg.make_problem()
    kernel = cfg.make_kernel()
    try:
        spec.validate(kernel)
        cands = generate_candidates(spec, cfg.counts(spec), cfg.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    grid = test_grid(spec, cfg.test_resolution)
    return spec, kernel, cands, grid


def solve(cfg: RunConfig, out: str | Path | None = None) -> dict:
    """One greedy run; writes ``trace.csv`` and ``summary.json`` into ``out``."""
    if len(cfg.betas) != 1:
        raise ConfigError("solve runs a single beta; use study for several")
    beta = cfg.betas[0]
    spec, kernel, cands, grid = _setup(cfg)
    t0 = time.perf_counter()
    state, records = run(kernel, spec, cands, cfg.greedy(beta), stop_on_breakdown=True)
    t1 = time.perf_counter()
    linf, l2 = error_curves(state, spec.exact_solution, grid)
    t2 = time.perf_counter()
    header, rows = trace_rows(records, cands, linf, l2)
    summary = {
        "kind": "solve",
        "problem": spec.describe(),
        "kernel": kernel.to_config(),
        "beta": beta,
        "n": state.n,
        "stop_reason": state.stop_reason,
        "breakdown": state.breakdown,
        "final_linf_error": float(linf[-1]),
        "final_l2_error": float(l2[-1]),
        "test_points": len(grid),
        "candidates": cands.counts(),
        "prediction": predicted_exponent(spec, kernel, beta).to_dict(),
        "beta_gt1_power_clamp": cfg.power_tol if beta > 1 else None,
        "fallback_steps": sum(r.fallback for r in records),
        "selected": [f.to_dict() for f in state.selected_functionals],
        "timings": {"greedy_s": t1 - t0, "errors_s": t2 - t1},
        "config": cfg.to_dict(),
        "versions": versions(),
    }
    out = Path(out or cfg.out)
    atomic_write_text(out / "trace.csv", csv_text(header, rows))
    atomic_write_text(out / "summary.json", dump_json(summary))
    return summary


def fit_curves(curves: dict, window) -> dict:
    """Log-log slopes of the stored curves over ``n in [n_lo, n_hi]``."""
    lo, hi = window
    slopes = {}
    for key, offset in (("windowed_min", 1), ("linf", 0), ("pn", 1)):
        vals = np.asarray(curves[key], dtype=float)
        ns = np.arange(offset, offset + len(vals))
        mask = (ns >= lo) & (ns <= hi)
        try:
            slopes[key] = fit_slope(ns[mask], vals[mask])[0]
        except ValueError:
            slopes[key] = None
    return slopes


def study(cfg: RunConfig, out: str | Path | None = None) -> dict:
    """Convergence study over ``cfg.betas``; writes JSON and CSV reports into ``out``."""
    spec, kernel, cands, grid = _setup(cfg)
    window = tuple(cfg.fit_window) if cfg.fit_window else default_window(spec.n_pieces, cfg.n_max)
    if window[1] > cfg.n_max // 2:
        raise ConfigError(f"fit window upper end {window[1]} exceeds n_max/2 = {cfg.n_max // 2}")
    runs = []
    for beta in cfg.betas:
        t0 = time.perf_counter()
        state, records = run(kernel, spec, cands, cfg.greedy(beta), stop_on_breakdown=True)
        t1 = time.perf_counter()
        linf, l2 = error_curves(state, spec.exact_solution, grid)
        t2 = time.perf_counter()
        curves = {
            "linf": linf.tolist(),
            "l2": l2.tolist(),
            "windowed_min": windowed_min(linf).tolist(),
            "pn": power_products(records).tolist(),
            "selection_power": [r.power for r in records],
        }
        pred = predicted_exponent(spec, kernel, beta)
        slopes = fit_curves(curves, window)
        log.info("beta=%g: n=%d, E slope %s (predicted %.3f)", beta, state.n, slopes["windowed_min"],
                 pred.predicted_exponent)
        runs.append({
            "beta": beta,
            "n": state.n,
            "stop_reason": state.stop_reason,
            "breakdown": state.breakdown,
            "prediction": pred.to_dict(),
            "slopes": slopes,
            "predicted": {
                "windowed_min": pred.predicted_exponent,
                "linf": pred.predicted_exponent,
                "pn": pred.pn_exponent,
            },
            "curves": curves,
            "selected": [f.to_dict() for f in state.selected_functionals],
            "timings": {"greedy_s": t1 - t0, "errors_s": t2 - t1},
        })
    report = {
        "kind": "study",
        "problem": spec.describe(),
        "kernel": kernel.to_config(),
        "fit_window": list(window),
        "test_points": len(grid),
        "candidates": cands.counts(),
        "runs": runs,
        "config": cfg.to_dict(),
        "versions": versions(),
    }
    out = Path(out or cfg.out)
    atomic_write_text(out / "study.json", dump_json(report))
    atomic_write_text(out / "study_summary.csv", csv_text(*_summary_table(report)))
    for r in runs:
        atomic_write_text(out / f"curves_beta_{r['beta']:g}.csv", csv_text(*_curve_table(r)))
    return report


def refit_report(report: dict) -> list[dict]:
    """Recompute slopes from a (re-read) study report."""
    return [fit_curves(r["curves"], report["fit_window"]) for r in report["runs"]]


def _summary_table(report: dict):
    header = ["beta", "quantity", "fitted_slope", "predicted", "predicted_trace_order", "n_lo", "n_hi"]
    lo, hi = report["fit_window"]
    rows = []
    for r in report["runs"]:
        pred = r["prediction"]
        trace = {"windowed_min": pred["trace_predicted_exponent"], "linf": pred["trace_predicted_exponent"],
                 "pn": pred["trace_pn_exponent"]}
        for key in ("windowed_min", "linf", "pn"):
            slope = r["slopes"][key]
            rows.append([r["beta"], key, "" if slope is None else slope, r["predicted"][key], trace[key], lo, hi])
    return header, rows


def _curve_table(r: dict):
    header = ["n", "linf_error", "l2_error", "windowed_min", "pn"]
    c = r["curves"]
    rows = []
    for n in range(len(c["linf"])):
        em = c["windowed_min"][n - 1] if 1 <= n <= len(c["windowed_min"]) else ""
        pn = c["pn"][n - 1] if 1 <= n <= len(c["pn"]) else ""
        rows.append([n, c["linf"][n], c["l2"][n], em, pn])
    return header, rows
