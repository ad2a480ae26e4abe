"""Experiment driver: initial data, FGA-vs-reference errors, slope fits, tables."""
from __future__ import annotations

import csv
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import fga, io
from .config import RunConfig
from .grid import Grid, GridMismatchError, ResolutionError, WaveField
from .spectral import run_reference

__all__ = [
    "ErrorRecord",
    "SlopeFit",
    "wkb_initial",
    "l2_error",
    "fit_slope",
    "reference_solution",
    "run_compare",
    "error_table",
    "convergence_sweep",
    "write_tables",
    "TABLE_ALPHAS",
]

logger = logging.getLogger(__name__)

TABLE_ALPHAS = (1.1, 1.3, 1.5, 1.7, 1.9)


@dataclass
class ErrorRecord:
    alpha: float
    eps: float
    delta: float
    l2_abs: float
    l2_rel: float
    runtime_fga_s: float = 0.0
    runtime_ref_s: float = 0.0

    def __post_init__(self):
        if self.l2_abs < 0 or self.l2_rel < 0:
            raise ValueError("L2 errors are non-negative")


@dataclass
class SlopeFit:
    alpha: float
    points: List[tuple]
    slope: float
    intercept: float

    def __post_init__(self):
        if len(self.points) < 3:
            raise ValueError("a slope fit needs at least 3 points")


def wkb_initial(example: str, eps: float, grid: Grid) -> WaveField:
    """WKB initial data of the two benchmark problems.

    ``Ex1D``: ``sqrt(64/pi) exp(-64 (x-1)^2) exp(i x / eps)``.
    ``Ex2D``: ``(64/pi) exp(-64 |x - (1,1)|^2) exp(i (x_2 - 1) / eps)``.
    """
    grid.check_resolves(eps, "initial data")
    if example == "Ex1D":
        if grid.dim != 1:
            raise ValueError("Ex1D needs a 1D grid")
        x = grid.axes[0]
        values = math.sqrt(64.0 / math.pi) * np.exp(-64.0 * (x - 1.0) ** 2) * np.exp(1j * x / eps)
    elif example == "Ex2D":
        if grid.dim != 2:
            raise ValueError("Ex2D needs a 2D grid")
        x1, x2 = grid.mesh()
        values = (64.0 / math.pi) * np.exp(-64.0 * ((x1 - 1.0) ** 2 + (x2 - 1.0) ** 2)) \
            * np.exp(1j * (x2 - 1.0) / eps)
    else:
        raise ValueError(f"unknown example {example!r}")
    return WaveField(grid, values)


def l2_error(a: WaveField, b: WaveField):
    """Discrete ``(|a - b|_2, |a - b|_2 / |b|_2)``; the relative part is ``inf`` when ``b = 0``."""
    if a.grid != b.grid:
        raise GridMismatchError(f"grids differ: {a.grid} vs {b.grid}")
    w = a.grid.cell_volume
    err = math.sqrt(float(np.sum(np.abs(a.values - b.values) ** 2)) * w)
    ref = math.sqrt(float(np.sum(np.abs(b.values) ** 2)) * w)
    rel = err / ref if ref > 0 else (0.0 if err == 0 else math.inf)
    return err, rel


def fit_slope(neg_log2_eps: Sequence[float], log2_err: Sequence[float], alpha: float = float("nan")) -> SlopeFit:
    """Least-squares line ``log2(err) = slope * (-log2 eps) + intercept``.

    A positive slope ``s`` means the error decays like ``eps**s``; the sign
    is flipped so that a first-order method reports ``slope == 1``.
    """
    xs = np.asarray(neg_log2_eps, dtype=float)
    ys = np.asarray(log2_err, dtype=float)
    M = np.stack([xs, np.ones_like(xs)], axis=1)
    (m, c), *_ = np.linalg.lstsq(M, ys, rcond=None)
    return SlopeFit(alpha=alpha, points=list(zip(xs.tolist(), ys.tolist())), slope=float(-m),
                    intercept=float(c))


def reference_solution(psi0: WaveField, config: RunConfig, cache_dir=None) -> WaveField:
    """Spectral reference at ``config.final_time``; cached as ``.npy`` when ``cache_dir`` is set."""
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"ref_{config.reference_key()}.npy"
        if path.exists():
            values = np.load(path)
            if values.shape == psi0.grid.n:
                return WaveField(psi0.grid, values)
    ref = run_reference(psi0, config.potential_model(), config.eps, config.alpha,
                        config.final_time, config.ref_dt)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.save(path, ref.values)
    return ref


def run_compare(config: RunConfig, cache_dir=None, save_fields: bool = False):
    """FGA and reference on the same grid; returns ``(ErrorRecord, FgaSolution, reference)``."""
    grid = fga.output_grid(config)
    psi0 = wkb_initial(config.example, config.eps, grid)
    t0 = time.perf_counter()
    sol = fga.solve(psi0, config)
    t1 = time.perf_counter()
    ref = reference_solution(psi0, config, cache_dir)
    t2 = time.perf_counter()
    err, rel = l2_error(sol.field, ref)
    rec = ErrorRecord(alpha=config.alpha, eps=config.eps, delta=config.delta_value, l2_abs=err,
                      l2_rel=rel, runtime_fga_s=t1 - t0, runtime_ref_s=t2 - t1)
    if save_fields:
        out = Path(config.output_dir)
        tag = f"{config.example}_a{config.alpha:g}_e{config.eps_pow}"
        io.write_field(sol.field, out / f"field_fga_{tag}")
        io.write_field(ref, out / f"field_ref_{tag}")
    logger.info("alpha=%g eps=2^-%d: L2 error %.3e (rel %.3e)", config.alpha, config.eps_pow, err, rel)
    return rec, sol, ref


def _cell(args):
    config, cache_dir = args
    try:
        rec, sol, _ = run_compare(config, cache_dir)
        return config.alpha, config.eps_pow, rec, sol.diagnostics, None
    except Exception as exc:  # reported per cell
        return config.alpha, config.eps_pow, None, None, f"{type(exc).__name__}: {exc}"


def error_table(alphas: Iterable[float], eps_pows: Sequence[int], delta_exponent: float,
                config: RunConfig, workers: Optional[int] = None, cache_dir=None):
    """Run every ``(alpha, eps)`` cell; returns ``(records, failures)`` keyed by ``(alpha, k)``.

    Cells run on a process pool when more than one worker is available;
    results are sorted by key, so the output does not depend on scheduling.
    """
    alphas = [float(a) for a in alphas]
    jobs = [(config.replace(alpha=a, eps_pow=int(k), delta_exponent=delta_exponent, delta=None), cache_dir)
            for a in alphas for k in eps_pows]
    nw = fga.worker_count(workers or config.workers)
    if nw > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(nw, len(jobs))) as pool:
            results = list(pool.map(_cell, jobs))
    else:
        results = [_cell(j) for j in jobs]
    results.sort(key=lambda r: (r[0], r[1]))
    records = {(a, k): rec for a, k, rec, _, msg in results if rec is not None}
    failures = {(a, k): msg for a, k, _, _, msg in results if msg is not None}
    return records, failures


def convergence_sweep(alphas: Iterable[float], eps_pows: Sequence[int], delta_exponent: float,
                      config: RunConfig, workers: Optional[int] = None, cache_dir=None):
    """Error matrix over ``alphas x eps`` and a per-alpha slope fit.

    ``eps_pows`` are the exponents ``k`` of ``eps = 2**-k``; they must be
    strictly increasing (eps strictly decreasing) and at least 3 long.
    Returns ``(fits, records, failures)`` where ``failures`` maps
    ``(alpha, k)`` to an error message; alphas with fewer than 3 successful
    cells get no fit.
    """
    eps_pows = [int(k) for k in eps_pows]
    if len(eps_pows) < 3 or any(b <= a for a, b in zip(eps_pows, eps_pows[1:])):
        raise ValueError("eps_pows must be strictly increasing with at least 3 entries")
    alphas = [float(a) for a in alphas]
    records, failures = error_table(alphas, eps_pows, delta_exponent, config, workers, cache_dir)
    fits = []
    for a in alphas:
        ks = [k for k in eps_pows if (a, k) in records]
        if len(ks) < 3:
            continue
        fits.append(fit_slope(ks, [math.log2(records[(a, k)].l2_abs) for k in ks], alpha=a))
    return fits, records, failures


def write_tables(records: dict, fits: List[SlopeFit], out_dir, failures: Optional[dict] = None) -> dict:
    """Write ``errors.csv``, ``table.csv``, ``slopes.csv`` and ``decay.dat``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    failures = failures or {}
    keys = sorted(set(records) | set(failures))
    alphas = sorted({a for a, _ in keys})
    pows = sorted({k for _, k in keys})
    with open(out / "errors.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "eps", "delta", "l2_abs", "l2_rel", "runtime_fga_s", "runtime_ref_s"])
        for key in sorted(records):
            r = records[key]
            w.writerow([r.alpha, r.eps, r.delta, f"{r.l2_abs:.6e}", f"{r.l2_rel:.6e}",
                        f"{r.runtime_fga_s:.3f}", f"{r.runtime_ref_s:.3f}"])
    with open(out / "table.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha"] + [f"eps=1/2^{k}" for k in pows])
        for a in alphas:
            row = [f"{a:g}"]
            for k in pows:
                if (a, k) in records:
                    row.append(f"{records[(a, k)].l2_abs:.2e}")
                else:
                    row.append("FAILED" if (a, k) in failures else "")
            w.writerow(row)
    with open(out / "slopes.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "slope", "intercept", "n_points", "partial"])
        for f in fits:
            partial = any((f.alpha, k) in failures for k in pows)
            w.writerow([f"{f.alpha:g}", f"{f.slope:.6f}", f"{f.intercept:.6f}", len(f.points), int(partial)])
    # gnuplot: one index block per alpha
    with open(out / "decay.dat", "w") as fh:
        for f in fits:
            fh.write(f"# alpha={f.alpha:g} slope={f.slope:.4f}\n# -log2(eps) log2(err) fit\n")
            for x, y in f.points:
                fh.write(f"{x:g} {y:.8f} {-f.slope * x + f.intercept:.8f}\n")
            fh.write("\n\n")
    return {"errors": out / "errors.csv", "table": out / "table.csv", "slopes": out / "slopes.csv",
            "decay": out / "decay.dat"}
