"""Single runs and parameter sweeps, written to CSV and JSON.

Every output is a deterministic function of the configuration: numbers are
rendered with 17 significant digits, no timestamps are written, and sweep
cells draw from streams keyed by ``(seed, N, E_index, replicate)``. A
single run uses the key ``(seed, N, 0, 0)``, so a one-cell sweep reproduces
it exactly.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import theory
from .analysis import (
    SweepPoint,
    build_collapse,
    group_by_N,
    ratio_vs_N,
    regime_fits,
)
from .config import RunConfig, SweepConfig
from .engine import Simulation
from .model import InvariantError
from .observables import ipr
from .rng import RngStream

logger = logging.getLogger(__name__)

DRIFT_GATE = 1e-9

SPECTRUM_COLUMNS = ("i", "omega", "mean_energy", "planck_prediction", "equipartition_prediction")
SWEEP_COLUMNS = ("N", "E", "e_index", "replicate", "mode", "seed", "collisions", "mean_E0",
                 "E_over_E0", "l", "xi", "l_over_N", "xi_over_N", "spectrum")
COLLAPSE_COLUMNS = ("x", "y", "N", "E")


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in r])


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def simulate(cfg: RunConfig, e_index: int = 0, replicate: int = 0, with_snapshots: bool = False):
    """Run one configuration; returns ``(simulation, report)``."""
    params = cfg.model_params()
    rng = RngStream.for_cell(cfg.seed, params.N, e_index, replicate)
    sim = Simulation.start(params, cfg.initial_condition(), rng, cfg.rounding)

    def log_snapshot(s):
        logger.info("t=%d <E0>=%.6g", s.t, s.mean_E0)

    report = sim.run(
        cfg.collisions,
        snapshot_ratio=cfg.snapshot_ratio if with_snapshots else None,
        burn_in=cfg.burn_in,
        on_snapshot=log_snapshot,
    )
    if not report.drift < DRIFT_GATE:
        raise InvariantError(f"conservation drift {report.drift:.3g} exceeds {DRIFT_GATE:g}")
    return sim, report


def run_command(cfg: RunConfig, out_dir: str | Path | None = None) -> dict:
    """Single run: spectrum.csv, convergence.csv, summary.json, checkpoint.json."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = cfg.model_params()
    sim, report = simulate(cfg, with_snapshots=True)
    mean_E0, mean_E = report.stats.estimator(cfg.averaging == "time")

    omegas = params.omegas()
    beta = theory.solve_beta(params.E_total, params.alpha)
    planck = theory.planck_energy(omegas, beta)
    eq = theory.equipartition_energy(params.E_total, params.N)
    _write_csv(out / "spectrum.csv", SPECTRUM_COLUMNS,
               ((i + 1, omegas[i], mean_E[i], planck[i], eq) for i in range(params.N)))

    modes = [m for m in cfg.convergence_modes if m <= params.N]
    _write_csv(out / "convergence.csv", ["t", "mean_E0", *(f"mean_E_{m}" for m in modes)],
               ([s.t, s.mean_E0, *(s.mean_E[m - 1] for m in modes)] for s in report.snapshots))

    summary = {
        "N": params.N,
        "E": fmt(params.E_total),
        "mode": params.mode,
        "seed": cfg.seed,
        "collisions": cfg.collisions,
        "burn_in": cfg.burn_in,
        "initial": cfg.initial,
        "rounding": cfg.rounding,
        "averaging": cfg.averaging,
        "mean_E0": fmt(mean_E0),
        "mean_E": [fmt(x) for x in mean_E],
        "mean_field": fmt(math.fsum(mean_E.tolist())),
        "E_over_E0": fmt(params.E_total / mean_E0),
        "l": fmt(ipr(mean_E)),
        "xi": fmt(theory.xi_theoretical(params.E_total, params.alpha)),
        "beta": fmt(beta),
        "conservation_drift": fmt(report.drift),
    }
    _write_json(out / "summary.json", summary)
    sim.save_checkpoint(out / "checkpoint.json")
    return summary


def _run_cell(args) -> SweepPoint:
    cfg, e_index, replicate = args
    params = cfg.model_params()
    _, report = simulate(cfg, e_index, replicate)
    mean_E0, mean_E = report.stats.estimator(cfg.averaging == "time")
    return SweepPoint(
        N=params.N,
        E_total=params.E_total,
        mode=params.mode,
        seed=cfg.seed,
        collisions=cfg.collisions,
        mean_E0=mean_E0,
        l=ipr(mean_E),
        xi=theory.xi_theoretical(params.E_total, params.alpha),
        spectrum=mean_E,
        e_index=e_index,
        replicate=replicate,
    )


def _safe_cell(args):
    try:
        return _run_cell(args), None
    except Exception as exc:  # recorded per cell, reported after the sweep
        return None, f"{type(exc).__name__}: {exc}"


def sweep_cells(cfg: SweepConfig) -> list:
    return [
        (cfg.cell_config(N, E), e_idx, rep)
        for N in cfg.N_values
        for e_idx, E in enumerate(cfg.E_values)
        for rep in range(cfg.seeds_per_cell)
    ]


def run_sweep(cfg: SweepConfig) -> tuple[list[SweepPoint], list[dict]]:
    """Execute every cell; results come back in cell order whatever the worker count."""
    cells = sweep_cells(cfg)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(_safe_cell, cells))
    else:
        results = [_safe_cell(c) for c in cells]
    points, failures = [], []
    for (cell_cfg, e_idx, rep), (pt, err) in zip(cells, results):
        if err is None:
            points.append(pt)
            logger.info("cell N=%d E=%g rep=%d done", cell_cfg.N, cell_cfg.E, rep)
        else:
            failures.append({"N": cell_cfg.N, "E": fmt(cell_cfg.E), "replicate": rep, "error": err})
            logger.error("cell N=%d E=%g rep=%d failed: %s", cell_cfg.N, cell_cfg.E, rep, err)
    return points, failures


def write_sweep_csv(path: Path, points: Sequence[SweepPoint]) -> None:
    _write_csv(path, SWEEP_COLUMNS, (
        (p.N, p.E_total, p.e_index, p.replicate, p.mode, p.seed, p.collisions, p.mean_E0,
         p.ratio, p.l, p.xi, p.l / p.N, p.xi / p.N, " ".join(fmt(x) for x in p.spectrum))
        for p in points
    ))


def read_sweep_csv(path: str | Path) -> list[SweepPoint]:
    points = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            points.append(SweepPoint(
                N=int(row["N"]),
                E_total=float(row["E"]),
                mode=row["mode"],
                seed=int(row["seed"]),
                collisions=int(row["collisions"]),
                mean_E0=float(row["mean_E0"]),
                l=float(row["l"]),
                xi=float(row["xi"]),
                spectrum=np.array([float(x) for x in row["spectrum"].split()]),
                e_index=int(row["e_index"]),
                replicate=int(row["replicate"]),
            ))
    return points


def _clean(obj):
    if isinstance(obj, float):
        return fmt(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def analyze_points(points: Sequence[SweepPoint], alpha: float | None = None) -> tuple[dict, object]:
    """Fits and collapse table for a set of sweep points."""
    by_N = group_by_N(points)
    per_N = {N: regime_fits(pts, N) for N, pts in sorted(by_N.items())}
    energies = sorted({p.E_total for p in points})
    fits: dict = {"per_N": per_N}
    sigmas = [f["sigma"] for f in per_N.values() if "sigma" in f]
    if sigmas:
        fits["sigma_mean"] = float(np.mean(sigmas))
    if alpha is not None:
        fits["sigma_continuum"] = theory.continuum_sigma(alpha)
    fits["ratio_vs_N"] = {fmt(E): ratio_vs_N(points, E) for E in energies}
    largest = max(by_N)
    fits["plateau"] = {fmt(E): dict(ratio_vs_N(points, E)).get(largest) for E in energies}
    collapse = None
    if len(points) >= 2:
        collapse = build_collapse(points)
        fits["collapse_spread"] = collapse.spread
        fits["collapse_max_y"] = float(collapse.y.max())
    return _clean(fits), collapse


def write_analysis(out: Path, points: Sequence[SweepPoint], alpha: float | None = None) -> dict:
    fits, collapse = analyze_points(points, alpha)
    if collapse is not None:
        _write_csv(out / "collapse.csv", COLLAPSE_COLUMNS, collapse.rows)
    _write_json(out / "fits.json", fits)
    return fits


def sweep_command(cfg: SweepConfig, out_dir: str | Path | None = None) -> tuple[list[SweepPoint], list[dict]]:
    """Sweep grid: sweep.csv, collapse.csv, fits.json (and failures.json if any cell failed)."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    points, failures = run_sweep(cfg)
    write_sweep_csv(out / "sweep.csv", points)
    if points:
        write_analysis(out, points, math.sqrt(cfg.k / cfg.c))
    if failures:
        _write_json(out / "failures.json", failures)
    return points, failures


def analyze_command(sweep_csv: str | Path, out_dir: str | Path | None = None, alpha: float | None = None) -> dict:
    """Re-run the analysis on an existing sweep.csv."""
    points = read_sweep_csv(sweep_csv)
    if not points:
        raise ValueError(f"{sweep_csv} holds no sweep points")
    out = Path(out_dir) if out_dir else Path(sweep_csv).parent
    out.mkdir(parents=True, exist_ok=True)
    return write_analysis(out, points, alpha)

