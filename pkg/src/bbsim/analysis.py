"""Post-processing of sweeps: power-law fits, crossover detection, scaling collapse."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class AnalysisError(ValueError):
    pass


class PowerLawFit(NamedTuple):
    exponent: float
    prefactor: float
    residual: float


@dataclass
class SweepPoint:
    N: int
    E_total: float
    mode: str
    seed: int
    collisions: int
    mean_E0: float
    l: float
    xi: float
    spectrum: np.ndarray = field(default_factory=lambda: np.zeros(0))
    e_index: int = 0
    replicate: int = 0

    @property
    def ratio(self) -> float:
        """``E / <E0>``: total energy in units of the particle temperature."""
        return self.E_total / self.mean_E0


def fit_power_law(points: Iterable[tuple[float, float]]) -> PowerLawFit:
    """Least-squares line through ``(log T, log E)``; ``E = prefactor * T**exponent``."""
    pts = sorted((float(t), float(e)) for t, e in points)
    if len(pts) < 3:
        raise AnalysisError("power-law fit needs at least 3 points")
    T = np.array([p[0] for p in pts])
    E = np.array([p[1] for p in pts])
    if np.any(T <= 0) or np.any(E <= 0):
        raise AnalysisError("power-law fit needs strictly positive data")
    x, y = np.log(T), np.log(E)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise AnalysisError("power-law fit is degenerate: all T equal")
    slope = float(np.sum((x - xm) * (y - ym))) / sxx
    icpt = ym - slope * xm
    res = math.sqrt(float(np.mean((y - (icpt + slope * x)) ** 2)))
    return PowerLawFit(slope, math.exp(icpt), res)


def unit_slope_prefactor(points: Iterable[tuple[float, float]]) -> float:
    """Best ``a`` in ``E = a * T`` on log scale: geometric mean of ``E / T``."""
    r = [math.log(e / t) for t, e in points]
    if not r:
        raise AnalysisError("no points")
    return math.exp(sum(r) / len(r))


def spectrum_distance(measured: Sequence[float], reference: Sequence[float]) -> float:
    """Relative RMS distance ``sqrt(sum (m - r)**2 / sum r**2)``."""
    m = np.asarray(measured, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    if m.shape != r.shape:
        raise AnalysisError(f"length mismatch: {m.shape} vs {r.shape}")
    rmax = float(np.max(np.abs(r))) if r.size else 0.0
    if rmax == 0.0:
        raise AnalysisError("reference spectrum is all zero")
    d = m - r
    dmax = float(np.max(np.abs(d)))
    if dmax == 0.0:
        return 0.0
    # each sum is scaled by its largest entry so squares cannot underflow
    num = math.sqrt(math.fsum(((d / dmax) ** 2).tolist()))
    den = math.sqrt(math.fsum(((r / rmax) ** 2).tolist()))
    return (dmax / rmax) * (num / den)


def local_slopes(points: Iterable[tuple[float, float]], window: int = 4) -> list[tuple[float, float]]:
    """Sliding-window log-log slopes of E vs T as ``(window centre E, slope)``.

    Points are ordered by E; the centre is the geometric mean of the window's E.
    """
    pts = sorted(((float(t), float(e)) for t, e in points), key=lambda p: p[1])
    if window < 2:
        raise AnalysisError("window must hold at least 2 points")
    out = []
    for k in range(len(pts) - window + 1):
        w = pts[k:k + window]
        fit = fit_power_law(w) if window >= 3 else _two_point(w)
        centre = math.exp(sum(math.log(e) for _, e in w) / window)
        out.append((centre, fit.exponent))
    return out


def _two_point(w):
    (t1, e1), (t2, e2) = w
    s = math.log(e2 / e1) / math.log(t2 / t1)
    return PowerLawFit(s, e1 / t1 ** s, 0.0)


def detect_crossover(points: Iterable[tuple[float, float]], threshold: float = 1.5, window: int = 4) -> float | None:
    """Energy at which the local log-log slope of E vs T first drops through ``threshold``.

    ``points`` are ``(T, E)`` pairs at fixed N, e.g. ``(<E0>, E_total)``.
    The crossing is interpolated linearly in log E between window centres.
    Returns None when the slopes never cross the threshold.
    """
    slopes = local_slopes(points, window)
    for (c1, s1), (c2, s2) in zip(slopes, slopes[1:]):
        if s1 >= threshold > s2:
            f = (s1 - threshold) / (s1 - s2)
            return math.exp(math.log(c1) + f * (math.log(c2) - math.log(c1)))
    return None


@dataclass
class CollapseTable:
    """Rows ``(x, y, N, E)`` with ``x = xi / N`` and ``y = l / N``."""

    rows: list[tuple[float, float, int, float]]
    spread: float
    n_bins: int = 8

    @property
    def x(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    @property
    def y(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])


def collapse_spread(x: Sequence[float], y: Sequence[float], n_bins: int = 8) -> float:
    """Mean over logarithmic x-bins of the coefficient of variation of y.

    Bins with fewer than two points carry no spread information and are skipped.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if lo == hi:
        idx = np.zeros(len(x), dtype=int)
    else:
        edges = np.geomspace(lo, hi, n_bins + 1)
        idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n_bins - 1)
    cvs = []
    for b in range(n_bins):
        yy = y[idx == b]
        if len(yy) >= 2:
            cvs.append(float(yy.std() / yy.mean()))
    return float(np.mean(cvs)) if cvs else 0.0


def build_collapse(points: Sequence[SweepPoint], n_bins: int = 8) -> CollapseTable:
    if len(points) < 2:
        raise AnalysisError("collapse needs at least 2 sweep points")
    rows = [(p.xi / p.N, p.l / p.N, p.N, p.E_total) for p in points]
    if any(not (r[0] > 0 and r[1] > 0) for r in rows):
        raise AnalysisError("collapse needs positive xi and l")
    rows.sort(key=lambda r: (r[0], r[2], r[3]))
    spread = collapse_spread([r[0] for r in rows], [r[1] for r in rows], n_bins)
    return CollapseTable(rows, spread, n_bins)


def group_by_N(points: Iterable[SweepPoint]) -> dict[int, list[SweepPoint]]:
    out: dict[int, list[SweepPoint]] = {}
    for p in points:
        out.setdefault(p.N, []).append(p)
    for v in out.values():
        v.sort(key=lambda p: (p.E_total, p.replicate))
    return out


def _mean_over_replicates(points: Sequence[SweepPoint]) -> list[tuple[float, float]]:
    """``(mean <E0>, E)`` per distinct E, averaging replicate seeds."""
    by_E: dict[float, list[float]] = {}
    for p in points:
        by_E.setdefault(p.E_total, []).append(p.mean_E0)
    return [(float(np.mean(v)), E) for E, v in sorted(by_E.items())]


def regime_fits(points: Sequence[SweepPoint], N: int, low_frac: float = 0.1, high_mult: float = 2.0,
                threshold: float = 1.5) -> dict:
    """Fits of E vs T = <E0> at one N.

    * quantum regime ``E < low_frac * N**2``: exponent and sigma (the prefactor)
    * classical regime ``E > high_mult * N**2 / sigma``: exponent, free prefactor
      and unit-slope prefactor (to compare with N + 1)
    * crossover energy where the local slope crosses ``threshold``
    """
    TE = _mean_over_replicates([p for p in points if p.N == N])
    out: dict = {"N": N, "n_points": len(TE)}
    low = [(t, e) for t, e in TE if e < low_frac * N * N]
    sigma = None
    if len(low) >= 3:
        f = fit_power_law(low)
        sigma = f.prefactor
        out.update(low_exponent=f.exponent, sigma=f.prefactor, low_residual=f.residual, low_points=len(low))
    if sigma:
        high = [(t, e) for t, e in TE if e > high_mult * N * N / sigma]
        if len(high) >= 3:
            f = fit_power_law(high)
            out.update(high_exponent=f.exponent, high_prefactor=f.prefactor,
                       high_unit_prefactor=unit_slope_prefactor(high), high_points=len(high))
    if len(TE) >= 5:
        out["E_star"] = detect_crossover(TE, threshold)
        if sigma and out["E_star"] is not None:
            out["E_star_over_prediction"] = out["E_star"] / (N * N / sigma)
    return out


def ratio_vs_N(points: Iterable[SweepPoint], E: float) -> list[tuple[int, float]]:
    """``(N, E / <E0>)`` at fixed total energy, replicates averaged."""
    by_N: dict[int, list[float]] = {}
    for p in points:
        if p.E_total == E:
            by_N.setdefault(p.N, []).append(p.mean_E0)
    return [(N, E / float(np.mean(v))) for N, v in sorted(by_N.items())]
