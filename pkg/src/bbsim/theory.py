"""Closed-form reference quantities for the 1-D black body (action quantum 1).

Mode ``i`` has frequency ``alpha * i``; the heavy particle carries ``1/beta``
at inverse temperature ``beta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

TERM_RTOL = 1e-14
_CHUNK = 4096


class TheoryError(ValueError):
    pass


def planck_energy(omega, beta):
    """Mean energy ``omega / (exp(beta*omega) - 1)`` of a mode; ``1/beta`` at omega = 0.

    Accepts scalars or arrays (broadcast against each other).
    """
    beta = np.asarray(beta, dtype=np.float64)
    if not np.all(beta > 0):
        raise TheoryError(f"beta must be positive, got {beta!r}")
    w = np.asarray(omega, dtype=np.float64)
    if np.any(w < 0):
        raise TheoryError("omega must be nonnegative")
    x = beta * w
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        big = w * np.exp(-x) / -np.expm1(-x)
        mid = w / np.expm1(x)
    # series of x/(e^x - 1) for tiny x, exact limit at x = 0
    small = (1.0 - x / 2.0 + x * x / 12.0) / beta
    out = np.where(x < 1e-8, small, np.where(x > 700.0, big, mid))
    out = np.where(x > 745.0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def _field_terms(beta: float, alpha: float, n_trunc: int | None):
    """Per-mode Planck energies, either the first ``n_trunc`` or until convergence."""
    if n_trunc is not None:
        return planck_energy(alpha * np.arange(1, n_trunc + 1, dtype=np.float64), beta)
    parts = []
    running = 1.0 / beta
    start = 1
    while True:
        i = np.arange(start, start + _CHUNK, dtype=np.float64)
        terms = planck_energy(alpha * i, beta)
        totals = running + np.cumsum(terms)
        below = np.nonzero(terms < TERM_RTOL * totals)[0]
        if below.size:
            parts.append(terms[: below[0] + 1])
            break
        parts.append(terms)
        running = totals[-1]
        start += _CHUNK
    return np.concatenate(parts)


def total_energy(beta: float, alpha: float, n_trunc: int | None = None) -> float:
    """``1/beta`` plus the summed Planck field energy.

    With ``n_trunc=None`` the mode ladder is unbounded and the sum stops once a
    term drops below ``1e-14`` of the running total.
    """
    if not beta > 0 or not alpha > 0:
        raise TheoryError("beta and alpha must be positive")
    return 1.0 / beta + float(np.sum(_field_terms(beta, alpha, n_trunc)))


def solve_beta(E: float, alpha: float, n_trunc: int | None = None) -> float:
    """Inverse temperature at which :func:`total_energy` equals ``E``."""
    if not E > 0:
        raise TheoryError(f"energy must be positive, got {E!r}")

    def f(b):
        return total_energy(b, alpha, n_trunc) / E - 1.0

    # The field sum lies between I - 1/beta and I, I = pi**2 / (6 alpha beta**2)
    # its integral over the continuous ladder; that brackets the root.
    c = math.pi ** 2 / (6.0 * alpha)
    lo = 1.0 / E
    if n_trunc is None:
        lo = max(lo, math.sqrt(c / E))
    hi = (1.0 + math.sqrt(1.0 + 4.0 * c * E)) / (2.0 * E)
    for _ in range(200):
        if f(lo) >= 0:
            break
        lo /= 2.0
    else:
        raise TheoryError(f"could not bracket beta for E={E}")
    for _ in range(200):
        if f(hi) <= 0:
            break
        hi *= 2.0
    else:
        raise TheoryError(f"could not bracket beta for E={E}")
    return brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


@dataclass(frozen=True)
class TheorySpectrum:
    beta: float
    alpha: float
    n_trunc: int | None
    energies: np.ndarray

    @property
    def E_field(self) -> float:
        return math.fsum(self.energies.tolist())

    @property
    def E_particle(self) -> float:
        return 1.0 / self.beta

    @property
    def total(self) -> float:
        return self.E_field + self.E_particle

    def ipr(self) -> float:
        e = self.energies
        return math.fsum(e.tolist()) ** 2 / math.fsum((e * e).tolist())


def spectrum(beta: float, alpha: float, n_trunc: int | None = None) -> TheorySpectrum:
    return TheorySpectrum(beta, alpha, n_trunc, _field_terms(beta, alpha, n_trunc))


def spectrum_for_energy(E: float, alpha: float, n_modes: int) -> TheorySpectrum:
    """First ``n_modes`` Planck energies at the temperature fixed by the unbounded ladder."""
    return spectrum(solve_beta(E, alpha), alpha, n_modes)


def xi_theoretical(E: float, alpha: float, n_trunc: int | None = None) -> float:
    """Participation ratio of the Planck spectrum at total energy ``E``."""
    beta = solve_beta(E, alpha, n_trunc)
    return spectrum(beta, alpha, n_trunc).ipr()


def equipartition_energy(E: float, N: int) -> float:
    """Share of each of the N + 1 degrees of freedom under classical equipartition."""
    if not E > 0 or N < 0:
        raise TheoryError("equipartition needs E > 0 and N >= 0")
    return E / (N + 1)


def crossover_energy(N: int, sigma: float) -> float:
    """Total energy ``N**2 / sigma`` separating the quantum and classical regimes."""
    if N < 1 or not sigma > 0:
        raise TheoryError("crossover needs N >= 1 and sigma > 0")
    return N * N / sigma


def continuum_sigma(alpha: float) -> float:
    """Stefan-Boltzmann constant of the continuum limit, ``pi**2 / (6 alpha)``, with T = 1/beta."""
    return math.pi ** 2 / (6.0 * alpha)
