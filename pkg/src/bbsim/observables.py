"""Running averages, inverse participation ratio and conservation monitoring."""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class ObservableError(ValueError):
    pass


def ipr(mean_energies: Sequence[float]) -> float:
    """Inverse participation ratio ``(sum e)**2 / sum e**2``.

    The effective number of modes sharing the energy; 1 for a single
    excited mode, ``len(e)`` for a flat spectrum.
    """
    e = np.asarray(mean_energies, dtype=np.float64)
    if e.size == 0 or not np.any(e > 0):
        raise ObservableError("ipr needs at least one strictly positive entry")
    if np.any(e < 0):
        raise ObservableError("ipr needs nonnegative entries")
    # exact rational sums and a single rounding: the result is correctly
    # rounded, which keeps ipr(c * e) == ipr(e) up to the rounding of c * e
    q = [Fraction(x) for x in e.tolist()]
    s1 = sum(q)
    val = float(s1 * s1 / sum(x * x for x in q))
    return min(max(val, 1.0), float(e.size))


def conservation_drift(state, E_total: float) -> float:
    """Relative deviation of the current total energy from ``E_total``."""
    return abs(math.fsum([state.E0, *np.asarray(state.energies).tolist(), -E_total])) / E_total


def log_schedule(n: int, ratio: float = 10 ** (1 / 8)) -> list[int]:
    """Strictly increasing collision counts ``~ ratio**k`` ending at ``n``."""
    if n < 1:
        return []
    if ratio <= 1:
        raise ObservableError("snapshot ratio must exceed 1")
    out = []
    x = 1.0
    while x < n:
        t = int(math.ceil(x - 1e-9))
        if not out or t > out[-1]:
            out.append(t)
        x *= ratio
    if not out or out[-1] != n:
        out.append(n)
    return out


@dataclass
class RunningStats:
    """Collision-indexed means of all energies at a given point of a run.

    ``mean_E`` holds the N oscillator means. Time-weighted means are kept
    alongside for comparison (``time_span`` is the averaging window).
    """

    count: int
    mean_E0: float
    mean_E: np.ndarray
    E_total: float
    drift: float = 0.0
    time_span: float = 0.0
    time_mean_E0: float = 0.0
    time_mean_E: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def N(self) -> int:
        return len(self.mean_E)

    @property
    def mean_field(self) -> float:
        return math.fsum(self.mean_E.tolist())

    def ipr(self) -> float:
        return ipr(self.mean_E)

    def sum_rule_error(self) -> float:
        """Relative gap between ``<E0> + sum <E_i>`` and ``E_total``."""
        return abs(self.mean_E0 + self.mean_field - self.E_total) / self.E_total

    def estimator(self, time_weighted: bool = False) -> tuple[float, np.ndarray]:
        if time_weighted:
            return self.time_mean_E0, self.time_mean_E
        return self.mean_E0, self.mean_E

    @classmethod
    def merge(cls, runs: Iterable["RunningStats"]) -> "RunningStats":
        """Pool runs with identical parameters, weighting by collision count."""
        runs = list(runs)
        if not runs:
            raise ObservableError("nothing to merge")
        N, E = runs[0].N, runs[0].E_total
        if any(r.N != N or r.E_total != E for r in runs):
            raise ObservableError("merge needs runs with identical N and E_total")
        w = np.array([r.count for r in runs], dtype=np.float64)
        tw = np.array([r.time_span for r in runs], dtype=np.float64)
        W, TW = w.sum(), tw.sum()
        mean_E = sum(wi * r.mean_E for wi, r in zip(w, runs)) / W
        mean_E0 = float(sum(wi * r.mean_E0 for wi, r in zip(w, runs)) / W)
        if TW > 0:
            t_E = sum(ti * r.time_mean_E for ti, r in zip(tw, runs)) / TW
            t_E0 = float(sum(ti * r.time_mean_E0 for ti, r in zip(tw, runs)) / TW)
        else:
            t_E, t_E0 = np.zeros(N), 0.0
        return cls(
            count=int(W),
            mean_E0=mean_E0,
            mean_E=mean_E,
            E_total=E,
            drift=max(r.drift for r in runs),
            time_span=float(TW),
            time_mean_E0=t_E0,
            time_mean_E=t_E,
        )


class RunningAverager:
    """Naive per-collision recorder: ``record`` is called once after every collision.

    Keeps a compensated sum of every sample of every mode, O(N) per call.
    The engine's lazy accumulators must agree with it.
    """

    def __init__(self, N: int):
        self.count = 0
        self._e0: list[float] = []
        self._e: list[list[float]] = [[] for _ in range(N)]

    def record(self, state) -> "RunningAverager":
        self.count += 1
        self._e0.append(float(state.E0))
        for i, x in enumerate(np.asarray(state.energies).tolist()):
            self._e[i].append(x)
        return self

    def sums(self) -> tuple[float, np.ndarray]:
        return math.fsum(self._e0), np.array([math.fsum(col) for col in self._e])

    def means(self) -> tuple[float, np.ndarray]:
        s0, s = self.sums()
        return s0 / self.count, s / self.count
