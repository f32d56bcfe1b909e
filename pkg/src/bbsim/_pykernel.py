"""Pure-Python event kernel (fallback and reference for the compiled one).

Both kernels perform the same IEEE operations in the same order and draw
from the same PCG64 stream, so they produce bit-identical trajectories and
statistics.
"""
from __future__ import annotations

import heapq
import math

import numpy as np

from .model import InvariantError, SystemState

_TWO_M53 = 1.0 / 9007199254740992.0
_SPLIT = 134217729.0  # 2**27 + 1


def _two_prod(a, b):
    p = a * b
    c = _SPLIT * a
    ah = c - (c - a)
    al = a - ah
    c = _SPLIT * b
    bh = c - (c - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _neumaier(s, c, x):
    t = s + x
    if abs(s) >= abs(x):
        c += (s - t) + x
    else:
        c += (x - t) + s
    return t, c


class Kernel:
    """Event loop over one run; owns its state and lazy running sums."""

    backend = "python"

    def __init__(self, masses, omegas, half_periods, M, discrete, weighted, bit_generator, state: SystemState):
        self.mass = [float(x) for x in masses]
        self.omega = [float(x) for x in omegas]
        self.half = [float(x) for x in half_periods]
        self.M = float(M)
        self.discrete = bool(discrete)
        self.weighted = bool(weighted)
        self.bg = bit_generator
        self.N = len(self.mass)

        self.energy = [float(x) for x in state.energies]
        self.action = [int(x) for x in state.actions]
        self.parity = [int(x) for x in state.parity]
        self.next_time = [float(x) for x in state.next_time]
        self.E0 = float(state.E0)
        self.direction = int(state.direction)
        self.time = float(state.time)
        self.count = int(state.count)
        self.heap = [(self.next_time[i], i) for i in range(self.N)]
        heapq.heapify(self.heap)
        self.reset_stats()

    # -- statistics -------------------------------------------------------
    def reset_stats(self):
        N = self.N
        self.nrec = 0
        self.last = [0] * N
        self.sum = [0.0] * N
        self.comp = [0.0] * N
        self.sum0 = 0.0
        self.comp0 = 0.0
        self.t_start = self.time
        self.tlast = [self.time] * N
        self.tsum = [0.0] * N
        self.tcomp = [0.0] * N
        self.tlast0 = self.time
        self.tsum0 = 0.0
        self.tcomp0 = 0.0

    def means(self):
        """``(n_recorded, mean_E0, per-mode means)`` over recorded collisions."""
        n = self.nrec
        out = np.zeros(self.N)
        if n == 0:
            return 0, 0.0, out
        for i in range(self.N):
            s, c = self.sum[i], self.comp[i]
            k = n - self.last[i]
            if k > 0:
                p, e = _two_prod(self.energy[i], float(k))
                s, c = _neumaier(s, c, p)
                s, c = _neumaier(s, c, e)
            out[i] = (s + c) / n
        return n, (self.sum0 + self.comp0) / n, out

    def time_means(self):
        """``(duration, mean_E0, per-mode means)`` weighted by elapsed time."""
        span = self.time - self.t_start
        out = np.zeros(self.N)
        if span <= 0.0:
            return 0.0, 0.0, out
        for i in range(self.N):
            s, c = _neumaier(self.tsum[i], self.tcomp[i], self.energy[i] * (self.time - self.tlast[i]))
            out[i] = (s + c) / span
        s, c = _neumaier(self.tsum0, self.tcomp0, self.E0 * (self.time - self.tlast0))
        return span, (s + c) / span, out

    def export_accumulators(self):
        return {
            "nrec": self.nrec,
            "last": list(self.last),
            "sum": list(self.sum),
            "comp": list(self.comp),
            "sum0": self.sum0,
            "comp0": self.comp0,
            "t_start": self.t_start,
            "tlast": list(self.tlast),
            "tsum": list(self.tsum),
            "tcomp": list(self.tcomp),
            "tlast0": self.tlast0,
            "tsum0": self.tsum0,
            "tcomp0": self.tcomp0,
        }

    def import_accumulators(self, acc):
        self.nrec = int(acc["nrec"])
        self.last = [int(x) for x in acc["last"]]
        for name in ("sum", "comp", "tlast", "tsum", "tcomp"):
            setattr(self, name, [float(x) for x in acc[name]])
        for name in ("sum0", "comp0", "t_start", "tlast0", "tsum0", "tcomp0"):
            setattr(self, name, float(acc[name]))

    def export_state(self) -> SystemState:
        return SystemState(
            np.array(self.energy, dtype=np.float64),
            np.array(self.action, dtype=np.int64),
            np.array(self.parity, dtype=np.int64),
            np.array(self.next_time, dtype=np.float64),
            self.E0,
            self.direction,
            self.time,
            self.count,
        )

    # -- dynamics ---------------------------------------------------------
    def step(self):
        """Process the next crossing; returns the collision record as a tuple.

        ``(count, time, index, Ej_pre, E0_pre, Ej_post, E0_post, roundoff, forced)``
        with a 1-based mode index.
        """
        tau, j = self.heap[0]
        m = self.mass[j]
        w = self.omega[j]
        M = self.M
        Ej = self.energy[j]
        E0 = self.E0

        v = self.parity[j] * math.sqrt(2.0 * Ej / m)
        V = self.direction * math.sqrt(2.0 * E0 / M)
        v_out = ((m - M) * v + 2.0 * M * V) / (m + M)
        pair = Ej + E0
        Ej_new = 0.5 * m * v_out * v_out
        if Ej_new > pair:
            Ej_new = pair
        E0_new = pair - Ej_new
        delta = 0.0
        forced = 0
        if self.discrete:
            I = Ej_new / w
            fl = math.floor(I)
            n = fl
            if I != fl:
                if self.weighted:
                    up = ((self.bg.random_raw() >> 11) * _TWO_M53) < (I - fl)
                else:
                    up = (self.bg.random_raw() >> 63) == 1
                if up:
                    n = fl + 1
                    delta = (I - n) * w
                    if E0_new + delta < 0.0:
                        n = fl
                        delta = (I - fl) * w
                        forced = 1
                else:
                    delta = (I - fl) * w
            self.action[j] = n
            Ej_new = n * w
            E0_new = E0_new + delta
        if E0_new < 0.0:
            raise InvariantError(f"particle energy went negative ({E0_new}) at collision {self.count + 1}")

        # lazy running sums: mode j held Ej for recorded collisions last[j]+1 .. nrec
        self.nrec += 1
        k = self.nrec - 1 - self.last[j]
        if k > 0:
            p, e = _two_prod(Ej, float(k))
            s, c = _neumaier(self.sum[j], self.comp[j], p)
            self.sum[j], self.comp[j] = _neumaier(s, c, e)
        self.last[j] = self.nrec - 1
        self.sum0, self.comp0 = _neumaier(self.sum0, self.comp0, E0_new)
        self.tsum[j], self.tcomp[j] = _neumaier(self.tsum[j], self.tcomp[j], Ej * (tau - self.tlast[j]))
        self.tlast[j] = tau
        self.tsum0, self.tcomp0 = _neumaier(self.tsum0, self.tcomp0, E0 * (tau - self.tlast0))
        self.tlast0 = tau

        self.energy[j] = Ej_new
        self.E0 = E0_new
        if v_out > 0.0:
            self.parity[j] = -1
        elif v_out < 0.0:
            self.parity[j] = 1
        else:
            self.parity[j] = -self.parity[j]
        self.direction = -1 if (self.bg.random_raw() >> 63) else 1
        nt = tau + self.half[j]
        self.next_time[j] = nt
        heapq.heapreplace(self.heap, (nt, j))
        self.time = tau
        self.count += 1
        return (self.count, tau, j + 1, Ej, E0, Ej_new, E0_new, delta, forced)

    def run(self, n):
        step = self.step
        for _ in range(int(n)):
            step()
