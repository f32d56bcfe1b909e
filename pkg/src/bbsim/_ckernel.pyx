# cython: language_level=3
"""Compiled event kernel.

Mirror of ``_pykernel.Kernel``: same floating-point operations in the same
order, same PCG64 draws, hence bit-identical output. The scheduler is a
binary min-heap keyed on ``(next_time, index)``; only the root changes per
event, so each step costs one sift-down.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, fabs
from libc.stdint cimport uint64_t, int64_t
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t

from .model import InvariantError, SystemState

cnp.import_array()

cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef double SPLIT = 134217729.0


cdef inline void two_prod(double a, double b, double* p, double* e) noexcept nogil:
    cdef double c, ah, al, bh, bl
    p[0] = a * b
    c = SPLIT * a
    ah = c - (c - a)
    al = a - ah
    c = SPLIT * b
    bh = c - (c - b)
    bl = b - bh
    e[0] = ((ah * bh - p[0]) + ah * bl + al * bh) + al * bl


cdef inline void neumaier(double* s, double* c, double x) noexcept nogil:
    cdef double t = s[0] + x
    if fabs(s[0]) >= fabs(x):
        c[0] += (s[0] - t) + x
    else:
        c[0] += (x - t) + s[0]
    s[0] = t


cdef class Kernel:
    cdef readonly str backend
    cdef readonly int N
    cdef readonly bint discrete, weighted
    cdef double M
    cdef object bg
    cdef bitgen_t* rng
    cdef double[::1] mass, omega, half, energy, next_time
    cdef int64_t[::1] action, parity, heap
    cdef public double E0, time
    cdef public int64_t direction, count
    # statistics
    cdef int64_t nrec
    cdef int64_t[::1] last
    cdef double[::1] sum, comp, tlast, tsum, tcomp
    cdef double sum0, comp0, t_start, tlast0, tsum0, tcomp0

    def __init__(self, masses, omegas, half_periods, double M, bint discrete, bint weighted, bit_generator, state):
        self.backend = "cython"
        self.mass = np.array(masses, dtype=np.float64)
        self.omega = np.array(omegas, dtype=np.float64)
        self.half = np.array(half_periods, dtype=np.float64)
        self.N = self.mass.shape[0]
        self.M = M
        self.discrete = discrete
        self.weighted = weighted
        self.bg = bit_generator
        self.rng = <bitgen_t*> PyCapsule_GetPointer(bit_generator.capsule, "BitGenerator")

        self.energy = np.array(state.energies, dtype=np.float64)
        self.action = np.array(state.actions, dtype=np.int64)
        self.parity = np.array(state.parity, dtype=np.int64)
        self.next_time = np.array(state.next_time, dtype=np.float64)
        self.E0 = state.E0
        self.direction = state.direction
        self.time = state.time
        self.count = state.count
        self.heap = np.arange(self.N, dtype=np.int64)
        cdef Py_ssize_t i
        for i in range(self.N // 2 - 1, -1, -1):
            self._sift_down(i)
        self.last = np.zeros(self.N, dtype=np.int64)
        self.sum = np.zeros(self.N)
        self.comp = np.zeros(self.N)
        self.tlast = np.zeros(self.N)
        self.tsum = np.zeros(self.N)
        self.tcomp = np.zeros(self.N)
        self.reset_stats()

    cdef inline bint _less(self, int64_t a, int64_t b) noexcept nogil:
        cdef double ta = self.next_time[a], tb = self.next_time[b]
        return ta < tb or (ta == tb and a < b)

    cdef void _sift_down(self, Py_ssize_t pos) noexcept nogil:
        cdef Py_ssize_t n = self.N, child
        cdef int64_t item = self.heap[pos]
        while True:
            child = 2 * pos + 1
            if child >= n:
                break
            if child + 1 < n and self._less(self.heap[child + 1], self.heap[child]):
                child += 1
            if self._less(self.heap[child], item):
                self.heap[pos] = self.heap[child]
                pos = child
            else:
                break
        self.heap[pos] = item

    def reset_stats(self):
        self.nrec = 0
        self.last[:] = 0
        self.sum[:] = 0.0
        self.comp[:] = 0.0
        self.sum0 = 0.0
        self.comp0 = 0.0
        self.t_start = self.time
        self.tlast[:] = self.time
        self.tsum[:] = 0.0
        self.tcomp[:] = 0.0
        self.tlast0 = self.time
        self.tsum0 = 0.0
        self.tcomp0 = 0.0

    def means(self):
        cdef int64_t n = self.nrec, k
        cdef double s, c, p, e
        cdef Py_ssize_t i
        out = np.zeros(self.N)
        cdef double[::1] o = out
        if n == 0:
            return 0, 0.0, out
        for i in range(self.N):
            s = self.sum[i]
            c = self.comp[i]
            k = n - self.last[i]
            if k > 0:
                two_prod(self.energy[i], <double>k, &p, &e)
                neumaier(&s, &c, p)
                neumaier(&s, &c, e)
            o[i] = (s + c) / n
        return n, (self.sum0 + self.comp0) / n, out

    def time_means(self):
        cdef double span = self.time - self.t_start, s, c
        cdef Py_ssize_t i
        out = np.zeros(self.N)
        cdef double[::1] o = out
        if span <= 0.0:
            return 0.0, 0.0, out
        for i in range(self.N):
            s = self.tsum[i]
            c = self.tcomp[i]
            neumaier(&s, &c, self.energy[i] * (self.time - self.tlast[i]))
            o[i] = (s + c) / span
        s = self.tsum0
        c = self.tcomp0
        neumaier(&s, &c, self.E0 * (self.time - self.tlast0))
        return span, (s + c) / span, out

    def export_accumulators(self):
        return {
            "nrec": int(self.nrec),
            "last": [int(x) for x in self.last],
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
        self.last = np.array(acc["last"], dtype=np.int64)
        self.sum = np.array(acc["sum"], dtype=np.float64)
        self.comp = np.array(acc["comp"], dtype=np.float64)
        self.tlast = np.array(acc["tlast"], dtype=np.float64)
        self.tsum = np.array(acc["tsum"], dtype=np.float64)
        self.tcomp = np.array(acc["tcomp"], dtype=np.float64)
        self.sum0 = float(acc["sum0"])
        self.comp0 = float(acc["comp0"])
        self.t_start = float(acc["t_start"])
        self.tlast0 = float(acc["tlast0"])
        self.tsum0 = float(acc["tsum0"])
        self.tcomp0 = float(acc["tcomp0"])

    def export_state(self):
        return SystemState(
            np.array(self.energy, dtype=np.float64),
            np.array(self.action, dtype=np.int64),
            np.array(self.parity, dtype=np.int64),
            np.array(self.next_time, dtype=np.float64),
            self.E0,
            int(self.direction),
            self.time,
            int(self.count),
        )

    cdef int _step(self, double* rec) except -1:
        cdef int64_t j = self.heap[0], k
        cdef double tau = self.next_time[j]
        cdef double m = self.mass[j], w = self.omega[j], M = self.M
        cdef double Ej = self.energy[j], E0 = self.E0
        cdef double v, V, v_out, pair, Ej_new, E0_new, delta = 0.0, I, fl, n, p, e
        cdef int forced = 0
        cdef bint up
        cdef uint64_t raw

        v = self.parity[j] * sqrt(2.0 * Ej / m)
        V = self.direction * sqrt(2.0 * E0 / M)
        v_out = ((m - M) * v + 2.0 * M * V) / (m + M)
        pair = Ej + E0
        Ej_new = 0.5 * m * v_out * v_out
        if Ej_new > pair:
            Ej_new = pair
        E0_new = pair - Ej_new
        if self.discrete:
            I = Ej_new / w
            fl = floor(I)
            n = fl
            if I != fl:
                raw = self.rng.next_uint64(self.rng.state)
                if self.weighted:
                    up = ((raw >> 11) * TWO_M53) < (I - fl)
                else:
                    up = (raw >> 63) == 1
                if up:
                    n = fl + 1.0
                    delta = (I - n) * w
                    if E0_new + delta < 0.0:
                        n = fl
                        delta = (I - fl) * w
                        forced = 1
                else:
                    delta = (I - fl) * w
            self.action[j] = <int64_t>n
            Ej_new = n * w
            E0_new = E0_new + delta
        if E0_new < 0.0:
            raise InvariantError(f"particle energy went negative ({E0_new}) at collision {self.count + 1}")

        self.nrec += 1
        k = self.nrec - 1 - self.last[j]
        if k > 0:
            two_prod(Ej, <double>k, &p, &e)
            neumaier(&self.sum[j], &self.comp[j], p)
            neumaier(&self.sum[j], &self.comp[j], e)
        self.last[j] = self.nrec - 1
        neumaier(&self.sum0, &self.comp0, E0_new)
        neumaier(&self.tsum[j], &self.tcomp[j], Ej * (tau - self.tlast[j]))
        self.tlast[j] = tau
        neumaier(&self.tsum0, &self.tcomp0, E0 * (tau - self.tlast0))
        self.tlast0 = tau

        self.energy[j] = Ej_new
        self.E0 = E0_new
        if v_out > 0.0:
            self.parity[j] = -1
        elif v_out < 0.0:
            self.parity[j] = 1
        else:
            self.parity[j] = -self.parity[j]
        raw = self.rng.next_uint64(self.rng.state)
        self.direction = -1 if (raw >> 63) else 1
        self.next_time[j] = tau + self.half[j]
        self._sift_down(0)
        self.time = tau
        self.count += 1

        rec[0] = tau
        rec[1] = j + 1
        rec[2] = Ej
        rec[3] = E0
        rec[4] = Ej_new
        rec[5] = E0_new
        rec[6] = delta
        rec[7] = forced
        return 0

    def step(self):
        cdef double rec[8]
        self._step(rec)
        return (int(self.count), rec[0], int(rec[1]), rec[2], rec[3], rec[4], rec[5], rec[6], int(rec[7]))

    def run(self, n):
        cdef double rec[8]
        cdef int64_t i, nn = n
        for i in range(nn):
            self._step(rec)
