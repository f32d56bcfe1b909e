"""Physical model: a heavy particle colliding with a ladder of light oscillators.

Oscillator ``i`` (1-based) has mass ``c / i**2`` and angular frequency
``alpha * i`` with ``alpha = sqrt(k / c)``. Every time an oscillator passes
its centre it collides elastically with the heavy particle of mass ``M``.
Energies are dimensionless; the action quantum is fixed at 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GOLDEN_MASS = (math.sqrt(5.0) + 1.0) / 2.0
DEFAULT_C = 0.51
DEFAULT_K = 0.1

MODES = ("classical", "discrete")


class ModelError(ValueError):
    """Invalid model parameters or usage of a model operation."""


class InvariantError(RuntimeError):
    """An internal invariant (energy positivity, conservation) was violated."""


@dataclass(frozen=True)
class ModelParams:
    N: int
    E_total: float
    mode: str
    M: float = GOLDEN_MASS
    c: float = DEFAULT_C
    k: float = DEFAULT_K
    hbar: float = field(default=1.0, init=False)

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise ModelError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if not self.E_total > 0 or not math.isfinite(self.E_total):
            raise ModelError(f"E_total must be positive and finite, got {self.E_total!r}")
        if self.mode not in MODES:
            raise ModelError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (self.c > 0 and self.k > 0 and self.M > 0):
            raise ModelError("M, c and k must be positive")
        # heaviest oscillator is i = 1
        if not self.M > self.c:
            raise ModelError(f"heavy-particle condition violated: M={self.M} <= m_1={self.c}")

    @property
    def alpha(self) -> float:
        return math.sqrt(self.k / self.c)

    @property
    def discrete(self) -> bool:
        return self.mode == "discrete"

    def masses(self) -> np.ndarray:
        i = np.arange(1, self.N + 1, dtype=np.float64)
        return self.c / (i * i)

    def omegas(self) -> np.ndarray:
        return self.alpha * np.arange(1, self.N + 1, dtype=np.float64)

    def half_periods(self) -> np.ndarray:
        """Time between successive zero crossings, pi / omega_i."""
        return math.pi / self.omegas()


def oscillator_params(i: int, params: ModelParams) -> tuple[float, float]:
    """Return ``(mass, frequency)`` of oscillator ``i`` (1-based)."""
    if not 1 <= i <= params.N:
        raise ModelError(f"oscillator index {i} outside 1..{params.N}")
    return params.c / (i * i), params.alpha * i


_SPLIT = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _two_prod(a, b):
    p = a * b
    t = _SPLIT * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLIT * b
    bh = t - (t - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_out(d_hi, d_lo, u, W, U, s_hi, s_lo):
    """``((d_hi + d_lo) * u + 2 * W * U) / (s_hi + s_lo)`` in double-double, rounded once."""
    p1, e1 = _two_prod(d_hi, u)
    p2, e2 = _two_prod(W, U)
    h, e3 = _two_sum(p1, 2.0 * p2)
    lo = ((e1 + d_lo * u) + 2.0 * e2) + e3
    q = h / s_hi
    p, pe = _two_prod(q, s_hi)
    r = (((h - p) - pe) + lo) - q * s_lo
    return q + r / s_hi


def elastic_collision(m, v, M, V):
    """One-dimensional elastic collision of masses ``m`` and ``M``.

    Returns the outgoing velocities ``(v_out, V_out)``. Intermediate sums and
    products are carried in double-double so both outputs are close to
    correctly rounded. Works elementwise on numpy arrays as well.
    """
    if not (np.all(np.asarray(m) > 0) and np.all(np.asarray(M) > 0)):
        raise ModelError(f"masses must be positive, got m={m}, M={M}")
    s_hi, s_lo = _two_sum(m, M)
    d_hi, d_lo = _two_sum(m, -M)
    v_out = _dd_out(d_hi, d_lo, v, M, V, s_hi, s_lo)
    V_out = _dd_out(-d_hi, -d_lo, V, m, v, s_hi, s_lo)
    return v_out, V_out


def velocity_at_crossing(energy: float, mass: float, parity: int) -> float:
    """Signed oscillator velocity at x = 0, where all its energy is kinetic."""
    if energy < 0:
        raise InvariantError(f"negative oscillator energy {energy}")
    return parity * math.sqrt(2.0 * energy / mass)


def first_crossing_time(phase: float, omega: float) -> float:
    """Time until the first zero crossing of a mode at phase ``phase`` in [0, pi)."""
    return (math.pi - phase) / omega


@dataclass
class SystemState:
    """Complete dynamical state of one run.

    ``actions`` holds the integer quantum numbers in discrete mode (zeros in
    classical mode); there ``energies[i] == actions[i] * omega_i`` bitwise.
    """

    energies: np.ndarray
    actions: np.ndarray
    parity: np.ndarray
    next_time: np.ndarray
    E0: float
    direction: int
    time: float = 0.0
    count: int = 0

    @property
    def N(self) -> int:
        return len(self.energies)

    def total_energy(self) -> float:
        return math.fsum([self.E0, *self.energies.tolist()])

    def copy(self) -> "SystemState":
        return SystemState(
            self.energies.copy(),
            self.actions.copy(),
            self.parity.copy(),
            self.next_time.copy(),
            self.E0,
            self.direction,
            self.time,
            self.count,
        )


@dataclass(frozen=True)
class InitialCondition:
    """How the total energy is distributed at t = 0.

    ``kind`` is ``"particle"`` (everything in the heavy particle),
    ``"oscillator"`` (everything in mode ``index``, floor-quantized in
    discrete mode with the remainder in the particle) or ``"explicit"``
    (``energies`` lists E0 followed by the N mode energies).
    """

    kind: str = "particle"
    index: int | None = None
    energies: tuple[float, ...] | None = None

    @classmethod
    def parse(cls, text: str) -> "InitialCondition":
        text = text.strip()
        if text == "particle":
            return cls("particle")
        head, _, rest = text.partition(":")
        if head == "oscillator" and rest:
            return cls("oscillator", index=int(rest))
        if head == "explicit" and rest:
            return cls("explicit", energies=tuple(float(x) for x in rest.split(",")))
        raise ModelError(f"unrecognised initial condition {text!r}")

    def render(self) -> str:
        if self.kind == "particle":
            return "particle"
        if self.kind == "oscillator":
            return f"oscillator:{self.index}"
        return "explicit:" + ",".join(repr(float(x)) for x in self.energies)


def init_state(ic: InitialCondition, params: ModelParams, rng) -> SystemState:
    """Build the initial state; draws phases, parities and the particle sign from ``rng``.

    Draw order: for each mode ``i = 1..N`` one uniform phase then one sign;
    finally the particle direction.
    """
    N = params.N
    omegas = params.omegas()
    energies = np.zeros(N)
    actions = np.zeros(N, dtype=np.int64)
    E0 = float(params.E_total)

    if ic.kind == "oscillator":
        j = ic.index
        if j is None or not 1 <= j <= N:
            raise ModelError(f"initial oscillator index {j} outside 1..{N}")
        w = float(omegas[j - 1])
        if params.discrete:
            n = math.floor(params.E_total / w)
            actions[j - 1] = n
            energies[j - 1] = n * w
        else:
            energies[j - 1] = params.E_total
        E0 = params.E_total - energies[j - 1]
    elif ic.kind == "explicit":
        vals = ic.energies or ()
        if len(vals) != N + 1:
            raise ModelError(f"explicit initial condition needs {N + 1} energies (E0, E_1..E_N), got {len(vals)}")
        if any(v < 0 for v in vals):
            raise ModelError("explicit initial energies must be nonnegative")
        if abs(math.fsum(vals) - params.E_total) > 1e-12 * params.E_total:
            raise ModelError(f"explicit energies sum to {math.fsum(vals)!r}, expected {params.E_total!r}")
        E0 = float(vals[0])
        energies[:] = vals[1:]
        if params.discrete:
            q = energies / omegas
            if not np.allclose(q, np.round(q), rtol=0.0, atol=1e-9):
                raise ModelError("discrete mode needs integer actions in explicit initial energies")
            actions[:] = np.round(q).astype(np.int64)
            energies = actions * omegas
    elif ic.kind != "particle":
        raise ModelError(f"unknown initial condition kind {ic.kind!r}")

    next_time = np.empty(N)
    parity = np.empty(N, dtype=np.int64)
    for i in range(N):
        next_time[i] = first_crossing_time(math.pi * rng.uniform(), float(omegas[i]))
        parity[i] = rng.sign()
    return SystemState(energies, actions, parity, next_time, E0, rng.sign())

