"""Event-driven evolution of the model.

Between collisions every energy is constant, so the dynamics reduce to a
sequence of zero-crossing events. Oscillator ``i`` crosses every ``pi /
omega_i`` whatever its amplitude; at each crossing it collides with the heavy
particle, the particle's direction is then re-drawn at random, and in
discrete mode the oscillator action is rounded to an integer.

The hot loop lives in a kernel object. The compiled kernel (``_ckernel``) is
used when it was built; otherwise the pure-Python kernel is selected. Set
``BBSIM_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _pykernel
from .model import InitialCondition, ModelError, ModelParams, SystemState, init_state
from .observables import RunningStats, conservation_drift, log_schedule
from .quantize import ROUNDING_MODES
from .rng import RngStream

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

logger = logging.getLogger(__name__)

KERNELS = {"python": _pykernel.Kernel}
if _ckernel is not None:
    KERNELS["cython"] = _ckernel.Kernel

BACKEND = os.environ.get("BBSIM_BACKEND") or ("cython" if "cython" in KERNELS else "python")
if BACKEND not in KERNELS:
    raise ImportError(f"requested backend {BACKEND!r} is not available (have {sorted(KERNELS)})")

CHECKPOINT_FORMAT = "bbsim-checkpoint"


def next_crossing(tau: float, omega: float) -> float:
    """Crossing that follows one processed at ``tau``: half a period later."""
    return tau + math.pi / omega


@dataclass(frozen=True)
class CollisionRecord:
    t: int
    time: float
    index: int
    E_osc_pre: float
    E0_pre: float
    E_osc_post: float
    E0_post: float
    roundoff: float
    forced: bool = False

    @property
    def energy_change(self) -> float:
        return (self.E_osc_post + self.E0_post) - (self.E_osc_pre + self.E0_pre)


@dataclass(frozen=True)
class Snapshot:
    t: int
    mean_E0: float
    mean_E: np.ndarray


@dataclass
class RunReport:
    state: SystemState
    stats: RunningStats
    drift: float
    snapshots: list[Snapshot] = field(default_factory=list)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


class Simulation:
    """One run: parameters, exclusively owned state, RNG stream and statistics."""

    def __init__(
        self,
        params: ModelParams,
        state: SystemState,
        rng: RngStream,
        rounding: str = "coin",
        backend: str | None = None,
    ):
        if rounding not in ROUNDING_MODES:
            raise ModelError(f"rounding must be one of {ROUNDING_MODES}, got {rounding!r}")
        if state.N != params.N:
            raise ModelError(f"state has {state.N} modes, params say N={params.N}")
        self.params = params
        self.rng = rng
        self.rounding = rounding
        self.backend = backend or BACKEND
        try:
            kernel_cls = KERNELS[self.backend]
        except KeyError:
            raise ModelError(f"unknown or unavailable backend {self.backend!r}") from None
        self._kernel = kernel_cls(
            params.masses(),
            params.omegas(),
            params.half_periods(),
            params.M,
            params.discrete,
            rounding == "weighted",
            rng.bit_generator,
            state,
        )

    @classmethod
    def start(
        cls,
        params: ModelParams,
        ic: InitialCondition,
        rng: RngStream,
        rounding: str = "coin",
        backend: str | None = None,
    ) -> "Simulation":
        return cls(params, init_state(ic, params, rng), rng, rounding, backend)

    @property
    def state(self) -> SystemState:
        return self._kernel.export_state()

    @property
    def count(self) -> int:
        return self._kernel.count

    def drift(self) -> float:
        return conservation_drift(self._kernel.export_state(), self.params.E_total)

    def stats(self) -> RunningStats:
        n, m0, m = self._kernel.means()
        span, t0, tm = self._kernel.time_means()
        return RunningStats(
            count=int(n),
            mean_E0=float(m0),
            mean_E=m,
            E_total=self.params.E_total,
            drift=self.drift(),
            time_span=float(span),
            time_mean_E0=float(t0),
            time_mean_E=tm,
        )

    def reset_stats(self) -> None:
        """Discard the averages accumulated so far (burn-in)."""
        self._kernel.reset_stats()

    def step(self) -> CollisionRecord:
        t, time, j, ej, e0, ej2, e02, d, forced = self._kernel.step()
        return CollisionRecord(t, time, j, ej, e0, ej2, e02, d, bool(forced))

    def run(
        self,
        n_collisions: int,
        observers: Sequence[Callable[[CollisionRecord, "Simulation"], None]] = (),
        snapshot_ratio: float | None = None,
        burn_in: int = 0,
        on_snapshot: Callable[[Snapshot], None] | None = None,
    ) -> RunReport:
        """Advance by exactly ``n_collisions`` collisions.

        Observers are called after every step with the collision record and
        the simulation (this takes the per-step path). Snapshots of the
        running means are taken at log-spaced recorded-collision counts.
        ``burn_in`` collisions are run first and excluded from the averages.
        """
        if isinstance(n_collisions, bool) or int(n_collisions) != n_collisions or n_collisions < 1:
            raise ModelError(f"n_collisions must be a positive integer, got {n_collisions!r}")
        n_collisions = int(n_collisions)
        if burn_in:
            self._advance(int(burn_in), observers)
            self.reset_stats()
        snapshots: list[Snapshot] = []
        if snapshot_ratio:
            base = self._kernel.means()[0]
            for target in log_schedule(base + n_collisions, snapshot_ratio):
                if target <= base:
                    continue
                have = self._kernel.means()[0]
                self._advance(target - have, observers)
                n, m0, m = self._kernel.means()
                snap = Snapshot(int(n), float(m0), m)
                snapshots.append(snap)
                if on_snapshot is not None:
                    on_snapshot(snap)
        else:
            self._advance(n_collisions, observers)
        stats = self.stats()
        return RunReport(self.state, stats, stats.drift, snapshots)

    def _advance(self, n: int, observers: Iterable[Callable] = ()) -> None:
        observers = list(observers)
        if not observers:
            self._kernel.run(n)
            return
        for _ in range(n):
            rec = self.step()
            for obs in observers:
                obs(rec, self)

    # -- checkpoints ----------------------------------------------------------
    def checkpoint(self) -> dict:
        st = self.state
        p = self.params
        acc = self._kernel.export_accumulators()
        return {
            "format": CHECKPOINT_FORMAT,
            "version": 1,
            "params": {"N": p.N, "E_total": _fmt(p.E_total), "mode": p.mode,
                       "M": _fmt(p.M), "c": _fmt(p.c), "k": _fmt(p.k)},
            "rounding": self.rounding,
            "rng": {"master_seed": str(self.rng.master_seed), "key": list(self.rng.key),
                    **self.rng.get_state()},
            "state": {
                "count": st.count,
                "time": _fmt(st.time),
                "E0": _fmt(st.E0),
                "direction": st.direction,
                "energies": [_fmt(x) for x in st.energies],
                "actions": [int(x) for x in st.actions],
                "parity": [int(x) for x in st.parity],
                "next_time": [_fmt(x) for x in st.next_time],
            },
            "accumulators": {
                k: ([_fmt(x) for x in v] if k != "last" else [int(x) for x in v])
                if isinstance(v, list) else (int(v) if k == "nrec" else _fmt(v))
                for k, v in acc.items()
            },
        }

    def save_checkpoint(self, path) -> None:
        Path(path).write_text(json.dumps(self.checkpoint(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def from_checkpoint(cls, data: dict, backend: str | None = None) -> "Simulation":
        if data.get("format") != CHECKPOINT_FORMAT:
            raise ModelError("not a bbsim checkpoint")
        pp = data["params"]
        params = ModelParams(int(pp["N"]), float(pp["E_total"]), pp["mode"],
                             M=float(pp["M"]), c=float(pp["c"]), k=float(pp["k"]))
        r = data["rng"]
        rng = RngStream(int(r["master_seed"]), r["key"])
        rng.set_state(r)
        s = data["state"]
        state = SystemState(
            np.array([float(x) for x in s["energies"]]),
            np.array(s["actions"], dtype=np.int64),
            np.array(s["parity"], dtype=np.int64),
            np.array([float(x) for x in s["next_time"]]),
            float(s["E0"]),
            int(s["direction"]),
            float(s["time"]),
            int(s["count"]),
        )
        sim = cls(params, state, rng, data.get("rounding", "coin"), backend)
        acc = {
            k: (int(v) if k == "nrec" else [int(x) for x in v] if k == "last"
                else [float(x) for x in v] if isinstance(v, list) else float(v))
            for k, v in data["accumulators"].items()
        }
        sim._kernel.import_accumulators(acc)
        return sim

    @classmethod
    def load_checkpoint(cls, path, backend: str | None = None) -> "Simulation":
        return cls.from_checkpoint(json.loads(Path(path).read_text(encoding="utf-8")), backend)
