"""Action discretization for the discrete model.

After each collision the oscillator action ``I = E / omega`` is replaced by
one of its two neighbouring integers and the roundoff energy
``(I - n) * omega`` is handed to the heavy particle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .model import ModelError

ROUNDING_MODES = ("coin", "weighted")


@dataclass(frozen=True)
class QuantizeOutcome:
    n: int
    delta_E: float
    forced: bool = False


def discretize(
    I_raw: float,
    omega: float,
    E0_available: float,
    coin: bool | Callable[[], bool],
) -> QuantizeOutcome:
    """Round ``I_raw`` to a neighbouring integer and return the roundoff energy.

    ``coin`` is the random choice (True means ceiling), either as a value or
    as a zero-argument callable; a callable is only invoked when ``I_raw`` is
    not already an integer. If the ceiling would cost the particle more
    energy than it holds, the floor is forced and ``forced`` is set.
    """
    if I_raw < 0 or omega <= 0 or E0_available < 0:
        raise ModelError(
            f"discretize needs I_raw >= 0, omega > 0, E0 >= 0; got {I_raw}, {omega}, {E0_available}"
        )
    fl = math.floor(I_raw)
    if I_raw == fl:
        return QuantizeOutcome(int(fl), 0.0)
    up = coin() if callable(coin) else bool(coin)
    if up:
        n = fl + 1
        delta = (I_raw - n) * omega
        if E0_available + delta >= 0.0:
            return QuantizeOutcome(int(n), delta)
        return QuantizeOutcome(int(fl), (I_raw - fl) * omega, forced=True)
    return QuantizeOutcome(int(fl), (I_raw - fl) * omega)


def weighted_coin(I_raw: float, uniform: Callable[[], float]) -> bool:
    """Expectation-preserving choice: ceiling with probability frac(I_raw)."""
    return uniform() < I_raw - math.floor(I_raw)
