"""Run and sweep configuration files.

Flat ``key = value`` lines grouped in ``[model]``, ``[run]``, ``[sweep]`` and
``[output]`` sections; ``#`` starts a comment. A file with a ``[sweep]``
section describes a sweep, otherwise a single run. ``mode`` is required;
everything else defaults to the reference constants::

    [model]
    mode = discrete
    N = 64
    E = 60

    [run]
    collisions = 10000000
    seed = 1
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable

from .model import DEFAULT_C, DEFAULT_K, GOLDEN_MASS, MODES, InitialCondition, ModelError, ModelParams
from .quantize import ROUNDING_MODES

FIG2_MODES = (1, 8, 16, 24, 32, 40)
DEFAULT_SNAPSHOT_RATIO = 10 ** (1 / 8)


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{': '.join(where)}: {message}" if where else message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class RunConfig:
    mode: str
    N: int = 64
    E: float = 60.0
    M: float = GOLDEN_MASS
    c: float = DEFAULT_C
    k: float = DEFAULT_K
    collisions: int = 10_000_000
    seed: int = 1
    initial: str = "particle"
    rounding: str = "coin"
    averaging: str = "collision"
    burn_in: int = 0
    snapshot_ratio: float = DEFAULT_SNAPSHOT_RATIO
    convergence_modes: tuple[int, ...] = FIG2_MODES
    output_dir: str = "out"

    def model_params(self) -> ModelParams:
        return ModelParams(self.N, self.E, self.mode, M=self.M, c=self.c, k=self.k)

    def initial_condition(self) -> InitialCondition:
        return InitialCondition.parse(self.initial)


@dataclass(frozen=True)
class SweepConfig:
    mode: str
    N_values: tuple[int, ...] = (8, 16, 32, 64)
    E_values: tuple[float, ...] = (25.0, 100.0, 225.0, 400.0, 1600.0)
    M: float = GOLDEN_MASS
    c: float = DEFAULT_C
    k: float = DEFAULT_K
    collisions: int = 10_000_000
    seeds_per_cell: int = 1
    workers: int = 1
    seed: int = 1
    initial: str = "particle"
    rounding: str = "coin"
    averaging: str = "collision"
    burn_in: int = 0
    output_dir: str = "out"

    def cell_config(self, N: int, E: float) -> RunConfig:
        return RunConfig(mode=self.mode, N=N, E=E, M=self.M, c=self.c, k=self.k,
                         collisions=self.collisions, seed=self.seed, initial=self.initial,
                         rounding=self.rounding, averaging=self.averaging, burn_in=self.burn_in,
                         output_dir=self.output_dir)


# -- value converters -------------------------------------------------------------

def _int(s: str) -> int:
    f = float(s)  # accepts 1e7
    if not math.isfinite(f) or f != int(f):
        raise ValueError(f"expected an integer, got {s!r}")
    return int(f) if "e" in s.lower() or "." in s else int(s)


def _float(s: str) -> float:
    f = float(s)
    if not math.isfinite(f):
        raise ValueError(f"expected a finite number, got {s!r}")
    return f


def _ints(s: str) -> tuple[int, ...]:
    return tuple(_int(x.strip()) for x in s.split(",") if x.strip())


def _floats(s: str) -> tuple[float, ...]:
    return tuple(_float(x.strip()) for x in s.split(",") if x.strip())


def _choice(options):
    def conv(s: str) -> str:
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {s!r}")
        return s
    return conv


def _initial(s: str) -> str:
    try:
        return InitialCondition.parse(s).render()
    except (ModelError, ValueError) as exc:
        raise ValueError(str(exc)) from None


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _all_pos(xs):
    return len(xs) > 0 and all(x > 0 for x in xs)


# section -> key -> (attribute, converter, check, constraint text)
Spec = tuple[str, Callable, Callable | None, str]
_MODEL: dict[str, Spec] = {
    "mode": ("mode", _choice(MODES), None, ""),
    "N": ("N", _int, lambda n: n >= 1, "must be >= 1"),
    "E": ("E", _float, _pos, "must be > 0"),
    "M": ("M", _float, _pos, "must be > 0"),
    "c": ("c", _float, _pos, "must be > 0"),
    "k": ("k", _float, _pos, "must be > 0"),
}
_RUN: dict[str, Spec] = {
    "collisions": ("collisions", _int, lambda n: n >= 1, "must be >= 1"),
    "seed": ("seed", _int, lambda s: 0 <= s < 2 ** 64, "must be a 64-bit unsigned integer"),
    "initial": ("initial", _initial, None, ""),
    "rounding": ("rounding", _choice(ROUNDING_MODES), None, ""),
    "averaging": ("averaging", _choice(("collision", "time")), None, ""),
    "burn_in": ("burn_in", _int, _nonneg, "must be >= 0"),
    "snapshot_ratio": ("snapshot_ratio", _float, lambda r: r > 1, "must be > 1"),
    "convergence_modes": ("convergence_modes", _ints, lambda xs: all(x >= 1 for x in xs), "entries must be >= 1"),
}
_SWEEP: dict[str, Spec] = {
    "N": ("N_values", _ints, lambda xs: len(xs) > 0 and all(x >= 1 for x in xs), "needs entries >= 1"),
    "E": ("E_values", _floats, _all_pos, "needs entries > 0"),
    "seeds_per_cell": ("seeds_per_cell", _int, lambda n: n >= 1, "must be >= 1"),
    "collisions": ("collisions", _int, lambda n: n >= 1, "must be >= 1"),
    "workers": ("workers", _int, lambda n: n >= 1, "must be >= 1"),
}
_OUTPUT: dict[str, Spec] = {"dir": ("output_dir", str, lambda s: len(s) > 0, "must not be empty")}
SECTIONS = {"model": _MODEL, "run": _RUN, "sweep": _SWEEP, "output": _OUTPUT}


def _read(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    data: dict[str, dict[str, tuple[str, int]]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", line=lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", line=lineno)
            if section in data:
                raise ConfigError(f"duplicate section [{section}]", line=lineno)
            data[section] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        if section is None:
            raise ConfigError("key outside of any section", line=lineno)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in SECTIONS[section]:
            raise ConfigError(f"unknown key in [{section}]", key=key, line=lineno)
        if key in data[section]:
            raise ConfigError("duplicate key", key=key, line=lineno)
        data[section][key] = (value, lineno)
    return data


def parse_config(text: str) -> RunConfig | SweepConfig:
    data = _read(text)
    is_sweep = "sweep" in data
    kwargs: dict = {}
    for section, entries in data.items():
        table = SECTIONS[section]
        for key, (value, lineno) in entries.items():
            if is_sweep and section == "model" and key in ("N", "E"):
                raise ConfigError("set N and E lists in [sweep] for a sweep", key=key, line=lineno)
            if is_sweep and section == "run" and key == "collisions":
                raise ConfigError("set collisions in [sweep] for a sweep", key=key, line=lineno)
            attr, conv, check, why = table[key]
            try:
                val = conv(value)
            except ValueError as exc:
                raise ConfigError(f"type mismatch: {exc}", key=key, line=lineno) from None
            if check is not None and not check(val):
                raise ConfigError(f"constraint violated: {why} (got {value!r})", key=key, line=lineno)
            kwargs[attr] = val
    if "mode" not in kwargs:
        raise ConfigError("missing required key", key="mode")
    if is_sweep:
        kwargs.pop("snapshot_ratio", None)
        kwargs.pop("convergence_modes", None)
        cfg = SweepConfig(**kwargs)
    else:
        cfg = RunConfig(**kwargs)
        try:
            params = cfg.model_params()
        except ModelError as exc:
            raise ConfigError(str(exc)) from None
        ic = cfg.initial_condition()
        if ic.kind == "oscillator" and not 1 <= ic.index <= params.N:
            raise ConfigError(f"initial oscillator {ic.index} outside 1..{params.N}", key="initial")
        bad = [m for m in cfg.convergence_modes if m > params.N]
        if bad:
            # modes beyond N are dropped rather than rejected, so the Fig. 2 default works for small N
            cfg = RunConfig(**{**{f.name: getattr(cfg, f.name) for f in fields(cfg)},
                               "convergence_modes": tuple(m for m in cfg.convergence_modes if m <= params.N)})
    return cfg


def _fmt_value(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_config(cfg: RunConfig | SweepConfig) -> str:
    """Normalized text form; ``parse_config(render_config(c)) == c``."""
    lines = []
    for section, table in SECTIONS.items():
        if section == "sweep" and not isinstance(cfg, SweepConfig):
            continue
        body = []
        for key, (attr, *_rest) in table.items():
            if not hasattr(cfg, attr):
                continue
            if isinstance(cfg, SweepConfig) and section == "model" and key in ("N", "E"):
                continue
            if isinstance(cfg, SweepConfig) and section == "run" and key in ("collisions", "snapshot_ratio", "convergence_modes"):
                continue
            body.append(f"{key} = {_fmt_value(getattr(cfg, attr))}")
        if body:
            lines.append(f"[{section}]")
            lines.extend(body)
            lines.append("")
    return "\n".join(lines)


def normalize_config(text: str) -> str:
    return render_config(parse_config(text))
