"""Run configuration: plain ``key = value`` text, one key per line.

Blank lines and ``#`` comments are ignored. Lists are comma separated.
Unknown keys are an error.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

ENGINES = ("lattice-stochastic", "continuum-deterministic", "verify")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    engine: str = "lattice-stochastic"
    # lattice
    L: int = 4
    d: int = 2
    mass: float = 1.0
    coupling: float = 0.0
    spacing: float = 1.0
    interaction_power: int = 1
    # continuum
    box_length: float = 20.0
    n_max: int = 32
    n_boxes: int = 32
    # state and ensemble
    omega: int = 1
    preset: str = "random(0)"
    coefficients: list = field(default_factory=list)
    ensemble_size: int = 10000
    t0: float = 0.0
    t_max: float = 1.0
    checkpoints: list = field(default_factory=list)
    dt: float = 0.01
    dt_min: float = 1e-9
    eps_d: float = 1e-12
    eps_rho: float = 1e-10
    seed: int = 0
    out_dir: str = "runs/out"
    log_trajectories: int = 100
    tv_tolerance: Optional[float] = None

    def validate(self) -> "RunConfig":
        if self.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        for name in ("mass", "spacing", "box_length", "dt", "dt_min", "eps_d", "eps_rho"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.L < 1 or self.d not in (2, 4) or self.L * self.d > 24:
            raise ConfigError("lattice needs L >= 1, d in {2, 4} and L*d <= 24")
        if self.n_max < 0 or self.n_boxes < 1:
            raise ConfigError("n_max must be >= 0 and n_boxes >= 1")
        if self.engine != "verify" and self.ensemble_size < 1:
            raise ConfigError("ensemble_size must be at least 1")
        if self.engine == "continuum-deterministic" and self.omega not in (1, 2):
            raise ConfigError("the continuum engine supports omega in {1, 2}")
        if self.t_max < self.t0:
            raise ConfigError("t_max must not precede t0")
        for c in self.checkpoints:
            if not self.t0 <= c <= self.t_max:
                raise ConfigError(f"checkpoint {c} outside [t0, t_max]")
        if self.log_trajectories < 0:
            raise ConfigError("log_trajectories must be non-negative")
        return self

    @property
    def checkpoint_times(self) -> list[float]:
        return sorted(self.checkpoints) if self.checkpoints else [self.t_max]

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, list):
                v = ", ".join(_fmt(x) for x in v)
            else:
                v = _fmt(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["coefficients"] = [_fmt(c) for c in self.coefficients]
        return d

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        kinds = {f.name: f for f in dataclasses.fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in kinds:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            try:
                values[key] = _parse(key, value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
        return cls(**values).validate()

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def updated(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes).validate()


_INTS = {"L", "d", "interaction_power", "n_max", "n_boxes", "omega", "ensemble_size", "seed",
         "log_trajectories"}
_STRS = {"engine", "preset", "out_dir"}


def _parse(key: str, value: str):
    if key in _STRS:
        return value
    if key in _INTS:
        return int(value)
    if key == "checkpoints":
        return [float(v) for v in value.split(",") if v.strip()]
    if key == "coefficients":
        return [complex(v.replace(" ", "")) for v in value.split(",") if v.strip()]
    return float(value)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, complex):
        return repr(v).strip("()")
    if isinstance(v, float):
        return repr(v)
    return str(v)
