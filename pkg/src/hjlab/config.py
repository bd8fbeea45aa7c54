"""Declarative run configuration: ``key = value`` lines with ``#`` comments."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .grid import Grid
from .hamiltonian import HamiltonianSpec, InitialCondition, parse_hamiltonian, parse_psi


@dataclass(frozen=True)
class RunConfig:
    hamiltonian: str = "quadratic:0.5,0,0"
    psi: str = "cos"
    n: int = 512
    T: float = 0.5
    cfl: float = 0.4
    sigma: str = "auto"
    seeds: int = 64
    eps: float | None = None
    out: str = "hjlab-out"
    seed: int = 0
    dim: int = 1

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def hamiltonian_spec(self) -> HamiltonianSpec:
        return parse_hamiltonian(self.hamiltonian, dim=self.dim)

    def psi_spec(self) -> InitialCondition:
        return parse_psi(self.psi, dim=self.dim, rng=self.rng())

    def grid(self) -> Grid:
        return Grid(self.psi_spec().cell, (self.n,) * self.dim)

    def sigma_value(self):
        if self.sigma == "auto":
            return "auto"
        parts = [float(v) for v in str(self.sigma).split(",")]
        return parts[0] if len(parts) == 1 else tuple(parts)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            lines.append(f"{f.name} = {v!r}" if isinstance(v, float) else f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls().updated(parse_config_text(text))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())

    def updated(self, values: dict) -> "RunConfig":
        """Copy with ``values`` (strings or typed) coerced to the field types."""
        known = {f.name: f for f in fields(self)}
        coerced = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            if raw is None:
                continue
            default = getattr(RunConfig, key)
            if key == "eps":
                coerced[key] = None if str(raw).lower() == "none" else float(raw)
            elif isinstance(default, bool):
                coerced[key] = str(raw).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                coerced[key] = int(raw)
            elif isinstance(default, float):
                coerced[key] = float(raw)
            else:
                coerced[key] = str(raw)
        return replace(self, **coerced)


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        out[key.strip()] = value
    return out


def worker_count() -> int:
    """Worker cap from ``HJLAB_THREADS`` (default: CPU count)."""
    raw = os.environ.get("HJLAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1
