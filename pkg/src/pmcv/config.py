"""Verification config files (YAML) and their validation."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

__all__ = [
    "CHECKS",
    "DEFAULT_TOLERANCES",
    "ConfigError",
    "VerificationConfig",
    "load_config",
    "parse_config",
    "parse_checks",
    "parse_grid",
]

# dependency order; each check lists the checks it needs
CHECKS = {
    "extrinsic": (),
    "pmc": ("extrinsic",),
    "biharmonic": ("extrinsic",),
    "simons": ("pmc",),
    "codazzi": ("pmc",),
    "deltaT": ("pmc",),
    "flatness": ("pmc", "biharmonic"),
    "classification": ("pmc", "biharmonic"),
}

DEFAULT_TOLERANCES = {
    "extrinsic": 1e-8,
    "curvature": 1e-5,
    "gauge": 1e-10,
    "pmc": 1e-6,
    "algebraic": 1e-8,
    "bitension": 5e-3,
    "simons": 5e-4,
    "codazzi": 1e-4,
    "deltaT": 1e-4,
    "flatness": 1e-10,
    "classification": 1e-8,
    "order": 1.5,
}

_TOP_KEYS = {"source", "params", "grid", "fd_step", "checks", "tolerances", "seed", "out", "selector", "identity_points"}


class ConfigError(ValueError):
    """The config file is malformed or inconsistent."""


@dataclass(frozen=True)
class VerificationConfig:
    """A validated verification run.

    ``catalog`` and ``dsl`` are mutually exclusive; ``c`` is required for
    DSL sources and taken from the entry for catalog sources.
    """

    catalog: str | None = None
    dsl: str | None = None
    c: float | None = None
    params: dict = field(default_factory=dict)
    grid: tuple[int, ...] | None = None
    fd_step: float | str = "auto"
    checks: tuple[str, ...] = tuple(CHECKS)
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    out: str | None = None
    selector: str | int = "H"
    identity_points: int = 64

    def tol(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    def echo(self) -> dict:
        """Normalized config as plain data, for the report."""
        src: dict[str, Any] = {"catalog": self.catalog} if self.catalog else {"dsl": self.dsl, "c": self.c}
        return {
            "source": src,
            "params": dict(sorted(self.params.items())),
            "grid": None if self.grid is None else list(self.grid),
            "fd_step": self.fd_step,
            "checks": list(self.checks),
            "tolerances": dict(sorted({**DEFAULT_TOLERANCES, **self.tolerances}.items())),
            "seed": self.seed,
            "selector": self.selector,
            "identity_points": self.identity_points,
        }

    def override(self, **kw) -> "VerificationConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if not kw:
            return self
        merged = replace(self, **kw)
        _validate(merged)
        return merged


def parse_grid(text) -> tuple[int, ...]:
    """``"32x32"`` or a list of ints."""
    if isinstance(text, str):
        parts = text.lower().replace("×", "x").split("x")
    elif isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        raise ConfigError(f"grid must be like '32x32' or a list, got {text!r}")
    try:
        counts = tuple(int(p) for p in parts)
    except (TypeError, ValueError):
        raise ConfigError(f"grid counts must be integers, got {text!r}") from None
    if any(k < 3 for k in counts):
        raise ConfigError(f"grid counts must be at least 3 per axis, got {counts}")
    return counts


def _parse_step(value):
    if value is None or value == "auto":
        return "auto"
    try:
        h = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"fd_step must be a positive number or 'auto', got {value!r}") from None
    if not h > 0:
        raise ConfigError(f"fd_step must be positive, got {h}")
    return h


def parse_checks(value) -> tuple[str, ...]:
    if isinstance(value, str):
        value = [v.strip() for v in value.split(",") if v.strip()]
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError("checks must be a nonempty list")
    unknown = [v for v in value if v not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown checks {unknown}; known: {', '.join(CHECKS)}")
    # run in dependency order regardless of the order given
    return tuple(k for k in CHECKS if k in value)


def _validate(cfg: VerificationConfig) -> None:
    if (cfg.catalog is None) == (cfg.dsl is None):
        raise ConfigError("source needs exactly one of 'catalog' or 'dsl'")
    if cfg.dsl is not None and cfg.c is None:
        raise ConfigError("a dsl source needs the ambient curvature 'c'")
    if cfg.catalog is not None and cfg.params:
        raise ConfigError("catalog sources take their parameters from the id, not 'params'")
    unknown = set(cfg.tolerances) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ConfigError(f"unknown tolerance keys {sorted(unknown)}")
    if cfg.identity_points < 1:
        raise ConfigError("identity_points must be positive")


def parse_config(data: Any, base_dir: str | os.PathLike | None = None) -> VerificationConfig:
    """Build a config from parsed YAML; relative DSL paths resolve against ``base_dir``."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    extra = set(data) - _TOP_KEYS
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    src = data.get("source")
    if not isinstance(src, dict):
        raise ConfigError("config needs a 'source' section")
    bad = set(src) - {"catalog", "dsl", "c"}
    if bad:
        raise ConfigError(f"unknown source keys {sorted(bad)}")
    dsl = src.get("dsl")
    if dsl is not None:
        p = Path(str(dsl))
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        dsl = str(p)
    try:
        c = None if src.get("c") is None else float(src["c"])
        params = {str(k): float(v) for k, v in (data.get("params") or {}).items()}
        tolerances = {str(k): float(v) for k, v in (data.get("tolerances") or {}).items()}
        seed = int(data.get("seed", 0))
        identity_points = int(data.get("identity_points", 64))
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"bad value in config: {exc}") from None
    selector = data.get("selector", "H")
    if selector != "H" and not isinstance(selector, int):
        raise ConfigError("selector must be 'H' or a normal frame index")
    cfg = VerificationConfig(
        catalog=None if src.get("catalog") is None else str(src["catalog"]),
        dsl=dsl,
        c=c,
        params=params,
        grid=None if data.get("grid") is None else parse_grid(data["grid"]),
        fd_step=_parse_step(data.get("fd_step", "auto")),
        checks=parse_checks(data.get("checks", list(CHECKS))),
        tolerances=tolerances,
        seed=seed,
        out=None if data.get("out") is None else str(data["out"]),
        selector=selector,
        identity_points=identity_points,
    )
    _validate(cfg)
    return cfg


def load_config(path: str | os.PathLike) -> VerificationConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    return parse_config(data, base_dir=path.parent)
