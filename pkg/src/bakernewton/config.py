"""Run configuration: plain ``key = value`` lines with ``#`` comments."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Optional

from .errors import ConfigError

# keys that decide the calibrated chain; everything else may change freely
CHAIN_KEYS = (
    "rho", "delta", "margin", "p_max", "theta_tol", "ratio1", "ratio2", "ratio3",
    "K_direct", "window", "r_asym", "product_nodes", "near_count", "direct_dispatch_max",
    "t_scan_max", "scan_grid", "n_start", "n_max", "a_tol",
    "chain_nodes", "quad_tol", "panel_max", "decay_digits", "fast_eps", "valley_factor",
    "r_fit_hi", "n_radii", "n_theta", "safety",
)


@dataclass(frozen=True)
class RunConfig:
    # construction parameters
    rho: float = 0.95
    delta: float = 1.0
    margin: float = 0.02
    p_max: int = 10 ** 6
    theta_tol: float = 1e-10
    ratio1: float = 0.8
    ratio2: float = 0.5
    ratio3: float = 0.25
    # canonical product
    K_direct: int = 10 ** 7
    window: float = 8.0
    r_asym: float = 1e8
    product_nodes: int = 20
    near_count: int = 32
    direct_dispatch_max: int = 4096
    # chain
    t_scan_max: float = 1e4
    scan_grid: int = 2000
    n_start: int = 4
    n_max: int = 64
    a_tol: float = 1e-8
    chain_nodes: int = 16
    quad_tol: float = 1e-12
    panel_max: float = 2.0
    decay_digits: float = 40.0
    fast_eps: float = 1e-4
    valley_factor: float = 3.0
    # calibration
    r_fit_hi: float = 2000.0
    n_radii: int = 28
    n_theta: int = 7
    safety: float = 0.5
    # dynamics
    k_max: int = 32
    escape_factor: float = 1000.0      # escape radius = escape_factor * r1
    fixpoint_tol: float = 1e-10
    samples: int = 10_000
    r_test_factor: float = 1000.0      # invariance radii up to r_test_factor * r1
    outside_probes: int = 100
    orbit_seed: str = "auto"           # complex literal, or auto = L(2 r1)
    orbit_steps: int = 20
    # render
    center: str = "auto"               # complex literal, or auto = L(2.5 r1)
    width: float = 40.0
    height: float = 40.0
    nx: int = 512
    ny: int = 512
    tiles: int = 64
    # output
    out_dir: str = "out"
    rng_seed: int = 0

    def chain_text(self) -> str:
        return "".join(f"{k} = {getattr(self, k)!r}\n" for k in CHAIN_KEYS)

    def chain_hash(self) -> str:
        return hashlib.sha256(self.chain_text().encode()).hexdigest()[:16]

    def dump(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str, where: str):
    kind = _TYPES[key]
    try:
        if kind == "int":
            v = float(raw)
            if not v.is_integer():
                raise ValueError
            return int(v)
        if kind == "float":
            v = float(raw)
            if math.isnan(v):
                raise ValueError
            return v
        if raw.startswith(("'", '"')) and raw.endswith(raw[0]) and len(raw) >= 2:
            raw = raw[1:-1]
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {kind} for '{key}'") from None


def _apply(cfg: RunConfig, pairs: Iterable[tuple[str, str, str]]) -> RunConfig:
    updates = {}
    for key, raw, where in pairs:
        if key not in _TYPES:
            raise ConfigError(f"{where}: unknown key '{key}'")
        updates[key] = _convert(key, raw, where)
    return replace(cfg, **updates)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    pairs = []
    for no, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{no}: expected 'key = value', got {line.strip()!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        pairs.append((key, raw, f"{source}:{no}"))
    return _apply(RunConfig(), pairs)


def load_config(path: Optional[str], overrides: Iterable[str] = ()) -> RunConfig:
    if path is None:
        cfg = RunConfig()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = parse_config(text, str(path))
    pairs = []
    for i, item in enumerate(overrides, 1):
        if "=" not in item:
            raise ConfigError(f"--set #{i}: expected key=value, got {item!r}")
        key, raw = (s.strip() for s in item.split("=", 1))
        pairs.append((key, raw, f"--set #{i}"))
    return _apply(cfg, pairs)


def parse_complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise ConfigError(f"cannot read {text!r} as a complex number") from None
