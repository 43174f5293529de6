"""Build the objects of a run from a RunConfig."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .chain import (CalibratedBounds, ChainConfig, QuadSettings, build_chain, calibrate,
                    load_chain, serialize_chain)
from .config import RunConfig, parse_complex
from .dynamics import ClassifyLimits
from .geometry import spiral_point
from .params import ConstructionParams, derive_params
from .product import ProductEvaluator
from .render import GridSpec

CHAIN_FILE = "chain.txt"


def make_params(cfg: RunConfig) -> ConstructionParams:
    return derive_params(cfg.rho, cfg.margin, cfg.delta, cfg.p_max, cfg.theta_tol,
                         (cfg.ratio1, cfg.ratio2, cfg.ratio3))


def make_evaluator(cfg: RunConfig, params: Optional[ConstructionParams] = None) -> ProductEvaluator:
    return ProductEvaluator(params or make_params(cfg), K_direct=cfg.K_direct, window=cfg.window,
                            r_asym=cfg.r_asym, quad_nodes=cfg.product_nodes,
                            near_count=cfg.near_count, direct_dispatch_max=cfg.direct_dispatch_max)


def make_quad(cfg: RunConfig) -> QuadSettings:
    return QuadSettings(nodes=cfg.chain_nodes, tol=cfg.quad_tol, panel_max=cfg.panel_max,
                        decay_digits=cfg.decay_digits, fast_eps=cfg.fast_eps,
                        valley_factor=cfg.valley_factor)


@dataclass
class Calibrated:
    chain: ChainConfig
    bounds: CalibratedBounds
    ratios: dict


def calibrate_from(cfg: RunConfig, ev: Optional[ProductEvaluator] = None) -> Calibrated:
    ev = ev or make_evaluator(cfg)
    chain, ratios = build_chain(ev, cfg.t_scan_max, cfg.scan_grid, cfg.n_start, cfg.n_max,
                                cfg.a_tol, make_quad(cfg))
    bounds = calibrate(chain, r_fit_hi=cfg.r_fit_hi, n_radii=cfg.n_radii, n_theta=cfg.n_theta,
                       safety=cfg.safety)
    return Calibrated(chain, bounds, ratios)


def save_chain(cal: Calibrated, cfg: RunConfig, out_dir: Path) -> Path:
    path = out_dir / CHAIN_FILE
    path.write_text(serialize_chain(cal.chain, cal.bounds, cfg.chain_hash()))
    return path


def chain_for(cfg: RunConfig, out_dir: Path) -> Calibrated:
    """Load the serialized chain from out_dir, or calibrate and store it.

    A stored chain from a different configuration is an error, not a cache miss.
    """
    path = out_dir / CHAIN_FILE
    ev = make_evaluator(cfg)
    if path.exists():
        chain, bounds = load_chain(path.read_text(), ev, cfg.chain_hash(), make_quad(cfg))
        if bounds is not None:
            return Calibrated(chain, bounds, {})
    cal = calibrate_from(cfg, ev)
    save_chain(cal, cfg, out_dir)
    return cal


def limits_for(cfg: RunConfig, bounds: CalibratedBounds) -> ClassifyLimits:
    return ClassifyLimits(cfg.k_max, cfg.escape_factor * bounds.r1, cfg.fixpoint_tol)


def grid_for(cfg: RunConfig, chain: ChainConfig, bounds: CalibratedBounds) -> GridSpec:
    center = (complex(spiral_point(2.5 * bounds.r1, chain.params.c)) if cfg.center == "auto"
              else parse_complex(cfg.center))
    return GridSpec(center, cfg.width, cfg.height, cfg.nx, cfg.ny, limits_for(cfg, bounds))


def orbit_seed(cfg: RunConfig, chain: ChainConfig, bounds: CalibratedBounds) -> complex:
    if cfg.orbit_seed == "auto":
        return complex(spiral_point(2.0 * bounds.r1, chain.params.c))
    return parse_complex(cfg.orbit_seed)

