"""Command-line entry point: derive, calibrate, verify, iterate and render.

Exit status is 0 when every check passes, 1 when any check fails or a
computation errors out, and 2 for usage or configuration errors.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import verify as vf
from .chain import calibration_report
from .config import RunConfig, load_config
from .dynamics import check_invariance, orbit, write_orbit_csv
from .errors import BakerNewtonError, ConfigError
from .params import find_theta_window, h0_closed_form, h_spiral
from .pipeline import (calibrate_from, chain_for, grid_for, make_evaluator, make_params,
                       orbit_seed, save_chain)
from .render import render_grid, write_csv, write_pnm

SUBCOMMANDS = ("derive", "profile-h", "verify-product", "calibrate", "verify-asymptotics",
               "invariance", "orbit", "render")


def _emit(out: Path, name: str, lines: Sequence[str]) -> None:
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    (out / name).write_text(text)


def _checks(out: Path, name: str, checks: Sequence[vf.Check]) -> int:
    _emit(out, name, [c.line() for c in checks])
    return 0 if all(c.passed for c in checks) else 1


def cmd_derive(cfg: RunConfig, out: Path, threads: int) -> int:
    p = make_params(cfg)
    lines = [f"rho = {p.rho}", f"delta = {p.delta}", f"margin = {cfg.margin}",
             f"p = {p.p}", f"q = {p.q}", f"c = {p.c!r}", f"mu = {p.mu!r}",
             f"theta0 = {p.theta0!r}", f"theta1 = {p.theta1!r}", f"theta2 = {p.theta2!r}",
             f"theta3 = {p.theta3!r}", f"theta0_capped = {p.theta0_capped}",
             f"ratios = {cfg.ratio1} {cfg.ratio2} {cfg.ratio3}"]
    bad = p.check()
    lines += [f"violated: {b}" for b in bad]
    _emit(out, "derive.txt", lines)
    return 1 if bad else 0


def cmd_profile_h(cfg: RunConfig, out: Path, threads: int) -> int:
    p = make_params(cfg)
    th = np.linspace(-np.pi, np.pi, 4001)
    th = th[th != 0]
    write_csv(zip(th, h_spiral(p, th)), out / "h_profile.csv", ("theta", "h"))
    theta0, capped = find_theta_window(p, cfg.theta_tol)
    _emit(out, "profile_h.txt", [f"h(0) = {h0_closed_form(p)!r}", f"theta0 = {theta0!r}",
                                 f"capped = {capped}", f"profile = {out / 'h_profile.csv'}"])
    return 0


def cmd_verify_product(cfg: RunConfig, out: Path, threads: int) -> int:
    ev = make_evaluator(cfg)
    checks = [vf.check_product_regimes(ev, seed=cfg.rng_seed), vf.check_indicator_convergence(ev),
              vf.check_tail_bound(ev, seed=cfg.rng_seed)]
    return _checks(out, "verify_product.txt", checks)


def cmd_calibrate(cfg: RunConfig, out: Path, threads: int) -> int:
    t = time.perf_counter()
    cal = calibrate_from(cfg)
    path = save_chain(cal, cfg, out)
    b = cal.bounds
    report = calibration_report(cal.chain, b, cal.ratios)
    (out / "calibration.txt").write_text(report)
    rows = [(k, v) for k, v in b.etas.items()]
    rows += [(k, getattr(b, k)) for k in ("r0", "r1", "r_fit", "r_f_cut", "r_n_cut", "r_g2_cut",
                                           "r_lo", "r_hi")]
    rows += [("fit_residual_" + k, v) for k, v in b.residuals]
    write_csv(rows, out / "calibration.csv", ("name", "value"))
    sys.stdout.write(report + f"chain = {path}\nelapsed = {time.perf_counter() - t:.1f} s\n")
    return 0


def cmd_verify_asymptotics(cfg: RunConfig, out: Path, threads: int) -> int:
    cal = chain_for(cfg, out)
    ch, b = cal.chain, cal.bounds
    checks = [vf.check_symmetries(ch, seed=cfg.rng_seed), vf.check_f_asymptotics(ch, b),
              vf.check_derivative(ch, b, seed=cfg.rng_seed), vf.check_newton_residual(ch, b)]
    return _checks(out, "verify_asymptotics.txt", checks)


def cmd_invariance(cfg: RunConfig, out: Path, threads: int) -> int:
    cal = chain_for(cfg, out)
    rep = check_invariance(cal.chain, cal.bounds, samples=cfg.samples, rng_seed=cfg.rng_seed,
                           r_test_max=cfg.r_test_factor * cal.bounds.r1,
                           outside_probes=cfg.outside_probes)
    rep.write_failures(out / "invariance_failures.csv")
    _emit(out, "invariance.txt", [rep.summary()])
    return 0 if rep.passed else 1


def cmd_orbit(cfg: RunConfig, out: Path, threads: int) -> int:
    cal = chain_for(cfg, out)
    seed = orbit_seed(cfg, cal.chain, cal.bounds)
    rec = orbit(cal.chain, cal.bounds, seed, cfg.orbit_steps, cfg.fixpoint_tol)
    write_orbit_csv(rec, out / "orbit.csv", cal.chain.params.c)
    lines = [f"seed = {seed!r}", f"steps = {len(rec.steps)}", f"stop = {rec.stop}"]
    if rec.switch_radius is not None:
        lines.append(f"asymptotic regime from log|z| = {rec.switch_radius!r}")
    _emit(out, "orbit.txt", lines)
    return 1 if rec.stop.startswith("error") else 0


def cmd_render(cfg: RunConfig, out: Path, threads: int) -> int:
    cal = chain_for(cfg, out)
    grid = grid_for(cfg, cal.chain, cal.bounds)
    t = time.perf_counter()
    img = render_grid(cal.chain, cal.bounds, grid, tiles=cfg.tiles, workers=threads)
    path = out / "render.pnm"
    write_pnm(img, path)
    counts = ", ".join(f"{k} {v}" for k, v in img.counts().items())
    _emit(out, "render.txt", [f"image = {path}", f"center = {grid.center!r}",
                              f"size = {grid.nx}x{grid.ny}", f"pixels: {counts}",
                              f"elapsed = {time.perf_counter() - t:.1f} s"])
    return 0


COMMANDS = {"derive": cmd_derive, "profile-h": cmd_profile_h, "verify-product": cmd_verify_product,
            "calibrate": cmd_calibrate, "verify-asymptotics": cmd_verify_asymptotics,
            "invariance": cmd_invariance, "orbit": cmd_orbit, "render": cmd_render}


def run(subcommand: str, config_path: Optional[str] = None, overrides: Sequence[str] = (),
        out_dir: Optional[str] = None, threads: int = 1) -> int:
    try:
        cfg = load_config(config_path, overrides)
        if subcommand not in COMMANDS:
            raise ConfigError(f"unknown subcommand {subcommand!r}")
        out = Path(out_dir or cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[subcommand](cfg, out, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (BakerNewtonError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="bakernewton", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", metavar="PATH")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--out", metavar="DIR")
    ap.add_argument("--threads", type=int, default=1, metavar="N", help="render workers, 0 = auto")
    args = ap.parse_args(argv)
    if args.threads < 0:
        ap.error("--threads must be >= 0")
    return run(args.subcommand, args.config, args.overrides, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
