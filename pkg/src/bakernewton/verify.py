"""Numerical checks of the construction, shared by the CLI and the test suite.

Every check returns a ``Check``: a name, a verdict and a few lines of
evidence.  Nothing here raises on a failed property; failing is a result.
"""
from __future__ import annotations

import cmath
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import params as pm
from .chain import (CalibratedBounds, ChainConfig, compute_a, f_detail, f_prime, g2, g3, g4)
from .dynamics import (Kind, check_invariance, classify, newton_step, orbit, region_u,
                       sample_u, spiral_offset)
from .errors import BakerNewtonError
from .geometry import spiral_point
from .logspace import LogComplex, lc_to_cartesian
from .product import ProductEvaluator, Regime, log_pi, tail_bound


@dataclass
class Check:
    name: str
    passed: bool
    lines: list = field(default_factory=list)
    elapsed: float = 0.0

    def line(self) -> str:
        head = f"{'PASS' if self.passed else 'FAIL'} {self.name} ({self.elapsed:.2f} s)"
        return "\n".join([head] + ["    " + ln for ln in self.lines])


EPS = np.finfo(float).eps


class _Timer:
    def __enter__(self):
        self.t = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.dt = time.perf_counter() - self.t


def _rel(a: complex, b: complex) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a)


def _cart(v: LogComplex) -> complex:
    return lc_to_cartesian(v)


def _lrel(a: LogComplex, b: LogComplex) -> float:
    """|a/b - 1| computed in log space."""
    d = complex(a.lnmod - b.lnmod, a.arg - b.arg)
    return abs(cmath.exp(d) - 1)


# ---------------------------------------------------------------- h-profile

def h_limit(params, side: int = 1, d: float = 1e-9) -> float:
    """lim h(+-delta) as delta -> 0, by one Richardson step (error O(d^2))."""
    fn = (lambda t: pm.h_at(params, t)) if side > 0 else (lambda t: pm.h_signed(params, -t))
    return 2.0 * fn(d / 2) - fn(d)


def random_admissible(rng: np.random.Generator, count: int):
    out = []
    while len(out) < count:
        rho = float(rng.uniform(0.55, 0.99))
        p0 = pm.smallest_p(rho)
        p = int(p0 + rng.integers(0, 200))
        delta = float(math.exp(rng.uniform(math.log(0.1), math.log(10.0))))
        prm = pm.ConstructionParams.from_p(rho, delta, p)
        if not prm.check():
            out.append(prm)
    return out


def check_h_identity(samples: int = 100, seed: int = 0, tol: float = 1e-12) -> Check:
    with _Timer() as t:
        worst = 0.0
        for prm in random_admissible(np.random.default_rng(seed), samples):
            h0 = pm.h0_closed_form(prm)
            worst = max(worst, abs(h_limit(prm) - h0) / abs(h0))
    return Check("h-identity", worst < tol and t.dt < 1.0,
                 [f"max relative gap {worst:.3e} over {samples} parameter sets (tol {tol:g})"], t.dt)


def check_h_sign_law(n: int = 50, delta: float = 1e-6, tol: float = 1e-10) -> Check:
    """Sign of h(0) against mu on a (rho, p) grid, plus continuity across the spiral."""
    with _Timer() as t:
        rhos = np.linspace(0.51, 0.99, n)
        m = n
        while len(ps := np.unique(np.geomspace(2, 10 ** 5, m).round().astype(int))) < n:
            m += 1
        ps = ps[np.linspace(0, len(ps) - 1, n).round().astype(int)]
        bad = 0
        for rho in rhos:
            for p in ps:
                prm = pm.ConstructionParams.from_p(float(rho), 1.0, int(p))
                if (pm.h0_closed_form(prm) < 0) != (0.5 < prm.mu < 1.0):
                    bad += 1
        ref = pm.derive_params(0.95, 0.02)
        jump = abs(pm.h_at(ref, delta) - pm.h_signed(ref, -delta))
        lim_gap = abs(h_limit(ref, 1) - h_limit(ref, -1))
    ok = bad == 0 and jump < tol and t.dt < 1.0
    return Check("h-sign-law", ok, [
        f"{bad} sign mismatches on a {len(rhos)}x{len(ps)} grid",
        f"|h({delta:g}) - h_signed(-{delta:g})| = {jump:.3e} (tol {tol:g})",
        f"one-sided limits differ by {lim_gap:.3e}",
    ], t.dt)


# ---------------------------------------------------------------- product

def check_product_regimes(ev: ProductEvaluator, samples: int = 200, seed: int = 0,
                          r_max: float = 1e5, tol: float = 1e-8, asym_tol: float = 0.05) -> Check:
    rng = np.random.default_rng(seed)
    c = ev.params.c
    with _Timer() as t:
        lr = rng.uniform(0.0, math.log(r_max), samples)
        th = rng.uniform(-math.pi, math.pi, samples)
        worst = 0.0
        for a, b in zip(lr, th):
            w = LogComplex(float(a), float(b))
            d = log_pi(ev, w, force=Regime.DIRECT).lnmod
            h = log_pi(ev, w, force=Regime.HYBRID).lnmod
            worst = max(worst, abs(d - h))
        lines = [f"Direct vs Hybrid: max |d lnmod| = {worst:.3e} over {samples} points (tol {tol:g})"]
        ok = worst <= tol
        lr_a = math.log(ev.r_asym)
        for off in (math.pi / 2, math.pi, 3 * math.pi / 2):
            w = LogComplex(lr_a, c * lr_a + off)
            h = log_pi(ev, w, force=Regime.HYBRID).lnmod
            s = log_pi(ev, w, force=Regime.ASYMPTOTIC_VALUE, require_value=True).lnmod
            rel = abs(h - s) / ev.r_asym ** ev.params.rho
            ok &= rel <= asym_tol
            lines.append(f"theta = {off:.4f}: |Hybrid - Asymptotic| / r^rho = {rel:.3e}")
    return Check("product-regimes", ok and t.dt < 120, lines, t.dt)


def check_indicator_convergence(ev: ProductEvaluator, theta: float = math.pi, radii=(1e2, 1e3, 1e4),
                  rel: float = 0.05) -> Check:
    prm = ev.params
    with _Timer() as t:
        target = pm.h_at(prm, theta)
        devs = []
        for r in radii:
            lr = math.log(r)
            v = log_pi(ev, LogComplex(lr, prm.c * lr + theta)).lnmod
            devs.append(abs(v / r ** prm.rho - target))
    dec = all(b < a for a, b in zip(devs, devs[1:]))
    ok = dec and devs[-1] < rel * abs(target) and t.dt < 120
    return Check("indicator-convergence", ok, [f"h(theta) = {target:.6g}",
                                 "deviations " + ", ".join(f"{d:.3e}" for d in devs)], t.dt)


def brute_tail(ev: ProductEvaluator, w: complex, K: int, K_big: int = 100_000) -> float:
    """|sum_{K<k<=K_big} log(1 - w/a_k)| by plain summation."""
    zs = ev.seq.zeros(K + 1, K_big)
    return float(abs(np.sum(np.log1p(-w / zs))))


def check_tail_bound(ev: ProductEvaluator, samples: int = 100, seed: int = 0,
                     K_big: int = 100_000) -> Check:
    rng = np.random.default_rng(seed)
    seq = ev.seq
    with _Timer() as t:
        bad, worst = 0, 0.0
        for _ in range(samples):
            K = int(rng.integers(seq.k_min + 10, K_big // 2))
            r = float(seq.radius(K)) / 2 * rng.uniform(0.01, 1.0)
            w = cmath.rect(r, rng.uniform(-math.pi, math.pi))
            tail = brute_tail(ev, w, K, K_big)
            bound = tail_bound(ev, abs(w), K)
            worst = max(worst, tail / bound)
            bad += tail > bound
    return Check("tail-bound", bad == 0 and t.dt < 60,
                 [f"{bad} violations, max tail/bound = {worst:.3f}"], t.dt)


# ---------------------------------------------------------------- chain

def check_certificate(chain: ChainConfig, factor: float = 1e3, drift: float = 1e-6) -> Check:
    with _Timer() as t:
        ratio = math.exp(chain.a.lnmod) / chain.a_err if chain.a_err else math.inf
        quad2 = replace(chain.quad, nodes=2 * chain.quad.nodes)
        a2, _, _ = compute_a(chain.evaluator, chain.t0, chain.n, 1e-8, quad2)
        move = _rel(_cart(a2), _cart(chain.a))
    ok = ratio > factor and move < drift and t.dt < 300
    return Check("a-certificate", ok, [f"n = {chain.n}, |a|/err = {ratio:.3e}",
                                       f"node doubling moves a by {move:.3e} relative"], t.dt)


def value_capable_points(chain: ChainConfig, count: int, rng: np.random.Generator,
                         lo: float = 1e-2, hi: float = 1e3) -> np.ndarray:
    """Random zeta with |zeta^q| log-uniform in [lo, hi]."""
    lq = rng.uniform(math.log(lo), math.log(hi), count)
    return np.exp(lq / chain.q) * np.exp(1j * rng.uniform(-math.pi, math.pi, count))


def check_symmetries(chain: ChainConfig, samples: int = 100, seed: int = 0, tol: float = 1e-10,
                     w_max: float = 1e2) -> Check:
    """Rotation symmetries of g2, g3 and the branch independence of g4.

    Off the spiral d log H/d log w grows like |w|^rho, so the rounding of
    omega*z alone is amplified past 1e-10 once |z^q| is in the hundreds;
    ``w_max`` keeps the samples where the comparison is well conditioned.
    """
    rng = np.random.default_rng(seed)
    om = chain.omega
    with _Timer() as t:
        w2 = w3 = w4 = 0.0
        used = 0
        while used < samples:
            z = complex(value_capable_points(chain, 1, rng, hi=w_max)[0])
            a = g2(chain, z)
            if abs(a.lnmod) > 700:          # not representable as a double
                continue
            used += 1
            b = g2(chain, om * z)
            w2 = max(w2, _lrel(b, LogComplex(a.lnmod, a.arg + 2 * math.pi / chain.q)))
            w3 = max(w3, _lrel(g3(chain, om * z), g3(chain, z)))
            w = z ** chain.q
            k = int(rng.integers(1, chain.q))
            w4 = max(w4, _lrel(g4(chain, w, root=k), g4(chain, w, root=0)))
    ok = max(w2, w3, w4) <= tol and t.dt < 120
    return Check("symmetries", ok, [f"g2 equivariance {w2:.3e}", f"g3 invariance {w3:.3e}",
                                    f"g4 branch agreement {w4:.3e}"], t.dt)


def check_f_asymptotics(chain: ChainConfig, bounds: CalibratedBounds, final: float = 1e-3,
                        surrogate: float = 1e-2) -> Check:
    c, q = chain.params.c, chain.q
    with _Timer() as t:
        devs = []
        for r in (bounds.r_fit, 2 * bounds.r_fit, 4 * bounds.r_fit):
            z = complex(spiral_point(r, c))
            devs.append(math.exp(f_detail(chain, z).deviation.lnmod))
        z = complex(spiral_point(4 * bounds.r_fit, c))
        fv = f_detail(chain, z).value
        lF = q * complex(fv.lnmod, fv.arg) - cmath.log(z)
        F_gap = abs(cmath.exp(lF) - 1)
    dec = all(b < a for a, b in zip(devs, devs[1:]))
    ok = dec and devs[-1] < final and F_gap < surrogate and t.dt < 300
    return Check("f-asymptotics", ok, [
        "|f z^(-1/q) - 1| at r_fit, 2 r_fit, 4 r_fit: " + ", ".join(f"{d:.3e}" for d in devs),
        f"|f^q/z - 1| at 4 r_fit = {F_gap:.3e}"], t.dt)


def cauchy_radius(chain: ChainConfig, z: complex) -> float:
    """Relative radius of a circle around z that stays inside S2."""
    th = abs(spiral_offset(LogComplex(math.log(abs(z)), cmath.phase(z)), chain.params.c))
    return min(0.1, 0.9 * (chain.params.theta2 - th) / math.sqrt(1 + chain.params.c ** 2))


def cauchy_derivative(chain: ChainConfig, z: complex, delta: float, nodes: int = 128,
                      mode: str = "precise") -> complex:
    rad = delta * abs(z)
    phi = 2 * math.pi * np.arange(nodes) / nodes
    e = np.exp(1j * phi)
    vals = np.array([_cart(f_detail(chain, z + rad * u, mode=mode).value) for u in e])
    return complex(np.mean(vals / e) / rad)


def band_points(chain: ChainConfig, bounds: CalibratedBounds, count: int, seed: int) -> list:
    """Log-uniform radii in the transition band, offsets inside S3."""
    rng = np.random.default_rng(seed)
    lr = rng.uniform(math.log(bounds.r_lo), math.log(bounds.r_hi), count)
    th = rng.uniform(-chain.params.theta3, chain.params.theta3, count)
    return [cmath.rect(math.exp(a), chain.params.c * a + b) for a, b in zip(lr, th)]


def check_derivative(chain: ChainConfig, bounds: CalibratedBounds, samples: int = 50, seed: int = 0,
                     cauchy_tol: float = 1e-8, diff_tol: float = 1e-5) -> Check:
    with _Timer() as t:
        wc = wd = 0.0
        for z in band_points(chain, bounds, samples, seed):
            fp = _cart(f_prime(chain, z))
            fc = cauchy_derivative(chain, z, cauchy_radius(chain, z))
            h = abs(z) * 1e-6
            fd = (_cart(f_detail(chain, z + h).value) - _cart(f_detail(chain, z - h).value)) / (2 * h)
            wc = max(wc, _rel(fp, fc))
            wd = max(wd, _rel(fp, fd))
    ok = wc <= cauchy_tol and wd <= diff_tol and t.dt < 120
    return Check("derivative", ok, [f"max rel gap vs Cauchy circle {wc:.3e} (tol {cauchy_tol:g})",
                                    f"max rel gap vs central differences {wd:.3e} (tol {diff_tol:g})"],
                 t.dt)


# ---------------------------------------------------------------- dynamics

def band_radii(bounds: CalibratedBounds) -> list:
    out, r = [], bounds.r_lo
    while r <= bounds.r_hi:
        out.append(r)
        r *= 2
    return out


def check_newton_residual(chain: ChainConfig, bounds: CalibratedBounds, n_theta: int = 7,
                          limit: float = 1e-3) -> Check:
    c, p = chain.params.c, chain.params.p
    thetas = np.linspace(-0.9, 0.9, n_theta) * chain.params.theta3
    with _Timer() as t:
        radii = band_radii(bounds)
        rel = np.zeros((len(radii), n_theta))
        worst_a = worst_b = 0.0
        for i, r in enumerate(radii):
            lr = math.log(r)
            for j, th in enumerate(thetas):
                z = LogComplex(lr, c * lr + th)
                nxt, _, res = newton_step(chain, None, z, mode="precise")
                rel[i, j] = res / (p * r)
                da = abs(nxt.lnmod - math.log(p * r))
                db = abs(cmath.phase(cmath.exp(1j * (nxt.arg - z.arg - math.pi))))
                # both sides carry a few ulps of the logs they are built from
                fa = 8 * EPS * abs(math.log(p * r))
                fb = 8 * EPS * (abs(z.arg) + math.pi)
                worst_a = max(worst_a, da / (2 * res / r + fa))
                worst_b = max(worst_b, db / (2 * res / r + fb))
    small = bool(np.all(rel < limit))
    dec = bool(np.all(np.diff(rel, axis=0) < 0))
    ok = small and dec and worst_a <= 1 and worst_b <= 1 and t.dt < 300
    return Check("newton-residual", ok, [
        "radii " + ", ".join(f"{r:.4g}" for r in radii),
        "max residual/(p|z|) per radius " + ", ".join(f"{v:.3e}" for v in rel.max(axis=1)),
        f"decreasing in |z| at every theta: {dec}",
        f"(3a) ratio to bound {worst_a:.3f}, (3b) ratio to bound {worst_b:.3f}"], t.dt)


def check_invariance_and_growth(chain: ChainConfig, bounds: CalibratedBounds, samples: int = 10_000,
                                orbits: int = 100, k_max: int = 20, seed: int = 0) -> Check:
    with _Timer() as t:
        rep = check_invariance(chain, bounds, samples=samples, rng_seed=seed)
        lr, th = sample_u(chain, bounds, orbits, seed + 7)
        c = chain.params.c
        bad = 0
        for a, b in zip(lr, th):
            rec = orbit(chain, bounds, LogComplex(float(a), c * a + b), k_max)
            logs = rec.log_radii()
            ks = np.arange(len(logs))
            if len(logs) < k_max + 1 or np.any(logs < logs[0] + ks * math.log(2) - 1e-9):
                bad += 1
    ok = rep.passed and bad == 0 and t.dt < 300
    return Check("invariance", ok, [rep.summary(), f"{bad} of {orbits} orbits break |z_k| >= 2^k |z_0|"
                                    f" for k <= {k_max}"], t.dt)


def escaping_in_u(chain: ChainConfig, bounds: CalibratedBounds, grid, image) -> tuple[int, int]:
    """(pixels inside U, those among them not classified Escaping)."""
    from .logspace import lc_from_cartesian
    u = region_u(chain, bounds)
    c = chain.params.c
    inside = bad = 0
    for j in range(grid.ny):
        for i in range(grid.nx):
            z = lc_from_cartesian(grid.pixel(i, j))
            if u.contains_spiral(z.lnmod, spiral_offset(z, c)):
                inside += 1
                bad += image.kinds[j, i].kind is not Kind.ESCAPING
    return inside, bad


def check_render(chain: ChainConfig, bounds: CalibratedBounds, nx: int = 512,
                 compare_nx: int = 128, budget: float = 600.0) -> Check:
    from .render import pnm_bytes, reference_grid, render_grid
    with _Timer() as t:
        small = reference_grid(chain, bounds, compare_nx, compare_nx)
        same = pnm_bytes(render_grid(chain, bounds, small, tiles=1)) == \
            pnm_bytes(render_grid(chain, bounds, small, tiles=64))
    grid = reference_grid(chain, bounds, nx, nx)
    with _Timer() as t_full:
        img = render_grid(chain, bounds, grid, tiles=64)
    inside, bad = escaping_in_u(chain, bounds, grid, img)
    ok = same and bad == 0 and inside > 0 and t_full.dt < budget
    lines = [f"tiles 1 vs 64 on {compare_nx}x{compare_nx}: {'identical' if same else 'DIFFERENT'}",
             f"{inside} pixels in U, {bad} not Escaping",
             f"{nx}x{nx} render {t_full.dt:.1f} s (budget {budget:.0f} s); "
             + ", ".join(f"{k} {v}" for k, v in img.counts().items())]
    return Check("render", ok, lines, t.dt + t_full.dt)
