"""Newton map of f, orbits, the invariant region U and point classification.

Points are carried as LogComplex so that orbits can run far past double
range: in the asymptotic regime one step is just log r += log p, arg += pi,
and since c log p = pi the spiral offset does not move.

With delta = (q-1) Pi(z+z0)^n / H(z) (see chain), the full map is

    N(z) = z (delta - p)/(1 + delta),    N(z) + p z = q z delta/(1 + delta).
"""
from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .chain import CalibratedBounds, ChainConfig, _log1m, _log1p_exp, f_detail, h_parts
from .errors import BakerNewtonError, CriticalPoint, NaNGuard
from .geometry import SpiralRegion
from .logspace import LogComplex, lc_from_log, reduce_arg


class StepRegime(str, Enum):
    FULL_CHAIN = "FullChain"
    ASYMPTOTIC_NEWTON = "AsymptoticNewton"


@dataclass(frozen=True)
class Step:
    z: LogComplex
    regime: StepRegime
    residual: Optional[float]
    modulus_ratio: float


@dataclass
class OrbitRecord:
    seed: complex
    steps: list = field(default_factory=list)
    last: Optional[LogComplex] = None
    stop: str = "k_max"
    switch_radius: Optional[float] = None

    def log_radii(self) -> np.ndarray:
        pts = [s.z for s in self.steps] + ([self.last] if self.last is not None else [])
        return np.array([p.lnmod for p in pts])


@dataclass(frozen=True)
class ClassifyLimits:
    k_max: int = 32
    escape_radius: float = math.inf
    fixpoint_tol: float = 1e-10

    @classmethod
    def defaults(cls, bounds: CalibratedBounds, k_max: int = 32) -> "ClassifyLimits":
        return cls(k_max, 1e3 * bounds.r1, 1e-10)


class Kind(str, Enum):
    ESCAPING = "Escaping"
    CONVERGED = "Converged"
    UNRESOLVED = "Unresolved"


@dataclass(frozen=True)
class Classification:
    kind: Kind
    k: int
    root: Optional[complex] = None


def region_u(chain: ChainConfig, bounds: CalibratedBounds) -> SpiralRegion:
    """U = { r > r1, |theta| < theta3 - 1/r }."""
    return SpiralRegion(bounds.r1, chain.params.theta3, chain.params.c, taper=True)


def spiral_offset(z: LogComplex, c: float) -> float:
    return reduce_arg(z.arg - c * z.lnmod)


def _as_lc(z) -> LogComplex:
    if isinstance(z, LogComplex):
        return z
    z = complex(z)
    return lc_from_log(cmath.log(z)) if z != 0 else LogComplex(-math.inf, 0.0)


def _in_s3(chain: ChainConfig, z: LogComplex) -> bool:
    return abs(spiral_offset(z, chain.params.c)) < chain.params.theta3


def newton_step(chain: ChainConfig, bounds: Optional[CalibratedBounds], z, mode: str = "auto"):
    """One step of N.  Returns (z_next: LogComplex, regime, residual |N(z) + p z| or None)."""
    z = _as_lc(z)
    p = chain.params.p
    if z.is_zero:
        return z, StepRegime.FULL_CHAIN, None
    in_s3 = _in_s3(chain, z)
    if bounds is not None and in_s3 and z.lnmod > math.log(bounds.r_n_cut):
        nxt = LogComplex(z.lnmod + math.log(p), reduce_arg(z.arg + math.pi))
        return nxt, StepRegime.ASYMPTOTIC_NEWTON, None
    if z.lnmod > 700:
        raise NaNGuard("full-chain step requested beyond double range")
    zc = cmath.rect(math.exp(z.lnmod), z.arg)
    hp = h_parts(chain, zc, mode)
    log_delta = math.log(chain.q - 1) + hp.log_pin - hp.log_H
    l1 = _log1p_exp(log_delta)
    if l1.real == -math.inf:
        raise CriticalPoint(f"f' vanishes at z = {zc}")
    # N = z (delta - p)/(1 + delta) = -p z (1 - delta/p)/(1 + delta)
    log_n = complex(z.lnmod, z.arg) + math.log(p) + 1j * math.pi \
        + _log1m(log_delta - math.log(p)) - l1
    if not (np.isfinite(log_n.real) or log_n.real == -math.inf) or not np.isfinite(log_n.imag):
        raise NaNGuard(f"non-finite Newton step at z = {zc}")
    residual = None
    if in_s3:
        lr = math.log(chain.q) + z.lnmod + (log_delta - l1).real
        residual = math.exp(lr) if lr < 700 else math.inf
    return lc_from_log(log_n), StepRegime.FULL_CHAIN, residual


def _to_complex(z: LogComplex) -> complex:
    if z.is_zero:
        return 0j
    return cmath.rect(math.exp(z.lnmod), z.arg)


def _distance(a: LogComplex, b: LogComplex) -> float:
    if a.lnmod > 700 or b.lnmod > 700:
        return math.inf
    return abs(_to_complex(a) - _to_complex(b))


def orbit(chain: ChainConfig, bounds: Optional[CalibratedBounds], seed, k_max: int,
          fixpoint_tol: float = 1e-10, mode: str = "auto") -> OrbitRecord:
    """Iterate N from seed; per-step errors end the orbit with the reason recorded."""
    z = _as_lc(seed)
    rec = OrbitRecord(complex(seed) if not isinstance(seed, LogComplex) else _to_complex(seed))
    for _ in range(k_max):
        try:
            nxt, regime, res = newton_step(chain, bounds, z, mode)
        except BakerNewtonError as exc:
            rec.stop = f"error: {type(exc).__name__}: {exc}"
            break
        if regime is StepRegime.ASYMPTOTIC_NEWTON and rec.switch_radius is None:
            rec.switch_radius = z.lnmod
        ratio = math.exp(nxt.lnmod - z.lnmod) if not z.is_zero else 1.0
        rec.steps.append(Step(z, regime, res, ratio))
        if _distance(nxt, z) < fixpoint_tol * max(1.0, math.exp(min(z.lnmod, 700))):
            z = nxt
            rec.stop = "fixpoint"
            break
        z = nxt
    rec.last = z
    return rec


def write_orbit_csv(rec: OrbitRecord, path, c: float) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "log_radius", "theta", "regime", "residual"])
        for k, s in enumerate(rec.steps):
            w.writerow([k, repr(s.z.lnmod), repr(spiral_offset(s.z, c)), s.regime.value,
                        "" if s.residual is None else repr(s.residual)])
        if rec.last is not None:
            w.writerow([len(rec.steps), repr(rec.last.lnmod), repr(spiral_offset(rec.last, c)), "", ""])


def find_zero(chain: ChainConfig, seed: complex, tol: float = 1e-13, max_steps: int = 60) -> complex:
    """Polish a nonzero zero of f from a nearby seed.

    Such zeros are zeros of H with multiplicity q-1 for f, where N only
    converges linearly (ratio 1 - 1/(q-1)).  Newton on H itself is quadratic,
    and H'/H = (delta - p)/(q (q-1) z) comes from the same delta as N.
    """
    q, p = chain.q, chain.params.p
    z = complex(seed)
    for _ in range(max_steps):
        fv = f_detail(chain, z)
        if fv.log_delta.real > 700:
            return z
        step = q * (q - 1) * z / (cmath.exp(fv.log_delta) - p)
        z -= step
        if abs(step) < tol * max(1.0, abs(z)):
            return z
    raise CriticalPoint(f"root polish from {seed} did not settle in {max_steps} steps")


# ---------------------------------------------------------------- invariance

@dataclass
class InvarianceReport:
    samples: int
    failures: list
    out_of_contract: int = 0
    min_ratio: float = math.inf
    max_ratio: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}: {self.samples} samples in U, {len(self.failures)} failures, "
                f"modulus ratio in [{self.min_ratio:.6g}, {self.max_ratio:.6g}], "
                f"{self.out_of_contract} out-of-contract probes not asserted")

    def write_failures(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["log_radius", "theta", "reason"])
            for lr, th, why in self.failures:
                w.writerow([repr(lr), repr(th), why])


def sample_u(chain: ChainConfig, bounds: CalibratedBounds, samples: int, rng_seed: int,
             r_test_max: Optional[float] = None):
    """Log-uniform radii in (r1, r_test_max], uniform admissible offsets."""
    rng = np.random.default_rng(rng_seed)
    r_max = r_test_max or 1e3 * bounds.r1
    th3 = chain.params.theta3
    lr = rng.uniform(math.log(bounds.r1), math.log(r_max), samples)
    lr = np.where(lr <= math.log(bounds.r1), np.nextafter(math.log(bounds.r1), np.inf), lr)
    width = th3 - np.exp(-lr)
    th = (2.0 * rng.random(samples) - 1.0) * width
    return lr, th


def check_invariance(chain: ChainConfig, bounds: CalibratedBounds, region: Optional[SpiralRegion] = None,
                     samples: int = 10_000, rng_seed: int = 0, r_test_max: Optional[float] = None,
                     outside_probes: int = 0, mode: str = "auto") -> InvarianceReport:
    region = region or region_u(chain, bounds)
    c = chain.params.c
    lr, th = sample_u(chain, bounds, samples, rng_seed, r_test_max)
    rep = InvarianceReport(samples, [])
    for a, b in zip(lr, th):
        z = LogComplex(float(a), reduce_arg(c * a + b))
        if not region.contains_spiral(z.lnmod, spiral_offset(z, c)):
            rep.failures.append((float(a), float(b), "sample not in U"))
            continue
        try:
            nxt, _, _ = newton_step(chain, bounds, z, mode)
        except BakerNewtonError as exc:
            rep.failures.append((float(a), float(b), f"{type(exc).__name__}: {exc}"))
            continue
        ratio = math.exp(nxt.lnmod - z.lnmod)
        rep.min_ratio = min(rep.min_ratio, ratio)
        rep.max_ratio = max(rep.max_ratio, ratio)
        if not region.contains_spiral(nxt.lnmod, spiral_offset(nxt, c)):
            rep.failures.append((float(a), float(b), "N(z) not in U"))
        elif ratio < 2.0:
            rep.failures.append((float(a), float(b), f"|N(z)|/|z| = {ratio:.6g} < 2"))
    if outside_probes:
        # offsets between the taper and theta3: evaluated for the record, never asserted
        lr2, th2 = sample_u(chain, bounds, outside_probes, rng_seed + 1, r_test_max)
        th3 = chain.params.theta3
        for a, b in zip(lr2, th2):
            off = math.copysign(th3 - 0.5 * math.exp(-a), b)
            z = LogComplex(float(a), reduce_arg(c * a + off))
            try:
                newton_step(chain, bounds, z, mode)
            except BakerNewtonError:
                pass
            rep.out_of_contract += 1
    return rep


# ---------------------------------------------------------------- classify

def _f_small(chain: ChainConfig, z: LogComplex, mode: str) -> bool:
    if z.is_zero:
        return True
    if z.lnmod > 700:
        return False
    fv = f_detail(chain, _to_complex(z), mode=mode).value
    return fv.lnmod < math.log(1e-6) + max(0.0, z.lnmod / chain.q)


def classify(chain: ChainConfig, bounds: CalibratedBounds, z, limits: ClassifyLimits,
             mode: str = "auto") -> Classification:
    """Escape-time class of z.

    Escaping(k): |z_k| >= escape_radius with z_k in U.  Converged(root, k):
    the Newton step falls below fixpoint_tol and |f| is small.  Leaving the
    escape radius outside U, hitting an evaluation error or running out of
    steps gives Unresolved.
    """
    c = chain.params.c
    u = region_u(chain, bounds)
    log_esc = math.log(limits.escape_radius)
    z = _as_lc(z)
    if z.is_zero:
        return Classification(Kind.CONVERGED, 0, 0j)
    for k in range(limits.k_max + 1):
        if z.lnmod >= log_esc:
            if u.contains_spiral(z.lnmod, spiral_offset(z, c)):
                return Classification(Kind.ESCAPING, k)
            return Classification(Kind.UNRESOLVED, k)
        if k == limits.k_max:
            break
        try:
            nxt, _, _ = newton_step(chain, bounds, z, mode)
        except BakerNewtonError:
            return Classification(Kind.UNRESOLVED, k)
        if nxt.is_zero:
            return Classification(Kind.CONVERGED, k + 1, 0j)
        tol = limits.fixpoint_tol * max(1.0, math.exp(min(z.lnmod, 700)))
        if _distance(nxt, z) < tol:
            try:
                small = _f_small(chain, nxt, mode)
            except BakerNewtonError:
                small = False
            if small:
                return Classification(Kind.CONVERGED, k, _to_complex(nxt))
        z = nxt
    return Classification(Kind.UNRESOLVED, limits.k_max)
