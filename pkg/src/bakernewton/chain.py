"""The chain g0 -> g1 -> g2 -> g3 -> g4 -> f built on the product Pi.

Everything funnels through

    H(z) = int_0^1 Pi(z0 + t^q z)^n dt,

since substituting s = zeta*t in g2(zeta) = int_0^zeta Pi(s^q + z0)^n ds gives

    g2(zeta) = zeta H(zeta^q),  g3(zeta) = H(zeta^q)/a,  g4 = H/a,
    f(z) = z (H(z)/a)^(q-1),    f'/f = (1 + delta)/(q z),
    delta = (q-1) Pi(z + z0)^n / H(z).

For small |z| H is integrated along the straight segment.  Farther out the
segment would run across regions where |Pi| is astronomically large while H
itself is moderate, so H is obtained from the valley instead:

    H(z) = z^(-1/q) (a - T(z)),

where T integrates Pi(W)^n (W - z0)^(1/q - 1)/q dW from W = z + z0 to
infinity, first along the circle |W| = |z + z0| to the zero spiral and then
out along the spiral.  The spiral part is tabulated once per chain.

Complex logarithms (plain Python complex, real part = log-modulus) are the
working currency; LogComplex appears at the public boundary.
"""
from __future__ import annotations

import cmath
import hashlib
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import (BoundOnlyContext, FitFailed, NoAdmissibleN, PoleError, PreconditionError,
                     QuadratureStalled, ScanInconclusive)
from .geometry import SpiralRegion, spiral_point
from .kernels import clog1p
from .logspace import LogComplex, ZERO, lc_from_log, lc_format, lc_parse, reduce_arg
from .params import ConstructionParams, h_peak_angle
from .product import EvalResult, ProductEvaluator, Regime, log_pi, spiral_midpoints

NEG_INF = complex(-math.inf, 0.0)
LOG_TEN = math.log(10.0)
ROUND = 5e-13  # relative rounding floor of a panel sum
EPS = float(np.finfo(float).eps)


# ---------------------------------------------------------------- log helpers

def _ladd(A: complex, B: complex) -> complex:
    """log(e^A + e^B)."""
    if A.real == -math.inf:
        return B
    if B.real == -math.inf:
        return A
    if A.real < B.real:
        A, B = B, A
    d = B - A
    if d.real < -800.0:
        return A
    s = clog1p(cmath.exp(d))
    if s.real == -math.inf:
        return NEG_INF
    return A + s


def _log1m(l: complex) -> complex:
    """log(1 - e^l), modulo 2 pi i."""
    if l.real == -math.inf:
        return 0j
    if l.real < 0.0:
        return clog1p(-cmath.exp(l))
    return l + 1j * math.pi + clog1p(-cmath.exp(-l))


def _log1p_exp(l: complex) -> complex:
    """log(1 + e^l)."""
    if l.real == -math.inf:
        return 0j
    return _log1m(l + 1j * math.pi)


def _expm1(z: complex) -> complex:
    x, y = z.real, z.imag
    re = math.expm1(x) * math.cos(y) - 2.0 * math.sin(0.5 * y) ** 2
    return complex(re, math.exp(x) * math.sin(y))


def _lsum(logs: np.ndarray, w: np.ndarray) -> complex:
    """log sum w_i exp(logs_i), rescaled by the peak."""
    re = logs.real
    if not np.any(np.isfinite(re)):
        return NEG_INF
    sc = float(np.max(re[np.isfinite(re)]))
    s = complex(np.sum(w * np.exp(logs - sc)))
    if s == 0:
        return NEG_INF
    return sc + cmath.log(s)


def _log_absdiff(A: complex, B: complex) -> float:
    """log|e^A - e^B|."""
    if A.real == -math.inf and B.real == -math.inf:
        return -math.inf
    if A.real < B.real:
        A, B = B, A
    return A.real + _log1m(B - A).real


@lru_cache(maxsize=None)
def _gl(m: int):
    return np.polynomial.legendre.leggauss(m)


# ---------------------------------------------------------------- quadrature

def _panel(logf, x0: float, hs: float, m: int):
    """Integral of exp(logf) over [x0, x0 + hs] with m and 2m Gauss-Legendre nodes.

    Returns (I_m, I_2m, peak lnmod of the integrand, rounding floor): the
    floor is the 2m-node sum of magnitudes times the evaluation noise.
    """
    (x1, w1), (x2, w2) = _gl(m), _gl(2 * m)
    xs = np.concatenate([x1, x2])
    lf, noise = _values(logf(x0 + hs * 0.5 * (1.0 + xs)))
    peak = float(np.max(lf.real)) if lf.size else -math.inf
    lh = cmath.log(0.5 * hs)
    I1 = lh + _lsum(lf[:m], w1)
    I2 = lh + _lsum(lf[m:], w2)
    floor = lh.real + _lsum(lf[m:].real + 0j, w2).real + math.log(max(ROUND, 4.0 * noise))
    return I1, I2, peak, floor


def _values(res):
    """Integrand callbacks return values or (values, relative noise)."""
    return res if isinstance(res, tuple) else (res, 0.0)


def _singular_head(logf, x0: float, h: float, beta: float, m: int, tol: float):
    """Integral over [x0, x0 + h] of exp(logf) whose integrand behaves like (x - x0)^beta.

    With x - x0 = h w^k, k = 1/(1 + beta), the weight becomes the constant
    k h^(1 + beta) and the remaining factor is smooth in w.  Gauss-Jacobi
    would need nodes resolved to relative accuracy next to x0, which the
    usual eigenvalue route does not deliver for beta close to -1.
    Returns (log I, log |error|, peak lnmod of the regularised integrand).
    """
    k = 1.0 / (1.0 + beta)
    lk = math.log(k) + (1.0 + beta) * math.log(h)
    peak = [-math.inf]

    def lg(w):
        d = h * w ** k
        lf, noise = _values(logf(x0 + d))
        g = lf - beta * np.log(d)
        peak[0] = max(peak[0], float(np.max(g.real)) + lk)
        return g, noise

    I, err = _march(lg, 0.0, 1.0, m=m, tol=tol, h0=min(1.0, 0.5 / k))
    return I + lk, err + lk, peak[0]


def _march(logf, a: float, b: float, *, m: int, tol: float, h0: float,
           jac: Optional[float] = None, drop: Optional[float] = None, h_max: float = math.inf,
           max_panels: int = 4000):
    """Integrate exp(logf) from a to b with panels marching from a.

    Panels are accepted when m and 2m nodes agree to ``tol`` relative to the
    running total, and grow by 2 after each acceptance.  With ``drop`` the
    march stops once a panel adds less than exp(-drop) of the total (the
    integrand must be decaying towards b).  Returns (log I, log |error|).
    """
    length = abs(b - a)
    if length == 0:
        return NEG_INF, -math.inf
    sgn = 1.0 if b > a else -1.0
    acc, err = NEG_INF, -math.inf
    pos = 0.0
    h = min(max(h0, 1e-14 * length), length)
    if jac is not None:
        if sgn < 0:
            raise ValueError("the singular endpoint must be the lower limit")
        acc, err, _ = _singular_head(logf, a, h, jac, m, tol)
        pos = h
        h *= 2.0
    n_pan = 0
    ltol = math.log(tol)
    h_min = 1e-13 * length
    while pos < length:
        if n_pan >= max_panels:
            raise QuadratureStalled(f"no convergence after {max_panels} panels on [{a}, {b}]")
        h = min(h, length - pos, h_max)
        if length - pos - h < 0.25 * h:
            h = length - pos
        I1, I2, peak, floor = _panel(logf, a + sgn * pos, sgn * h, m)
        diff = _log_absdiff(I1, I2)
        scale = max(acc.real, I2.real)
        if diff <= scale + ltol or diff <= floor or h <= h_min or scale == -math.inf:
            acc = _ladd(acc, I2)
            err = float(np.logaddexp(err, diff))
            pos += h
            n_pan += 1
            if drop is not None and peak + math.log(h) < acc.real - drop:
                break
            h *= 2.0
        else:
            h *= 0.5
    return acc, err


# ---------------------------------------------------------------- settings

@dataclass(frozen=True)
class QuadSettings:
    nodes: int = 16
    tol: float = 1e-12
    panel_max: float = 2.0
    decay_digits: float = 40.0
    fast_eps: float = 1e-4
    valley_factor: float = 3.0


# ---------------------------------------------------------------- sigma table

class SigmaTable:
    """Panel integrals of Pi(L(s))^n (L(s) - z0)^(1/q-1) L'(s)/q along the spiral.

    Panels run between consecutive zero radii beyond t0 (split to at most
    ``panel_max`` long); the first one carries the (s - t0)^(1/q - 1)
    singularity and is integrated after the substitution s - t0 = h w^q.  Reverse cumulative sums give the
    tail integral from any breakpoint to infinity; a is the full sum.
    """

    def __init__(self, ev: ProductEvaluator, t0: float, n: int, nodes: int = 16, panel_max: float = 2.0,
                 table_cap: float = 1e4):
        self.ev = ev
        self.table_cap = float(table_cap)
        self.t0 = float(t0)
        self.n = int(n)
        self.nodes = int(nodes)
        self.panel_max = float(panel_max)
        p = ev.params
        self.q = p.q
        self.c = p.c
        self.beta = 1.0 / p.q - 1.0
        self._lc = cmath.log(1 + 1j * p.c)
        self.bps = np.array([self.t0])
        self.logI = np.zeros(0, dtype=complex)
        self.logI_lo = np.zeros(0, dtype=complex)
        self.peaks = np.zeros(0)
        self.tails = np.zeros(0, dtype=complex)
        self._k_next = ev.seq.k_min - 1 + ev.seq.count_n(self.t0) + 1

    def logF(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return self.logF_offset(s - self.t0, s)

    def logF_offset(self, d, s=None, with_noise: bool = False):
        """logF at s = t0 + d, with d kept exact near the branch point."""
        d = np.asarray(d, dtype=float)
        if s is None:
            s = self.t0 + d
        L = s * np.exp(1j * self.c * np.log(s))
        lp, _, _, err = self.ev.log_values(L)
        one = -np.expm1(-np.log1p(d / self.t0) * (1 + 1j * self.c))
        logU = np.log(s) + np.log(np.abs(one)) + 1j * (self.c * np.log(s) + np.angle(one))
        val = self.n * lp - math.log(self.q) + self.beta * logU + self._lc + 1j * self.c * np.log(s)
        if not with_noise:
            return val
        return val, self.n * max(float(np.max(err)), self._zero_noise(s))

    def _zero_noise(self, s: np.ndarray) -> float:
        """Relative error of log(1 - L(s)/a_k) at the nearest zero: the
        difference is formed from rounded doubles."""
        seq = self.ev.seq
        k = np.maximum(np.floor(seq.delta * s ** seq.rho), seq.k_min)
        gap = np.minimum(np.abs(s - seq.radius(k)), np.abs(s - seq.radius(k + 1)))
        gap = np.minimum(gap, np.abs(s - seq.radius(np.maximum(k - 1, seq.k_min))))
        with np.errstate(divide="ignore"):
            rel = 4.0 * EPS * s / (math.sqrt(1 + self.c ** 2) * gap)
        return float(np.max(rel))

    def _noisy(self, s):
        s = np.asarray(s, dtype=float)
        return self.logF_offset(s - self.t0, s, True)

    def _noisy_offset(self, d):
        return self.logF_offset(d, None, True)

    def _new_breaks(self, s_target: float) -> list:
        out = []
        last = self.bps[-1]
        seq = self.ev.seq
        while last < s_target:
            r = float(seq.radius(self._k_next))
            self._k_next += 1
            pieces = max(1, math.ceil((r - last) / self.panel_max))
            out.extend(last + (r - last) * np.arange(1, pieces + 1) / pieces)
            last = r
        return out

    def extend_to(self, s_target: float) -> None:
        if self.bps[-1] >= s_target:
            return
        new = np.array(self._new_breaks(s_target))
        edges = np.concatenate([[self.bps[-1]], new])
        lo, hi = edges[:-1], edges[1:]
        m = self.nodes
        first = self.logI.size == 0
        if first:
            I2, le, pk = _singular_head(self._noisy_offset, 0.0, hi[0] - lo[0], self.beta, m, 1e-14)
            I1 = _ladd(I2, complex(le, 0.0))
            lo, hi = lo[1:], hi[1:]
        (x1, w1), (x2, w2) = _gl(m), _gl(2 * m)
        xs = np.concatenate([x1, x2])
        half = 0.5 * (hi - lo)
        pts = lo[:, None] + half[:, None] * (1.0 + xs[None, :])
        lf = self.logF(pts.ravel()).reshape(pts.shape)
        sc = lf.real.max(axis=1)
        sc = np.where(np.isfinite(sc), sc, 0.0)
        e = np.exp(lf - sc[:, None])
        lh = np.log(half) + sc
        with np.errstate(divide="ignore"):
            new1 = lh + np.log((e[:, :m] * w1).sum(axis=1))
            new2 = lh + np.log((e[:, m:] * w2).sum(axis=1))
        peaks = lf.real.max(axis=1)
        if first:
            new1 = np.concatenate([[I1], new1])
            new2 = np.concatenate([[I2], new2])
            peaks = np.concatenate([[pk], peaks])
        self.bps = np.concatenate([self.bps, new])
        self.logI_lo = np.concatenate([self.logI_lo, new1])
        self.logI = np.concatenate([self.logI, new2])
        self.peaks = np.concatenate([self.peaks, peaks])
        self._refresh_tails()

    def _refresh_tails(self):
        tails = np.empty_like(self.logI)
        acc = NEG_INF
        for i in range(self.logI.size - 1, -1, -1):
            acc = _ladd(acc, complex(self.logI[i]))
            tails[i] = acc
        self.tails = tails

    def extend_until_decay(self, digits: float) -> None:
        """Grow until the integrand has dropped ``digits`` decades below its peak."""
        target = max(2.0 * self.t0, self.t0 + 8.0)
        while True:
            self.extend_to(target)
            peak = float(np.max(self.peaks))
            recent = self.peaks[self.bps[1:] > 0.75 * target]
            if recent.size and float(np.max(recent)) < peak - digits * LOG_TEN:
                return
            target *= 1.5

    def log_a(self) -> complex:
        return complex(self.tails[0])

    def a_error(self) -> float:
        """log |a(2m nodes) - a(m nodes)|."""
        lo = NEG_INF
        for v in self.logI_lo:
            lo = _ladd(lo, complex(v))
        return _log_absdiff(self.log_a(), lo)

    @property
    def s_end(self) -> float:
        return float(self.bps[-1])

    def _spacing(self, R: float) -> float:
        seq = self.ev.seq
        k = seq.k_min - 1 + seq.count_n(R)
        return float(seq.radius(k + 1) - seq.radius(k))

    def negligible_beyond(self, R: float, log_level: float) -> bool:
        """True when the tail from R is known to lie below exp(log_level)."""
        R = min(R, 0.5 * self.s_end)
        j = int(np.searchsorted(self.bps, R, side="right")) - 1
        return bool(self.tails[j].real < log_level)

    def _cover(self, R: float) -> int:
        """Extend until the last panel is negligible against the tail from R.

        Returns the index of the panel holding R.
        """
        while True:
            j = int(np.searchsorted(self.bps, R, side="right")) - 1
            if self.s_end >= R + 8.0 * self._spacing(R) and \
                    self.logI[-1].real < self.tails[min(j + 1, self.tails.size - 1)].real - 36.0:
                return j
            self.extend_to(max(1.25 * self.s_end, R + 16.0 * self._spacing(R)))

    def log_tail(self, R: float, tol: float = 1e-12) -> complex:
        """log of the spiral integral from L(R) to infinity, R >= t0.

        Up to ``table_cap`` the tail is the partial panel from R plus a stored
        cumulative sum, extending the table on demand.  Beyond the cap it is
        marched directly from R, one zero gap per panel, until it dies off.
        """
        if R <= self.t0:
            return self.log_a()
        if R > self.table_cap:
            sp = self._spacing(R)
            part, _ = _march(self._noisy, R, R + max(R, 1e3 * sp), m=self.nodes, tol=tol,
                             h0=sp, h_max=sp, drop=36.0)
            return part
        j = self._cover(R)
        rest = complex(self.tails[j + 1]) if j + 1 < self.tails.size else NEG_INF
        b = float(self.bps[j + 1])
        part, _ = _march(self._noisy, R, b, m=self.nodes, tol=tol, h0=(b - R) / (4 if j == 0 else 1))
        return _ladd(part, rest)

    def __getstate__(self):
        return dict(self.__dict__)


# ---------------------------------------------------------------- t0, a, n

def spiral_scan(ev: ProductEvaluator, t_scan_max: float, grid: int):
    """log|Pi| at geometric midpoints between zero radii, snapped from a log grid."""
    seq = ev.seq
    t = np.geomspace(1.0, t_scan_max, grid)
    k = np.maximum(seq.k_min, seq.k_min - 1 + np.array([seq.count_n(x) for x in t]))
    k = np.unique(k)
    mids = np.sqrt(seq.radius(k) * seq.radius(k + 1))
    vals, _, _, _ = ev.log_values(spiral_point(mids, ev.params.c))
    return mids, vals.real


def select_t0(ev: ProductEvaluator, t_scan_max: float = 1e4, grid: int = 2000,
              safety: float = 0.5) -> tuple[float, complex]:
    mids, lv = spiral_scan(ev, t_scan_max, grid)
    i = int(np.argmax(lv))
    # certify the far tail: fitted decay must stay below the maximum
    top = mids > t_scan_max / 10
    if top.sum() < 3:
        raise ScanInconclusive("too few scan points in the last decade")
    x = mids[top] ** ev.params.rho
    eta = -float(np.dot(x, lv[top]) / np.dot(x, x)) * safety
    if not eta > 0 or np.any(lv[top] > -eta * x):
        raise ScanInconclusive("no certified decay along the spiral at the end of the scan")
    if -eta * t_scan_max ** ev.params.rho >= lv[i]:
        raise ScanInconclusive("decay bound does not fall below the scan maximum by t_scan_max")
    # polish inside the zero gap that holds the best midpoint
    seq = ev.seq
    k = seq.k_min - 1 + seq.count_n(mids[i])
    lo, hi = float(seq.radius(k)), float(seq.radius(k + 1))
    c = ev.params.c

    def neg(t):
        return -float(ev.log_values(np.array([spiral_point(t, c)]))[0][0].real)

    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * hi})
    t0 = float(res.x) if -res.fun >= lv[i] else float(mids[i])
    return t0, complex(spiral_point(t0, c))


def compute_a(ev: ProductEvaluator, t0: float, n: int, tol: float = 1e-8,
              quad: QuadSettings = QuadSettings()):
    """a = int_sigma g1^n, with its node-doubling error.  Returns (a, err, table)."""
    m = quad.nodes
    for _ in range(3):
        table = SigmaTable(ev, t0, n, m, quad.panel_max)
        table.extend_until_decay(quad.decay_digits)
        la = table.log_a()
        le = table.a_error()
        if le <= la.real + math.log(tol):
            return lc_from_log(la), math.exp(le), table
        m *= 2
    raise QuadratureStalled(f"a did not settle to {tol:g} relative (last ratio {math.exp(le - la.real):.3e})")


def select_n(ev: ProductEvaluator, t0: float, n_start: int = 4, n_max: int = 64, tol: float = 1e-8,
             quad: QuadSettings = QuadSettings(), certificate: float = 1e3):
    """Smallest n in [n_start, n_max] with |a| > certificate * err.

    Returns (n, a, err, table, ratios) with every |a|/err ratio tried.
    """
    ratios = {}
    for n in range(n_start, n_max + 1):
        try:
            a, err, table = compute_a(ev, t0, n, tol, quad)
        except QuadratureStalled:
            ratios[n] = 0.0
            continue
        ratio = math.inf if err == 0 else math.exp(a.lnmod) / err
        ratios[n] = ratio
        if ratio > certificate:
            return n, a, err, table, ratios
    raise NoAdmissibleN(f"no n in [{n_start}, {n_max}] certifies a != 0", ratios)


# ---------------------------------------------------------------- chain config

@dataclass(frozen=True)
class ChainConfig:
    params: ConstructionParams
    evaluator: ProductEvaluator
    t0: float
    z0: complex
    n: int
    a: LogComplex
    a_err: float = 0.0
    quad: QuadSettings = QuadSettings()
    table: Optional[SigmaTable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.table is None:
            table = SigmaTable(self.evaluator, self.t0, self.n, self.quad.nodes, self.quad.panel_max)
            table.extend_until_decay(self.quad.decay_digits)
            object.__setattr__(self, "table", table)
        object.__setattr__(self, "_theta_peak", h_peak_angle(self.params))

    @property
    def q(self) -> int:
        return self.params.q

    @property
    def omega(self) -> complex:
        return cmath.exp(2j * math.pi / self.params.q)

    @property
    def log_a(self) -> complex:
        return complex(self.a.lnmod, self.a.arg)

    @property
    def r_valley(self) -> float:
        return self.quad.valley_factor * self.t0

    def sigma_region(self, theta_max: float) -> SpiralRegion:
        return SpiralRegion(1.0, theta_max, self.params.c)


def build_chain(ev: ProductEvaluator, t_scan_max: float = 1e4, grid: int = 2000,
                n_start: int = 4, n_max: int = 64, a_tol: float = 1e-8,
                quad: QuadSettings = QuadSettings()):
    """select_t0 then select_n; returns (chain, ratios)."""
    t0, z0 = select_t0(ev, t_scan_max, grid)
    n, a, err, table, ratios = select_n(ev, t0, n_start, n_max, a_tol, quad)
    chain = ChainConfig(ev.params, ev, t0, z0, n, a, err, replace(quad, nodes=table.nodes), table)
    return chain, ratios


# ---------------------------------------------------------------- H(z)

@dataclass(frozen=True)
class HParts:
    """Pieces of one H evaluation.

    log_H: log H(z).  log_root: log of z^(1/q) on the spiral branch (valley
    method only).  log_ratio: log(T/a) (valley method only).  log_pin:
    n log Pi(z + z0).  method: 'straight', 'valley' or 'fast'.
    """
    log_H: complex
    log_pin: complex
    method: str
    log_root: Optional[complex] = None
    log_ratio: Optional[complex] = None
    log_err: float = -math.inf


def _pi_logs(chain: ChainConfig, W: np.ndarray):
    W = np.atleast_1d(np.asarray(W, dtype=complex))
    if np.any(np.abs(W) > chain.evaluator.r_asym):
        raise BoundOnlyContext("chain evaluation needs Pi beyond r_asym")
    return chain.evaluator.log_values(W)


def valley_offset(chain: ChainConfig, W: complex) -> float:
    """Spiral offset of W, unreduced into (theta_peak - 2 pi, theta_peak]."""
    R = abs(W)
    th = reduce_arg(cmath.phase(W) - chain.params.c * math.log(R))
    tp = chain._theta_peak
    if th > tp:
        th -= 2 * math.pi
    elif th <= tp - 2 * math.pi:
        th += 2 * math.pi
    return th


def _log_root(chain: ChainConfig, z: complex, W: complex, theta: float) -> complex:
    """log z^(1/q), argument continued from the sigma branch."""
    R = abs(W)
    c = chain.params.c
    arg = c * math.log(R) + theta + cmath.phase(1 - chain.z0 / W)
    return complex(math.log(abs(z)), arg) / chain.q


def _h_straight(chain: ChainConfig, z: complex, tol: float) -> complex:
    n, q, z0 = chain.n, chain.q, chain.z0
    beta = 1.0 / q - 1.0

    def logf(lam):
        lp, _, _, err = _pi_logs(chain, z0 + lam * z)
        return n * lp - math.log(q) + beta * np.log(lam), n * float(np.max(err))

    _, d1, _, _ = _pi_logs(chain, np.array([z0 + z]))
    h0 = min(1.0, 1.0 / (1.0 + abs(z) * n * abs(d1[0])))
    val, _ = _march(logf, 0.0, 1.0, m=chain.quad.nodes, tol=tol, h0=h0, jac=beta)
    return val


def _t_arc(chain: ChainConfig, W: complex, theta: float, tol: float) -> complex:
    """Integral along |W'| = |W| from spiral offset theta back to the spiral."""
    if theta == 0.0:
        return NEG_INF
    R = abs(W)
    n, q, c, z0 = chain.n, chain.q, chain.params.c, chain.z0
    beta = 1.0 / q - 1.0
    base = c * math.log(R)
    lR = math.log(R)

    def logf(th):
        lW = lR + 1j * (base + th)
        Wp = np.exp(lW)
        lp, _, _, err = _pi_logs(chain, Wp)
        lU = lW + np.array([clog1p(x) for x in (-z0 / Wp)])
        return n * lp - math.log(q) + beta * lU + lW + 0.5j * math.pi, n * float(np.max(err))

    _, d1, _, _ = _pi_logs(chain, np.array([W]))
    h0 = min(abs(theta), 2.0 / (1.0 + n * abs(d1[0]) * R))
    val, _ = _march(logf, theta, 0.0, m=chain.quad.nodes, tol=tol, h0=h0, drop=50.0)
    return val


def h_parts(chain: ChainConfig, z: complex, mode: str = "precise", tol: Optional[float] = None) -> HParts:
    """Evaluate H(z); ``mode`` is 'precise', 'fast' or 'auto' (fast when safe)."""
    z = complex(z)
    tol = chain.quad.tol if tol is None else tol
    n, q = chain.n, chain.q
    W = z + chain.z0
    lp, d1, d2, _ = _pi_logs(chain, np.array([W]))
    log_pin = complex(n * lp[0])
    if z == 0:
        return HParts(log_pin, log_pin, "straight")
    if abs(z) <= chain.r_valley:
        return HParts(_h_straight(chain, z, tol), log_pin, "straight")
    theta = valley_offset(chain, W)
    log_root = _log_root(chain, z, W, theta)
    la = chain.log_a
    if mode in ("fast", "auto"):
        fast = _h_fast(chain, z, W, log_root, log_pin, complex(d1[0]), complex(d2[0]))
        if fast is not None or mode == "fast":
            if fast is None:
                raise PreconditionError(f"fast H is not accurate at z = {z}")
            return fast
    arc = _t_arc(chain, W, theta, tol)
    if chain.table.negligible_beyond(abs(W), arc.real - 46.0):
        lt = arc
    else:
        lt = _ladd(arc, chain.table.log_tail(abs(W), tol))
    ratio = lt - la
    log_H = -log_root + la + _log1m(ratio)
    return HParts(log_H, log_pin, "valley", log_root, ratio)


def _h_fast(chain, z, W, log_root, log_pin, d1, d2):
    """Valley constant plus the endpoint term of the Laplace expansion, or None."""
    n, q = chain.n, chain.q
    R = abs(W)
    # the spiral tail past R must be negligible against a
    if not chain.table.negligible_beyond(R, chain.a.lnmod - 46.0):
        return None
    beta = 1.0 / q - 1.0
    x1 = z * n * d1 + beta
    x2 = z * z * n * d2 - beta
    main = chain.log_a - log_root
    if x1 == 0 or not np.isfinite(x1):
        return None
    eps = x2 / (x1 * x1)
    lE = log_pin - math.log(q) - cmath.log(x1) + clog1p(eps)
    if abs(eps) >= chain.quad.fast_eps and lE.real > main.real - 46.0:
        return None
    log_H = _ladd(main, lE)
    ratio = lE - main + 1j * math.pi  # T/a = -E z^(1/q)/a
    return HParts(log_H, log_pin, "fast", log_root, ratio)


# ---------------------------------------------------------------- g-functions

def _zeta_pow_q(chain: ChainConfig, zeta: complex) -> complex:
    if zeta == 0:
        return 0j
    lq = chain.q * cmath.log(zeta)
    if lq.real > 700:
        raise BoundOnlyContext("zeta^q is beyond double range")
    return cmath.exp(lq)


def g1(chain: ChainConfig, zeta) -> EvalResult:
    """Pi(zeta^q + z0); callers raise it to the n-th power themselves."""
    zeta = complex(zeta)
    if zeta == 0:
        return log_pi(chain.evaluator, chain.z0)
    lq = chain.q * cmath.log(zeta)
    if lq.real < 700:
        return log_pi(chain.evaluator, cmath.exp(lq) + chain.z0)
    res = log_pi(chain.evaluator, lc_from_log(lq))
    p = chain.params
    bump = abs(chain.z0) * math.exp(-lq.real) * p.rho * math.exp(p.rho * lq.real) * 3.0
    return EvalResult(res.value, res.regime, res.err_lnmod + bump, res.err_arg + bump)


def g2(chain: ChainConfig, zeta, bounds=None) -> LogComplex:
    """zeta H(zeta^q); with bounds, a itself once zeta^q is in S1 past the cutoff."""
    zeta = complex(zeta)
    if zeta == 0:
        return ZERO
    lq = chain.q * cmath.log(zeta)
    if bounds is not None and lq.real > math.log(bounds.r_g2_cut):
        theta = reduce_arg(lq.imag - chain.params.c * lq.real)
        if chain.sigma_region(chain.params.theta1).contains_spiral(lq.real, theta):
            return chain.a
    if lq.real > 700:
        raise BoundOnlyContext("g2 far outside S1 has no representable value")
    hp = h_parts(chain, cmath.exp(lq))
    return lc_from_log(cmath.log(zeta) + hp.log_H)


def g3(chain: ChainConfig, zeta) -> LogComplex:
    """g2(zeta)/(a zeta); at 0 the limit Pi(z0)^n / a."""
    zeta = complex(zeta)
    hp = h_parts(chain, _zeta_pow_q(chain, zeta))
    return lc_from_log(hp.log_H - chain.log_a)


def g4(chain: ChainConfig, w, root: Optional[int] = None) -> LogComplex:
    """H(w)/a; with ``root`` = k it is evaluated as g3 at the k-th q-th root of w."""
    w = complex(w)
    if root is None:
        return lc_from_log(h_parts(chain, w).log_H - chain.log_a)
    if w == 0:
        return g3(chain, 0j)
    zeta = cmath.exp((cmath.log(w) + 2j * math.pi * root) / chain.q)
    return g3(chain, zeta)


# ---------------------------------------------------------------- f and f'

@dataclass(frozen=True)
class FValue:
    value: LogComplex
    regime: str                        # 'chain' or 'asymptotic'
    deviation: Optional[LogComplex]    # f z^(-1/q) - 1, spiral branch
    log_delta: Optional[complex] = None
    parts: Optional[HParts] = None


def _deviation(chain: ChainConfig, ratio: complex) -> LogComplex:
    """(1 - T/a)^(q-1) - 1 without cancellation."""
    if ratio.real < -40.0:
        return lc_from_log(ratio + math.log(chain.q - 1) + 1j * math.pi)
    L = (chain.q - 1) * _log1m(ratio)
    if L.real > 1.0:
        return lc_from_log(L + cmath.log(1 - cmath.exp(-L)))
    return lc_from_log(cmath.log(_expm1(L)))


def f_detail(chain: ChainConfig, z, bounds=None, mode: str = "precise") -> FValue:
    z = complex(z)
    if z == 0:
        return FValue(ZERO, "chain", None)
    q = chain.q
    if bounds is not None and abs(z) > bounds.r_f_cut \
            and chain.sigma_region(chain.params.theta2).contains(z):
        W = z + chain.z0
        root = _log_root(chain, z, W, valley_offset(chain, W))
        return FValue(lc_from_log(root), "asymptotic", None)
    hp = h_parts(chain, z, mode)
    log_f = cmath.log(z) + (q - 1) * (hp.log_H - chain.log_a)
    dev = _deviation(chain, hp.log_ratio) if hp.log_ratio is not None else None
    log_delta = math.log(q - 1) + hp.log_pin - hp.log_H
    return FValue(lc_from_log(log_f), "chain", dev, log_delta, hp)


def f(chain: ChainConfig, z, bounds=None) -> LogComplex:
    return f_detail(chain, z, bounds).value


def f_deviation(chain: ChainConfig, z) -> LogComplex:
    """f(z) z^(-1/q) - 1 on the spiral branch (valley points only)."""
    fv = f_detail(chain, z)
    if fv.deviation is None:
        raise ValueError("deviation is defined on the valley branch only")
    return fv.deviation


def f_prime(chain: ChainConfig, z, mode: str = "precise") -> LogComplex:
    """f' = f (1 + delta)/(q z)."""
    z = complex(z)
    if z == 0:
        hp = h_parts(chain, 0j)
        return lc_from_log((chain.q - 1) * (hp.log_H - chain.log_a))
    fv = f_detail(chain, z, mode=mode)
    if fv.value.is_zero:
        raise PoleError(f"g4 vanishes at z = {z}")
    l1 = _log1p_exp(fv.log_delta)
    if l1.real == -math.inf:
        return ZERO
    return lc_from_log(complex(fv.value.lnmod, fv.value.arg) + l1 - cmath.log(chain.q * z))


# ---------------------------------------------------------------- calibration

@dataclass(frozen=True)
class CalibratedBounds:
    eta2: float
    eta3: float
    eta4: float
    eta5: float
    eta6: float
    r0: float
    r1: float
    r_fit: float
    r_f_cut: float
    r_n_cut: float
    r_g2_cut: float
    r_lo: float
    r_hi: float
    residuals: tuple = ()

    @property
    def etas(self) -> dict:
        return {f"eta{i}": getattr(self, f"eta{i}") for i in range(2, 7)}


@dataclass
class CalibrationData:
    """Raw per-radius measurements behind a calibration (kept for reports)."""
    radii: np.ndarray
    logs: dict
    n_ratio_min: np.ndarray
    resid_rel: np.ndarray


def _theta_grid(theta_max: float, count: int) -> np.ndarray:
    return theta_max * np.linspace(-1, 1, count + 2)[1:-1]


def measure(chain: ChainConfig, r: float, thetas: dict, mode: str = "precise") -> dict:
    """log-magnitudes of the five bounded quantities at radius r, maximised over theta."""
    p = chain.params
    c, q, n = p.c, p.q, chain.n
    out = {}
    # eta2: |Pi(W)| on the spiral window, x = |W - z0|^rho
    W = spiral_point(r, c) * np.exp(1j * thetas["s1"])
    lp, _, _, _ = _pi_logs(chain, W)
    out["eta2"] = (float(np.max(lp.real)), float(np.min(np.abs(W - chain.z0))) ** p.rho)
    worst = {k: -math.inf for k in ("eta3", "eta4", "eta5", "eta6")}
    n_ratio = math.inf
    resid = 0.0
    for key, ths in (("s1", thetas["s1"]), ("s2", thetas["s2"]), ("s3", thetas["s3"])):
        for th in ths:
            z = complex(spiral_point(r, c) * cmath.exp(1j * th))
            hp = h_parts(chain, z, mode)
            if key == "s1":
                lt = hp.log_ratio + chain.log_a
                worst["eta3"] = max(worst["eta3"], lt.real)
                continue
            log_delta = math.log(q - 1) + hp.log_pin - hp.log_H
            if key == "s2":
                dev = _deviation(chain, hp.log_ratio)
                root = hp.log_root
                worst["eta4"] = max(worst["eta4"], root.real + dev.lnmod)
                # f' - z^(1/q)/(qz) = z^(1/q)/(qz) [(1 - T/a)^(q-1)(1 + delta) - 1]
                D = (q - 1) * _log1m(hp.log_ratio) + _log1p_exp(log_delta)
                if abs(D) < 1e-300:
                    lx = -math.inf
                elif D.real < -40 and abs(D) < 1e-8:
                    lx = math.log(abs(D))
                else:
                    lx = math.log(abs(_expm1(D)))
                worst["eta5"] = max(worst["eta5"], root.real - math.log(q * r) + lx)
            else:
                # N + pz = q z delta/(1 + delta)
                lr = math.log(q * r) + (log_delta - _log1p_exp(log_delta)).real
                worst["eta6"] = max(worst["eta6"], lr)
                ratio = abs(cmath.exp(_log1m(log_delta - math.log(p.p) + 0j) + math.log(p.p)
                                      - _log1p_exp(log_delta)))
                n_ratio = min(n_ratio, ratio)
                resid = max(resid, math.exp(lr - math.log(p.p * r)))
    x = r ** p.rho
    for k, v in worst.items():
        out[k] = (v, x)
    out["n_ratio"] = n_ratio
    out["resid"] = resid
    return out


def _fit(logs: np.ndarray, xs: np.ndarray, safety: float):
    ok = np.isfinite(logs)
    if ok.sum() < 2:
        raise FitFailed("not enough finite samples for a decay fit")
    eta = -float(np.dot(xs[ok], logs[ok]) / np.dot(xs[ok], xs[ok]))
    if not eta > 0:
        raise FitFailed(f"quantity does not decay (fitted rate {eta:.3e})")
    res = float(np.sqrt(np.mean((logs[ok] + eta * xs[ok]) ** 2)))
    return safety * eta, res


def _solve_cut(eta: float, rho: float, rhs) -> float:
    """Smallest r >= 1 with -eta r^rho < rhs(r)."""
    g = lambda r: -eta * r ** rho - rhs(r)
    hi = 2.0
    while g(hi) >= 0:
        hi *= 2.0
    if g(1.0) < 0:
        return 1.0
    return brentq(g, 1.0, hi, xtol=1e-10)


def calibrate(chain: ChainConfig, r_scan_min: Optional[float] = None, r_fit_hi: float = 2000.0,
              n_radii: int = 28, n_theta: int = 7, safety: float = 0.5, mode: str = "precise",
              return_data: bool = False):
    """Fit eta2..eta6 and the radii r0, r1, r_fit and the regime cutoffs."""
    p = chain.params
    r_min = r_scan_min or 1.2 * chain.r_valley
    radii = np.geomspace(r_min, r_fit_hi, n_radii)
    thetas = {"s1": _theta_grid(p.theta1, n_theta), "s2": _theta_grid(p.theta2, n_theta),
              "s3": _theta_grid(p.theta3, n_theta)}
    rows = [measure(chain, float(r), thetas, mode) for r in radii]
    keys = ("eta2", "eta3", "eta4", "eta5", "eta6")
    logs = {k: np.array([row[k][0] for row in rows]) for k in keys}
    xs = {k: np.array([row[k][1] for row in rows]) for k in keys}
    fit_sel = radii >= r_fit_hi / 10
    etas, resid = {}, []
    for k in keys:
        try:
            etas[k], res = _fit(logs[k][fit_sel], xs[k][fit_sel], safety)
        except FitFailed as exc:
            raise FitFailed(f"{k}: {exc}") from exc
        resid.append((k, res))
    holds = np.all([logs[k] <= -etas[k] * xs[k] for k in keys], axis=0)
    bad = np.nonzero(~holds)[0]
    r_fit = float(radii[bad[-1] + 1]) if bad.size else float(radii[0])
    if bad.size and bad[-1] + 1 >= radii.size:
        raise FitFailed("fitted bounds fail at the largest sampled radius")
    n_ratio = np.array([row["n_ratio"] for row in rows])
    bad = np.nonzero(~(n_ratio > 2.0))[0]
    r0 = float(radii[bad[-1] + 1]) if bad.size else float(radii[0])
    r0 = max(r0, 1.0 + 1e-9)
    r1 = max(10.0 * r0, 2.0 / p.theta3)
    rho = p.rho
    r_f_cut = _solve_cut(etas["eta4"], rho, lambda r: math.log(1e-18) + math.log(r) / p.q)
    r_n_cut = _solve_cut(etas["eta6"], rho, lambda r: math.log(1e-18 * p.p * r))
    r_g2_cut = _solve_cut(etas["eta3"], rho, lambda r: math.log(1e-18) + chain.a.lnmod)
    resid_rel = np.array([row["resid"] for row in rows])
    bad = np.nonzero(~(resid_rel < 1e-3))[0]
    r_lo = float(radii[bad[-1] + 1]) if bad.size and bad[-1] + 1 < radii.size else float(radii[0])
    bounds = CalibratedBounds(etas["eta2"], etas["eta3"], etas["eta4"], etas["eta5"], etas["eta6"],
                              r0, r1, r_fit, r_f_cut, r_n_cut, r_g2_cut, max(r_lo, r_fit), r_n_cut,
                              tuple(resid))
    if return_data:
        return bounds, CalibrationData(radii, logs, n_ratio, resid_rel)
    return bounds


# ---------------------------------------------------------------- persistence

BOUND_FIELDS = ("eta2", "eta3", "eta4", "eta5", "eta6", "r0", "r1", "r_fit",
                "r_f_cut", "r_n_cut", "r_g2_cut", "r_lo", "r_hi")


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def serialize_chain(chain: ChainConfig, bounds: Optional[CalibratedBounds], cfg_hash: str) -> str:
    lines = [
        f"config_hash = {cfg_hash}",
        f"t0 = {chain.t0!r}",
        f"z0 = {chain.z0.real!r} {chain.z0.imag!r}",
        f"n = {chain.n}",
        f"a = {lc_format(chain.a)}",
        f"a_err = {chain.a_err!r}",
        f"quad_nodes = {chain.quad.nodes}",
    ]
    if bounds is not None:
        for name in BOUND_FIELDS:
            lines.append(f"{name} = {getattr(bounds, name)!r}")
    return "\n".join(lines) + "\n"


def load_chain(text: str, ev: ProductEvaluator, cfg_hash: str, quad: QuadSettings = QuadSettings()):
    """Rebuild (chain, bounds) from ``serialize_chain`` output; refuses a hash mismatch."""
    from .errors import ConfigError
    kv = {}
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if ln:
            k, v = (s.strip() for s in ln.split("=", 1))
            kv[k] = v
    if kv.get("config_hash") != cfg_hash:
        raise ConfigError(f"chain was calibrated for config {kv.get('config_hash')}, not {cfg_hash}")
    re_, im_ = (float(s) for s in kv["z0"].split())
    quad = replace(quad, nodes=int(kv.get("quad_nodes", quad.nodes)))
    chain = ChainConfig(ev.params, ev, float(kv["t0"]), complex(re_, im_), int(kv["n"]),
                        lc_parse(kv["a"]), float(kv["a_err"]), quad)
    bounds = None
    if "eta2" in kv:
        bounds = CalibratedBounds(*(float(kv[k]) for k in BOUND_FIELDS))
    return chain, bounds


def calibration_report(chain: ChainConfig, bounds: CalibratedBounds, ratios: dict) -> str:
    p = chain.params
    out = [
        f"rho = {p.rho}  delta = {p.delta}  p = {p.p}  q = {p.q}  c = {p.c!r}  mu = {p.mu!r}",
        f"theta0..3 = {p.theta0!r} {p.theta1!r} {p.theta2!r} {p.theta3!r}",
        f"t0 = {chain.t0!r}",
        f"z0 = {chain.z0!r}",
        f"n = {chain.n}",
        f"a = {lc_format(chain.a)}",
        f"a_err = {chain.a_err:.3e}  |a|/err = {math.exp(chain.a.lnmod) / chain.a_err if chain.a_err else math.inf:.3e}",
        "tried n: " + ", ".join(f"{k}:{v:.3e}" for k, v in ratios.items()),
    ]
    out += [f"{k} = {v!r}" for k, v in bounds.etas.items()]
    out += [f"r0 = {bounds.r0!r}", f"r1 = {bounds.r1!r}", f"r_fit = {bounds.r_fit!r}",
            f"r_f_cut = {bounds.r_f_cut!r}", f"r_n_cut = {bounds.r_n_cut!r}",
            f"r_g2_cut = {bounds.r_g2_cut!r}",
            f"transition band = [{bounds.r_lo!r}, {bounds.r_hi!r}]"]
    out += [f"fit residual {k} = {v:.4g}" for k, v in bounds.residuals]
    return "\n".join(out) + "\n"
