"""The canonical product Pi(w) = prod (1 - w/a_k) over the spiral zeros."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import BoundOnlyContext, PoleError, PreconditionError, TruncationInsufficient
from .geometry import ZeroSequence
from .logspace import LogComplex, ZERO, lc_from_log, reduce_arg
from .params import ConstructionParams, asymptotic_coeff

# derivatives at w = 0 are taken here; the relative error is O(|w|)
_W_TINY = 1e-30


class Regime(enum.Enum):
    DIRECT = "Direct"
    HYBRID = "Hybrid"
    ASYMPTOTIC_VALUE = "AsymptoticValue"
    UPPER_BOUND_ONLY = "UpperBoundOnly"


@dataclass(frozen=True)
class EvalResult:
    value: LogComplex
    regime: Regime
    err_lnmod: float
    err_arg: float

    @property
    def lnmod(self) -> float:
        return self.value.lnmod


@dataclass(frozen=True)
class ProductEvaluator:
    params: ConstructionParams
    K_direct: int = 10 ** 7
    window: float = 8.0
    r_asym: float = 1e8
    quad_nodes: int = 20
    near_count: int = 32
    direct_dispatch_max: int = 4096
    theta_guard: Optional[float] = None
    eta1: Optional[float] = None
    seq: ZeroSequence = field(init=False)

    def __post_init__(self):
        if self.window <= 1:
            raise ValueError("window must exceed 1")
        if self.quad_nodes < 2:
            raise ValueError("quad_nodes must be at least 2")
        p = self.params
        set_ = object.__setattr__
        set_(self, "seq", ZeroSequence.for_params(p))
        beta = (1 + 1j * p.c) / p.rho
        P, Q = kernels.derivative_tables(beta)
        set_(self, "_beta", beta)
        set_(self, "_tables", (P, Q))
        set_(self, "_nodes", {})
        if self.theta_guard is None and p.theta0 is not None:
            set_(self, "theta_guard", p.theta0 / 4)
        if self.eta1 is None and p.theta0 is not None:
            set_(self, "eta1", fit_eta1(self))

    # pickling drops the lazily filled node cache
    def __getstate__(self):
        d = dict(self.__dict__)
        d["_nodes"] = {}
        return d

    def __setstate__(self, d):
        self.__dict__.update(d)

    def _gl(self, n):
        if n not in self._nodes:
            self._nodes[n] = np.polynomial.legendre.leggauss(n)
        return self._nodes[n]

    def _run(self, ws, direct_k=0, nodes=None):
        xg, wg = self._gl(nodes or self.quad_nodes)
        P, Q = self._tables
        p = self.params
        return kernels.log_pi_many(ws, self._beta, float(p.delta), int(self.seq.k_min), float(p.rho),
                                   int(self.near_count), float(self.window), xg, wg, P, Q,
                                   kernels.STIRLING, int(direct_k))

    def direct_index(self, absw: float) -> int:
        """Index up to which the Direct regime sums exactly."""
        return self.seq.k_min - 1 + self.seq.count_n(self.window * absw)

    def log_values(self, ws, nodes=None):
        """Vectorised Hybrid evaluation: (log Pi, (log Pi)', (log Pi)'', err).

        log Pi is returned unreduced (imaginary part is some branch of the
        argument).  No regime dispatch happens here.
        """
        ws = np.atleast_1d(np.asarray(ws, dtype=np.complex128))
        out, err = self._run(ws, 0, nodes)
        wd = np.where(ws == 0, _W_TINY, ws)
        if np.any(ws == 0):
            tiny = self._run(np.full(1, _W_TINY + 0j), 0, nodes)[0][0]
            out[ws == 0, 1:] = tiny[1:]
        with np.errstate(all="ignore"):
            d1 = -out[:, 1] / wd
            d2 = -out[:, 2] / (wd * wd)
        return out[:, 0], d1, d2, err


def _as_point(w):
    """Return (complex or None, log-radius, argument)."""
    if isinstance(w, LogComplex):
        if w.is_zero:
            return 0j, -math.inf, 0.0
        if w.lnmod < 700:
            return complex(np.exp(w.lnmod) * np.exp(1j * w.arg)), w.lnmod, w.arg
        return None, w.lnmod, w.arg
    w = complex(w)
    if w == 0:
        return w, -math.inf, 0.0
    return w, math.log(abs(w)), math.atan2(w.imag, w.real)


def tail_bound(ev: ProductEvaluator, absw: float, K: int) -> float:
    """Upper bound on |sum_{k>K} log(1 - w/a_k)| for |w| = absw."""
    rho, delta = ev.params.rho, ev.params.delta
    if float(ev.seq.radius(K)) < 2 * absw:
        raise PreconditionError(f"r_K = {float(ev.seq.radius(K)):.6g} < 2|w| = {2 * absw:.6g}")
    return 2 * absw * delta ** (1 / rho) * K ** (1 - 1 / rho) / (1 / rho - 1)


def log_pi_direct(ev: ProductEvaluator, w, K: int, tol: Optional[float] = None) -> EvalResult:
    """Partial sum over k_min <= k <= K, with the genus-0 tail bound as error."""
    if K > ev.K_direct:
        raise PreconditionError(f"K = {K} exceeds K_direct = {ev.K_direct}")
    z, _, _ = _as_point(w)
    if z is None:
        raise PreconditionError("w is outside double range")
    if z == 0:
        return EvalResult(LogComplex(0.0, 0.0), Regime.DIRECT, 0.0, 0.0)
    try:
        bound = tail_bound(ev, abs(z), K)
    except PreconditionError:
        bound = math.inf
    if tol is not None and bound > tol:
        raise TruncationInsufficient(f"tail bound {bound:.3e} exceeds tolerance {tol:.3e}")
    s = kernels.truncated_sum(z, ev._beta, float(ev.params.delta), int(ev.seq.k_min), int(K))
    if not math.isfinite(s.real):
        return EvalResult(ZERO, Regime.DIRECT, 0.0, 0.0)
    return EvalResult(lc_from_log(s), Regime.DIRECT, bound, bound)


def spiral_offset(ev: ProductEvaluator, logr: float, arg: float) -> float:
    return reduce_arg(arg - ev.params.c * logr)


def _asymptotic(ev, logr, arg, require_value):
    th = spiral_offset(ev, logr, arg)
    scale = math.exp(ev.params.rho * logr)
    if abs(th) < ev.theta_guard:
        if require_value:
            raise BoundOnlyContext(f"|theta| = {abs(th):.3e} is inside the guard {ev.theta_guard:.3e}")
        return EvalResult(LogComplex(-ev.eta1 * scale, math.nan), Regime.UPPER_BOUND_ONLY, 0.0, math.nan)
    A = complex(asymptotic_coeff(ev.params, th if th > 0 else th + 2 * math.pi))
    return EvalResult(lc_from_log(scale * A), Regime.ASYMPTOTIC_VALUE, math.nan, math.nan)


def log_pi(ev: ProductEvaluator, w, require_value: bool = False,
           force: Optional[Regime] = None) -> EvalResult:
    """Evaluate log Pi(w) with regime dispatch.

    ``force`` pins the regime (used by consistency checks); Direct and Hybrid
    are available at any radius, the asymptotic ones only beyond r_asym
    unless forced.
    """
    z, logr, arg = _as_point(w)
    if z == 0:
        return EvalResult(LogComplex(0.0, 0.0), Regime.DIRECT, 0.0, 0.0)
    if force in (Regime.ASYMPTOTIC_VALUE, Regime.UPPER_BOUND_ONLY):
        return _asymptotic(ev, logr, arg, require_value)
    if force is None and logr > math.log(ev.r_asym):
        return _asymptotic(ev, logr, arg, require_value)
    if z is None:
        raise PreconditionError("w is outside double range and no asymptotic regime applies")
    kd = ev.direct_index(abs(z))
    use_direct = force is Regime.DIRECT or (force is None and kd <= ev.direct_dispatch_max)
    if use_direct:
        if kd > ev.K_direct:
            raise TruncationInsufficient(f"Direct needs {kd} terms, K_direct = {ev.K_direct}")
        kd = max(kd, ev.seq.k_min)
        (row,), (e,) = ev._run(np.array([z]), kd)
        regime, e2 = Regime.DIRECT, 0.0
    else:
        (row,), (e,) = ev._run(np.array([z]))
        (row2,), _ = ev._run(np.array([z]), 0, 2 * ev.quad_nodes)
        regime, e2 = Regime.HYBRID, abs(row2[0] - row[0])
    val = row[0]
    if not math.isfinite(val.real) or val.real == -math.inf:
        return EvalResult(ZERO, regime, 0.0, 0.0)
    err = max(e, e2)
    return EvalResult(lc_from_log(val), regime, err, err)


def log_derivative(ev: ProductEvaluator, w, second: bool = False):
    """Pi'/Pi at w (and (log Pi)'' when ``second``)."""
    z, logr, arg = _as_point(w)
    if z is None or (z != 0 and logr > math.log(ev.r_asym)):
        if abs(spiral_offset(ev, logr, arg)) < ev.theta_guard:
            raise BoundOnlyContext("derivative requested in the bound-only regime")
        if z is None:
            raise PreconditionError("w is outside double range")
    _, d1, d2, _ = ev.log_values(np.array([z]))
    d1, d2 = complex(d1[0]), complex(d2[0])
    if not (np.isfinite(d1) and np.isfinite(d2)) or (z != 0 and abs(d1) * abs(z) > 1e15):
        raise PoleError(f"w = {z} is at a zero of Pi")
    return (d1, d2) if second else d1


def max_log_modulus(ev: ProductEvaluator, r: float, samples: int = 512) -> float:
    if r == 0:
        return 0.0
    th = 2 * math.pi * np.arange(samples) / samples
    if r <= ev.r_asym:
        vals, _, _, _ = ev.log_values(r * np.exp(1j * th))
        # a sample sitting exactly on a zero comes back as nan
        return float(np.max(np.nan_to_num(vals.real, nan=-np.inf)))
    lr = math.log(r)
    return max(log_pi(ev, LogComplex(lr, float(t))).lnmod for t in th)


def spiral_midpoints(ev: ProductEvaluator, r_lo: float, r_hi: float, count: int) -> np.ndarray:
    """Points on the zero spiral halfway (geometrically) between consecutive zeros."""
    seq = ev.seq
    k_lo = max(seq.k_min, seq.k_min - 1 + seq.count_n(r_lo) + 1)
    k_hi = seq.k_min - 1 + seq.count_n(r_hi)
    if k_hi <= k_lo:
        raise ValueError("radius range contains no zero pair")
    ks = np.unique(np.geomspace(k_lo, k_hi - 1, count).astype(np.int64))
    r = np.sqrt(seq.radius(ks) * seq.radius(ks + 1))
    return r * np.exp(1j * ev.params.c * np.log(r))


def fit_eta1(ev: ProductEvaluator, samples: int = 40, safety: float = 0.5) -> float:
    """Decay rate along the spiral, fitted over the top decade below r_asym."""
    from .errors import FitFailed
    pts = spiral_midpoints(ev, ev.r_asym / 10, ev.r_asym, samples)
    lv, _, _, _ = ev.log_values(pts)
    x = np.abs(pts) ** ev.params.rho
    y = lv.real
    eta = -float(np.dot(x, y) / np.dot(x, x))
    if not eta > 0:
        raise FitFailed(f"no decay along the zero spiral (fitted rate {eta:.3e})")
    return safety * eta


PROFILE_COLUMNS = ("r", "theta", "lnmod", "regime", "err_lnmod")


def profile_rows(ev: ProductEvaluator, radii, thetas):
    """Rows (r, theta, lnmod, regime, err_lnmod) over spiral-offset angles."""
    rows = []
    c = ev.params.c
    for r in radii:
        for th in thetas:
            res = log_pi(ev, LogComplex(math.log(r), c * math.log(r) + th))
            rows.append((float(r), float(th), res.lnmod, res.regime.value, res.err_lnmod))
    return rows


def write_profile_csv(rows, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(PROFILE_COLUMNS)
            for r, th, l, reg, e in rows:
                wr.writerow([repr(r), repr(th), repr(l), reg, repr(e)])
    except OSError as exc:
        raise OSError(f"cannot write profile CSV to {path}: {exc}") from exc
