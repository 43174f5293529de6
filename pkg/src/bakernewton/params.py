"""Construction parameters and the angular indicator h(theta).

The zeros of the canonical product sit on the spiral r*exp(i*c*log r).  At a
point with angular offset theta from that spiral, log|Pi| grows like
h(theta) * r**rho; the window where h < 0 is where Pi decays.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DomainError, NoAdmissibleP, NoNegativeWindow

TWO_PI = 2.0 * math.pi
DEFAULT_RATIOS = (0.8, 0.5, 0.25)


@dataclass(frozen=True)
class ConstructionParams:
    rho: float
    delta: float
    p: int
    q: int
    c: float
    mu: float
    theta0: Optional[float] = None
    theta1: Optional[float] = None
    theta2: Optional[float] = None
    theta3: Optional[float] = None
    theta0_capped: bool = False

    @classmethod
    def from_p(cls, rho: float, delta: float, p: int) -> "ConstructionParams":
        if not 0.5 < rho < 1.0:
            raise DomainError(f"rho must lie in (1/2, 1), got {rho}")
        if delta <= 0:
            raise DomainError(f"delta must be positive, got {delta}")
        if p < 2:
            raise DomainError("p must be at least 2")
        c = math.pi / math.log(p)
        return cls(rho=rho, delta=delta, p=int(p), q=int(p) + 1, c=c, mu=rho / (1.0 + c * c))

    def check(self) -> list[str]:
        """Return the list of violated invariants (empty when admissible)."""
        bad = []
        if not 0.5 < self.rho < 1.0:
            bad.append("rho not in (1/2, 1)")
        if self.delta <= 0:
            bad.append("delta <= 0")
        if self.q != self.p + 1:
            bad.append("q != p + 1")
        if not math.isclose(self.c, math.pi / math.log(self.p), rel_tol=1e-14):
            bad.append("c != pi / log p")
        if not math.isclose(self.mu, self.rho / (1 + self.c ** 2), rel_tol=1e-14):
            bad.append("mu != rho / (1 + c^2)")
        if not 0.5 < self.mu < 1.0:
            bad.append("mu not in (1/2, 1)")
        if self.p < 24:
            bad.append("p < 24")
        angles = (self.theta3, self.theta2, self.theta1, self.theta0)
        if all(a is not None for a in angles):
            if not 0 < self.theta3 < self.theta2 < self.theta1 < self.theta0 < math.pi + 1e-15:
                bad.append("angle thresholds not strictly ordered in (0, pi)")
            else:
                th = np.linspace(-self.theta1, self.theta1, 2001)
                th = th[th != 0]
                if np.any(h_spiral(self, th) >= 0):
                    bad.append("h >= 0 somewhere on 0 < |theta| <= theta1")
        return bad

    @property
    def omega(self) -> complex:
        return cmath.exp(2j * math.pi / self.q)


def _exp_factor(params, theta):
    """exp(i*rho*theta/(1+ic)); works on scalars and arrays."""
    return np.exp(1j * params.rho * np.asarray(theta) / (1.0 + 1j * params.c))


def _denominator(params) -> complex:
    return 1.0 - cmath.exp(1j * TWO_PI * params.rho / (1.0 + 1j * params.c))


def asymptotic_coeff(params, theta):
    """Complex limit of log Pi(r e^{i(c log r + theta)}) / r**rho for theta in (0, 2pi)."""
    return -2j * math.pi * params.delta * _exp_factor(params, theta) / _denominator(params)


def _den_sq(params) -> float:
    """|1 - exp(2 pi i rho/(1+ic))|^2 in real arithmetic."""
    s = params.mu - 0.5                     # exact for mu in [1/4, 1]
    e = math.exp(TWO_PI * params.mu * params.c)
    return (1.0 + e * math.cos(TWO_PI * s)) ** 2 + (e * math.sin(TWO_PI * s)) ** 2


def h_at(params, theta):
    # Re(i E/D) expanded into sines; writing 2 pi mu = pi + 2 pi (mu - 1/2)
    # keeps full relative accuracy when mu is close to 1/2 and h is small.
    t = np.asarray(theta, dtype=float)
    if np.any((t <= 0) | (t >= TWO_PI)):
        raise DomainError("h_at needs theta strictly inside (0, 2pi)")
    mu, c = params.mu, params.c
    s = mu - 0.5
    e = math.exp(TWO_PI * mu * c)
    val = (TWO_PI * params.delta * np.exp(mu * c * t)
           * (e * np.sin(mu * t - TWO_PI * s) + np.sin(mu * t)) / _den_sq(params))
    return float(val) if np.ndim(val) == 0 else val


def h_signed(params, theta):
    """h for offsets in (-2pi, 0), i.e. approached from the other side of the spiral."""
    t = np.asarray(theta, dtype=float)
    if np.any((t <= -TWO_PI) | (t >= 0)):
        raise DomainError("h_signed needs theta strictly inside (-2pi, 0)")
    return h_at(params, t + TWO_PI)


def h_spiral(params, theta):
    """h for nonzero offsets in (-2pi, 2pi), dispatching on the sign."""
    t = np.asarray(theta, dtype=float)
    shifted = np.where(t < 0, t + TWO_PI, t)
    return h_at(params, shifted)


def h0_closed_form(params) -> float:
    # sin(2 pi mu) = -sin(2 pi (mu - 1/2))
    return (-TWO_PI * params.delta * math.exp(TWO_PI * params.mu * params.c)
            * math.sin(TWO_PI * (params.mu - 0.5)) / _den_sq(params))


def h_peak_angle(params) -> float:
    """Angle in (0, 2pi) where h attains its maximum."""
    # h(theta) = Re(K e^{(mu c + i mu) theta}); maximise on a grid then polish
    th = np.linspace(1e-9, TWO_PI - 1e-9, 20001)
    i = int(np.argmax(h_at(params, th)))
    lo, hi = th[max(i - 1, 0)], th[min(i + 1, th.size - 1)]
    for _ in range(80):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if h_at(params, m1) < h_at(params, m2):
            lo = m1
        else:
            hi = m2
    return 0.5 * (lo + hi)


def _first_crossing(fun, tol):
    """Smallest theta in (0, pi] with fun(theta) >= 0, by scan then bisection."""
    grid = np.concatenate([np.geomspace(1e-12, 1e-2, 4000, endpoint=False),
                           np.linspace(1e-2, math.pi, 40000)])
    vals = fun(grid)
    pos = np.nonzero(vals >= 0)[0]
    if pos.size == 0:
        return math.pi, True
    j = int(pos[0])
    if j == 0:
        raise NoNegativeWindow("h is not negative next to the spiral")
    lo, hi = float(grid[j - 1]), float(grid[j])
    assert fun(np.array([lo]))[0] < 0 <= fun(np.array([hi]))[0]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fun(np.array([mid]))[0] < 0:
            lo = mid
        else:
            hi = mid
    return lo, False


def find_theta_window(params, tol: float = 1e-10) -> tuple[float, bool]:
    """Half-width theta0 of the window around the spiral where h < 0.

    Returns (theta0, capped); capped is True when h never changed sign on
    either side, in which case theta0 = pi.
    """
    if h0_closed_form(params) >= 0:
        raise NoNegativeWindow(f"h(0) = {h0_closed_form(params):.3e} >= 0")
    plus, cap_p = _first_crossing(lambda t: h_at(params, t), tol)
    minus, cap_m = _first_crossing(lambda t: h_signed(params, -t), tol)
    return min(plus, minus), (cap_p and cap_m)


def select_angles(params, ratios=DEFAULT_RATIOS) -> tuple[float, float, float]:
    theta0 = params.theta0
    if theta0 is None:
        raise DomainError("theta0 must be set before selecting angles")
    r1, r2, r3 = (float(r) for r in ratios)
    if not (1 > r1 > r2 > r3 > 0):
        raise DomainError(f"ratios must be strictly decreasing in (0, 1): {ratios}")
    return r1 * theta0, r2 * theta0, r3 * theta0


def smallest_p(rho: float, margin: float = 0.0, p_max: int = 10 ** 6) -> int:
    if not 0.5 < rho < 1.0:
        raise DomainError(f"rho must lie in (1/2, 1), got {rho}")
    if p_max < 24:
        raise DomainError("p_max must be at least 24")
    target = 0.5 + margin
    # mu(p) is increasing in p, so the feasible set is [p*, inf)
    def ok(p):
        c = math.pi / math.log(p)
        mu = rho / (1 + c * c)
        return mu > 0.5 and mu >= target
    if not ok(p_max):
        raise NoAdmissibleP(f"no p <= {p_max} gives mu >= {target} for rho = {rho}")
    lo, hi = 24, p_max
    if ok(lo):
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def derive_params(rho: float, margin: float = 0.0, delta: float = 1.0, p_max: int = 10 ** 6,
                  tol: float = 1e-10, ratios=DEFAULT_RATIOS) -> ConstructionParams:
    p = smallest_p(rho, margin, p_max)
    base = ConstructionParams.from_p(rho, delta, p)
    theta0, capped = find_theta_window(base, tol)
    windowed = replace(base, theta0=theta0, theta0_capped=capped)
    t1, t2, t3 = select_angles(windowed, ratios)
    return replace(windowed, theta1=t1, theta2=t2, theta3=t3)
