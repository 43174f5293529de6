"""Logarithmic-spiral coordinates, the zero sequence and the spiralling regions."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .logspace import reduce_arg


@dataclass(frozen=True)
class SpiralCoords:
    r: float
    theta: float


def to_spiral_coords(z: complex, c: float) -> SpiralCoords:
    r = abs(z)
    if r == 0:
        raise DomainError("the origin has no spiral coordinates")
    return SpiralCoords(r, reduce_arg(cmath.phase(z) - c * math.log(r)))


def from_spiral_coords(sc: SpiralCoords, c: float) -> complex:
    return cmath.rect(sc.r, c * math.log(sc.r) + sc.theta)


def spiral_theta(z, c: float):
    """Vectorised spiral offset in (-pi, pi]."""
    z = np.asarray(z, dtype=complex)
    t = np.angle(z) - c * np.log(np.abs(z))
    t = np.remainder(t + np.pi, 2 * np.pi) - np.pi
    return np.where(t == -np.pi, np.pi, t)


@dataclass(frozen=True)
class ZeroSequence:
    """Zeros a_k = r_k exp(i c log r_k), r_k = (k/delta)**(1/rho), k >= k_min."""
    delta: float
    rho: float
    c: float
    k_min: int

    @classmethod
    def for_params(cls, params) -> "ZeroSequence":
        return cls(params.delta, params.rho, params.c, max(1, math.ceil(params.delta)))

    def radius(self, k):
        return (np.asarray(k, dtype=float) / self.delta) ** (1.0 / self.rho)

    def zero(self, k: int) -> complex:
        if k < self.k_min:
            raise IndexError(f"zero index {k} below k_min = {self.k_min}")
        r = float(self.radius(k))
        return cmath.rect(r, self.c * math.log(r))

    def zeros(self, k_lo: int, k_hi: int) -> np.ndarray:
        """a_k for k_lo <= k <= k_hi."""
        if k_lo < self.k_min:
            raise IndexError(f"zero index {k_lo} below k_min = {self.k_min}")
        r = self.radius(np.arange(k_lo, k_hi + 1))
        return r * np.exp(1j * self.c * np.log(r))

    def count_n(self, r: float) -> int:
        """Number of zeros with |a_k| <= r."""
        if r < 1.0:
            return 0
        k = int(math.floor(self.delta * r ** self.rho))
        # settle the floating-point boundary against the radius formula itself
        while float(self.radius(k + 1)) <= r:
            k += 1
        while k >= self.k_min and float(self.radius(k)) > r:
            k -= 1
        return max(0, k - self.k_min + 1)


def count_n(seq: ZeroSequence, r: float) -> int:
    return seq.count_n(r)


def zero(seq: ZeroSequence, k: int) -> complex:
    return seq.zero(k)


def spiral_point(t, c: float):
    """L(t) = t exp(i c log t)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("spiral parameter must be positive")
    out = t * np.exp(1j * c * np.log(t))
    return complex(out) if out.ndim == 0 else out


def spiral_derivative(t, c: float):
    """L'(t) = (1 + ic) exp(i c log t)."""
    t = np.asarray(t, dtype=float)
    out = (1 + 1j * c) * np.exp(1j * c * np.log(t))
    return complex(out) if out.ndim == 0 else out


def L(t, c: float):
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 1):
        raise DomainError("L is parametrised on [1, inf)")
    return spiral_point(t, c)


def sigma_arg(t, t0: float, c: float):
    """Continuous argument of L(t0 + t) - L(t0) for t > 0.

    With s = log(1 + t/t0) one has L(t0+t) - L(t0) = L(t0+t) (1 - e^{-s(1+ic)}),
    and the second factor has positive real part, so its principal argument
    is already continuous.  The limit t -> 0+ is c log t0 + atan(c).
    """
    t = np.asarray(t, dtype=float)
    s = np.log1p(t / t0)
    tail = np.where(s > 0, np.angle(-np.expm1(-s * (1 + 1j * c))), math.atan(c))
    return c * np.log(t0 + t) + tail


def sigma(t, t0: float, c: float, q: int):
    """sigma(t) = (L(t0+t) - z0)^(1/q) on the branch continuous from t = 0+."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("sigma is defined for t >= 0")
    u = spiral_point(t0 + t, c) - spiral_point(t0, c)
    out = np.abs(u) ** (1.0 / q) * np.exp(1j * sigma_arg(t, t0, c) / q)
    out = np.where(t == 0, 0j, out)
    return complex(out) if out.ndim == 0 else out


def sigma_prime(t, t0: float, c: float, q: int):
    """d sigma/dt = (1/q) u^(1/q - 1) L'(t0 + t), same branch as sigma."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("sigma' is singular at t = 0")
    u = spiral_point(t0 + t, c) - spiral_point(t0, c)
    upow = np.abs(u) ** (1.0 / q - 1.0) * np.exp(1j * (1.0 / q - 1.0) * sigma_arg(t, t0, c))
    out = upow * spiral_derivative(t0 + t, c) / q
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SpiralRegion:
    """{ r e^{i(c log r + theta)} : r > r_min, |theta| < theta_max (- 1/r if taper) }."""
    r_min: float
    theta_max: float
    c: float
    taper: bool = False

    def __post_init__(self):
        if self.r_min < 1:
            raise DomainError("r_min must be >= 1")
        if self.theta_max <= 0:
            raise DomainError("theta_max must be positive")
        if self.taper and self.r_min * self.theta_max <= 1:
            raise DomainError("tapered region is empty: need r_min * theta_max > 1")

    def width(self, r):
        r = np.asarray(r, dtype=float)
        return self.theta_max - 1.0 / r if self.taper else np.full_like(r, self.theta_max)

    def contains(self, z) -> bool | np.ndarray:
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        safe = np.where(r > 0, r, 1.0)
        th = spiral_theta(np.where(r > 0, z, 1.0), self.c)
        out = (r > self.r_min) & (np.abs(th) < self.width(safe))
        return bool(out) if out.ndim == 0 else out

    def contains_spiral(self, logr: float, theta: float) -> bool:
        """Membership for a point given as (log r, unreduced-free offset)."""
        r = math.exp(logr) if logr < 700 else math.inf
        if not logr > math.log(self.r_min):
            return False
        w = self.theta_max - (1.0 / r if self.taper else 0.0)
        return abs(reduce_arg(theta)) < w


def in_region(region: SpiralRegion, z: complex) -> bool:
    return region.contains(z)
