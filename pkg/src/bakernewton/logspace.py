"""Complex numbers stored as (log-modulus, argument).

Values like Pi(z^q + z0)^n routinely have log-moduli of size 1e6 and more,
so every quantity in the construction travels as a ``LogComplex``.  Only the
final comparisons convert back to cartesian form, and that conversion
refuses (raises) instead of saturating.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

__all__ = [
    "LogComplex", "OverflowSignal", "UnderflowSignal", "TrackedArg",
    "ZERO", "ONE", "lc_mul", "lc_div", "lc_pow_int", "lc_add", "lc_neg",
    "lc_sub", "lc_to_cartesian", "lc_from_cartesian", "lc_from_log", "reduce_arg",
    "lc_format", "lc_parse",
]

# exp() of anything above this overflows an IEEE double
MAX_LNMOD = 709.0
# below this the result would be subnormal or zero
MIN_LNMOD = -708.0


class OverflowSignal(ArithmeticError):
    def __init__(self, lnmod: float):
        super().__init__(f"|value| = exp({lnmod:.6g}) overflows double precision")
        self.lnmod = lnmod


class UnderflowSignal(ArithmeticError):
    def __init__(self, lnmod: float):
        super().__init__(f"|value| = exp({lnmod:.6g}) underflows double precision")
        self.lnmod = lnmod


def reduce_arg(theta: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    r = math.remainder(theta, 2.0 * math.pi)
    if r <= -math.pi:
        r += 2.0 * math.pi
    return r


@dataclass(frozen=True)
class LogComplex:
    lnmod: float
    arg: float = 0.0

    def __post_init__(self):
        if self.lnmod == -math.inf:
            object.__setattr__(self, "arg", 0.0)

    @property
    def is_zero(self) -> bool:
        return self.lnmod == -math.inf

    def as_log(self) -> complex:
        """The complex logarithm lnmod + i*arg (only for nonzero values)."""
        return complex(self.lnmod, self.arg)

    def __mul__(self, other):
        return lc_mul(self, other)

    def __truediv__(self, other):
        return lc_div(self, other)

    def __neg__(self):
        return lc_neg(self)

    def __add__(self, other):
        return lc_add(self, other)

    def __sub__(self, other):
        return lc_sub(self, other)

    def __str__(self):
        return lc_format(self)


ZERO = LogComplex(-math.inf, 0.0)
ONE = LogComplex(0.0, 0.0)


def lc_from_log(logz: complex) -> LogComplex:
    """Wrap a complex logarithm; the imaginary part is reduced."""
    re = logz.real
    if re == -math.inf:
        return ZERO
    return LogComplex(float(re), reduce_arg(float(logz.imag)))


def lc_mul(a: LogComplex, b: LogComplex) -> LogComplex:
    if a.is_zero or b.is_zero:
        return ZERO
    return LogComplex(a.lnmod + b.lnmod, reduce_arg(a.arg + b.arg))


def lc_div(a: LogComplex, b: LogComplex) -> LogComplex:
    if b.is_zero:
        raise ZeroDivisionError("LogComplex division by zero")
    if a.is_zero:
        return ZERO
    return LogComplex(a.lnmod - b.lnmod, reduce_arg(a.arg - b.arg))


def lc_pow_int(a: LogComplex, n: int) -> LogComplex:
    if n == 0:
        return ONE
    if a.is_zero:
        if n < 0:
            raise ZeroDivisionError("negative power of zero")
        return ZERO
    return LogComplex(n * a.lnmod, reduce_arg(n * a.arg))


def lc_neg(a: LogComplex) -> LogComplex:
    if a.is_zero:
        return ZERO
    return LogComplex(a.lnmod, reduce_arg(a.arg + math.pi))


def lc_add(a: LogComplex, b: LogComplex) -> LogComplex:
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    if a.lnmod < b.lnmod:
        a, b = b, a
    # a dominates; scale b relative to a
    d = b.lnmod - a.lnmod
    if d < -800.0:
        return a
    s = 1.0 + cmath.exp(complex(d, b.arg - a.arg))
    if s == 0:
        return ZERO
    return LogComplex(a.lnmod + math.log(abs(s)), reduce_arg(a.arg + cmath.phase(s)))


def lc_sub(a: LogComplex, b: LogComplex) -> LogComplex:
    return lc_add(a, lc_neg(b))


def lc_to_cartesian(a: LogComplex) -> complex:
    if a.is_zero:
        return 0j
    if a.lnmod > MAX_LNMOD:
        raise OverflowSignal(a.lnmod)
    if a.lnmod < MIN_LNMOD:
        raise UnderflowSignal(a.lnmod)
    return cmath.rect(math.exp(a.lnmod), a.arg)


def lc_from_cartesian(z: complex) -> LogComplex:
    z = complex(z)
    if z == 0:
        return ZERO
    return LogComplex(math.log(abs(z)), cmath.phase(z))


def lc_format(a: LogComplex) -> str:
    """Serialize as ``lnmod:arg`` in scientific notation."""
    if a.is_zero:
        return "-inf:0.00000000000000000e+00"
    return f"{a.lnmod:.17e}:{a.arg:.17e}"


def lc_parse(text: str) -> LogComplex:
    lnmod, arg = text.strip().split(":")
    lnmod = float(lnmod)
    if lnmod == -math.inf:
        return ZERO
    return LogComplex(lnmod, float(arg))


class TrackedArg:
    """Continuous argument along a path of nonzero points.

    Successive points must differ in argument by less than pi; the caller
    is responsible for stepping finely enough (pi/4 is the safe budget).
    """

    def __init__(self, start: float):
        self.value = float(start)

    def update(self, z: complex) -> float:
        ph = cmath.phase(z)
        self.value += reduce_arg(ph - self.value)
        return self.value
