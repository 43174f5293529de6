import cmath
import math

import numpy as np
import pytest

from bakernewton.chain import (BOUND_FIELDS, _h_straight, f, f_detail, f_prime, g2, h_parts, load_chain, serialize_chain)
from bakernewton.errors import ConfigError, PreconditionError
from bakernewton.geometry import sigma, spiral_point
from bakernewton.logspace import lc_to_cartesian


def test_reference_chain(chain):
    assert chain.params.p == 32 and chain.q == 33
    assert chain.n >= 1 and chain.t0 > 1
    assert chain.a_err < 1e-8 * math.exp(chain.a.lnmod)


def test_bounds_ordering(bounds):
    assert all(v > 0 for v in bounds.etas.values())
    assert bounds.r1 > bounds.r0 > 1
    assert bounds.r_lo < bounds.r_hi


def test_origin_values(chain):
    assert g2(chain, 0).is_zero
    assert f(chain, 0).is_zero


def test_straight_and_valley_agree(chain):
    z = complex(spiral_point(1.5 * chain.r_valley, chain.params.c)) * cmath.exp(0.01j)
    a = h_parts(chain, z, "precise")
    assert a.method == "valley"
    b = _h_straight(chain, z, 1e-12)
    assert abs(cmath.exp(a.log_H - b) - 1) <= 1e-9


def test_fast_matches_precise(chain):
    for t in (200.0, 600.0, 2000.0):
        z = complex(spiral_point(t, chain.params.c)) * cmath.exp(0.3j / t)
        a = h_parts(chain, z, "precise")
        try:
            b = h_parts(chain, z, "fast")
        except PreconditionError:
            continue
        assert abs(cmath.exp(b.log_H - a.log_H) - 1) <= 1e-6


@pytest.mark.parametrize("t", [50.0, 200.0, 800.0])
def test_g2_reaches_a_along_sigma(chain, t):
    zeta = sigma(t, chain.t0, chain.params.c, chain.q)
    v = g2(chain, zeta)
    ratio = lc_to_cartesian(v) / lc_to_cartesian(chain.a)
    assert abs(ratio - 1) < 1e-3


def test_f_prime_matches_difference(chain):
    z = 3.0 + 2.0j
    h = 1e-6
    fd = (lc_to_cartesian(f(chain, z + h)) - lc_to_cartesian(f(chain, z - h))) / (2 * h)
    assert lc_to_cartesian(f_prime(chain, z)) == pytest.approx(fd, rel=1e-6)


def test_f_asymptotic_branch(chain, bounds):
    z = complex(spiral_point(2 * bounds.r_f_cut, chain.params.c))
    fv = f_detail(chain, z, bounds)
    assert fv.regime == "asymptotic"
    ref = f_detail(chain, z)
    assert abs(lc_to_cartesian(fv.value) / lc_to_cartesian(ref.value) - 1) < 1e-6


def test_serialization_roundtrip(chain, bounds, ev):
    text = serialize_chain(chain, bounds, "abc123")
    ch2, b2 = load_chain(text, ev, "abc123", chain.quad)
    assert ch2.t0 == chain.t0 and ch2.n == chain.n and ch2.a == chain.a
    assert all(getattr(b2, k) == getattr(bounds, k) for k in BOUND_FIELDS)
    z = 40 - 11j
    assert f(ch2, z) == f(chain, z)
    with pytest.raises(ConfigError):
        load_chain(text, ev, "other", chain.quad)
