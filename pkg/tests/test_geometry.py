import cmath
import math

import mpmath as mp
import numpy as np
import pytest

from bakernewton import geometry as gm
from bakernewton.errors import DomainError
from bakernewton.params import derive_params

PRM = derive_params(0.95, 0.02)


@pytest.fixture
def seq():
    return gm.ZeroSequence.for_params(PRM)


def test_first_zeros(seq):
    assert seq.zero(1) == pytest.approx(1.0)
    with mp.workdps(30):
        r2 = mp.mpf(2) ** (1 / mp.mpf(0.95))
        a2 = r2 * mp.exp(1j * mp.mpf(PRM.c) * mp.log(r2))
    assert seq.zero(2) == pytest.approx(complex(a2), rel=1e-14)


def test_count_n(seq):
    assert seq.count_n(0.5) == 0
    for k in (1, 2, 10, 977, 12345):
        rk = float(seq.radius(k))
        assert seq.count_n(rk) >= k - seq.k_min + 1
        assert seq.count_n(rk) - seq.count_n(rk * (1 - 1e-12)) == 1
    r = 1e6
    assert abs(seq.count_n(r) / (PRM.delta * r ** PRM.rho) - 1) < 0.01
    # direct count
    ks = np.arange(1, int(2 * r ** PRM.rho))
    assert seq.count_n(r) == int(np.sum(seq.radius(ks) <= r))


def test_spiral_path():
    t = np.array([1.0, 3.5, 1e3, 1e7])
    L = gm.L(t, PRM.c)
    assert np.allclose(np.abs(L), t, rtol=1e-14)
    off = gm.spiral_theta(L, PRM.c)
    assert np.all(np.abs(off) < 1e-9)
    with pytest.raises(DomainError):
        gm.L(0.5, PRM.c)


def test_sigma():
    t0 = 1.4887
    assert gm.sigma(0.0, t0, PRM.c, PRM.q) == 0
    s = gm.sigma(1e3, t0, PRM.c, PRM.q)
    # sigma^q lies back on the spiral up to z0, so its offset dies out
    w = s ** PRM.q + gm.spiral_point(t0, PRM.c)
    assert abs(gm.to_spiral_coords(w, PRM.c).theta) < 1e-9
    # derivative against a central difference
    h = 1e-5
    fd = (gm.sigma(2.0 + h, t0, PRM.c, PRM.q) - gm.sigma(2.0 - h, t0, PRM.c, PRM.q)) / (2 * h)
    assert gm.sigma_prime(2.0, t0, PRM.c, PRM.q) == pytest.approx(fd, rel=1e-8)


def test_spiral_coords_roundtrip():
    for z in (3 + 4j, -100 + 1j, 1e5j):
        sc = gm.to_spiral_coords(z, PRM.c)
        assert gm.from_spiral_coords(sc, PRM.c) == pytest.approx(z, rel=1e-13)
    with pytest.raises(DomainError):
        gm.to_spiral_coords(0, PRM.c)


def test_region_membership():
    reg = gm.SpiralRegion(100.0, 0.05, PRM.c, taper=True)
    plain = gm.SpiralRegion(100.0, 0.05, PRM.c)
    assert reg.contains(gm.spiral_point(200.0, PRM.c))
    z_edge = gm.from_spiral_coords(gm.SpiralCoords(500.0, 0.051), PRM.c)
    assert not plain.contains(z_edge)
    r = 101.0
    th = 0.05 - 0.5 / r
    z = gm.from_spiral_coords(gm.SpiralCoords(r, th), PRM.c)
    assert not reg.contains(z) and plain.contains(z)
    assert reg.contains_spiral(math.log(r), 0.0)
    assert not reg.contains_spiral(math.log(50.0), 0.0)
    with pytest.raises(DomainError):
        gm.SpiralRegion(10.0, 0.01, PRM.c, taper=True)


def test_spiral_coords_roundtrip_random():
    rng = np.random.default_rng(1)
    r = np.exp(rng.uniform(0, math.log(1e8), 100_000))
    th = rng.uniform(-math.pi, math.pi, r.size)
    worst = 0.0
    for ri, ti in zip(r, th):
        sc = gm.to_spiral_coords(gm.from_spiral_coords(gm.SpiralCoords(ri, ti), PRM.c), PRM.c)
        worst = max(worst, abs(sc.r / ri - 1), abs(sc.theta - ti) if abs(ti) < 3 else 0.0)
    assert worst <= 1e-12
