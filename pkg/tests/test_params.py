import math

import mpmath as mp
import numpy as np
import pytest

from bakernewton import params as pm
from bakernewton.errors import DomainError, NoAdmissibleP


def mp_mu(rho, p):
    c = mp.pi / mp.log(p)
    return mp.mpf(rho) / (1 + c * c)


def scan_p(rho, margin, p_max=1000):
    """Extended-precision linear scan for the smallest admissible p."""
    with mp.workdps(40):
        for p in range(24, p_max + 1):
            mu = mp_mu(rho, p)
            if mu > mp.mpf(1) / 2 and mu >= mp.mpf(1) / 2 + mp.mpf(margin):
                return p
    return None


def mp_h(prm, theta):
    with mp.workdps(40):
        rho, c, d = mp.mpf(prm.rho), mp.pi / mp.log(prm.p), mp.mpf(prm.delta)
        e = mp.exp(1j * rho * mp.mpf(theta) / (1 + 1j * c))
        den = 1 - mp.exp(2j * mp.pi * rho / (1 + 1j * c))
        return -2 * mp.pi * d * mp.re(1j * e / den)


@pytest.mark.parametrize("rho,margin", [(0.99, 0.0), (0.95, 0.02), (0.8, 0.0), (0.97, 0.05)])
def test_derive_matches_scan(rho, margin):
    prm = pm.derive_params(rho, margin, 1.0, 1000)
    assert prm.p == scan_p(rho, margin)
    assert prm.q == prm.p + 1
    assert prm.c == pytest.approx(math.pi / math.log(prm.p), rel=1e-15)
    assert prm.check() == []


def test_reference_p():
    assert pm.derive_params(0.99, 0.0, 1.0, 1000).p == 24
    prm = pm.derive_params(0.95, 0.02, 1.0, 1000)
    assert prm.p == 32


def test_no_admissible_p():
    with pytest.raises(NoAdmissibleP):
        pm.derive_params(0.51, 0.1, 1.0, 1000)


@pytest.mark.parametrize("rho", [0.5, 1.0, 1.2])
def test_rho_domain(rho):
    with pytest.raises(DomainError):
        pm.derive_params(rho)


def test_h_at_against_mpmath():
    prm = pm.derive_params(0.95, 0.02)
    for th in [1e-8, 1e-3, 0.3, 1.0, 3.0, 5.5, 2 * math.pi - 1e-6]:
        assert pm.h_at(prm, th) == pytest.approx(float(mp_h(prm, th)), rel=1e-12, abs=1e-15)


def test_h0_closed_form_against_mpmath_limit():
    rng = np.random.default_rng(5)
    for _ in range(20):
        rho = float(rng.uniform(0.6, 0.99))
        prm = pm.ConstructionParams.from_p(rho, 1.0, pm.smallest_p(rho) + int(rng.integers(0, 50)))
        ref = float(mp_h(prm, mp.mpf("1e-30")))
        assert pm.h0_closed_form(prm) == pytest.approx(ref, rel=1e-12)


def test_h_linear_in_delta():
    a = pm.ConstructionParams.from_p(0.95, 1.0, 32)
    b = pm.ConstructionParams.from_p(0.95, 2.0, 32)
    th = np.linspace(0.01, 6.2, 50)
    assert np.allclose(pm.h_at(b, th), 2 * pm.h_at(a, th), rtol=1e-14)
    assert pm.h0_closed_form(b) == pytest.approx(2 * pm.h0_closed_form(a), rel=1e-14)


def test_h_domain():
    prm = pm.derive_params(0.95, 0.02)
    for bad in (0.0, 2 * math.pi, -1.0):
        with pytest.raises(DomainError):
            pm.h_at(prm, bad)
    with pytest.raises(DomainError):
        pm.h_signed(prm, 0.1)


def test_one_sided_limits_agree():
    from bakernewton.verify import h_limit
    prm = pm.derive_params(0.95, 0.02)
    assert abs(h_limit(prm, 1) - h_limit(prm, -1)) < 1e-10


def test_h_has_positive_values():
    prm = pm.derive_params(0.95, 0.02)
    th = np.linspace(1e-4, 2 * math.pi - 1e-4, 10_000)
    assert np.max(pm.h_at(prm, th)) > 0


def test_theta_window_dense_grid():
    prm = pm.derive_params(0.95, 0.02)
    tol = 1e-10
    th0, capped = pm.find_theta_window(prm, tol)
    assert not capped
    assert th0 == pytest.approx(prm.theta0, abs=2 * tol)
    grid = np.linspace(1e-9, 0.05, 1_000_000)
    hp, hm = pm.h_at(prm, grid), pm.h_signed(prm, -grid)
    hits = np.concatenate([grid[hp >= 0][:1], grid[hm >= 0][:1]])
    first = hits.min()
    assert abs(first - th0) < 2 * (grid[1] - grid[0])
    inside = grid[grid <= th0 - tol]
    assert np.all(pm.h_at(prm, inside) < 0) and np.all(pm.h_signed(prm, -inside) < 0)
    th0b, _ = pm.find_theta_window(prm, tol / 10)
    assert abs(th0b - th0) <= 10 * tol


def test_select_angles():
    prm = pm.derive_params(0.95, 0.02)
    t1, t2, t3 = pm.select_angles(prm, (0.9, 0.6, 0.3))
    assert 0 < t3 < t2 < t1 < prm.theta0
    with pytest.raises(DomainError):
        pm.select_angles(prm, (0.5, 0.5, 0.2))


def test_reference_angles():
    prm = pm.derive_params(0.95, 0.02)
    assert prm.theta1 == pytest.approx(0.8 * prm.theta0)
    assert prm.theta3 == pytest.approx(0.25 * prm.theta0)
    assert pm.h_at(prm, 1e-6) < 0
