import cmath
import math

import mpmath as mp
import numpy as np
import pytest

from bakernewton.errors import BoundOnlyContext, PreconditionError
from bakernewton.logspace import LogComplex
from bakernewton.product import (Regime, log_derivative, log_pi, log_pi_direct,
                                 max_log_modulus, tail_bound)


def mp_partial(ev, w, K):
    p = ev.params
    with mp.workdps(30):
        c = mp.pi / mp.log(p.q - 1)
        s = mp.mpc(0)
        for k in range(ev.seq.k_min, K + 1):
            r = (mp.mpf(k) / p.delta) ** (1 / mp.mpf(p.rho))
            s += mp.log(1 - mp.mpc(w) / (r * mp.exp(1j * c * mp.log(r))))
        return complex(s)


@pytest.mark.parametrize("w", [0.3 + 0.1j, -2.5 + 1j, 7j])
def test_direct_partial_sum_mpmath(ev, w):
    K = 60
    res = log_pi_direct(ev, w, K)
    ref = mp_partial(ev, w, K)
    assert res.value.lnmod == pytest.approx(ref.real, abs=1e-12)
    assert cmath.exp(1j * (res.value.arg - ref.imag)) == pytest.approx(1, abs=1e-12)


def test_tail_bound_holds_brute(ev):
    w, K = 1.5 - 0.5j, 40
    bound = tail_bound(ev, abs(w), K)
    tail = mp_partial(ev, w, 4000) - mp_partial(ev, w, K)
    assert abs(tail) <= bound
    with pytest.raises(PreconditionError):
        tail_bound(ev, 1e9, 10)


@pytest.mark.parametrize("w", [5 + 5j, -40 + 3j, 300j, 1.2e3 - 7e2j])
def test_direct_and_hybrid_agree(ev, w):
    d = log_pi(ev, w, force=Regime.DIRECT)
    h = log_pi(ev, w, force=Regime.HYBRID)
    assert d.regime is Regime.DIRECT and h.regime is Regime.HYBRID
    assert abs(d.lnmod - h.lnmod) <= 1e-8 * max(1.0, abs(d.lnmod))


def test_zero_and_origin(ev):
    assert log_pi(ev, 0).value == LogComplex(0.0, 0.0)
    a5 = complex(ev.seq.zero(5))
    assert log_pi(ev, a5).lnmod < -30
    assert max_log_modulus(ev, 0.0) == 0.0


def test_max_modulus_monotone(ev):
    vals = [max_log_modulus(ev, r) for r in (1, 10, 100, 1e3, 1e4)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_log_derivative_direct_sum(ev):
    # Pi'/Pi(0) = -sum 1/a_k; compare with a centred difference of log Pi
    w, h = 2 + 1j, 1e-5
    fd = (log_pi(ev, w + h).value.lnmod - log_pi(ev, w - h).value.lnmod) / (2 * h)
    assert log_derivative(ev, w).real == pytest.approx(fd, rel=1e-6)


def test_log_derivative_cauchy(ev):
    w, rad, m = 30 - 20j, 0.05, 64
    zs = w + rad * np.exp(2j * np.pi * np.arange(m) / m)
    lv = np.array([complex(log_pi(ev, z).lnmod, 0) for z in zs])
    ref = 2 * np.mean(lv * np.exp(-2j * np.pi * np.arange(m) / m)) / rad
    assert abs(log_derivative(ev, w) - ref) <= 1e-8 * abs(ref)


def test_asymptotic_regimes(ev):
    p = ev.params
    lr = math.log(1e12)
    on = LogComplex(lr, p.c * lr)
    r = log_pi(ev, on)
    assert r.regime is Regime.UPPER_BOUND_ONLY
    with pytest.raises(BoundOnlyContext):
        log_pi(ev, on, require_value=True)
    off = log_pi(ev, LogComplex(lr, p.c * lr + 1.0))
    assert off.regime is Regime.ASYMPTOTIC_VALUE


def test_not_conjugation_symmetric(ev):
    w = 50 + 20j
    assert abs(log_pi(ev, w).lnmod - log_pi(ev, w.conjugate()).lnmod) > 1e-3
