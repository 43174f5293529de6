import csv
import math

import numpy as np
import pytest

from bakernewton.chain import f_detail
from bakernewton.dynamics import (ClassifyLimits, Kind, StepRegime, check_invariance, classify,
                                  find_zero, newton_step, orbit, region_u, sample_u,
                                  spiral_offset, write_orbit_csv)
from bakernewton.geometry import spiral_point
from bakernewton.logspace import LogComplex, lc_to_cartesian

XI_SEED = complex(spiral_point(20.0, 0.9064720283654387)) * 1.25


@pytest.fixture(scope="module")
def xi(chain):
    return find_zero(chain, XI_SEED)


@pytest.fixture(scope="module")
def limits(bounds):
    return ClassifyLimits.defaults(bounds)


def test_origin_is_fixed(chain, bounds):
    z, regime, _ = newton_step(chain, bounds, 0j)
    assert z.is_zero
    assert classify(chain, bounds, 0j, ClassifyLimits.defaults(bounds)).kind is Kind.CONVERGED


def test_zero_is_fixed(chain, bounds, xi, limits):
    assert abs(math.exp(f_detail(chain, xi).value.lnmod)) < 1e-8 * abs(xi)
    nxt, _, _ = newton_step(chain, bounds, xi)
    assert abs(lc_to_cartesian(nxt) - xi) < 1e-10 * abs(xi)
    cl = classify(chain, bounds, xi, limits)
    assert cl.kind is Kind.CONVERGED and cl.k == 0
    assert abs(cl.root - xi) < 1e-9 * abs(xi)


def test_asymptotic_step_is_exact(chain, bounds):
    p = chain.params
    lr = math.log(10 * bounds.r_n_cut)
    z = LogComplex(lr, p.c * lr + 0.5 * p.theta3)
    nxt, regime, _ = newton_step(chain, bounds, z)
    assert regime is StepRegime.ASYMPTOTIC_NEWTON
    assert nxt.lnmod == lr + math.log(p.p)
    assert math.cos(nxt.arg - z.arg - math.pi) == pytest.approx(1.0, abs=1e-15)


def test_full_chain_step_close_to_minus_p_z(chain, bounds):
    z = complex(spiral_point(0.5 * (bounds.r1 + bounds.r_n_cut), chain.params.c))
    nxt, regime, res = newton_step(chain, bounds, z, mode="precise")
    assert regime is StepRegime.FULL_CHAIN
    assert abs(lc_to_cartesian(nxt) + chain.params.p * z) <= res * (1 + 1e-9) + 1e-9 * abs(z)


def test_orbit_in_u(chain, bounds, tmp_path):
    seed = complex(spiral_point(2 * bounds.r1, chain.params.c))
    rec = orbit(chain, bounds, seed, 12)
    assert not rec.stop.startswith("error")
    lr = rec.log_radii()
    growth = np.diff(lr)
    assert np.all(growth > math.log(chain.params.p) - 0.05)
    offs = [abs(spiral_offset(s.z, chain.params.c)) for s in rec.steps]
    assert max(offs) < chain.params.theta3
    assert offs[-1] <= offs[0] + 1e-12
    assert rec.switch_radius is not None
    write_orbit_csv(rec, tmp_path / "o.csv", chain.params.c)
    rows = list(csv.reader(open(tmp_path / "o.csv")))
    assert rows[0] == ["k", "log_radius", "theta", "regime", "residual"]
    assert len(rows) == len(rec.steps) + 2
    assert float(rows[1][1]) == rec.steps[0].z.lnmod


def test_deep_u_escapes(chain, bounds, limits):
    seed = complex(spiral_point(3 * bounds.r1, chain.params.c))
    cl = classify(chain, bounds, seed, limits)
    assert cl.kind is Kind.ESCAPING and cl.k <= 4


def test_samples_lie_in_u(chain, bounds):
    u = region_u(chain, bounds)
    lr, th = sample_u(chain, bounds, 200, 3, 100 * bounds.r1)
    assert lr.min() > np.log(bounds.r1) and lr.max() <= np.log(100 * bounds.r1)
    for a, b in zip(lr, th):
        assert u.contains_spiral(float(a), float(b))


def test_invariance_other_seed(chain, bounds):
    rep = check_invariance(chain, bounds, samples=300, rng_seed=7,
                           r_test_max=1e3 * bounds.r1, outside_probes=10)
    assert rep.passed, rep.summary()
    assert rep.min_ratio >= chain.params.p * (1 - 1e-3)
