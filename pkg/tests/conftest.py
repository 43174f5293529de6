import pytest

from bakernewton.config import RunConfig
from bakernewton.params import derive_params
from bakernewton.pipeline import calibrate_from, make_evaluator


@pytest.fixture(scope="session")
def ref_cfg():
    return RunConfig()


@pytest.fixture(scope="session")
def ref_params(ref_cfg):
    return derive_params(ref_cfg.rho, ref_cfg.margin, ref_cfg.delta)


@pytest.fixture(scope="session")
def ev(ref_cfg, ref_params):
    return make_evaluator(ref_cfg, ref_params)


@pytest.fixture(scope="session")
def cal(ref_cfg, ev):
    """Calibrated reference chain (about ten seconds, built once)."""
    return calibrate_from(ref_cfg, ev)


@pytest.fixture(scope="session")
def chain(cal):
    return cal.chain


@pytest.fixture(scope="session")
def bounds(cal):
    return cal.bounds
