"""Newton maps with a spiralling invariant Baker domain, built from a
canonical product whose zeros lie on a logarithmic spiral."""

from .chain import CalibratedBounds, ChainConfig, build_chain, calibrate, f, f_prime
from .config import RunConfig, load_config
from .dynamics import ClassifyLimits, check_invariance, classify, newton_step, orbit
from .params import ConstructionParams, derive_params
from .product import ProductEvaluator, log_pi

__version__ = "0.1.0"
