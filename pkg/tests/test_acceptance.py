"""Acceptance criteria 1-12 on the reference configuration.

Run with pytest (one test per criterion) or directly with
``python tests/test_acceptance.py`` for the bare PASS/FAIL listing.
"""
import sys

import pytest

from bakernewton import verify as vf

CRITERIA = {
    1: lambda ctx: vf.check_h_identity(),
    2: lambda ctx: vf.check_h_sign_law(),
    3: lambda ctx: vf.check_product_regimes(ctx["ev"]),
    4: lambda ctx: vf.check_indicator_convergence(ctx["ev"]),
    5: lambda ctx: vf.check_tail_bound(ctx["ev"]),
    6: lambda ctx: vf.check_certificate(ctx["chain"]),
    7: lambda ctx: vf.check_symmetries(ctx["chain"]),
    8: lambda ctx: vf.check_f_asymptotics(ctx["chain"], ctx["bounds"]),
    9: lambda ctx: vf.check_derivative(ctx["chain"], ctx["bounds"]),
    10: lambda ctx: vf.check_newton_residual(ctx["chain"], ctx["bounds"]),
    11: lambda ctx: vf.check_invariance_and_growth(ctx["chain"], ctx["bounds"]),
    12: lambda ctx: vf.check_render(ctx["chain"], ctx["bounds"]),
}


def report(num: int, check: vf.Check) -> str:
    head, *rest = check.line().splitlines()
    return "\n".join([f"criterion {num:2d}: {head}"] + rest)


@pytest.fixture(scope="module")
def ctx(ev, cal):
    return {"ev": ev, "chain": cal.chain, "bounds": cal.bounds}


@pytest.mark.parametrize("num", sorted(CRITERIA))
def test_criterion(num, ctx, capsys):
    check = CRITERIA[num](ctx)
    with capsys.disabled():
        print("\n" + report(num, check))
    assert check.passed, report(num, check)


def main() -> int:
    from bakernewton.config import RunConfig
    from bakernewton.pipeline import calibrate_from, make_evaluator
    cfg = RunConfig()
    ev = make_evaluator(cfg)
    cal = calibrate_from(cfg, ev)
    ctx = {"ev": ev, "chain": cal.chain, "bounds": cal.bounds}
    failed = 0
    for num in sorted(CRITERIA):
        check = CRITERIA[num](ctx)
        print(report(num, check), flush=True)
        failed += not check.passed
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
