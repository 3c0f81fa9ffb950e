import numpy as np
import pytest

from skewfatou.dynamics import build_escape_region, certify_subhyperbolic
from skewfatou.linearization import detect_branch, detect_order_k
from skewfatou.poly import SkewProduct

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def record():
    def _record(n, ok, detail=""):
        ACCEPTANCE[n] = (bool(ok), detail)
        return ok

    return _record


class Resonant:
    """``(z^2 - 2 + w, w/4)``: critical point 0 lands on the fixed point 2
    with multiplier 4, so ``mu * lam = 1``."""

    def __init__(self):
        self.F = SkewProduct.parse("z^2-2+w", "1/4")
        self.p = self.F.p
        self.cert = certify_subhyperbolic(self.p)
        self.region = build_escape_region(self.p, self.cert, self.F)
        br = detect_branch(self.F, self.cert, 0, eps=0.1)
        self.branch = br.with_k(detect_order_k(br, self.F))
        self.w0 = 0.05 + 0.05j


@pytest.fixture(scope="session")
def resonant():
    return Resonant()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
