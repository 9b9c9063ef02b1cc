import sys

import numpy as np
import pytest

from cotangent_kahler.base_geometry import BaseModel, CotangentPoint, eval_metric
from cotangent_kahler.einstein_solver import IntegralB1
from cotangent_kahler.lift_structures import ParameterFamily, Polynomial, Power

ONE = Polynomial((1.0,))

# (n, c, lambda, Ef, C) with b1 from the integral formula; all valid for every t > 0
EINSTEIN_CONFIGS = {
    "ricci_flat": (2, 2.0, ONE, 0.0, 0.0),
    "n3_const": (3, 2.0, ONE, 0.0, 0.5),
    "n3_linear": (3, 1.0, Polynomial((1.0, 0.1)), -0.2, 0.5),
}


def einstein_family(key):
    n, c, lam, Ef, C = EINSTEIN_CONFIGS[key]
    return ParameterFamily(BaseModel(n, c), lam, IntegralB1(n, c, Ef, lam, C)), Ef


def generic_family(n=3, c=1.3, **kw):
    lam = kw.pop("lam", Polynomial((1.0, 0.3, 0.05)))
    b1 = kw.pop("b1", Power(0.2, -0.5))
    return ParameterFamily(BaseModel(n, c), lam, b1, **kw)


def random_points(n, count, seed, x_radius=0.8, p_range=(0.3, 2.0)):
    rng = np.random.default_rng(seed)
    pts = []
    for _ in range(count):
        d = rng.normal(size=n)
        d *= rng.uniform(*p_range) / np.linalg.norm(d)
        pts.append(CotangentPoint(rng.uniform(-x_radius, x_radius, n), d))
    return pts


def point_with_t(model, x, direction, t):
    """Covector along ``direction`` at ``x`` with energy density exactly ``t``."""
    x = np.asarray(x, float)
    d = np.asarray(direction, float)
    gi = eval_metric(model, x).g_inv
    scale = np.sqrt(2 * t / (d @ gi @ d))
    return CotangentPoint(x, d * scale)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
