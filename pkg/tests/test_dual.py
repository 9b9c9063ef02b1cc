import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotangent_kahler import dual


def test_scalar_derivatives_match_closed_forms():
    t = 0.7
    assert dual.derivative(lambda s: np.sqrt(s) * np.exp(2 * s), t) == pytest.approx(
        np.exp(2 * t) * (0.5 / np.sqrt(t) + 2 * np.sqrt(t)), rel=1e-14)
    assert dual.derivative(lambda s: np.log(s) / s, t) == pytest.approx((1 - np.log(t)) / t ** 2, rel=1e-14)
    assert dual.derivative(lambda s: s ** 2.5, t) == pytest.approx(2.5 * t ** 1.5, rel=1e-14)


def test_taylor_of_power():
    vals = dual.taylor(lambda s: s ** -1.5, 2.0, 3)
    want = [2 ** -1.5, -1.5 * 2 ** -2.5, 3.75 * 2 ** -3.5, -13.125 * 2 ** -4.5]
    np.testing.assert_allclose([float(v) for v in vals], want, rtol=1e-14)


def test_nested_perturbations_do_not_mix():
    # d/dx [x * d/dy (x + y)] = 1; perturbation confusion would give 2
    out = dual.derivative(lambda x: x * dual.derivative(lambda y: x + y, 1.0), 1.0)
    assert float(out) == 1.0


def test_jacobian_of_matrix_function():
    def f(z):
        m = np.einsum("i,j->ij", z, z)
        return dual.inv(m + np.eye(2))

    z = np.array([0.3, -0.4])
    jac = dual.jacobian(f, z)
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (f(z + e) - f(z - e)) / (2 * h)
        np.testing.assert_allclose(jac[..., k], fd, atol=1e-8)


def test_jacobian_of_tuple_output():
    z = np.array([1.0, 2.0])
    a, b = dual.jacobian(lambda v: (v * v, np.stack([v[0] * v[1]])), z)
    np.testing.assert_allclose(a, np.diag(2 * z))
    np.testing.assert_allclose(b, [[2.0, 1.0]])


def test_value_strips_nesting():
    inner = dual.Dual(1, 3.0, 1.0)
    outer = dual.Dual(2, inner, 0.0)
    assert dual.value(outer) == 3.0
    assert outer > 2.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(-2.0, 2.0))
def test_second_derivative_of_product(t, k):
    f = lambda s: np.exp(k * s) * s ** 3
    d2 = dual.taylor(f, t, 2)[2]
    want = np.exp(k * t) * (k * k * t ** 3 + 6 * k * t ** 2 + 6 * t)
    assert float(d2) == pytest.approx(want, rel=1e-12, abs=1e-12)
