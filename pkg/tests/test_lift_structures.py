import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotangent_kahler.base_geometry import BaseModel, CotangentPoint, eval_metric
from cotangent_kahler.lift_structures import (
    DecompositionError,
    Exponential,
    ParameterDomainError,
    ParameterFamily,
    Polynomial,
    Power,
    almost_complex_residual,
    check_domain,
    decompose_m_tensor,
    dphi_residual,
    energy_density,
    fundamental_form_residual,
    hermitian_residual,
    inverse_residual,
    j_blocks,
    j_squared_residual,
    nijenhuis_antisymmetry,
    nijenhuis_formula,
    nijenhuis_numeric,
)

from conftest import generic_family, random_points

PT = CotangentPoint([0.25, -0.4, 0.6], [0.9, -1.1, 0.35])


def test_energy_density_oracle():
    # g^11 = 1/f^2 = 9/4 at x = (1, 0), c = 2, so t = 9/8
    assert energy_density(BaseModel(2, 2.0), CotangentPoint([1.0, 0.0], [1.0, 0.0])) == pytest.approx(1.125)


def test_j_blocks_oracle():
    # c = 2, x = 0, p = e1: t = 1/2, A = 2, a1 = sqrt(2), b1 = 1
    fam = ParameterFamily(BaseModel(2, 2.0), Polynomial((1.0,)), Power(1.0, 0.0))
    J1, J2 = j_blocks(fam, CotangentPoint([0.0, 0.0], [1.0, 0.0]))
    a1 = np.sqrt(2.0)
    np.testing.assert_allclose(J1, [[a1 + 1, 0], [0, a1]], rtol=1e-15)
    # a2 = 1/sqrt(2), b2 = -1 / (t A (A + 2 sqrt(t))) = -1 / (2 + sqrt(2))
    np.testing.assert_allclose(J2, [[1 / a1 - 1 / (2 + a1), 0], [0, 1 / a1]], rtol=1e-14)


def test_polynomial_and_power_derivatives():
    p = Polynomial((1.0, 0.1, 0.05))
    assert p(2.0) == pytest.approx(1.4)
    assert p.derivative(1)(2.0) == pytest.approx(0.3)
    assert p.derivative(2)(2.0) == pytest.approx(0.1)
    assert p.derivative(3)(2.0) == 0.0
    assert Power(2.0, -1.5).derivative(1)(4.0) == pytest.approx(-3.0 * 4.0 ** -2.5)
    assert Exponential(1.0, 0.2).derivative(2)(1.0) == pytest.approx(0.04 * np.exp(0.2))


@pytest.mark.parametrize("A_scale", [1.0, 1.5, 0.6])
def test_almost_complex_for_any_A(A_scale):
    fam = generic_family(A=A_scale * np.sqrt(2 * 1.3))
    for pt in random_points(3, 10, 5):
        assert j_squared_residual(fam, pt) < 1e-12
        assert almost_complex_residual(fam, energy_density(fam.model, pt)) < 1e-13


def test_broken_b2_is_detected():
    fam = generic_family()
    assert almost_complex_residual(fam, 1.0, b2_shift=1e-3) > 1e-5


def test_inverse_blocks():
    assert inverse_residual(generic_family(), PT) < 1e-12


def test_nijenhuis_integrable_and_not():
    fam = generic_family()
    assert nijenhuis_formula(fam, PT).max_abs() < 1e-12
    assert nijenhuis_numeric(fam, PT).max_abs() < 1e-12
    bad = generic_family(A=1.5 * np.sqrt(2 * 1.3))
    nf, nn = nijenhuis_formula(bad, PT), nijenhuis_numeric(bad, PT)
    assert nf.max_abs() > 1e-2
    assert nf.distance(nn) < 1e-12
    assert nn.other < 1e-12
    assert nijenhuis_antisymmetry(bad, PT) < 1e-12


def test_hermitian_and_perturbation():
    fam = generic_family()
    assert hermitian_residual(fam, PT) < 1e-12
    assert hermitian_residual(fam, PT, perturb={"d1": 0.05}) > 1e-3


def test_fundamental_form():
    assert fundamental_form_residual(generic_family(), PT) < 1e-12
    assert fundamental_form_residual(generic_family(mu_offset=0.7), PT) < 1e-12


def test_dphi_vanishes_for_kahler():
    r = dphi_residual(generic_family(), PT)
    assert r.numeric < 1e-12
    assert r.frame_mismatch < 1e-12


def test_dphi_is_twice_the_printed_coefficient():
    # the numeric 3-form is (lambda' - mu) times the wedge, not (1/2)(lambda' - mu)
    for offset in (1.0, -0.3):
        r = dphi_residual(generic_family(mu_offset=offset), PT)
        assert r.frame_mismatch < 1e-12
        assert r.numeric > 1e-3
        assert r.ratio == pytest.approx(2.0, rel=1e-12)
        assert r.mismatch == pytest.approx(r.closed_form, rel=1e-12)


def test_domain_errors_report_t():
    fam = ParameterFamily(BaseModel(2, 2.0), Polynomial((1.0,)), Power(-10.0, -1.5))
    with pytest.raises(ParameterDomainError) as info:
        check_domain(fam, 0.5)
    assert info.value.t == 0.5
    assert "b1" in str(info.value)
    neg = ParameterFamily(BaseModel(2, 2.0), Polynomial((1.0, -1.0)), Power(0.0, 0.0))
    with pytest.raises(ParameterDomainError):
        check_domain(neg, 2.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 10_000), st.sampled_from(["lower", "upper", "mixed"]))
def test_decomposition_round_trip(u, v, seed, mode):
    rng = np.random.default_rng(seed)
    model = BaseModel(3, 1.1)
    pt = CotangentPoint(rng.uniform(-1, 1, 3), rng.uniform(0.3, 1.5, 3))
    md = eval_metric(model, pt.x)
    g0 = md.g_inv @ pt.p
    T = {"lower": u * md.g + v * np.outer(pt.p, pt.p),
         "upper": u * md.g_inv + v * np.outer(g0, g0),
         "mixed": u * np.eye(3) + v * np.outer(g0, pt.p)}[mode]
    uu, vv = decompose_m_tensor(model, pt, T, mode)
    assert uu == pytest.approx(u, abs=1e-10)
    assert vv == pytest.approx(v, abs=1e-10)


def test_decomposition_rejects_other_tensors():
    with pytest.raises(DecompositionError):
        decompose_m_tensor(BaseModel(3, 1.0), PT, np.diag([1.0, 2.0, 3.0]))
