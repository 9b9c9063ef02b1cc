import numpy as np
import pytest

from cotangent_kahler.base_geometry import CotangentPoint
from cotangent_kahler.connection_curvature import (
    assemble_curvature,
    commutator_curvature,
    connection_checks,
    curvature_blocks,
    curvature_oracle_residual,
    holomorphic_sectional,
    nabla_curvature,
    nabla_k_norm,
    qps_discrepancy,
    qps_explicit,
    qps_generic,
    ricci_closed_qq,
    ricci_j_invariance,
    ricci_trace,
    second_bianchi_residual,
)
from cotangent_kahler.lift_structures import Exponential, Polynomial, j_matrix, point_data

from conftest import einstein_family, generic_family, random_points

PT = CotangentPoint([0.25, -0.4, 0.6], [0.9, -1.1, 0.35])


@pytest.mark.parametrize("kw", [{}, {"mu_offset": 0.8}, {"A": 2.5}])
def test_generic_connection_is_levi_civita(kw):
    r = connection_checks(generic_family(**kw), PT)
    assert max(r) < 1e-12


def test_perturbed_connection_is_caught():
    r = connection_checks(generic_family(), PT, perturb_s=np.full((3, 3, 3), 0.02))
    assert r.nabla_g > 1e-3 and r.koszul > 1e-3


def test_explicit_P_matches_and_Q_S_need_repairs():
    fam = generic_family()
    g, e = qps_generic(fam, PT), qps_explicit(fam, PT)
    assert np.max(np.abs(g.P - e.P)) < 1e-12
    assert np.max(np.abs(g.S - e.S)) > 1e-2
    assert qps_discrepancy(fam, PT) > 1e-2


@pytest.mark.parametrize("lam", [Polynomial((1.0,)), Polynomial((1.0, 0.3, 0.05)),
                                 Exponential(1.0, 0.2)])
def test_repaired_explicit_matches_generic(lam):
    fam = generic_family(lam=lam)
    for pt in random_points(3, 5, 17):
        assert qps_discrepancy(fam, pt, corrected=True) < 1e-11


def test_constant_lambda_leaves_only_the_S_sign():
    fam = generic_family(lam=Polynomial((1.0,)))
    g, e = qps_generic(fam, PT), qps_explicit(fam, PT)
    assert np.max(np.abs(g.Q - e.Q)) < 1e-12
    assert np.max(np.abs(g.S - e.S)) > 1e-2


@pytest.mark.parametrize("kw", [{}, {"mu_offset": 0.5}])
def test_curvature_blocks_match_commutator(kw):
    assert curvature_oracle_residual(generic_family(**kw), PT) < 1e-11


def test_curvature_symmetries():
    fam = generic_family()
    K = assemble_curvature(curvature_blocks(fam, PT))
    d = point_data(fam, PT.x, PT.p)
    G = np.block([[d.G1, np.zeros((3, 3))], [np.zeros((3, 3)), d.G2]])
    low = np.einsum("abce,ed->abcd", K, G)       # G(K(e_a, e_b) e_c, e_d)
    assert np.max(np.abs(low + np.einsum("abcd->bacd", low))) < 1e-11
    assert np.max(np.abs(low + np.einsum("abcd->abdc", low))) < 1e-11
    assert np.max(np.abs(low - np.einsum("abcd->cdab", low))) < 1e-11
    first_bianchi = K + np.einsum("abcd->bcad", K) + np.einsum("abcd->cabd", K)
    assert np.max(np.abs(first_bianchi)) < 1e-11


def test_ricci_properties_and_closed_form():
    fam = generic_family()
    ric = ricci_trace(fam, PT)
    assert np.max(np.abs(ric.ric_qq - ric.ric_qq.T)) < 1e-12
    assert ric.mixed < 1e-12
    assert ricci_j_invariance(fam, PT, ric) < 1e-11
    rc = ricci_closed_qq(fam, PT, ric)
    assert rc.traced_g_coeff == pytest.approx(rc.g_coeff, rel=1e-11)
    assert rc.traced_vertical_g_coeff == pytest.approx(rc.vertical_g_coeff, rel=1e-11)


def test_ricci_flat_configuration_is_flat():
    fam, _ = einstein_family("ricci_flat")
    for pt in random_points(2, 3, 8):
        K = assemble_curvature(curvature_blocks(fam, pt))
        assert np.max(np.abs(K)) < 1e-12
        assert np.max(np.abs(commutator_curvature(fam, pt))) < 1e-12


def test_holomorphic_sectional_invariances():
    fam, _ = einstein_family("n3_linear")
    rng = np.random.default_rng(3)
    K = assemble_curvature(curvature_blocks(fam, PT))
    m = j_matrix(point_data(fam, PT.x, PT.p))
    values = []
    for _ in range(6):
        X = rng.normal(size=6)
        h = holomorphic_sectional(fam, PT, X, K)
        values.append(h)
        assert holomorphic_sectional(fam, PT, -3.0 * X, K) == pytest.approx(h, rel=1e-10)
        assert holomorphic_sectional(fam, PT, m @ X, K) == pytest.approx(h, rel=1e-10)
    assert max(values) - min(values) > 1e-3
    with pytest.raises(ValueError):
        holomorphic_sectional(fam, PT, np.zeros(6), K)


def test_nabla_k_and_bianchi():
    fam, _ = einstein_family("n3_const")
    nk = nabla_curvature(fam, PT)
    assert nabla_k_norm(fam, PT, nk) > 1e-2
    assert second_bianchi_residual(nk) < 1e-10
