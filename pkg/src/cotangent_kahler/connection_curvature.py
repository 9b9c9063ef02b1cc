"""Levi-Civita connection of G, its curvature, Ricci tensor and derivatives.

Connection on the adapted frame::

    nabla_{d^i} d^j       = Q[i,j,h] d^h
    nabla_{delta_i} d^j   = -Gamma^j_ih d^h + P[h,j,i] delta_h
    nabla_{d^i} delta_j   = P[h,i,j] delta_h
    nabla_{delta_i} delta_j = Gamma^h_ij delta_h + S[h,i,j] d^h

Curvature blocks keep the index order of their symbols (upper indices as
written, then lower), e.g. ``QQP[k,i,j,h]`` is QQP^k_ijh.  The full adapted
tensor ``K[a,b,c,d]`` is the d-th component of K(e_a, e_b) e_c with
``K(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import dual
from .base_geometry import adapted_frame, eval_metric
from .lift_structures import (
    DecompositionError,
    adapted_brackets,
    check_domain,
    decompose_m_tensor,
    energy_density,
    g_matrix,
    j_matrix,
    point_data,
)


class ConnectionCoefficients(NamedTuple):
    Q: np.ndarray   # Q^{ij}_h  -> Q[i, j, h]
    P: np.ndarray   # P^{hi}_j  -> P[h, i, j]
    S: np.ndarray   # S_{hij}   -> S[h, i, j]


class CurvatureBlocks(NamedTuple):
    QQQ: np.ndarray
    QQP: np.ndarray
    PPQ: np.ndarray
    PPP: np.ndarray
    PQQ: np.ndarray
    PQP: np.ndarray


class RicciBlocks(NamedTuple):
    ric_qq: np.ndarray
    ric_pp: np.ndarray
    mixed: float = 0.0


def _split(z, n):
    return z[:n], z[n:]


# -- connection coefficients -------------------------------------------------

def _qps_generic(family, x, p):
    """Q, P, S from vertical derivatives of the metric blocks."""
    d = point_data(family, x, p)
    def blocks(q):
        e = point_data(family, x, q)
        return e.G1, e.G2

    dG1, dG2 = dual.jacobian(blocks, p)
    # dG1[i, j, k] = d G1_ij / d p_k, likewise dG2
    Q = 0.5 * np.einsum("hk,ijk->ijh", d.H2,
                        np.einsum("jki->ijk", dG2) + np.einsum("ikj->ijk", dG2) - dG2)
    P = 0.5 * np.einsum("hk,jki->hij", d.H1, dG1) \
        - 0.5 * np.einsum("hk,il,ljk->hij", d.H1, d.G2, d.r0)
    S = -0.5 * np.einsum("hk,ijk->hij", d.H2, dG1) + 0.5 * d.r0
    return ConnectionCoefficients(Q, P, S)


def _qps_explicit(family, x, p, corrected=False):
    """Closed-form Q, P, S for a constant curvature base and mu = lambda'.

    With ``corrected=False`` the printed closed forms are evaluated as they
    stand.  Against the Levi-Civita connection they carry three slips: the
    t-group of the Q^{ij}_h numerator has b1' lambda lambda' where
    b1^2 lambda lambda' belongs, its t^{3/2} group lacks +2 sqrt(2c) lambda
    lambda'' b1, and the g_ij p_h term of S has the wrong sign.
    ``corrected=True`` applies those three repairs.
    """
    md = eval_metric(family.model, x)
    c = family.c
    g, gi = md.g, md.g_inv
    g0 = np.einsum("hi,h->i", gi, p)
    t = 0.5 * np.einsum("i,i->", g0, p)
    lam = family.lam(t)
    l1 = family.dlam(t)
    l2 = family.lam.derivative(2)(t)
    b = family.b1(t)
    b1p = dual.derivative(family.b1, t)
    sc, s2, s2c = np.sqrt(c), np.sqrt(2.0), np.sqrt(2.0 * c)
    rt = np.sqrt(t)
    t32 = t * rt
    L = lam + 2 * t * l1
    eye = np.eye(family.n)

    q1 = (sc - s2 * rt * b) / (4 * sc * t)
    q2 = (lam - 2 * t * l1) / (4 * t * lam)
    tq = b * b if corrected else b1p
    q3 = ((lam * (b * b * lam + c * l1) - s2c * lam * (b1p * lam - b * l1) * rt
           + 2 * (tq * lam * l1 - 2 * c * l1 * l1 + c * lam * l2) * t
           - 2 * s2c * l1 * (lam * b1p + 2 * b * l1) * t32
           + (2 * s2c * lam * l2 * b * t32 if corrected else 0.0))
          / (4 * sc * t * lam * (sc + s2 * rt * b) * L))
    Q = (np.einsum("ij,h->ijh", gi, p) * q1
         - (np.einsum("ih,j->ijh", eye, g0) + np.einsum("jh,i->ijh", eye, g0)) * q2
         + np.einsum("i,j,h->ijh", g0, g0, p) * q3)

    p1 = ((-sc * lam + s2 * b * lam * rt + 2 * sc * l1 * t + 2 * s2 * b * l1 * t32)
          / (4 * sc * lam * t))
    p4 = ((lam * (-b * b * lam + c * l1) + s2c * b1p * lam * lam * rt
           - 2 * (2 * b * b * lam * l1 + 2 * c * l1 * l1 - c * lam * l2) * t
           + 2 * s2c * (b1p * lam * l1 - 3 * b * l1 * l1 + b * lam * l2) * t32
           - 4 * b * b * l1 * l1 * t * t)
          / (2 * s2c * lam * t * (s2c + 2 * b * rt) * L))
    P = (np.einsum("hi,j->hij", gi, p) * p1
         + np.einsum("ij,h->hij", eye, g0) / (4 * t)
         + np.einsum("hj,i->hij", eye, g0) * (L / (4 * t * lam))
         + np.einsum("h,i,j->hij", g0, g0, p) * p4)

    s1 = sc * (sc + s2 * rt * b) / 2
    if corrected:
        s1 = -s1
    s2_ = sc * (sc * lam - s2 * b * lam * rt - 2 * sc * l1 * t - 2 * s2 * b * l1 * t32) / (2 * lam)
    s3 = sc * (sc * lam + s2 * b * lam * rt + 2 * sc * l1 * t + 2 * s2 * b * l1 * t32) / (2 * lam)
    s4 = ((lam * (2 * b * b * lam + c * l1) + s2c * lam * (lam * b1p + 4 * l1 * b) * rt
           + 2 * (lam * lam * b * b1p + 5 * lam * l1 * b * b - 2 * c * l1 * l1
                  + c * lam * l2) * t
           + 2 * s2c * (lam * l1 * b1p - 2 * l1 * l1 * b + 2 * lam * l2 * b) * t32
           + 4 * lam * b * (l1 * b1p + l2 * b) * t * t)
          / (2 * lam * L))
    S = (np.einsum("ij,h->hij", g, p) * s1
         + np.einsum("hj,i->hij", g, p) * s2_
         - np.einsum("hi,j->hij", g, p) * s3
         - np.einsum("h,i,j->hij", p, p, p) * s4)
    return ConnectionCoefficients(Q, P, S)


def _domain(family, pt):
    check_domain(family, energy_density(family.model, pt))


def qps_generic(family, pt):
    _domain(family, pt)
    return _qps_generic(family, pt.x, pt.p)


def qps_explicit(family, pt, corrected=False):
    _domain(family, pt)
    return _qps_explicit(family, pt.x, pt.p, corrected)


def qps_discrepancy(family, pt, corrected=False):
    """max |explicit - generic| over Q, P, S."""
    e = qps_explicit(family, pt, corrected)
    g = _qps_generic(family, pt.x, pt.p)
    return float(max(np.max(np.abs(a - b)) for a, b in zip(e, g)))


_QPS = {
    "generic": _qps_generic,
    "explicit": _qps_explicit,
    "corrected": lambda family, x, p: _qps_explicit(family, x, p, True),
}


def connection_forms(family, x, p, qps=None, md=None):
    """omega[c, a, b]: nabla_{e_a} e_b = omega[c, a, b] e_c on the adapted frame."""
    n = family.n
    if md is None:
        md = eval_metric(family.model, x)
    if qps is None:
        qps = _qps_generic(family, x, p)
    Q, P, S = qps
    gam = md.gamma
    zero = np.zeros((n, n, n))
    # blocks indexed [c, a, b] with H = 0, V = 1
    hhh = gam                                   # nabla_{delta_a} delta_b, delta part
    vhh = S                                     # ... d part
    hhv = np.einsum("hji->hij", P)              # nabla_{delta_i} d^j, delta part: P[h,j,i]
    vhv = -np.einsum("jih->hij", gam)           # ... d part: -Gamma^j_ih
    hvh = P                                     # nabla_{d^i} delta_j, delta part
    vvv = np.einsum("ijh->hij", Q)              # nabla_{d^i} d^j, d part
    top = np.concatenate([np.concatenate([hhh, hhv], axis=2),
                          np.concatenate([hvh, zero], axis=2)], axis=1)
    bot = np.concatenate([np.concatenate([vhh, vhv], axis=2),
                          np.concatenate([zero, vvv], axis=2)], axis=1)
    return np.concatenate([top, bot], axis=0)


class ConnectionResiduals(NamedTuple):
    nabla_g: float
    torsion: float
    koszul: float


def _g_adapted(family, z):
    x, p = _split(z, family.n)
    return g_matrix(point_data(family, x, p))


def connection_checks(family, pt, qps="generic", perturb_s=None):
    """Residuals of nabla G = 0, T = 0 and the Koszul formula on the adapted frame.

    Frame derivatives of the G components are taken with dual numbers along
    the coordinate expressions of the adapted vectors; brackets are the
    adapted-frame structure constants.  ``perturb_s`` is added to S before the
    checks (to confirm the harness detects a wrong connection).
    """
    _domain(family, pt)
    z = pt.z
    md = eval_metric(family.model, pt.x)
    e, _ = adapted_frame(family.model, pt.x, pt.p, md)
    coeffs = _QPS[qps](family, pt.x, pt.p)
    if perturb_s is not None:
        coeffs = coeffs._replace(S=coeffs.S + perturb_s)
    w = connection_forms(family, pt.x, pt.p, coeffs, md)
    G = _g_adapted(family, z)
    dG = dual.jacobian(lambda y: _g_adapted(family, y), z)
    eG = np.einsum("bcm,ma->abc", dG, e)        # eG[a,b,c] = e_a(G_bc)
    C = adapted_brackets(md, pt.p)

    nabla_g = eG - np.einsum("dab,dc->abc", w, G) - np.einsum("dac,bd->abc", w, G)
    torsion = w - np.einsum("cba->cab", w) - C
    # 2 G(nabla_X Y, Z) = X G(Y,Z) + Y G(X,Z) - Z G(X,Y)
    #                     + G([X,Y],Z) - G([X,Z],Y) - G([Y,Z],X)
    lhs = 2 * np.einsum("dab,dc->abc", w, G)
    rhs = (eG + np.einsum("bac->abc", eG) - np.einsum("cab->abc", eG)
           + np.einsum("dab,dc->abc", C, G) - np.einsum("dac,db->abc", C, G)
           - np.einsum("dbc,da->abc", C, G))
    return ConnectionResiduals(float(np.max(np.abs(nabla_g))),
                               float(np.max(np.abs(torsion))),
                               float(np.max(np.abs(lhs - rhs))))


# -- curvature ----------------------------------------------------------------

def _blocks(family, x, p, qps="generic"):
    md = eval_metric(family.model, x)
    R = md.riemann
    r0 = np.einsum("hkij,h->kij", R, p)
    fn = _QPS[qps]
    Q, P, S = fn(family, x, p)
    dQ, dP, dS = dual.jacobian(lambda q: tuple(fn(family, x, q)), p)
    ein = np.einsum
    QQQ = (ein("hkij->hijk", R) - ein("hlk,lij->hijk", P, r0)
           + ein("hli,ljk->hijk", P, S) - ein("hlj,lik->hijk", P, S))
    QQP = (-ein("khij->kijh", R) - ein("lkh,lij->kijh", Q, r0)
           - ein("lki,hjl->kijh", P, S) + ein("lkj,hil->kijh", P, S))
    PPQ = (ein("hjki->ijhk", dP) - ein("hikj->ijhk", dP)
           + ein("hil,ljk->ijhk", P, P) - ein("hjl,lik->ijhk", P, P))
    PPP = (ein("jkhi->ijkh", dQ) - ein("ikhj->ijkh", dQ)
           + ein("jkl,ilh->ijkh", Q, Q) - ein("ikl,jlh->ijkh", Q, Q))
    PQQ = (ein("hjki->ijkh", dS) + ein("ilh,ljk->ijkh", Q, S)
           - ein("lik,hjl->ijkh", P, S))
    PQP = (ein("hkji->ikhj", dP) + ein("hil,lkj->ikhj", P, P)
           - ein("hlj,ikl->ikhj", P, Q))
    return CurvatureBlocks(QQQ, QQP, PPQ, PPP, PQQ, PQP)


def curvature_blocks(family, pt, qps="generic"):
    _domain(family, pt)
    return _blocks(family, pt.x, pt.p, qps)


def assemble_curvature(b):
    """Full adapted tensor K[a,b,c,d] from the six blocks."""
    n = b.QQQ.shape[0]
    ein = np.einsum
    zero = np.zeros((n,) * 4)
    # slot pattern (a, b, c, d) with 0 = horizontal, 1 = vertical
    parts = {
        (0, 0, 0, 0): ein("hijk->ijkh", b.QQQ),
        (0, 0, 1, 1): ein("kijh->ijkh", b.QQP),
        (1, 1, 0, 0): ein("ijhk->ijkh", b.PPQ),
        (1, 1, 1, 1): b.PPP,
        (1, 0, 0, 1): b.PQQ,
        (1, 0, 1, 0): ein("ikhj->ijkh", b.PQP),
    }
    parts[(0, 1, 0, 1)] = -ein("ijkh->jikh", parts[(1, 0, 0, 1)])
    parts[(0, 1, 1, 0)] = -ein("ijkh->jikh", parts[(1, 0, 1, 0)])

    def block(a, b_, c):
        return np.concatenate([parts.get((a, b_, c, 0), zero),
                               parts.get((a, b_, c, 1), zero)], axis=3)

    def row(a, b_):
        return np.concatenate([block(a, b_, 0), block(a, b_, 1)], axis=2)

    def plane(a):
        return np.concatenate([row(a, 0), row(a, 1)], axis=1)

    return np.concatenate([plane(0), plane(1)], axis=0)


def _g_coordinate(family, z):
    x, p = _split(z, family.n)
    d = point_data(family, x, p)
    _, e_inv = adapted_frame(family.model, x, p, d.md)
    return e_inv.T @ g_matrix(d) @ e_inv


def coordinate_christoffel(family, z):
    """Levi-Civita symbols of G in the (q, p) coordinate frame: Gt[a, b, c] = Gamma^a_bc."""
    G = _g_coordinate(family, z)
    dG = dual.jacobian(lambda y: _g_coordinate(family, y), z)
    Gi = dual.inv(G)
    return 0.5 * np.einsum("ad,dbc->abc", Gi,
                           np.einsum("dcb->dbc", dG) + dG - np.einsum("bcd->dbc", dG))


def commutator_curvature(family, pt):
    """K[a,b,c,d] on the adapted frame from second derivatives of the coordinate metric."""
    z = pt.z
    gt = coordinate_christoffel(family, z)
    dgt = dual.jacobian(lambda y: coordinate_christoffel(family, y), z)   # [a,b,c,m]
    ein = np.einsum
    # Kc[a,b,c,d]: component a of K(d_c, d_d) d_b
    kc = (ein("adbc->abcd", dgt) - ein("acbd->abcd", dgt)
          + ein("ace,edb->abcd", gt, gt) - ein("ade,ecb->abcd", gt, gt))
    e, e_inv = adapted_frame(family.model, pt.x, pt.p)
    return ein("dD,DCAB,Aa,Bb,Cc->abcd", e_inv, kc, e, e, e)


def curvature_oracle_residual(family, pt, qps="generic"):
    """max |blocks - commutator curvature| over all adapted components."""
    _domain(family, pt)
    K = assemble_curvature(_blocks(family, pt.x, pt.p, qps))
    return float(np.max(np.abs(K - commutator_curvature(family, pt))))


def ricci_trace(family, pt, qps="generic", blocks=None):
    """Ricci blocks by the block trace formulas; ``mixed`` is max |Ric(d^i, delta_j)|."""
    if blocks is None:
        blocks = curvature_blocks(family, pt, qps)
    ric_qq = np.einsum("hhjk->jk", blocks.QQQ) + np.einsum("hjkh->jk", blocks.PQQ)
    ric_pp = np.einsum("hjkh->jk", blocks.PPP) - np.einsum("jkhh->jk", blocks.PQP)
    K = assemble_curvature(blocks)
    n = family.n
    ric = np.einsum("abca->bc", K)
    mixed = float(max(np.max(np.abs(ric[:n, n:])), np.max(np.abs(ric[n:, :n]))))
    return RicciBlocks(ric_qq, ric_pp, mixed)


def coefficient_a(family, t):
    """Closed-form g-coefficient numerator of the horizontal Ricci block."""
    n, c = family.n, family.c
    lam = family.lam(t)
    l1 = family.dlam(t)
    l2 = family.lam.derivative(2)(t)
    b = family.b1(t)
    b1p = dual.derivative(family.b1, t)
    rt = np.sqrt(t)
    s2c = np.sqrt(2 * c)
    return (c * lam ** 2 * (n - 2) - 8 * c * lam * l1 * t
            - 4 * c * (n - 1) * l1 ** 2 * t ** 2 - 4 * c * lam * l2 * t ** 2
            - s2c * rt * ((n + 1) * lam ** 2 + 2 * lam * l1 * (2 * n + 3) * t
                          + 4 * l1 ** 2 * (n - 1) * t ** 2 + 4 * lam * l2 * t ** 2) * b
            - 2 * s2c * lam * t * rt * (lam + 2 * t * l1) * b1p)


class RicciClosed(NamedTuple):
    a: float
    g_coeff: float          # a / (2 lambda (lambda + 2t lambda'))
    pp_coeff: float         # p (x) p coefficient extracted from the traced Ricci
    traced_g_coeff: float   # g coefficient extracted from the traced Ricci
    vertical_g_coeff: float         # a / (4 c t lambda (lambda + 2t lambda'))
    traced_vertical_g_coeff: float


def ricci_closed_qq(family, pt, ricci=None):
    t = energy_density(family.model, pt)
    lam, l1 = family.lam(t), family.dlam(t)
    a = float(coefficient_a(family, t))
    L = lam + 2 * t * l1
    if ricci is None:
        ricci = ricci_trace(family, pt)
    u, v = decompose_m_tensor(family.model, pt, ricci.ric_qq, "lower", tol=1e-6)
    uu, _ = decompose_m_tensor(family.model, pt, ricci.ric_pp, "upper", tol=1e-6)
    return RicciClosed(a, a / (2 * lam * L), v, u,
                       a / (4 * family.c * t * lam * L), uu)


def ricci_j_invariance(family, pt, ricci=None):
    """max |Ric(JX, JY) - Ric(X, Y)| over the adapted basis."""
    if ricci is None:
        ricci = ricci_trace(family, pt)
    n = family.n
    ric = np.zeros((2 * n, 2 * n))
    ric[:n, :n] = ricci.ric_qq
    ric[n:, n:] = ricci.ric_pp
    m = j_matrix(point_data(family, pt.x, pt.p))
    return float(np.max(np.abs(m.T @ ric @ m - ric)))


# -- holomorphic sectional curvature ------------------------------------------

def holomorphic_sectional(family, pt, X, curvature=None):
    """H(X) = G(K(X, JX) JX, X) / G(X, X)^2 for an adapted vector X = (h, v)."""
    X = np.asarray(X, dtype=float)
    if not np.any(X != 0):
        raise ValueError("holomorphic sectional curvature needs a nonzero vector")
    d = point_data(family, pt.x, pt.p)
    m, gm = j_matrix(d), g_matrix(d)
    if curvature is None:
        curvature = assemble_curvature(curvature_blocks(family, pt))
    jx = m @ X
    kx = np.einsum("abcd,a,b,c->d", curvature, X, jx, jx)
    return float(kx @ gm @ X / (X @ gm @ X) ** 2)


# -- covariant derivative of curvature ------------------------------------------

def _curvature_z(family, z):
    x, p = _split(z, family.n)
    return assemble_curvature(_blocks(family, x, p))


def nabla_curvature(family, pt):
    """NK[m,a,b,c,d]: d-component of (nabla_{e_m} K)(e_a, e_b) e_c."""
    _domain(family, pt)
    z = pt.z
    md = eval_metric(family.model, pt.x)
    e, _ = adapted_frame(family.model, pt.x, pt.p, md)
    K = _curvature_z(family, z)
    dK = dual.jacobian(lambda y: _curvature_z(family, y), z)
    eK = np.einsum("abcdk,km->mabcd", dK, e)
    w = connection_forms(family, pt.x, pt.p, md=md)
    ein = np.einsum
    return (eK + ein("dmf,abcf->mabcd", w, K) - ein("fma,fbcd->mabcd", w, K)
            - ein("fmb,afcd->mabcd", w, K) - ein("fmc,abfd->mabcd", w, K))


def nabla_k_norm(family, pt, nk=None):
    if nk is None:
        nk = nabla_curvature(family, pt)
    return float(np.max(np.abs(nk)))


def second_bianchi_residual(nk):
    """max |(nabla_m K)(a,b) + (nabla_a K)(b,m) + (nabla_b K)(m,a)|."""
    cyc = nk + np.einsum("mabcd->bmacd", nk) + np.einsum("mabcd->abmcd", nk)
    return float(np.max(np.abs(cyc)))


__all__ = [
    "ConnectionCoefficients", "CurvatureBlocks", "RicciBlocks", "RicciClosed",
    "DecompositionError", "assemble_curvature", "coefficient_a",
    "commutator_curvature", "connection_checks", "connection_forms",
    "curvature_blocks", "curvature_oracle_residual", "holomorphic_sectional",
    "nabla_curvature", "nabla_k_norm", "qps_discrepancy", "qps_explicit",
    "qps_generic",
    "ricci_closed_qq", "ricci_j_invariance", "ricci_trace",
    "second_bianchi_residual",
]
