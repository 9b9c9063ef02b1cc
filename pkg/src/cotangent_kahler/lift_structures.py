"""Diagonal-type lifts (J, G) to the nonzero cotangent bundle.

Everything is evaluated in the adapted frame ``(delta_1..delta_n, d^1..d^n)``
where ``delta_i = d/dq^i + Gamma^0_ih d/dp_h`` and ``d^i = d/dp_i``.  Block
matrices on this frame use the ordering horizontal first, vertical second:

* ``J = [[0, -J2], [J1, 0]]``   (columns are images of basis vectors)
* ``G = [[G1, 0], [0, G2]]``

All point functions are written with numpy operations and accept dual-number
coordinates, which is how the coordinate-frame cross-checks differentiate them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import dual
from .base_geometry import (
    BaseModel,
    CotangentPoint,
    DomainError,
    adapted_frame,
    contracted,
    eval_metric,
)


class ParameterDomainError(DomainError):
    """A parameter condition fails at some energy density ``t``."""

    def __init__(self, quantity, t, condition, value=None):
        self.quantity = quantity
        self.t = float(t)
        self.condition = condition
        self.value = value
        msg = f"{quantity} violates {condition} at t={self.t:.6g}"
        if value is not None:
            msg += f" (value {float(value):.6g})"
        super().__init__(msg)


B1_BOUND = "b1 > -A/(2 sqrt(t))"
METRIC_POSITIVITY = "c1 > 0, c2 > 0, c1 + 2t d1 > 0, c2 + 2t d2 > 0"
KAHLER_POSITIVITY = "lambda > 0, lambda + 2t mu > 0"


# -- scalar families of the energy density ---------------------------------

@dataclass(frozen=True)
class Polynomial:
    """sum_k coeffs[k] t^k."""

    coeffs: tuple

    def __call__(self, t):
        out = 0.0 * t + self.coeffs[-1]
        for k in reversed(self.coeffs[:-1]):
            out = out * t + k
        return out

    def derivative(self, order=1):
        coeffs = list(self.coeffs)
        for _ in range(order):
            coeffs = [k * i for i, k in enumerate(coeffs)][1:] or [0.0]
        return Polynomial(tuple(float(k) for k in coeffs))

    def describe(self):
        return {"kind": "polynomial", "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class Exponential:
    """scale * exp(rate t)."""

    scale: float
    rate: float

    def __call__(self, t):
        return np.exp(t * self.rate) * self.scale

    def derivative(self, order=1):
        return Exponential(self.scale * self.rate ** order, self.rate)

    def describe(self):
        return {"kind": "exponential", "scale": self.scale, "rate": self.rate}


@dataclass(frozen=True)
class Power:
    """coef * t^exponent (closed-form b1 source)."""

    coef: float
    exponent: float

    def __call__(self, t):
        if self.exponent == 0:
            return 0.0 * t + self.coef
        return t ** self.exponent * self.coef

    def derivative(self, order=1):
        coef, e = self.coef, self.exponent
        for _ in range(order):
            coef, e = coef * e, e - 1
        return Power(coef, e)

    def describe(self):
        return {"kind": "power", "coef": self.coef, "exponent": self.exponent}


@dataclass(frozen=True)
class ParameterFamily:
    """The parameters (A, b1, lambda, mu) of a diagonal-type structure.

    ``mu`` defaults to lambda' (the Kahler choice); ``mu_offset`` shifts it to
    lambda' + offset, and an explicit ``mu`` callable overrides both.  ``A``
    defaults to sqrt(2c), the only value giving an integrable J.
    """

    model: BaseModel
    lam: object
    b1: object
    mu: object = None
    mu_offset: float = 0.0
    A: float = None
    dlam: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.A is None:
            object.__setattr__(self, "A", float(np.sqrt(2 * self.model.c)))
        if not self.A > 0:
            raise DomainError(f"A must be positive, got {self.A}")
        object.__setattr__(self, "dlam", self.lam.derivative(1))

    @property
    def n(self):
        return self.model.n

    @property
    def c(self):
        return self.model.c

    @property
    def kahler(self):
        return self.mu is None and self.mu_offset == 0.0

    @property
    def integrable(self):
        return bool(np.isclose(self.A, np.sqrt(2 * self.c), rtol=1e-14, atol=0))

    def mu_at(self, t):
        if self.mu is not None:
            return self.mu(t)
        return self.dlam(t) + self.mu_offset


@dataclass(frozen=True)
class LiftScalars:
    """Coefficient functions of the lifts at one energy density."""

    t: object
    a1: object
    a2: object
    b1: object
    b2: object
    lam: object
    mu: object
    c1: object
    c2: object
    d1: object
    d2: object


def lift_scalars(family, t, perturb=None):
    """a1, a2, b2 from A and b1; c1, c2, d1, d2 from lambda and mu.

    ``perturb`` maps coefficient names to additive shifts applied after the
    coefficients are computed (used to break identities on purpose).
    """
    A = family.A
    st = np.sqrt(t)
    a1 = st * A
    a2 = 1.0 / (st * A)
    b1 = family.b1(t)
    b2 = -b1 / (t * A * (A + 2 * st * b1))
    lam = family.lam(t)
    mu = family.mu_at(t)
    s = LiftScalars(t=t, a1=a1, a2=a2, b1=b1, b2=b2, lam=lam, mu=mu,
                    c1=lam * a1, c2=lam * a2, d1=None, d2=None)
    if perturb:
        s = replace(s, **{k: getattr(s, k) + v for k, v in perturb.items()
                          if k in ("a1", "a2", "b1", "b2", "lam", "mu")})
    # c1 + 2t d1 = (lam + 2t mu)(a1 + 2t b1), same for the vertical block
    d1 = s.lam * s.b1 + s.mu * (s.a1 + 2 * t * s.b1)
    d2 = s.lam * s.b2 + s.mu * (s.a2 + 2 * t * s.b2)
    s = replace(s, c1=s.lam * s.a1, c2=s.lam * s.a2, d1=d1, d2=d2)
    if perturb:
        s = replace(s, **{k: getattr(s, k) + v for k, v in perturb.items()
                          if k in ("c1", "c2", "d1", "d2")})
    return s


def check_domain(family, t):
    """Raise :class:`ParameterDomainError` if any parameter condition fails at ``t``."""
    t = float(dual.value(t))
    s = lift_scalars(family, t)
    bound = family.A + 2 * np.sqrt(t) * s.b1
    if not (np.isfinite(s.b1) and bound > 0):
        raise ParameterDomainError("b1", t, B1_BOUND, s.b1)
    if not s.lam > 0:
        raise ParameterDomainError("lambda", t, KAHLER_POSITIVITY, s.lam)
    if not s.lam + 2 * t * s.mu > 0:
        raise ParameterDomainError("lambda + 2t mu", t, KAHLER_POSITIVITY,
                                   s.lam + 2 * t * s.mu)
    for name, val in (("c1", s.c1), ("c2", s.c2), ("c1 + 2t d1", s.c1 + 2 * t * s.d1),
                      ("c2 + 2t d2", s.c2 + 2 * t * s.d2)):
        if not val > 0:
            raise ParameterDomainError(name, t, METRIC_POSITIVITY, val)


def validate_range(family, t_values):
    """Check the parameter conditions on every ``t`` of a grid."""
    for t in t_values:
        check_domain(family, t)


# -- point evaluation -------------------------------------------------------

def energy_density(model, pt):
    md = eval_metric(model, pt.x)
    return float(0.5 * pt.p @ md.g_inv @ pt.p)


class PointData(NamedTuple):
    md: object
    g0: object
    gamma0: object
    r0: object
    t: object
    s: LiftScalars
    J1: object
    J2: object
    G1: object
    G2: object
    H1: object
    H2: object


def point_data(family, x, p, perturb=None):
    """All diagonal blocks at (x, p); generic in dual-number inputs."""
    md = eval_metric(family.model, x)
    g0, gamma0, r0 = contracted(md, p)
    t = 0.5 * np.einsum("i,i->", g0, p)
    s = lift_scalars(family, t, perturb)
    pp = np.einsum("i,j->ij", p, p)
    gg = np.einsum("i,j->ij", g0, g0)
    J1 = md.g * s.a1 + pp * s.b1
    J2 = md.g_inv * s.a2 + gg * s.b2
    G1 = md.g * s.c1 + pp * s.d1
    G2 = md.g_inv * s.c2 + gg * s.d2
    H1 = md.g_inv / s.c1 - gg * (s.d1 / (s.c1 * (s.c1 + 2 * t * s.d1)))
    H2 = md.g / s.c2 - pp * (s.d2 / (s.c2 * (s.c2 + 2 * t * s.d2)))
    return PointData(md, g0, gamma0, r0, t, s, J1, J2, G1, G2, H1, H2)


def _checked(family, pt, perturb=None):
    d = point_data(family, pt.x, pt.p, perturb)
    if perturb is None:
        check_domain(family, d.t)
    return d


def j_matrix(d):
    zero = np.zeros(np.shape(d.J1))
    return np.block([[zero, -d.J2], [d.J1, zero]])


def g_matrix(d):
    zero = np.zeros(np.shape(d.G1))
    return np.block([[d.G1, zero], [zero, d.G2]])


def j_blocks(family, pt):
    d = _checked(family, pt)
    return d.J1, d.J2


def g_blocks(family, pt):
    d = _checked(family, pt)
    return d.G1, d.G2, d.H1, d.H2


def almost_complex_residual(family, t, b2_shift=0.0):
    """max(|a1 a2 - 1|, |(a1 + 2t b1)(a2 + 2t b2) - 1|)."""
    s = lift_scalars(family, t)
    b2 = s.b2 + b2_shift
    return float(max(abs(s.a1 * s.a2 - 1),
                     abs((s.a1 + 2 * t * s.b1) * (s.a2 + 2 * t * b2) - 1)))


def j_squared_residual(family, pt):
    """max |J^2 + I| over the 2n adapted basis vectors."""
    m = j_matrix(_checked(family, pt))
    return float(np.max(np.abs(m @ m + np.eye(len(m)))))


def inverse_residual(family, pt):
    """max of |G1 H1 - I| and |G2 H2 - I|."""
    G1, G2, H1, H2 = g_blocks(family, pt)
    eye = np.eye(len(G1))
    return float(max(np.max(np.abs(G1 @ H1 - eye)), np.max(np.abs(G2 @ H2 - eye))))


def hermitian_residual(family, pt, perturb=None):
    """max over basis pairs of |G(JX, JY) - G(X, Y)|."""
    d = _checked(family, pt, perturb)
    m, gm = j_matrix(d), g_matrix(d)
    return float(np.max(np.abs(m.T @ gm @ m - gm)))


# -- Nijenhuis tensor --------------------------------------------------------

class NijenhuisComponents(NamedTuple):
    """N(delta_i, delta_j) = hh[i,j,k] d^k, N(delta_i, d^j) = hv[i,j,k] delta_k,
    N(d^i, d^j) = vv[i,j,k] d^k.  ``other`` is the largest component outside
    these slots (zero by type)."""

    hh: np.ndarray
    hv: np.ndarray
    vv: np.ndarray
    other: float = 0.0

    def max_abs(self):
        return float(max(np.max(np.abs(self.hh)), np.max(np.abs(self.hv)),
                         np.max(np.abs(self.vv)), self.other))

    def distance(self, other):
        return float(max(np.max(np.abs(self.hh - other.hh)),
                         np.max(np.abs(self.hv - other.hv)),
                         np.max(np.abs(self.vv - other.vv)),
                         abs(self.other - other.other)))


def nijenhuis_formula(family, pt):
    """Closed-form Nijenhuis components in the adapted frame."""
    d = _checked(family, pt)
    half_a2 = family.A ** 2 / 2
    # W_kij = {(A^2/2)(delta^h_i g_jk - delta^h_j g_ik) - R^h_kij} p_h
    w = (half_a2 * (np.einsum("i,jk->kij", pt.p, d.md.g)
                    - np.einsum("j,ik->kij", pt.p, d.md.g)) - d.r0)
    hh = np.einsum("kij->ijk", w)
    hv = np.einsum("kl,jr,lir->ijk", d.J2, d.J2, w)
    vv = np.einsum("ir,jl,klr->ijk", d.J2, d.J2, w)
    return NijenhuisComponents(hh, hv, vv)


def _split_z(z, n):
    return z[:n], z[n:]


def coordinate_j(family, z):
    """Components J^a_b of J in the coordinate frame (d/dq, d/dp)."""
    x, p = _split_z(z, family.n)
    d = point_data(family, x, p)
    e, e_inv = adapted_frame(family.model, x, p, d.md)
    return e @ j_matrix(d) @ e_inv


def nijenhuis_numeric(family, pt):
    """N from its bracket definition, with dual-number derivatives of J."""
    check_domain(family, energy_density(family.model, pt))
    n = family.n
    z = pt.z
    jc = coordinate_j(family, z)
    dj = dual.jacobian(lambda y: coordinate_j(family, y), z)   # dj[a, b, m] = d_m J^a_b
    # N^a_bc for N(d_b, d_c) = [Jd_b, Jd_c] - J[Jd_b, d_c] - J[d_b, Jd_c] - [d_b, d_c]
    nc = (np.einsum("db,acd->abc", jc, dj) - np.einsum("dc,abd->abc", jc, dj)
          + np.einsum("ad,dbc->abc", jc, dj) - np.einsum("ad,dcb->abc", jc, dj))
    e, e_inv = adapted_frame(family.model, pt.x, pt.p)
    na = np.einsum("ae,efg,fb,gc->abc", e_inv, nc, e, e)   # na[a,b,c]: comp a of N(e_b, e_c)
    hh = np.einsum("kij->ijk", na[n:, :n, :n])
    hv = np.einsum("kij->ijk", na[:n, :n, n:])
    vv = np.einsum("kij->ijk", na[n:, n:, n:])
    mask = np.ones(na.shape, dtype=bool)
    mask[n:, :n, :n] = mask[:n, :n, n:] = mask[n:, n:, n:] = False
    mask[:n, n:, :n] = False   # N(d^i, delta_j) = -N(delta_j, d^i)
    other = float(np.max(np.abs(na[mask])))
    return NijenhuisComponents(hh, hv, vv, other)


def nijenhuis_antisymmetry(family, pt):
    """max |N(X, Y) + N(Y, X)| of the numeric tensor over the adapted basis."""
    z = pt.z
    jc = coordinate_j(family, z)
    dj = dual.jacobian(lambda y: coordinate_j(family, y), z)
    nc = (np.einsum("db,acd->abc", jc, dj) - np.einsum("dc,abd->abc", jc, dj)
          + np.einsum("ad,dbc->abc", jc, dj) - np.einsum("ad,dcb->abc", jc, dj))
    return float(np.max(np.abs(nc + np.einsum("abc->acb", nc))))


# -- fundamental 2-form -------------------------------------------------------

def fundamental_form(family, pt):
    """phi(d^i, delta_j) = lambda delta^i_j + mu g^{0i} p_j."""
    d = _checked(family, pt)
    return np.eye(family.n) * d.s.lam + np.einsum("i,j->ij", d.g0, pt.p) * d.s.mu


def phi_matrix(d):
    """phi(e_a, e_b) = G(e_a, J e_b) on the adapted frame."""
    return g_matrix(d) @ j_matrix(d)


def fundamental_form_residual(family, pt):
    """Compare the closed form of phi with G(X, JY), including the zero blocks."""
    n = family.n
    d = _checked(family, pt)
    phi = phi_matrix(d)
    mixed = fundamental_form(family, pt)
    res = max(np.max(np.abs(phi[n:, :n] - mixed)),
              np.max(np.abs(phi[:n, n:] + mixed.T)),
              np.max(np.abs(phi[:n, :n])), np.max(np.abs(phi[n:, n:])))
    return float(res)


def adapted_brackets(md, p):
    """Structure constants C[c, a, b]: [e_a, e_b] = C[c, a, b] e_c."""
    n = len(p)
    _, _, r0 = contracted(md, p)
    C = np.zeros((2 * n,) * 3)
    C[n:, :n, :n] = r0                                 # [delta_i, delta_j] = R^0_kij d^k
    C[n:, n:, :n] = np.einsum("ijk->kij", md.gamma)    # [d^i, delta_j] = Gamma^i_jk d^k
    C[n:, :n, n:] = -np.einsum("ijk->kji", md.gamma)
    return C


def _antisymmetrize3(T):
    out = np.zeros_like(T)
    for perm in itertools.permutations(range(3)):
        sign = np.linalg.det(np.eye(3)[list(perm)])
        out = out + sign * np.transpose(T, perm)
    return out


def dphi_closed_form(family, pt):
    """(1/2)(lambda' - mu) g^{0h} Dp_h ^ Dp_i ^ dq^i on adapted-frame triples.

    The wedge product is evaluated with the determinant convention, the same
    one under which phi(d^i, delta_j) equals the coefficient of Dp_i ^ dq^j.
    """
    n = family.n
    d = point_data(family, pt.x, pt.p)
    t = d.t
    coef = 0.5 * (family.dlam(t) - d.s.mu)
    alpha = np.concatenate([np.zeros(n), d.g0])
    pairing = np.zeros((2 * n, 2 * n))
    pairing[n:, :n] = np.eye(n)       # sum_i Dp_i (x) dq^i
    T = np.einsum("a,bc->abc", alpha, pairing)
    return coef * _antisymmetrize3(T)


class DphiResult(NamedTuple):
    numeric: float          # max |d phi| over adapted triples (adapted-frame path)
    closed_form: float      # max |closed-form 3-form| over the same triples
    mismatch: float         # max |numeric - closed form| componentwise
    frame_mismatch: float   # max |adapted path - coordinate path|
    ratio: float            # least-squares ratio numeric / closed form (nan if zero)


def _phi_adapted(family, z):
    x, p = _split_z(z, family.n)
    return phi_matrix(point_data(family, x, p))


def _phi_coordinate(family, z):
    x, p = _split_z(z, family.n)
    d = point_data(family, x, p)
    _, e_inv = adapted_frame(family.model, x, p, d.md)
    return e_inv.T @ phi_matrix(d) @ e_inv


def dphi_tensors(family, pt):
    """d phi on adapted triples by two routes: frame calculus and coordinates."""
    z = pt.z
    md = eval_metric(family.model, pt.x)
    e, _ = adapted_frame(family.model, pt.x, pt.p, md)

    # adapted route: d phi(X,Y,Z) = X phi(Y,Z) - Y phi(X,Z) + Z phi(X,Y)
    #                 - phi([X,Y],Z) + phi([X,Z],Y) - phi([Y,Z],X)
    phi = _phi_adapted(family, z)
    dphi_z = dual.jacobian(lambda y: _phi_adapted(family, y), z)
    e_phi = np.einsum("bcm,ma->abc", dphi_z, e)         # e_phi[a,b,c] = e_a(phi_bc)
    C = adapted_brackets(md, pt.p)
    adapted = (e_phi - np.einsum("bac->abc", e_phi) + np.einsum("cab->abc", e_phi)
               - np.einsum("dab,dc->abc", C, phi) + np.einsum("dac,db->abc", C, phi)
               - np.einsum("dbc,da->abc", C, phi))

    # coordinate route: (d phi)_abc = d_a phi_bc + d_b phi_ca + d_c phi_ab
    dpc = dual.jacobian(lambda y: _phi_coordinate(family, y), z)   # dpc[b,c,a] = d_a phi_bc
    coord = (np.einsum("bca->abc", dpc) + np.einsum("cab->abc", dpc)
             + np.einsum("abc->abc", dpc))
    coord_adapted = np.einsum("def,da,eb,fc->abc", coord, e, e, e)
    return adapted, coord_adapted


def dphi_residual(family, pt):
    check_domain(family, energy_density(family.model, pt))
    adapted, coord = dphi_tensors(family, pt)
    closed = dphi_closed_form(family, pt)
    denom = float(np.sum(closed * closed))
    ratio = float(np.sum(adapted * closed) / denom) if denom > 0 else float("nan")
    return DphiResult(numeric=float(np.max(np.abs(adapted))),
                      closed_form=float(np.max(np.abs(closed))),
                      mismatch=float(np.max(np.abs(adapted - closed))),
                      frame_mismatch=float(np.max(np.abs(adapted - coord))),
                      ratio=ratio)


# -- M-tensor decomposition ---------------------------------------------------

class DecompositionError(ValueError):
    """The tensor is not of the form u g + v p (x) p (or its duals)."""


def decompose_m_tensor(model, pt, T, mode="lower", tol=1e-8):
    """Recover (u, v) from T = u g + v p(x)p by transvection.

    ``mode`` selects the tensor type: ``lower`` for u g_ij + v p_i p_j,
    ``upper`` for u g^ij + v g^{0i} g^{0j}, ``mixed`` for u delta^i_j + v g^{0i} p_j.
    Raises :class:`DecompositionError` when the reconstruction misses T by more
    than ``tol`` relative to the size of T.
    """
    T = np.asarray(T, dtype=float)
    md = eval_metric(model, pt.x)
    p = pt.p
    g0 = md.g_inv @ p
    n = model.n
    t = 0.5 * float(p @ g0)
    if mode == "lower":
        base, rank1 = md.g, np.outer(p, p)
        r_tr = np.einsum("ij,ij->", md.g_inv, T)
        r_pp = g0 @ T @ g0
    elif mode == "upper":
        base, rank1 = md.g_inv, np.outer(g0, g0)
        r_tr = np.einsum("ij,ij->", md.g, T)
        r_pp = p @ T @ p
    elif mode == "mixed":
        base, rank1 = np.eye(n), np.outer(g0, p)
        r_tr = np.trace(T)
        r_pp = p @ T @ g0
    else:
        raise ValueError(f"unknown mode {mode!r}")
    system = np.array([[n, 2 * t], [2 * t, 4 * t * t]])
    if abs(np.linalg.det(system)) <= 1e-300:
        raise ArithmeticError("singular transvection system")
    u, v = np.linalg.solve(system, [r_tr, r_pp])
    resid = float(np.max(np.abs(u * base + v * rank1 - T)))
    scale = max(float(np.max(np.abs(T))), 1.0)
    if resid > tol * scale:
        raise DecompositionError(
            f"tensor is not of the form u g + v p(x)p (residual {resid:.3g})")
    return float(u), float(v)
