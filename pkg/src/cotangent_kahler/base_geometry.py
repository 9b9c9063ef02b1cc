"""Constant positive curvature base manifold in the conformal chart.

The round n-sphere of sectional curvature ``c`` minus one point is realised on
all of R^n by the metric ``g_ij = f(x)^2 delta_ij`` with
``f(x) = 1 / (1 + (c/4)|x|^2)``.  All quantities here are closed-form rational
functions of ``x`` and are written with plain numpy operations, so they accept
:class:`~cotangent_kahler.dual.Dual` coordinates as well as floats.

Index layout (upper indices first, then lower, in the order they are written):

* ``gamma[k, i, h]``        Christoffel symbol Gamma^k_ih
* ``dgamma[k, i, h, m]``    d Gamma^k_ih / d x^m
* ``riemann[h, k, i, j]``   R^h_kij with R(d_i, d_j) d_k = R^h_kij d_h
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Input lies outside the domain where the construction is defined."""


@dataclass(frozen=True)
class BaseModel:
    n: int
    c: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.n}")
        if not np.isfinite(self.c) or self.c <= 0:
            raise DomainError(f"sectional curvature must be positive, got {self.c}")


@dataclass(frozen=True)
class CotangentPoint:
    """Base chart coordinates ``x`` and a nonzero covector ``p`` at ``x``."""

    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if x.ndim != 1 or x.shape != p.shape:
            raise DomainError("x and p must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
            raise DomainError("non-finite coordinates")
        if not np.any(p != 0):
            raise DomainError("p = 0 lies on the zero section, which is excluded")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def z(self):
        """Point in the induced chart (q^1..q^n, p_1..p_n)."""
        return np.concatenate([self.x, self.p])


@dataclass(frozen=True)
class MetricData:
    g: np.ndarray
    g_inv: np.ndarray
    gamma: np.ndarray
    dgamma: np.ndarray
    riemann: np.ndarray


def conformal_factor(model, x):
    return 1.0 / (1.0 + 0.25 * model.c * np.einsum("i,i->", x, x))


def eval_metric(model, x):
    """Metric, inverse, Christoffel symbols, their derivatives and curvature at ``x``."""
    n = model.n
    c = model.c
    eye = np.eye(n)
    f = conformal_factor(model, x)
    g = eye * (f * f)
    g_inv = eye / (f * f)

    # w_k = d_k log f, dw[k, m] = d_m w_k
    w = x * (-0.5 * c * f)
    dw = np.einsum("k,m->km", x, x) * (0.25 * c * c * f * f) - eye * (0.5 * c * f)

    gamma = (np.einsum("ki,h->kih", eye, w) + np.einsum("kh,i->kih", eye, w)
             - np.einsum("ih,k->kih", eye, w))
    dgamma = (np.einsum("ki,hm->kihm", eye, dw) + np.einsum("kh,im->kihm", eye, dw)
              - np.einsum("ih,km->kihm", eye, dw))
    riemann = curvature_from_connection(gamma, dgamma)
    return MetricData(g=g, g_inv=g_inv, gamma=gamma, dgamma=dgamma, riemann=riemann)


def curvature_from_connection(gamma, dgamma):
    """R^h_kij = d_i G^h_jk - d_j G^h_ik + G^h_il G^l_jk - G^h_jl G^l_ik."""
    return (np.einsum("hjki->hkij", dgamma) - np.einsum("hikj->hkij", dgamma)
            + np.einsum("hil,ljk->hkij", gamma, gamma)
            - np.einsum("hjl,lik->hkij", gamma, gamma))


def constant_curvature_tensor(g, c):
    """c (delta^h_i g_jk - delta^h_j g_ik) in the ``riemann`` layout."""
    n = np.shape(g)[0]
    eye = np.eye(n)
    return (np.einsum("hi,jk->hkij", eye, g) - np.einsum("hj,ik->hkij", eye, g)) * c


def verify_constant_curvature(model, x, c=None):
    """Max deviation of the curvature at ``x`` from constant curvature ``c``.

    ``c`` defaults to the model curvature; passing another value measures how
    far the metric is from that curvature instead.
    """
    md = eval_metric(model, np.asarray(x, dtype=float))
    target = constant_curvature_tensor(md.g, model.c if c is None else c)
    return float(np.max(np.abs(md.riemann - target)))


def metric_compatibility_residual(model, x):
    """max |d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il| with the analytic dg."""
    x = np.asarray(x, dtype=float)
    md = eval_metric(model, x)
    f = conformal_factor(model, x)
    # d_k (f^2) = 2 f^2 d_k log f
    dg = np.einsum("ij,k->ijk", np.eye(model.n), x * (-model.c * f ** 3))
    lhs = (dg - np.einsum("lki,lj->ijk", md.gamma, md.g)
           - np.einsum("lkj,il->ijk", md.gamma, md.g))
    return float(np.max(np.abs(lhs)))


def contracted(md, p):
    """p-contractions used throughout: g^{0i}, Gamma^0_ih, R^0_kij."""
    g0 = np.einsum("hi,h->i", md.g_inv, p)
    gamma0 = np.einsum("kih,k->ih", md.gamma, p)
    r0 = np.einsum("hkij,h->kij", md.riemann, p)
    return g0, gamma0, r0


def adapted_frame(model, x, p, md=None):
    """Adapted frame (delta/dq^1.., d/dp_1..) as columns in the coordinate basis.

    Returns ``(E, E_inv)``; ``E[:, a]`` are the coordinate components of the
    a-th adapted basis vector.
    """
    n = model.n
    if md is None:
        md = eval_metric(model, x)
    _, gamma0, _ = contracted(md, p)
    eye = np.eye(n)
    zero = np.zeros((n, n))
    e = np.block([[eye, zero], [gamma0.T, eye]])
    e_inv = np.block([[eye, zero], [-gamma0.T, eye]])
    return e, e_inv


def bracket_check(model, pt):
    """Compare coordinate-frame commutators of the adapted frame with the curvature.

    [delta_i, delta_j] is assembled from the analytic Christoffel derivatives and
    must equal R^0_kij d/dp_k; [d/dp_i, delta_j] must equal Gamma^i_jk d/dp_k.
    """
    x, p = pt.x, pt.p
    md = eval_metric(model, x)
    _, gamma0, r0 = contracted(md, p)
    # delta_j has p-components V_j^h = p_k Gamma^k_jh; its derivatives:
    dq_v = np.einsum("k,kjhm->jhm", p, md.dgamma)    # d V_j^h / d q^m
    dp_v = np.einsum("mjh->jhm", md.gamma)            # d V_j^h / d p_m
    # [delta_i, delta_j]^h = delta_i(V_j^h) - delta_j(V_i^h)
    di_vj = (np.einsum("jhi->ijh", dq_v)
             + np.einsum("im,jhm->ijh", gamma0, dp_v))
    hh = di_vj - np.einsum("ijh->jih", di_vj)
    res_hh = np.max(np.abs(hh - np.einsum("hij->ijh", r0)))
    # [d/dp_i, delta_j]^h = d V_j^h / d p_i
    vh = np.einsum("jhi->ijh", dp_v)
    res_vh = np.max(np.abs(vh - md.gamma))
    return float(max(res_hh, res_vh))
