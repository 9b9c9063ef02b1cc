"""Einstein condition: the b1 solution of the first-order ODE and its checks.

``b1(t) = F(t) (4C - I(t))`` with ``I(t) = int_1^t theta(s) ds`` and
``F(t) = t^{-(n+1)/2} lambda^{1-n} / (4 (lambda + 2t lambda'))``.  The integral is
evaluated by adaptive quadrature on floats; on dual numbers it is lifted with
``dI/dt = theta(t)``, so derivatives of every order are exact.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate

from . import dual
from .base_geometry import DomainError
from .connection_curvature import coefficient_a, ricci_trace
from .lift_structures import (
    DecompositionError,
    decompose_m_tensor,
    energy_density,
    lift_scalars,
    point_data,
)


class NumericError(RuntimeError):
    """Quadrature did not reach the requested accuracy."""


@dataclass(frozen=True)
class ThetaIntegrand:
    n: int
    c: float
    Ef: float
    lam: object

    def __call__(self, s):
        n, c = self.n, self.c
        lam = self.lam(s)
        l1 = self.lam.derivative(1)(s)
        l2 = self.lam.derivative(2)(s)
        bracket = (-(n - 2) * lam ** 2 + 4 * (n - 1) * s ** 2 * l1 ** 2
                   + 4 * s * lam * (2 * l1 + s * l2))
        body = 4 * self.Ef * np.sqrt(s) * lam ** 2 * (lam + 2 * s * l1) + np.sqrt(2 * c) * bracket
        return s ** ((n - 2) / 2) * lam ** (n - 2) * body


def theta(integrand, s):
    if not dual.value(s) > 0:
        raise DomainError(f"theta needs s > 0, got {dual.value(s)}")
    return integrand(s)


@dataclass(frozen=True)
class IntegralB1:
    """b1 source solving the Einstein ODE for a given (lambda, Ef, C).

    Usable wherever a closed-form b1 family is: calling it accepts floats and
    dual numbers.
    """

    n: int
    c: float
    Ef: float
    lam: object
    C: float
    epsrel: float = 1e-12
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def integrand(self):
        return ThetaIntegrand(self.n, self.c, self.Ef, self.lam)

    def integral(self, t):
        """int_1^t theta(s) ds; negative orientation for t < 1."""
        if isinstance(t, dual.Dual):
            return dual.Dual(t.tag, self.integral(t.re), self.integrand(t.re) * t.du)
        t = float(t)
        if not t > 0:
            raise DomainError(f"b1 needs t > 0, got {t}")
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        f = self.integrand
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(lambda s: float(f(s)), 1.0, t,
                                          epsabs=0.0, epsrel=self.epsrel, limit=500)
            except integrate.IntegrationWarning as exc:
                raise NumericError(f"quadrature of theta on [1, {t}] failed: {exc}") from exc
        self._cache[t] = val
        return val

    def prefactor(self, t):
        lam = self.lam(t)
        l1 = self.lam.derivative(1)(t)
        return t ** (-(self.n + 1) / 2) * lam ** (1 - self.n) / (4 * (lam + 2 * t * l1))

    def __call__(self, t):
        return self.prefactor(t) * (4 * self.C - self.integral(t))

    def derivative(self, order=1):
        def f(t, k=order):
            if k == 0:
                return self(t)
            return dual.derivative(lambda s: f(s, k - 1), t)
        return f

    def describe(self):
        return {"kind": "integral", "C": self.C, "Ef": self.Ef, "lambda": self.lam.describe()}


class B1Values(NamedTuple):
    t: float
    b1: float
    db1: float
    d2b1: float


def b1_of_t(source, t):
    """b1, b1', b1'' at ``t``; b1' is theta-based (Leibniz), b1'' one step further."""
    b, db, d2b = dual.taylor(source, float(t), 2)
    return B1Values(float(t), float(b), float(db), float(d2b))


def ode_residual(family, t, Ef, b1=None, db1=None):
    """|LHS - RHS| of the first-order Einstein ODE, grouped as printed."""
    n, c = family.n, family.c
    lam = family.lam(t)
    l1 = family.dlam(t)
    l2 = family.lam.derivative(2)(t)
    if b1 is None:
        b1 = family.b1(t)
    if db1 is None:
        db1 = dual.derivative(family.b1, t)
    L = lam + 2 * t * l1
    lhs = 2 * np.sqrt(2 * c) * lam * t ** 1.5 * L * db1
    rhs = (-np.sqrt(2 * c * t) * ((n + 1) * lam ** 2 + 2 * lam * l1 * (2 * n + 3) * t
                                  + 4 * l1 ** 2 * (n - 1) * t ** 2 + 4 * lam * l2 * t ** 2) * b1
           + c * lam ** 2 * (n - 2) - 8 * c * lam * l1 * t
           - 4 * c * (n - 1) * l1 ** 2 * t ** 2 - 4 * c * lam * l2 * t ** 2
           - Ef * 2 * np.sqrt(2 * c * t) * lam ** 2 * L)
    return float(abs(lhs - rhs))


def ef_closed_form(family, t):
    """Einstein factor implied by the g-channel: a / (2 lambda^2 sqrt(2ct) (lambda + 2t lambda'))."""
    lam, l1 = family.lam(t), family.dlam(t)
    return float(coefficient_a(family, t) / (2 * lam ** 2 * np.sqrt(2 * family.c * t)
                                             * (lam + 2 * t * l1)))


class EinsteinResult(NamedTuple):
    ef_estimate: float
    max_residual: float


def einstein_residual(family, pt, Ef, ricci=None):
    """max |Ric - Ef G| over both diagonal blocks and the G1 g-coefficient estimate of Ef."""
    if ricci is None:
        ricci = ricci_trace(family, pt)
    t = energy_density(family.model, pt)
    s = lift_scalars(family, t)
    d = point_data(family, pt.x, pt.p)
    res = max(np.max(np.abs(ricci.ric_qq - Ef * d.G1)),
              np.max(np.abs(ricci.ric_pp - Ef * d.G2)), ricci.mixed)
    u, _ = decompose_m_tensor(family.model, pt, ricci.ric_qq, "lower", tol=1e-6)
    return EinsteinResult(float(u / s.c1), float(res))


class EfConsistency(NamedTuple):
    r1: float           # |alpha-channel Ef - Ef|, nan when skipped
    r2: float           # |beta-channel Ef - Ef|, nan when skipped
    skipped: bool
    reason: str = ""


def ef_consistency(family, pt, Ef, ricci=None, degenerate=1e-9):
    """Einstein factor from the p(x)p and g0(x)g0 channels of the Ricci blocks."""
    if ricci is None:
        ricci = ricci_trace(family, pt)
    t = energy_density(family.model, pt)
    s = lift_scalars(family, t)
    if abs(s.d1) < degenerate or abs(s.d2) < degenerate:
        return EfConsistency(float("nan"), float("nan"), True,
                             f"degenerate channel: d1={float(s.d1):.3g}, d2={float(s.d2):.3g}")
    try:
        _, v1 = decompose_m_tensor(family.model, pt, ricci.ric_qq, "lower", tol=1e-6)
        _, v2 = decompose_m_tensor(family.model, pt, ricci.ric_pp, "upper", tol=1e-6)
    except DecompositionError as exc:
        return EfConsistency(float("nan"), float("nan"), True, str(exc))
    return EfConsistency(float(abs(v1 / s.d1 - Ef)), float(abs(v2 / s.d2 - Ef)), False)


def quadrature_convergence(source, t, factor=0.5):
    """|b1 at epsrel - b1 at factor*epsrel|."""
    tighter = IntegralB1(source.n, source.c, source.Ef, source.lam, source.C,
                     epsrel=source.epsrel * factor)
    return float(abs(source(float(t)) - tighter(float(t))))


def leibniz_vs_central(source, t, h=1e-4):
    """Relative gap between the propagated b1' and a central difference."""
    db = dual.derivative(source, float(t))
    fd = (source(t + h) - source(t - h)) / (2 * h)
    return float(abs(db - fd) / max(abs(db), 1e-300))


def log_grid(lo, hi, num):
    return np.geomspace(lo, hi, num)


def find_b1_violation(n, c, lam, Ef, C, t_values):
    """First t on the grid where the Eq.-32 b1 breaks the lower bound, else None."""
    src = IntegralB1(n, c, Ef, lam, C)
    for t in t_values:
        b = src(float(t))
        if not (np.isfinite(b) and np.sqrt(2 * c) + 2 * np.sqrt(t) * b > 0):
            return float(t), float(b)
    return None
