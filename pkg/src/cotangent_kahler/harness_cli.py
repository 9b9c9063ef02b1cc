"""Configuration, seeded sampling, suite orchestration and report emission."""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import dual
from .base_geometry import BaseModel, CotangentPoint, DomainError
from .connection_curvature import (
    assemble_curvature,
    connection_checks,
    curvature_blocks,
    curvature_oracle_residual,
    holomorphic_sectional,
    nabla_curvature,
    nabla_k_norm,
    qps_discrepancy,
    ricci_closed_qq,
    ricci_j_invariance,
    ricci_trace,
    second_bianchi_residual,
)
from .einstein_solver import (
    IntegralB1,
    NumericError,
    ef_consistency,
    einstein_residual,
    ode_residual,
)
from .lift_structures import (
    B1_BOUND,
    KAHLER_POSITIVITY,
    METRIC_POSITIVITY,
    Exponential,
    ParameterFamily,
    Polynomial,
    Power,
    almost_complex_residual,
    dphi_residual,
    energy_density,
    fundamental_form_residual,
    hermitian_residual,
    inverse_residual,
    j_matrix,
    j_squared_residual,
    lift_scalars,
    nijenhuis_formula,
    nijenhuis_numeric,
    point_data,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


SUITES = ("complex", "integrability", "hermitian", "kahler", "connection",
          "curvature", "einstein", "nonconstancy", "symmetry")

# "<" checks pass when the value is below the tolerance, ">" checks when above.
DEFAULT_TOLERANCES = {
    "complex.j_squared": 1e-10,
    "complex.inverse": 1e-10,
    "complex.scalar": 1e-10,
    "integrability.nijenhuis": 1e-7,
    "integrability.dual_path": 1e-7,
    "hermitian.residual": 1e-10,
    "kahler.fundamental_form": 1e-10,
    "kahler.dphi": 1e-8,
    "kahler.dphi_closed_form": 1e-7,
    "connection.nabla_g": 1e-8,
    "connection.torsion": 1e-8,
    "connection.koszul": 1e-8,
    "connection.explicit_display": 1e-8,
    "connection.explicit_repaired": 1e-8,
    "curvature.oracle": 1e-6,
    "curvature.ricci_symmetry": 1e-9,
    "curvature.ricci_mixed": 1e-9,
    "curvature.ricci_closed_form": 1e-7,
    "curvature.ricci_j_invariance": 1e-8,
    "einstein.residual": 1e-6,
    "einstein.ef_estimate": 1e-6,
    "einstein.alpha_channel": 1e-5,
    "einstein.beta_channel": 1e-5,
    "einstein.ode": 1e-8,
    "nonconstancy.spread": 1e-3,
    "nonconstancy.homogeneity": 1e-8,
    "nonconstancy.j_invariance": 1e-8,
    "symmetry.nabla_k": 1e-4,
    "symmetry.bianchi": 1e-5,
}


class ConfigError(Exception):
    """Invalid configuration or violated parameter constraint (exit status 2)."""


# -- configuration -------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    n: int
    c: float
    lam: dict
    b1: dict
    mu: dict
    A: float | None
    seed: int = 0
    points: int = 20
    x_radius: float = 1.0
    p_annulus: tuple = (0.3, 2.0)
    t_range: tuple | None = None
    t_num: int = 50
    tolerances: dict = field(default_factory=dict)
    suites: tuple = SUITES
    directions: int = 4

    def tolerance(self, name):
        return self.tolerances.get(name, DEFAULT_TOLERANCES[name])

    @property
    def Ef(self):
        return self.b1.get("Ef") if self.b1.get("mode") == "integral" else None

    def echo(self):
        return {
            "base": {"n": self.n, "c": self.c},
            "family": {"lambda": self.lam, "b1": self.b1, "mu": self.mu, "A": self.A},
            "sampling": {"seed": self.seed, "points": self.points,
                         "x_radius": self.x_radius, "p_annulus": list(self.p_annulus),
                         "directions": self.directions},
            "t_range": {"min": self.t_grid()[0], "max": self.t_grid()[-1], "num": self.t_num},
            "tolerances": {k: self.tolerance(k) for k in sorted(DEFAULT_TOLERANCES)},
            "suites": list(self.suites),
        }

    def sampled_t_bounds(self):
        """Energy densities reachable by the sampler: |p|^2 / (2 f^2) with f in [f_min, 1]."""
        r0, r1 = self.p_annulus
        stretch = 1.0 + 0.25 * self.c * self.n * self.x_radius ** 2
        return 0.5 * r0 ** 2, 0.5 * (r1 * stretch) ** 2

    def t_grid(self):
        lo, hi = self.t_range if self.t_range is not None else self.sampled_t_bounds()
        return [float(t) for t in np.geomspace(lo, hi, self.t_num)]


def _scalar(spec, what):
    kind = spec.get("kind", "polynomial")
    try:
        if kind == "polynomial":
            coeffs = tuple(float(v) for v in spec["coeffs"])
            if not coeffs:
                raise ConfigError(f"{what}: empty coefficient list")
            return Polynomial(coeffs)
        if kind == "exponential":
            return Exponential(float(spec.get("scale", 1.0)), float(spec["rate"]))
        if kind == "power":
            return Power(float(spec["coef"]), float(spec["exponent"]))
    except KeyError as exc:
        raise ConfigError(f"{what}: missing key {exc}") from None
    raise ConfigError(f"{what}: unknown kind {kind!r}")


def _positive(value, what):
    v = float(value)
    if not v > 0:
        raise ConfigError(f"{what} must be positive, got {v}")
    return v


def config_from_dict(data):
    """Build a :class:`RunConfig` from the parsed key tree."""
    data = dict(data)
    try:
        base = data.pop("base")
        family = dict(data.pop("family"))
    except KeyError as exc:
        raise ConfigError(f"missing section {exc}") from None
    sampling = data.pop("sampling", {})
    t_range = data.pop("t_range", None)
    tolerances = data.pop("tolerances", {})
    suites = data.pop("suites", list(SUITES))
    if data:
        raise ConfigError(f"unknown top-level keys: {sorted(data)}")

    try:
        n = int(base["n"])
        c = float(base["c"])
    except KeyError as exc:
        raise ConfigError(f"base: missing key {exc}") from None
    lam = dict(family.get("lambda", {"kind": "polynomial", "coeffs": [1.0]}))
    b1 = dict(family.get("b1", {"mode": "integral", "C": 0.0, "Ef": 0.0}))
    mu = dict(family.get("mu", {"mode": "kahler"}))
    A = family.get("A")
    if A is None and "A_scale" in family:
        A = float(family["A_scale"]) * float(np.sqrt(2 * c))
    if A is not None:
        A = _positive(A, "family.A")

    b1.setdefault("mode", "integral")
    if b1["mode"] == "integral":
        b1 = {"mode": "integral", "C": float(b1.get("C", 0.0)), "Ef": float(b1.get("Ef", 0.0))}
    elif b1["mode"] not in ("power", "polynomial"):
        raise ConfigError(f"family.b1: unknown mode {b1['mode']!r}")
    if mu.get("mode", "kahler") not in ("kahler", "offset", "polynomial"):
        raise ConfigError(f"family.mu: unknown mode {mu.get('mode')!r}")

    r_min, r_max = (float(v) for v in sampling.get("p_annulus", (0.3, 2.0)))
    if not 0 < r_min <= r_max:
        raise ConfigError(f"sampling.p_annulus needs 0 < r_min <= r_max, got {[r_min, r_max]}")
    points = int(sampling.get("points", 20))
    if points < 0:
        raise ConfigError("sampling.points must be >= 0")
    tr = None
    t_num = 50
    if t_range is not None:
        tr = (_positive(t_range["min"], "t_range.min"), _positive(t_range["max"], "t_range.max"))
        if tr[0] > tr[1]:
            raise ConfigError("t_range.min exceeds t_range.max")
        t_num = int(t_range.get("num", 50))
    unknown = sorted(set(tolerances) - set(DEFAULT_TOLERANCES))
    if unknown:
        raise ConfigError(f"unknown tolerance names: {unknown}")
    bad = sorted(set(suites) - set(SUITES))
    if bad:
        raise ConfigError(f"unknown suites: {bad}")

    cfg = RunConfig(
        n=n, c=c, lam=lam, b1=b1, mu=mu, A=A,
        seed=int(sampling.get("seed", 0)), points=points,
        x_radius=float(sampling.get("x_radius", 1.0)), p_annulus=(r_min, r_max),
        t_range=tr, t_num=t_num,
        tolerances={k: float(v) for k, v in tolerances.items()},
        suites=tuple(s for s in SUITES if s in suites),
        directions=int(sampling.get("directions", 4)),
    )
    build_family(cfg)
    return cfg


def load_config(path):
    """Parse and fully validate a TOML run configuration.

    Raises :class:`ConfigError` on parse errors (the message carries the line)
    and on parameter constraint violations (with the violating ``t``).
    """
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = config_from_dict(data)
    failures = [r for r in validate_constraints(cfg) if not r["ok"]]
    if failures:
        raise ConfigError("; ".join(r["message"] for r in failures))
    return cfg


def build_family(cfg):
    try:
        model = BaseModel(cfg.n, cfg.c)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    lam = _scalar(cfg.lam, "family.lambda")
    if cfg.b1["mode"] == "integral":
        b1 = IntegralB1(cfg.n, cfg.c, cfg.b1["Ef"], lam, cfg.b1["C"])
    else:
        spec = dict(cfg.b1)
        spec["kind"] = spec.pop("mode")
        b1 = _scalar(spec, "family.b1")
    mode = cfg.mu.get("mode", "kahler")
    kwargs = {}
    if mode == "offset":
        kwargs["mu_offset"] = float(cfg.mu.get("offset", 0.0))
    elif mode == "polynomial":
        kwargs["mu"] = _scalar({"kind": "polynomial", "coeffs": cfg.mu["coeffs"]}, "family.mu")
    try:
        return ParameterFamily(model, lam, b1, A=cfg.A, **kwargs)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def _first_violation(values, ts, name, condition):
    for t, (quantity, v) in zip(ts, values):
        if not (np.isfinite(v) and v > 0):
            return {"condition": name, "rule": condition, "ok": False, "t": t,
                    "quantity": quantity, "value": float(v),
                    "message": f"{quantity} violates {name} ({condition}) at t={t:.6g}, value {float(v):.6g}"}
    return {"condition": name, "rule": condition, "ok": True, "t": None,
            "quantity": None, "value": None, "message": "ok"}


def validate_constraints(cfg, family=None):
    """Scan the t-grid for the three parameter conditions; one record per condition."""
    family = family or build_family(cfg)
    ts = cfg.t_grid()
    kahler, bound, metric = [], [], []
    for t in ts:
        lam = float(family.lam(t))
        mu = float(family.mu_at(t))
        kahler.append(min((("lambda", lam), ("lambda + 2t mu", lam + 2 * t * mu)),
                          key=lambda kv: kv[1]))
        try:
            with np.errstate(all="ignore"):
                s = lift_scalars(family, t)
                b1 = float(s.b1)
                metric.append(min((("c1", float(s.c1)), ("c2", float(s.c2)),
                                   ("c1 + 2t d1", float(s.c1 + 2 * t * s.d1)),
                                   ("c2 + 2t d2", float(s.c2 + 2 * t * s.d2))),
                                  key=lambda kv: kv[1] if np.isfinite(kv[1]) else -np.inf))
        except (NumericError, DomainError, ZeroDivisionError):
            b1 = float("nan")
            metric.append(("c1", float("nan")))
        bound.append(("A + 2 sqrt(t) b1", family.A + 2 * np.sqrt(t) * b1))
    return [
        _first_violation(kahler, ts, "Kahler positivity", KAHLER_POSITIVITY),
        _first_violation(bound, ts, "b1 lower bound", B1_BOUND),
        _first_violation(metric, ts, "metric positivity", METRIC_POSITIVITY),
    ]


# -- sampling -------------------------------------------------------------------

def sample_points(cfg):
    """x uniform in the box, p uniform (by volume) in the annulus r_min <= |p| <= r_max."""
    rng = np.random.default_rng(cfg.seed)
    r0, r1 = cfg.p_annulus
    n = cfg.n
    out = []
    for _ in range(cfg.points):
        x = rng.uniform(-cfg.x_radius, cfg.x_radius, n)
        d = rng.normal(size=n)
        d /= np.linalg.norm(d)
        r = (r0 ** n + rng.uniform() * (r1 ** n - r0 ** n)) ** (1.0 / n)
        out.append(CotangentPoint(x, d * r))
    return out


# -- checks -------------------------------------------------------------------------

CLAIMS = {
    "complex.j_squared": "J^2 = -I on the adapted frame",
    "complex.inverse": "J1 and J2 are mutually inverse",
    "complex.scalar": "a1 a2 = 1 and the b2 relation give J^2 = -I",
    "integrability.nijenhuis": "J integrable iff A = sqrt(2c)",
    "integrability.dual_path": "Nijenhuis closed form agrees with the bracket definition",
    "hermitian.residual": "G(JX, JY) = G(X, Y)",
    "kahler.fundamental_form": "phi(X, Y) = G(X, JY) matches its closed form",
    "kahler.dphi": "d phi = 0 iff mu = lambda'",
    "kahler.dphi_closed_form": "d phi equals its printed closed form (1/2)(lambda' - mu) g0h Dp^Dp^dq",
    "connection.nabla_g": "Levi-Civita: nabla G = 0",
    "connection.torsion": "Levi-Civita: torsion free",
    "connection.koszul": "Koszul formula holds on the adapted frame",
    "connection.explicit_display": "printed explicit Q, P, S equal the generic Q, P, S",
    "connection.explicit_repaired": "explicit Q, P, S with three repairs equal the generic Q, P, S",
    "curvature.oracle": "curvature blocks equal the coordinate commutator curvature",
    "curvature.ricci_symmetry": "horizontal Ricci block is symmetric",
    "curvature.ricci_mixed": "mixed Ricci components vanish",
    "curvature.ricci_closed_form": "g-coefficient of the horizontal Ricci block is a / (2 lambda (lambda + 2t lambda'))",
    "curvature.ricci_j_invariance": "Ric(JX, JY) = Ric(X, Y)",
    "einstein.residual": "Ric = Ef G when b1 solves the Einstein ODE",
    "einstein.ef_estimate": "Ef read off the g-channel equals the configured Ef",
    "einstein.alpha_channel": "p (x) p channel of the horizontal Ricci block gives the same Ef",
    "einstein.beta_channel": "g0 (x) g0 channel of the vertical Ricci block gives the same Ef",
    "einstein.ode": "the integral formula for b1 solves the first-order Einstein ODE",
    "nonconstancy.spread": "holomorphic sectional curvature is not constant",
    "nonconstancy.homogeneity": "H(sX) = H(X)",
    "nonconstancy.j_invariance": "H(JX) = H(X)",
    "symmetry.nabla_k": "not locally symmetric: nabla K != 0",
    "symmetry.bianchi": "second Bianchi identity for nabla K",
}

# checks that pass when the observed value exceeds the tolerance
ABOVE = {"nonconstancy.spread", "symmetry.nabla_k"}


@dataclass
class CheckRecord:
    name: str
    claim: str
    tolerance: float
    relation: str
    points: int = 0
    value: float | None = None
    status: str = "fail"
    note: str = ""

    def observe(self, v):
        v = float(v)
        if self.value is None or not np.isfinite(v):
            self.value = v
        elif np.isfinite(self.value):
            self.value = max(self.value, v)
        self.points += 1

    def finish(self):
        if self.status == "skip":
            return self
        if self.points == 0 or self.value is None:
            self.status = "fail"
            self.note = self.note or "no points"
        elif not np.isfinite(self.value):
            self.status = "fail"
        elif self.relation == ">":
            self.status = "pass" if self.value > self.tolerance else "fail"
        else:
            self.status = "pass" if self.value < self.tolerance else "fail"
        return self

    def as_dict(self):
        value = self.value if self.value is not None and np.isfinite(self.value) else None
        return {"name": self.name, "claim": self.claim, "points": self.points,
                "value": value, "relation": self.relation, "tolerance": self.tolerance,
                "status": self.status, "note": self.note}


class _Checks:
    def __init__(self, cfg):
        self.cfg = cfg
        self.records = {}

    def get(self, name):
        rec = self.records.get(name)
        if rec is None:
            rec = CheckRecord(name, CLAIMS[name], self.cfg.tolerance(name),
                              ">" if name in ABOVE else "<")
            self.records[name] = rec
        return rec

    def observe(self, name, value):
        self.get(name).observe(value)

    def error(self, names, exc):
        for name in names:
            rec = self.get(name)
            rec.observe(float("nan"))
            rec.note = rec.note or f"{type(exc).__name__}: {exc}"

    def skip(self, name, reason):
        rec = self.get(name)
        rec.status = "skip"
        rec.note = reason


def _guard(checks, names, fn):
    try:
        fn()
    except (DomainError, NumericError, np.linalg.LinAlgError, ValueError) as exc:
        checks.error(names, exc)


def _suite_complex(checks, family, pts, cfg):
    for pt in pts:
        def run(pt=pt):
            checks.observe("complex.j_squared", j_squared_residual(family, pt))
            checks.observe("complex.inverse", inverse_residual(family, pt))
            checks.observe("complex.scalar",
                           almost_complex_residual(family, energy_density(family.model, pt)))
        _guard(checks, ["complex.j_squared", "complex.inverse", "complex.scalar"], run)


def _suite_integrability(checks, family, pts, cfg):
    names = ["integrability.nijenhuis", "integrability.dual_path"]
    for pt in pts:
        def run(pt=pt):
            nf = nijenhuis_formula(family, pt)
            nn = nijenhuis_numeric(family, pt)
            checks.observe(names[0], max(nf.max_abs(), nn.max_abs()))
            checks.observe(names[1], nf.distance(nn))
        _guard(checks, names, run)
    if not family.integrable:
        checks.get(names[0]).note = "A differs from sqrt(2c)"


def _suite_hermitian(checks, family, pts, cfg):
    for pt in pts:
        _guard(checks, ["hermitian.residual"],
               lambda pt=pt: checks.observe("hermitian.residual", hermitian_residual(family, pt)))


def _suite_kahler(checks, family, pts, cfg):
    names = ["kahler.fundamental_form", "kahler.dphi", "kahler.dphi_closed_form"]
    for pt in pts:
        def run(pt=pt):
            checks.observe(names[0], fundamental_form_residual(family, pt))
            r = dphi_residual(family, pt)
            checks.observe(names[1], r.numeric)
            checks.observe(names[2], r.mismatch)
            if r.closed_form > 1e-12:
                checks.get(names[2]).note = f"numeric / closed form = {r.ratio:.12g}"
        _guard(checks, names, run)


def _suite_connection(checks, family, pts, cfg):
    names = ["connection.nabla_g", "connection.torsion", "connection.koszul"]
    for pt in pts:
        def run(pt=pt):
            r = connection_checks(family, pt)
            for name, v in zip(names, r):
                checks.observe(name, v)
        _guard(checks, names, run)
    explicit = ["connection.explicit_display", "connection.explicit_repaired"]
    if not family.kahler:
        for name in explicit:
            checks.skip(name, "explicit Q, P, S assume mu = lambda'")
        return
    for pt in pts:
        def run(pt=pt):
            checks.observe(explicit[0], qps_discrepancy(family, pt))
            checks.observe(explicit[1], qps_discrepancy(family, pt, corrected=True))
        _guard(checks, explicit, run)


class _PointCache:
    """Curvature data shared between the curvature-based suites."""

    def __init__(self, family):
        self.family = family
        self.data = {}

    def blocks(self, i, pt):
        key = ("blocks", i)
        if key not in self.data:
            self.data[key] = curvature_blocks(self.family, pt)
        return self.data[key]

    def ricci(self, i, pt):
        key = ("ricci", i)
        if key not in self.data:
            self.data[key] = ricci_trace(self.family, pt, blocks=self.blocks(i, pt))
        return self.data[key]


def _suite_curvature(checks, family, pts, cfg, cache):
    names = ["curvature.oracle", "curvature.ricci_symmetry", "curvature.ricci_mixed",
             "curvature.ricci_closed_form", "curvature.ricci_j_invariance"]
    for i, pt in enumerate(pts):
        def run(i=i, pt=pt):
            checks.observe(names[0], curvature_oracle_residual(family, pt))
            ric = cache.ricci(i, pt)
            checks.observe(names[1], np.max(np.abs(ric.ric_qq - ric.ric_qq.T)))
            checks.observe(names[2], ric.mixed)
            if family.kahler:
                rc = ricci_closed_qq(family, pt, ric)
                scale = max(1.0, abs(rc.g_coeff))
                checks.observe(names[3], abs(rc.g_coeff - rc.traced_g_coeff) / scale)
            checks.observe(names[4], ricci_j_invariance(family, pt, ric))
        _guard(checks, names, run)
    if not family.kahler:
        checks.skip(names[3], "closed form assumes mu = lambda'")


def _suite_einstein(checks, family, pts, cfg, cache):
    names = ["einstein.residual", "einstein.ef_estimate", "einstein.alpha_channel",
             "einstein.beta_channel", "einstein.ode"]
    if cfg.Ef is None or not family.kahler:
        for name in names:
            checks.skip(name, "b1 is not the Einstein solution for a Kahler family")
        return
    Ef = cfg.Ef
    degenerate = []
    for i, pt in enumerate(pts):
        def run(i=i, pt=pt):
            ric = cache.ricci(i, pt)
            er = einstein_residual(family, pt, Ef, ric)
            checks.observe(names[0], er.max_residual)
            checks.observe(names[1], abs(er.ef_estimate - Ef) / max(1.0, abs(Ef)))
            ec = ef_consistency(family, pt, Ef, ric)
            if ec.skipped:
                degenerate.append(ec.reason)
            else:
                checks.observe(names[2], ec.r1)
                checks.observe(names[3], ec.r2)
        _guard(checks, names[:4], run)
    if degenerate:
        for name in names[2:4]:
            rec = checks.get(name)
            if rec.points == 0:
                checks.skip(name, f"channel degenerate at every point ({degenerate[0]})")
            else:
                rec.note = f"{len(degenerate)} degenerate points skipped"
    for t in cfg.t_grid():
        _guard(checks, [names[4]],
               lambda t=t: checks.observe(names[4], ode_residual(family, t, Ef)))


def _directions(cfg, n, salt):
    rng = np.random.default_rng([cfg.seed, salt])
    return rng.normal(size=(cfg.directions, 2 * n))


def _suite_nonconstancy(checks, family, pts, cfg, cache):
    names = ["nonconstancy.spread", "nonconstancy.homogeneity", "nonconstancy.j_invariance"]
    values = []
    for i, pt in enumerate(pts):
        def run(i=i, pt=pt):
            K = assemble_curvature(cache.blocks(i, pt))
            m = j_matrix(point_data(family, pt.x, pt.p))
            for X in _directions(cfg, family.n, i):
                h = holomorphic_sectional(family, pt, X, K)
                values.append(h)
                scale = max(1.0, abs(h))
                checks.observe(names[1], abs(holomorphic_sectional(family, pt, 2.5 * X, K) - h) / scale)
                checks.observe(names[2], abs(holomorphic_sectional(family, pt, m @ X, K) - h) / scale)
        _guard(checks, names, run)
    rec = checks.get(names[0])
    if values:
        rec.value = float(max(values) - min(values))
        rec.points = len(pts)


def _suite_symmetry(checks, family, pts, cfg, cache):
    names = ["symmetry.nabla_k", "symmetry.bianchi"]
    for pt in pts:
        def run(pt=pt):
            nk = nabla_curvature(family, pt)
            checks.observe(names[0], nabla_k_norm(family, pt, nk))
            checks.observe(names[1], second_bianchi_residual(nk))
        _guard(checks, names, run)


_SUITE_FUNCS = {
    "complex": _suite_complex,
    "integrability": _suite_integrability,
    "hermitian": _suite_hermitian,
    "kahler": _suite_kahler,
    "connection": _suite_connection,
}
_CACHED_SUITES = {
    "curvature": _suite_curvature,
    "einstein": _suite_einstein,
    "nonconstancy": _suite_nonconstancy,
    "symmetry": _suite_symmetry,
}


def run_suite(cfg):
    """Run the configured suites; returns the report as a plain dict."""
    family = build_family(cfg)
    constraints = validate_constraints(cfg, family)
    pts = sample_points(cfg)
    checks = _Checks(cfg)
    cache = _PointCache(family)
    suites = {}
    for suite in cfg.suites:
        suites[suite] = sorted(k for k in DEFAULT_TOLERANCES if k.split(".")[0] == suite)
        for name in suites[suite]:
            checks.get(name)
        if suite in _SUITE_FUNCS:
            _SUITE_FUNCS[suite](checks, family, pts, cfg)
        else:
            _CACHED_SUITES[suite](checks, family, pts, cfg, cache)
    records = []
    for suite in cfg.suites:
        for name in suites[suite]:
            records.append(checks.records[name].finish().as_dict())
    ok = all(r["ok"] for r in constraints) and all(r["status"] != "fail" for r in records)
    return {
        "config": cfg.echo(),
        "constraints": [{k: r[k] for k in ("condition", "rule", "ok", "t", "quantity", "value")}
                        for r in constraints],
        "checks": records,
        "summary": {
            "passed": sum(r["status"] == "pass" for r in records),
            "failed": sum(r["status"] == "fail" for r in records),
            "skipped": sum(r["status"] == "skip" for r in records),
            "ok": ok,
        },
    }


def _fmt(v):
    return "-" if v is None else f"{v:.3e}"


def emit_report(report, fmt="human"):
    if fmt == "machine":
        return json.dumps(report, indent=2, allow_nan=False) + "\n"
    if fmt != "human":
        raise ValueError(f"unknown format {fmt!r}")
    rows = [("check", "status", "value", "rel", "tol", "points", "note")]
    for r in report["checks"]:
        rows.append((r["name"], r["status"].upper(), _fmt(r["value"]), r["relation"],
                     f"{r['tolerance']:.0e}", str(r["points"]), r["note"]))
    widths = [max(len(row[i]) for row in rows) for i in range(6)]
    lines = []
    for con in report["constraints"]:
        state = "ok" if con["ok"] else f"VIOLATED at t={con['t']:.6g} ({con['quantity']} = {con['value']:.6g})"
        lines.append(f"constraint {con['condition']}: {state}")
    lines.append("")
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row[:6], widths)) + "  " + row[6])
    s = report["summary"]
    lines.append("")
    lines.append(f"{s['passed']} passed, {s['failed']} failed, {s['skipped']} skipped: "
                 + ("OK" if s["ok"] else "FAILED"))
    return "\n".join(line.rstrip() for line in lines) + "\n"


# -- b1 tabulation and feasibility scan ---------------------------------------------

def solve_b1_table(cfg):
    """Rows (t, b1, b1', b1'', ode residual) on the configured t-grid."""
    if cfg.Ef is None:
        raise ConfigError("solve-b1 needs family.b1.mode = 'integral'")
    family = build_family(cfg)
    rows = []
    for t in cfg.t_grid():
        b, db, d2b = dual.taylor(family.b1, t, 2)
        rows.append((t, float(b), float(db), float(d2b),
                     ode_residual(family, t, cfg.Ef, float(b), float(db))))
    return rows


def scan_feasibility(cfg, C_values, Ef_values):
    """Constraint status over a (C, Ef) grid with the configured lambda."""
    out = []
    for C in C_values:
        for Ef in Ef_values:
            trial = RunConfig(**{**cfg.__dict__, "b1": {"mode": "integral", "C": float(C), "Ef": float(Ef)}})
            bad = [r for r in validate_constraints(trial) if not r["ok"]]
            first = min(bad, key=lambda r: r["t"]) if bad else None
            out.append((float(C), float(Ef), not bad,
                        None if first is None else first["t"],
                        "" if first is None else first["condition"]))
    return out
