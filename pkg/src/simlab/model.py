"""System specifications, reaction terms and hypothesis validation.

Coefficients are declarative (constant, sinusoidal, piecewise-constant table)
so that specs round-trip through JSON and their bounds are available in closed
form.  General reactions ``f_i(t, r, u)`` are polynomials in ``u`` whose
coefficients are themselves coefficient functions.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import PolarGrid, RadialDomain, StatePair, half_domain_mask
from .errors import SpecError

KINDS = (
    "scalar",
    "lotka_volterra",
    "competitive_general",
    "cooperative_general",
    "cubic",
    "predator_prey_exploratory",
)

# Required coefficient names per kind; "f", "f1", "f2" are polynomial reactions.
_REQUIRED = {
    "scalar": ("mu", "f"),
    "lotka_volterra": ("mu1", "mu2", "a1", "a2", "b1", "b2", "alpha1", "alpha2"),
    "competitive_general": ("mu1", "mu2", "f1", "f2", "alpha1", "alpha2"),
    "cooperative_general": ("mu1", "mu2", "f1", "f2", "alpha1", "alpha2"),
    "cubic": ("mu1", "mu2", "lambda1", "lambda2", "gamma1", "gamma2", "alpha1", "alpha2"),
    "predator_prey_exploratory": ("mu1", "mu2", "f1", "f2", "alpha1", "alpha2"),
}

COMPETITIVE_KINDS = ("lotka_volterra", "competitive_general", "cubic", "predator_prey_exploratory")

_FAMILY_KEYS = {
    "constant": {"value"},
    "sinusoidal": {"offset", "amplitude", "frequency", "phase", "r_frequency"},
    "piecewise_constant_table": {"breakpoints", "values", "arg"},
    "polynomial": {"terms"},
}


def _sin_range(lo: float, hi: float) -> tuple[float, float]:
    """Exact range of ``sin`` over ``[lo, hi]``."""
    if hi - lo >= 2.0 * math.pi:
        return -1.0, 1.0

    def hits(target):
        k = math.ceil((lo - target) / (2.0 * math.pi))
        return target + 2.0 * math.pi * k <= hi

    vals = [math.sin(lo), math.sin(hi)]
    top = 1.0 if hits(math.pi / 2) else max(vals)
    bottom = -1.0 if hits(-math.pi / 2) else min(vals)
    return bottom, top


@dataclass(frozen=True)
class CoefficientFn:
    """A bounded coefficient ``c(t)`` or ``c(r, t)``."""

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in ("constant", "sinusoidal", "piecewise_constant_table"):
            raise SpecError(f"unknown coefficient family {self.family!r}")
        p = dict(self.params)
        unknown = set(p) - _FAMILY_KEYS[self.family]
        if unknown:
            raise SpecError(f"unknown keys {sorted(unknown)} for family {self.family}")
        if self.family == "constant":
            if "value" not in p:
                raise SpecError("constant coefficient needs 'value'")
            p["value"] = float(p["value"])
        elif self.family == "sinusoidal":
            for key in ("offset", "amplitude", "frequency", "phase", "r_frequency"):
                p[key] = float(p.get(key, 0.0))
        else:
            bps = [float(b) for b in p.get("breakpoints", [])]
            vals = [float(v) for v in p.get("values", [])]
            if len(vals) != len(bps) + 1:
                raise SpecError("piecewise table needs len(values) == len(breakpoints) + 1")
            if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
                raise SpecError("piecewise breakpoints must be strictly increasing")
            arg = p.get("arg", "t")
            if arg not in ("t", "r"):
                raise SpecError("piecewise table 'arg' must be 't' or 'r'")
            p.update(breakpoints=bps, values=vals, arg=arg)
        for v in p.values():
            if isinstance(v, float) and not math.isfinite(v):
                raise SpecError(f"non-finite coefficient parameter in {self.family}")
            if isinstance(v, list) and not all(math.isfinite(x) for x in v):
                raise SpecError(f"non-finite coefficient parameter in {self.family}")
        object.__setattr__(self, "params", p)

    @classmethod
    def const(cls, value: float) -> "CoefficientFn":
        return cls("constant", {"value": value})

    @classmethod
    def from_dict(cls, doc) -> "CoefficientFn":
        if isinstance(doc, (int, float)) and not isinstance(doc, bool):
            return cls.const(doc)
        if not isinstance(doc, dict) or "family" not in doc:
            raise SpecError(f"coefficient must be a number or an object with 'family': {doc!r}")
        params = {k: v for k, v in doc.items() if k != "family"}
        return cls(doc["family"], params)

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params}

    @property
    def depends_on_r(self) -> bool:
        if self.family == "sinusoidal":
            return self.params["r_frequency"] != 0.0 and self.params["amplitude"] != 0.0
        if self.family == "piecewise_constant_table":
            return self.params["arg"] == "r"
        return False

    @property
    def depends_on_t(self) -> bool:
        if self.family == "sinusoidal":
            return self.params["frequency"] != 0.0 and self.params["amplitude"] != 0.0
        if self.family == "piecewise_constant_table":
            return self.params["arg"] == "t" and len(self.params["breakpoints"]) > 0
        return False

    @property
    def is_smooth(self) -> bool:
        return self.family != "piecewise_constant_table" or not self.params["breakpoints"]

    def __call__(self, t, r=0.0):
        p = self.params
        if self.family == "constant":
            return p["value"]
        if self.family == "sinusoidal":
            return p["offset"] + p["amplitude"] * np.sin(
                p["frequency"] * t + p["r_frequency"] * np.asarray(r) + p["phase"]
            )
        x = np.asarray(t if p["arg"] == "t" else r, dtype=float)
        idx = np.searchsorted(p["breakpoints"], x, side="right")
        out = np.asarray(p["values"])[idx]
        return float(out) if out.ndim == 0 else out

    def bounds(self, domain: RadialDomain) -> tuple[float, float]:
        """Infimum and supremum over ``t >= 0`` and ``r`` in ``[a1, a2]``."""
        p = self.params
        if self.family == "constant":
            return p["value"], p["value"]
        if self.family == "sinusoidal":
            amp = p["amplitude"]
            if amp == 0.0:
                return p["offset"], p["offset"]
            if p["frequency"] != 0.0:
                lo, hi = -1.0, 1.0
            else:
                a = p["r_frequency"] * domain.a1 + p["phase"]
                b = p["r_frequency"] * domain.a2 + p["phase"]
                lo, hi = _sin_range(min(a, b), max(a, b))
            ends = (p["offset"] + amp * lo, p["offset"] + amp * hi)
            return min(ends), max(ends)
        bps, vals = p["breakpoints"], p["values"]
        lo_x, hi_x = (0.0, math.inf) if p["arg"] == "t" else (domain.a1, domain.a2)
        edges = [-math.inf, *bps, math.inf]
        live = [v for v, a, b in zip(vals, edges[:-1], edges[1:]) if b > lo_x and a <= hi_x]
        return min(live), max(live)

    def time_scale(self) -> float:
        """A horizon covering one period or all breakpoints (for sampling)."""
        p = self.params
        if self.family == "sinusoidal" and p["frequency"] != 0.0:
            return 2.0 * math.pi / abs(p["frequency"])
        if self.family == "piecewise_constant_table" and p["arg"] == "t" and p["breakpoints"]:
            return max(p["breakpoints"][-1], 0.0) + 1.0
        return 1.0


@dataclass(frozen=True)
class Polynomial:
    """``f(t, r, u) = sum_p c_p(t, r) u**p`` with coefficient functions ``c_p``."""

    terms: dict

    @classmethod
    def from_dict(cls, doc) -> "Polynomial":
        if not isinstance(doc, dict) or doc.get("family") != "polynomial":
            raise SpecError(f"reaction must be an object with family 'polynomial': {doc!r}")
        unknown = set(doc) - {"family", "terms"}
        if unknown:
            raise SpecError(f"unknown keys {sorted(unknown)} in polynomial reaction")
        terms = {}
        for power, coef in dict(doc.get("terms", {})).items():
            try:
                pw = int(power)
            except (TypeError, ValueError):
                raise SpecError(f"polynomial power must be an integer, got {power!r}") from None
            if pw < 0 or pw > 9:
                raise SpecError(f"polynomial power {pw} outside 0..9")
            terms[pw] = CoefficientFn.from_dict(coef)
        return cls(terms)

    def to_dict(self) -> dict:
        return {
            "family": "polynomial",
            "terms": {str(p): c.to_dict() for p, c in sorted(self.terms.items())},
        }

    def __call__(self, t, r, u):
        out = 0.0
        for p, c in sorted(self.terms.items()):
            out = out + c(t, r) * (u**p if p else 1.0)
        return out * np.ones_like(u) if np.ndim(u) else out

    def coefficients(self):
        return list(self.terms.values())


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Which PDE system to integrate, on which domain, with which coefficients."""

    kind: str
    domain: RadialDomain
    coefficients: dict
    initial: dict | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown system kind {self.kind!r}; expected one of {KINDS}")
        coefs = dict(self.coefficients)
        required = _REQUIRED[self.kind]
        defaults = {"mu1": CoefficientFn.const(1.0), "mu2": CoefficientFn.const(1.0)} \
            if self.kind == "cubic" else {}
        for name, default in defaults.items():
            coefs.setdefault(name, default)
        missing = [n for n in required if n not in coefs]
        if missing:
            raise SpecError(f"{self.kind} system is missing coefficients {missing}")
        extra = [n for n in coefs if n not in required]
        if extra:
            raise SpecError(f"{self.kind} system does not use coefficients {extra}")
        for name, c in coefs.items():
            want = Polynomial if name in ("f", "f1", "f2") else CoefficientFn
            if not isinstance(c, want):
                raise SpecError(f"coefficient {name!r} must be a {want.__name__}")
        if self.kind == "cubic":
            for name in ("lambda1", "lambda2", "gamma1", "gamma2", "alpha1", "alpha2"):
                if coefs[name].family != "constant":
                    raise SpecError(f"cubic system needs constant {name}")
        object.__setattr__(self, "coefficients", coefs)

    # ---- construction / serialization -------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict) -> "SystemSpec":
        if not isinstance(doc, dict):
            raise SpecError("system spec must be a JSON object")
        unknown = set(doc) - {"kind", "domain", "coefficients", "initial"}
        if unknown:
            raise SpecError(f"unknown keys in system spec: {sorted(unknown)}")
        for key in ("kind", "domain", "coefficients"):
            if key not in doc:
                raise SpecError(f"system spec lacks {key!r}")
        dom = doc["domain"]
        if not isinstance(dom, dict) or set(dom) != {"a1", "a2"}:
            raise SpecError("domain must be an object with exactly 'a1' and 'a2'")
        domain = RadialDomain(dom["a1"], dom["a2"])
        if not isinstance(doc["coefficients"], dict):
            raise SpecError("coefficients must be an object")
        coefs = {}
        for name, c in doc["coefficients"].items():
            coefs[name] = Polynomial.from_dict(c) if name in ("f", "f1", "f2") else CoefficientFn.from_dict(c)
        return cls(doc["kind"], domain, coefs, doc.get("initial"))

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "domain": {"a1": self.domain.a1, "a2": self.domain.a2},
            "coefficients": {k: v.to_dict() for k, v in sorted(self.coefficients.items())},
        }
        if self.initial is not None:
            out["initial"] = self.initial
        return out

    def spec_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # ---- queries ----------------------------------------------------------------------

    @property
    def n_components(self) -> int:
        return 1 if self.kind == "scalar" else 2

    @property
    def exploratory(self) -> bool:
        return self.kind == "predator_prey_exploratory"

    @property
    def convention(self) -> str:
        if self.kind == "scalar":
            return "scalar"
        if self.kind == "cooperative_general":
            return "cooperative"
        return "competitive"

    def mu(self, i: int) -> CoefficientFn:
        return self.coefficients["mu" if self.kind == "scalar" else f"mu{i}"]

    def all_coefficient_fns(self):
        for c in self.coefficients.values():
            if isinstance(c, Polynomial):
                yield from c.coefficients()
            else:
                yield c

    def depends_on_r(self) -> bool:
        return any(c.depends_on_r for c in self.all_coefficient_fns())

    def reaction_depends_on_r(self) -> bool:
        return any(
            c.depends_on_r
            for name, coef in self.coefficients.items() if not name.startswith("mu")
            for c in (coef.coefficients() if isinstance(coef, Polynomial) else [coef])
        )

    def mu_depends_on_t(self) -> bool:
        return any(self.mu(i).depends_on_t for i in range(1, self.n_components + 1))

    def time_scale(self) -> float:
        return max(c.time_scale() for c in self.all_coefficient_fns())


def eval_reaction(spec: SystemSpec, t, r, u1, u2=None):
    """Pointwise reaction terms ``(g1, g2)``; broadcasts over array arguments."""
    c = spec.coefficients
    k = spec.kind
    if k == "scalar":
        g1 = c["f"](t, r, u1)
        return g1, 0.0 * np.asarray(g1)
    if u2 is None:
        raise SpecError(f"{k} system needs two components")
    if k == "lotka_volterra":
        g1 = c["a1"](t, r) * u1 - c["b1"](t, r) * u1 * u1 - c["alpha1"](t, r) * u1 * u2
        g2 = c["a2"](t, r) * u2 - c["b2"](t, r) * u2 * u2 - c["alpha2"](t, r) * u1 * u2
    elif k == "competitive_general":
        g1 = c["f1"](t, r, u1) - c["alpha1"](t, r) * u1 * u2
        g2 = c["f2"](t, r, u2) - c["alpha2"](t, r) * u1 * u2
    elif k == "cooperative_general":
        g1 = c["f1"](t, r, u1) + c["alpha1"](t, r) * u1 * u2
        g2 = c["f2"](t, r, u2) + c["alpha2"](t, r) * u1 * u2
    elif k == "cubic":
        g1 = c["lambda1"](t) * u1 + c["gamma1"](t) * u1**3 - c["alpha1"](t) * u2 * u2 * u1
        g2 = c["lambda2"](t) * u2 + c["gamma2"](t) * u2**3 - c["alpha2"](t) * u1 * u1 * u2
    else:  # predator_prey_exploratory
        g1 = c["f1"](t, r, u1) + c["alpha1"](t, r) * u1 * u2
        g2 = c["f2"](t, r, u2) - c["alpha2"](t, r) * u1 * u2
    return g1, g2


# ---- hypotheses --------------------------------------------------------------------


@dataclass
class HypothesisReport:
    """Outcome of the numerical hypothesis checks; failures are data, not exceptions."""

    kind: str
    convention: str
    h1_lipschitz_bound: float
    h1_value_box: tuple[float, float]
    h1_zero_reaction_ok: bool
    h1_ok: bool
    h2_mu_bounds: tuple[float, float]
    h2_mu_smooth: bool
    h2_ok: bool
    h3_alpha_bounds: tuple[float, float] | None
    h3_ok: bool
    nonnegative_ok: bool
    min_initial_value: float
    h0_direction_index: int
    h0_direction_angle: float
    h0_inequality_ok: tuple[bool, ...]
    h0_strict: tuple[bool, ...]
    h0_non_identical: tuple[bool, ...]
    h0_reflection_ok: bool
    H4_scalar_ok: bool | None
    notes: list = field(default_factory=list)

    def passed(self, name: str) -> bool:
        table = {
            "h0": self.h0_reflection_ok,
            "h1": self.h1_ok,
            "h2": self.h2_ok,
            "h3": self.h3_ok,
            "nonnegative": self.nonnegative_ok,
            "H1": self.h1_ok,
            "H2": self.h1_zero_reaction_ok,
            "H3": self.h2_ok,
            "H4": bool(self.H4_scalar_ok),
        }
        if name not in table:
            raise SpecError(f"unknown hypothesis {name!r}")
        return table[name]

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = list(v) if isinstance(v, tuple) else v
        return out


def _lipschitz_estimate(spec: SystemSpec, u_lo: float, u_hi: float, n_val: int = 41,
                        n_t: int = 33) -> float:
    """Sampled infinity-norm Lipschitz bound of the reaction map on a value box."""
    d = spec.domain
    r = np.linspace(d.a1, d.a2, 9)
    ts = np.linspace(0.0, spec.time_scale(), n_t)
    vals = np.linspace(u_lo, u_hi, n_val)
    h = vals[1] - vals[0]
    best = 0.0
    if spec.n_components == 1:
        U = vals[None, :]
        R = r[:, None]
        for t in ts:
            g, _ = eval_reaction(spec, t, R, U)
            slope = np.abs(np.diff(np.broadcast_to(g, (r.size, n_val)), axis=1)) / h
            best = max(best, float(slope.max()))
        return best
    U1, U2 = np.meshgrid(vals, vals, indexing="ij")
    U1 = U1[None]
    U2 = U2[None]
    R = r[:, None, None]
    for t in ts:
        g1, g2 = eval_reaction(spec, t, R, U1, U2)
        g1 = np.broadcast_to(g1, (r.size, n_val, n_val))
        g2 = np.broadcast_to(g2, (r.size, n_val, n_val))
        # |dg_i/du1| + |dg_i/du2| bounded by adjacent difference quotients
        d11 = np.abs(np.diff(g1, axis=1))[:, :, :-1] / h
        d12 = np.abs(np.diff(g1, axis=2))[:, :-1, :] / h
        d21 = np.abs(np.diff(g2, axis=1))[:, :, :-1] / h
        d22 = np.abs(np.diff(g2, axis=2))[:, :-1, :] / h
        best = max(best, float((d11 + d12).max()), float((d21 + d22).max()))
    return best


def value_box(spec: SystemSpec, u0: StatePair | None, safety: float = 2.0) -> tuple[float, float]:
    """Compact value box for Lipschitz sampling: ``[0, safety * sup|u0|]`` (symmetric for scalar)."""
    top = safety * (u0.sup() if u0 is not None else 1.0)
    top = top if top > 0 else 1.0
    return (-top, top) if spec.n_components == 1 else (0.0, top)


def lipschitz_bound(spec: SystemSpec, u0: StatePair | None = None) -> float:
    lo, hi = value_box(spec, u0)
    return _lipschitz_estimate(spec, lo, hi)


def dt_max(spec: SystemSpec, u0: StatePair | None = None) -> float:
    """Largest explicit-reaction step keeping the reaction update monotone."""
    L = lipschitz_bound(spec, u0)
    return math.inf if L == 0.0 else 0.5 / L


def _reflection_checks(u, e, grid: PolarGrid, sign: int, tol: float):
    from .domain import reflect_field

    mask = half_domain_mask(grid, e)
    ref = reflect_field(u, e).values
    diff = sign * (u.values - ref)
    on_half = diff[mask]
    ineq = bool(on_half.min() >= -tol) if on_half.size else True
    strict = bool(on_half.min() > tol) if on_half.size else False
    non_identical = bool(np.max(np.abs(u.values - ref)) > tol)
    return ineq, strict, non_identical


def validate_hypotheses(spec: SystemSpec, u0: StatePair, e) -> HypothesisReport:
    """Check the standing hypotheses numerically on the grid of ``u0``."""
    grid = u0.grid
    if grid.domain != spec.domain:
        raise SpecError("initial data grid does not cover the spec domain")
    e = grid.as_direction(e)
    notes = []
    lo, hi = value_box(spec, u0)
    L = _lipschitz_estimate(spec, lo, hi)

    # (h1): f_i(t, r, 0) = 0 for the two-component kinds, sup |f(t, r, 0)| finite for scalar
    r = np.linspace(spec.domain.a1, spec.domain.a2, 9)
    ts = np.linspace(0.0, spec.time_scale(), 33)
    zero_vals = []
    for t in ts:
        if spec.n_components == 1:
            g, _ = eval_reaction(spec, t, r, np.zeros_like(r))
            zero_vals.append(np.abs(g))
        else:
            g1, g2 = eval_reaction(spec, t, r, np.zeros_like(r), np.zeros_like(r))
            zero_vals.append(np.maximum(np.abs(g1), np.abs(g2)))
    zero_max = float(np.max(zero_vals))
    zero_ok = math.isfinite(zero_max) if spec.n_components == 1 else zero_max == 0.0
    if not zero_ok:
        notes.append(f"reaction at u=0 is not zero (max {zero_max:g})")
    h1_ok = bool(math.isfinite(L) and zero_ok)

    mus = [spec.mu(i).bounds(spec.domain) for i in range(1, spec.n_components + 1)]
    mu_lo, mu_hi = min(m[0] for m in mus), max(m[1] for m in mus)
    mu_smooth = all(spec.mu(i).is_smooth for i in range(1, spec.n_components + 1))
    if not mu_smooth:
        notes.append("diffusion coefficient is piecewise constant (not C^1)")
    h2_ok = bool(mu_lo > 0.0 and mu_smooth)

    if spec.n_components == 2:
        als = [spec.coefficients[f"alpha{i}"].bounds(spec.domain) for i in (1, 2)]
        alpha_bounds = (min(a[0] for a in als), max(a[1] for a in als))
        h3_ok = bool(alpha_bounds[0] > 0.0)
    else:
        alpha_bounds = None
        h3_ok = True

    comps = u0.components()[: spec.n_components]
    min_val = float(min(c.values.min() for c in comps))
    nonneg = spec.n_components == 1 or min_val >= 0.0

    tol = 1e-12 * (1.0 + u0.sup())
    if spec.convention == "competitive":
        signs = (1, -1)
    else:
        signs = (1, 1)
    checks = [_reflection_checks(c, e, grid, s, tol) for c, s in zip(comps, signs)]
    ineq = tuple(c[0] for c in checks)
    strict = tuple(c[1] for c in checks)
    nonid = tuple(c[2] for c in checks)
    h0_ok = bool(all(ineq) and all(nonid))
    H4 = h0_ok if spec.n_components == 1 else None
    if spec.exploratory:
        notes.append("predator-prey coupling: no symmetry result applies")

    return HypothesisReport(
        kind=spec.kind,
        convention=spec.convention,
        h1_lipschitz_bound=L,
        h1_value_box=(lo, hi),
        h1_zero_reaction_ok=zero_ok,
        h1_ok=h1_ok,
        h2_mu_bounds=(mu_lo, mu_hi),
        h2_mu_smooth=mu_smooth,
        h2_ok=h2_ok,
        h3_alpha_bounds=alpha_bounds,
        h3_ok=h3_ok,
        nonnegative_ok=bool(nonneg),
        min_initial_value=min_val,
        h0_direction_index=e.index,
        h0_direction_angle=e.angle,
        h0_inequality_ok=ineq,
        h0_strict=strict,
        h0_non_identical=nonid,
        h0_reflection_ok=h0_ok,
        H4_scalar_ok=H4,
        notes=notes,
    )
