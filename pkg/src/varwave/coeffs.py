"""Coefficient fields of the quasilinear wave operator and derived quantities.

The operator (alpha^2 u_t + beta u_x)_t + (beta u_t - gamma^2 u_x)_x = ...
is described by three fields alpha, beta, gamma of (x, u) together with their
first partials. Everything downstream (characteristic speeds, the source
coefficients of the diagonalized first-order system, admissibility bounds)
is computed here, pointwise and vectorized.

Evaluation is pure and reentrant; fields are frozen after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import CoefficientDomainError

_FD_STEP = 1e-5  # centered-difference step for generated partials


@dataclass(frozen=True)
class CoefficientBounds:
    """Declared admissibility constants: alpha1 <= alpha <= alpha2, |beta| <= beta2,
    gamma1 <= gamma <= gamma2, with alpha1, gamma1 > 0, and a sup bound on all
    first partials. These are hypotheses declared per scenario, not inferred."""

    alpha1: float
    alpha2: float
    beta2: float
    gamma1: float
    gamma2: float
    grad_sup: float

    def __post_init__(self):
        if not (0.0 < self.alpha1 <= self.alpha2):
            raise ValueError("need 0 < alpha1 <= alpha2")
        if not (0.0 < self.gamma1 <= self.gamma2):
            raise ValueError("need 0 < gamma1 <= gamma2")
        if self.beta2 < 0.0:
            raise ValueError("beta2 must be >= 0")


@dataclass(frozen=True)
class AnalyticBounds:
    """Closed-form consequences of the declared constants.

    n_lower <= |lambda_pm| <= n_upper, and
    1/m_lower <= |c_i / (c2 - c1)| <= m_upper for i = 1, 2.
    """

    n_lower: float
    n_upper: float
    m_lower: float
    m_upper: float
    speed_gap: float  # lower bound on (c2 - c1)/alpha


def analytic_bounds(b: CoefficientBounds) -> AnalyticBounds:
    disc = math.sqrt(b.beta2**2 + (b.alpha2 * b.gamma2) ** 2)
    n_lower = b.gamma1**2 / (b.beta2 + disc)
    n_upper = (b.beta2 + disc) / b.alpha1**2
    m_lower = 2.0 * (b.beta2**2 + (b.alpha2 * b.gamma2) ** 2 + b.beta2 * disc) / (
        b.alpha1**2 * b.gamma1**2
    )
    m_upper = (b.beta2 + disc) / (2.0 * b.alpha1 * b.gamma1)
    return AnalyticBounds(
        n_lower=n_lower,
        n_upper=n_upper,
        m_lower=m_lower,
        m_upper=m_upper,
        speed_gap=2.0 * b.gamma1 / b.alpha2,
    )


@dataclass(frozen=True)
class CoefficientField:
    """The triple (alpha, beta, gamma)(x, u) with first partials and declared bounds.

    All callables must accept numpy arrays (broadcasting) and return arrays of
    the broadcast shape.
    """

    alpha: Callable
    beta: Callable
    gamma: Callable
    alpha_x: Callable
    alpha_u: Callable
    beta_x: Callable
    beta_u: Callable
    gamma_x: Callable
    gamma_u: Callable
    bounds: CoefficientBounds
    name: str = "custom"
    params: dict = dc_field(default_factory=dict)


@dataclass
class DerivedCoeffs:
    """Pointwise derived quantities at (x, u): characteristic speeds, signed wave
    speeds c1 < 0 < c2, their partials (chain rule), and the source coefficients
    a1, a2, b, d1, d2 of the diagonalized system."""

    alpha: np.ndarray
    alpha_x: np.ndarray
    alpha_u: np.ndarray
    lambda_minus: np.ndarray
    lambda_plus: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    c1_x: np.ndarray
    c1_u: np.ndarray
    c2_x: np.ndarray
    c2_u: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    b: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        """c2 - c1, bounded below by 2*gamma1/alpha2 > 0."""
        return self.c2 - self.c1


def evaluate_derived(field: CoefficientField, x, u, check: bool = True) -> DerivedCoeffs:
    """Evaluate every derived coefficient at (x, u). Vectorized workhorse."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    al = np.asarray(field.alpha(x, u), dtype=float)
    be = np.asarray(field.beta(x, u), dtype=float)
    ga = np.asarray(field.gamma(x, u), dtype=float)
    if check and (np.any(al <= 0.0) or np.any(ga <= 0.0)):
        raise CoefficientDomainError(
            "alpha and gamma must stay positive; coefficient field invalid at a query point"
        )
    al_x = np.asarray(field.alpha_x(x, u), dtype=float)
    al_u = np.asarray(field.alpha_u(x, u), dtype=float)
    be_x = np.asarray(field.beta_x(x, u), dtype=float)
    be_u = np.asarray(field.beta_u(x, u), dtype=float)
    ga_x = np.asarray(field.gamma_x(x, u), dtype=float)
    ga_u = np.asarray(field.gamma_u(x, u), dtype=float)

    disc = np.sqrt(be * be + al * al * ga * ga)
    lam_m = (be - disc) / (al * al)
    lam_p = (be + disc) / (al * al)
    c1 = al * lam_m
    c2 = al * lam_p

    # chain rule: c_i = (beta -+ disc)/alpha, disc' = (beta beta' + alpha alpha' gamma^2
    # + alpha^2 gamma gamma')/disc
    disc_x = (be * be_x + al * al_x * ga * ga + al * al * ga * ga_x) / disc
    disc_u = (be * be_u + al * al_u * ga * ga + al * al * ga * ga_u) / disc
    c1_x = ((be_x - disc_x) * al - (be - disc) * al_x) / (al * al)
    c1_u = ((be_u - disc_u) * al - (be - disc) * al_u) / (al * al)
    c2_x = ((be_x + disc_x) * al - (be + disc) * al_x) / (al * al)
    c2_u = ((be_u + disc_u) * al - (be + disc) * al_u) / (al * al)

    gap = c2 - c1
    a1 = (c1 * al_u - al * c1_u) / (2.0 * al * gap)
    a2 = (c2 * al_u - al * c2_u) / (2.0 * al * gap)
    b = (al * (c1_x - c2_x) + (c1 - c2) * al_x) / (2.0 * al * gap)
    d_common = (c2 * c1_x - c1 * c2_x) / (2.0 * gap)
    d1 = d_common + (al * c1_x - c1 * al_x) / (2.0 * al)
    d2 = d_common + (al * c2_x - c2 * al_x) / (2.0 * al)

    return DerivedCoeffs(
        alpha=al, alpha_x=al_x, alpha_u=al_u,
        lambda_minus=lam_m, lambda_plus=lam_p,
        c1=c1, c2=c2, c1_x=c1_x, c1_u=c1_u, c2_x=c2_x, c2_u=c2_u,
        a1=a1, a2=a2, b=b, d1=d1, d2=d2,
    )


def eval_wave_speeds(field: CoefficientField, x, u):
    """Return (lambda_minus, lambda_plus, c1, c2) at (x, u).

    lambda_pm = (beta +- sqrt(beta^2 + alpha^2 gamma^2)) / alpha^2, c_i = alpha*lambda.
    Raises CoefficientDomainError when alpha or gamma is nonpositive there.
    """
    dc = evaluate_derived(field, x, u)
    return dc.lambda_minus, dc.lambda_plus, dc.c1, dc.c2


def eval_source_coeffs(field: CoefficientField, x, u):
    """Return the source coefficients (a1, a2, b, d1, d2) at (x, u)."""
    dc = evaluate_derived(field, x, u)
    return dc.a1, dc.a2, dc.b, dc.d1, dc.d2


def eval_lambda_partials_u(field: CoefficientField, x, u):
    """Return (d lambda_minus/du, d lambda_plus/du); advisory data at concentration
    events, where singular energy is expected to sit on their zero set."""
    dc = evaluate_derived(field, x, u)
    # lambda_pm = c_pm / alpha
    lm_u = (dc.c1_u * dc.alpha - dc.c1 * dc.alpha_u) / dc.alpha**2
    lp_u = (dc.c2_u * dc.alpha - dc.c2 * dc.alpha_u) / dc.alpha**2
    return lm_u, lp_u


@dataclass
class BoundsReport:
    """Observed extrema over a sample lattice against declared and analytic bounds."""

    alpha_range: tuple
    abs_beta_max: float
    gamma_range: tuple
    lambda_minus_range: tuple
    lambda_plus_range: tuple
    speed_ratio_range: tuple  # |c_i/(c2-c1)| over both i
    analytic: AnalyticBounds
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_bounds(field: CoefficientField, domain, samples: int) -> BoundsReport:
    """Check declared bounds against observed values on a sample lattice.

    domain is ((x_lo, x_hi), (u_lo, u_hi)). Violations are reported, not raised;
    only an empty domain raises.
    """
    (x_lo, x_hi), (u_lo, u_hi) = domain
    if samples < 1 or not (x_lo <= x_hi) or not (u_lo <= u_hi):
        raise ValueError("empty sampling domain")
    n = max(2, int(math.isqrt(int(samples))))
    xs = np.linspace(x_lo, x_hi, n)
    us = np.linspace(u_lo, u_hi, n)
    X, U = np.meshgrid(xs, us, indexing="ij")
    al = np.asarray(field.alpha(X, U), dtype=float)
    be = np.asarray(field.beta(X, U), dtype=float)
    ga = np.asarray(field.gamma(X, U), dtype=float)

    b = field.bounds
    tol = 1e-12
    violations = []

    def _flag(mask, what):
        if np.any(mask):
            k = np.argwhere(mask)[0]
            violations.append(
                f"{what} violated at x={X[tuple(k)]:.6g}, u={U[tuple(k)]:.6g}"
            )

    _flag(al < b.alpha1 - tol, "alpha >= alpha1")
    _flag(al > b.alpha2 + tol, "alpha <= alpha2")
    _flag(np.abs(be) > b.beta2 + tol, "|beta| <= beta2")
    _flag(ga < b.gamma1 - tol, "gamma >= gamma1")
    _flag(ga > b.gamma2 + tol, "gamma <= gamma2")

    an = analytic_bounds(b)
    positive = (al > 0.0) & (ga > 0.0)
    if not np.all(positive):
        # derived quantities are meaningless where the field degenerates
        _flag(~positive, "alpha, gamma > 0")
        finite = positive
    else:
        finite = np.ones_like(al, dtype=bool)

    dc = evaluate_derived(field, X[finite], U[finite], check=False)
    lam_m, lam_p = dc.lambda_minus, dc.lambda_plus
    ratios = np.concatenate([np.abs(dc.c1 / dc.gap), np.abs(dc.c2 / dc.gap)])
    _flag(~(lam_m < 0.0), "lambda_minus < 0")
    _flag(~(lam_p > 0.0), "lambda_plus > 0")
    for name, vals in (("|lambda_minus|", np.abs(lam_m)), ("lambda_plus", lam_p)):
        if np.any(vals < an.n_lower - 1e-9) or np.any(vals > an.n_upper + 1e-9):
            violations.append(f"{name} outside [{an.n_lower:.6g}, {an.n_upper:.6g}]")
    if np.any(ratios < 1.0 / an.m_lower - 1e-9) or np.any(ratios > an.m_upper + 1e-9):
        violations.append("|c_i/(c2-c1)| outside analytic range")

    gradmax = max(
        float(np.max(np.hypot(field.alpha_x(X, U), field.alpha_u(X, U)))),
        float(np.max(np.hypot(field.beta_x(X, U), field.beta_u(X, U)))),
        float(np.max(np.hypot(field.gamma_x(X, U), field.gamma_u(X, U)))),
    )
    if gradmax > b.grad_sup + 1e-9:
        violations.append(f"gradient sup {gradmax:.6g} exceeds declared {b.grad_sup:.6g}")

    return BoundsReport(
        alpha_range=(float(al.min()), float(al.max())),
        abs_beta_max=float(np.abs(be).max()),
        gamma_range=(float(ga.min()), float(ga.max())),
        lambda_minus_range=(float(lam_m.min()), float(lam_m.max())),
        lambda_plus_range=(float(lam_p.min()), float(lam_p.max())),
        speed_ratio_range=(float(ratios.min()), float(ratios.max())),
        analytic=an,
        violations=violations,
    )


# ---------------------------------------------------------------------------
# preset construction


def _const(v):
    v = float(v)

    def f(x, u):
        return np.broadcast_arrays(np.asarray(x, dtype=float), u)[0] * 0.0 + v

    return f


def _zero(x, u):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(u)).shape)


def from_callables(alpha, beta, gamma, bounds: CoefficientBounds,
                   partials: dict | None = None, fd_step: float = _FD_STEP,
                   name: str = "custom", params: dict | None = None) -> CoefficientField:
    """Build a field from value callables; missing partials fall back to centered
    finite differences with the given step."""
    partials = dict(partials or {})

    def _fd(f, which):
        h = fd_step
        if which == "x":
            return lambda x, u: (f(np.asarray(x) + h, u) - f(np.asarray(x) - h, u)) / (2 * h)
        return lambda x, u: (f(x, np.asarray(u) + h) - f(x, np.asarray(u) - h)) / (2 * h)

    return CoefficientField(
        alpha=alpha, beta=beta, gamma=gamma,
        alpha_x=partials.get("alpha_x", _fd(alpha, "x")),
        alpha_u=partials.get("alpha_u", _fd(alpha, "u")),
        beta_x=partials.get("beta_x", _fd(beta, "x")),
        beta_u=partials.get("beta_u", _fd(beta, "u")),
        gamma_x=partials.get("gamma_x", _fd(gamma, "x")),
        gamma_u=partials.get("gamma_u", _fd(gamma, "u")),
        bounds=bounds, name=name, params=dict(params or {}),
    )


def make_field(scenario: str, **params) -> CoefficientField:
    """Construct a preset coefficient field.

    Presets:
      linear           constant (alpha, beta, gamma); defaults (1, 0, 1)
      liquid-crystal   alpha=1, beta=0, gamma(u) = sqrt(K1 cos^2 u + K2 sin^2 u)
      x-heterogeneous  alpha=1, beta=0, gamma(x) = g0 + g1 sin(k x)
      custom           tabulated alpha/beta/gamma on an (x, u) lattice
    """
    if scenario == "linear":
        a = float(params.get("alpha", 1.0))
        b = float(params.get("beta", 0.0))
        g = float(params.get("gamma", 1.0))
        if a <= 0 or g <= 0:
            raise ValueError("linear preset needs alpha > 0 and gamma > 0")
        bounds = CoefficientBounds(a, a, abs(b), g, g, 0.0)
        return CoefficientField(
            alpha=_const(a), beta=_const(b), gamma=_const(g),
            alpha_x=_zero, alpha_u=_zero, beta_x=_zero, beta_u=_zero,
            gamma_x=_zero, gamma_u=_zero,
            bounds=bounds, name="linear", params={"alpha": a, "beta": b, "gamma": g},
        )

    if scenario == "liquid-crystal":
        k1 = float(params.get("K1", 1.0))
        k2 = float(params.get("K2", 4.0))
        if k1 <= 0 or k2 <= 0:
            raise ValueError("liquid-crystal preset needs K1, K2 > 0")

        def gam(x, u):
            u = np.asarray(u, dtype=float)
            g = np.sqrt(k1 + (k2 - k1) * np.sin(u) ** 2)
            return np.broadcast_arrays(np.asarray(x, dtype=float), g)[1] + 0.0

        def gam_u(x, u):
            u = np.asarray(u, dtype=float)
            g = np.sqrt(k1 + (k2 - k1) * np.sin(u) ** 2)
            val = (k2 - k1) * np.sin(u) * np.cos(u) / g
            return np.broadcast_arrays(np.asarray(x, dtype=float), val)[1] + 0.0

        glo, ghi = math.sqrt(min(k1, k2)), math.sqrt(max(k1, k2))
        bounds = CoefficientBounds(1.0, 1.0, 0.0, glo, ghi, abs(k2 - k1) / (2.0 * glo))
        return CoefficientField(
            alpha=_const(1.0), beta=_const(0.0), gamma=gam,
            alpha_x=_zero, alpha_u=_zero, beta_x=_zero, beta_u=_zero,
            gamma_x=_zero, gamma_u=gam_u,
            bounds=bounds, name="liquid-crystal", params={"K1": k1, "K2": k2},
        )

    if scenario == "x-heterogeneous":
        g0 = float(params.get("gamma0", 1.5))
        g1 = float(params.get("gamma1", 0.5))
        k = float(params.get("wavenumber", 1.0))
        if not (g0 > abs(g1) >= 0):
            raise ValueError("x-heterogeneous preset needs gamma0 > |gamma1|")

        def gam(x, u):
            x = np.asarray(x, dtype=float)
            val = g0 + g1 * np.sin(k * x)
            return np.broadcast_arrays(val, np.asarray(u, dtype=float))[0] + 0.0

        def gam_x(x, u):
            x = np.asarray(x, dtype=float)
            val = g1 * k * np.cos(k * x)
            return np.broadcast_arrays(val, np.asarray(u, dtype=float))[0] + 0.0

        bounds = CoefficientBounds(1.0, 1.0, 0.0, g0 - abs(g1), g0 + abs(g1), abs(g1 * k))
        return CoefficientField(
            alpha=_const(1.0), beta=_const(0.0), gamma=gam,
            alpha_x=_zero, alpha_u=_zero, beta_x=_zero, beta_u=_zero,
            gamma_x=gam_x, gamma_u=_zero,
            bounds=bounds, name="x-heterogeneous",
            params={"gamma0": g0, "gamma1": g1, "wavenumber": k},
        )

    if scenario == "custom":
        return _tabulated_field(**params)

    raise ValueError(f"unknown scenario preset: {scenario!r}")


def _tabulated_field(x_grid, u_grid, alpha_table, beta_table, gamma_table,
                     bounds: CoefficientBounds, fd_step: float = _FD_STEP) -> CoefficientField:
    """Bilinear interpolation of tabulated fields, edge-clamped; partials by
    centered differences of the interpolant."""
    xg = np.asarray(x_grid, dtype=float)
    ug = np.asarray(u_grid, dtype=float)
    tables = {
        "alpha": np.asarray(alpha_table, dtype=float),
        "beta": np.asarray(beta_table, dtype=float),
        "gamma": np.asarray(gamma_table, dtype=float),
    }
    for k, t in tables.items():
        if t.shape != (xg.size, ug.size):
            raise ValueError(f"{k} table must have shape (len(x_grid), len(u_grid))")

    def _interp(table):
        def f(x, u):
            x = np.clip(np.asarray(x, dtype=float), xg[0], xg[-1])
            u = np.clip(np.asarray(u, dtype=float), ug[0], ug[-1])
            x, u = np.broadcast_arrays(x, u)
            ix = np.clip(np.searchsorted(xg, x) - 1, 0, xg.size - 2)
            iu = np.clip(np.searchsorted(ug, u) - 1, 0, ug.size - 2)
            tx = (x - xg[ix]) / (xg[ix + 1] - xg[ix])
            tu = (u - ug[iu]) / (ug[iu + 1] - ug[iu])
            return ((1 - tx) * (1 - tu) * table[ix, iu]
                    + tx * (1 - tu) * table[ix + 1, iu]
                    + (1 - tx) * tu * table[ix, iu + 1]
                    + tx * tu * table[ix + 1, iu + 1])

        return f

    return from_callables(
        _interp(tables["alpha"]), _interp(tables["beta"]), _interp(tables["gamma"]),
        bounds=bounds, fd_step=fd_step, name="custom",
        params={"x_grid": xg.tolist(), "u_grid": ug.tolist()},
    )
