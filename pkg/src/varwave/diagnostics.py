"""Quantitative verification of the conservative-solution structure.

Everything here consumes finished grids and time slices: total energy and its
split into absolutely continuous parts and atoms, the wave interaction
potential, weak-form balance residuals over space-time boxes, concentration
events, and a Holder-exponent fit along backward characteristics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coeffs import CoefficientField, analytic_bounds, evaluate_derived, eval_lambda_partials_u
from .errors import InsufficientSamples, OutOfDomain
from .goursat import IT, IX, IU, ISG, IET, IXI, IZE, CharGrid
from .physmap import Isochrone, interp_monotone, isochrone_at


@dataclass
class EnergyReport:
    """Energy bookkeeping of one time slice."""

    t: float
    E_ac_minus: float
    E_ac_plus: float
    E_atoms: float
    E_total: float
    Q: float
    rel_drift: float


def total_energy(iso: Isochrone) -> EnergyReport:
    """Sum the slice's energy measures and split off merged atom mass.

    The totals come from the cumulative measures (finite through blowup); the
    atom share is the part accumulated on stalled-x runs.
    """
    if iso.x.size == 0:
        raise ValueError("empty isochrone")
    e_minus = iso.total_minus
    e_plus = iso.total_plus
    e_atoms = float(sum(a["mass_minus"] + a["mass_plus"] for a in iso.atoms))
    e_total = e_minus + e_plus
    q = interaction_potential(iso)
    drift = (e_total - iso.E0) / iso.E0 if iso.E0 > 0.0 else 0.0
    return EnergyReport(
        t=iso.t_star,
        E_ac_minus=e_minus - float(sum(a["mass_minus"] for a in iso.atoms)),
        E_ac_plus=e_plus - float(sum(a["mass_plus"] for a in iso.atoms)),
        E_atoms=e_atoms,
        E_total=e_total,
        Q=q,
        rel_drift=drift,
    )


def interaction_potential(iso: Isochrone) -> float:
    """Product-measure mass of {x > y} under (mu-, mu+).

    Discrete double sum over segment increments: each backward increment pairs
    with the forward mass strictly to its left, plus half of the forward mass
    on its own segment (none on atoms, where x does not advance).
    """
    dm, dp = iso.increments()
    if dm.size == 0:
        return 0.0
    before = iso.mu_plus_cum[:-1]
    own = 0.5 * dp
    if iso.atoms:
        stalled = np.abs(np.diff(iso.x)) < 1e-12
        own = np.where(stalled, 0.0, own)
    return float(np.sum(dm * (before + own)))


def _flux_density_at(iso: Isochrone, field: CoefficientField, x_probe: float):
    """Backward flux (c1/alpha) * Rt2 and density Rt2 at x_probe on a slice."""
    rt2 = interp_monotone(iso.x, np.where(np.isfinite(iso.Rt2), iso.Rt2, 0.0), x_probe)
    u = interp_monotone(iso.x, iso.u, x_probe)
    dc = evaluate_derived(field, np.atleast_1d(x_probe), np.atleast_1d(u))
    lam_m = float((dc.c1 / dc.alpha).ravel()[0])
    return lam_m * float(rt2), float(rt2)


def _source_pointwise(iso: Isochrone, field: CoefficientField) -> np.ndarray:
    """G = (2 c2 a1 R^2 S - 2 c1 a2 R S^2 - 2 c1 c2 b R S) / (alpha (c2 - c1))
    at the slice's points; zero where reconstruction is concentrated."""
    ok = ~iso.concentrated
    G = np.zeros(iso.x.size)
    if not np.any(ok):
        return G
    sg = iso.sigma[ok]
    et = iso.eta[ok]
    R = iso.xi[ok] / sg
    S = iso.zeta[ok] / et
    dc = evaluate_derived(field, iso.x[ok], iso.u[ok])
    gap = dc.gap
    G[ok] = (2.0 * dc.c2 * dc.a1 * R * R * S
             - 2.0 * dc.c1 * dc.a2 * R * S * S
             - 2.0 * dc.c1 * dc.c2 * dc.b * R * S) / (dc.alpha * gap)
    return G


def _source_box(iso: Isochrone, field: CoefficientField, x_probe: float) -> float:
    """Trapezoid of G over the slice up to x_probe."""
    G = _source_pointwise(iso, field)
    x = iso.x
    if x_probe <= x[0]:
        return 0.0
    inside = x <= x_probe
    xs = x[inside]
    gs = G[inside]
    total = float(np.trapz(gs, xs))
    k = xs.size - 1
    if k + 1 < x.size and x[k + 1] > x[k]:
        theta = (x_probe - x[k]) / (x[k + 1] - x[k])
        g_end = G[k] + theta * (G[k + 1] - G[k])
        total += 0.5 * (G[k] + g_end) * (x_probe - x[k])
    return total


def balance_residual(grid: CharGrid, t1: float, t2: float, x_probe: float,
                     n_time: int = 17) -> float:
    """Weak-form defect of the backward energy balance over [t1, t2] x (-inf, x_probe].

    residual = [mu-(t2) - mu-(t1)]((-inf, x_probe])
               + int_t1^t2 (c1/alpha) Rt2 (s, x_probe) ds
               - int_t1^t2 int_-inf^x_probe G dx ds
    """
    if not (0.0 <= t1 < t2 <= grid.max_t):
        raise OutOfDomain(f"time window [{t1}, {t2}] outside grid range")
    iso1 = isochrone_at(grid, t1)
    iso2 = isochrone_at(grid, t2)
    for iso in (iso1, iso2):
        if not (iso.x[0] <= x_probe <= iso.x[-1]):
            raise OutOfDomain("x_probe outside slice range")
    field = grid.field_ref
    mu1 = float(interp_monotone(iso1.x, iso1.mu_minus_cum, x_probe))
    mu2 = float(interp_monotone(iso2.x, iso2.mu_minus_cum, x_probe))

    ts = np.linspace(t1, t2, max(3, int(n_time)))
    flux = np.empty(ts.size)
    src = np.empty(ts.size)
    for k, s in enumerate(ts):
        iso = isochrone_at(grid, float(s))
        f, _ = _flux_density_at(iso, field, x_probe)
        flux[k] = f
        src[k] = _source_box(iso, field, x_probe)
    flux_int = float(np.trapz(flux, ts))
    src_int = float(np.trapz(src, ts))
    return (mu2 - mu1) + flux_int - src_int


@dataclass
class ConcentrationEvent:
    """A cluster of lattice nodes where min(sigma, eta) dropped below epsilon."""

    X: float
    Y: float
    t: float
    x: float
    sigma: float
    eta: float
    t_range: tuple
    x_range: tuple
    size: int
    dlambda_minus_du: float
    dlambda_plus_du: float


def detect_concentration(grid: CharGrid, eps: float) -> list:
    """Cluster flagged nodes by lattice adjacency into events, sorted by time."""
    flagged = {}
    for i in range(grid.nA):
        js, blk, _ = grid.column(i)
        hit = np.flatnonzero(np.minimum(blk[ISG], blk[IET]) < eps)
        for k in hit:
            flagged[(i, int(js[k]))] = blk[:, k]
    if not flagged:
        return []

    parent = {k: k for k in flagged}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for (i, j) in flagged:
        for nb in ((i - 1, j), (i, j - 1)):
            if nb in flagged:
                union((i, j), nb)

    clusters = {}
    for key in flagged:
        clusters.setdefault(find(key), []).append(key)

    events = []
    for members in clusters.values():
        states = np.stack([flagged[k] for k in members], axis=1)
        worst = int(np.argmin(np.minimum(states[ISG], states[IET])))
        i, j = members[worst]
        st = states[:, worst]
        lm_u, lp_u = eval_lambda_partials_u(grid.field_ref,
                                            np.atleast_1d(st[IX]), np.atleast_1d(st[IU]))
        events.append(ConcentrationEvent(
            X=float(grid.X_axis[i]), Y=float(grid.y_geo(j)),
            t=float(st[IT]), x=float(st[IX]),
            sigma=float(st[ISG]), eta=float(st[IET]),
            t_range=(float(np.min(states[IT])), float(np.max(states[IT]))),
            x_range=(float(np.min(states[IX])), float(np.max(states[IX]))),
            size=len(members),
            dlambda_minus_du=float(lm_u[0]), dlambda_plus_du=float(lp_u[0]),
        ))
    events.sort(key=lambda e: e.t)
    return events


def holder_estimate(grid: CharGrid, X_fixed: float, min_levels: int = 16) -> float:
    """Least-squares exponent of |x(t2) - x(t1)| vs |t2 - t1| along the lattice
    line A = X_fixed (a backward characteristic), over dyadic separations."""
    i = int(np.clip(round((X_fixed - grid.X_axis[0]) / grid.h), 0, grid.nA - 1))
    _, blk, _ = grid.column(i)
    t = blk[IT]
    x = blk[IX]
    if t.size < min_levels:
        raise InsufficientSamples(
            f"column holds {t.size} levels, fewer than {min_levels}"
        )
    logs_dt, logs_dx = [], []
    m = 1
    while m < t.size:
        dt = t[m:] - t[:-m]
        dx = np.abs(x[m:] - x[:-m])
        ok = (dt > 0.0) & (dx > 0.0)
        logs_dt.append(np.log(dt[ok]))
        logs_dx.append(np.log(dx[ok]))
        m *= 2
    lt = np.concatenate(logs_dt)
    lx = np.concatenate(logs_dx)
    if lt.size < 8:
        raise InsufficientSamples("too few usable separations along the line")
    A = np.stack([lt, np.ones_like(lt)], axis=1)
    slope, _ = np.linalg.lstsq(A, lx, rcond=None)[0]
    return float(slope)


def energy_series(grid: CharGrid, times) -> list:
    """EnergyReport at each requested time level."""
    return [total_energy(isochrone_at(grid, float(t))) for t in times]


def source_bound_constant(field: CoefficientField, x_box, u_box, samples: int = 128) -> float:
    """Scenario constant C with |G| <= C（|Rt2 S| + |R St2| + Rt2 + St2),
    obtained by maximizing the coefficient ratios over the sampled box."""
    xs = np.linspace(x_box[0], x_box[1], samples)
    us = np.linspace(u_box[0], u_box[1], samples)
    X, U = np.meshgrid(xs, us, indexing="ij")
    dc = evaluate_derived(field, X, U)
    r1 = 2.0 * dc.c2 * np.abs(dc.a1) / (dc.alpha * np.abs(dc.c1))
    r2 = 2.0 * np.abs(dc.c1) * np.abs(dc.a2) / (dc.alpha * dc.c2)
    r3 = dc.c2 * np.abs(dc.b) / dc.alpha
    r4 = np.abs(dc.c1) * np.abs(dc.b) / dc.alpha
    return float(max(np.max(r1), np.max(r2), np.max(r3), np.max(r4)))


@dataclass
class SpaceTimeBound:
    lhs: float
    rhs: float
    c_hat: float

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs


def space_time_bound(grid: CharGrid, times, c_hat: float | None = None) -> SpaceTimeBound:
    """Check the integrated interaction bound: the space-time integral of
    Rt2 * St2 against its closed-form budget in the declared constants."""
    field = grid.field_ref
    b = field.bounds
    an = analytic_bounds(b)
    E0 = grid.E0
    T = grid.T
    if c_hat is None:
        xs = grid.fields[IX]
        us = grid.fields[IU]
        c_hat = source_bound_constant(
            field, (float(xs.min()), float(xs.max())),
            (float(us.min()), float(us.max())))
    vals = []
    ts = np.asarray(sorted(float(t) for t in times))
    for t in ts:
        iso = isochrone_at(grid, t)
        ok = ~iso.concentrated
        prod = np.where(ok, np.where(np.isfinite(iso.Rt2), iso.Rt2, 0.0)
                        * np.where(np.isfinite(iso.St2), iso.St2, 0.0), 0.0)
        vals.append(float(np.trapz(prod, iso.x)))
    lhs = float(np.trapz(vals, ts))
    rhs = (2.0 * b.alpha2 * E0**2 / b.gamma1
           + (b.alpha2 / b.gamma1) * c_hat * E0**2 * T
           * (1.0 + b.alpha2 * an.m_lower * c_hat * E0 / (2.0 * b.gamma1)))
    return SpaceTimeBound(lhs=lhs, rhs=rhs, c_hat=float(c_hat))


def modulus_of_continuity(grid: CharGrid, t_star: float, x_window, exponent: float = 0.4,
                          n_probe: int = 200) -> float:
    """sup over probes of |u(t, x + d) - u(t, x)| / d^exponent on a window,
    sampled over dyadic separations from h up to the window width."""
    iso = isochrone_at(grid, t_star)
    lo = max(float(x_window[0]), float(iso.x[0]))
    hi = min(float(x_window[1]), float(iso.x[-1]))
    if hi <= lo:
        raise OutOfDomain("empty modulus window")
    worst = 0.0
    d = grid.h
    while d <= (hi - lo):
        xs = np.linspace(lo, hi - d, n_probe)
        u1 = interp_monotone(iso.x, iso.u, xs)
        u2 = interp_monotone(iso.x, iso.u, xs + d)
        worst = max(worst, float(np.max(np.abs(u2 - u1))) / d**exponent)
        d *= 2.0
    return worst
