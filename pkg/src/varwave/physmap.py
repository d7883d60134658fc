"""Inversion of the characteristic map: time slices and pointwise sampling.

A solved grid carries t(A, B) monotone along both lattice axes, so each time
level t = t* cuts every column and row at most once. The level set is
extracted edge-by-edge (marching-squares style with a fixed corner order),
interpolated linearly, and ordered by x. Cumulative energy measures along the
slice are accumulated from the coordinate stretches: d(mu-) = p dX - dx and
d(mu+) = q dY - dx, which stay finite and smooth through gradient blowup.

Runs of points with (numerically) identical x are merged into atom records:
that is how a point mass in the energy measures appears on a lattice slice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .coeffs import DerivedCoeffs, evaluate_derived
from .errors import EmptyLevelSet, OutOfDomain, VarwaveError
from .goursat import IT, IX, IU, IP, IQ, ISG, IET, IXI, IZE, CharGrid, CharNode, _rhs_arrays
from .initdata import RiemannState

EPS_CONC = 1e-6
MERGE_TOL = 1e-12


def jacobian_det(node: CharNode, coeffs: DerivedCoeffs) -> float:
    """det of the map (X, Y) -> (t, x): (1/c2 - 1/c1) * alpha * x_X * x_Y.

    Vanishes exactly when sigma * eta * p * q = 0.
    """
    F = node.as_array()
    fa, fb = _rhs_arrays(F, coeffs)
    x_X = float(fa[1, 0])
    x_Y = float(fb[1, 0])
    c1 = float(np.asarray(coeffs.c1).ravel()[0])
    c2 = float(np.asarray(coeffs.c2).ravel()[0])
    al = float(np.asarray(coeffs.alpha).ravel()[0])
    return (1.0 / c2 - 1.0 / c1) * al * x_X * x_Y


def jacobian_grid(grid: CharGrid) -> np.ndarray:
    """Jacobian determinant at every stored node (flat layout of the grid)."""
    F = grid.fields
    dc = evaluate_derived(grid.field_ref, F[IX], F[IU])
    gap = dc.gap
    x_X = dc.c2 * F[ISG] * F[IP] / gap
    x_Y = dc.c1 * F[IET] * F[IQ] / gap
    return (1.0 / dc.c2 - 1.0 / dc.c1) * dc.alpha * x_X * x_Y


def flag_critical(grid: CharGrid, tol: float | None = None) -> np.ndarray:
    """Boolean flat mask of nodes with |det| below tol (default h^2)."""
    tol = grid.h**2 if tol is None else tol
    return np.abs(jacobian_grid(grid)) < tol


def reconstruct_riemann(node: CharNode, coeffs: DerivedCoeffs,
                        eps_floor: float = EPS_CONC) -> RiemannState:
    """Recover (R, S, Rt2, St2) from the compression factors.

    Where sigma (or eta) is at or below eps_floor the corresponding density is
    reported as +inf: the concentrated regime, flagged rather than an error.
    """
    if node.sigma > eps_floor:
        R = node.xi / node.sigma
        rt2 = (1.0 - node.sigma) / node.sigma
    else:
        R = math.inf if node.xi >= 0 else -math.inf
        rt2 = math.inf
    if node.eta > eps_floor:
        S = node.zeta / node.eta
        st2 = (1.0 - node.eta) / node.eta
    else:
        S = math.inf if node.zeta >= 0 else -math.inf
        st2 = math.inf
    return RiemannState(R, S, rt2, st2)


@dataclass
class Isochrone:
    """One time slice of the solution, ordered by x.

    mu_minus_cum / mu_plus_cum are the absolute cumulative energy measures
    mu(-inf, x]; their final values sum to the slice's total energy. Atom
    records hold the measure mass of merged stalled-x runs.
    """

    t_star: float
    x: np.ndarray
    u: np.ndarray
    sigma: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    Rt2: np.ndarray
    St2: np.ndarray
    mu_minus_cum: np.ndarray
    mu_plus_cum: np.ndarray
    concentrated: np.ndarray
    A: np.ndarray
    Y_geo: np.ndarray
    atoms: list = dc_field(default_factory=list)
    E0: float = 0.0
    h: float = 0.0

    @property
    def total_minus(self) -> float:
        return float(self.mu_minus_cum[-1])

    @property
    def total_plus(self) -> float:
        return float(self.mu_plus_cum[-1])

    def increments(self):
        """Raw segment increments (d mu-, d mu+), including any atoms."""
        return np.diff(self.mu_minus_cum), np.diff(self.mu_plus_cum)

    def export_rows(self) -> np.ndarray:
        names = ["x", "u", "sigma", "eta", "Rt2", "St2",
                 "mu_minus_cum", "mu_plus_cum", "concentrated"]
        rec = np.zeros(self.x.size, dtype=[(n, float) for n in names])
        for n in names[:-1]:
            rec[n] = getattr(self, n)
        rec["concentrated"] = self.concentrated.astype(float)
        return rec


def _column_sequence(grid: CharGrid, i: int):
    """Column i with its curve foot prepended: (B coords, states (9, n+1))."""
    js, blk, _ = grid.column(i)
    B = np.concatenate([[grid.vfoot_B[i]], grid.B_axis[js]])
    st = np.concatenate([grid.vfoot_state[:, i:i + 1], blk], axis=1)
    return B, st


def extract_isochrone(grid: CharGrid, t_star: float,
                      eps_conc: float = EPS_CONC,
                      merge_tol: float = MERGE_TOL) -> Isochrone:
    """Extract the level set t(A, B) = t_star as an x-ordered polyline."""
    if t_star < 0.0 or t_star > grid.max_t:
        raise EmptyLevelSet(f"t = {t_star} outside computed range [0, {grid.max_t}]")

    pts_A, pts_B, pts_F = [], [], []

    def _edge_point(Fa, Fb, Ba, Bb, Aa, Ab):
        ta, tb = Fa[IT], Fb[IT]
        span = tb - ta
        theta = 0.0 if span <= 0.0 else (t_star - ta) / span
        theta = min(1.0, max(0.0, theta))
        pts_F.append(Fa + theta * (Fb - Fa))
        pts_A.append(Aa + theta * (Ab - Aa))
        pts_B.append(Ba + theta * (Bb - Ba))

    prev = None  # (js, blk) of the previous column
    for i in range(grid.nA):
        B, st = _column_sequence(grid, i)
        ts = st[IT]
        if np.any(np.diff(ts) < -1e-11):
            raise VarwaveError("t not monotone along a column during extraction")
        if ts[0] <= t_star <= ts[-1]:
            k = int(np.searchsorted(ts, t_star, side="left"))
            k = max(1, min(k, ts.size - 1))
            A_i = grid.X_axis[i]
            _edge_point(st[:, k - 1], st[:, k], B[k - 1], B[k], A_i, A_i)

        js, blk, _ = grid.column(i)
        lo_foot = int(grid.j_lo[i])
        top = lo_foot + int(grid.n_rows[i])
        foot_hi = int(grid.j_lo[i - 1]) if i > 0 else top
        for j in range(lo_foot, min(foot_hi, top)):
            te = blk[IT, j - lo_foot]
            if 0.0 <= t_star <= te:
                W = grid.hfoot_state[:, j]
                _edge_point(W, blk[:, j - lo_foot], grid.B_axis[j], grid.B_axis[j],
                            grid.hfoot_A[j], grid.X_axis[i])
        if prev is not None:
            js_w, blk_w = prev
            lo = max(int(js_w[0]), int(js[0]))
            hi = min(int(js_w[-1]), int(js[-1]))
            if hi >= lo:
                tw = blk_w[IT, lo - js_w[0]: hi - js_w[0] + 1]
                te = blk[IT, lo - js[0]: hi - js[0] + 1]
                for k in np.flatnonzero((tw < t_star) & (t_star <= te)):
                    j = lo + int(k)
                    _edge_point(blk_w[:, j - js_w[0]], blk[:, j - js[0]],
                                grid.B_axis[j], grid.B_axis[j],
                                grid.X_axis[i - 1], grid.X_axis[i])
        prev = (js, blk)

    if not pts_F:
        raise EmptyLevelSet(f"no lattice edge crosses t = {t_star}")

    F = np.stack(pts_F, axis=1)
    A = np.asarray(pts_A)
    B = np.asarray(pts_B)
    ygeo = grid.orientation * B
    order = np.lexsort((ygeo, A))
    F, A, ygeo = F[:, order], A[order], ygeo[order]

    keep = np.ones(A.size, dtype=bool)
    same = (np.abs(np.diff(A)) < 1e-13) & (np.abs(np.diff(ygeo)) < 1e-13)
    keep[1:][same] = False
    F, A, ygeo = F[:, keep], A[keep], ygeo[keep]

    x = F[IX]
    dx = np.diff(x)
    dA = np.diff(A)
    dY = np.diff(ygeo)
    p_mid = 0.5 * (F[IP, :-1] + F[IP, 1:])
    q_mid = 0.5 * (F[IQ, :-1] + F[IQ, 1:])
    dmu_m = p_mid * dA - dx
    dmu_p = q_mid * dY - dx

    cum = grid.curve_ref.cum
    x_left_foot = cum.x_from_X(float(grid.X_axis[0]))
    anchor_m = float(cum.cum_minus(x_left_foot))
    anchor_p = float(cum.cum_plus(x_left_foot))
    mu_m = np.concatenate([[anchor_m], anchor_m + np.cumsum(dmu_m)])
    mu_p = np.concatenate([[anchor_p], anchor_p + np.cumsum(dmu_p)])

    sigma = F[ISG]
    eta = F[IET]
    with np.errstate(divide="ignore"):
        rt2 = np.where(sigma > eps_conc, (1.0 - sigma) / np.maximum(sigma, 1e-300), np.inf)
        st2 = np.where(eta > eps_conc, (1.0 - eta) / np.maximum(eta, 1e-300), np.inf)
    concentrated = (sigma < eps_conc) | (eta < eps_conc)

    atoms = []
    if x.size > 1:
        stalled = np.abs(dx) < merge_tol
        k = 0
        while k < stalled.size:
            if stalled[k]:
                k2 = k
                while k2 < stalled.size and stalled[k2]:
                    k2 += 1
                mass_m = float(mu_m[k2] - mu_m[k])
                mass_p = float(mu_p[k2] - mu_p[k])
                if mass_m + mass_p > 0.0:
                    atoms.append({"x": float(x[k]), "mass_minus": mass_m,
                                  "mass_plus": mass_p, "npts": int(k2 - k + 1)})
                k = k2
            k += 1

    return Isochrone(
        t_star=float(t_star), x=x, u=F[IU], sigma=sigma, eta=eta,
        xi=F[IXI], zeta=F[IZE], Rt2=rt2, St2=st2,
        mu_minus_cum=mu_m, mu_plus_cum=mu_p, concentrated=concentrated,
        A=A, Y_geo=ygeo, atoms=atoms, E0=grid.E0, h=grid.h,
    )


def isochrone_at(grid: CharGrid, t_star: float, **kw) -> Isochrone:
    """Cached extraction keyed on the rounded time level."""
    key = round(float(t_star), 12)
    cache = getattr(grid, "_isochrones", None)
    if cache is None:
        cache = {}
        setattr(grid, "_isochrones", cache)
    if key not in cache:
        cache[key] = extract_isochrone(grid, t_star, **kw)
    return cache[key]


def interp_monotone(xs: np.ndarray, ys: np.ndarray, x_query):
    """Piecewise-linear interpolation tolerant of stalled (repeated) x values;
    on a stall the common left value is returned."""
    xq = np.asarray(x_query, dtype=float)
    idx = np.clip(np.searchsorted(xs, xq, side="right") - 1, 0, xs.size - 2)
    x0, x1 = xs[idx], xs[idx + 1]
    span = x1 - x0
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.where(span > 0.0, (xq - x0) / np.where(span > 0, span, 1.0), 0.0)
    theta = np.clip(theta, 0.0, 1.0)
    return ys[idx] + theta * (ys[idx + 1] - ys[idx])


def sample_u(grid: CharGrid, t_star: float, x_star):
    """u(t_star, x_star) by linear interpolation along the extracted slice.

    Accepts scalar or array x_star; raises OutOfDomain when a query leaves the
    slice's x range.
    """
    iso = isochrone_at(grid, t_star)
    xq = np.asarray(x_star, dtype=float)
    scalar = xq.ndim == 0
    xq1 = np.atleast_1d(xq)
    tol = 1e-9 * max(1.0, float(np.max(np.abs(iso.x))))
    if np.any(xq1 < iso.x[0] - tol) or np.any(xq1 > iso.x[-1] + tol):
        raise OutOfDomain(
            f"x outside slice range [{iso.x[0]:.6g}, {iso.x[-1]:.6g}] at t = {t_star}"
        )
    vals = interp_monotone(iso.x, iso.u, np.clip(xq1, iso.x[0], iso.x[-1]))
    return float(vals[0]) if scalar else vals
