"""Initial data, initial Riemann variables, and the t=0 data curve.

Initial data is a piecewise-linear u0 (H^1 representative) and a piecewise-
constant u1 (L^2 representative) with compact support: outside the support
interval u0 is constant and u1 vanishes, so all energy densities vanish there
and cumulative integrals from -infinity are finite sums over cells.

Cumulative energies are integrated per smoothness cell with fixed-order
Gauss-Legendre quadrature: exact for the piecewise-polynomial densities of
constant-coefficient scenarios, machine-accurate for smooth coefficient
fields. No sampled quadrature grid enters the data curve itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .coeffs import CoefficientField, evaluate_derived
from .errors import VarwaveError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class InitialData:
    """Piecewise-linear u0 and piecewise-constant u1 with compact support.

    u1_values[i] holds on [u1_breakpoints[i], u1_breakpoints[i+1]); at any
    breakpoint the right-cell value is used (the convention is measure-zero
    irrelevant for integrals but keeps evaluation deterministic).
    """

    u0_breakpoints: np.ndarray
    u0_values: np.ndarray
    u1_breakpoints: np.ndarray
    u1_values: np.ndarray
    support: tuple

    def __post_init__(self):
        object.__setattr__(self, "u0_breakpoints", np.asarray(self.u0_breakpoints, dtype=float))
        object.__setattr__(self, "u0_values", np.asarray(self.u0_values, dtype=float))
        object.__setattr__(self, "u1_breakpoints", np.asarray(self.u1_breakpoints, dtype=float))
        object.__setattr__(self, "u1_values", np.asarray(self.u1_values, dtype=float))
        object.__setattr__(self, "support", (float(self.support[0]), float(self.support[1])))
        bp0, bp1 = self.u0_breakpoints, self.u1_breakpoints
        if bp0.size < 2 or self.u0_values.size != bp0.size:
            raise ValueError("u0 needs >= 2 breakpoints with matching values")
        if bp1.size < 2 or self.u1_values.size != bp1.size - 1:
            raise ValueError("u1 needs n+1 breakpoints for n cell values")
        if np.any(np.diff(bp0) <= 0) or np.any(np.diff(bp1) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        a, b = self.support
        if a > bp0[0] or b < bp0[-1] or a > bp1[0] or b < bp1[-1]:
            raise ValueError("support must contain all breakpoints")

    # -- pointwise evaluation (vectorized) ----------------------------------

    def u0(self, x):
        return np.interp(np.asarray(x, dtype=float), self.u0_breakpoints, self.u0_values)

    def u0x(self, x):
        """Slope of u0; at breakpoints the right-cell slope, zero outside."""
        x = np.asarray(x, dtype=float)
        bp, v = self.u0_breakpoints, self.u0_values
        slopes = np.diff(v) / np.diff(bp)
        idx = np.searchsorted(bp, x, side="right") - 1
        out = np.zeros(x.shape)
        ok = (idx >= 0) & (idx < slopes.size)
        out[ok] = slopes[idx[ok]]
        return out

    def u1(self, x):
        x = np.asarray(x, dtype=float)
        bp, v = self.u1_breakpoints, self.u1_values
        idx = np.searchsorted(bp, x, side="right") - 1
        out = np.zeros(x.shape)
        ok = (idx >= 0) & (idx < v.size)
        out[ok] = v[idx[ok]]
        return out

    @property
    def breakpoints(self) -> np.ndarray:
        """All smoothness-cell edges inside the support interval."""
        a, b = self.support
        edges = np.concatenate([[a, b], self.u0_breakpoints, self.u1_breakpoints])
        edges = np.unique(edges)
        return edges[(edges >= a) & (edges <= b)]

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "u0_breakpoints": self.u0_breakpoints.tolist(),
            "u0_values": self.u0_values.tolist(),
            "u1_breakpoints": self.u1_breakpoints.tolist(),
            "u1_values": self.u1_values.tolist(),
            "support": list(self.support),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InitialData":
        return cls(d["u0_breakpoints"], d["u0_values"],
                   d["u1_breakpoints"], d["u1_values"], tuple(d["support"]))

    @classmethod
    def from_json(cls, path) -> "InitialData":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def make_data(preset: str, **params) -> InitialData:
    """Initial-data presets.

    pulse       u0 = base constant, u1 = amplitude on (x0, x1)
    hat         u0 = symmetric hat of given height over [x0, x1], u1 = 0
    hat-steep   narrow hat on a constant background (gradient-blowup driver)
    gauss-like  piecewise-linear bump approximation with a resolution count
    """
    if preset == "pulse":
        x0 = float(params.get("x0", 0.0))
        x1 = float(params.get("x1", 1.0))
        amp = float(params.get("amplitude", 1.0))
        base = float(params.get("base", 0.0))
        return InitialData([x0, x1], [base, base], [x0, x1], [amp], (x0, x1))

    if preset in ("hat", "hat-steep"):
        if preset == "hat":
            x0 = float(params.get("x0", 0.0))
            x1 = float(params.get("x1", 0.8))
            height = float(params.get("height", 0.8))
            base = float(params.get("base", 0.0))
        else:
            width = float(params.get("width", 0.006))
            x0 = float(params.get("x0", 0.0))
            x1 = x0 + width
            height = float(params.get("height", 0.042))
            base = float(params.get("base", 0.7853981633974483))
        xm = 0.5 * (x0 + x1)
        return InitialData([x0, xm, x1], [base, base + height, base],
                           [x0, x1], [0.0], (x0, x1))

    if preset == "gauss-like":
        center = float(params.get("center", 0.0))
        width = float(params.get("width", 0.25))
        amp = float(params.get("amplitude", 0.5))
        base = float(params.get("base", 0.0))
        n = int(params.get("resolution", 33))
        if n < 5:
            raise ValueError("gauss-like needs resolution >= 5")
        xs = np.linspace(center - 4.0 * width, center + 4.0 * width, n)
        vals = base + amp * np.exp(-(((xs - center) / width) ** 2))
        return InitialData(xs, vals, [xs[0], xs[-1]], [0.0], (xs[0], xs[-1]))

    raise ValueError(f"unknown data preset: {preset!r}")


@dataclass
class RiemannState:
    """Riemann variables and directional energy densities at one physical point."""

    R: float
    S: float
    Rt2: float
    St2: float


def _riemann_arrays(field: CoefficientField, data: InitialData, x):
    """Vectorized t=0 Riemann variables: R = alpha*u1 + c2*u0x, S = alpha*u1 + c1*u0x,
    with densities Rt2 = (-c1/(c2-c1)) R^2 and St2 = (c2/(c2-c1)) S^2."""
    x = np.asarray(x, dtype=float)
    u0v = data.u0(x)
    dc = evaluate_derived(field, x, u0v)
    u0s = data.u0x(x)
    u1v = data.u1(x)
    R = dc.alpha * u1v + dc.c2 * u0s
    S = dc.alpha * u1v + dc.c1 * u0s
    gap = dc.gap
    rt2 = (-dc.c1 / gap) * R * R
    st2 = (dc.c2 / gap) * S * S
    return R, S, rt2, st2, dc, u0v


def riemann_init(field: CoefficientField, data: InitialData, x: float) -> RiemannState:
    """Initial Riemann state at position x (u0x taken from the right cell)."""
    R, S, rt2, st2, _, _ = _riemann_arrays(field, data, np.atleast_1d(x))
    return RiemannState(float(R[0]), float(S[0]), float(rt2[0]), float(st2[0]))


class CumulativeEnergy:
    """Cumulative directional energies of the t=0 data.

    cum_minus(x) = integral of Rt2(0, .) over (-inf, x], cum_plus likewise for
    St2. Integrals are assembled per smoothness cell with Gauss-Legendre
    quadrature and are exact for piecewise-polynomial densities.
    """

    def __init__(self, field: CoefficientField, data: InitialData):
        self.field = field
        self.data = data
        self.edges = data.breakpoints
        lo = self.edges[:-1]
        hi = self.edges[1:]
        half = 0.5 * (hi - lo)
        xq = 0.5 * (hi + lo)[None, :] + half[None, :] * _GL_NODES[:, None]
        R, S, rt2, st2, dc, _ = _riemann_arrays(field, data, xq)
        w = _GL_WEIGHTS[:, None] * half[None, :]
        cellR = np.sum(w * rt2, axis=0)
        cellS = np.sum(w * st2, axis=0)
        # energy density alpha^2 u1^2 + gamma^2 u0x^2, with gamma^2 = -c1 c2
        u1q = data.u1(xq)
        u0sq = data.u0x(xq)
        cellE = np.sum(w * (dc.alpha**2 * u1q**2 - dc.c1 * dc.c2 * u0sq**2), axis=0)
        self.prefixR = np.concatenate([[0.0], np.cumsum(cellR)])
        self.prefixS = np.concatenate([[0.0], np.cumsum(cellS)])
        self.total_energy_direct = float(np.sum(cellE))

    @property
    def total_minus(self) -> float:
        return float(self.prefixR[-1])

    @property
    def total_plus(self) -> float:
        return float(self.prefixS[-1])

    def _partial(self, x, which):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        prefix = self.prefixR if which == "minus" else self.prefixS
        out = np.empty(x.shape)
        below = x <= self.edges[0]
        above = x >= self.edges[-1]
        out[below] = 0.0
        out[above] = prefix[-1]
        mid = ~(below | above)
        if np.any(mid):
            xm = x[mid]
            idx = np.clip(np.searchsorted(self.edges, xm, side="right") - 1,
                          0, self.edges.size - 2)
            lo = self.edges[idx]
            half = 0.5 * (xm - lo)
            xq = 0.5 * (xm + lo)[None, :] + half[None, :] * _GL_NODES[:, None]
            _, _, rt2, st2, _, _ = _riemann_arrays(self.field, self.data, xq)
            dens = rt2 if which == "minus" else st2
            part = np.sum(_GL_WEIGHTS[:, None] * half[None, :] * dens, axis=0)
            out[mid] = prefix[idx] + part
        return float(out[0]) if scalar else out

    def cum_minus(self, x):
        return self._partial(x, "minus")

    def cum_plus(self, x):
        return self._partial(x, "plus")

    def X_of(self, x):
        return np.asarray(x, dtype=float) + self.cum_minus(x)

    def Y_of(self, x):
        return np.asarray(x, dtype=float) + self.cum_plus(x)

    def _invert(self, target, which):
        """Solve x + cum(x) = target; the map has slope 1 + density >= 1."""
        target = np.asarray(target, dtype=float)
        scalar = target.ndim == 0
        t = np.atleast_1d(target).astype(float)
        prefix = self.prefixR if which == "minus" else self.prefixS
        edge_vals = self.edges + prefix
        x = np.empty(t.shape)
        below = t <= edge_vals[0]
        above = t >= edge_vals[-1]
        x[below] = t[below]
        x[above] = t[above] - prefix[-1]
        mid = ~(below | above)
        if np.any(mid):
            tm = t[mid]
            idx = np.clip(np.searchsorted(edge_vals, tm, side="right") - 1,
                          0, self.edges.size - 2)
            lo, hi = self.edges[idx], self.edges[idx + 1]
            frac = (tm - edge_vals[idx]) / (edge_vals[idx + 1] - edge_vals[idx])
            xk = lo + frac * (hi - lo)
            cum = self.cum_minus if which == "minus" else self.cum_plus
            for _ in range(60):
                fval = xk + cum(xk) - tm
                if np.all(np.abs(fval) <= 1e-13 * np.maximum(1.0, np.abs(tm))):
                    break
                _, _, rt2, st2, _, _ = _riemann_arrays(self.field, self.data, xk)
                dens = rt2 if which == "minus" else st2
                xk = np.clip(xk - fval / (1.0 + dens), lo, hi)
            x[mid] = xk
        return float(x[0]) if scalar else x

    def x_from_X(self, X):
        return self._invert(X, "minus")

    def x_from_Y(self, Y):
        return self._invert(Y, "plus")


def cumulative_coords(field: CoefficientField, data: InitialData, x):
    """Energy coordinates of the t=0 line: X(x) = x + cum Rt2, Y(x) = x + cum St2."""
    cum = CumulativeEnergy(field, data)
    return cum.X_of(x), cum.Y_of(x)


def total_initial_energy(field: CoefficientField, data: InitialData) -> float:
    """Total energy E0, computed both as the (alpha^2 u1^2 + gamma^2 u0x^2)
    integral and as the sum of directional energies; the two must agree."""
    cum = CumulativeEnergy(field, data)
    e_direct = cum.total_energy_direct
    e_split = cum.total_minus + cum.total_plus
    if abs(e_direct - e_split) > 1e-10 * max(1.0, abs(e_direct)):
        raise VarwaveError(
            f"energy identity violated: {e_direct!r} vs {e_split!r}"
        )
    return e_split


@dataclass
class BoundaryCurve:
    """The t=0 data curve in the (X, Y) plane with its boundary records.

    Sampled records are kept for export and inspection; the exact per-parameter
    evaluators (through `cum` and the stored field/data) are what the lattice
    solver consumes, so boundary data carries no sampling error. Outside the
    sampled parameter range the data is constant-state and the evaluators
    remain exact.
    """

    x: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    u: np.ndarray
    p: np.ndarray
    q: np.ndarray
    sigma: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    t: np.ndarray
    field: CoefficientField = dc_field(repr=False, default=None)
    data: InitialData = dc_field(repr=False, default=None)
    cum: CumulativeEnergy = dc_field(repr=False, default=None)
    E0: float = 0.0

    def eval_exact(self, params):
        """All boundary fields at arbitrary curve parameters (vectorized)."""
        params = np.asarray(params, dtype=float)
        R, S, rt2, st2, _, u0v = _riemann_arrays(self.field, self.data, params)
        ones = np.ones(params.shape)
        return {
            "x": params,
            "X": params + self.cum.cum_minus(params),
            "Y": params + self.cum.cum_plus(params),
            "u": u0v,
            "p": ones,
            "q": ones.copy(),
            "sigma": 1.0 / (1.0 + rt2),
            "eta": 1.0 / (1.0 + st2),
            "xi": R / (1.0 + rt2),
            "zeta": S / (1.0 + st2),
            "t": np.zeros(params.shape),
            "R": R,
            "S": S,
            "Rt2": rt2,
            "St2": st2,
        }

    def as_records(self) -> np.ndarray:
        names = ["x", "X", "Y", "u", "p", "q", "sigma", "eta", "xi", "zeta", "t"]
        rec = np.zeros(self.x.size, dtype=[(n, float) for n in names])
        for n in names:
            rec[n] = getattr(self, n)
        return rec


def build_boundary_curve(field: CoefficientField, data: InitialData,
                         resolution: int, pad: float = 1.0) -> BoundaryCurve:
    """Sample the data curve at `resolution` points plus every breakpoint.

    The parameter window is the support widened by `pad` on each side; beyond
    it the curve continues as exact constant state.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    a, b = data.support
    params = np.unique(np.concatenate([
        np.linspace(a - pad, b + pad, int(resolution)),
        data.breakpoints,
    ]))
    cum = CumulativeEnergy(field, data)
    e_total = total_initial_energy(field, data)
    curve = BoundaryCurve(
        x=params, X=None, Y=None, u=None, p=None, q=None,
        sigma=None, eta=None, xi=None, zeta=None, t=None,
        field=field, data=data, cum=cum, E0=e_total,
    )
    vals = curve.eval_exact(params)
    for k in ("X", "Y", "u", "p", "q", "sigma", "eta", "xi", "zeta", "t"):
        setattr(curve, k, vals[k])
    if np.any(np.diff(curve.X) <= 0.0) or np.any(np.diff(curve.Y) <= 0.0):
        raise VarwaveError("boundary curve coordinates are not strictly increasing")
    return curve
