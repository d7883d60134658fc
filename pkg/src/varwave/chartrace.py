"""Tracing single characteristics in their energy parameterization.

A backward characteristic is followed through its energy coordinate w with
dw/dt = lambda_-(x, u) + int_-inf^x G dx, recovering the position by inverting
the monotone map x -> x + mu-((-inf, x]) on the current time slice; forward
characteristics mirror this with lambda_+ and the opposite source sign. The
provider abstraction lets the same tracer run against the characteristic grid
or the finite-difference oracle, so the two can be cross-checked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coeffs import evaluate_derived
from .errors import MismatchedStart, OutOfDomain, ProviderGap
from .goursat import IT, IX, CharGrid
from . import physmap


@dataclass
class _Slice:
    """Per-time data a tracer needs: monotone coordinate maps and source prefix."""

    t: float
    x: np.ndarray
    u: np.ndarray
    m_minus: np.ndarray   # x + mu-((-inf, x])
    m_plus: np.ndarray
    G_prefix: np.ndarray  # int_-inf^x G


class GridProvider:
    """Adapter over a solved characteristic grid."""

    name = "grid"

    def __init__(self, grid: CharGrid):
        self.grid = grid
        self.field = grid.field_ref
        self._cache = {}

    def slice_at(self, t: float) -> _Slice:
        key = round(float(t), 12)
        if key in self._cache:
            return self._cache[key]
        if t < 0.0 or t > self.grid.max_t:
            raise ProviderGap(f"grid has no data at t = {t}")
        iso = physmap.isochrone_at(self.grid, float(t))
        from .diagnostics import _source_pointwise

        G = _source_pointwise(iso, self.field)
        gp = np.concatenate([[0.0], np.cumsum(0.5 * (G[1:] + G[:-1]) * np.diff(iso.x))])
        sl = _Slice(t=float(t), x=iso.x, u=iso.u,
                    m_minus=iso.x + iso.mu_minus_cum,
                    m_plus=iso.x + iso.mu_plus_cum,
                    G_prefix=gp)
        self._cache[key] = sl
        return sl


class OracleProvider:
    """Adapter over finite-difference snapshots (exact time matches only)."""

    name = "oracle"

    def __init__(self, states: list, field):
        self.field = field
        self._by_time = {round(s.t, 9): s for s in states}

    def slice_at(self, t: float) -> _Slice:
        key = round(float(t), 9)
        if key not in self._by_time:
            raise ProviderGap(f"no oracle snapshot at t = {t}")
        st = self._by_time[key]
        dc = evaluate_derived(self.field, st.xs, st.u)
        gap = dc.gap
        rt2 = (-dc.c1 / gap) * st.R**2
        st2 = (dc.c2 / gap) * st.S**2
        G = (2.0 * dc.c2 * dc.a1 * st.R**2 * st.S
             - 2.0 * dc.c1 * dc.a2 * st.R * st.S**2
             - 2.0 * dc.c1 * dc.c2 * dc.b * st.R * st.S) / (dc.alpha * gap)
        dxs = np.diff(st.xs)
        cum_m = np.concatenate([[0.0], np.cumsum(0.5 * (rt2[1:] + rt2[:-1]) * dxs)])
        cum_p = np.concatenate([[0.0], np.cumsum(0.5 * (st2[1:] + st2[:-1]) * dxs)])
        gp = np.concatenate([[0.0], np.cumsum(0.5 * (G[1:] + G[:-1]) * dxs)])
        return _Slice(t=float(t), x=st.xs, u=st.u,
                      m_minus=st.xs + cum_m, m_plus=st.xs + cum_p, G_prefix=gp)


@dataclass
class CharPath:
    """A traced characteristic: times, energy coordinate, position."""

    family: str            # "backward" | "forward"
    y_bar: float
    t: np.ndarray
    coord: np.ndarray      # w (backward) or v (forward)
    x: np.ndarray
    source: str

    def speed_range(self):
        dt = np.diff(self.t)
        dx = np.diff(self.x)
        sp = np.abs(dx / dt)
        return float(np.min(sp)), float(np.max(sp))

    def export_rows(self) -> np.ndarray:
        rec = np.zeros(self.t.size, dtype=[("t", float), ("coord", float), ("x", float)])
        rec["t"], rec["coord"], rec["x"] = self.t, self.coord, self.x
        return rec


def _eval_rate(provider, sl: _Slice, coord: float, family: str):
    m = sl.m_minus if family == "backward" else sl.m_plus
    if coord < m[0] - 1e-9 or coord > m[-1] + 1e-9:
        raise OutOfDomain(f"energy coordinate {coord:.6g} outside slice at t = {sl.t}")
    x = float(physmap.interp_monotone(m, sl.x, coord))
    u = float(physmap.interp_monotone(sl.x, sl.u, x))
    dc = evaluate_derived(provider.field, np.atleast_1d(x), np.atleast_1d(u))
    lam = float((dc.lambda_minus if family == "backward" else dc.lambda_plus).ravel()[0])
    src = float(physmap.interp_monotone(sl.x, sl.G_prefix, x))
    rate = lam + src if family == "backward" else lam - src
    return rate, x


def trace_characteristic(provider, family: str, y_bar: float, T: float,
                         dt: float) -> CharPath:
    """Integrate the energy-coordinate equation with Heun's method.

    The initial coordinate is y_bar plus the cumulative directional energy of
    the initial data up to y_bar, read off the t=0 slice.
    """
    if family not in ("backward", "forward"):
        raise ValueError("family must be 'backward' or 'forward'")
    if dt <= 0.0 or T <= 0.0:
        raise ValueError("need positive T and dt")
    sl0 = provider.slice_at(0.0)
    m0 = sl0.m_minus if family == "backward" else sl0.m_plus
    coord = float(physmap.interp_monotone(sl0.x, m0, y_bar))
    _, x0 = _eval_rate(provider, sl0, coord, family)

    ts = [0.0]
    coords = [coord]
    xs = [x0]
    t = 0.0
    while t < T - 1e-12:
        step = min(dt, T - t)
        sl_a = provider.slice_at(t)
        k1, _ = _eval_rate(provider, sl_a, coord, family)
        sl_b = provider.slice_at(t + step)
        k2, _ = _eval_rate(provider, sl_b, coord + step * k1, family)
        coord = coord + 0.5 * step * (k1 + k2)
        t = t + step
        _, x = _eval_rate(provider, sl_b, coord, family)
        ts.append(t)
        coords.append(coord)
        xs.append(x)
    return CharPath(family=family, y_bar=float(y_bar), t=np.asarray(ts),
                    coord=np.asarray(coords), x=np.asarray(xs),
                    source=provider.name)


@dataclass
class GridlineComparison:
    family: str
    y_bar: float
    column_or_row: int
    sup_distance: float
    n_times: int


def grid_param_for_column(grid: CharGrid, i: int) -> float:
    """Curve parameter whose backward label equals lattice column i."""
    return float(grid.curve_ref.cum.x_from_X(float(grid.X_axis[i])))


def grid_param_for_row(grid: CharGrid, j: int) -> float:
    """Curve parameter whose forward label equals lattice row j (internal index)."""
    return float(grid.curve_ref.cum.x_from_Y(float(grid.y_geo(j))))


def _row_samples(grid: CharGrid, j: int):
    ts, xs = [], []
    for i in range(grid.nA):
        lo = int(grid.j_lo[i])
        if lo <= j < lo + int(grid.n_rows[i]):
            k = grid.col_ptr[i] + (j - lo)
            ts.append(grid.fields[IT, k])
            xs.append(grid.fields[IX, k])
    return np.asarray(ts), np.asarray(xs)


def compare_with_gridline(grid: CharGrid, path: CharPath) -> GridlineComparison:
    """Sup distance in x between a traced path and the matching lattice line.

    Backward paths compare against the column with A = X(y_bar); forward paths
    against the row with geometric Y = Y(y_bar). The start must sit on a
    lattice line to within half a cell.
    """
    cum = grid.curve_ref.cum
    if path.family == "backward":
        A = float(cum.X_of(path.y_bar))
        i = int(round((A - grid.X_axis[0]) / grid.h))
        if not (0 <= i < grid.nA) or abs(grid.X_axis[i] - A) > 0.5 * grid.h * (1 + 1e-9):
            raise MismatchedStart(f"X(y_bar) = {A:.6g} is not a lattice column")
        _, blk, _ = grid.column(i)
        ts = np.concatenate([[0.0], blk[IT]])
        xs = np.concatenate([[path.y_bar], blk[IX]])
        line_idx = i
    else:
        Y = float(cum.Y_of(path.y_bar))
        B = grid.orientation * Y
        j = int(round((B - grid.B_axis[0]) / grid.h))
        if not (0 <= j < grid.B_axis.size) or abs(grid.B_axis[j] - B) > 0.5 * grid.h * (1 + 1e-9):
            raise MismatchedStart(f"Y(y_bar) = {Y:.6g} is not a lattice row")
        ts, xs = _row_samples(grid, j)
        ts = np.concatenate([[0.0], ts])
        xs = np.concatenate([[path.y_bar], xs])
        order = np.argsort(ts)
        ts, xs = ts[order], xs[order]
        line_idx = j
    t_hi = float(ts[-1])
    sel = path.t <= t_hi + 1e-12
    if not np.any(sel):
        raise MismatchedStart("no overlapping times between path and grid line")
    x_line = physmap.interp_monotone(ts, xs, np.clip(path.t[sel], ts[0], t_hi))
    sup = float(np.max(np.abs(x_line - path.x[sel])))
    return GridlineComparison(path.family, path.y_bar, line_idx, sup, int(np.sum(sel)))
