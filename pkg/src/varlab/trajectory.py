"""Piecewise-linear trajectories on non-uniform meshes.

A trajectory is a continuous PL map from a strictly increasing mesh into R^d.
Its derivative is the per-cell slope, constant on each open cell and
deliberately two-valued at nodes: callers must say which side they mean,
because the objects studied here have genuine one-sided derivatives.

Optional *charts* attach sub-resolution detail near singular anchor times:
a chart stores tiny positive offsets from its anchor together with the value
increments relative to the anchor value (storing absolute values would lose
everything to rounding, since w(x+s) - w(x) can be ~1e-150 while w(x) is
order 1).

Level sets of the chord-slope inequality ||v(s) - v(t)|| > m|s - t| are exact
for PL data: per cell the defining expression is a quadratic in s whose roots
are solved in closed form.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PLTrajectory",
    "Chart",
    "LevelSetReport",
    "DiniScan",
    "ChartMismatchError",
    "DomainMismatchError",
    "level_set",
    "dini_scan",
    "approx_continuity_profile",
    "norms",
    "hat",
    "from_function",
]


class ChartMismatchError(ValueError):
    """Merged-mesh operation over incompatible charts."""


class DomainMismatchError(ValueError):
    """Operation on trajectories with different domains."""


@dataclass(frozen=True)
class Chart:
    """Sub-resolution refinement near a singular anchor.

    offsets are positive, strictly increasing, and may reach down to 1e-300;
    deltas[i] = v(anchor +/- offsets[i]) - v(anchor) on the given side
    (side +1: right offsets, -1: left).
    """

    anchor: float
    side: int
    offsets: np.ndarray  # shape (k,)
    deltas: np.ndarray  # shape (k, d)

    def __post_init__(self):
        object.__setattr__(self, "offsets", np.asarray(self.offsets, dtype=float))
        object.__setattr__(self, "deltas", np.atleast_2d(np.asarray(self.deltas, dtype=float)))
        if self.offsets.ndim != 1 or np.any(self.offsets <= 0) or np.any(np.diff(self.offsets) <= 0):
            raise ValueError("chart offsets must be positive and strictly increasing")
        if self.side not in (-1, 1):
            raise ValueError("chart side must be +1 or -1")
        if self.deltas.shape[0] != self.offsets.shape[0]:
            raise ValueError("chart deltas/offsets length mismatch")


class PLTrajectory:
    """Continuous piecewise-linear function on [mesh[0], mesh[-1]] into R^d."""

    def __init__(self, mesh, values, charts: list[Chart] | None = None):
        mesh = np.array(mesh, dtype=float)
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if mesh.ndim != 1 or len(mesh) < 2:
            raise ValueError("mesh needs at least two nodes")
        if np.any(np.diff(mesh) <= 0):
            raise ValueError("mesh must be strictly increasing")
        if values.shape[0] != mesh.shape[0]:
            raise ValueError("one value per mesh node required")
        self.mesh = mesh
        self.values = values
        self.charts = list(charts or [])
        self.mesh.setflags(write=False)
        self.values.setflags(write=False)

    # -- basic queries -------------------------------------------------------
    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def a(self) -> float:
        return float(self.mesh[0])

    @property
    def b(self) -> float:
        return float(self.mesh[-1])

    @property
    def slopes(self) -> np.ndarray:
        """Per-cell slope vectors, shape (ncells, d)."""
        return np.diff(self.values, axis=0) / np.diff(self.mesh)[:, None]

    def scalar(self) -> bool:
        return self.d == 1

    def __eq__(self, other):
        return (
            isinstance(other, PLTrajectory)
            and np.array_equal(self.mesh, other.mesh)
            and np.array_equal(self.values, other.values)
        )

    # -- evaluation ------------------------------------------------------------
    def eval(self, t):
        """Linear interpolation; exact at nodes.  Vectorized over t."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.mesh[0]) or np.any(t_arr > self.mesh[-1]):
            raise DomainMismatchError("evaluation outside trajectory domain")
        out = np.empty(t_arr.shape + (self.d,))
        for j in range(self.d):
            out[..., j] = np.interp(t_arr, self.mesh, self.values[:, j])
        if np.ndim(t) == 0:
            v = out.reshape(self.d)
            return float(v[0]) if self.d == 1 else v
        return out[..., 0] if self.d == 1 else out

    def cell_index(self, t: float, side: int = 1) -> int:
        """Index of the cell whose open interior (or given side of a node) holds t."""
        if not (self.mesh[0] <= t <= self.mesh[-1]):
            raise DomainMismatchError("t outside domain")
        i = int(np.searchsorted(self.mesh, t, side="right")) - 1
        i = min(max(i, 0), len(self.mesh) - 2)
        if t == self.mesh[i] and side < 0 and i > 0:
            i -= 1
        if t == self.mesh[-1]:
            i = len(self.mesh) - 2
        return i

    def slope(self, t: float, side: int = 1):
        """Cell slope at t; at a node the side parameter resolves the cell."""
        i = self.cell_index(t, side)
        s = self.slopes[i]
        return float(s[0]) if self.d == 1 else s.copy()

    def chart_at(self, t: float, side: int) -> Chart | None:
        for c in self.charts:
            if c.anchor == t and c.side == side:
                return c
        return None

    # -- editing (returns new objects; trajectories are immutable) -----------
    def with_chart(self, chart: Chart) -> "PLTrajectory":
        return PLTrajectory(self.mesh, self.values, self.charts + [chart])

    def replace_window(self, t0: float, t1: float, interior_mesh, interior_values) -> "PLTrajectory":
        """New trajectory equal to self off [t0, t1], PL-prescribed inside."""
        keep_left = self.mesh < t0
        keep_right = self.mesh > t1
        interior_mesh = np.asarray(interior_mesh, dtype=float)
        interior_values = np.asarray(interior_values, dtype=float).reshape(-1, self.d)
        mesh = np.concatenate(
            [self.mesh[keep_left], [t0], interior_mesh, [t1], self.mesh[keep_right]]
        )
        vals = np.concatenate(
            [
                self.values[keep_left],
                np.atleast_1d(self.eval(t0)).reshape(1, self.d),
                interior_values,
                np.atleast_1d(self.eval(t1)).reshape(1, self.d),
                self.values[keep_right],
            ]
        )
        mesh, idx = np.unique(mesh, return_index=True)
        return PLTrajectory(mesh, vals[idx])

    def refined(self, extra_nodes) -> "PLTrajectory":
        """Union-mesh refinement; leaves eval invariant."""
        extra = np.asarray(extra_nodes, dtype=float)
        extra = extra[(extra >= self.a) & (extra <= self.b)]
        mesh = np.unique(np.concatenate([self.mesh, extra]))
        return PLTrajectory(mesh, self.eval(mesh).reshape(len(mesh), self.d), self.charts)

    # -- serialization -----------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "d": self.d,
            "mesh": self.mesh.tolist(),
            "values": self.values.tolist(),
            "charts": [
                {
                    "anchor": c.anchor,
                    "side": c.side,
                    "offsets": c.offsets.tolist(),
                    "values": c.deltas.tolist(),
                }
                for c in self.charts
            ],
        }

    @staticmethod
    def from_json(d: dict) -> "PLTrajectory":
        charts = [
            Chart(c["anchor"], c.get("side", 1), np.array(c["offsets"]), np.array(c["values"]))
            for c in d.get("charts", [])
        ]
        return PLTrajectory(np.array(d["mesh"]), np.array(d["values"]), charts)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["t"] + [f"v{j + 1}" for j in range(self.d)])
        for t, row in zip(self.mesh, self.values):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in row])
        return buf.getvalue()

    def __repr__(self):
        return f"PLTrajectory(d={self.d}, nodes={len(self.mesh)}, [{self.a}, {self.b}])"


def from_function(f, mesh) -> PLTrajectory:
    """Sample a callable into a PL trajectory on the given mesh."""
    mesh = np.asarray(mesh, dtype=float)
    vals = np.array([f(float(t)) for t in mesh], dtype=float)
    return PLTrajectory(mesh, vals)


def affine(a: float, b: float, A, B) -> PLTrajectory:
    return PLTrajectory(np.array([a, b]), np.array([np.atleast_1d(A), np.atleast_1d(B)], dtype=float))


def hat(center: float, halfwidth: float, height: float, a: float, b: float) -> PLTrajectory:
    """Hat supported on (center - halfwidth, center + halfwidth), clipped to [a, b]."""
    lo = max(a, center - halfwidth)
    hi = min(b, center + halfwidth)
    mesh = np.unique(np.array([a, lo, center, hi, b]))
    vals = np.where(mesh == center, height, 0.0)
    if center in (a, b):
        raise ValueError("hat center must be interior")
    return PLTrajectory(mesh, vals)


# ---------------------------------------------------------------------------
# level sets of the chord-slope inequality
# ---------------------------------------------------------------------------

@dataclass
class LevelSetReport:
    base_point: float
    slope_bound: float
    components: list
    measure: float


def level_set(traj: PLTrajectory, s0: float, m: float) -> LevelSetReport:
    """Exact E_{s0} = {s : ||v(s) - v(s0)|| > m |s - s0|} for PL v.

    Per cell, q(s) = ||v(s) - v(s0)||^2 - m^2 (s - s0)^2 is a quadratic with
    closed-form roots; the report's components are the maximal open intervals
    of positivity.
    """
    if not (traj.a < s0 < traj.b):
        raise ValueError("base point must be interior")
    if m <= 0:
        raise ValueError("need m > 0")
    v0 = np.atleast_1d(traj.eval(s0)).reshape(traj.d)
    mesh, values = traj.mesh, traj.values
    pieces = []
    for i in range(len(mesh) - 1):
        t0, t1 = float(mesh[i]), float(mesh[i + 1])
        p = traj.slopes[i]
        w0 = values[i] - v0  # v(s) - v(s0) = w0 + p (s - t0)
        dt = t0 - s0
        a2 = float(p @ p) - m * m
        a1 = 2.0 * (float(w0 @ p) - m * m * dt)
        a0 = float(w0 @ w0) - m * m * dt * dt
        for lo, hi in _quad_positive_set(a2, a1, a0, 0.0, t1 - t0):
            lo = _polish_root(w0, p, m, dt, lo, 0.0, t1 - t0)
            hi = _polish_root(w0, p, m, dt, hi, 0.0, t1 - t0)
            if hi > lo:
                pieces.append((t0 + lo, t0 + hi))
    # merge pieces that touch at an interior node where q > 0
    comps: list[list[float]] = []
    for lo, hi in sorted(pieces):
        if comps and lo <= comps[-1][1] + 0.0:
            touching = lo == comps[-1][1]
            val = _q_value(traj, v0, m, s0, lo)
            if (touching and val > 0.0) or lo < comps[-1][1]:
                comps[-1][1] = max(comps[-1][1], hi)
                continue
        comps.append([lo, hi])
    comps2 = [(lo, hi) for lo, hi in comps if hi > lo]
    measure = float(sum(hi - lo for lo, hi in comps2))
    return LevelSetReport(s0, m, comps2, measure)


def _polish_root(w0, p, m, dt, u, ulo, uhi):
    """Newton-polish a root of ||w0 + p u|| - m|u + dt| inside the cell.

    Closed-form quadratic roots lose half the digits near tangency; two Newton
    steps on the un-squared function restore the 1e-12 endpoint identity.
    """
    if u in (ulo, uhi):
        return u
    for _ in range(3):
        w = w0 + p * u
        nw = math.sqrt(float(w @ w))
        f = nw - m * abs(u + dt)
        if nw == 0.0 or u + dt == 0.0:
            break
        fp = float(p @ w) / nw - m * math.copysign(1.0, u + dt)
        if fp == 0.0:
            break
        step = f / fp
        u2 = min(max(u - step, ulo), uhi)
        if u2 == u:
            break
        u = u2
    return u


def _q_value(traj, v0, m, s0, s):
    dv = np.atleast_1d(traj.eval(s)).reshape(traj.d) - v0
    return float(dv @ dv) - m * m * (s - s0) ** 2


def _quad_positive_set(a2, a1, a0, lo, hi):
    """{u in [lo, hi] : a2 u^2 + a1 u + a0 > 0} as a list of intervals."""
    if a2 == 0.0 and a1 == 0.0:
        return [(lo, hi)] if a0 > 0.0 else []
    if a2 == 0.0:
        r = -a0 / a1
        if a1 > 0:
            lo2 = max(lo, r)
            return [(lo2, hi)] if hi > lo2 else []
        hi2 = min(hi, r)
        return [(lo, hi2)] if hi2 > lo else []
    disc = a1 * a1 - 4.0 * a2 * a0
    if disc < 0.0:
        return [(lo, hi)] if a2 > 0.0 else []
    if disc == 0.0:
        if a2 < 0.0:
            return []
        r = -a1 / (2.0 * a2)  # positive everywhere except the double root
        segs = [(lo, min(hi, r)), (max(lo, r), hi)]
        return [(x, y) for x, y in segs if y > x]
    sq = math.sqrt(disc)
    if a1 >= 0:
        r1 = (-a1 - sq) / (2.0 * a2)
    else:
        r1 = (-a1 + sq) / (2.0 * a2)
    r2 = (a0 / (a2 * r1)) if r1 != 0.0 else (-a1 / a2 - r1)
    r1, r2 = min(r1, r2), max(r1, r2)
    if a2 > 0:
        segs = [(lo, min(hi, r1)), (max(lo, r2), hi)]
    else:
        segs = [(max(lo, r1), min(hi, r2))]
    return [(x, y) for x, y in segs if y > x]


# ---------------------------------------------------------------------------
# Dini scans
# ---------------------------------------------------------------------------

@dataclass
class DiniEstimate:
    value: float | None  # None when flagged infinite / unsampled
    infinite: int  # 0 finite, +1 diverges up, -1 down, 2 oscillates unboundedly


@dataclass
class DiniScan:
    point: float
    side: str
    offsets: np.ndarray
    quotients: np.ndarray  # (k, d); rows follow offsets (signed offsets)
    upper: list  # per component: limsup estimate over the sampled cloud
    lower: list
    right: list  # one-sided limit estimates
    left: list


def _limit_estimate(qs: np.ndarray, ceiling: float) -> DiniEstimate:
    if len(qs) == 0:
        return DiniEstimate(None, 0)
    tail = qs[-min(len(qs), 8):]
    hi, lo = float(np.max(tail)), float(np.min(tail))
    if lo > ceiling:
        return DiniEstimate(None, 1)
    if hi < -ceiling:
        return DiniEstimate(None, -1)
    if hi > ceiling and lo < -ceiling:
        return DiniEstimate(None, 2)
    return DiniEstimate(float(qs[-1]), 0)


def _limsup_estimate(qs: np.ndarray, ceiling: float) -> DiniEstimate:
    if len(qs) == 0:
        return DiniEstimate(None, 0)
    hi = float(np.max(qs))
    return DiniEstimate(None, 1) if hi > ceiling else DiniEstimate(hi, 0)


def dini_scan(traj: PLTrajectory, t: float, offsets, side: str = "both",
              ceiling: float = 1e6) -> DiniScan:
    """Difference-quotient table and Dini-derivative estimates at t.

    All estimates are statements about the sampled scales; divergence is a
    flag, never a float infinity.  Chart data at t, when present, supplies the
    sub-resolution quotients.
    """
    offsets = np.asarray(offsets, dtype=float)
    if np.any(offsets <= 0) or (len(offsets) > 1 and np.any(np.diff(offsets) >= 0)):
        raise ValueError("offsets must be positive and strictly decreasing")
    if not (traj.a < t < traj.b):
        raise ValueError("t must be interior")
    v0 = np.atleast_1d(traj.eval(t)).reshape(traj.d)

    def quotients_for(sgn: int):
        chart = traj.chart_at(t, sgn)
        rows = []
        for h in offsets:
            s = t + sgn * h
            if chart is not None and h <= chart.offsets[-1] * (1 + 1e-12):
                delta = _chart_delta(chart, h)
                rows.append((sgn * h, delta / (sgn * h)))
            elif traj.a <= s <= traj.b and s != t:
                q = (np.atleast_1d(traj.eval(s)).reshape(traj.d) - v0) / (sgn * h)
                rows.append((sgn * h, q))
        return rows

    rows = []
    if side in ("right", "both"):
        rows += quotients_for(+1)
    if side in ("left", "both"):
        rows += quotients_for(-1)
    offs = np.array([r[0] for r in rows])
    quots = np.array([r[1] for r in rows]).reshape(-1, traj.d)

    upper, lower, right_est, left_est = [], [], [], []
    for j in range(traj.d):
        pooled = quots[:, j]
        upper.append(_limsup_estimate(pooled, ceiling))
        neg = _limsup_estimate(-pooled, ceiling)
        lower.append(DiniEstimate(None if neg.value is None else -neg.value, -neg.infinite))
        r = np.array([q[j] for o, q in rows if o > 0])
        l = np.array([q[j] for o, q in rows if o < 0])
        right_est.append(_limit_estimate(r, ceiling) if len(r) else DiniEstimate(None, 0))
        left_est.append(_limit_estimate(l, ceiling) if len(l) else DiniEstimate(None, 0))
    return DiniScan(t, side, offs, quots, upper, lower, right_est, left_est)


def _chart_delta(chart: Chart, h: float) -> np.ndarray:
    """Value increment at offset h from the chart.

    The difference quotient delta/offset varies slowly across decades while
    the delta itself spans them, so interpolation happens on the quotient,
    linearly in log-offset.
    """
    i = int(np.searchsorted(chart.offsets, h))
    if i < len(chart.offsets) and chart.offsets[i] == h:
        return chart.deltas[i]
    if i == 0:
        return chart.deltas[0] * (h / chart.offsets[0])
    if i == len(chart.offsets):
        return chart.deltas[-1]
    lo, hi = chart.offsets[i - 1], chart.offsets[i]
    q_lo = chart.deltas[i - 1] / lo
    q_hi = chart.deltas[i] / hi
    w = (math.log(h) - math.log(lo)) / (math.log(hi) - math.log(lo))
    return (q_lo * (1 - w) + q_hi * w) * h


# ---------------------------------------------------------------------------
# approximate continuity of the derivative
# ---------------------------------------------------------------------------

def approx_continuity_profile(traj: PLTrajectory, t: float, c: float,
                              side: str = "right", scales=None):
    """Exact fractions of (t, t +/- s) where the slope differs from slope(t) by >= c.

    Returns [(s, fraction)]; fractions are exact ratios of cell lengths.
    """
    if scales is None:
        scales = [2.0**-j for j in range(1, 20)]
    ref_side = 1 if side in ("right", "both") else -1
    ref = np.atleast_1d(traj.slope(t, side=ref_side)).reshape(traj.d)
    bad_cells = np.linalg.norm(traj.slopes - ref[None, :], axis=1) >= c
    out = []
    for s in scales:
        windows = []
        if side in ("right", "both"):
            windows.append((t, min(t + s, traj.b)))
        if side in ("left", "both"):
            windows.append((max(t - s, traj.a), t))
        total = sum(hi - lo for lo, hi in windows)
        bad = 0.0
        for lo, hi in windows:
            i0 = traj.cell_index(lo, side=1)
            i1 = traj.cell_index(hi, side=-1)
            for i in range(i0, i1 + 1):
                if not bad_cells[i]:
                    continue
                cl = max(lo, float(traj.mesh[i]))
                ch = min(hi, float(traj.mesh[i + 1]))
                if ch > cl:
                    bad += ch - cl
        out.append((float(s), bad / total if total > 0 else 0.0))
    return out


# ---------------------------------------------------------------------------
# norms of differences
# ---------------------------------------------------------------------------

def _check_charts_compatible(u: PLTrajectory, v: PLTrajectory):
    au = {(c.anchor, c.side) for c in u.charts}
    av = {(c.anchor, c.side) for c in v.charts}
    if not au and not av:
        return
    if au != av:
        raise ChartMismatchError("trajectories carry charts at different anchors")
    for key in au:
        cu = next(c for c in u.charts if (c.anchor, c.side) == key)
        cv = next(c for c in v.charts if (c.anchor, c.side) == key)
        if not np.array_equal(cu.offsets, cv.offsets):
            raise ChartMismatchError(f"chart offsets differ at anchor {key!r}")


def norms(u: PLTrajectory, v: PLTrajectory) -> tuple[float, float, float]:
    """(sup |u - v|, L1 of slope diff, L2 of slope diff), exact on the union mesh."""
    if u.a != v.a or u.b != v.b or u.d != v.d:
        raise DomainMismatchError("trajectories live on different domains")
    _check_charts_compatible(u, v)
    mesh = np.unique(np.concatenate([u.mesh, v.mesh]))
    du = u.eval(mesh).reshape(len(mesh), u.d)
    dv = v.eval(mesh).reshape(len(mesh), v.d)
    diff = du - dv
    sup = float(np.max(np.linalg.norm(diff, axis=1)))
    for cu in u.charts:
        cv = next(c for c in v.charts if (c.anchor, c.side) == (cu.anchor, cu.side))
        anchor_diff = (np.atleast_1d(u.eval(cu.anchor)) - np.atleast_1d(v.eval(cv.anchor))).reshape(u.d)
        sup = max(sup, float(np.max(np.linalg.norm(anchor_diff[None, :] + cu.deltas - cv.deltas, axis=1))))
    dt = np.diff(mesh)
    su = np.diff(du, axis=0) / dt[:, None]
    sv = np.diff(dv, axis=0) / dt[:, None]
    dn = np.linalg.norm(su - sv, axis=1)
    l1 = float(np.sum(dn * dt))
    l2 = float(math.sqrt(np.sum(dn * dn * dt)))
    return sup, l1, l2
