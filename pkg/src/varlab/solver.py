"""Direct-method minimization over discretized trajectory classes.

Two engines:

* ``minimize_dp`` -- exact forward dynamic programming over PL trajectories
  whose node values live on finite per-node grids (scalar problems only).
  Per-cell transition costs use a fixed 5-point Gauss rule for determinism;
  the winning path is re-scored with adaptive quadrature.  An optional slope
  bound prunes transitions, which is how the Lipschitz subclasses W^{1,inf}
  with ||u'|| <= M are scanned.

* ``minimize_descent`` -- block-coordinate descent on interior node values
  with numeric gradients and backtracking line search; monotone by
  construction, multi-start for vector problems.

``lavrentiev_scan`` tabulates constrained DP minima against the reference
energy.  DP rows lower-bound nothing off their grid: constrained minima over
the grid subclass can only over-estimate the true constrained infimum, so gap
evidence is one-sided and flagged as such in the table metadata.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyEstimate, energy
from .trajectory import PLTrajectory

__all__ = [
    "MinimizeResult",
    "GapTable",
    "InfeasibleGrid",
    "minimize_dp",
    "minimize_descent",
    "lavrentiev_scan",
    "default_value_grid",
]

_G5X, _G5W = np.polynomial.legendre.leggauss(5)


class InfeasibleGrid(RuntimeError):
    """No admissible DP path (only possible with a slope bound)."""


@dataclass
class MinimizeResult:
    trajectory: PLTrajectory
    energy: EnergyEstimate
    method: str
    iterations: int
    converged: bool
    slope_bound: float | None = None

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "iterations": self.iterations,
            "converged": self.converged,
            "slope_bound": self.slope_bound,
            "energy": self.energy.to_json(),
            "trajectory": self.trajectory.to_json(),
        }


def default_value_grid(spec, mesh, bc, size: int = 33, band: float | None = None):
    """Per-node value grids clustered around the reference trajectory.

    Offsets are quadratically spaced (denser near the center), the reference
    value itself is always a grid point, and the boundary nodes carry exactly
    the boundary values.
    """
    mesh = np.asarray(mesh, dtype=float)
    A, B = bc
    if spec.has_reference():
        center = np.asarray(spec.reference(mesh), dtype=float).reshape(len(mesh))
    else:
        center = A + (B - A) * (mesh - mesh[0]) / (mesh[-1] - mesh[0])
    if band is None:
        spread = float(np.max(center) - np.min(center))
        band = 0.5 * max(spread, abs(B - A), 1.0)
    u = np.linspace(-1.0, 1.0, size)
    offsets = band * np.sign(u) * u * u
    grids = [np.unique(np.concatenate([[c], c + offsets])) for c in center]
    grids[0] = np.array([A])
    grids[-1] = np.array([B])
    return grids


def _transition_costs(spec, t0: float, t1: float, va: np.ndarray, vb: np.ndarray):
    """Fixed Gauss-5 cell costs for all (a, b) value pairs, vectorized."""
    mid, half = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
    ts = mid + half * _G5X  # (5,)
    dt = t1 - t0
    slopes = (vb[None, :] - va[:, None]) / dt  # (na, nb)
    frac = (ts - t0) / dt  # (5,)
    ys = va[:, None, None] + slopes[:, :, None] * dt * frac[None, None, :]  # (na, nb, 5)
    tt = np.broadcast_to(ts, ys.shape)
    pp = np.broadcast_to(slopes[:, :, None], ys.shape)
    vals = spec.eval_L(tt.ravel(), ys.ravel(), pp.ravel()).reshape(ys.shape)
    return np.einsum("abq,q->ab", vals, _G5W) * half, slopes


def minimize_dp(spec, bc, mesh, value_grid=None, slope_bound: float | None = None,
                grid_size: int = 33, rescore_tol: float = 1e-9) -> MinimizeResult:
    """Exact minimizer over the grid-restricted PL class by forward DP.

    Scalar problems only.  Ties break toward the lowest predecessor index,
    making tables fully deterministic.  The winner is re-scored with adaptive
    quadrature (the DP cost itself uses the fixed 5-point rule).
    """
    if spec.dim != 1:
        raise ValueError("DP is scalar-only; use minimize_descent for d >= 2")
    mesh = np.unique(np.asarray(mesh, dtype=float))
    a, b = spec.domain
    if mesh[0] != a or mesh[-1] != b:
        raise ValueError("mesh must span the spec domain")
    A, B = float(np.atleast_1d(bc[0])[0]), float(np.atleast_1d(bc[1])[0])
    if value_grid is None:
        value_grid = default_value_grid(spec, mesh, (A, B), size=grid_size)
    grids = [np.asarray(g, dtype=float) for g in value_grid]
    if A not in grids[0] or B not in grids[-1]:
        raise ValueError("value grids must contain the boundary values")

    cost = np.full(len(grids[0]), np.inf)
    cost[np.flatnonzero(grids[0] == A)[0]] = 0.0
    preds = []
    for i in range(len(mesh) - 1):
        t0, t1 = float(mesh[i]), float(mesh[i + 1])
        cell, slopes = _transition_costs(spec, t0, t1, grids[i], grids[i + 1])
        if slope_bound is not None:
            cell = np.where(np.abs(slopes) <= slope_bound + 1e-12, cell, np.inf)
        tot = cost[:, None] + cell
        pred = np.argmin(tot, axis=0)  # argmin returns the lowest index on ties
        cost = tot[pred, np.arange(tot.shape[1])]
        preds.append(pred)
    j_end = np.flatnonzero(grids[-1] == B)[0]
    if not math.isfinite(cost[j_end]):
        raise InfeasibleGrid("no admissible path under the slope bound")
    idx = [int(j_end)]
    for pred in reversed(preds):
        idx.append(int(pred[idx[-1]]))
    idx.reverse()
    values = np.array([grids[i][j] for i, j in enumerate(idx)])
    traj = PLTrajectory(mesh, values)
    est = energy(spec, traj, tol=rescore_tol)
    return MinimizeResult(traj, est, "dp", len(mesh) - 1, True, slope_bound)


def _local_energy(spec, mesh, values, i: int) -> float:
    """Fixed-rule energy of the two cells adjacent to node i."""
    lo = max(i - 1, 0)
    hi = min(i + 1, len(mesh) - 1)
    total = 0.0
    for c in range(lo, hi):
        t0, t1 = float(mesh[c]), float(mesh[c + 1])
        mid, half = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
        ts = mid + half * _G5X
        dt = t1 - t0
        slope = (values[c + 1] - values[c]) / dt
        if spec.dim == 1:
            sl = float(np.atleast_1d(slope)[0])
            v0 = float(np.atleast_1d(values[c])[0])
            ys = v0 + sl * (ts - t0)
            total += float(np.dot(_G5W, spec.eval_L(ts, ys, np.full_like(ts, sl))) * half)
        else:
            ys = values[c][None, :] + slope[None, :] * (ts - t0)[:, None]
            pp = np.broadcast_to(slope, ys.shape)
            total += float(np.dot(_G5W, spec.eval_L(ts, ys, pp)) * half)
    return total


def minimize_descent(spec, bc, init: PLTrajectory, tol: float = 1e-10,
                     max_sweeps: int = 400, seed: int = 0,
                     multi_start: int | None = None) -> MinimizeResult:
    """Block-coordinate descent over interior node values.

    Each node coordinate takes a gradient step from central differences of
    its two-cell energy, with backtracking until the local energy decreases;
    total energy is monotone across updates.  Vector problems run several
    seeded perturbed starts and keep the best (energy, start index).
    """
    if multi_start is None:
        multi_start = 1 if spec.dim == 1 else 8
    A = np.atleast_1d(np.asarray(bc[0], dtype=float))
    B = np.atleast_1d(np.asarray(bc[1], dtype=float))
    base = init.values.copy()
    base[0], base[-1] = A, B
    rng = np.random.default_rng(seed)
    starts = [base]
    scale = max(float(np.max(np.abs(base))), 1.0)
    for _ in range(multi_start - 1):
        pert = base.copy()
        pert[1:-1] += rng.normal(scale=0.05 * scale, size=pert[1:-1].shape)
        starts.append(pert)

    best = None
    for s_idx, values0 in enumerate(starts):
        values = values0.copy()
        mesh = init.mesh
        sweeps = 0
        converged = False
        prev_total = math.inf
        for sweep in range(max_sweeps):
            sweeps = sweep + 1
            moved = 0.0
            for i in range(1, len(mesh) - 1):
                for j in range(spec.dim):
                    e0 = _local_energy(spec, mesh, values, i)
                    h = 1e-6 * max(1.0, abs(values[i, j]))
                    values[i, j] += h
                    ep = _local_energy(spec, mesh, values, i)
                    values[i, j] -= 2 * h
                    em = _local_energy(spec, mesh, values, i)
                    values[i, j] += h
                    grad = (ep - em) / (2 * h)
                    curv = max((ep - 2 * e0 + em) / (h * h), 1e-12)
                    step = grad / curv
                    for _ in range(40):
                        values[i, j] -= step
                        e1 = _local_energy(spec, mesh, values, i)
                        if e1 <= e0:
                            moved += abs(step)
                            break
                        values[i, j] += step
                        step *= 0.5
            total = _full_fixed_energy(spec, mesh, values)
            assert total <= prev_total + 1e-12 * max(abs(total), 1.0), "descent increased energy"
            if prev_total - total <= tol * max(abs(total), 1.0):
                converged = True
                break
            prev_total = total
        traj = PLTrajectory(mesh, values)
        est = energy(spec, traj, tol=1e-10)
        key = (est.value, s_idx)
        if best is None or key < best[0]:
            best = (key, MinimizeResult(traj, est, "descent", sweeps, converged))
    return best[1]


def _full_fixed_energy(spec, mesh, values) -> float:
    total = 0.0
    for c in range(len(mesh) - 1):
        t0, t1 = float(mesh[c]), float(mesh[c + 1])
        mid, half = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
        ts = mid + half * _G5X
        dt = t1 - t0
        slope = (values[c + 1] - values[c]) / dt
        if spec.dim == 1:
            v0 = float(np.atleast_1d(values[c])[0])
            sl = float(np.atleast_1d(slope)[0])
            ys = v0 + sl * (ts - t0)
            total += float(np.dot(_G5W, spec.eval_L(ts, ys, np.full_like(ts, sl))) * half)
        else:
            ys = values[c][None, :] + slope[None, :] * (ts - t0)[:, None]
            pp = np.broadcast_to(slope, ys.shape)
            total += float(np.dot(_G5W, spec.eval_L(ts, ys, pp)) * half)
    return total


@dataclass
class GapTable:
    rows: list  # dicts: M, mesh_id, min_energy, error_bound, feasible
    reference_energy: float
    reference_error: float
    gap: float
    one_sided_note: str = (
        "constrained minima are over a grid subclass: true constrained "
        "infima may be lower, so the gap evidence is one-sided"
    )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["M", "mesh_id", "min_energy", "reference_energy", "gap"])
        for r in self.rows:
            gap = r["min_energy"] - self.reference_energy
            w.writerow([repr(r["M"]), r["mesh_id"], repr(r["min_energy"]),
                        repr(self.reference_energy), repr(gap)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "rows": self.rows,
            "reference_energy": self.reference_energy,
            "reference_error": self.reference_error,
            "gap": self.gap,
            "note": self.one_sided_note,
        }


def lavrentiev_scan(spec, bc, M_list, mesh_schedule, value_grid_size: int = 33) -> GapTable:
    """Constrained DP minima per (M, mesh) against the reference energy.

    Infeasible (M, mesh) pairs (slope bound below the mean slope forced by
    the boundary data) appear as min_energy = inf, feasible = False: the
    Lipschitz subclass with that bound is empty.
    """
    if spec.has_reference():
        ref_val, ref_err = spec.reference_energy()
    else:
        mesh = np.asarray(mesh_schedule[-1], dtype=float)
        res = minimize_dp(spec, bc, mesh, grid_size=value_grid_size)
        ref_val, ref_err = res.energy.value, res.energy.error_bound
    rows = []
    for mesh_id, mesh in enumerate(mesh_schedule):
        for M in M_list:
            try:
                res = minimize_dp(spec, bc, np.asarray(mesh, dtype=float),
                                  slope_bound=float(M), grid_size=value_grid_size)
                rows.append({
                    "M": float(M), "mesh_id": mesh_id,
                    "min_energy": res.energy.value,
                    "error_bound": res.energy.error_bound,
                    "feasible": True,
                })
            except InfeasibleGrid:
                rows.append({
                    "M": float(M), "mesh_id": mesh_id,
                    "min_energy": math.inf, "error_bound": 0.0,
                    "feasible": False,
                })
    gap = min((r["min_energy"] for r in rows), default=math.inf) - ref_val
    return GapTable(rows, ref_val, ref_err, gap)
