"""Tests for DP minimization, descent, and the gap scan."""

import itertools
import math

import numpy as np
import pytest

from varlab import solver
from varlab.energy import energy
from varlab.lagrangian import make
from varlab.solver import InfeasibleGrid, lavrentiev_scan, minimize_descent, minimize_dp
from varlab.trajectory import PLTrajectory


@pytest.fixture(scope="module")
def quad():
    return make("quadratic_gradient")


def exhaustive_min(spec, mesh, grids, slope_bound=None):
    """Brute-force oracle over all interior value assignments, same per-cell
    fixed Gauss-5 cost as the DP."""
    best = math.inf
    best_path = None
    interior = grids[1:-1]
    for combo in itertools.product(*[range(len(g)) for g in interior]):
        path = [grids[0][0]] + [grids[i + 1][j] for i, j in enumerate(combo)] + [grids[-1][0]]
        total = 0.0
        ok = True
        for i in range(len(mesh) - 1):
            va = np.array([path[i]])
            vb = np.array([path[i + 1]])
            cell, slopes = solver._transition_costs(spec, float(mesh[i]), float(mesh[i + 1]), va, vb)
            if slope_bound is not None and abs(slopes[0, 0]) > slope_bound + 1e-12:
                ok = False
                break
            total += float(cell[0, 0])
        if ok and total < best:
            best = total
            best_path = path
    return best, best_path


class TestDP:
    def test_affine_exact(self, quad):
        mesh = np.linspace(0, 1, 9)
        res = minimize_dp(quad, (0.0, 1.0), mesh)
        assert res.energy.value == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(res.trajectory.values[:, 0], mesh, atol=1e-12)

    def test_matches_exhaustive_small_instances(self):
        rng = np.random.default_rng(4)
        entries = ["quadratic_gradient", "dense_osc", "mania_reg"]
        for trial in range(12):
            entry = entries[trial % 3]
            spec = make(entry) if entry != "quadratic_gradient" else make(entry)
            a, b = spec.domain
            n_nodes = int(rng.integers(3, 7))
            mesh = np.sort(np.unique(np.concatenate([[a, b], rng.uniform(a, b, n_nodes - 2)])))
            A = float(rng.uniform(-1, 1))
            B = float(rng.uniform(-1, 1))
            grids = [np.array([A])]
            for _ in range(len(mesh) - 2):
                g = np.sort(rng.uniform(-1.5, 1.5, int(rng.integers(2, 7))))
                grids.append(g)
            grids.append(np.array([B]))
            M = float(rng.uniform(2.0, 30.0)) if trial % 2 else None
            oracle, _ = exhaustive_min(spec, mesh, grids, M)
            try:
                res = minimize_dp(spec, (A, B), mesh, value_grid=grids, slope_bound=M)
            except InfeasibleGrid:
                assert oracle == math.inf
                continue
            # re-run DP cost of the winner through the oracle cost model
            got, _ = exhaustive_min(spec, mesh,
                                    [np.array([v]) for v in res.trajectory.values[:, 0]], M)
            assert got == pytest.approx(oracle, rel=1e-12, abs=1e-300)

    def test_monotone_in_M(self, quad):
        mesh = np.linspace(0, 1, 17)
        vals = [minimize_dp(quad, (0.0, 1.0), mesh, slope_bound=M).energy.value
                for M in (1.0, 2.0, 4.0, 8.0)]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_grid_superset_monotone(self, quad):
        mesh = np.linspace(0, 1, 9)
        rng = np.random.default_rng(8)
        small = [np.array([0.0])] + [np.sort(rng.uniform(-1, 2, 4)) for _ in range(7)] + [np.array([1.0])]
        big = [small[0]] + [np.sort(np.concatenate([g, rng.uniform(-1, 2, 3)])) for g in small[1:-1]] + [small[-1]]
        v_small = minimize_dp(quad, (0.0, 1.0), mesh, value_grid=small).energy.value
        v_big = minimize_dp(quad, (0.0, 1.0), mesh, value_grid=big).energy.value
        assert v_big <= v_small + 1e-12

    def test_infeasible_raises(self, quad):
        mesh = np.linspace(0, 1, 5)
        with pytest.raises(InfeasibleGrid):
            minimize_dp(quad, (0.0, 2.0), mesh, slope_bound=1.0)

    def test_endpoints_exact(self, quad):
        res = minimize_dp(quad, (0.25, 0.75), np.linspace(0, 1, 7))
        assert res.trajectory.values[0, 0] == 0.25
        assert res.trajectory.values[-1, 0] == 0.75

    def test_vector_rejected(self):
        spec = make("cusp_vector")
        with pytest.raises(ValueError):
            minimize_dp(spec, (np.zeros(2), np.ones(2)), np.linspace(-1, 1, 5))


class TestDescent:
    def test_zigzag_to_affine(self, quad):
        mesh = np.linspace(0, 1, 17)
        zig = mesh + 0.2 * np.sin(29 * np.pi * mesh)
        init = PLTrajectory(mesh, zig)
        res = minimize_descent(quad, (0.0, 1.0), init, tol=1e-12)
        assert res.energy.value == pytest.approx(1.0, abs=1e-8)
        assert res.converged

    def test_never_above_init(self, quad):
        rng = np.random.default_rng(3)
        mesh = np.linspace(0, 1, 13)
        init = PLTrajectory(mesh, rng.normal(size=13))
        vals = init.values.copy()
        vals[0], vals[-1] = 0.0, 1.0
        init_e = energy(quad, PLTrajectory(mesh, vals)).value
        res = minimize_descent(quad, (0.0, 1.0), init, max_sweeps=5)
        assert res.energy.value <= init_e + 1e-12

    def test_cusp_vector_linear_init_decreases(self):
        spec = make("cusp_vector")
        mesh = np.linspace(-1, 1, 17)
        A, B = spec.reference(np.array([-1.0]))[0], spec.reference(np.array([1.0]))[0]
        init_vals = np.linspace(A, B, 17).reshape(17, 2)
        init = PLTrajectory(mesh, init_vals)
        init_e = energy(spec, init).value
        res = minimize_descent(spec, (A, B), init, max_sweeps=40, multi_start=1)
        assert res.energy.value < 0.1 * init_e

    def test_cusp_vector_stays_near_reference(self):
        # a perturbed near-reference start must come back under the sampled
        # reference energy envelope
        spec = make("cusp_vector")
        ref_pl = spec.reference_pl(n_points=33)
        ref_pl_e = energy(spec, ref_pl).value
        rng = np.random.default_rng(1)
        vals = ref_pl.values.copy()
        vals[1:-1] += rng.normal(scale=1e-3, size=vals[1:-1].shape)
        init = PLTrajectory(ref_pl.mesh, vals)
        A, B = ref_pl.values[0], ref_pl.values[-1]
        res = minimize_descent(spec, (A, B), init, max_sweeps=40, multi_start=1)
        assert res.energy.value <= ref_pl_e * (1 + 1e-6) + 1e-12


class TestLavScan:
    def test_quadratic_no_gap(self, quad):
        meshes = [np.linspace(0, 1, 17)]
        table = lavrentiev_scan(quad, (0.0, 1.0), [1.0, 2.0, 4.0], meshes)
        assert table.gap == pytest.approx(0.0, abs=1e-9)

    def test_dense_lav_gap(self):
        spec = make("dense_osc_lav", {"truncation": 4})
        bc = spec.reference_bc()
        a, b = spec.domain
        mesh = np.unique(np.concatenate([np.linspace(a, b, 33),
                                         [x for x in spec.breakpoints]]))
        table = lavrentiev_scan(spec, bc, [1.0, 4.0, 16.0], [mesh], value_grid_size=17)
        assert table.reference_energy == 0.0
        for row in table.rows:
            assert row["min_energy"] >= 2.0**-56
        assert "one-sided" in table.one_sided_note

    def test_csv_shape(self, quad):
        table = lavrentiev_scan(quad, (0.0, 1.0), [1.0], [np.linspace(0, 1, 9)])
        lines = table.to_csv().strip().splitlines()
        assert lines[0] == "M,mesh_id,min_energy,reference_energy,gap"
        assert len(lines) == 2
