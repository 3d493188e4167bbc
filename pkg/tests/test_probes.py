"""Tests for the probe procedures."""

import math

import numpy as np
import pytest

from varlab import probes
from varlab.energy import combine, energy
from varlab.lagrangian import NoModulus, make
from varlab.probes import affine_replace, chord_falsify, necessary_condition_report, vary
from varlab.trajectory import PLTrajectory, hat


@pytest.fixture(scope="module")
def quad11():
    return make("quadratic_gradient", {"domain": (-1.0, 1.0)})


@pytest.fixture(scope="module")
def dense():
    return make("dense_osc")


def vee():
    return PLTrajectory([-1.0, 0.0, 1.0], [1.0, 0.0, 1.0])


class TestAffineReplace:
    def test_affine_target_bump_branch(self):
        quad = make("quadratic_gradient")
        v = PLTrajectory([0.0, 1.0], [0.0, 1.0])
        res = affine_replace(quad, v, (0.2, 0.8), 1e-3)
        assert res.succeeded
        assert res.branch == "bump"
        assert res.u != v  # strictly different trajectory
        lo, hi = res.window
        assert 0.2 <= lo < hi <= 0.8
        # bitwise equality outside the window
        for t, val in zip(res.u.mesh, res.u.values[:, 0]):
            if t <= lo or t >= hi:
                assert val == v.eval(float(t))

    def test_dense_reference_window(self, dense):
        v = dense.reference_pl()
        res = affine_replace(dense, v, (0.3, 0.4), 1e-3)
        assert res.succeeded
        assert res.achieved <= 1e-3
        lo, hi = res.window
        assert 0.3 <= lo < hi <= 0.4

    def test_chord_endpoint_identity(self, dense):
        # force the chord branch by pointing U at steep cells
        v = dense.reference_pl()
        res = affine_replace(dense, v, (0.48, 0.52), 1e-2)
        if res.branch == "chord" and res.window[1] < 1.0:
            s0, s1 = res.window
            lhs = abs(v.eval(s1) - v.eval(s0))
            assert lhs == pytest.approx(res.m * (s1 - s0), abs=1e-10 * max(1.0, res.m))

    def test_bad_window(self, dense):
        with pytest.raises(ValueError):
            affine_replace(dense, dense.reference_pl(), (0.9, 0.2), 1e-3)


class TestVary:
    def test_gamma_zero_is_base(self, quad11):
        v = PLTrajectory([-1.0, 1.0], [-1.0, 1.0])
        u = hat(0.0, 0.5, 1.0, -1.0, 1.0)
        curve = vary(quad11, v, u, [0.0, 0.5, 1.0])
        base = energy(quad11, v)
        assert curve.estimates[0].value == pytest.approx(base.value, abs=base.error_bound + 1e-12)

    def test_quadratic_exact_expansion(self, quad11):
        # L(v + gamma u) = L(v) + gamma^2 ||u'||^2 for the pure gradient case
        v = PLTrajectory([-1.0, 1.0], [-1.0, 1.0])
        u = hat(0.0, 0.5, 1.0, -1.0, 1.0)
        gammas = [0.0, 0.25, 0.5, 0.75, 1.0]
        curve = vary(quad11, v, u, gammas)
        uprime_sq = energy(quad11, u).value
        base = curve.estimates[0].value
        for g, est in zip(gammas, curve.estimates):
            assert est.value == pytest.approx(base + g * g * uprime_sq, abs=1e-10)

    def test_divergence_certificates_attached(self):
        spec = make("dense_osc", {"points": [0.5], "truncation": 12})
        v = spec.reference_pl()
        u = hat(0.5, 0.25, 0.1, 0.0, 1.0)
        fam = [{"interval": spec.ramp_interval(0, k)} for k in range(4, 11)]
        curve = vary(spec, v, u, [0.0, 1.0], divergence_family=fam)
        assert len(curve.certificates) == 1
        assert all(r >= 16.0 for r in curve.certificates[0].certificate.ratios)

    def test_endpoint_constraint(self, quad11):
        v = PLTrajectory([-1.0, 1.0], [-1.0, 1.0])
        bad = PLTrajectory([-1.0, 1.0], [0.5, 0.0])
        with pytest.raises(ValueError):
            vary(quad11, v, bad, [0.1])


class TestChordFalsify:
    def test_kink_drop_closed_form(self, quad11):
        # chord over a symmetric window at the kink of |t| removes the full
        # slope energy: drop = (t2 - t1) exactly
        certs = chord_falsify(quad11, vee(), R=4.0, windows=[(-0.25, 0.25)])
        assert len(certs) == 1
        c = certs[0]
        assert c.drop == pytest.approx(0.5, abs=1e-8)
        assert c.deviation_measure == pytest.approx(0.5, abs=1e-12)
        # displayed inequality on the found instance
        assert c.drop >= c.tau_R * c.deviation_measure - 1e-9 * (c.interval[1] - c.interval[0])

    def test_affine_yields_nothing(self, quad11):
        v = PLTrajectory([-1.0, 1.0], [0.0, 1.0])
        windows = [(-(2.0**-j), 2.0**-j) for j in range(1, 12)]
        assert chord_falsify(quad11, v, R=4.0, windows=windows) == []

    def test_recheck_with_doubled_depth(self, quad11):
        certs = chord_falsify(quad11, vee(), R=4.0, windows=[(-0.25, 0.25)], tol=1e-10)
        c = certs[0]
        v1, e1 = probes.window_energy(quad11, vee(), *c.interval, tol=1e-12)
        v2, e2 = probes.window_energy(quad11, c.chord, *c.interval, tol=1e-12)
        assert (v1 - v2) > e1 + e2

    def test_no_modulus_propagates(self, dense):
        with pytest.raises(NoModulus):
            chord_falsify(dense, dense.reference_pl(), R=2.0, windows=[(0.4, 0.6)])

    def test_cusp_component_one_protected(self):
        # flattening the component-1 kink of the planar cusp never certifies
        # a drop: the vertical tangent of component 2 protects it
        spec = make("cusp_vector")
        v = spec.reference_pl(n_points=513)
        windows = [(-(2.0**-j), 2.0**-j) for j in range(2, 10)]
        certs = chord_falsify(spec, v, R=4.0, windows=windows, components=[0])
        assert certs == []


class TestNecessaryConditionReport:
    def test_affine_clean(self, quad11):
        v = PLTrajectory([-1.0, 1.0], [-0.5, 0.5])
        rep = necessary_condition_report(quad11, v, 0.0)
        assert rep.clean

    def test_vee_kink_flag_and_certificate(self, quad11):
        rep = necessary_condition_report(quad11, vee(), 0.0)
        assert rep.flags[0].kink
        assert rep.certificates, "kink must produce a drop certificate"

    def test_tonelli_anchor_oscillation_no_kink(self):
        spec = make("tonelli_singular")
        from varlab.construction import sample_trajectory

        v = sample_trajectory(spec.state, n_points=257, chart_depth=24)
        rep = necessary_condition_report(spec, v, 0.0, offsets=np.array(
            [2.0**-j for j in range(30, 60)]))
        f = rep.flags[0]
        assert not f.kink
        assert f.left.infinite == 2 and f.right.infinite == 2
