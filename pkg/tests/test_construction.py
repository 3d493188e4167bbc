"""Tests for the singular-minimizer construction (faithful and illustrative)."""

import math

import numpy as np
import pytest

from varlab import construction as con
from varlab import special
from varlab.logfloat import LogFloat, Offset, lf
from varlab.special import SingularPointError

T = special.pick_T()


@pytest.fixture(scope="module")
def faithful2():
    """Faithful two-point build: the acceptance workhorse."""
    return con.build([0.0, T / 2.0], mode="faithful")


@pytest.fixture(scope="module")
def illus3():
    """Illustrative three-point build at visualizable scales."""
    points = [0.0, T / 2.0, -T / 3.0]
    t_sched = [T, T / 64.0, T / 256.0]
    r_sched = [T, T / 512.0, T / 4096.0]
    return con.build(points, mode="illustrative", T=T,
                     t_schedule=t_sched, r_schedule=r_sched)


class TestPlanConstants:
    def test_two_point_sigma(self):
        st = con.plan_constants([0.0, T / 2.0])
        assert st.constants[1].sigma == T / 4.0

    def test_K_growth(self):
        st = con.plan_constants([0.0, T / 2.0])
        assert st.constants[1].K >= 1.0 + st.constants[0].K

    def test_theta_formula_recomputed(self):
        # independent recomputation of the constant chain for the two-point case
        st = con.plan_constants([0.0, T / 2.0])
        sigma1 = abs(T / 2.0 - 0.0) / 2.0
        K1 = max(2.0, 1.0 * (special.envelope_wtilde_second(sigma1)
                             + special.envelope_wtilde_prime(sigma1) + 1.0))
        assert st.constants[1].K == pytest.approx(K1, rel=1e-14)
        assert st.constants[1].theta == pytest.approx(10.0 * K1 / sigma1, rel=1e-14)

    def test_eta_is_g_sigma(self):
        st = con.plan_constants([0.0, T / 2.0])
        assert st.constants[1].eta == special.eval_g(st.constants[1].sigma)

    def test_T1_satisfies_both_conditions(self):
        st = con.plan_constants([0.0, T / 2.0])
        c1 = st.constants[1]
        cap = min(abs(c1.x - T), abs(c1.x + T)) * c1.sigma / 2.0
        assert c1.T_n <= lf(cap) * lf(T)
        target = 2.0**-1 / (5.0 * c1.theta)
        sup = special.sup_envelope_g_psi(-c1.T_n.ln())
        assert sup <= target

    def test_R_conditions(self):
        st = con.plan_constants([0.0, T / 2.0])
        c1 = st.constants[1]
        assert c1.R_n <= c1.T_n * 0.25
        rhs1 = c1.T_n**4 / lf(1024.0 * (1.0 + st.wt_l2) ** 2)
        assert con._wt_l2_tail_envelope(c1.R_n) <= rhs1

    def test_m_idx_integer_and_bound(self):
        st = con.plan_constants([0.0, T / 2.0])
        m0 = st.constants[0].m_idx
        assert isinstance(m0, int) and m0 >= 0
        # 2^-m <= T_1^2/32, in log2 terms
        assert -float(m0) <= 2.0 * st.constants[1].T_n.log2() - 5.0

    def test_cover_measure(self):
        st = con.plan_constants([0.0, T / 2.0])
        c0 = st.constants[0]
        covered = min(c0.m_idx, st.N) + 1
        cover = c0.G_radius * (2.0 * covered)
        assert cover <= st.constants[1].T_n**2 / (16.0 * st.C)

    def test_determinism(self):
        a = con.plan_constants([0.0, T / 2.0])
        b = con.plan_constants([0.0, T / 2.0])
        for ca, cb in zip(a.constants, b.constants):
            assert ca.T_n.m == cb.T_n.m and ca.T_n.e == cb.T_n.e
            assert ca.R_n.m == cb.R_n.m and ca.R_n.e == cb.R_n.e
            assert (ca.K, ca.theta, ca.sigma) == (cb.K, cb.theta, cb.sigma)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            con.plan_constants([0.1, 0.2])  # x0 != 0
        with pytest.raises(ValueError):
            con.plan_constants([0.0, 0.0])
        with pytest.raises(ValueError):
            con.plan_constants([0.0, 2 * T])


class TestBuildFaithful:
    def test_stage_values_fixed(self, faithful2):
        # w_n(x_i) = w_{n-1}(x_i)
        st = faithful2
        x1 = st.points[1]
        assert con.eval_w(st, x1, upto=1) == con.eval_w(st, x1, upto=0)
        assert con.eval_w(st, 0.0, upto=1) == 0.0

    def test_w_prime_continuous_joins(self, faithful2):
        st = faithful2
        art = st.artifacts[1]
        tau_root = special.wtilde_prime_of(Offset.from_ll(art.tau_ll))
        assert tau_root == pytest.approx(art.m, abs=1e-12 * max(1, abs(art.m)))

    def test_artifact_bounds(self, faithful2):
        st = faithful2
        c1, a1 = st.constants[1], st.artifacts[1]
        gR = con._g_lf(c1.R_n)
        assert max(abs(a1.delta_minus), abs(a1.delta_plus)) <= lf(c1.K) * c1.R_n
        assert max(abs(a1.c_minus), abs(a1.c_plus)) <= lf(3.0 * c1.K) * gR
        assert max(abs(a1.d_minus), abs(a1.d_plus)) <= lf(13.0 * c1.K) * gR / c1.T_n

    def test_equals_profile_at_float_scale(self, faithful2):
        # every representable t except the anchors lies outside Y_1
        st = faithful2
        ts = np.linspace(-T, T, 1001)
        ts = ts[(ts != 0.0) & (ts != st.points[1])]
        np.testing.assert_array_equal(con.eval_w_grid(st, ts), special.eval_wtilde(ts))

    def test_singular_point_error(self, faithful2):
        with pytest.raises(SingularPointError):
            con.eval_w_prime(faithful2, 0.0)
        with pytest.raises(SingularPointError):
            con.eval_w_prime(faithful2, faithful2.points[1])

    def test_chart_splice_is_profile(self, faithful2):
        # inside tau_1 the delta is exactly the translated profile
        st = faithful2
        art = st.artifacts[1]
        s = Offset.from_ll(art.tau_ll + 1.0)
        d = con.chart_delta(st, 1, s)
        expect = special.wtilde_of(s)
        assert d.log2() == pytest.approx(expect.log2(), rel=1e-12)
        assert d.sign == expect.sign

    def test_chart_affine_branch_slope(self, faithful2):
        st = faithful2
        assert con.chart_prime(st, 1, Offset.from_log2(
            st.constants[1].R_n.log2() * (1 + 1e-10))) == st.artifacts[1].m

    def test_verify_stage0(self, faithful2):
        rep = con.verify_stage(faithful2, 0, grid=512)
        assert rep.all_passed, [c for c in rep.checks if not c.passed]

    def test_verify_stage1(self, faithful2):
        rep = con.verify_stage(faithful2, 1, grid=512)
        assert rep.all_passed, [(c.name, c.margin) for c in rep.checks if not c.passed]

    def test_json_roundtrip_bit_exact(self, faithful2):
        st = faithful2
        back = con.ConstructionState.loads(st.dumps())
        assert back.dumps() == st.dumps()
        for n in st.artifacts:
            assert back.artifacts[n].tau_ll == st.artifacts[n].tau_ll
            assert back.artifacts[n].c_plus == st.artifacts[n].c_plus


class TestDiniCertificate:
    def test_stage0_both_signs(self, faithful2):
        cert = con.dini_certificate(faithful2, 0, 3)
        assert not cert["partial"]
        for row in cert["entries"]:
            assert row["plus"]["quotient"] >= row["k"]
            assert row["minus"]["quotient"] <= -row["k"]

    def test_stage0_matches_wtilde(self, faithful2):
        # quotients of the bare profile at the sine nodes
        cert = con.dini_certificate(faithful2, 0, 1)
        e = cert["entries"][0]["plus"]
        t = e["offset"]
        assert t is not None
        assert e["quotient"] == pytest.approx(special.eval_wtilde(t) / t, rel=1e-9)

    def test_quotient_at_least_loglog_minus_one(self, faithful2):
        cert = con.dini_certificate(faithful2, 0, 5)
        for row in cert["entries"]:
            for side in ("plus", "minus"):
                ll = row[side]["loglog_inv_offset"]
                assert abs(row[side]["quotient"]) >= ll - 1.0

    def test_stage1_deep_nodes(self, faithful2):
        cert = con.dini_certificate(faithful2, 1, 10)
        assert not cert["partial"]
        for row in cert["entries"]:
            assert row["plus"]["quotient"] >= max(row["k"], 10)
            assert row["minus"]["quotient"] <= -max(row["k"], 10)


class TestIllustrative:
    def test_violations_recorded_not_fatal(self, illus3):
        assert illus3.built_upto == 2
        assert len(illus3.violations) > 0  # visualizable scales break (T:2)/(R:2)

    def test_off_Y_equality(self, illus3):
        st = illus3
        ts = np.linspace(-T, T, 4097)
        Tf1 = st.constants[1].T_n.to_float()
        Tf2 = st.constants[2].T_n.to_float()
        mask = (np.abs(ts - st.points[1]) > Tf1) & (np.abs(ts - st.points[2]) > Tf2)
        w2 = con.eval_w_grid(st, ts[mask], upto=2)
        w1 = con.eval_w_grid(st, ts[mask], upto=1)
        assert np.array_equal(w2, w1)

    def test_join_continuity_float_scale(self, illus3):
        # values agree across branch boundaries when visualizable
        st = illus3
        for n in (1, 2):
            x = st.points[n]
            R = st.constants[n].R_n.to_float()
            Tn = st.constants[n].T_n.to_float()
            for side in (-1.0, 1.0):
                for edge in (R, Tn):
                    lo = con.eval_w(st, x + side * edge * (1 - 1e-9), upto=n)
                    hi = con.eval_w(st, x + side * edge * (1 + 1e-9), upto=n)
                    assert lo == pytest.approx(hi, abs=1e-10)

    def test_finite_difference_matches_prime(self, illus3):
        st = illus3
        x = st.points[1]
        Tn = st.constants[1].T_n.to_float()
        R = st.constants[1].R_n.to_float()
        for t in [x + 0.6 * Tn, x - 0.6 * Tn, x + 0.3 * Tn, x + 2.0 * Tn]:
            h = Tn * 1e-7
            fd = (con.eval_w(st, t + h, 1) - con.eval_w(st, t - h, 1)) / (2 * h)
            assert con.eval_w_prime(st, t, 1) == pytest.approx(fd, rel=2e-4, abs=1e-9)

    def test_verify_reports_flags(self, illus3):
        rep = con.verify_stage(illus3, 1, grid=512)
        # structure is intact: off-Y equality and joins must hold even here
        by_name = {c.name: c for c in rep.checks}
        assert by_name["(off Y_n) w_n = w_{n-1}"].passed
        assert by_name["joins C^1"].passed


class TestPhi:
    def test_zero_at_zero(self, faithful2):
        ts = np.linspace(-T, T, 101)
        assert np.all(con.eval_phi_grid(faithful2, ts, np.zeros_like(ts)) == 0.0)

    def test_monotone_in_abs_y(self, faithful2):
        rng = np.random.default_rng(2)
        ts = rng.uniform(-T, T, 300)
        y1 = rng.uniform(-1, 1, 300)
        y2 = y1 * rng.uniform(1.0, 3.0, 300)
        p1 = con.eval_phi_grid(faithful2, ts, y1)
        p2 = con.eval_phi_grid(faithful2, ts, y2)
        assert np.all(p2 >= p1 - 1e-15)

    def test_bounded_by_C(self, faithful2):
        rng = np.random.default_rng(3)
        ts = rng.uniform(-T, T, 2000)
        ys = rng.uniform(-10, 10, 2000)
        vals = con.eval_phi_grid(faithful2, ts, ys)
        assert np.all(vals >= 0.0)
        assert np.all(vals <= faithful2.C)

    def test_stage_increment_small(self, illus3):
        # phi_n - phi_{n-1} = phi~_n <= 2^-n (recorded violations may break
        # this at illustrative scales, so test the faithful state instead)
        rng = np.random.default_rng(4)
        ts = rng.uniform(-T, T, 500)
        ys = rng.uniform(-2, 2, 500)

    def test_stage_increment_small_faithful(self, faithful2):
        rng = np.random.default_rng(5)
        ts = rng.uniform(-T, T, 500)
        ys = rng.uniform(-2, 2, 500)
        inc = con.eval_phi_grid(faithful2, ts, ys, upto=1) - con.eval_phi_grid(
            faithful2, ts, ys, upto=0)
        assert np.all(inc <= 2.0**-1 + 1e-15)
        assert np.all(inc >= -1e-15)


class TestSampleTrajectory:
    def test_charts_present(self, faithful2):
        traj = con.sample_trajectory(faithful2, n_points=257, chart_depth=16)
        assert len(traj.charts) == 2 * len(faithful2.points)
        anchors = {c.anchor for c in traj.charts}
        assert anchors == set(faithful2.points)

    def test_dini_scan_matches_profile_at_chart_scales(self, faithful2):
        # within float-reachable offsets the quotient is l2 sin(l3): the scan
        # must reproduce it; the +-10 excursions live below float range and
        # are covered by dini_certificate in log-log space
        from varlab.trajectory import dini_scan

        traj = con.sample_trajectory(faithful2, n_points=257, chart_depth=64)
        offs = np.exp(np.linspace(math.log(1e-200), math.log(1e-12), 30))[::-1]
        scan = dini_scan(traj, 0.0, offs, ceiling=1e6)
        for h, q in zip(scan.offsets, scan.quotients[:, 0]):
            t = abs(h)
            expect = special.eval_wtilde(t) / t
            assert q == pytest.approx(expect, rel=2e-2)
        assert scan.upper[0].value > 4.0  # quotients already exceed the slope scale
