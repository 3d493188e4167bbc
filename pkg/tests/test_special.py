"""Tests for the log-log-log special functions and their envelopes."""

import math

import mpmath
import numpy as np
import pytest

from varlab import special
from varlab.logfloat import LogFloat, Offset
from varlab.special import (
    DomainError,
    SingularPointError,
    eval_g,
    eval_psi,
    eval_wtilde,
    eval_wtilde_prime,
    eval_wtilde_second,
    pick_T,
    envelope_g_psi,
    envelope_g_wtilde_second,
    envelope_wtilde_prime,
    envelope_wtilde_second,
)

mpmath.mp.dps = 60


def mp_g(t):
    t = mpmath.mpf(t)
    if t == 0:
        return mpmath.mpf(0)
    return t * mpmath.log(mpmath.log(1 / abs(t)))


def mp_wtilde(t):
    t = mpmath.mpf(t)
    if t == 0:
        return mpmath.mpf(0)
    return mp_g(t) * mpmath.sin(mpmath.log(mpmath.log(mpmath.log(1 / abs(t)))))


def log_grid(lo, hi, n):
    return np.exp(np.linspace(math.log(lo), math.log(hi), n))


T = pick_T()


class TestG:
    def test_zero(self):
        assert eval_g(0.0) == 0.0

    def test_forced_closed_form(self):
        # at t = e^-e^2 the double log is exactly 2
        t = math.exp(-math.e**2)
        assert eval_g(t) == pytest.approx(2.0 * t, rel=1e-15)

    def test_odd(self):
        ts = log_grid(1e-280, 0.3, 257)
        np.testing.assert_allclose(eval_g(-ts), -eval_g(ts), rtol=1e-14)

    def test_against_mpmath(self):
        for t in log_grid(1e-250, 0.3, 40):
            assert eval_g(float(t)) == pytest.approx(float(mp_g(float(t))), rel=1e-13)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            eval_g(0.5)

    def test_deep_offsets_clean(self):
        # no NaN/Inf down to 1e-300
        ts = log_grid(1e-300, 2 * T, 1001)
        vals = eval_g(ts)
        assert np.all(np.isfinite(vals))


class TestWtilde:
    def test_zero(self):
        assert eval_wtilde(0.0) == 0.0

    def test_sin_quarter_node(self):
        # t* solving logloglog(1/t*) = pi/2 makes the sine exactly 1
        tstar = mpmath.exp(-mpmath.exp(mpmath.exp(mpmath.pi / 2)))
        t = float(tstar)
        assert eval_wtilde(t) == pytest.approx(float(mp_g(tstar)), rel=1e-12)
        assert eval_wtilde(t) == pytest.approx(eval_g(t), rel=1e-12)

    def test_dominated_by_g(self):
        ts = log_grid(1e-290, 1e-3, 1000)
        assert np.all(np.abs(eval_wtilde(ts)) <= np.abs(eval_g(ts)) + 1e-300)

    def test_odd(self):
        ts = log_grid(1e-200, 1e-2, 101)
        np.testing.assert_allclose(eval_wtilde(-ts), -eval_wtilde(ts), rtol=1e-14)

    def test_against_mpmath(self):
        for t in log_grid(1e-200, 1e-2, 25):
            assert eval_wtilde(float(t)) == pytest.approx(float(mp_wtilde(float(t))), rel=1e-12)


class TestWtildePrime:
    def test_even(self):
        ts = log_grid(1e-250, 1e-2, 257)
        np.testing.assert_allclose(eval_wtilde_prime(-ts), eval_wtilde_prime(ts), rtol=1e-14)

    def test_envelope(self):
        ts = log_grid(1e-290, 2 * T, 1024)
        assert np.all(np.abs(eval_wtilde_prime(ts)) <= envelope_wtilde_prime(ts))

    def test_finite_difference(self):
        # derivative oracle at t = 1e-3 with mpmath central differences
        t = mpmath.mpf("1e-3")
        h = mpmath.mpf("1e-9")
        fd = (mp_wtilde(t + h) - mp_wtilde(t - h)) / (2 * h)
        assert eval_wtilde_prime(1e-3) == pytest.approx(float(fd), rel=1e-5)

    def test_singular_point(self):
        with pytest.raises(SingularPointError):
            eval_wtilde_prime(0.0)

    def test_integrates_back(self):
        # adaptive quadrature of wt' over [a, b] recovers wt(b) - wt(a)
        from scipy.integrate import quad

        a, b = 1e-6, T
        val, err = quad(eval_wtilde_prime, a, b, limit=200)
        assert abs(val - (eval_wtilde(b) - eval_wtilde(a))) <= max(err * 10, 1e-12)


class TestWtildeSecond:
    def test_envelope(self):
        ts = log_grid(1e-290, 2 * T, 1024)
        assert np.all(np.abs(eval_wtilde_second(ts)) <= envelope_wtilde_second(ts))

    def test_g_weighted_envelope(self):
        ts = log_grid(1e-290, 2 * T, 1024)
        prod = np.abs(eval_g(ts) * eval_wtilde_second(ts))
        assert np.all(prod <= envelope_g_wtilde_second(ts))

    def test_finite_difference_of_prime(self):
        t = mpmath.mpf("1e-2")
        h = mpmath.mpf("1e-12")

        def mp_wt_prime(x):
            l1 = mpmath.log(1 / x)
            l2 = mpmath.log(l1)
            l3 = mpmath.log(l2)
            return l2 * mpmath.sin(l3) - (mpmath.sin(l3) + mpmath.cos(l3)) / l1

        fd = (mp_wt_prime(t + h) - mp_wt_prime(t - h)) / (2 * h)
        assert eval_wtilde_second(1e-2) == pytest.approx(float(fd), rel=1e-4)

    def test_odd(self):
        ts = log_grid(1e-100, 1e-3, 65)
        np.testing.assert_allclose(eval_wtilde_second(-ts), -eval_wtilde_second(ts), rtol=1e-14)


class TestPsi:
    def test_zero(self):
        assert eval_psi(0.0) == (0.0, 0.0)

    def test_closed_form_at_einv(self):
        t = math.nextafter(math.exp(-math.e), 0.0) * 0.999
        p1, p2 = eval_psi(t)
        l1 = -math.log(t)
        assert p1 == pytest.approx(1812.0 / (t * l1 ** (1 / 3)), rel=1e-14)
        assert p2 == pytest.approx(3.0 + 2.0 * abs(eval_wtilde_second(t)), rel=1e-14)

    def test_psi1_at_1812e(self):
        # at l1 = 1 psi1 would be 1812 e, outside the wt domain; check the
        # formula through the g-weighted product instead near the boundary
        ts = log_grid(1e-290, 2 * T, 1000)
        p1, p2 = eval_psi(ts)
        assert np.all(np.isfinite(p1)) and np.all(np.isfinite(p2))

    def test_weighted_product_to_zero(self):
        # t (log 1/t) psi(t) |g(t)| stays finite and tends to 0 at 0
        ts = log_grid(1e-300, 2 * T, 2000)
        p1, p2 = eval_psi(ts)
        l1 = -np.log(ts)
        prod = ts * l1 * np.abs(eval_g(ts)) * (p1 + p2)
        assert np.all(np.isfinite(prod))
        assert prod[0] < 1e-6
        # the raw g*psi product obeys its envelope everywhere
        raw = np.abs(eval_g(ts)) * (p1 + p2)
        assert np.all(raw <= envelope_g_psi(ts) * (1 + 1e-12))


class TestPickT:
    def test_below_ceiling(self):
        assert T < 0.5 * math.exp(-math.e**2)
        assert T == 2.0**-27

    def test_boundary_condition(self):
        assert special._smallness(T) <= 1.0 / 125.0

    def test_samples(self):
        for t in log_grid(1e-300, T, 1000):
            assert special._smallness(float(t)) <= 1.0 / 125.0


class TestDeepOffsets:
    def test_quotient_matches_float_eval(self):
        for t in [1e-20, 1e-100, 1e-250]:
            s = Offset.from_float(t)
            assert special.wtilde_over_s_of(s) == pytest.approx(eval_wtilde(t) / t, rel=1e-12)
            assert special.wtilde_prime_of(s) == pytest.approx(eval_wtilde_prime(t), rel=1e-12)

    def test_beyond_float_range(self):
        # offset with log2|s| ~ -1e6: far below subnormal range
        s = Offset.from_log2(-1e6)
        q = special.wtilde_over_s_of(s)
        l2 = math.exp(s.ll)
        assert abs(q) <= l2
        assert math.isfinite(q)

    def test_g_of_logfloat(self):
        s = Offset.from_log2(-5000.0)
        gl = special.g_of(s)
        assert isinstance(gl, LogFloat)
        assert gl.log2() == pytest.approx(-5000.0 + math.log2(s.ll), rel=1e-9)


class TestSymmetryPrecision:
    def test_symmetric_pairs(self):
        rng = np.random.default_rng(7)
        ts = np.exp(rng.uniform(math.log(1e-250), math.log(1e-3), 200))
        np.testing.assert_allclose(eval_g(-ts), -eval_g(ts), rtol=1e-14)
        np.testing.assert_allclose(eval_wtilde(-ts), -eval_wtilde(ts), rtol=1e-14)
        np.testing.assert_allclose(eval_wtilde_prime(-ts), eval_wtilde_prime(ts), rtol=1e-14)


class TestL2Norm:
    def test_wtilde_prime_l2(self):
        # oracle: scipy quad on (eps, T) with the singular tail bounded by
        # the envelope integral
        from scipy.integrate import quad

        val = special.wtilde_prime_l2_norm(T)
        eps = 1e-14
        core, qerr = quad(lambda x: eval_wtilde_prime(x) ** 2, eps, T, limit=400)
        # tail over (0, eps): |wt'|^2 <= (3 l2)^2, integrate envelope crudely
        tail = eps * (3 * math.log(-math.log(eps))) ** 2
        assert val**2 / 2 == pytest.approx(core, rel=1e-6, abs=tail + 10 * qerr)
