"""Special functions of the singular minimizer construction.

Everything here is built from iterated logarithms of 1/|t|:

    l1 = log 1/|t|,   l2 = log l1,   l3 = log l2,

    g(t)  = t * l2                       (odd, strictly increasing near 0)
    wt(t) = g(t) * sin(l3)               (odd, the basic oscillating profile)

together with the closed-form first and second derivatives of wt, the weight
coefficients psi1, psi2, and the analytic envelopes that bound them.  The
envelopes, not sampled suprema, are what the construction module uses to
derive its constants: an envelope cannot under-estimate a supremum.

Evaluation policy: the inner log is computed from -log|t| directly (never
through 1/t), so arguments down to 1e-300 are safe in binary64.  Singular
points raise ``SingularPointError``; arguments outside the declared domains
raise ``DomainError``.  NaN/Inf are never returned on the declared domains.

For offsets below float range there is a parallel scalar API taking
:class:`varlab.logfloat.Offset` arguments (suffix ``_of``); ratios such as
wt(s)/s stay ordinary floats at any depth and are returned as such.
"""

from __future__ import annotations

import math

import numpy as np

from .logfloat import LN2, LogFloat, Offset

__all__ = [
    "DomainError",
    "SingularPointError",
    "E_INV",
    "EXP_ME",
    "EXP_ME2_HALF",
    "eval_g",
    "eval_g_prime",
    "eval_g_second",
    "eval_wtilde",
    "eval_wtilde_prime",
    "eval_wtilde_second",
    "eval_psi",
    "pick_T",
    "envelope_wtilde_prime",
    "envelope_wtilde_second",
    "envelope_g_wtilde_second",
    "envelope_psi",
    "envelope_g_psi",
    "sup_envelope_g_psi",
    "wtilde_prime_l2_norm",
]


class DomainError(ValueError):
    """Argument outside the declared domain of a special function."""


class SingularPointError(ValueError):
    """Evaluation requested exactly at a singular point."""


# Domain thresholds, binary64 constants rounded down so strict guards are safe.
E_INV = math.nextafter(math.exp(-1.0), 0.0)  # 1/e
EXP_ME = math.nextafter(math.exp(-math.e), 0.0)  # e^-e
EXP_ME2_HALF = math.nextafter(0.5 * math.exp(-math.e**2), 0.0)  # e^-e^2 / 2


def _logs(t, bound, name):
    """Return (|t|, l1, l2, l3) arrays for t != 0 within |t| < bound."""
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    if np.any(a >= bound) or not np.all(np.isfinite(t)):
        raise DomainError(f"{name}: require |t| < {bound!r}")
    nz = a > 0.0
    l1 = np.empty_like(a)
    l2 = np.empty_like(a)
    l3 = np.empty_like(a)
    l1[~nz] = np.nan
    l2[~nz] = np.nan
    l3[~nz] = np.nan
    an = a[nz]
    l1n = -np.log(an)
    l2n = np.log(l1n)
    l1[nz] = l1n
    l2[nz] = l2n
    with np.errstate(invalid="ignore"):
        l3[nz] = np.log(l2n)
    return a, l1, l2, l3


def _scalarize(t, out):
    return float(out) if np.isscalar(t) or np.ndim(t) == 0 else out


# ---------------------------------------------------------------------------
# primary evaluations
# ---------------------------------------------------------------------------

def eval_g(t):
    """g(t) = t log log 1/|t| for t != 0, g(0) = 0.  Domain |t| < 1/e.  Odd."""
    a, _, l2, _ = _logs(t, E_INV, "eval_g")
    out = np.where(a > 0.0, np.asarray(t, dtype=float) * np.where(a > 0.0, l2, 0.0), 0.0)
    return _scalarize(t, out)


def eval_g_prime(t):
    """g'(t) = log log 1/|t| - 1/log 1/|t| for t != 0 (even).  Domain |t| < 1/e."""
    a, l1, l2, _ = _logs(t, E_INV, "eval_g_prime")
    if np.any(a == 0.0):
        raise SingularPointError("g' undefined at t = 0")
    return _scalarize(t, l2 - 1.0 / l1)


def eval_g_second(t):
    """g''(t) = -sign(t)/(|t| log 1/|t|) * (1/log 1/|t| + 1).  Odd, |t| < 1/e."""
    a, l1, _, _ = _logs(t, E_INV, "eval_g_second")
    if np.any(a == 0.0):
        raise SingularPointError("g'' undefined at t = 0")
    mag = (1.0 / (a * l1)) * (1.0 / l1 + 1.0)
    return _scalarize(t, -np.sign(np.asarray(t, dtype=float)) * mag)


def eval_wtilde(t):
    """wt(t) = g(t) sin(log log log 1/|t|), wt(0) = 0.  Domain |t| < e^-e.  Odd."""
    a, _, l2, l3 = _logs(t, EXP_ME, "eval_wtilde")
    tt = np.asarray(t, dtype=float)
    val = np.where(a > 0.0, tt * np.where(a > 0.0, l2 * np.sin(l3), 0.0), 0.0)
    return _scalarize(t, val)


def eval_wtilde_prime(t):
    """Closed-form wt'(t) (even); singular-point error at t = 0."""
    a, l1, l2, l3 = _logs(t, EXP_ME, "eval_wtilde_prime")
    if np.any(a == 0.0):
        raise SingularPointError("wt' undefined at t = 0")
    s, c = np.sin(l3), np.cos(l3)
    return _scalarize(t, l2 * s - (s + c) / l1)


def eval_wtilde_second(t):
    """Closed-form wt''(t) (odd); singular-point error at t = 0.

    Hand-differentiated once from the closed form of wt' and frozen here;
    unit-tested against finite differences.
    """
    a, l1, l2, l3 = _logs(t, EXP_ME, "eval_wtilde_second")
    if np.any(a == 0.0):
        raise SingularPointError("wt'' undefined at t = 0")
    s, c = np.sin(l3), np.cos(l3)
    mag = (-(s + c) + (c - s) / (l1 * l2) - (s + c) / l1) / (a * l1)
    return _scalarize(t, np.sign(np.asarray(t, dtype=float)) * mag)


def eval_psi(t):
    """(psi1, psi2) with psi1 = 1812/(|t| (log 1/|t|)^(1/3)), psi2 = 3 + 2|wt''|.

    Both are 0 at t = 0 by definition.  Domain |t| < e^-e.
    """
    a, l1, _, _ = _logs(t, EXP_ME, "eval_psi")
    nz = a > 0.0
    psi1 = np.zeros_like(a)
    psi2 = np.zeros_like(a)
    if np.any(nz):
        psi1[nz] = 1812.0 / (a[nz] * np.cbrt(l1[nz]))
        tnz = np.asarray(t, dtype=float)[nz]
        psi2[nz] = 3.0 + 2.0 * np.abs(eval_wtilde_second(tnz))
    return _scalarize(t, psi1), _scalarize(t, psi2)


# ---------------------------------------------------------------------------
# analytic envelopes (all valid on 0 < |t| <= 2T, decreasing unless noted)
# ---------------------------------------------------------------------------

def envelope_wtilde_prime(t):
    """|wt'(t)| <= 3 log log 1/|t| on 0 < |t| <= 2T."""
    a, _, l2, _ = _logs(t, E_INV, "envelope_wtilde_prime")
    if np.any(a == 0.0):
        raise SingularPointError("envelope undefined at 0")
    return _scalarize(t, 3.0 * l2)


def envelope_wtilde_second(t):
    """|wt''(t)| <= 6/(|t| log 1/|t|)."""
    a, l1, _, _ = _logs(t, E_INV, "envelope_wtilde_second")
    if np.any(a == 0.0):
        raise SingularPointError("envelope undefined at 0")
    return _scalarize(t, 6.0 / (a * l1))


def envelope_g_wtilde_second(t):
    """|g(t) wt''(t)| <= 6 log log(1/|t|) / log(1/|t|)."""
    a, l1, l2, _ = _logs(t, E_INV, "envelope_g_wtilde_second")
    if np.any(a == 0.0):
        raise SingularPointError("envelope undefined at 0")
    return _scalarize(t, 6.0 * l2 / l1)


def envelope_psi(t):
    """psi(t) <= 1812/(|t| l1^(1/3)) + 3 + 12/(|t| l1); decreasing in |t|."""
    a, l1, _, _ = _logs(t, E_INV, "envelope_psi")
    if np.any(a == 0.0):
        raise SingularPointError("envelope undefined at 0")
    return _scalarize(t, 1812.0 / (a * np.cbrt(l1)) + 3.0 + 12.0 / (a * l1))


def envelope_g_psi(t):
    """|g(t)| psi(t) <= 1812 l2/l1^(1/3) + 3|g(t)| + 12 l2/l1."""
    a, l1, l2, _ = _logs(t, E_INV, "envelope_g_psi")
    if np.any(a == 0.0):
        raise SingularPointError("envelope undefined at 0")
    return _scalarize(t, 1812.0 * l2 / np.cbrt(l1) + 3.0 * a * l2 + 12.0 * l2 / l1)


_X_PEAK = math.exp(3.0)  # argmax of log(x)/x^(1/3)


def _h_unimodal(l1: float) -> float:
    return math.log(l1) / l1 ** (1.0 / 3.0)


def sup_envelope_g_psi(l1_min: float) -> float:
    """sup over 0 < |t| <= exp(-l1_min) of the |g| psi envelope.

    The 1812 l2/l1^(1/3) term is unimodal in l1 with peak at l1 = e^3; the
    other two terms are increasing in |t|, so the supremum has a closed form.
    """
    if l1_min <= 1.0:
        raise DomainError("sup_envelope_g_psi needs l1_min > 1")
    h = _h_unimodal(max(l1_min, _X_PEAK))
    l2 = math.log(l1_min)
    a = math.exp(-l1_min)
    return 1812.0 * h + 3.0 * a * l2 + 12.0 * l2 / l1_min


# ---------------------------------------------------------------------------
# deep-offset scalar API
# ---------------------------------------------------------------------------

def g_of(s: Offset) -> LogFloat:
    if s.ll <= 0.0:
        raise DomainError("g_of: need |s| < 1/e")
    return s.lf() * s.ll


def g_over_s_of(s: Offset) -> float:
    """g(s)/s = log log 1/|s| (any depth)."""
    if s.ll <= 0.0:
        raise DomainError("need |s| < 1/e")
    return s.ll


def wtilde_of(s: Offset) -> LogFloat:
    return g_of(s) * math.sin(s.lll)


def wtilde_over_s_of(s: Offset) -> float:
    """wt(s)/s = l2 sin(l3); stays an ordinary float at any depth."""
    return s.ll * math.sin(s.lll)


def wtilde_prime_of(s: Offset) -> float:
    l2 = s.ll
    l3 = s.lll
    l1 = s.l1
    corr = (math.sin(l3) + math.cos(l3)) / l1 if math.isfinite(l1) else 0.0
    return l2 * math.sin(l3) - corr


def wtilde_second_of(s: Offset) -> LogFloat:
    l2 = s.ll
    l3 = s.lll
    l1 = s.l1
    if not math.isfinite(l1):
        raise DomainError("wtilde_second_of beyond LogFloat range")
    sn, cs = math.sin(l3), math.cos(l3)
    bracket = -(sn + cs) + (cs - sn) / (l1 * l2) - (sn + cs) / l1
    inv_sl1 = 1.0 / (s.abs_lf() * l1)
    return inv_sl1 * bracket * s.sign


def psi_envelope_of(s: Offset) -> LogFloat:
    """LogFloat psi envelope at a (possibly deep) offset."""
    l1 = s.l1
    if not math.isfinite(l1):
        raise DomainError("psi envelope beyond LogFloat range")
    inv_s = 1.0 / s.abs_lf()
    return inv_s * (1812.0 / l1 ** (1.0 / 3.0)) + LogFloat.from_float(3.0) + inv_s * (12.0 / l1)


# ---------------------------------------------------------------------------
# domain half-width
# ---------------------------------------------------------------------------

def _smallness(t: float) -> float:
    """(2t)^(1/3) log log 1/(2t); increasing on (0, e^-3/2)."""
    u = 2.0 * t
    return u ** (1.0 / 3.0) * math.log(-math.log(u))


def pick_T() -> float:
    """Largest power-of-two T < e^-e^2/2 with (2t)^(1/3) log log 1/(2t) <= 1/125
    on all of (0, T].

    The left-hand side is increasing in t for 2t <= e^-3 (verified on a grid),
    so the boundary value decides.  A power of two is bit-exactly reproducible.
    """
    bound = 1.0 / 125.0
    k = 12  # 2^-12 > e^-e^2/2, start above and walk down
    while True:
        T = 2.0**-k
        if T < EXP_ME2_HALF and _smallness(T) <= bound:
            break
        k += 1
        if k > 200:
            raise RuntimeError("pick_T failed to terminate")
    # monotonicity check of the left-hand side on (0, T]
    ts = np.exp(np.linspace(math.log(1e-300), math.log(T), 512))
    vals = np.array([_smallness(float(x)) for x in ts])
    if not np.all(np.diff(vals) >= -1e-18):
        raise RuntimeError("smallness function not monotone on (0, T]")
    if not np.all(vals <= bound):
        raise RuntimeError("smallness bound violated inside (0, T]")
    return T


# ---------------------------------------------------------------------------
# reference L2 norm of wt'
# ---------------------------------------------------------------------------

_GAUSS5_X, _GAUSS5_W = np.polynomial.legendre.leggauss(5)


def wtilde_prime_l2_norm(T: float, rel_tol: float = 1e-14) -> float:
    """||wt'||_L2(-T,T) by geometric dyadic panels accumulating toward 0.

    wt'^2 ~ (3 log log 1/t)^2 near 0, so panel contributions decay
    geometrically with the panel scale and the loop below terminates early.
    """
    if not (0.0 < T < EXP_ME):
        raise DomainError("need 0 < T < e^-e")
    total = 0.0
    hi = T
    for _ in range(1200):
        lo = hi / 2.0
        mid = 0.5 * (hi + lo)
        half = 0.5 * (hi - lo)
        x = mid + half * _GAUSS5_X
        total_panel = float(np.sum(_GAUSS5_W * eval_wtilde_prime(x) ** 2) * half)
        total += total_panel
        if total_panel < rel_tol * total and lo < 1e-40:
            break
        hi = lo
    return math.sqrt(2.0 * total)  # even integrand
