"""Scaled floating-point numbers and deep offsets.

The singular constructions in this package produce constants whose magnitudes
fall far outside binary64 range (half-widths like 2^(-1e74)), while ratios and
log-log quantities built from them stay perfectly ordinary.  Two small types
carry that bookkeeping:

* ``LogFloat`` -- a number stored as (mantissa, log2 scale) with an exact
  integer scale, so products, quotients, powers and comparisons work at any
  magnitude.  Addition absorbs terms more than ~2^120 apart, which is the
  correct behaviour for the envelope arithmetic done here.

* ``Offset`` -- a signed offset s from an anchor point, parametrized by
  ll = log log (1/|s|) so that offsets far below the subnormal range remain
  first-class.  The special functions of this package depend on s only
  through log(1/|s|) and its iterated logs, so this parametrization is the
  natural exact one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

LN2 = math.log(2.0)
INV_LN2 = 1.0 / LN2

# exponent gap beyond which the smaller addend cannot affect a binary64 mantissa
_ABSORB_BITS = 120


class OffsetTooDeep(ValueError):
    """Offset magnitude is below what even log2-scale bookkeeping can hold."""


def _normalize(m: float, e: int) -> tuple[float, int]:
    if m == 0.0:
        return 0.0, 0
    fm, fe = math.frexp(m)  # fm in [0.5, 1)
    return fm * 2.0, e + fe - 1  # mantissa in [1, 2)


@dataclass(frozen=True, slots=True)
class LogFloat:
    """Signed real carried as mantissa * 2**scale with an exact int scale.

    mantissa is 0.0 or has absolute value in [1, 2).
    """

    m: float
    e: int

    # -- constructors ------------------------------------------------------
    @staticmethod
    def from_float(x: float) -> "LogFloat":
        if x == 0.0:
            return LogFloat(0.0, 0)
        if not math.isfinite(x):
            raise ValueError("LogFloat cannot represent inf/nan")
        fm, fe = math.frexp(x)
        return LogFloat(fm * 2.0, fe - 1)

    @staticmethod
    def from_log2(log2abs: float, sign: int = 1) -> "LogFloat":
        """Number with |value| = 2**log2abs.  log2abs may be huge (float)."""
        if sign == 0:
            return LogFloat(0.0, 0)
        if not math.isfinite(log2abs):
            raise ValueError("non-finite log2 scale")
        e = math.floor(log2abs)
        m = 2.0 ** (log2abs - e)
        m, e = _normalize(m, int(e))
        return LogFloat(math.copysign(m, sign), e)

    @staticmethod
    def from_log2_lf(log2abs: "LogFloat", sign: int = 1) -> "LogFloat":
        """Number with |value| = 2**log2abs where log2abs itself is scaled.

        Exponents beyond float range become exact (huge) Python ints; the
        mantissa carries whatever precision the log had left, which at these
        scales is magnitude bookkeeping only.
        """
        if sign == 0 or log2abs.is_zero():
            return LogFloat(math.copysign(1.0, sign), 0) if sign else LogFloat.zero()
        if -1e15 < log2abs.e < 53:
            return LogFloat.from_log2(log2abs.to_float(), sign)
        e_int = log2abs.floor_int()
        return LogFloat(math.copysign(1.0, sign), e_int)

    def floor_int(self) -> int:
        """Exact integer floor; the 52-bit mantissa is exact for e >= 52."""
        if self.m == 0.0:
            return 0
        if self.e <= 52:
            return math.floor(self.to_float())
        base = int(self.m * 2.0**52)  # integral: |m| in [1,2) with 52-bit fraction
        return base << (self.e - 52)

    @staticmethod
    def zero() -> "LogFloat":
        return LogFloat(0.0, 0)

    # -- queries -----------------------------------------------------------
    @property
    def sign(self) -> int:
        return 0 if self.m == 0.0 else (1 if self.m > 0 else -1)

    def is_zero(self) -> bool:
        return self.m == 0.0

    def log2(self) -> float:
        """log2 |value| as a float; saturates to +-inf past huge-int scales."""
        if self.m == 0.0:
            raise ValueError("log2 of zero")
        try:
            return float(self.e) + math.log2(abs(self.m))
        except OverflowError:
            return math.inf if self.e > 0 else -math.inf

    def ln(self) -> float:
        return self.log2() * LN2

    def to_float(self) -> float:
        """Round to binary64; underflows to (sub)normal/0, overflows to inf."""
        if self.m == 0.0:
            return 0.0
        if self.e > 1100:
            return math.copysign(math.inf, self.m)
        if self.e < -1100:
            return math.copysign(0.0, self.m)
        try:
            return math.ldexp(self.m, self.e)
        except OverflowError:
            return math.copysign(math.inf, self.m)

    # -- arithmetic --------------------------------------------------------
    def __neg__(self) -> "LogFloat":
        return LogFloat(-self.m, self.e)

    def __abs__(self) -> "LogFloat":
        return LogFloat(abs(self.m), self.e)

    @staticmethod
    def _coerce(x) -> "LogFloat":
        if isinstance(x, LogFloat):
            return x
        return LogFloat.from_float(float(x))

    def __mul__(self, other) -> "LogFloat":
        o = self._coerce(other)
        if self.m == 0.0 or o.m == 0.0:
            return LogFloat.zero()
        m, e = _normalize(self.m * o.m, self.e + o.e)
        return LogFloat(m, e)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "LogFloat":
        o = self._coerce(other)
        if o.m == 0.0:
            raise ZeroDivisionError("LogFloat division by zero")
        if self.m == 0.0:
            return LogFloat.zero()
        m, e = _normalize(self.m / o.m, self.e - o.e)
        return LogFloat(m, e)

    def __rtruediv__(self, other) -> "LogFloat":
        return self._coerce(other) / self

    def __add__(self, other) -> "LogFloat":
        o = self._coerce(other)
        if self.m == 0.0:
            return o
        if o.m == 0.0:
            return self
        hi, lo = (self, o) if self.e >= o.e else (o, self)
        d = hi.e - lo.e
        if d > _ABSORB_BITS:
            return hi
        m = hi.m + math.ldexp(lo.m, -d)
        if m == 0.0:
            return LogFloat.zero()
        m, e = _normalize(m, hi.e)
        return LogFloat(m, e)

    __radd__ = __add__

    def __sub__(self, other) -> "LogFloat":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "LogFloat":
        return self._coerce(other) + (-self)

    def __pow__(self, k: int) -> "LogFloat":
        if not isinstance(k, int):
            raise TypeError("LogFloat powers are integer-only; use root/from_log2")
        if k == 0:
            return LogFloat.from_float(1.0)
        if self.m == 0.0:
            return LogFloat.zero()
        sign = 1 if (self.m > 0 or k % 2 == 0) else -1
        return LogFloat.from_log2(self.log2() * k, sign)

    def root(self, k: int) -> "LogFloat":
        if self.m < 0.0:
            raise ValueError("root of negative LogFloat")
        if self.m == 0.0:
            return LogFloat.zero()
        return LogFloat.from_log2(self.log2() / k)

    # -- comparisons (total order) ------------------------------------------
    def _cmp(self, other) -> int:
        o = self._coerce(other)
        sa, sb = self.sign, o.sign
        if sa != sb:
            return -1 if sa < sb else 1
        if sa == 0:
            return 0
        # same nonzero sign: compare magnitudes via (e, |m|)
        if self.e != o.e:
            mag = -1 if self.e < o.e else 1
        elif abs(self.m) == abs(o.m):
            mag = 0
        else:
            mag = -1 if abs(self.m) < abs(o.m) else 1
        return mag if sa > 0 else -mag

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __eq__(self, other):
        if isinstance(other, (LogFloat, int, float)):
            return self._cmp(other) == 0
        return NotImplemented

    def __hash__(self):
        return hash((self.m, self.e))

    # -- serialization -------------------------------------------------------
    def to_json(self) -> dict:
        return {"mantissa": self.m, "log2": self.e}

    @staticmethod
    def from_json(d: dict) -> "LogFloat":
        return LogFloat(float(d["mantissa"]), int(d["log2"]))

    def __repr__(self) -> str:
        if self.m == 0.0:
            return "LogFloat(0)"
        return f"LogFloat({self.m:.17g}*2^{self.e})"


def lf(x) -> LogFloat:
    return LogFloat._coerce(x)


def lf_min(*xs: LogFloat) -> LogFloat:
    out = xs[0]
    for x in xs[1:]:
        if x < out:
            out = x
    return out


def lf_max(*xs: LogFloat) -> LogFloat:
    out = xs[0]
    for x in xs[1:]:
        if x > out:
            out = x
    return out


@dataclass(frozen=True, slots=True)
class Offset:
    """Signed offset s from an anchor, |s| < 1, parametrized by ll = log log 1/|s|.

    ``f`` keeps the exact binary64 value when one exists (round-trip fidelity
    for ordinary offsets); the ll parametrization is authoritative otherwise.
    ll may be any float: offsets with |s| in (1/e, 1) have ll < 0.
    """

    sign: int
    ll: float  # log log (1/|s|)
    f: float | None = None  # exact float value when representable

    # -- constructors --------------------------------------------------------
    @staticmethod
    def from_float(s: float) -> "Offset":
        if s == 0.0:
            raise ValueError("zero offset has no log-log parametrization")
        if not (abs(s) < 1.0):
            raise ValueError("Offset requires |s| < 1")
        l1 = -math.log(abs(s))
        return Offset(1 if s > 0 else -1, math.log(l1), s)

    @staticmethod
    def from_log2(log2abs: float, sign: int = 1) -> "Offset":
        if log2abs >= 0.0:
            raise ValueError("Offset requires |s| < 1")
        l1 = -log2abs * LN2
        f = None
        if log2abs > -1070.0:
            f = math.copysign(2.0**log2abs, sign)
            if f == 0.0:
                f = None
        return Offset(sign, math.log(l1), f)

    @staticmethod
    def from_l1(l1: float, sign: int = 1) -> "Offset":
        """Offset with log(1/|s|) = l1 > 0."""
        if l1 <= 0.0:
            raise ValueError("need l1 > 0")
        f = None
        if l1 < 740.0:
            f = math.copysign(math.exp(-l1), sign)
            if f == 0.0:
                f = None
        return Offset(sign, math.log(l1), f)

    @staticmethod
    def from_ll(ll: float, sign: int = 1) -> "Offset":
        o = Offset(sign, ll)
        l1 = o.l1
        if math.isfinite(l1) and l1 < 740.0:
            return Offset(sign, ll, math.copysign(math.exp(-l1), sign))
        return o

    # -- derived scales -------------------------------------------------------
    @property
    def l1(self) -> float:
        """log(1/|s|); +inf when deeper than float range."""
        try:
            return math.exp(self.ll)
        except OverflowError:
            return math.inf

    @property
    def lll(self) -> float:
        """log log log (1/|s|); requires |s| < 1/e."""
        if self.ll <= 0.0:
            raise ValueError("triple log needs |s| < 1/e")
        return math.log(self.ll)

    def log2abs(self) -> float:
        """log2 |s|; -inf if below float's log range."""
        l1 = self.l1
        return -l1 * INV_LN2 if math.isfinite(l1) else -math.inf

    def to_float(self) -> float:
        if self.f is not None:
            return self.f
        l1 = self.l1
        if not math.isfinite(l1):
            return math.copysign(0.0, self.sign)
        return math.copysign(math.exp(-l1) if l1 < 745 else 0.0, self.sign)

    def abs_lf(self) -> LogFloat:
        """|s| as a LogFloat (huge-int exponent once l1 passes float range)."""
        if self.f is not None:
            return LogFloat.from_float(abs(self.f))
        l1 = self.l1
        if math.isfinite(l1):
            return LogFloat.from_log2(-l1 * INV_LN2)
        # l1 = e^ll itself needs scaling: log2(l1) = ll / ln 2
        if self.ll * INV_LN2 > 1e300:
            raise OffsetTooDeep(f"offset with loglog(1/|s|) = {self.ll} beyond bookkeeping")
        l1_lf = LogFloat.from_log2(self.ll * INV_LN2)
        return LogFloat.from_log2_lf(-(l1_lf * INV_LN2))

    def lf(self) -> LogFloat:
        a = self.abs_lf()
        return a if self.sign > 0 else -a

    def __neg__(self) -> "Offset":
        return Offset(-self.sign, self.ll, None if self.f is None else -self.f)

    # magnitude comparisons against LogFloat thresholds -----------------------
    def mag_cmp(self, other: LogFloat) -> int:
        """Compare |self| with |other| (LogFloat): -1, 0, +1."""
        if other.is_zero():
            return 1
        lo = other.log2()
        l1 = self.l1
        if not math.isfinite(l1):
            return -1  # deeper than any LogFloat
        ls = -l1 * INV_LN2
        if ls == lo:
            return 0
        return -1 if ls < lo else 1

    def __repr__(self) -> str:
        if self.f is not None:
            return f"Offset({self.f:.6g})"
        return f"Offset(sign={self.sign}, loglog1/|s|={self.ll:.6g})"
