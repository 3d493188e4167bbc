"""Catalog of the pathological Lagrangians with a uniform evaluation contract.

Each entry packages: the integrand L(t, y, p) (vectorized, convex in p and
nonnegative), the trajectory along which the weight terms vanish (when one is
distinguished), singular anchor times for quadrature pre-splitting, optional
Jensen domination data for certified lower bounds, and a strong-convexity
modulus tau_R where a quadratic-or-stronger p-term exists.

Entries
-------
quadratic_gradient   ||p||^2: the smooth control case.
tonelli_singular     phi(t, y - w(t)) + p^2 with the dense-singularity weight.
dense_osc            (y - v(t))^2 p^8, v the staircase of dyadic ramps.
dense_osc_lav        same integrand, pinned at x_0 = 0 where the Lipschitz
                     gap argument applies.
mania_reg            (y - v)^2 p^8 + eps p^2 with eps below the gap constant.
superlinear_osc      phi + p^2 + (y - w)^2 omega(p), omega superlinear.
lav_coercive         phi + Phi + p^2 + (y - (w + 3g))^2 (omega + Theta)(p)
                     on [0, T].
cusp_vector          ((y1 - |t|)^2 + (y2^3 - t)^2) p2^6 + eps (p1^2 + |p2|^sigma),
                     d = 2, reference (|t|, sign(t)|t|^(1/3)).

Series truncations (the k-sum inside each ramp density, the number of ramp
centers, the omega/Theta breakpoint count) are explicit parameters: they are
the fidelity knobs, with tails 2^(-3k), 2^(-n+2) and doubling growth.
Slope penalties like omega(2) already exceed float range; their breakpoint
values are scaled floats and plain evaluation saturates to inf honestly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import construction as con
from . import special
from .logfloat import LogFloat, Offset, lf
from .trajectory import PLTrajectory

__all__ = [
    "LagrangianSpec",
    "NoModulus",
    "ENTRIES",
    "GAP_BOUND",
    "make",
    "from_json",
    "eval_L",
    "eval_reference",
    "reference_energy",
    "tau_R",
    "ConvexPLFunction",
    "default_state",
    "mania_eta_lower_bound",
]

ENTRIES = (
    "quadratic_gradient",
    "tonelli_singular",
    "dense_osc",
    "dense_osc_lav",
    "mania_reg",
    "superlinear_osc",
    "lav_coercive",
    "cusp_vector",
)

GAP_BOUND = 2.0**-56  # Lipschitz-class floor of the dense-ramp example


class NoModulus(ValueError):
    """Entry carries no uniform strong-convexity certificate."""


_DEFAULT_STATE = None


def default_state() -> con.ConstructionState:
    """Shared faithful two-point construction used by entry defaults."""
    global _DEFAULT_STATE
    if _DEFAULT_STATE is None:
        T = special.pick_T()
        _DEFAULT_STATE = con.build([0.0, T / 2.0], mode="faithful")
    return _DEFAULT_STATE


def _lf_max2(a: LogFloat, b: LogFloat) -> LogFloat:
    return a if a >= b else b


# ---------------------------------------------------------------------------
# convex piecewise-affine slope penalties with scaled-float values
# ---------------------------------------------------------------------------

class ConvexPLFunction:
    """Even convex PL function: breakpoints xs >= 0, LogFloat values.

    Affine on each [xs[i], xs[i+1]], extended affinely past the last
    breakpoint with the final slope; evaluated at |p|.
    """

    def __init__(self, xs, values):
        self.xs = [float(x) for x in xs]
        self.values = list(values)
        if self.xs[0] != 0.0:
            raise ValueError("breakpoints must start at 0")
        self.slopes = [
            (self.values[i] - self.values[i - 1]) / (self.xs[i] - self.xs[i - 1])
            for i in range(1, len(self.xs))
        ]
        for a, b in zip(self.slopes, self.slopes[1:]):
            if b < a:
                raise ValueError("breakpoint values are not convex")

    def eval_lf(self, p: float) -> LogFloat:
        a = abs(p)
        if a >= self.xs[-1]:
            return self.values[-1] + self.slopes[-1] * (a - self.xs[-1])
        i = 1
        while self.xs[i] < a:
            i += 1
        w = (a - self.xs[i - 1]) / (self.xs[i] - self.xs[i - 1])
        return self.values[i - 1] * (1.0 - w) + self.values[i] * w

    def eval(self, p):
        ps = np.asarray(p, dtype=float)
        out = np.array([self.eval_lf(float(x)).to_float() for x in np.ravel(ps)])
        return out.reshape(ps.shape) if ps.shape else float(out[0])

    def doubling_ok(self) -> bool:
        return all(self.values[i] >= self.values[i - 1] * 2.0
                   for i in range(2, len(self.values)))


# ---------------------------------------------------------------------------
# spec base
# ---------------------------------------------------------------------------

@dataclass
class LagrangianSpec:
    entry: str
    params: dict
    domain: tuple
    dim: int
    anchors: list = field(default_factory=list)
    breakpoints: list = field(default_factory=list)  # extra quadrature splits
    jensen: dict | None = None  # {"component": i, "power": 2r}; omega entries override

    def eval_L(self, t, y, p):  # overridden per entry
        raise NotImplementedError

    def reference(self, t):
        raise NoModulus(f"{self.entry} has no reference trajectory")

    def has_reference(self) -> bool:
        return False

    def reference_bc(self):
        a, b = self.domain
        ra = self.reference(np.array([a]))[0]
        rb = self.reference(np.array([b]))[0]
        return ra, rb

    def reference_pl(self, n_points: int = 2049) -> PLTrajectory:
        """PL sampling of the reference, mesh refined at anchors/breakpoints."""
        a, b = self.domain
        mesh = np.unique(np.concatenate([
            np.linspace(a, b, n_points),
            [x for x in self.anchors if a <= x <= b],
            [x for x in self.breakpoints if a <= x <= b],
        ]))
        return PLTrajectory(mesh, self.reference(mesh))

    def reference_energy(self):
        raise NoModulus(f"{self.entry} has no reference trajectory")

    def tau_R(self, R: float) -> float:
        raise NoModulus(f"{self.entry} carries no strong-convexity modulus")

    def grad_p(self, t, y, p):
        """A subgradient of p -> L(t, y, p), central-differenced."""
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        p = np.asarray(p, dtype=float)
        if self.dim == 1:
            h = 1e-6 * np.maximum(1.0, np.abs(p))
            return (self.eval_L(t, y, p + h) - self.eval_L(t, y, p - h)) / (2 * h)
        out = np.zeros_like(p)
        for j in range(self.dim):
            h = 1e-6 * max(1.0, float(np.max(np.abs(p[..., j]))))
            dp = np.zeros_like(p)
            dp[..., j] = h
            out[..., j] = (self.eval_L(t, y, p + dp) - self.eval_L(t, y, p - dp)) / (2 * h)
        return out

    def to_json(self) -> dict:
        params = {}
        for k, v in self.params.items():
            if isinstance(v, con.ConstructionState):
                params[k] = {"__construction_state__": v.to_json()}
            elif isinstance(v, (ConvexPLFunction, list)) and k in ("omega", "theta", "t_nodes", "r_nodes"):
                continue  # derived from the scalar params at load time
            else:
                params[k] = v
        return {"entry": self.entry, "params": params,
                "domain": list(self.domain), "dim": self.dim}


def _params_from_json(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, dict) and "__construction_state__" in v:
            out[k] = con.ConstructionState.from_json(v["__construction_state__"])
        else:
            out[k] = v
    return out


def from_json(d: dict) -> "LagrangianSpec":
    return make(d["entry"], _params_from_json(d.get("params", {})))


# ---------------------------------------------------------------------------
# quadratic gradient
# ---------------------------------------------------------------------------

class QuadraticGradient(LagrangianSpec):
    def eval_L(self, t, y, p):
        p = np.asarray(p, dtype=float)
        if self.dim == 1:
            return p * p
        return np.sum(p * p, axis=-1)

    def tau_R(self, R: float) -> float:
        if R < 1:
            raise ValueError("modulus defined for R >= 1")
        return 0.5 * R**-2


def _make_quadratic(params):
    domain = tuple(params.get("domain", (0.0, 1.0)))
    return QuadraticGradient("quadratic_gradient", params, domain, int(params.get("dim", 1)))


# ---------------------------------------------------------------------------
# dense-ramp staircase entries
# ---------------------------------------------------------------------------

def farey_rationals(count: int) -> list:
    """0, 1, 1/2, 1/3, 2/3, 1/4, 3/4, ... (denominator order, reduced)."""
    out = [0.0, 1.0]
    q = 2
    while len(out) < count:
        for p in range(1, q):
            if math.gcd(p, q) == 1:
                out.append(p / q)
                if len(out) >= count:
                    break
        q += 1
    return out[:count]


class DenseOsc(LagrangianSpec):
    """(y - v(t))^2 p^8 with v' = 1 + truncated sum of dyadic ramp densities."""

    def _build(self):
        points = self.params["points"]
        K = self.params["truncation"]
        nodes = {0.0, 1.0}
        for n, x in enumerate(points):
            for k in range(K + 1):
                h = 2.0 ** (-n - 3 * k)
                for e in (x - h, x + h):
                    if 0.0 < e < 1.0:
                        nodes.add(e)
        mesh = np.array(sorted(nodes))
        mids = 0.5 * (mesh[1:] + mesh[:-1])
        slopes = np.ones_like(mids)
        rho_integrals = []
        for n, x in enumerate(points):
            total = 0.0
            for k in range(K + 1):
                h = 2.0 ** (-n - 3 * k)
                slopes[np.abs(mids - x) < h] += 2.0**k
                lo, hi = max(0.0, x - h), min(1.0, x + h)
                total += 2.0**k * max(hi - lo, 0.0)
            rho_integrals.append(total)
        vals = np.concatenate([[0.0], np.cumsum(slopes * np.diff(mesh))])
        self._v = PLTrajectory(mesh, vals)
        self._rho_integrals = rho_integrals
        self._vprime_l2_sq = float(np.sum(slopes**2 * np.diff(mesh)))
        self.breakpoints = [float(x) for x in mesh[1:-1]]
        self.anchors = [float(x) for x in points]
        self.jensen = {"component": 0, "power": 8}

    @property
    def v(self) -> PLTrajectory:
        return self._v

    @property
    def rho_integrals(self):
        return self._rho_integrals

    @property
    def vprime_l2_sq(self) -> float:
        return self._vprime_l2_sq

    def ramp_interval(self, n: int, k: int) -> tuple:
        x = self.params["points"][n]
        h = 2.0 ** (-n - 3 * k)
        return max(0.0, x - h), min(1.0, x + h)

    def eval_L(self, t, y, p):
        t = np.asarray(t, dtype=float)
        diff = np.asarray(y, dtype=float) - self._v.eval(t)
        return diff * diff * np.asarray(p, dtype=float) ** 8

    def reference(self, t):
        return self._v.eval(t)

    def has_reference(self) -> bool:
        return True

    def reference_pl(self, n_points: int = 0) -> PLTrajectory:
        return self._v

    def reference_energy(self):
        return 0.0, 0.0  # the weight vanishes identically on v


def _make_dense(entry, params):
    params = dict(params)
    params.setdefault("points", farey_rationals(4))
    params.setdefault("truncation", 6)
    pts = [float(x) for x in params["points"]]
    if len(pts) != len(set(pts)) or any(not (0.0 <= x <= 1.0) for x in pts):
        raise ValueError("ramp centers must be distinct points of [0, 1]")
    if entry == "dense_osc_lav" and pts[0] != 0.0:
        raise ValueError("dense_osc_lav requires points[0] == 0 (the gap argument pivots there)")
    params["points"] = pts
    params["truncation"] = int(params["truncation"])
    spec = DenseOsc(entry, params, (0.0, 1.0), 1)
    spec._build()
    return spec


class ManiaReg(DenseOsc):
    """Dense staircase weight plus eps p^2, eps below the Lipschitz gap."""

    def eval_L(self, t, y, p):
        p = np.asarray(p, dtype=float)
        return super().eval_L(t, y, p) + self.params["eps"] * p * p

    def reference_energy(self):
        return self.params["eps"] * self._vprime_l2_sq, 0.0

    def tau_R(self, R: float) -> float:
        if R < 1:
            raise ValueError("modulus defined for R >= 1")
        return 0.5 * self.params["eps"] * R**-2


def _make_mania(params):
    params = dict(params)
    params.setdefault("points", farey_rationals(4))
    params.setdefault("truncation", 6)
    probe = _make_dense("dense_osc_lav", {k: params[k] for k in ("points", "truncation")})
    ceiling = GAP_BOUND / probe.vprime_l2_sq
    params.setdefault("eps", 0.5 * ceiling)
    if not (0.0 < params["eps"] < ceiling):
        raise ValueError("eps must lie in (0, 2^-56 / ||v'||^2)")
    spec = ManiaReg("mania_reg", params, (0.0, 1.0), 1)
    spec._build()
    return spec


# ---------------------------------------------------------------------------
# construction-backed entries
# ---------------------------------------------------------------------------

class TonelliSingular(LagrangianSpec):
    """phi(t, y - w(t)) + p^2."""

    @property
    def state(self) -> con.ConstructionState:
        return self.params["state"]

    def eval_L(self, t, y, p):
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        p = np.asarray(p, dtype=float)
        w = con.eval_w_grid(self.state, t)
        return con.eval_phi_grid(self.state, t, y - w) + p * p

    def reference(self, t):
        return con.eval_w_grid(self.state, np.asarray(t, dtype=float))

    def has_reference(self) -> bool:
        return True

    def reference_energy(self):
        from .energy import adaptive_quad

        st = self.state
        return adaptive_quad(lambda ts: con.eval_w_prime_grid(st, ts) ** 2,
                             -st.T, st.T, anchors=st.points, tol=1e-10)

    def tau_R(self, R: float) -> float:
        if R < 1:
            raise ValueError("modulus defined for R >= 1")
        return 0.5 * R**-2


def _make_tonelli(params):
    params = dict(params)
    params.setdefault("state", default_state())
    st = params["state"]
    return TonelliSingular("tonelli_singular", params, (-st.T, st.T), 1,
                           anchors=[float(x) for x in st.points])


def _solve_steep_nodes(k_max: int):
    """Offsets t_k with profile quotient >= 2k+1: smallest double-log depth
    l2 >= 4k+2 whose triple log lands where the sine is >= 1/2 (this is the
    largest valid offset; ties with the previous node advance one window)."""
    win_lo, win_hi = math.pi / 6.0, 5.0 * math.pi / 6.0
    nodes = []
    prev_l2 = 0.0
    for k in range(1, k_max + 1):
        l2 = max(4.0 * k + 2.0, prev_l2 * (1.0 + 1e-9))
        for _ in range(100):
            l3 = math.log(l2)
            j = math.floor((l3 - win_lo) / (2.0 * math.pi))
            lo = win_lo + 2.0 * math.pi * j
            hi = win_hi + 2.0 * math.pi * j
            if lo <= l3 <= hi:
                break
            l2 = math.exp(win_lo + 2.0 * math.pi * (j + 1))
        nodes.append(Offset.from_ll(l2))
        prev_l2 = l2
    return nodes


class SuperlinearOsc(LagrangianSpec):
    """phi + p^2 + (y - w)^2 omega(p) with superlinear PL omega."""

    @property
    def state(self) -> con.ConstructionState:
        return self.params["state"]

    @property
    def omega(self) -> ConvexPLFunction:
        return self.params["omega"]

    @property
    def t_nodes(self):
        return self.params["t_nodes"]

    def eval_L(self, t, y, p):
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        p = np.asarray(p, dtype=float)
        w = con.eval_w_grid(self.state, t)
        diff = y - w
        weight = diff * diff
        om = self.omega.eval(p)
        with np.errstate(invalid="ignore"):
            term = np.where(weight == 0.0, 0.0, weight * om)
        return con.eval_phi_grid(self.state, t, diff) + p * p + term

    def reference(self, t):
        return con.eval_w_grid(self.state, np.asarray(t, dtype=float))

    def has_reference(self) -> bool:
        return True

    def reference_energy(self):
        from .energy import adaptive_quad

        st = self.state
        return adaptive_quad(lambda ts: con.eval_w_prime_grid(st, ts) ** 2,
                             -st.T, st.T, anchors=st.points, tol=1e-10)

    def tau_R(self, R: float) -> float:
        if R < 1:
            raise ValueError("modulus defined for R >= 1")
        return 0.5 * R**-2

    def steep_quotient(self, n: int, k: int) -> float:
        """(w(x_n + t_k) - w(x_n)) / t_k, certified per (n, k): requires t_k
        inside the splice interval of x_n, where w is exactly the profile."""
        st = self.state
        t_k = self.t_nodes[k - 1]
        floor_ll = (math.log(-math.log(st.T)) if n == 0
                    else st.artifacts[n].tau_ll)
        if t_k.ll < floor_ll:
            raise ValueError(f"t_{k} is not inside the splice interval of x_{n}")
        return special.wtilde_over_s_of(t_k)


def _make_superlinear(params):
    params = dict(params)
    params.setdefault("state", default_state())
    params.setdefault("k_max", 12)
    k_max = int(params["k_max"])
    nodes = _solve_steep_nodes(k_max)
    params["t_nodes"] = nodes
    values = [LogFloat.zero()]
    for k in range(1, k_max + 1):
        cand = (1.0 / nodes[k - 1].abs_lf()) * float(k)
        values.append(cand if k == 1 else _lf_max2(values[-1] * 2.0, cand))
    params["omega"] = ConvexPLFunction(list(range(0, k_max + 1)), values)
    st = params["state"]
    return SuperlinearOsc("superlinear_osc", params, (-st.T, st.T), 1,
                          anchors=[float(x) for x in st.points])


class LavCoercive(LagrangianSpec):
    """phi + Phi + p^2 + (y - (w + 3g))^2 (omega + Theta)(p) on [0, T]."""

    @property
    def state(self) -> con.ConstructionState:
        return self.params["state"]

    def _ref_grid(self, t):
        t = np.asarray(t, dtype=float)
        return con.eval_w_grid(self.state, t) + 3.0 * special.eval_g(t)

    def eval_L(self, t, y, p):
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        p = np.asarray(p, dtype=float)
        diff = y - self._ref_grid(t)
        weight = diff * diff
        om = self.params["omega"].eval(p) + self.params["theta"].eval(p)
        with np.errstate(invalid="ignore"):
            term = np.where(weight == 0.0, 0.0, weight * om)
        return (con.eval_phi_grid(self.state, t, diff) + self._Phi(t, diff)
                + p * p + term)

    def _Phi(self, t, ydiff):
        """min(7 |g''| |y|, 42 |g''| g), 0 at t = 0, in overflow-safe capped form."""
        t = np.asarray(t, dtype=float)
        a = np.abs(np.asarray(ydiff, dtype=float))
        out = np.zeros_like(t)
        nz = t != 0.0
        if np.any(nz):
            tn = np.abs(t[nz])
            l1 = -np.log(tn)
            l2 = np.log(l1)
            gpp_g = l2 * (1.0 / l1 + 1.0) / l1  # |g''(t)| g(t), bounded
            gg = tn * l2
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                ratio = np.where(a[nz] == 0.0, 0.0, a[nz] / gg)
            out[nz] = 7.0 * gpp_g * np.minimum(ratio, 6.0)
        return out

    def reference(self, t):
        return self._ref_grid(t)

    def has_reference(self) -> bool:
        return True

    def reference_energy(self):
        from .energy import adaptive_quad

        st = self.state
        return adaptive_quad(
            lambda ts: (con.eval_w_prime_grid(st, ts) + 3.0 * special.eval_g_prime(ts)) ** 2,
            0.0, st.T, anchors=[x for x in st.points if 0.0 <= x <= st.T], tol=1e-10)

    def tau_R(self, R: float) -> float:
        if R < 1:
            raise ValueError("modulus defined for R >= 1")
        return 0.5 * R**-2


def _solve_slope_floor_nodes(k_max: int, T: float):
    """r_k with g' >= k + 1 on (0, r_k]: solve l2 - exp(-l2) = k + 1; r_0 = 2T."""
    out = [Offset.from_float(2.0 * T)]
    for k in range(1, k_max + 1):
        lo, hi = float(k + 1), float(k + 2)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if mid - math.exp(-mid) < k + 1:
                lo = mid
            else:
                hi = mid
        out.append(Offset.from_ll(0.5 * (lo + hi)))
    return out


def _make_lav_coercive(params):
    params = dict(params)
    params.setdefault("state", default_state())
    params.setdefault("k_max", 12)
    st = params["state"]
    k_max = int(params["k_max"])
    spec = LavCoercive("lav_coercive", params, (0.0, st.T), 1,
                       anchors=[float(x) for x in st.points if 0.0 <= x <= st.T])
    norm_sq, _ = spec.reference_energy()
    params["ref_norm_sq"] = norm_sq
    r_nodes = _solve_slope_floor_nodes(k_max, st.T)
    params["r_nodes"] = r_nodes
    base = 64.0 * norm_sq  # 2^6 ||w' + 3g'||^2
    values = [LogFloat.zero()]
    for k in range(1, k_max + 1):
        cand = ((1.0 / r_nodes[k].abs_lf()) ** 3) * (base * float(k))
        values.append(cand if k == 1 else _lf_max2(values[-1] * 2.0, cand))
    params["theta"] = ConvexPLFunction([x / 4.0 for x in range(0, k_max + 1)], values)
    params["omega"] = _make_superlinear({"state": st, "k_max": k_max}).params["omega"]
    return spec


# ---------------------------------------------------------------------------
# vector cusp example
# ---------------------------------------------------------------------------

def mania_eta_lower_bound() -> float:
    """Certified floor of int (u^3 - t)^2 (u')^6 over {u(1) = 1, u < t^(1/3)/4
    somewhere}: the two-crossing chord argument between the quarter and half
    levels of t^(1/3) gives (49/64)((2^(1/3) - 1)/4)^6 regardless of where the
    crossing happens.
    """
    return (49.0 / 64.0) * ((2.0 ** (1.0 / 3.0) - 1.0) / 4.0) ** 6


class CuspVector(LagrangianSpec):
    def eval_L(self, t, y, p):
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        p = np.asarray(p, dtype=float)
        sigma = self.params["sigma"]
        eps = self.params["eps"]
        w1 = (y[..., 0] - np.abs(t)) ** 2
        w2 = (y[..., 1] ** 3 - t) ** 2
        return (w1 + w2) * p[..., 1] ** 6 + eps * (
            p[..., 0] ** 2 + np.abs(p[..., 1]) ** sigma)

    def reference(self, t):
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (2,))
        out[..., 0] = np.abs(t)
        out[..., 1] = np.sign(t) * np.cbrt(np.abs(t))
        return out

    def has_reference(self) -> bool:
        return True

    def reference_energy(self):
        # eps * int(|v1'|^2 + |v2'|^sigma) in closed form:
        # 2 + 2 * 3^-sigma / (1 - 2 sigma/3)
        sigma = self.params["sigma"]
        eps = self.params["eps"]
        return eps * (2.0 + 2.0 * 3.0**-sigma / (1.0 - 2.0 * sigma / 3.0)), 1e-15

    def tau_R(self, R: float) -> float:
        if R < 1:
            raise ValueError("modulus defined for R >= 1")
        sigma = self.params["sigma"]
        eps = self.params["eps"]
        # the quadratic sits only in p1; |p2|^sigma supplies the modulus
        # sigma (sigma-1) (R+1)^(sigma-2) on the bounded box
        mod = min(2.0, sigma * (sigma - 1.0) * (R + 1.0) ** (sigma - 2.0))
        return 0.25 * eps * mod * R**-2


def _make_cusp(params):
    params = dict(params)
    params.setdefault("sigma", 1.25)
    sigma = float(params["sigma"])
    if not (1.0 < sigma < 1.5):
        raise ValueError("sigma must lie in (1, 3/2)")
    params.setdefault("eta", mania_eta_lower_bound())
    slope_integral = 2.0 + 2.0 * 3.0**-sigma / (1.0 - 2.0 * sigma / 3.0)
    ceiling = min(params["eta"], 2.0**-11) / slope_integral
    params.setdefault("eps", 0.5 * ceiling)
    if not (0.0 < params["eps"] < ceiling):
        raise ValueError("eps above the smallness ceiling")
    return CuspVector("cusp_vector", params, (-1.0, 1.0), 2, anchors=[0.0],
                      jensen={"component": 1, "power": 6})


# ---------------------------------------------------------------------------
# front door
# ---------------------------------------------------------------------------

_MAKERS = {
    "quadratic_gradient": _make_quadratic,
    "tonelli_singular": _make_tonelli,
    "dense_osc": lambda p: _make_dense("dense_osc", p),
    "dense_osc_lav": lambda p: _make_dense("dense_osc_lav", p),
    "mania_reg": _make_mania,
    "superlinear_osc": _make_superlinear,
    "lav_coercive": _make_lav_coercive,
    "cusp_vector": _make_cusp,
}


def make(entry: str, params: dict | None = None) -> LagrangianSpec:
    if entry not in _MAKERS:
        raise ValueError(f"unknown catalog entry {entry!r}; choose from {ENTRIES}")
    return _MAKERS[entry](dict(params or {}))


def eval_L(spec: LagrangianSpec, t, y, p):
    return spec.eval_L(t, y, p)


def eval_reference(spec: LagrangianSpec, t):
    return spec.reference(t)


def reference_energy(spec: LagrangianSpec):
    return spec.reference_energy()


def tau_R(spec: LagrangianSpec, R: float) -> float:
    return spec.tau_R(R)
