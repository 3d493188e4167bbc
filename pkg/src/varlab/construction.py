"""Inductive construction of the densely-singular minimizer and its weight.

Given finitely many points x_0 = 0, x_1, ..., x_N in (-T, T), this module
plans the full chain of construction constants (sigma_n, K_n, theta_n, T_n,
m_n, G_n, M_n, eta_n, R_n), builds the stage functions w_0 ... w_N by
splicing a translated copy of the oscillating profile wt into w_{n-1} through
explicit C^1 cut-offs, assembles the weight phi_n as a sum of capped-linear
pieces, and verifies the checkable stage conditions numerically.

Two modes:

* ``faithful`` -- every constant satisfies its defining inequality, derived
  from analytic envelopes (an envelope cannot under-estimate a supremum).
  The half-widths T_n, R_n, tau_n collapse to scales like 2^(-1e74); they are
  carried as (mantissa, log2) pairs and evaluation near each x_n happens in
  local charts parametrized by log log (1/|offset|).  The build fails loudly
  (``FaithfulPrecisionExceeded``) once even that bookkeeping cannot hold a
  constant.

* ``illustrative`` -- the caller supplies decay schedules for T_n and R_n at
  visualizable scales; the splice structure is preserved exactly and every
  violated inequality is recorded in ``state.violations`` instead of
  aborting.

Evaluation convention: ordinary float arguments follow the five-branch
definition directly; near an anchor x_i, offsets may be passed as
:class:`varlab.logfloat.Offset` so that structure far below 1e-300 stays
addressable.  Values relative to an anchor come back as LogFloats.

The bookkeeping constant M_n sums the Lipschitz budgets of the weight pieces
that actually exist in this finite build (indices up to min(m_n, N)); in
illustrative mode the user schedule is extended geometrically to cover
phantom indices up to m_n.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import special
from .logfloat import INV_LN2, LN2, LogFloat, Offset, lf, lf_max, lf_min
from .special import SingularPointError

__all__ = [
    "ConstructionState",
    "StageConstants",
    "StageArtifacts",
    "InvariantReport",
    "FaithfulPrecisionExceeded",
    "StageBuildFailure",
    "plan_constants",
    "build_stage",
    "build",
    "eval_w",
    "eval_w_prime",
    "eval_w_grid",
    "eval_w_prime_grid",
    "eval_phi",
    "eval_phi_grid",
    "chart_delta",
    "chart_prime",
    "verify_stage",
    "dini_certificate",
    "sample_trajectory",
]


class FaithfulPrecisionExceeded(RuntimeError):
    """A faithful-mode constant fell outside what scaled floats can carry."""


class StageBuildFailure(RuntimeError):
    """No matching-slope root found for the splice; stage cannot be built."""


ONE = LogFloat.from_float(1.0)


@dataclass
class StageConstants:
    n: int
    x: float
    sigma: float  # min_{i<n} |x_i - x_n| / 2   (T for n = 0)
    K: float  # slope/curvature budget of earlier stages at distance sigma
    theta: float  # 10 K_n / sigma_n  (1 for n = 0)
    T_n: LogFloat  # half-width of the modification interval Y_n
    R_n: LogFloat  # half-width of the splice interval Z_n
    eta: float  # g(sigma_n)  (0 for n = 0)
    m_idx: int | None = None  # 2^-m <= T_{n+1}^2 / 32   (n <= N-1 only)
    G_radius: LogFloat | None = None  # cover radius around x_0..x_{min(m,N)}
    M: LogFloat | None = None  # Lipschitz budget of the covered weight pieces

    def to_json(self):
        return {
            "n": self.n, "x": self.x, "sigma": self.sigma, "K": self.K,
            "theta": self.theta, "T_n": self.T_n.to_json(), "R_n": self.R_n.to_json(),
            "eta": self.eta, "m_idx": self.m_idx,
            "G_radius": None if self.G_radius is None else self.G_radius.to_json(),
            "M": None if self.M is None else self.M.to_json(),
        }

    @staticmethod
    def from_json(d):
        return StageConstants(
            d["n"], d["x"], d["sigma"], d["K"], d["theta"],
            LogFloat.from_json(d["T_n"]), LogFloat.from_json(d["R_n"]), d["eta"],
            d["m_idx"],
            None if d["G_radius"] is None else LogFloat.from_json(d["G_radius"]),
            None if d["M"] is None else LogFloat.from_json(d["M"]),
        )


@dataclass
class StageArtifacts:
    """Splice data of one stage n >= 1 (stage 0 is the bare profile)."""

    m: float  # matching slope w_{n-1}'(x_n)
    tau_ll: float  # log log (1/tau_n): authoritative depth of the splice root
    tau: LogFloat
    rho: float  # w_{n-1}(x_n), the vertical shift
    w2: float  # w_{n-1}''(x_n), used by first-order expansions
    delta_minus: LogFloat
    delta_plus: LogFloat
    c_minus: LogFloat
    c_plus: LogFloat
    d_minus: LogFloat
    d_plus: LogFloat
    wt_tau: LogFloat  # wt(tau_n)

    def to_json(self):
        return {
            "m": self.m, "tau_ll": self.tau_ll, "tau": self.tau.to_json(),
            "rho": self.rho, "w2": self.w2,
            "delta_minus": self.delta_minus.to_json(), "delta_plus": self.delta_plus.to_json(),
            "c_minus": self.c_minus.to_json(), "c_plus": self.c_plus.to_json(),
            "d_minus": self.d_minus.to_json(), "d_plus": self.d_plus.to_json(),
            "wt_tau": self.wt_tau.to_json(),
        }

    @staticmethod
    def from_json(d):
        return StageArtifacts(
            d["m"], d["tau_ll"], LogFloat.from_json(d["tau"]), d["rho"], d["w2"],
            LogFloat.from_json(d["delta_minus"]), LogFloat.from_json(d["delta_plus"]),
            LogFloat.from_json(d["c_minus"]), LogFloat.from_json(d["c_plus"]),
            LogFloat.from_json(d["d_minus"]), LogFloat.from_json(d["d_plus"]),
            LogFloat.from_json(d["wt_tau"]),
        )


@dataclass
class ConstructionState:
    mode: str  # "faithful" | "illustrative"
    T: float
    points: list
    constants: list
    C: float  # weight ceiling 1 + sup 5|g| psi (envelope)
    wt_l2: float  # ||wt'||_L2(-T, T)
    artifacts: dict = field(default_factory=dict)
    built_upto: int = -1
    violations: list = field(default_factory=list)

    @property
    def N(self) -> int:
        return len(self.points) - 1

    def anchor_value(self, n: int) -> float:
        """w(x_n) for every built stage >= n (fixed-point property)."""
        if n == 0:
            return 0.0
        return self.artifacts[n].rho

    def to_json(self) -> dict:
        return {
            "mode": self.mode, "T": self.T, "points": list(self.points),
            "stages": [
                {
                    "constants": c.to_json(),
                    "artifacts": self.artifacts[c.n].to_json() if c.n in self.artifacts else None,
                }
                for c in self.constants
            ],
            "C": self.C, "wt_l2": self.wt_l2,
            "built_upto": self.built_upto, "violations": list(self.violations),
        }

    @staticmethod
    def from_json(d: dict) -> "ConstructionState":
        st = ConstructionState(
            d["mode"], d["T"], list(d["points"]),
            [StageConstants.from_json(s["constants"]) for s in d["stages"]],
            d["C"], d["wt_l2"],
        )
        for s in d["stages"]:
            if s["artifacts"] is not None:
                st.artifacts[s["constants"]["n"]] = StageArtifacts.from_json(s["artifacts"])
        st.built_upto = d["built_upto"]
        st.violations = list(d["violations"])
        return st

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @staticmethod
    def loads(text: str) -> "ConstructionState":
        return ConstructionState.from_json(json.loads(text))


# ---------------------------------------------------------------------------
# constants planning
# ---------------------------------------------------------------------------

def _envelope_K_at(sigma: float) -> float:
    """|wt''| + |wt'| + 1 bounded at distances >= sigma via envelopes."""
    return (
        special.envelope_wtilde_second(sigma)
        + special.envelope_wtilde_prime(sigma)
        + 1.0
    )


def _g_lf(s: LogFloat) -> LogFloat:
    """g at a positive scaled-float argument."""
    return s * math.log(-s.ln())


def _psi_envelope_lf(s: LogFloat) -> LogFloat:
    """Decreasing psi envelope at a scaled-float distance."""
    l1 = -s.ln()
    if l1 <= 1.0:
        raise ValueError("psi envelope needs distance < 1/e")
    inv_s = ONE / s
    return inv_s * (1812.0 / l1 ** (1.0 / 3.0)) + lf(3.0) + inv_s * (12.0 / l1)


def _wt_l2_tail_envelope(R: LogFloat) -> LogFloat:
    """Envelope of int_{-R}^{R} wt'^2: 18 R (log(1/R) + 1)."""
    l1 = -R.ln()
    return R * (18.0 * (l1 + 1.0))


def _solve_T2(target: LogFloat, n: int) -> LogFloat:
    """Largest half-width with sup over (0, T_n] of the |g| psi envelope <= target.

    The dominant term is 1812 log(l1) / l1^(1/3); it is inverted by a log-space
    fixed point, then the full closed-form supremum is re-checked, halving the
    width until it clears the target.
    """
    tgt = target.ln()
    Lx = max(3.0 * math.log(2.0 * 1812.0) - 3.0 * tgt, 10.0)
    for _ in range(200):
        Lx_new = 3.0 * (math.log(1812.0) + math.log(max(Lx, 4.0)) - tgt)
        if abs(Lx_new - Lx) <= 1e-12 * abs(Lx):
            Lx = Lx_new
            break
        Lx = Lx_new
    if Lx > 700.0:
        raise FaithfulPrecisionExceeded(f"stage {n}: T_n below scaled-float range")
    x = math.exp(Lx)
    for _ in range(200):
        if lf(special.sup_envelope_g_psi(x)) <= target:
            break
        x *= 2.0
        if x * INV_LN2 > 1.5e308:
            raise FaithfulPrecisionExceeded(f"stage {n}: T_n below scaled-float range")
    else:
        raise FaithfulPrecisionExceeded(f"stage {n}: smallness bound unreachable")
    return LogFloat.from_log2(-x * INV_LN2)


def _invert_g(rhs: LogFloat) -> LogFloat:
    """Largest R with g(R) <= rhs, rounded down.

    Works by LogFloat division so the (exact, integer) scale of rhs is never
    round-tripped through a float logarithm: at scales like 2^-1e74 a float
    log2 carries an absolute slop of ~1e58 bits.
    """
    R = rhs
    for _ in range(8):
        l2 = math.log(max(-R.ln(), math.e + 1.0))
        R = rhs / l2
    R = R * (1.0 - 1e-12)
    while _g_lf(R) > rhs:
        R = R * 0.5
    return R


def _invert_wt_l2_tail(rhs: LogFloat) -> LogFloat:
    """Largest R with 18 R (l1(R)+1) <= rhs, rounded down (exact-scale safe)."""
    R = rhs / 18.0
    for _ in range(8):
        l1 = max(-R.ln(), 2.0)
        R = rhs / (18.0 * (l1 + 1.0))
    R = R * (1.0 - 1e-12)
    while _wt_l2_tail_envelope(R) > rhs:
        R = R * 0.5
    return R


def plan_constants(points, mode: str = "faithful", T: float | None = None,
                   t_schedule=None, r_schedule=None) -> ConstructionState:
    """Plan all stage constants in dependency order T_0..T_N, then the
    bookkeeping (m_n, G_n, M_n) for n <= N-1, then R_1..R_N.

    points: distinct reals with points[0] == 0, all inside (-T, T).
    Illustrative mode takes user T_n / R_n schedules (index 0 ignored) and
    records violated inequalities instead of failing.
    """
    if mode not in ("faithful", "illustrative"):
        raise ValueError("mode must be 'faithful' or 'illustrative'")
    if T is None:
        T = special.pick_T()
    points = [float(x) for x in points]
    if len(points) != len(set(points)):
        raise ValueError("points must be distinct")
    if points[0] != 0.0:
        raise ValueError("points[0] must be 0")
    if any(not (-T < x < T) for x in points):
        raise ValueError("points must lie inside (-T, T)")
    N = len(points) - 1
    if mode == "illustrative":
        if t_schedule is None or r_schedule is None:
            raise ValueError("illustrative mode needs t_schedule and r_schedule")
        if len(t_schedule) < N + 1 or len(r_schedule) < N + 1:
            raise ValueError("schedules must cover stages 0..N")

    wt_l2 = special.wtilde_prime_l2_norm(T)
    C = 1.0 + 5.0 * special.sup_envelope_g_psi(-math.log(T))
    st = ConstructionState(mode, T, points, [], C, wt_l2)

    sigmas, Ks, thetas, etas = [T], [1.0], [1.0], [0.0]
    for n in range(1, N + 1):
        sig = min(abs(points[i] - points[n]) for i in range(n)) / 2.0
        K = max(1.0 + Ks[-1], n * _envelope_K_at(sig))
        sigmas.append(sig)
        Ks.append(K)
        thetas.append(10.0 * K / sig)
        etas.append(special.eval_g(sig))

    Tn: list[LogFloat] = [lf(T)]
    for n in range(1, N + 1):
        edge = min(abs(points[n] - T), abs(points[n] + T))
        cap = lf(edge) * lf(sigmas[n]) * Tn[n - 1] * 0.5
        target = lf(2.0**-n) / (5.0 * thetas[n])
        if mode == "faithful":
            Tn.append(lf_min(cap, _solve_T2(target, n)))
        else:
            user = lf(float(t_schedule[n]))
            if user > cap:
                st.violations.append(f"(T:1) violated at stage {n}")
            if lf(special.sup_envelope_g_psi(-user.ln())) > target:
                st.violations.append(f"(T:2) violated at stage {n}")
            Tn.append(user)

    m_idx: list[int | None] = [None] * (N + 1)
    G_rad: list[LogFloat | None] = [None] * (N + 1)
    Mn: list[LogFloat | None] = [None] * (N + 1)
    for n in range(0, N):
        m_n = max(n, int(math.ceil(-2.0 * Tn[n + 1].log2() + 5.0)))
        m_idx[n] = m_n
        radius = Tn[n + 1] ** 2 / (lf(32.0 * C) * lf(float(m_n + 1)))
        G_rad[n] = radius
        covered = min(m_n, N)
        psi_at_radius = _psi_envelope_lf(radius)
        total = LogFloat.zero()
        for i in range(covered + 1):
            total = total + lf_max(psi_at_radius, _psi_envelope_lf(Tn[i]))
        if mode == "illustrative" and m_n > covered:
            # extend the schedule geometrically over phantom bookkeeping
            # indices; their psi values form a dominated geometric sum
            ratio = (Tn[N] / Tn[N - 1]).to_float() if N >= 1 else 0.25
            ratio = min(max(ratio, 1e-12), 0.5)
            steps = min(m_n - covered, 4000)
            if m_n - covered > 4000:
                st.violations.append(f"M_{n}: phantom index extension truncated")
            T_last = Tn[N] * (lf(ratio) ** steps)
            total = total + _psi_envelope_lf(T_last) * (1.0 / (1.0 - ratio))
        Mn[n] = total

    Rn: list[LogFloat] = [lf(T)]
    denom_base = lf(344.0 * 512.0) * lf((1.0 + wt_l2) ** 2)
    for n in range(1, N + 1):
        rhs1 = Tn[n] ** 4 / lf(1024.0 * (1.0 + wt_l2) ** 2)
        rhs2 = (lf(2.0**-n) * Rn[n - 1] * Tn[n] ** 5 * etas[n]) / (
            denom_base * lf(Ks[n] ** 2) * Mn[n - 1]
        )
        if mode == "faithful":
            R = lf_min(_invert_wt_l2_tail(rhs1), _invert_g(rhs2),
                       Tn[n] * 0.25, Rn[n - 1] * 0.5)
            gR = _g_lf(R)
            for name, ok in [
                ("52 K g(R)/T^2 <= 2^-n", lf(52.0 * Ks[n]) * gR / Tn[n] ** 2 <= lf(2.0**-n)),
                ("5 K g(R) <= 2^-n eta", lf(5.0 * Ks[n]) * gR <= lf(2.0**-n) * etas[n]),
                ("K g(R) <= g(R_{n-1})/2", lf(Ks[n]) * gR <= _g_lf(Rn[n - 1]) * 0.5),
            ]:
                if not ok:
                    raise FaithfulPrecisionExceeded(f"stage {n}: derived bound {name} failed")
        else:
            R = lf(float(r_schedule[n]))
            if _wt_l2_tail_envelope(R) > rhs1:
                st.violations.append(f"(R:1) violated at stage {n}")
            if _g_lf(R) > rhs2:
                st.violations.append(f"(R:2) violated at stage {n}")
            if R >= Tn[n]:
                st.violations.append(f"R_{n} >= T_{n}")
        Rn.append(R)

    for n in range(N + 1):
        st.constants.append(StageConstants(
            n, points[n], sigmas[n], Ks[n], thetas[n], Tn[n], Rn[n], etas[n],
            m_idx[n], G_rad[n], Mn[n],
        ))
    return st


# ---------------------------------------------------------------------------
# stage building
# ---------------------------------------------------------------------------

def _find_tau(m: float, R: LogFloat, n: int) -> float:
    """Largest tau in (0, R] with wt'(tau) = m, as ll = log log (1/tau).

    The scan is uniform in the triple-log variable (every 2 pi window sweeps
    one oscillation of the dominant term); the first sign change gives the
    largest root, bisected to 1e-15 relative in the scan variable.
    """
    ll_lo = math.log(-R.ln())
    l3_lo = math.log(ll_lo)
    l3_hi = max(l3_lo, math.log(2.0 * max(abs(m), 1.0))) + 4.5 * math.pi

    def f(l3: float) -> float:
        ll = max(math.exp(l3), ll_lo)
        return special.wtilde_prime_of(Offset.from_ll(ll)) - m

    grid = np.linspace(l3_lo, l3_hi, 16384)
    vals = np.array([f(float(x)) for x in grid])
    idx = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
    if len(idx) == 0:
        raise StageBuildFailure(f"stage {n}: no root of wt' = m in (0, R_n]")
    a, b = float(grid[idx[0]]), float(grid[idx[0] + 1])
    fa = f(a)
    for _ in range(120):
        mid = 0.5 * (a + b)
        if (b - a) <= 1e-15 * max(abs(mid), 1.0):
            break
        fm = f(mid)
        if fm == 0.0:
            a = b = mid
            break
        if (fa < 0) == (fm < 0):
            a, fa = mid, fm
        else:
            b = mid
    return max(math.exp(0.5 * (a + b)), ll_lo)


def _resolvable(x: float, h: float) -> bool:
    """Does x + h recover h to ~single precision in binary64?"""
    if h <= 0.0 or not math.isfinite(h):
        return False
    back = (x + h) - x
    return back != 0.0 and abs(back - h) <= 1e-6 * h


def build_stage(state: ConstructionState, n: int) -> ConstructionState:
    """Build stage n in place (requires stage n-1); returns the state."""
    if n == 0:
        state.built_upto = max(state.built_upto, 0)
        return state
    if state.built_upto < n - 1:
        raise StageBuildFailure(f"stage {n - 1} not built")
    const = state.constants[n]
    x_n = const.x
    m = eval_w_prime(state, x_n, upto=n - 1)
    rho = eval_w(state, x_n, upto=n - 1)
    w2 = _eval_w_second(state, x_n, upto=n - 1)
    R, T_n = const.R_n, const.T_n

    tau_ll = _find_tau(m, R, n)
    if tau_ll > 700.0:
        raise FaithfulPrecisionExceeded(f"stage {n}: tau below scaled-float range")
    tau_off = Offset.from_ll(tau_ll)
    tau = tau_off.abs_lf()
    wt_tau = special.wtilde_of(tau_off)

    Rf = R.to_float()
    if _resolvable(x_n, Rf):
        delta_m = lf(m - eval_w_prime(state, x_n - Rf, upto=n - 1))
        delta_p = lf(m - eval_w_prime(state, x_n + Rf, upto=n - 1))
        base_m = lf(rho - eval_w(state, x_n - Rf, upto=n - 1))
        base_p = lf(rho - eval_w(state, x_n + Rf, upto=n - 1))
    else:
        # first-order expansions; the truncation O(K R^2) sits far below every
        # bound these quantities are later compared against
        delta_m = R * w2
        delta_p = -(R * w2)
        base_m = R * m - R**2 * (w2 * 0.5)
        base_p = -(R * m) - R**2 * (w2 * 0.5)
    c_m = base_m - wt_tau - lf(m) * (R - tau)
    c_p = base_p + wt_tau + lf(m) * (R - tau)
    d_m = (lf(4.0) / T_n) * (-(delta_m * 0.5) * (R - T_n * 0.5) - c_m)
    d_p = (lf(4.0) / T_n) * ((delta_p * 0.5) * (R - T_n * 0.5) - c_p)

    state.artifacts[n] = StageArtifacts(
        m, tau_ll, tau, rho, w2, delta_m, delta_p, c_m, c_p, d_m, d_p, wt_tau
    )

    gR = _g_lf(R)
    checks = [
        ("|delta| <= K_n R_n", lf_max(abs(delta_m), abs(delta_p)) <= lf(const.K) * R),
        ("|c| <= 3 K_n g(R_n)", lf_max(abs(c_m), abs(c_p)) <= lf(3.0 * const.K) * gR),
        ("||q|| <= 13 K_n g(R_n)/T_n",
         lf_max(abs(delta_m), abs(delta_p), abs(d_m), abs(d_p))
         <= lf(13.0 * const.K) * gR / T_n),
        ("||q'|| <= 2^-n",
         lf_max(lf(4.0) * lf_max(abs(d_m), abs(d_p)) / T_n,
                lf_max(abs(delta_m), abs(delta_p)) / (T_n * 0.5 - R)) <= lf(2.0**-n)),
    ]
    for name, ok in checks:
        if not ok:
            msg = f"stage {n}: artifact bound {name} violated"
            if state.mode == "faithful":
                raise FaithfulPrecisionExceeded(msg)
            state.violations.append(msg)
    state.built_upto = n
    return state


def build(points, mode: str = "faithful", T: float | None = None,
          t_schedule=None, r_schedule=None) -> ConstructionState:
    """plan_constants followed by building every stage 0..N."""
    st = plan_constants(points, mode, T, t_schedule, r_schedule)
    for n in range(st.N + 1):
        build_stage(st, n)
    return st


# ---------------------------------------------------------------------------
# cut-off geometry
# ---------------------------------------------------------------------------

def _q_value(state: ConstructionState, j: int, s: Offset) -> LogFloat:
    """Cut-off derivative q of stage j at signed offset s with R_j <= |s| <= T_j."""
    art = state.artifacts[j]
    T_n, R = state.constants[j].T_n, state.constants[j].R_n
    a = s.abs_lf()
    vq = -art.d_minus if s.sign < 0 else art.d_plus  # tent peak at 3T/4
    delta = art.delta_minus if s.sign < 0 else art.delta_plus
    if a >= T_n:
        return LogFloat.zero()
    if a <= R:
        return delta
    q34, q12 = T_n * 0.75, T_n * 0.5
    quarter = T_n * 0.25
    if a >= q34:
        return vq * ((T_n - a) / quarter)
    if a >= q12:
        return vq * ((a - q12) / quarter)
    return delta * ((q12 - a) / (q12 - R))


def _chi_value(state: ConstructionState, j: int, s: Offset) -> LogFloat:
    """Cut-off function chi of stage j at signed offset s with R_j <= |s| <= T_j.

    chi_- integrates q_- inward from -T_j; chi_+ equals minus the outward
    integral of q_+; both reduce to the signed area F(|s|) of the q profile
    between |s| and T_j, with chi_- = +F and chi_+ = -F.
    """
    art = state.artifacts[j]
    T_n, R = state.constants[j].T_n, state.constants[j].R_n
    a = s.abs_lf()
    if a >= T_n:
        return LogFloat.zero()
    vq = -art.d_minus if s.sign < 0 else art.d_plus
    delta = art.delta_minus if s.sign < 0 else art.delta_plus
    q34, q12 = T_n * 0.75, T_n * 0.5
    quarter = T_n * 0.25
    if a >= q34:
        h = T_n - a
        F = vq * ((h / quarter) * h * 0.5)
    elif a >= q12:
        val = vq * ((a - q12) / quarter)
        F = vq * (quarter * 0.5) + (vq + val) * ((q34 - a) * 0.5)
    else:
        ab = a if a >= R else R
        val = delta * ((q12 - ab) / (q12 - R))
        F = vq * quarter + val * ((q12 - ab) * 0.5)
    return F if s.sign < 0 else -F


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _containing_stage(state: ConstructionState, t: float, upto: int) -> int | None:
    """Largest stage j in 1..upto with t inside Y_j, else None."""
    for j in range(upto, 0, -1):
        s = t - state.points[j]
        if s == 0.0:
            return j
        if Offset.from_float(s).mag_cmp(state.constants[j].T_n) <= 0:
            return j
    return None


def _prev_delta(state: ConstructionState, j: int, s: Offset, upto: int) -> LogFloat:
    """w_upto(x_j + s) - w_upto(x_j) where w_upto is smooth at x_j.

    Direct float difference when x_j + s resolves; first-order expansion
    (slope + half curvature) otherwise.
    """
    x = state.points[j]
    f = s.to_float()
    if f != 0.0 and _resolvable(x, abs(f)):
        return lf(eval_w(state, x + f, upto=upto) - eval_w(state, x, upto=upto))
    slope = eval_w_prime(state, x, upto=upto)
    curv = _eval_w_second(state, x, upto=upto)
    sl = s.lf()
    return sl * slope + sl * sl * (curv * 0.5)


def _delta_impl(state: ConstructionState, i: int, s: Offset, upto: int) -> LogFloat:
    if i == 0 or i > upto:
        if i == 0:
            return special.wtilde_of(s)
        return _prev_delta(state, i, s, upto)
    art = state.artifacts[i]
    const = state.constants[i]
    if s.ll >= art.tau_ll:  # |s| <= tau_i: the spliced profile
        return special.wtilde_of(s)
    if s.mag_cmp(const.R_n) < 0:  # affine connector, exact identity
        sgn = s.sign
        wt_tau_signed = art.wt_tau if sgn > 0 else -art.wt_tau
        tau_signed = art.tau if sgn > 0 else -art.tau
        return wt_tau_signed + (s.lf() - tau_signed) * art.m
    if s.mag_cmp(const.T_n) <= 0:  # cut-off region
        return _prev_delta(state, i, s, upto=i - 1) + _chi_value(state, i, s)
    return _prev_delta(state, i, s, upto=i - 1)


def chart_delta(state: ConstructionState, i: int, s: Offset, upto: int | None = None) -> LogFloat:
    """w_upto(x_i + s) - w_upto(x_i) for a (possibly sub-float) offset s.

    |s| must stay below half the gap to every other anchor, so the value is
    governed by stage i alone.
    """
    if upto is None:
        upto = state.built_upto
    x = state.points[i]
    for j in range(0, upto + 1):
        if j == i:
            continue
        gap = abs(state.points[j] - x) / 2.0
        if s.mag_cmp(lf(gap)) >= 0:
            raise ValueError("offset reaches a neighbouring stage; use eval_w instead")
    return _delta_impl(state, i, s, upto)


def chart_prime(state: ConstructionState, i: int, s: Offset, upto: int | None = None) -> float:
    """w_upto'(x_i + s) at a (possibly sub-float) nonzero offset."""
    if upto is None:
        upto = state.built_upto
    if i == 0 or i > upto:
        if i == 0:
            return special.wtilde_prime_of(s)
        x = state.points[i]
        f = s.to_float()
        if f != 0.0 and _resolvable(x, abs(f)):
            return eval_w_prime(state, x + f, upto=upto)
        return eval_w_prime(state, x, upto=upto) + (
            s.lf() * _eval_w_second(state, x, upto)
        ).to_float()
    art = state.artifacts[i]
    const = state.constants[i]
    if s.ll >= art.tau_ll:
        return special.wtilde_prime_of(s)
    if s.mag_cmp(const.R_n) < 0:
        return art.m
    base = chart_prime(state, i, s, upto=i - 1)
    if s.mag_cmp(const.T_n) <= 0:
        return base + _q_value(state, i, s).to_float()
    return base


def eval_w(state: ConstructionState, t: float, upto: int | None = None) -> float:
    """w_upto(t) at an ordinary float time in [-T, T]."""
    if upto is None:
        upto = state.built_upto
    if not (-state.T <= t <= state.T):
        raise ValueError("t outside [-T, T]")
    j = _containing_stage(state, t, upto)
    if j is None:
        return special.eval_wtilde(t)
    s_f = t - state.points[j]
    if s_f == 0.0:
        return state.anchor_value(j)
    return state.anchor_value(j) + _delta_impl(state, j, Offset.from_float(s_f), upto=j).to_float()


def eval_w_prime(state: ConstructionState, t: float, upto: int | None = None) -> float:
    """w_upto'(t); typed singular-point error exactly at the anchors."""
    if upto is None:
        upto = state.built_upto
    if not (-state.T <= t <= state.T):
        raise ValueError("t outside [-T, T]")
    for j in range(0, upto + 1):
        if t == state.points[j]:
            raise SingularPointError(f"w' undefined at x_{j}")
    j = _containing_stage(state, t, upto)
    if j is None:
        return special.eval_wtilde_prime(t)
    return chart_prime(state, j, Offset.from_float(t - state.points[j]), upto=j)


def _eval_w_second(state: ConstructionState, t: float, upto: int) -> float:
    """w_upto''(t) wherever it exists (off anchors and joins)."""
    j = _containing_stage(state, t, upto)
    if j is None:
        return special.eval_wtilde_second(t)
    s = Offset.from_float(t - state.points[j])
    art = state.artifacts[j]
    const = state.constants[j]
    if s.ll >= art.tau_ll:
        return special.eval_wtilde_second(t - state.points[j])
    if s.mag_cmp(const.R_n) < 0:
        return 0.0
    base = _eval_w_second_off(state, j, s, upto=j - 1)
    return base + _q_prime(state, j, s)


def _eval_w_second_off(state, j, s, upto):
    x = state.points[j]
    f = s.to_float()
    if f != 0.0 and _resolvable(x, abs(f)):
        return _eval_w_second(state, x + f, upto)
    return _eval_w_second(state, x, upto)


def _q_prime(state: ConstructionState, j: int, s: Offset) -> float:
    """Slope of the cut-off derivative q at signed offset s (a.e. value)."""
    art = state.artifacts[j]
    T_n, R = state.constants[j].T_n, state.constants[j].R_n
    a = s.abs_lf()
    if a >= T_n or a <= R:
        return 0.0
    vq = -art.d_minus if s.sign < 0 else art.d_plus
    quarter = T_n * 0.25
    # d q / d|s|, then chain rule for the left side (|s| decreasing in t)
    if a >= T_n * 0.75:
        dq_da = -(vq / quarter)
    elif a >= T_n * 0.5:
        dq_da = vq / quarter
    else:
        delta = art.delta_minus if s.sign < 0 else art.delta_plus
        dq_da = -(delta / (T_n * 0.5 - R))
    sgn = 1.0 if s.sign > 0 else -1.0
    return sgn * dq_da.to_float()


def eval_w_grid(state: ConstructionState, ts, upto: int | None = None) -> np.ndarray:
    """Vectorized eval_w: profile fast path, scalar fixups inside each Y_j."""
    if upto is None:
        upto = state.built_upto
    ts = np.asarray(ts, dtype=float)
    out = np.asarray(special.eval_wtilde(ts), dtype=float).copy()
    for j in range(1, upto + 1):
        Tf = state.constants[j].T_n.to_float()
        mask = np.abs(ts - state.points[j]) <= max(Tf, 0.0)
        for idx in np.nonzero(mask)[0]:
            out[idx] = eval_w(state, float(ts[idx]), upto)
    return out


def eval_w_prime_grid(state: ConstructionState, ts, upto: int | None = None) -> np.ndarray:
    if upto is None:
        upto = state.built_upto
    ts = np.asarray(ts, dtype=float)
    out = np.asarray(special.eval_wtilde_prime(ts), dtype=float).copy()
    for j in range(1, upto + 1):
        Tf = state.constants[j].T_n.to_float()
        mask = np.abs(ts - state.points[j]) <= max(Tf, 0.0)
        for idx in np.nonzero(mask)[0]:
            out[idx] = eval_w_prime(state, float(ts[idx]), upto)
    return out


# ---------------------------------------------------------------------------
# weight function
# ---------------------------------------------------------------------------

def _psi_g_at(T_lf: LogFloat, k: int) -> tuple[LogFloat, LogFloat]:
    """(psi^k(T), g(T)) at a scaled-float boundary distance."""
    l1 = -T_lf.ln()
    l2 = math.log(l1)
    g = T_lf * l2
    if k == 1:
        psik = (ONE / T_lf) * (1812.0 / l1 ** (1.0 / 3.0))
    else:
        l3 = math.log(l2)
        sb, cb = math.sin(l3), math.cos(l3)
        bracket = -(sb + cb) + (cb - sb) / (l1 * l2) - (sb + cb) / l1
        psik = lf(3.0) + abs((ONE / T_lf) * (bracket / l1)) * 2.0
    return psik, g


def _phi_piece_grid(state: ConstructionState, i: int, k: int, ts, ays) -> np.ndarray:
    """One capped-linear weight piece, vectorized and overflow-safe.

    The piece equals P * min(|y|/G, 5 theta_i) with (P, G) = (psi^k |g|, |g|)
    at the offset inside Y_i and at the boundary value T_i outside; the
    products psi^k |g| come from cancellation-free closed forms.
    """
    const = state.constants[i]
    theta = const.theta
    s = ts - const.x
    Tf = const.T_n.to_float()
    inside = np.abs(s) <= max(Tf, 0.0)

    psik_T, g_T = _psi_g_at(const.T_n, k)
    PG_out = (psik_T * g_T).to_float()
    g_out = g_T.to_float()
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        ratio = np.where(ays == 0.0, 0.0, np.where(g_out > 0.0, ays / max(g_out, 5e-324), np.inf))
    out = PG_out * np.minimum(ratio, 5.0 * theta)

    if np.any(inside):
        si = s[inside]
        term = np.zeros(si.shape)
        nz = si != 0.0
        if np.any(nz):
            a = np.abs(si[nz])
            l1 = -np.log(a)
            l2 = np.log(l1)
            gg = a * l2
            if k == 1:
                PG = 1812.0 * l2 / np.cbrt(l1)
            else:
                l3 = np.log(l2)
                sb, cb = np.sin(l3), np.cos(l3)
                bracket = -(sb + cb) + (cb - sb) / (l1 * l2) - (sb + cb) / l1
                PG = 3.0 * gg + 2.0 * np.abs(l2 * bracket / l1)
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                ratio_in = np.where(ays[inside][nz] == 0.0, 0.0, ays[inside][nz] / gg)
            term[nz] = PG * np.minimum(ratio_in, 5.0 * theta)
        out[inside] = term
    return out


def eval_phi_grid(state: ConstructionState, ts, ys, upto: int | None = None) -> np.ndarray:
    """phi_upto(t, y) = sum over stages of the two capped-linear pieces."""
    if upto is None:
        upto = state.built_upto
    ts = np.asarray(ts, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ts, ys = np.broadcast_arrays(ts, ys)
    shape = ts.shape
    tflat, aflat = ts.ravel(), np.abs(ys).ravel()
    out = np.zeros(tflat.shape)
    for i in range(0, upto + 1):
        piece = _phi_piece_grid(state, i, 1, tflat, aflat) + _phi_piece_grid(
            state, i, 2, tflat, aflat
        )
        piece[tflat == state.constants[i].x] = 0.0
        out += piece
    return out.reshape(shape)


def eval_phi(state: ConstructionState, t: float, y: float, upto: int | None = None) -> float:
    return float(eval_phi_grid(state, np.array([t]), np.array([y]), upto)[0])


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class InvariantCheck:
    name: str
    passed: bool
    margin: float
    note: str = ""


@dataclass
class InvariantReport:
    stage: int
    mode: str
    checks: list

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self):
        return {
            "stage": self.stage, "mode": self.mode,
            "checks": [
                {"name": c.name, "passed": c.passed, "margin": c.margin, "note": c.note}
                for c in self.checks
            ],
        }


def _margin(bound: LogFloat, achieved: LogFloat) -> tuple[float, str]:
    diff = (bound - achieved).to_float()
    if diff != 0.0:
        return diff, ""
    if achieved.is_zero():
        return bound.to_float(), ""
    return bound.log2() - achieved.log2(), "margin reported as log2 ratio"


def _stage_chart_offsets(state: ConstructionState, n: int, per_zone: int = 24):
    """Probe offsets inside Y_n: cut-off zone, connector zone, splice zone."""
    if n == 0:
        xs = np.exp(np.linspace(math.log(1e-280), math.log(state.T * 0.5), per_zone))
        out = [Offset.from_float(float(x)) for x in xs]
        return out + [-o for o in out]
    const = state.constants[n]
    art = state.artifacts[n]
    out = []
    lT, lR = -const.T_n.log2(), -const.R_n.log2()
    for l2x in np.linspace(lT * (1 + 1e-12), lR * (1 - 1e-12), per_zone):
        out.append(Offset.from_log2(-float(l2x)))
    ll_R = math.log(-const.R_n.ln())
    for llx in np.linspace(ll_R * (1 + 1e-12), art.tau_ll * (1 - 1e-12), per_zone):
        out.append(Offset.from_ll(float(llx)))
    for llx in np.linspace(art.tau_ll * (1 + 1e-12), art.tau_ll + 3.0, per_zone):
        out.append(Offset.from_ll(float(llx)))
    return out + [-o for o in out]


def verify_stage(state: ConstructionState, n: int, grid: int = 4096) -> InvariantReport:
    """Sampled checks of the stage conditions; report-only, never raises."""
    checks: list[InvariantCheck] = []
    ts = np.linspace(-state.T, state.T, grid + 1)
    ts = ts[np.all(np.abs(ts[:, None] - np.array(state.points)[None, :]) > 0, axis=1)]
    w_n = eval_w_grid(state, ts, upto=n)

    # graph confinement: |w_n(t) - w_n(x_i)| <= (2 - 2^-n) theta_i |g_i(t)|
    factor = 2.0 - 2.0**-n
    worst = math.inf
    ok = True
    for i in range(0, n + 1):
        gi = np.abs(special.eval_g(ts - state.points[i]))
        mrg = float(np.min(factor * state.constants[i].theta * gi
                           - np.abs(w_n - state.anchor_value(i))))
        worst = min(worst, mrg)
        ok &= mrg >= 0.0
        for s in _stage_chart_offsets(state, i, per_zone=10):
            try:
                d = chart_delta(state, i, s, upto=n)
                b = lf(factor * state.constants[i].theta) * abs(special.g_of(s))
            except (ValueError, special.DomainError):
                continue
            if abs(d) > b:
                ok = False
                worst = min(worst, (b - abs(d)).to_float())
    checks.append(InvariantCheck("(graph) |w_n - w_n(x_i)| <= (2-2^-n) theta_i |g_i|", ok, worst))

    if n >= 1:
        const = state.constants[n]
        art = state.artifacts[n]
        w_prev = eval_w_grid(state, ts, upto=n - 1)
        Tf = const.T_n.to_float()
        off_mask = np.abs(ts - state.points[n]) > max(Tf, 0.0)
        diff_off = float(np.max(np.abs(w_n[off_mask] - w_prev[off_mask]))) if np.any(off_mask) else 0.0
        checks.append(InvariantCheck("(off Y_n) w_n = w_{n-1}", diff_off == 0.0, -diff_off))

        bound7 = lf(5.0 * const.K) * _g_lf(const.R_n)
        worst7 = lf(diff_off)
        for s in _stage_chart_offsets(state, n):
            try:
                d_n = _delta_impl(state, n, s, upto=n)
                d_p = _prev_delta(state, n, s, upto=n - 1)
            except (ValueError, special.DomainError):
                continue
            worst7 = lf_max(worst7, abs(d_n - d_p))
        m7, note7 = _margin(bound7, worst7)
        checks.append(InvariantCheck("(uniform) ||w_n - w_{n-1}|| <= 5 K_n g(R_n)",
                                     worst7 <= bound7, m7, note7))

        tol = 2.0**-n
        wp_n = eval_w_prime_grid(state, ts, upto=n)
        wp_prev = eval_w_prime_grid(state, ts, upto=n - 1)
        worst10 = float(np.min(tol + np.abs(wp_prev) - np.abs(wp_n)))
        ok10 = worst10 >= -1e-15
        ok11, worst11 = True, math.inf
        for s in _stage_chart_offsets(state, n):
            if s.ll >= art.tau_ll:
                continue  # the splice interval is excluded by the condition
            try:
                pn = chart_prime(state, n, s, upto=n)
                pp = chart_prime(state, n, s, upto=n - 1)
            except (ValueError, special.DomainError):
                continue
            m10 = tol + abs(pp) - abs(pn)
            ok10 &= m10 >= -1e-15
            worst10 = min(worst10, m10)
            if s.f is not None and _resolvable(state.points[n], abs(s.f)):
                t_at = state.points[n] + s.f
                m11 = tol + abs(_eval_w_second(state, t_at, upto=n - 1)) - abs(
                    _eval_w_second(state, t_at, upto=n))
                ok11 &= m11 >= -1e-15
                worst11 = min(worst11, m11)
        checks.append(InvariantCheck("(slope) |w_n'| <= |w_{n-1}'| + 2^-n off splice",
                                     ok10, worst10))
        checks.append(InvariantCheck("(curv) |w_n''| <= |w_{n-1}''| + 2^-n off splice",
                                     ok11, 0.0 if worst11 is math.inf else worst11))

        jmax = abs(special.wtilde_prime_of(Offset.from_ll(art.tau_ll)) - art.m)
        for sgn in (1, -1):
            # relative nudges on log2|s| work at every scale R_n can take
            just_out = Offset.from_log2(const.R_n.log2() * (1.0 - 1e-13), sgn)
            just_in = Offset.from_log2(const.R_n.log2() * (1.0 + 1e-13), sgn)
            jmax = max(jmax, abs(chart_prime(state, n, just_out, upto=n)
                                 - chart_prime(state, n, just_in, upto=n)))
        checks.append(InvariantCheck("joins C^1", jmax <= 1e-10, 1e-10 - jmax))

    if 0 <= n < state.built_upto:
        boundL = lf(10.0 * state.constants[n + 1].K) * _g_lf(state.constants[n + 1].R_n)
        w_full = eval_w_grid(state, ts)
        worstL = lf(float(np.max(np.abs(w_full - w_n))))
        for j in range(n + 1, state.built_upto + 1):
            anchor_gap = lf(eval_w(state, state.points[j], upto=state.built_upto)
                            - eval_w(state, state.points[j], upto=n))
            worstL = lf_max(worstL, abs(anchor_gap))
            for s in _stage_chart_offsets(state, j, per_zone=8):
                try:
                    dN = _delta_impl(state, j, s, upto=state.built_upto)
                    dn = _delta_impl(state, j, s, upto=n)
                except (ValueError, special.DomainError):
                    continue
                worstL = lf_max(worstL, abs(anchor_gap + dN - dn))
        mL, noteL = _margin(boundL, worstL)
        checks.append(InvariantCheck("(limit proxy) ||w_N - w_n|| <= 10 K g(R_{n+1})",
                                     worstL <= boundL, mL, noteL))

    return InvariantReport(n, state.mode, checks)


# ---------------------------------------------------------------------------
# Dini certificate
# ---------------------------------------------------------------------------

def dini_certificate(state: ConstructionState, n: int, k_max: int) -> dict:
    """Offsets whose difference quotients at x_n exceed +k / fall below -k.

    Uses the triple-log nodes where the sine is +/-1; inside the splice
    interval the built w coincides with the translated profile, so the
    quotient is exactly l2 sin(l3).  Entries report the loglog depth, the
    float offset when one exists, and the quotient; ``partial`` is set when a
    requested k exceeds the representable node range.
    """
    if n > state.built_upto:
        raise ValueError("stage not built")
    if n == 0:
        ll_floor = math.log(-math.log(state.T)) * (1.0 + 1e-12)
    else:
        ll_floor = state.artifacts[n].tau_ll * (1.0 + 1e-12)
    gap = min((abs(p - state.points[n]) for p in state.points if p != state.points[n]),
              default=state.T)
    entries = []
    partial = False
    for k in range(1, k_max + 1):
        row = {"k": k}
        for name, phase in (("plus", math.pi / 2), ("minus", 3 * math.pi / 2)):
            found = None
            for j in range(0, 4000):
                l3 = phase + 2 * math.pi * j
                if l3 > 700.0:
                    break
                ll = math.exp(l3)
                if ll < ll_floor or ll < k:
                    continue
                off = Offset.from_ll(ll)
                f = off.to_float()
                if f != 0.0 and f >= gap / 2:
                    continue
                q = special.wtilde_over_s_of(off)
                if (name == "plus" and q >= k) or (name == "minus" and q <= -k):
                    found = {"loglog_inv_offset": ll,
                             "offset": f if f != 0.0 else None,
                             "quotient": q}
                    break
            if found is None:
                partial = True
            row[name] = found
        entries.append(row)
    return {"entries": entries, "partial": partial}


# ---------------------------------------------------------------------------
# PL sampling
# ---------------------------------------------------------------------------

def sample_trajectory(state: ConstructionState, n_points: int = 1025,
                      chart_depth: int = 48, upto: int | None = None):
    """Sample w into a PLTrajectory carrying per-anchor charts.

    Chart offsets run log-spaced from 1e-290 up to a quarter of the anchor
    gap, so Dini scans on the sampled trajectory can see oscillation that
    float mesh nodes cannot resolve.
    """
    from .trajectory import Chart, PLTrajectory

    if upto is None:
        upto = state.built_upto
    mesh = np.unique(np.concatenate([
        np.linspace(-state.T, state.T, n_points),
        np.asarray(state.points, dtype=float),
    ]))
    vals = eval_w_grid(state, mesh, upto)
    charts = []
    for i, x in enumerate(state.points[: upto + 1]):
        gap = min((abs(p - x) for p in state.points if p != x), default=state.T)
        hi = min(gap / 4.0, (state.T - abs(x)) / 2.0)
        offs = np.exp(np.linspace(math.log(1e-290), math.log(hi), chart_depth))
        for side in (1, -1):
            deltas = np.array([
                chart_delta(state, i, Offset.from_float(side * float(h)), upto).to_float()
                for h in offs
            ])[:, None]
            charts.append(Chart(float(x), side, offs, deltas))
    return PLTrajectory(mesh, vals, charts)
