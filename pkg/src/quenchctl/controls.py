"""Synthesis of the three quench schedules g(t) for a designated mode.

The invariant-based schedule drives one two-level subspace (in practice the
lowest-gap mode) exactly: an auxiliary polynomial f_z(s), s = t/tau, is fixed
by 2k boundary conditions (its value at both ends plus k-1 vanishing time
derivatives), and the control follows from

    h_z(g) = (f_z'' + f_z h_x^2) / (h_x sqrt(K - f_z^2 - (f_z'/h_x)^2)),

inverted through the affine map h_z(g) = hz_slope*g + hz_offset.  Real
schedules require the square-root argument to stay positive, which sets a
minimum duration tau_min for each ansatz.

FAQUAD holds the adiabaticity parameter

    mu = |h_x hz_slope g'| / (2 (h_x^2 + h_z^2)^(3/2))

constant; with affine h_z the quadrature t(g) has the primitive
F(z) = z/sqrt(h_x^2+z^2), which is inverted in closed form.

The linear ramp is the trivial reference schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels
from .errors import NonRealControl
from .models import MomentumMode

__all__ = [
    "ControlProtocol",
    "FzAnsatz",
    "FeasibilityReport",
    "build_fz",
    "eval_invariant_control",
    "eval_invariant_rate",
    "feasibility",
    "build_invariant",
    "build_faquad",
    "build_linear",
    "protocol_table",
    "write_protocol_csv",
]

# Within this window of either boundary the analytically cancelled boundary
# values are substituted for the raw formula.
_BOUNDARY_WINDOW = 1e-8


def _smoothstep_coeffs(order_k: int) -> np.ndarray:
    """Ascending coefficients of the unique degree-(2k-1) polynomial P with
    P(0)=0, P(1)=1 and vanishing derivatives of order 1..k-1 at both ends."""
    c = np.zeros(2 * order_k, dtype=float)
    for j in range(order_k):
        c[order_k + j] = (
            (-1) ** j
            * math.comb(order_k - 1 + j, j)
            * math.comb(2 * order_k - 1, order_k - 1 - j)
        )
    return c


@dataclass
class FzAnsatz:
    """Polynomial auxiliary function f_z in the scaled time s = t/tau.

    ``coefficients`` are ascending powers of s.  The boundary values fz0/fz1
    follow from the commutation (frictionless) conditions at t = 0, tau.
    """

    order_k: int
    coefficients: np.ndarray
    K: float
    fz0: float
    fz1: float
    tau: float
    _dcoeffs: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self._dcoeffs is None:
            c = np.asarray(self.coefficients, dtype=float)
            ds = [c]
            for _ in range(3):
                ds.append(np.polynomial.polynomial.polyder(ds[-1]))
            self._dcoeffs = tuple(ds)

    def derivatives(self, t, n_der: int = 2):
        """f_z and its first ``n_der`` time derivatives at time(s) t."""
        s = np.asarray(t, dtype=float) / self.tau
        out = []
        for d in range(n_der + 1):
            val = np.polynomial.polynomial.polyval(s, self._dcoeffs[d])
            out.append(val / self.tau ** d)
        return out


@dataclass(frozen=True)
class FeasibilityReport:
    """Realness margin of an ansatz at its requested tau, and the minimal
    feasible duration found by bisection."""

    tau_min: float
    margin: float


@dataclass
class ControlProtocol:
    """Evaluable schedule g(t) with derivative and kernel packing."""

    family: str
    g0: float
    g1: float
    tau: float
    kernel_fam: int = field(repr=False, default=0)
    kernel_par: np.ndarray = field(repr=False, default=None)
    mode: MomentumMode | None = field(repr=False, default=None)
    ansatz: FzAnsatz | None = field(repr=False, default=None)
    mu: float | None = None

    def eval(self, t):
        """g at time(s) t in [0, tau]."""
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        t_arr = np.atleast_1d(t_arr)
        g = kernels.g_eval_array(self.kernel_fam, self.kernel_par, self.tau, t_arr)
        near0 = np.abs(t_arr) < _BOUNDARY_WINDOW * self.tau
        near1 = np.abs(t_arr - self.tau) < _BOUNDARY_WINDOW * self.tau
        g = np.where(near0, self.g0, np.where(near1, self.g1, g))
        if np.isnan(g).any():
            raise NonRealControl(
                f"{self.family} control not real-valued at requested tau={self.tau}"
            )
        return float(g[0]) if scalar else g

    def eval_rate(self, t):
        """dg/dt at time(s) t, from the closed-form derivative."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        scalar = np.asarray(t).ndim == 0
        if self.family == "LINEAR":
            out = np.full(t_arr.shape, (self.g1 - self.g0) / self.tau)
        elif self.family == "FAQUAD":
            F0, F1, hx, slope, _ = self.kernel_par
            y = F0 + (F1 - F0) * t_arr / self.tau
            out = hx * (F1 - F0) / (self.tau * slope * (1.0 - y * y) ** 1.5)
        else:
            out = eval_invariant_rate(self.ansatz, self.mode, t_arr)
        return float(out[0]) if scalar else out


def _mode_fields(mode: MomentumMode):
    hx = abs(mode.h_x)
    if hx <= 0.0:
        raise ValueError("control synthesis requires a gapped mode (h_x != 0)")
    return hx, mode.hz_slope, mode.hz_offset


def build_fz(mode: MomentumMode, g0: float, g1: float, tau: float,
             order_k: int = 3, K: float = 1.0) -> FzAnsatz:
    """Auxiliary polynomial satisfying the 2k boundary conditions.

    The conditions (value at both ends, k-1 vanishing derivatives each) have
    the unique solution fz0 + (fz1 - fz0) * P(s) with P the degree-(2k-1)
    smoothstep; its integer coefficients make the derivative conditions
    exact.  A regression test checks this against the explicitly solved
    linear boundary system.
    """
    if order_k < 3:
        raise ValueError(f"order_k must be >= 3, got {order_k}")
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    if K <= 0:
        raise ValueError(f"K must be > 0, got {K}")
    hx, slope, off = _mode_fields(mode)
    hz0 = slope * g0 + off
    hz1 = slope * g1 + off
    fz0 = hz0 * math.sqrt(K / (hx * hx + hz0 * hz0))
    fz1 = hz1 * math.sqrt(K / (hx * hx + hz1 * hz1))
    c = _smoothstep_coeffs(order_k) * (fz1 - fz0)
    c[0] += fz0
    return FzAnsatz(order_k=order_k, coefficients=c, K=K, fz0=fz0, fz1=fz1, tau=tau)


def _margin_of(ansatz: FzAnsatz, hx: float, tau: float, n_grid: int = 4096) -> float:
    """min over s of K - f^2 - (f'/h_x)^2 for the given duration."""
    c0 = ansatz._dcoeffs[0]
    c1 = ansatz._dcoeffs[1]

    def margin_fn(s):
        f = np.polynomial.polynomial.polyval(s, c0)
        fd = np.polynomial.polynomial.polyval(s, c1) / tau
        return ansatz.K - f * f - (fd / hx) ** 2

    s = np.linspace(0.0, 1.0, n_grid)
    vals = margin_fn(s)
    i = int(np.argmin(vals))
    best = float(vals[i])
    lo = s[max(i - 1, 0)]
    hi = s[min(i + 1, n_grid - 1)]
    if hi > lo:
        res = minimize_scalar(margin_fn, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        if res.success:
            best = min(best, float(res.fun))
    return best


def feasibility(ansatz: FzAnsatz, mode: MomentumMode) -> FeasibilityReport:
    """Margin at the requested tau, and tau_min located by bisection.

    The s-parameterized coefficients are duration independent, so the margin
    is evaluated for trial durations without re-solving the ansatz.
    Bisection runs to relative tolerance 1e-6.
    """
    hx, _, _ = _mode_fields(mode)
    margin = _margin_of(ansatz, hx, ansatz.tau)
    if np.allclose(ansatz._dcoeffs[1], 0.0):
        return FeasibilityReport(tau_min=0.0, margin=margin)
    lo, hi = ansatz.tau, ansatz.tau
    while _margin_of(ansatz, hx, hi) <= 0.0:
        hi *= 2.0
        if hi > 1e12 * ansatz.tau:
            raise NonRealControl("no feasible duration found below 1e12 * tau")
    while _margin_of(ansatz, hx, lo) > 0.0:
        lo *= 0.5
        if lo < 1e-12 * ansatz.tau:
            lo = 0.0
            break
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        if _margin_of(ansatz, hx, mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return FeasibilityReport(tau_min=0.5 * (lo + hi), margin=margin)


def _invariant_kernel_par(ansatz: FzAnsatz, mode: MomentumMode) -> np.ndarray:
    hx, slope, off = _mode_fields(mode)
    c_desc = np.asarray(ansatz.coefficients, dtype=float)[::-1].copy()
    c1 = np.polyder(c_desc)
    c2 = np.polyder(c1)
    nc = len(c_desc)
    return np.concatenate([[ansatz.K, hx, slope, off, float(nc)], c_desc, c1, c2])


def eval_invariant_control(ansatz: FzAnsatz, mode: MomentumMode, t):
    """Control value g(t) for the invariant schedule.

    Raises NonRealControl when the square-root argument drops to the
    numerical floor (1e-14 K), which signals tau < tau_min.
    """
    hx, slope, off = _mode_fields(mode)
    f, fd, fdd = ansatz.derivatives(t, n_der=2)
    arg = ansatz.K - f * f - (fd / hx) ** 2
    if np.any(arg <= 1e-14 * ansatz.K):
        raise NonRealControl(
            f"square-root argument <= 1e-14*K at tau={ansatz.tau}; increase tau"
        )
    hz = (fdd + f * hx * hx) / (hx * np.sqrt(arg))
    return (hz - off) / slope


def eval_invariant_rate(ansatz: FzAnsatz, mode: MomentumMode, t):
    """dg/dt for the invariant schedule from the closed-form derivative."""
    hx, slope, off = _mode_fields(mode)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    f, fd, fdd, fddd = ansatz.derivatives(t_arr, n_der=3)
    C = ansatz.K - f * f - (fd / hx) ** 2
    if np.any(C <= 1e-14 * ansatz.K):
        raise NonRealControl("non-real control while evaluating rate")
    sq = np.sqrt(C)
    hzdot = ((fddd + fd * hx * hx) * sq
             + (fdd + f * hx * hx) * (fd * f * hx * hx + fdd * fd) / (hx * hx * sq)
             ) / (C * hx)
    # exact boundary limit: all lower derivatives vanish there
    near0 = np.abs(t_arr) < _BOUNDARY_WINDOW * ansatz.tau
    near1 = np.abs(t_arr - ansatz.tau) < _BOUNDARY_WINDOW * ansatz.tau
    for mask, t_b, fz_b in ((near0, 0.0, ansatz.fz0), (near1, ansatz.tau, ansatz.fz1)):
        if mask.any():
            f3 = ansatz.derivatives(t_b, n_der=3)[3]
            hz_b = fz_b * hx / math.sqrt(ansatz.K - fz_b * fz_b)
            rate_b = f3 * math.sqrt(hx * hx + hz_b * hz_b) / (
                hx * hx * math.sqrt(ansatz.K))
            hzdot = np.where(mask, rate_b, hzdot)
    return hzdot / slope


def build_invariant(mode: MomentumMode, g0: float, g1: float, tau: float,
                    order_k: int = 3, K: float = 1.0) -> ControlProtocol:
    """Invariant-based protocol for the given mode; checks feasibility."""
    ansatz = build_fz(mode, g0, g1, tau, order_k, K)
    hx, _, _ = _mode_fields(mode)
    if _margin_of(ansatz, hx, tau) <= 0.0:
        report = feasibility(ansatz, mode)
        raise NonRealControl(
            f"tau={tau:.6g} below tau_min={report.tau_min:.6g} for order_k={order_k}"
        )
    return ControlProtocol(
        family="INVARIANT", g0=g0, g1=g1, tau=tau,
        kernel_fam=kernels.FAM_INVARIANT,
        kernel_par=_invariant_kernel_par(ansatz, mode),
        mode=mode, ansatz=ansatz,
    )


def build_faquad(mode: MomentumMode, g0: float, g1: float, tau: float) -> ControlProtocol:
    """Constant-adiabaticity schedule between g0 and g1.

    t(g) is linear in F(h_z) = h_z/sqrt(h_x^2+h_z^2), so the schedule and its
    rate are evaluated by the exact inverse of F; the constant mu follows as
    |F(h_z1) - F(h_z0)| / (2 h_x tau).
    """
    if g0 == g1:
        raise ValueError("FAQUAD requires g0 != g1")
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    hx, slope, off = _mode_fields(mode)
    z0 = slope * g0 + off
    z1 = slope * g1 + off
    F0 = z0 / math.hypot(hx, z0)
    F1 = z1 / math.hypot(hx, z1)
    par = np.array([F0, F1, hx, slope, off])
    mu = abs(F1 - F0) / (2.0 * hx * tau)
    return ControlProtocol(
        family="FAQUAD", g0=g0, g1=g1, tau=tau,
        kernel_fam=kernels.FAM_FAQUAD, kernel_par=par, mode=mode, mu=mu,
    )


def build_linear(g0: float, g1: float, tau: float) -> ControlProtocol:
    """Linear ramp g(t) = g0 + (g1 - g0) t / tau."""
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    return ControlProtocol(
        family="LINEAR", g0=g0, g1=g1, tau=tau,
        kernel_fam=kernels.FAM_LINEAR, kernel_par=np.array([g0, g1]),
    )


def adiabaticity(protocol: ControlProtocol, t) -> np.ndarray:
    """mu(t) = |h_x hz_slope dg/dt| / (2 (h_x^2 + h_z^2)^(3/2)) for the
    protocol's designated mode."""
    if protocol.mode is None:
        raise ValueError("protocol carries no mode (linear ramps are mode free)")
    hx, slope, off = _mode_fields(protocol.mode)
    g = protocol.eval(t)
    rate = protocol.eval_rate(t)
    hz = slope * np.asarray(g) + off
    return np.abs(hx * slope * rate) / (2.0 * (hx * hx + hz * hz) ** 1.5)


def protocol_table(protocol: ControlProtocol, rows: int = 10000) -> np.ndarray:
    """Tabulated (t, g, dg_dt) with ``rows`` samples across [0, tau]."""
    t = np.linspace(0.0, protocol.tau, rows)
    return np.column_stack([t, protocol.eval(t), protocol.eval_rate(t)])


def write_protocol_csv(protocol: ControlProtocol, path, rows: int = 10000) -> None:
    table = protocol_table(protocol, rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,g,dg_dt\n")
        for row in table:
            fh.write("%.17g,%.17g,%.17g\n" % tuple(row))
