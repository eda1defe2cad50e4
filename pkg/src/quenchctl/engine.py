"""Evolution of momentum subspaces under a schedule, and the derived observables.

Every positive-momentum subspace is driven by the same g(t) (the control is
synthesized once, for the lowest-gap mode, and applied globally).  The final
per-mode excitation probabilities give the density of excitations

    n = (2/N) * sum_k |<phi_k,excited | psi_k(tau)>|^2

and the many-body fidelity as the product of per-mode ground-state overlaps;
excited-state projections are used internally so that deficits far below
machine-epsilon-of-1 remain exact.

Noisy controls are handled by the per-subspace dephasing master equation
(jump operator sigma_z at rate Gamma = 4 J^2 W^2), integrated in Bloch form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .controls import ControlProtocol
from .errors import DegenerateGap, NonPositiveObservable, NonRealControl, StepUnderflow
from .models import ModelSpec, MomentumMode, decompose, gap_profile

__all__ = [
    "DEFAULT_TOL",
    "SubspaceState",
    "SubspaceDensity",
    "NoiseSpec",
    "QuenchResult",
    "ScalingFit",
    "ground_state",
    "excited_state",
    "evolve_unitary",
    "evolve_lindblad",
    "quench_all_modes",
    "fit_scaling",
    "quench_csv_header",
    "quench_csv_row",
]

DEFAULT_TOL = 1e-13


@dataclass
class SubspaceState:
    """Two complex amplitudes on the (pair occupied, pair empty) basis."""

    amplitudes: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass
class SubspaceDensity:
    """2x2 density matrix of one momentum subspace."""

    rho: np.ndarray

    @classmethod
    def from_bloch(cls, r) -> "SubspaceDensity":
        rx, ry, rz = r
        rho = 0.5 * np.array(
            [[1.0 + rz, rx - 1j * ry], [rx + 1j * ry, 1.0 - rz]], dtype=complex
        )
        return cls(rho=rho)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)))


@dataclass(frozen=True)
class NoiseSpec:
    """White Gaussian control noise of strength W on g(t).

    The induced per-subspace dephasing rate is Gamma = 4 J^2 W^2.
    """

    W: float
    J: float = 1.0

    @property
    def gamma(self) -> float:
        return 4.0 * self.J * self.J * self.W * self.W


@dataclass
class QuenchResult:
    per_mode_overlap: np.ndarray = field(repr=False)
    n: float
    fidelity: float
    infidelity: float
    tau: float
    tau_over_qsl: float
    norm_drift: float = 0.0


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    residual: float
    n_used: int


def _eigen_angles(mode: MomentumMode, g: float):
    hz = mode.hz_slope * g + mode.hz_offset
    gap = math.hypot(hz, mode.h_x)
    scale = max(abs(mode.h_x), abs(mode.hz_offset), abs(mode.hz_slope))
    if gap < 1e-14 * scale:
        raise DegenerateGap(f"gap {gap:.3e} below 1e-14 * {scale:.3e} at g={g}")
    return math.atan2(mode.h_x, hz)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    for comp in v:
        if comp != 0.0:
            if comp.real < 0.0:
                return -v
            return v
    return v


def ground_state(mode: MomentumMode, g: float) -> SubspaceState:
    """Lower eigenvector of h_z(g) sz/2 + h_x sx/2 on the (|1>, |0>) basis.

    Built from the half angle of theta = atan2(h_x, h_z); the global phase is
    fixed by making the first nonzero component real and non-negative.
    """
    th = _eigen_angles(mode, g)
    v = np.array([math.sin(th / 2.0), -math.cos(th / 2.0)], dtype=complex)
    return SubspaceState(amplitudes=_fix_phase(v))


def excited_state(mode: MomentumMode, g: float) -> SubspaceState:
    """Upper eigenvector, same phase convention as ground_state."""
    th = _eigen_angles(mode, g)
    v = np.array([math.cos(th / 2.0), math.sin(th / 2.0)], dtype=complex)
    return SubspaceState(amplitudes=_fix_phase(v))


def _bank_arrays(modes: list[MomentumMode]):
    hx = np.array([m.h_x for m in modes])
    slope = np.array([m.hz_slope for m in modes])
    off = np.array([m.hz_offset for m in modes])
    return hx, slope, off


def _ground_bank(hx, slope, off, g):
    th = np.arctan2(hx, slope * g + off)
    psi = np.empty((len(hx), 2), dtype=complex)
    psi[:, 0] = np.sin(th / 2.0)
    psi[:, 1] = -np.cos(th / 2.0)
    return psi


def _excited_bank(hx, slope, off, g):
    th = np.arctan2(hx, slope * g + off)
    phi = np.empty((len(hx), 2), dtype=complex)
    phi[:, 0] = np.cos(th / 2.0)
    phi[:, 1] = np.sin(th / 2.0)
    return phi


def _run_tls_bank(protocol: ControlProtocol, hx, slope, off, psi0, tol):
    psi, _, _, status = kernels.evolve_tls_bank(
        protocol.kernel_fam, protocol.kernel_par, protocol.tau,
        hx, slope, off, psi0, tol,
    )
    if status == 1:
        raise StepUnderflow(f"step fell below 1e-14 * tau (tau={protocol.tau})")
    if status == 2:
        raise NonRealControl(f"control turned non-real during evolution (tau={protocol.tau})")
    return psi


def _run_bloch_bank(protocol: ControlProtocol, hx, slope, off, gamma, r0, tol):
    r, _, _, status = kernels.evolve_bloch_bank(
        protocol.kernel_fam, protocol.kernel_par, protocol.tau,
        hx, slope, off, gamma, r0, tol,
    )
    if status == 1:
        raise StepUnderflow(f"step fell below 1e-14 * tau (tau={protocol.tau})")
    if status == 2:
        raise NonRealControl(f"control turned non-real during evolution (tau={protocol.tau})")
    return r


def evolve_unitary(mode: MomentumMode, protocol: ControlProtocol,
                   tol: float = DEFAULT_TOL) -> SubspaceState:
    """Evolve the mode's ground state at g0 through the full schedule."""
    hx, slope, off = _bank_arrays([mode])
    psi0 = _ground_bank(hx, slope, off, protocol.g0)
    psi = _run_tls_bank(protocol, hx, slope, off, psi0, tol)
    return SubspaceState(amplitudes=psi[0])


def evolve_lindblad(mode: MomentumMode, protocol: ControlProtocol,
                    noise: NoiseSpec, tol: float = DEFAULT_TOL) -> SubspaceDensity:
    """Evolve the pure ground-state projector under the dephasing master equation."""
    hx, slope, off = _bank_arrays([mode])
    r0 = _bloch_ground(hx, slope, off, protocol.g0)
    r = _run_bloch_bank(protocol, hx, slope, off, noise.gamma, r0, tol)
    return SubspaceDensity.from_bloch(r[0])


def _bloch_ground(hx, slope, off, g):
    hz = slope * g + off
    nrm = np.hypot(hx, hz)
    r = np.empty((len(hx), 3))
    r[:, 0] = -hx / nrm
    r[:, 1] = 0.0
    r[:, 2] = -hz / nrm
    return r


def quench_all_modes(spec: ModelSpec, protocol: ControlProtocol,
                     noise: NoiseSpec | None = None,
                     tol: float = DEFAULT_TOL) -> QuenchResult:
    """Evolve every positive-momentum subspace under the same schedule.

    Unitary when ``noise`` is None or W = 0 is still run through the
    Lindblad path if a NoiseSpec is supplied (the W = 0 generator is the
    coherent one).  Observables:

        n         = (2/N) sum_k p_exc,k
        fidelity  = prod_k (1 - p_exc,k)
        infidelity = 1 - fidelity  (computed via log1p/expm1)
    """
    modes = decompose(spec)
    hx, slope, off = _bank_arrays(modes)
    profile = gap_profile(modes, protocol.g0, protocol.g1)
    norm_drift = 0.0
    if noise is None:
        psi0 = _ground_bank(hx, slope, off, protocol.g0)
        psi = _run_tls_bank(protocol, hx, slope, off, psi0, tol)
        phi_exc = _excited_bank(hx, slope, off, protocol.g1)
        amp_exc = np.sum(np.conj(phi_exc) * psi, axis=1)
        p_exc = np.abs(amp_exc) ** 2
        norm_drift = float(np.max(np.abs(np.sum(np.abs(psi) ** 2, axis=1) - 1.0)))
    else:
        r0 = _bloch_ground(hx, slope, off, protocol.g0)
        r = _run_bloch_bank(protocol, hx, slope, off, noise.gamma, r0, tol)
        hz1 = slope * protocol.g1 + off
        nrm = np.hypot(hx, hz1)
        # p_exc = <phi_exc| rho |phi_exc> = (1 + r . h_hat)/2
        p_exc = 0.5 * (1.0 + (r[:, 0] * hx + r[:, 2] * hz1) / nrm)
        p_exc = np.clip(p_exc, 0.0, 1.0)
    n = 2.0 / spec.N * float(np.sum(p_exc))
    log_f = float(np.sum(np.log1p(-np.minimum(p_exc, 1.0 - 1e-300))))
    fidelity = math.exp(log_f)
    infidelity = -math.expm1(log_f)
    return QuenchResult(
        per_mode_overlap=1.0 - p_exc,
        n=n,
        fidelity=fidelity,
        infidelity=infidelity,
        tau=protocol.tau,
        tau_over_qsl=protocol.tau / profile.tau_qsl,
        norm_drift=norm_drift,
    )


OBSERVABLE_FLOOR = 1e-13


def fit_scaling(results: list[QuenchResult], observable: str = "n") -> ScalingFit:
    """Least-squares fit of log(observable) against log(tau/tau_qsl).

    Points below the 1e-13 observable floor are excluded (double precision
    cannot resolve them); values <= 0 raise NonPositiveObservable.
    """
    if observable not in ("n", "infidelity"):
        raise ValueError(f"observable must be 'n' or 'infidelity', got {observable!r}")
    x = np.array([r.tau_over_qsl for r in results], dtype=float)
    y = np.array([getattr(r, observable) for r in results], dtype=float)
    return fit_loglog(x, y)


def fit_loglog(x, y) -> ScalingFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise NonPositiveObservable(
            "observable <= 0 encountered; the numerical floor has been reached"
        )
    keep = y >= OBSERVABLE_FLOOR
    x, y = x[keep], y[keep]
    if len(x) < 5:
        raise ValueError(f"need >= 5 usable points for a scaling fit, have {len(x)}")
    lx, ly = np.log(x), np.log(y)
    coeffs, res, *_ = np.polyfit(lx, ly, 1, full=True)
    residual = float(res[0]) if len(res) else 0.0
    return ScalingFit(slope=float(coeffs[0]), intercept=float(coeffs[1]),
                      residual=residual, n_used=len(x))


def quench_csv_header() -> list[str]:
    return ["family", "N", "k_order", "tau", "tau_over_qsl", "W",
            "n", "fidelity", "infidelity"]


def quench_csv_row(spec: ModelSpec, protocol: ControlProtocol,
                   result: QuenchResult, W: float = 0.0,
                   k_order: int | None = None) -> list:
    if k_order is None:
        k_order = protocol.ansatz.order_k if protocol.ansatz is not None else 0
    return [protocol.family, spec.N, k_order, result.tau, result.tau_over_qsl,
            W, result.n, result.fidelity, result.infidelity]
