"""Chain models and their decomposition into independent momentum subspaces.

Both supported chains (transverse-field Ising and long-range Kitaev) reduce,
for even particle number and positive fermion parity, to N/2 decoupled
two-level systems labelled by the positive momenta k = (2n-1)*pi/(N*a).
Each subspace carries a Hamiltonian

    H_k = h_z(g) * sigma_z / 2 + h_x * sigma_x / 2,

where h_x is independent of the control g and h_z is affine in g.  That
affine structure is what the control-synthesis layer relies on, so it is
part of the contract here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateGap

__all__ = [
    "ModelSpec",
    "MomentumMode",
    "GapProfile",
    "kac_norm",
    "decompose",
    "decompose_tfim",
    "decompose_lrk",
    "gap_profile",
]

FAMILIES = ("TFIM", "LRK", "REF_TFIM")


@dataclass(frozen=True)
class ModelSpec:
    """Which chain to simulate.

    Parameters
    ----------
    family : str
        "TFIM", "LRK" or "REF_TFIM" (TFIM with the coupling rescaled by
        ``lambda_ref``, used to build reference controls for models whose
        critical field is shifted).
    N : int
        Particle count; must be even and >= 4.
    J : float
        Energy scale (hbar = 1, so inverse time).
    a : float
        Lattice spacing.  Only the products k*a enter anywhere; default 1.
    alpha, beta : float
        Long-range hopping / pairing exponents (LRK only, both > 1).
    lambda_ref : float
        Dimensionless coupling of the reference chain (REF_TFIM only).
    kac_variant : str
        "main" uses plain distances r = 1..N/2 in the long-range sums;
        "halved" uses r_bar = min(r, N/2 - r) (dropping the r_bar = 0
        term).  Only meaningful for LRK.
    """

    family: str
    N: int
    J: float = 1.0
    a: float = 1.0
    alpha: float | None = None
    beta: float | None = None
    lambda_ref: float = 1.0
    kac_variant: str = "main"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.N % 2 != 0:
            raise ValueError(f"N must be even (momentum pairs +-k), got N={self.N}")
        if self.N < 4:
            raise ValueError(f"N must be >= 4, got N={self.N}")
        if self.J <= 0:
            raise ValueError(f"J must be > 0, got J={self.J}")
        if self.family == "LRK":
            if self.alpha is None or self.alpha <= 1:
                raise ValueError(f"LRK requires alpha > 1, got alpha={self.alpha}")
            if self.beta is None or self.beta <= 1:
                raise ValueError(f"LRK requires beta > 1, got beta={self.beta}")
        if self.kac_variant not in ("main", "halved"):
            raise ValueError(f"kac_variant must be 'main' or 'halved', got {self.kac_variant!r}")

    @property
    def momenta(self) -> np.ndarray:
        n = np.arange(1, self.N // 2 + 1)
        return (2 * n - 1) * np.pi / (self.N * self.a)


@dataclass(frozen=True)
class MomentumMode:
    """One decoupled two-level subsystem.

    ``h_z(g) = hz_slope * g + hz_offset`` is affine in the control for
    every implemented family; ``h_x`` is constant.
    """

    k: float
    h_x: float
    hz_slope: float
    hz_offset: float

    def h_z(self, g):
        return self.hz_slope * np.asarray(g) + self.hz_offset

    def gap(self, g):
        """Instantaneous gap sqrt(h_z(g)^2 + h_x^2)."""
        return np.hypot(self.h_z(g), self.h_x)

    def crossing_g(self) -> float:
        """Control value where h_z vanishes (the per-mode critical point)."""
        return -self.hz_offset / self.hz_slope


@dataclass(frozen=True)
class GapProfile:
    """Minimum gap of the full system along a quench path."""

    mode_gaps: dict[int, Callable] = field(repr=False)
    delta_min: float
    tau_qsl: float
    argmin_mode: int


def kac_norm(gamma: float, N: int, variant: str = "main") -> float:
    """Normalization N_gamma = 2 * sum of the long-range weights.

    Keeps the total coupling energy extensive regardless of the decay
    exponent.
    """
    r = np.arange(1, N // 2 + 1, dtype=float)
    if variant == "halved":
        r = np.minimum(r, N / 2 - r)
        r = r[r > 0]
    return 2.0 * float(np.sum(r ** (-gamma)))


def decompose_tfim(spec: ModelSpec) -> list[MomentumMode]:
    """Momentum modes of the (possibly lambda-rescaled) transverse-field Ising chain.

    For the plain chain: h_x = 4J sin(ka), h_z(g) = 4J(g - cos(ka)).
    For REF_TFIM both trigonometric terms are multiplied by lambda_ref,
    leaving the slope of h_z untouched: h_z(g) = 4J(g - lambda cos(ka)),
    h_x = 4J lambda sin(ka).
    """
    if spec.family not in ("TFIM", "REF_TFIM"):
        raise ValueError(f"decompose_tfim expects TFIM or REF_TFIM, got {spec.family}")
    lam = spec.lambda_ref if spec.family == "REF_TFIM" else 1.0
    ka = spec.momenta * spec.a
    modes = []
    for kai, k in zip(ka, spec.momenta):
        modes.append(
            MomentumMode(
                k=float(k),
                h_x=4.0 * spec.J * lam * math.sin(kai),
                hz_slope=4.0 * spec.J,
                hz_offset=-4.0 * spec.J * lam * math.cos(kai),
            )
        )
    return modes


def decompose_lrk(spec: ModelSpec) -> list[MomentumMode]:
    """Momentum modes of the long-range Kitaev chain.

    h_z(g) = g - 4J sum_r J_r cos(k r a),  h_x = -2J sum_r d_r sin(k r a),
    with J_r = 1/(N_alpha r^alpha), d_r = 1/(N_beta r^beta) and the sums
    running over r = 1..N/2.
    """
    if spec.family != "LRK":
        raise ValueError(f"decompose_lrk expects LRK, got {spec.family}")
    N = spec.N
    r = np.arange(1, N // 2 + 1, dtype=float)
    if spec.kac_variant == "halved":
        rbar = np.minimum(r, N / 2 - r)
        keep = rbar > 0
        r, rbar = r[keep], rbar[keep]
    else:
        rbar = r
    na = 2.0 * np.sum(rbar ** (-spec.alpha))
    nb = 2.0 * np.sum(rbar ** (-spec.beta))
    jr = rbar ** (-spec.alpha) / na
    dr = rbar ** (-spec.beta) / nb
    modes = []
    for k in spec.momenta:
        kra = k * r * spec.a
        off = -4.0 * spec.J * float(np.sum(jr * np.cos(kra)))
        hx = -2.0 * spec.J * float(np.sum(dr * np.sin(kra)))
        modes.append(MomentumMode(k=float(k), h_x=hx, hz_slope=1.0, hz_offset=off))
    return modes


def decompose(spec: ModelSpec) -> list[MomentumMode]:
    """Dispatch on the model family."""
    if spec.family == "LRK":
        return decompose_lrk(spec)
    return decompose_tfim(spec)


def _mode_min_gap(mode: MomentumMode, g_lo: float, g_hi: float) -> float:
    """Closed-form minimum of the mode gap over g in [g_lo, g_hi].

    The gap is monotone in |h_z| and h_z is affine, so the minimum sits at
    the zero crossing of h_z if that lies inside the interval, otherwise at
    the endpoint with the smaller |h_z|.
    """
    if mode.hz_slope != 0.0:
        gc = mode.crossing_g()
        if g_lo <= gc <= g_hi:
            return abs(mode.h_x)
    hz = min(abs(mode.h_z(g_lo)), abs(mode.h_z(g_hi)))
    return math.hypot(hz, mode.h_x)


def gap_profile(modes: list[MomentumMode], g_start: float, g_end: float) -> GapProfile:
    """Minimum full-system gap over the quench path and the speed limit pi/gap."""
    if not modes:
        raise ValueError("modes must be nonempty")
    if g_start == g_end:
        raise ValueError("g_start and g_end must differ")
    g_lo, g_hi = min(g_start, g_end), max(g_start, g_end)
    gaps = [_mode_min_gap(m, g_lo, g_hi) for m in modes]
    i_min = int(np.argmin(gaps))
    delta = float(gaps[i_min])
    if delta <= 0.0:
        raise DegenerateGap(f"gap closes exactly along the path (mode {i_min})")
    return GapProfile(
        mode_gaps={i: m.gap for i, m in enumerate(modes)},
        delta_min=delta,
        tau_qsl=math.pi / delta,
        argmin_mode=i_min,
    )
