"""Compiled propagation kernels for banks of independent two-level subspaces.

The generators here are linear and bounded, so every accepted step applies
an exact matrix exponential of an averaged generator (a fourth-order,
two-exponential commutator-free scheme with Gauss-Legendre nodes).  Unitary
banks therefore preserve the state norm, and the Bloch-vector bank for the
dephasing master equation preserves trace and Hermiticity structurally:
trace because the Bloch parameterization has no trace degree of freedom,
positivity because each exponential factor is a rotation combined with a
contraction.

Step control is classic step doubling: one full step is compared against
two half steps, the difference (scaled down by the Richardson factor for a
locally fifth-order error) is held below the requested tolerance, and the
step is resized with safety-clamped power-law feedback.

Status codes returned by the drivers:
    0  success
    1  step underflow (required dt < 1e-14 * tau)
    2  control evaluation failed (non-real invariant control)
"""

import math

import numpy as np
from numba import njit

__all__ = [
    "FAM_LINEAR",
    "FAM_INVARIANT",
    "FAM_FAQUAD",
    "g_eval",
    "g_eval_array",
    "evolve_tls_bank",
    "evolve_bloch_bank",
]

FAM_LINEAR = 0
FAM_INVARIANT = 1
FAM_FAQUAD = 2

_RT3 = math.sqrt(3.0)
_C1 = 0.5 - _RT3 / 6.0
_C2 = 0.5 + _RT3 / 6.0
_A1 = (3.0 - 2.0 * _RT3) / 12.0
_A2 = (3.0 + 2.0 * _RT3) / 12.0

# Richardson factor for the accepted two-half-step solution (local order 5)
_RICH = 31.0


@njit(cache=True, nogil=True)
def g_eval(fam, par, tau, t):
    """Control value g(t) for the packed protocol description ``par``.

    Layouts:
        LINEAR     par = [g0, g1]
        INVARIANT  par = [K, hx, slope, off, ncoef, c desc..., c' desc..., c'' desc...]
        FAQUAD     par = [F0, F1, hx, slope, off]
    Returns NaN if the invariant square root turns non-real.
    """
    if fam == FAM_LINEAR:
        return par[0] + (par[1] - par[0]) * (t / tau)
    elif fam == FAM_INVARIANT:
        K = par[0]
        hx = par[1]
        slope = par[2]
        off = par[3]
        nc = int(par[4])
        s = t / tau
        f = 0.0
        for i in range(nc):
            f = f * s + par[5 + i]
        fd = 0.0
        for i in range(nc - 1):
            fd = fd * s + par[5 + nc + i]
        fd /= tau
        fdd = 0.0
        for i in range(nc - 2):
            fdd = fdd * s + par[4 + 2 * nc + i]
        fdd /= tau * tau
        arg = K - f * f - (fd / hx) ** 2
        if arg <= 1e-14 * K:
            return np.nan
        hz = (fdd + f * hx * hx) / (hx * math.sqrt(arg))
        return (hz - off) / slope
    else:
        F0 = par[0]
        F1 = par[1]
        hx = par[2]
        slope = par[3]
        off = par[4]
        y = F0 + (F1 - F0) * (t / tau)
        z = hx * y / math.sqrt(1.0 - y * y)
        return (z - off) / slope


@njit(cache=True, nogil=True)
def g_eval_array(fam, par, tau, ts):
    out = np.empty(ts.shape[0])
    for i in range(ts.shape[0]):
        out[i] = g_eval(fam, par, tau, ts[i])
    return out


@njit(cache=True, nogil=True, inline="always")
def _su2_bank(hz, hx, dt, psi):
    """psi <- exp(-i dt (hz sz + hx sx)/2) psi for every bank member."""
    for m in range(psi.shape[0]):
        w = math.hypot(hz[m], hx[m])
        phi = 0.5 * dt * w
        c = math.cos(phi)
        if w > 0.0:
            s = math.sin(phi) / w
        else:
            s = 0.5 * dt
        a = psi[m, 0]
        b = psi[m, 1]
        psi[m, 0] = c * a - 1j * s * (hz[m] * a + hx[m] * b)
        psi[m, 1] = c * b - 1j * s * (hx[m] * a - hz[m] * b)


@njit(cache=True, nogil=True)
def _cf4_tls(ga, gb, hx, slope, off, dt, psi, zbuf, xbuf):
    for m in range(psi.shape[0]):
        hz1 = slope[m] * ga + off[m]
        hz2 = slope[m] * gb + off[m]
        zbuf[m] = _A1 * hz1 + _A2 * hz2
        xbuf[m] = 0.5 * hx[m]
    _su2_bank(zbuf, xbuf, dt, psi)
    for m in range(psi.shape[0]):
        hz1 = slope[m] * ga + off[m]
        hz2 = slope[m] * gb + off[m]
        zbuf[m] = _A2 * hz1 + _A1 * hz2
    _su2_bank(zbuf, xbuf, dt, psi)


@njit(cache=True, nogil=True)
def evolve_tls_bank(fam, par, tau, hx, slope, off, psi0, tol):
    """Propagate i d(psi)/dt = H_k(g(t)) psi for all modes at once.

    Returns (psi, naccept, nreject, status).
    """
    M = psi0.shape[0]
    psi = psi0.copy()
    full = np.empty_like(psi)
    half = np.empty_like(psi)
    zbuf = np.empty(M)
    xbuf = np.empty(M)
    t = 0.0
    dt = tau / 100.0
    na = 0
    nr = 0
    while tau - t > 1e-13 * tau:
        if dt > tau - t:
            dt = tau - t
        ga = g_eval(fam, par, tau, t + _C1 * dt)
        gb = g_eval(fam, par, tau, t + _C2 * dt)
        g1 = g_eval(fam, par, tau, t + 0.5 * _C1 * dt)
        g2 = g_eval(fam, par, tau, t + 0.5 * _C2 * dt)
        g3 = g_eval(fam, par, tau, t + 0.5 * dt + 0.5 * _C1 * dt)
        g4 = g_eval(fam, par, tau, t + 0.5 * dt + 0.5 * _C2 * dt)
        if math.isnan(ga + gb + g1 + g2 + g3 + g4):
            return psi, na, nr, 2
        for m in range(M):
            full[m, 0] = psi[m, 0]
            full[m, 1] = psi[m, 1]
            half[m, 0] = psi[m, 0]
            half[m, 1] = psi[m, 1]
        _cf4_tls(ga, gb, hx, slope, off, dt, full, zbuf, xbuf)
        _cf4_tls(g1, g2, hx, slope, off, 0.5 * dt, half, zbuf, xbuf)
        _cf4_tls(g3, g4, hx, slope, off, 0.5 * dt, half, zbuf, xbuf)
        err = 0.0
        for m in range(M):
            e0 = abs(full[m, 0] - half[m, 0])
            e1 = abs(full[m, 1] - half[m, 1])
            if e0 > err:
                err = e0
            if e1 > err:
                err = e1
        err /= _RICH
        if err <= tol:
            tmp = psi
            psi = half
            half = tmp
            t += dt
            na += 1
            fac = 0.9 * (tol / max(err, 1e-300)) ** 0.2
            if fac > 5.0:
                fac = 5.0
            elif fac < 0.2:
                fac = 0.2
            dt *= fac
        else:
            nr += 1
            fac = 0.9 * (tol / err) ** 0.2
            if fac < 0.1:
                fac = 0.1
            dt *= fac
            if dt < 1e-14 * tau:
                return psi, na, nr, 1
    return psi, na, nr, 0


@njit(cache=True, nogil=True, inline="always")
def _expm3_apply(G, dt, r):
    """r <- expm(dt * G) r for a 3x3 real generator, scaling-squaring Taylor."""
    A = np.empty((3, 3))
    nrm = 0.0
    for i in range(3):
        rows = 0.0
        for j in range(3):
            A[i, j] = dt * G[i, j]
            rows += abs(A[i, j])
        if rows > nrm:
            nrm = rows
    s = 0
    while nrm > 0.5:
        nrm *= 0.5
        s += 1
    if s > 0:
        sc = 1.0 / (1 << s)
        for i in range(3):
            for j in range(3):
                A[i, j] *= sc
    # Taylor sum to machine precision at ||A|| <= 0.5
    E = np.eye(3)
    T = np.eye(3)
    W = np.empty((3, 3))
    for order in range(1, 18):
        inv = 1.0 / order
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for l in range(3):
                    acc += T[i, l] * A[l, j]
                W[i, j] = acc * inv
        done = True
        for i in range(3):
            for j in range(3):
                T[i, j] = W[i, j]
                E[i, j] += W[i, j]
                if abs(W[i, j]) > 1e-18:
                    done = False
        if done:
            break
    for _ in range(s):
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for l in range(3):
                    acc += E[i, l] * E[l, j]
                W[i, j] = acc
        for i in range(3):
            for j in range(3):
                E[i, j] = W[i, j]
    x = E[0, 0] * r[0] + E[0, 1] * r[1] + E[0, 2] * r[2]
    y = E[1, 0] * r[0] + E[1, 1] * r[1] + E[1, 2] * r[2]
    z = E[2, 0] * r[0] + E[2, 1] * r[1] + E[2, 2] * r[2]
    r[0] = x
    r[1] = y
    r[2] = z


@njit(cache=True, nogil=True)
def _cf4_bloch(ga, gb, hx, slope, off, gam2, dt, r):
    """One commutator-free step of the dephasing Bloch equation bank.

    Generator per mode: d/dt (rx,ry,rz) = h x r - 2 Gamma (rx, ry, 0),
    h = (h_x, 0, h_z(g(t))).
    """
    G = np.empty((3, 3))
    for m in range(r.shape[0]):
        hz1 = slope[m] * ga + off[m]
        hz2 = slope[m] * gb + off[m]
        hxm = 0.5 * hx[m]
        for second in range(2):
            if second == 0:
                hzb = _A1 * hz1 + _A2 * hz2
            else:
                hzb = _A2 * hz1 + _A1 * hz2
            G[0, 0] = -gam2 * 0.5
            G[0, 1] = -hzb
            G[0, 2] = 0.0
            G[1, 0] = hzb
            G[1, 1] = -gam2 * 0.5
            G[1, 2] = -hxm
            G[2, 0] = 0.0
            G[2, 1] = hxm
            G[2, 2] = 0.0
            _expm3_apply(G, dt, r[m])


@njit(cache=True, nogil=True)
def evolve_bloch_bank(fam, par, tau, hx, slope, off, gamma, r0, tol):
    """Propagate the per-mode dephasing master equation in Bloch form.

    gamma is the Lindblad rate; coherences damp at 2*gamma.  Returns
    (r, naccept, nreject, status).
    """
    M = r0.shape[0]
    r = r0.copy()
    full = np.empty_like(r)
    half = np.empty_like(r)
    gam2 = 2.0 * gamma
    t = 0.0
    dt = tau / 100.0
    na = 0
    nr = 0
    while tau - t > 1e-13 * tau:
        if dt > tau - t:
            dt = tau - t
        ga = g_eval(fam, par, tau, t + _C1 * dt)
        gb = g_eval(fam, par, tau, t + _C2 * dt)
        g1 = g_eval(fam, par, tau, t + 0.5 * _C1 * dt)
        g2 = g_eval(fam, par, tau, t + 0.5 * _C2 * dt)
        g3 = g_eval(fam, par, tau, t + 0.5 * dt + 0.5 * _C1 * dt)
        g4 = g_eval(fam, par, tau, t + 0.5 * dt + 0.5 * _C2 * dt)
        if math.isnan(ga + gb + g1 + g2 + g3 + g4):
            return r, na, nr, 2
        for m in range(M):
            for c in range(3):
                full[m, c] = r[m, c]
                half[m, c] = r[m, c]
        _cf4_bloch(ga, gb, hx, slope, off, gam2, dt, full)
        _cf4_bloch(g1, g2, hx, slope, off, gam2, 0.5 * dt, half)
        _cf4_bloch(g3, g4, hx, slope, off, gam2, 0.5 * dt, half)
        err = 0.0
        for m in range(M):
            for c in range(3):
                e = abs(full[m, c] - half[m, c])
                if e > err:
                    err = e
        err /= _RICH
        if err <= tol:
            tmp = r
            r = half
            half = tmp
            t += dt
            na += 1
            fac = 0.9 * (tol / max(err, 1e-300)) ** 0.2
            if fac > 5.0:
                fac = 5.0
            elif fac < 0.2:
                fac = 0.2
            dt *= fac
        else:
            nr += 1
            fac = 0.9 * (tol / err) ** 0.2
            if fac < 0.1:
                fac = 0.1
            dt *= fac
            if dt < 1e-14 * tau:
                return r, na, nr, 1
    return r, na, nr, 0
