"""Compiled lattice kernels for the collision quadratures.

All index arithmetic inside the innermost loops is done in unsigned 64-bit
integers: numba inserts negative-index wraparound checks for signed computed
indices, which costs roughly a factor five here.

Conventions shared by every kernel
----------------------------------
* Velocities are lattice indices 0..n-1 per axis; the physical spacing ``h``
  only enters the weights.
* Interpolated arguments live in a zero- (or one-) padded cube of side
  ``n + 2P`` flattened in C order; ``P`` comes from ``phase_space.padding_for``.
* Relative offsets k = u - v range over (-(n-1) .. n-1)^3.  The direction rule
  for k is the hemisphere product rule rotated onto k / |k|, doubled because
  the integrand is even in omega.
* ``chi_mode`` selects the cutoff factor on |v - u|: 0 none, 1 chi_m, 2 1 - chi_m.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np
from numba import uint64 as U

_JIT = dict(cache=True, fastmath=True, nogil=True)


@nb.njit(cache=True, nogil=True)
def smoothstep_cutoff(tau, m):
    """chi_m(tau): 1 on [0, m], quintic ramp on [m, 2m], 0 beyond."""
    if tau <= m:
        return 1.0
    if tau >= 2.0 * m:
        return 0.0
    x = (tau - m) / m
    return 1.0 - x * x * x * (10.0 + x * (-15.0 + 6.0 * x))


@nb.njit(cache=True, nogil=True)
def cutoff_factor(tau, m, chi_mode):
    if chi_mode == 0:
        return 1.0
    c = smoothstep_cutoff(tau, m)
    if chi_mode == 1:
        return c
    return 1.0 - c


@nb.njit(cache=True, nogil=True)
def _frame(kx, ky, kz):
    r = math.sqrt(kx * kx + ky * ky + kz * kz)
    zx = kx / r
    zy = ky / r
    zz = kz / r
    ax = abs(zx)
    ay = abs(zy)
    az = abs(zz)
    # cross(ref, zhat) with ref the axis of the smallest |component|
    if ax <= ay and ax <= az:
        e1x, e1y, e1z = 0.0, -zz, zy
    elif ay <= az:
        e1x, e1y, e1z = zz, 0.0, -zx
    else:
        e1x, e1y, e1z = -zy, zx, 0.0
    nrm = math.sqrt(e1x * e1x + e1y * e1y + e1z * e1z)
    e1x /= nrm
    e1y /= nrm
    e1z /= nrm
    e2x = zy * e1z - zz * e1y
    e2y = zz * e1x - zx * e1z
    e2z = zx * e1y - zy * e1x
    return r, zx, zy, zz, e1x, e1y, e1z, e2x, e2y, e2z


@nb.njit(cache=True, nogil=True)
def _stencil(d):
    b = math.floor(d)
    return int(b), d - b


@nb.njit(**_JIT)
def _tri(Xf, w, s0, s1, gx, gy, gz):
    one = U(1)
    hx = 1.0 - gx
    hy = 1.0 - gy
    hz = 1.0 - gz
    return (hx * (hy * (hz * Xf[w] + gz * Xf[w + one]) + gy * (hz * Xf[w + s1] + gz * Xf[w + s1 + one]))
            + gx * (hy * (hz * Xf[w + s0] + gz * Xf[w + s0 + one])
                    + gy * (hz * Xf[w + s0 + s1] + gz * Xf[w + s0 + s1 + one])))


@nb.njit(**_JIT)
def gain_symmetric(Xf, cf, n, P, h, gamma, b0, tn, tw, cphi, sphi, m, chi_mode, mode):
    """Off-diagonal part of sum_{u,omega} W c(u) A(v', u') for a symmetric A.

    ``mode`` selects ``A = X(v') X(u')`` (0), ``X(v') + X(u')`` (1) or
    ``X(v') + X(u') + X(v') X(u')`` (2, i.e. (1+X)(1+X) - 1).  All are symmetric under v' <-> u', so every unordered pair {v, u} is visited
    once and written to both outputs.  Returns a flat array of length n^3.
    """
    out = np.zeros(n * n * n)
    tmp = np.empty(n)
    N = n + 2 * P
    s0 = U(N * N)
    s1 = U(N)
    un = U(n)
    one = U(1)
    nphi = cphi.shape[0]
    dphi = 2.0 * math.pi / nphi
    h3 = h * h * h
    for kx in range(0, n):
        for ky in range(-(n - 1), n):
            if kx == 0 and ky < 0:
                continue
            for kz in range(-(n - 1), n):
                if kx == 0 and ky == 0 and kz <= 0:
                    continue
                r, zx, zy, zz, e1x, e1y, e1z, e2x, e2y, e2z = _frame(kx, ky, kz)
                chi = cutoff_factor(h * r, m, chi_mode)
                if chi == 0.0:
                    continue
                base = h3 * (h * r) ** gamma * b0 * chi * 2.0 * dphi
                ix0 = max(0, -kx)
                ix1 = min(n, n - kx)
                iy0 = max(0, -ky)
                iy1 = min(n, n - ky)
                iz0 = max(0, -kz)
                iz1 = min(n, n - kz)
                nz = iz1 - iz0
                for jt in range(tn.shape[0]):
                    t = tn[jt]
                    st = math.sqrt(1.0 - t * t)
                    W = base * t * tw[jt]
                    s = r * t
                    for jp in range(nphi):
                        dx = s * (t * zx + st * (cphi[jp] * e1x + sphi[jp] * e2x))
                        dy = s * (t * zy + st * (cphi[jp] * e1y + sphi[jp] * e2y))
                        dz = s * (t * zz + st * (cphi[jp] * e1z + sphi[jp] * e2z))
                        # v' = v + d, u' = v + k - d
                        ax, gx = _stencil(dx)
                        ay, gy = _stencil(dy)
                        az, gz = _stencil(dz)
                        bx, qx = _stencil(kx - dx)
                        by, qy = _stencil(ky - dy)
                        bz, qz = _stencil(kz - dz)
                        for ix in range(ix0, ix1):
                            for iy in range(iy0, iy1):
                                pa = U((ix + ax + P) * N * N + (iy + ay + P) * N + (iz0 + az + P))
                                pb = U((ix + bx + P) * N * N + (iy + by + P) * N + (iz0 + bz + P))
                                pv = U((ix * n + iy) * n + iz0)
                                pu = U(((ix + kx) * n + iy + ky) * n + iz0 + kz)
                                if mode == 1:
                                    for j in range(U(nz)):
                                        tmp[j] = (_tri(Xf, pa + j, s0, s1, gx, gy, gz)
                                                  + _tri(Xf, pb + j, s0, s1, qx, qy, qz))
                                elif mode == 2:
                                    for j in range(U(nz)):
                                        xa = _tri(Xf, pa + j, s0, s1, gx, gy, gz)
                                        xb = _tri(Xf, pb + j, s0, s1, qx, qy, qz)
                                        tmp[j] = xa + xb + xa * xb
                                else:
                                    for j in range(U(nz)):
                                        tmp[j] = (_tri(Xf, pa + j, s0, s1, gx, gy, gz)
                                                  * _tri(Xf, pb + j, s0, s1, qx, qy, qz))
                                for j in range(U(nz)):
                                    a = W * tmp[j]
                                    out[pv + j] += a * cf[pu + j]
                                    out[pu + j] += a * cf[pv + j]
    return out


@nb.njit(**_JIT)
def gain_general(Xf, Yf, cf, n, P, h, gamma, b0, tn, tw, cphi, sphi, m, chi_mode):
    """Off-diagonal part of sum_{u,omega} W c(u) X(v') Y(u') for arbitrary X, Y."""
    out = np.zeros(n * n * n)
    N = n + 2 * P
    s0 = U(N * N)
    s1 = U(N)
    nphi = cphi.shape[0]
    dphi = 2.0 * math.pi / nphi
    h3 = h * h * h
    for kx in range(-(n - 1), n):
        for ky in range(-(n - 1), n):
            for kz in range(-(n - 1), n):
                if kx == 0 and ky == 0 and kz == 0:
                    continue
                r, zx, zy, zz, e1x, e1y, e1z, e2x, e2y, e2z = _frame(kx, ky, kz)
                chi = cutoff_factor(h * r, m, chi_mode)
                if chi == 0.0:
                    continue
                base = h3 * (h * r) ** gamma * b0 * chi * 2.0 * dphi
                ix0 = max(0, -kx)
                ix1 = min(n, n - kx)
                iy0 = max(0, -ky)
                iy1 = min(n, n - ky)
                iz0 = max(0, -kz)
                iz1 = min(n, n - kz)
                nz = iz1 - iz0
                for jt in range(tn.shape[0]):
                    t = tn[jt]
                    st = math.sqrt(1.0 - t * t)
                    W = base * t * tw[jt]
                    s = r * t
                    for jp in range(nphi):
                        dx = s * (t * zx + st * (cphi[jp] * e1x + sphi[jp] * e2x))
                        dy = s * (t * zy + st * (cphi[jp] * e1y + sphi[jp] * e2y))
                        dz = s * (t * zz + st * (cphi[jp] * e1z + sphi[jp] * e2z))
                        ax, gx = _stencil(dx)
                        ay, gy = _stencil(dy)
                        az, gz = _stencil(dz)
                        bx, qx = _stencil(kx - dx)
                        by, qy = _stencil(ky - dy)
                        bz, qz = _stencil(kz - dz)
                        for ix in range(ix0, ix1):
                            for iy in range(iy0, iy1):
                                pa = U((ix + ax + P) * N * N + (iy + ay + P) * N + (iz0 + az + P))
                                pb = U((ix + bx + P) * N * N + (iy + by + P) * N + (iz0 + bz + P))
                                pv = U((ix * n + iy) * n + iz0)
                                pu = U(((ix + kx) * n + iy + ky) * n + iz0 + kz)
                                for j in range(U(nz)):
                                    out[pv + j] += (W * cf[pu + j]
                                                    * _tri(Xf, pa + j, s0, s1, gx, gy, gz)
                                                    * _tri(Yf, pb + j, s0, s1, qx, qy, qz))
    return out


@nb.njit(**_JIT)
def convolve(table, hf, n):
    """out[v] = sum_u table[u - v] h[u] with ``table`` on the (2n-1)^3 offset cube."""
    out = np.zeros(n * n * n)
    M = 2 * n - 1
    for kx in range(-(n - 1), n):
        for ky in range(-(n - 1), n):
            for kz in range(-(n - 1), n):
                c = table[((kx + n - 1) * M + ky + n - 1) * M + kz + n - 1]
                if c == 0.0:
                    continue
                ix0 = max(0, -kx)
                ix1 = min(n, n - kx)
                iy0 = max(0, -ky)
                iy1 = min(n, n - ky)
                iz0 = max(0, -kz)
                nz = min(n, n - kz) - iz0
                for ix in range(ix0, ix1):
                    for iy in range(iy0, iy1):
                        pv = U((ix * n + iy) * n + iz0)
                        pu = U(((ix + kx) * n + iy + ky) * n + iz0 + kz)
                        for j in range(U(nz)):
                            out[pv + j] += c * hf[pu + j]
    return out


@nb.njit(**_JIT)
def bound_integrals(nodes, idx, h, gamma, beta, extra_exp, cell1, cell2_scale):
    """Lattice integrals of the two terms of the K-kernel bound.

    For each output node v = nodes[idx[i]] returns
    I1 = sum_eta h^3 |v-eta|^gamma e^{-|v|^2/4 - |eta|^2/4} R(v, eta) and
    I2 = sum_eta h^3 |v-eta|^{-(3-gamma)/2} e^{-|v-eta|^2/8 - (|v|^2-|eta|^2)^2/(8|v-eta|^2)} R(v, eta),
    R = w_beta(v)/w_beta(eta) * e^{extra_exp |v-eta|^2}.
    The coincident node uses the analytic cell weights ``cell1`` and
    ``cell2_scale`` times the direction-averaged Gaussian factor.
    """
    nout = idx.shape[0]
    N = nodes.shape[0]
    I1 = np.zeros(nout)
    I2 = np.zeros(nout)
    h3 = h * h * h
    a2 = -(3.0 - gamma) / 2.0
    for i in range(nout):
        v = nodes[idx[i]]
        v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
        wv = (1.0 + v2) ** (0.5 * beta)
        s1 = 0.0
        s2 = 0.0
        for j in range(N):
            e0 = nodes[j, 0]
            e1 = nodes[j, 1]
            e2 = nodes[j, 2]
            dx = v[0] - e0
            dy = v[1] - e1
            dz = v[2] - e2
            d2 = dx * dx + dy * dy + dz * dz
            if d2 == 0.0:
                continue
            eta2 = e0 * e0 + e1 * e1 + e2 * e2
            R = wv / (1.0 + eta2) ** (0.5 * beta) * math.exp(extra_exp * d2)
            d = math.sqrt(d2)
            s1 += d ** gamma * math.exp(-0.25 * v2 - 0.25 * eta2) * R
            diff = v2 - eta2
            s2 += d ** a2 * math.exp(-0.125 * d2 - diff * diff / (8.0 * d2)) * R
        I1[i] = h3 * s1 + cell1 * math.exp(-0.5 * v2)
        # |v|^2 - |eta|^2 ~ 2 v.z near the diagonal: average exp(-(v.zhat)^2/2) over directions
        vn = math.sqrt(v2)
        if vn > 1e-12:
            avg = math.sqrt(math.pi / 2.0) / vn * math.erf(vn / math.sqrt(2.0))
        else:
            avg = 1.0
        I2[i] = h3 * s2 + cell2_scale * avg
    return I1, I2
