"""Compiled Hamiltonian application and Dormand-Prince 5(4) propagation.

Everything the integrator touches per step lives here so that a full anneal
runs inside one compiled call.  Mode codes: 0 none, 1 single-spin,
2 cluster, 3 exact.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

MODE_NONE, MODE_SINGLE, MODE_CLUSTER, MODE_EXACT = 0, 1, 2, 3
STATUS_OK, STATUS_DEGENERATE, STATUS_UNDERFLOW = 0, 1, 2

# float parameter slots
F_H0, F_J, F_TA, F_CAP, F_GAPTOL, F_FREEZE = range(6)
# int parameter slots
I_L, I_MODE, I_TRIO0, I_TRIO1, I_TRIO2, I_SHIFT, I_FULL = range(7)


@njit(cache=True)
def schedule_cos_sin(tau):
    c = math.cos(0.5 * math.pi * tau)
    s = math.sin(0.5 * math.pi * tau)
    d = 0.5 * math.pi * math.sin(math.pi * tau)
    return c * c, s * s, -d, d


@njit(cache=True)
def steering_coefficient(tau, h0, hk, t_a):
    c = math.cos(0.5 * math.pi * tau)
    s = math.sin(0.5 * math.pi * tau)
    den = 4.0 * t_a * (h0 * h0 * c**4 + hk * hk * s**4)
    if den == 0.0:
        return 0.0
    return -h0 * hk * math.pi * math.sin(math.pi * tau) / den


@njit(cache=True)
def reference_energy(fi, ff, h0, h):
    """Ground energy of the uncoupled problem; subtracted as a global phase."""
    e = 0.0
    a = fi * h0
    for k in range(h.shape[0]):
        b = ff * h[k]
        e -= math.sqrt(a * a + b * b)
    return e


@njit(cache=True)
def _ground_cd_vectors(H0, dH, gap_tol):
    """Return (v1, u, gap) with the counterdiabatic operator i(u v1^T - v1 u^T)."""
    w, V = np.linalg.eigh(H0)
    n = H0.shape[0]
    gap = w[1] - w[0]
    v1 = V[:, 0].copy()
    u = np.zeros(n)
    if gap <= gap_tol:
        return v1, u, gap
    g = dH @ v1
    for m in range(1, n):
        vm = V[:, m]
        amp = 0.0
        for i in range(n):
            amp += vm[i] * g[i]
        amp /= w[0] - w[m]
        for i in range(n):
            u[i] += amp * vm[i]
    return v1, u, gap


@njit(cache=True)
def _full_cd_matrix(H0, dH, gap_tol):
    """All-levels counterdiabatic operator i V K V^T; returns (matrix, ground gap)."""
    w, V = np.linalg.eigh(H0)
    n = H0.shape[0]
    gap = w[1] - w[0]
    M = np.zeros((n, n), dtype=np.complex128)
    if gap <= gap_tol:
        return M, gap
    X = V.T @ dH @ V
    K = np.zeros((n, n))
    for m in range(n):
        for k in range(n):
            d = w[k] - w[m]
            if abs(d) > gap_tol:
                K[m, k] = X[m, k] / d
    R = V @ K @ V.T
    for a in range(n):
        for b in range(n):
            M[a, b] = 1j * R[a, b]
    return M, gap


@njit(cache=True)
def _trio_offsets(trio):
    off = np.zeros(8, dtype=np.int64)
    for t in range(8):
        o = 0
        for j in range(3):
            if (t >> j) & 1:
                o |= 1 << trio[j]
        off[t] = o
    return off


@njit(cache=True)
def trio_cd_matrix(tau, fi, ff, dfi, dff, h0, J, h, trio, t_a, gap_tol, full):
    """8x8 counterdiabatic operator of the closed trio (index b_l + 2 b_c + 4 b_r)."""
    Hx = np.zeros((8, 8))
    hz = np.zeros(8)
    for t in range(8):
        for j in range(3):
            Hx[t ^ (1 << j), t] += h0
            zj = 1.0 - 2.0 * ((t >> j) & 1)
            hz[t] += h[trio[j]] * zj
        z0 = 1.0 - 2.0 * (t & 1)
        z1 = 1.0 - 2.0 * ((t >> 1) & 1)
        z2 = 1.0 - 2.0 * ((t >> 2) & 1)
        hz[t] += J * (z0 * z1 + z1 * z2)
    H0 = fi * Hx
    dH = (dfi / t_a) * Hx
    for t in range(8):
        H0[t, t] += ff * hz[t]
        dH[t, t] += (dff / t_a) * hz[t]
    if full:
        return _full_cd_matrix(H0, dH, gap_tol)
    v1, u, gap = _ground_cd_vectors(H0, dH, gap_tol)
    M = np.zeros((8, 8), dtype=np.complex128)
    for a in range(8):
        for b in range(8):
            M[a, b] = 1j * (u[a] * v1[b] - v1[a] * u[b])
    return M, gap


@njit(cache=True, fastmath=True)
def apply_hamiltonian(psi, out, tau, fparams, iparams, h, diag, dense_hi, scale=1.0 + 0j):
    """out = scale * (H(tau) - e_ref) psi; returns (status, e_ref)."""
    L = iparams[I_L]
    mode = iparams[I_MODE]
    h0 = fparams[F_H0]
    t_a = fparams[F_TA]
    cap = fparams[F_CAP]
    gap_tol = fparams[F_GAPTOL]
    J = fparams[F_J]
    dim = psi.shape[0]
    fi, ff, dfi, dff = schedule_cos_sin(tau)
    e_ref = reference_energy(fi, ff, h0, h) if iparams[I_SHIFT] else 0.0

    trio = np.empty(3, dtype=np.int64)
    trio[0] = iparams[I_TRIO0]
    trio[1] = iparams[I_TRIO1]
    trio[2] = iparams[I_TRIO2]
    # coef[k, b]: matrix element of a X_k + c Y_k into a configuration whose
    # bit k is b from its partner with bit k flipped
    coef = np.empty((L, 2), dtype=np.complex128)
    a = fi * h0
    for k in range(L):
        c = 0.0
        if mode == MODE_SINGLE or (
            mode == MODE_CLUSTER and k != trio[0] and k != trio[1] and k != trio[2]
        ):
            c = steering_coefficient(tau, h0, h[k], t_a)
            if c > cap:
                c = cap
            elif c < -cap:
                c = -cap
        coef[k, 0] = scale * complex(a, -c)
        coef[k, 1] = scale * complex(a, c)

    for i in range(dim):
        out[i] = scale * (ff * diag[i] - e_ref) * psi[i]
    for k in range(L):
        lo = coef[k, 0]
        hi = coef[k, 1]
        stride = 1 << k
        for base in range(0, dim, 2 * stride):
            for i in range(base, base + stride):
                j = i + stride
                out[i] += lo * psi[j]
                out[j] += hi * psi[i]

    status = STATUS_OK
    if mode == MODE_CLUSTER:
        status = _apply_cluster_cd(psi, out, tau, fi, ff, dfi, dff, h0, J, h, trio, t_a, gap_tol, iparams[I_FULL], scale)
    elif mode == MODE_EXACT:
        status = _apply_exact_cd(psi, out, fi, ff, dfi, dff, t_a, h, diag, dense_hi, gap_tol, iparams[I_FULL], scale)
    return status, e_ref


# The counterdiabatic terms below are written so that h -> -h gives bitwise
# mirrored results: eigensystems are computed for a sign-canonical field and
# mirrored back (index i -> n-1-i is the global spin flip), and every sum runs
# over mirror pairs (i, n-1-i) first.  No fastmath here, which would reorder sums.


@njit(cache=True, fastmath=False)
def _canonical_sign(values):
    for v in values:
        if v > 0.0:
            return 1.0
        if v < 0.0:
            return -1.0
    return 1.0


@njit(cache=True, fastmath=False)
def _mirror_vector(v, flip):
    if not flip:
        return v
    n = v.shape[0]
    out = np.empty_like(v)
    for i in range(n):
        out[i] = v[n - 1 - i]
    return out


@njit(cache=True, fastmath=False)
def _mirror_matrix(M, flip):
    if not flip:
        return M
    n = M.shape[0]
    out = np.empty_like(M)
    for a in range(n):
        for b in range(n):
            out[a, b] = M[n - 1 - a, n - 1 - b]
    return out


@njit(cache=True, fastmath=False)
def _paired_dot(row, x):
    n = x.shape[0]
    acc = 0j
    for i in range(n // 2):
        j = n - 1 - i
        acc += row[i] * x[i] + row[j] * x[j]
    return acc


@njit(cache=True, fastmath=False)
def _apply_cluster_cd(psi, out, tau, fi, ff, dfi, dff, h0, J, h, trio, t_a, gap_tol, full, scale):
    ht = np.empty(3)
    for j in range(3):
        ht[j] = h[trio[j]]
    sign = _canonical_sign(ht)
    hc = h * sign
    M, gap = trio_cd_matrix(tau, fi, ff, dfi, dff, h0, J, hc, trio, t_a, gap_tol, full)
    if gap <= gap_tol:
        return STATUS_DEGENERATE
    M = _mirror_matrix(M, sign < 0.0) * scale
    off = _trio_offsets(trio)
    mask = off[7]
    x = np.empty(8, dtype=np.complex128)
    for base in range(psi.shape[0]):
        if base & mask:
            continue
        for t in range(8):
            x[t] = psi[base | off[t]]
        for s in range(8):
            out[base | off[s]] += _paired_dot(M[s], x)
    return STATUS_OK


@njit(cache=True, fastmath=False)
def _apply_exact_cd(psi, out, fi, ff, dfi, dff, t_a, h, diag, dense_hi, gap_tol, full, scale):
    dim = psi.shape[0]
    flip = _canonical_sign(h) < 0.0
    dc = _mirror_vector(diag, flip)
    H0 = fi * dense_hi
    dH = (dfi / t_a) * dense_hi
    for i in range(dim):
        H0[i, i] += ff * dc[i]
        dH[i, i] += (dff / t_a) * dc[i]
    if full:
        Mx, gap = _full_cd_matrix(H0, dH, gap_tol)
        if gap <= gap_tol:
            return STATUS_DEGENERATE
        Mx = _mirror_matrix(Mx, flip)
        for i in range(dim):
            out[i] += scale * _paired_dot(Mx[i], psi)
        return STATUS_OK
    v1c, uc, gap = _ground_cd_vectors(H0, dH, gap_tol)
    if gap <= gap_tol:
        return STATUS_DEGENERATE
    v1 = _mirror_vector(v1c, flip)
    u = _mirror_vector(uc, flip)
    vpsi = _paired_dot(v1, psi)
    upsi = _paired_dot(u, psi)
    for i in range(dim):
        out[i] += scale * 1j * (u[i] * vpsi - v1[i] * upsi)
    return STATUS_OK


@njit(cache=True)
def _rhs(t, y, k, fparams, iparams, h, diag, dense_hi):
    freeze = fparams[F_FREEZE]
    if freeze >= 0.0:
        tau = freeze
    else:
        tau = min(max(t / fparams[F_TA], 0.0), 1.0)
    status, e_ref = apply_hamiltonian(y, k, tau, fparams, iparams, h, diag, dense_hi, -1j)
    return status, e_ref, tau


@njit(cache=True, inline="always")
def _abs2(z):
    return z.real * z.real + z.imag * z.imag


# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


@njit(cache=True, fastmath=True)
def _error_norm(y, ynew, k1, k3, k4, k5, k6, k7, hs, rtol, atol):
    """Max-norm of the embedded error estimate in units of atol + rtol |y|."""
    worst = 0.0
    for i in range(y.shape[0]):
        ei = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        sc = atol + rtol * math.sqrt(max(_abs2(y[i]), _abs2(ynew[i])))
        worst = max(worst, _abs2(ei) / (sc * sc))
    return math.sqrt(worst)


@njit(cache=True, fastmath=True)
def dopri5(psi0, t0, t1, fparams, iparams, h, diag, dense_hi, rtol, atol, max_step, min_step):
    """Propagate psi0 from t0 to t1 (either direction).

    Returns (psi, phase, steps, rejected, status, t_status, tau_status).  The
    returned state already includes the global phase removed by the reference
    energy shift.
    """
    n = psi0.shape[0]
    y = psi0.copy()
    ynew = np.empty(n, dtype=np.complex128)
    ys = np.empty(n, dtype=np.complex128)
    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty(n, dtype=np.complex128)
    k3 = np.empty(n, dtype=np.complex128)
    k4 = np.empty(n, dtype=np.complex128)
    k5 = np.empty(n, dtype=np.complex128)
    k6 = np.empty(n, dtype=np.complex128)
    k7 = np.empty(n, dtype=np.complex128)
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)
    phase = 0.0
    steps = 0
    rejected = 0
    if span == 0.0:
        return y, phase, steps, rejected, STATUS_OK, t0, 0.0

    t = t0
    status, e1, tau = _rhs(t, y, k1, fparams, iparams, h, diag, dense_hi)
    if status != STATUS_OK:
        return y, phase, steps, rejected, status, t, tau

    # initial step from the scale of the derivative
    fnorm = 0.0
    ynorm = 0.0
    for i in range(n):
        fnorm = max(fnorm, abs(k1[i]) / (atol + rtol * abs(y[i])))
        ynorm = max(ynorm, abs(y[i]) / (atol + rtol * abs(y[i])))
    step = 0.01 * ynorm / fnorm if fnorm > 0.0 else max_step
    step = min(step, max_step, span)
    step = max(step, min_step)

    while True:
        remaining = abs(t1 - t)
        if remaining <= 1e-15 * max(1.0, abs(t1)):
            break
        last = False
        if step >= remaining:
            step = remaining
            last = True
        hs = direction * step

        for i in range(n):
            ys[i] = y[i] + hs * A21 * k1[i]
        status, e2, tau = _rhs(t + C2 * hs, ys, k2, fparams, iparams, h, diag, dense_hi)
        if status != STATUS_OK:
            return y, phase, steps, rejected, status, t + C2 * hs, tau
        for i in range(n):
            ys[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i])
        status, e3, tau = _rhs(t + C3 * hs, ys, k3, fparams, iparams, h, diag, dense_hi)
        if status != STATUS_OK:
            return y, phase, steps, rejected, status, t + C3 * hs, tau
        for i in range(n):
            ys[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        status, e4, tau = _rhs(t + C4 * hs, ys, k4, fparams, iparams, h, diag, dense_hi)
        if status != STATUS_OK:
            return y, phase, steps, rejected, status, t + C4 * hs, tau
        for i in range(n):
            ys[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        status, e5, tau = _rhs(t + C5 * hs, ys, k5, fparams, iparams, h, diag, dense_hi)
        if status != STATUS_OK:
            return y, phase, steps, rejected, status, t + C5 * hs, tau
        for i in range(n):
            ys[i] = y[i] + hs * (
                A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]
            )
        status, e6, tau = _rhs(t + hs, ys, k6, fparams, iparams, h, diag, dense_hi)
        if status != STATUS_OK:
            return y, phase, steps, rejected, status, t + hs, tau
        for i in range(n):
            ynew[i] = y[i] + hs * (
                B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]
            )
        t_new = t1 if last else t + hs
        status, e7, tau = _rhs(t_new, ynew, k7, fparams, iparams, h, diag, dense_hi)
        if status != STATUS_OK:
            return y, phase, steps, rejected, status, t_new, tau

        err = _error_norm(y, ynew, k1, k3, k4, k5, k6, k7, hs, rtol, atol)

        if err <= 1.0:
            # same quadrature weights integrate the reference energy
            phase += hs * (B1 * e1 + B3 * e3 + B4 * e4 + B5 * e5 + B6 * e6)
            t = t_new
            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]
            e1 = e7
            steps += 1
            if last:
                break
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            step = min(step * fac, max_step)
        else:
            rejected += 1
            step = step * max(0.2, 0.9 * err ** -0.2)
            if step < min_step:
                return y, phase, steps, rejected, STATUS_UNDERFLOW, t, tau

    # undo the reference-energy phase: psi_true = exp(-i phase) psi_shifted
    rot = complex(math.cos(phase), -math.sin(phase))
    for i in range(n):
        y[i] = rot * y[i]
    return y, phase, steps, rejected, STATUS_OK, t, tau
