"""Hot loops, each with a numba and a pure-numpy implementation.

The public wrappers take a ``backend`` argument ("numba" or "numpy"); the
default follows ``ENTSIM_DISABLE_NUMBA``. Both paths compute the same sums in
the same association order up to floating-point reassociation.
"""
from __future__ import annotations

from math import lgamma

import numpy as np

from ._accel import njit, resolve_backend


# -- Gaussian moment / Hermite tables --------------------------------------
#
# For the generating function exp(v^T A v / 2) = sum_k H_k v^k / k!, the
# coefficients obey H_{k+e_i} = sum_j A_ij k_j H_{k-e_j}. With a real covariance
# A this is the recursive form of the Isserlis pair-partition sum (H_k are the
# moments); with the complex kernel of a Gaussian state it yields Fock elements.

@njit
def _wick_table_numba(A, n0, n1, n2, n3):
    H = np.zeros((n0 + 1, n1 + 1, n2 + 1, n3 + 1), dtype=np.complex128)
    H[0, 0, 0, 0] = 1.0
    k = np.zeros(4, dtype=np.int64)
    for a in range(n0 + 1):
        for b in range(n1 + 1):
            for c in range(n2 + 1):
                for d in range(n3 + 1):
                    if a + b + c + d == 0:
                        continue
                    k[0] = a
                    k[1] = b
                    k[2] = c
                    k[3] = d
                    i = 0
                    while k[i] == 0:
                        i += 1
                    k[i] -= 1
                    val = 0.0 + 0.0j
                    for j in range(4):
                        if k[j] > 0 and A[i, j] != 0:
                            k[j] -= 1
                            val += A[i, j] * (k[j] + 1) * H[k[0], k[1], k[2], k[3]]
                            k[j] += 1
                    H[a, b, c, d] = val
    return H


def _wick_table_numpy(A, n0, n1, n2, n3):
    # Sweep by total degree so every lower-order entry is ready; vectorize over
    # all multi-indices of the current degree that share the leading index.
    shape = (n0 + 1, n1 + 1, n2 + 1, n3 + 1)
    H = np.zeros(shape, dtype=complex)
    H[0, 0, 0, 0] = 1.0
    grid = np.stack(np.meshgrid(*[np.arange(s) for s in shape], indexing="ij"), axis=-1).reshape(-1, 4)
    deg = grid.sum(axis=1)
    lead = np.argmax(grid > 0, axis=1)
    for total in range(1, int(deg.max()) + 1):
        sel = deg == total
        ks = grid[sel]
        ls = lead[sel]
        km = ks.copy()
        km[np.arange(len(ks)), ls] -= 1
        val = np.zeros(len(ks), dtype=complex)
        for j in range(4):
            ok = km[:, j] > 0
            if not np.any(ok):
                continue
            kk = km[ok].copy()
            kk[:, j] -= 1
            val[ok] += A[ls[ok], j] * km[ok, j] * H[kk[:, 0], kk[:, 1], kk[:, 2], kk[:, 3]]
        H[ks[:, 0], ks[:, 1], ks[:, 2], ks[:, 3]] = val
    return H


def wick_table(A, shape, backend=None) -> np.ndarray:
    """Coefficient table H[k] of exp(v^T A v / 2) for a 4x4 matrix A."""
    A = np.ascontiguousarray(A, dtype=complex)
    if A.shape != (4, 4):
        raise ValueError("wick_table expects a 4x4 matrix")
    n = [int(s) for s in shape]
    if resolve_backend(backend) == "numba":
        return _wick_table_numba(A, n[0], n[1], n[2], n[3])
    return _wick_table_numpy(A, *n)


# -- Gaussification recurrence ---------------------------------------------
#
# rho'_{abcd} = 2^{-(a+b+c+d)/2} sqrt(a! b! c! d!) sum f_{stnm} h_{a-s,b-t,c-n,d-m}
# with f = rho / sqrt(s! t! n! m!) and h the same for sigma times the sign
# (-1)^{index sum}. That is the M-coefficient recurrence written as a
# factorial-weighted 4D convolution.

def _scaled(rho, signed):
    n = rho.shape[0]
    lf = np.array([lgamma(k + 1) for k in range(n)])
    w = np.exp(-0.5 * (lf[:, None, None, None] + lf[None, :, None, None]
                       + lf[None, None, :, None] + lf[None, None, None, :]))
    out = rho * w
    if signed:
        s = (-1.0) ** np.arange(n)
        out = out * (s[:, None, None, None] * s[None, :, None, None]
                     * s[None, None, :, None] * s[None, None, None, :])
    return np.ascontiguousarray(out)


def _output_weight(n_out):
    k = np.arange(n_out + 1)
    lf = np.array([lgamma(x + 1) for x in k])
    one = 0.5 * lf - 0.5 * k * np.log(2.0)
    return np.exp(one[:, None, None, None] + one[None, :, None, None]
                  + one[None, None, :, None] + one[None, None, None, :])


@njit
def _conv_block_numba(f, h, n_out):
    nf = min(f.shape[0] - 1, n_out)
    nh = h.shape[0] - 1
    out = np.zeros((n_out + 1, n_out + 1, n_out + 1, n_out + 1), dtype=np.complex128)
    for s in range(nf + 1):
        for t in range(nf + 1):
            for u in range(nf + 1):
                for m in range(nf + 1):
                    fv = f[s, t, u, m]
                    if fv == 0:
                        continue
                    for a in range(min(nh, n_out - s) + 1):
                        for b in range(min(nh, n_out - t) + 1):
                            for c in range(min(nh, n_out - u) + 1):
                                for d in range(min(nh, n_out - m) + 1):
                                    out[s + a, t + b, u + c, m + d] += fv * h[a, b, c, d]
    return out


def _conv_block_numpy(f, h, n_out):
    nf = f.shape[0] - 1
    nh = h.shape[0] - 1
    out = np.zeros((n_out + 1,) * 4, dtype=complex)
    for idx in zip(*np.nonzero(f)):
        if max(idx) > n_out:
            continue
        hi = [min(nh, n_out - i) + 1 for i in idx]
        s, t, u, m = idx
        out[s:s + hi[0], t:t + hi[1], u:u + hi[2], m:m + hi[3]] += f[idx] * h[:hi[0], :hi[1], :hi[2], :hi[3]]
    del nf
    return out


@njit
def _conv_diag_numba(f, h, n_out):
    nf = f.shape[0] - 1
    nh = h.shape[0] - 1
    out = np.zeros((n_out + 1, n_out + 1), dtype=np.complex128)
    for a in range(n_out + 1):
        s0, s1 = max(0, a - nh), min(a, nf)
        for b in range(n_out + 1):
            t0, t1 = max(0, b - nh), min(b, nf)
            acc = 0.0 + 0.0j
            for s in range(s0, s1 + 1):
                for t in range(t0, t1 + 1):
                    for u in range(s0, s1 + 1):
                        for m in range(t0, t1 + 1):
                            acc += f[s, t, u, m] * h[a - s, b - t, a - u, b - m]
            out[a, b] = acc
    return out


def _conv_diag_numpy(f, h, n_out):
    nf = f.shape[0] - 1
    nh = h.shape[0] - 1
    out = np.zeros((n_out + 1, n_out + 1), dtype=complex)
    for a in range(n_out + 1):
        s = np.arange(max(0, a - nh), min(a, nf) + 1)
        for b in range(n_out + 1):
            t = np.arange(max(0, b - nh), min(b, nf) + 1)
            if len(s) == 0 or len(t) == 0:
                continue
            fs = f[np.ix_(s, t, s, t)]
            hs = h[np.ix_(a - s, b - t, a - s, b - t)]
            out[a, b] = np.sum(fs * hs)
    return out


def gaussify_block(rho, sigma, n_out, backend=None) -> np.ndarray:
    """Unnormalized output elements rho'_{abcd} for a, b, c, d <= n_out."""
    f = _scaled(rho, signed=False)
    h = _scaled(sigma, signed=True)
    if resolve_backend(backend) == "numba":
        raw = _conv_block_numba(f, h, n_out)
    else:
        raw = _conv_block_numpy(f, h, n_out)
    return raw * _output_weight(n_out)


def gaussify_diagonal(rho, sigma, n_out, backend=None) -> np.ndarray:
    """Unnormalized output diagonal rho'_{abab} for a, b <= n_out."""
    f = _scaled(rho, signed=False)
    h = _scaled(sigma, signed=True)
    if resolve_backend(backend) == "numba":
        raw = _conv_diag_numba(f, h, n_out)
    else:
        raw = _conv_diag_numpy(f, h, n_out)
    w = _output_weight(n_out)
    return raw * np.einsum("abab->ab", w)


# -- inefficient detectors --------------------------------------------------
#
# A no-click outcome with k photons missed in mode A2 and l in B2 contributes
#   rho'_{ABCD} += (1-eta)^{k+l} sum G_k[A,s] G_l[B,t] G_k[C,u] G_l[D,m]
#                  rho_{s,t,u,m} sigma_{A+k-s, B+l-t, C+k-u, D+l-m}
# where G_k[A,s] = <A, k| U_BS |s, A+k-s> for the real 50:50 splitter.

def splitter_amplitudes(n_in: int, k_max: int) -> np.ndarray:
    """G[k, A, s] for the real-antisymmetric 50:50 splitter.

    G[k, A, s] = 2^{-(A+k)/2} sqrt(A! k! / (s! p!)) sum_i C(s,i) C(p,k-i) (-1)^{p-k+i}
    with p = A + k - s, zero unless 0 <= s, p <= n_in.
    """
    from math import comb

    n_out = 2 * n_in
    G = np.zeros((k_max + 1, n_out + 1, n_in + 1))
    for k in range(k_max + 1):
        for A in range(n_out + 1):
            for s in range(n_in + 1):
                p = A + k - s
                if p < 0 or p > n_in:
                    continue
                acc = 0.0
                for i in range(max(0, k - p), min(s, k) + 1):
                    acc += comb(s, i) * comb(p, k - i) * (-1.0) ** (p - k + i)
                if acc == 0.0:
                    continue
                logw = 0.5 * (lgamma(A + 1) + lgamma(k + 1) - lgamma(s + 1) - lgamma(p + 1)) \
                    - 0.5 * (A + k) * np.log(2.0)
                G[k, A, s] = acc * np.exp(logw)
    return G


@njit
def _ineff_term_numba(rho, sigma, G, k, l, n_out, out, scale):
    n = rho.shape[0] - 1
    for A in range(n_out + 1):
        for C in range(n_out + 1):
            s0, s1 = max(0, A + k - n), min(A + k, n)
            u0, u1 = max(0, C + k - n), min(C + k, n)
            if s0 > s1 or u0 > u1:
                continue
            for B in range(n_out + 1):
                t0, t1 = max(0, B + l - n), min(B + l, n)
                if t0 > t1:
                    continue
                for D in range(n_out + 1):
                    m0, m1 = max(0, D + l - n), min(D + l, n)
                    if m0 > m1:
                        continue
                    acc = 0.0 + 0.0j
                    for s in range(s0, s1 + 1):
                        gs = G[k, A, s]
                        if gs == 0.0:
                            continue
                        for u in range(u0, u1 + 1):
                            gu = G[k, C, u]
                            if gu == 0.0:
                                continue
                            for t in range(t0, t1 + 1):
                                gt = G[l, B, t]
                                if gt == 0.0:
                                    continue
                                for m in range(m0, m1 + 1):
                                    gm = G[l, D, m]
                                    if gm == 0.0:
                                        continue
                                    acc += gs * gu * gt * gm * rho[s, t, u, m] * \
                                        sigma[A + k - s, B + l - t, C + k - u, D + l - m]
                    out[A, B, C, D] += scale * acc


def _ineff_term_numpy(rho, sigma, G, k, l, n_out, out, scale):
    n = rho.shape[0] - 1
    # Embed sigma so that index A+k-s can be taken for all (A, s) at once.
    Ga = G[k, :n_out + 1, :]          # [A, s]
    Gb = G[l, :n_out + 1, :]
    A = np.arange(n_out + 1)
    s = np.arange(n + 1)
    pa = A[:, None] + k - s[None, :]  # partner index for Alice
    pb = A[:, None] + l - s[None, :]
    va = (pa >= 0) & (pa <= n)
    vb = (pb >= 0) & (pb <= n)
    pa_c = np.clip(pa, 0, n)
    pb_c = np.clip(pb, 0, n)
    Ga = np.where(va, Ga, 0.0)
    Gb = np.where(vb, Gb, 0.0)
    # sig[A, s, B, t, C, u, D, m] is too large in general; contract in stages.
    for Ai in range(n_out + 1):
        for Ci in range(n_out + 1):
            wa = np.outer(Ga[Ai], Ga[Ci])  # [s, u]
            if not np.any(wa):
                continue
            # sub[s, t, u, m] for the partner rows pa[Ai, s], pa[Ci, u]
            sg = sigma[pa_c[Ai]][:, :, pa_c[Ci]]          # [s, q, u, r]
            for Bi in range(n_out + 1):
                for Di in range(n_out + 1):
                    wb = np.outer(Gb[Bi], Gb[Di])        # [t, m]
                    if not np.any(wb):
                        continue
                    sg2 = sg[:, pb_c[Bi]][:, :, :, pb_c[Di]]  # [s, t, u, m]
                    val = np.einsum("su,tm,stum,stum->", wa, wb, rho, sg2)
                    out[Ai, Bi, Ci, Di] += scale * val


def inefficient_block(rho, sigma, eta, n_out, tol=1e-12, backend=None):
    """Inefficient-detector recurrence summed over missed photon numbers k, l.

    Returns (block, dropped_bound) where ``dropped_bound`` bounds the weight of
    the (k, l) terms skipped by the ``tol`` criterion.
    """
    n = rho.shape[0] - 1
    k_max = 2 * n
    G = splitter_amplitudes(n, k_max)
    out = np.zeros((n_out + 1,) * 4, dtype=complex)
    big = max(np.max(np.abs(rho)), np.max(np.abs(sigma)), 1e-300)
    use_numba = resolve_backend(backend) == "numba"
    rho = np.ascontiguousarray(rho, dtype=complex)
    sigma = np.ascontiguousarray(sigma, dtype=complex)
    dropped = 0.0
    loss = 1.0 - eta
    for k in range(k_max + 1):
        for l in range(k_max + 1):
            w = 1.0 if k + l == 0 else loss ** (k + l)
            if w == 0.0:
                continue
            if (k + l > 0) and w * big * big < tol:
                dropped += w * big * big
                continue
            if use_numba:
                _ineff_term_numba(rho, sigma, G, k, l, n_out, out, w)
            else:
                _ineff_term_numpy(rho, sigma, G, k, l, n_out, out, w)
    return out, dropped


# -- trajectory propagation -------------------------------------------------

@njit
def _norm_curve_numba(U, a0, n_steps):
    d = a0.shape[0]
    out = np.empty(n_steps + 1)
    a = a0.copy()
    tmp = np.empty(d, dtype=np.complex128)
    s = 0.0
    for i in range(d):
        s += a[i].real ** 2 + a[i].imag ** 2
    out[0] = s
    for step in range(1, n_steps + 1):
        s = 0.0
        for i in range(d):
            acc = 0.0 + 0.0j
            for j in range(d):
                acc += U[i, j] * a[j]
            tmp[i] = acc
            s += acc.real ** 2 + acc.imag ** 2
        for i in range(d):
            a[i] = tmp[i]
        out[step] = s
    return out


def _norm_curve_numpy(U, a0, n_steps):
    out = np.empty(n_steps + 1)
    a = a0.copy()
    out[0] = np.vdot(a, a).real
    for step in range(1, n_steps + 1):
        a = U @ a
        out[step] = np.vdot(a, a).real
    return out


def norm_curve(U, a0, n_steps, backend=None) -> np.ndarray:
    """||U^k a0||^2 for k = 0..n_steps."""
    U = np.ascontiguousarray(U, dtype=complex)
    a0 = np.ascontiguousarray(a0, dtype=complex)
    if resolve_backend(backend) == "numba":
        return _norm_curve_numba(U, a0, int(n_steps))
    return _norm_curve_numpy(U, a0, int(n_steps))
