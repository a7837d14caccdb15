"""Hot loops: matrix-free operator application and integrator helpers.

Everything here is numba-compiled and dtype-generic (complex128 for default
runs, complex64 for the large production bases).  The impurity-chain kernel
works in gather form, writing each output row exactly once, so the parallel
loop is race-free and bitwise deterministic for a fixed basis.

Basis ids factor as (impurity m, head-site state s0, inner index l) with the
inner index running over the product of the small tail sites.  Terms are
split into two categories at build time: category A acts as the identity on
the inner sites (head-site moves, field terms), so it reduces to contiguous
block axpys; category B moves inner-site bosons and carries a precomputed
(target, amplitude) map over the inner index.
"""

from __future__ import annotations

import numba
import numpy as np
from numba import njit, prange

SEL_COMMUTE = 0       # impurity factor K_flavor
SEL_ANTICOMMUTE = 1   # impurity factor M_flavor
SEL_IDENTITY = 2

S0_IDENTITY = 0
S0_LOWER = 1
S0_RAISE = 2
S0_LOWER_RAISE = 3


def set_threads_from_env(var: str = "CSMBATH_THREADS") -> None:
    import os

    val = os.environ.get(var)
    if val:
        numba.set_num_threads(max(1, int(val)))


@njit(inline="always")
def _resolve_site0(code, s0, f1, f2, low0_idx, low0_amp, rai0_idx, rai0_amp):
    """Head-site move: returns (target local state, amplitude); -1 if blocked."""
    if code == S0_IDENTITY:
        return s0, 1.0
    if code == S0_LOWER:
        return low0_idx[s0, f1], low0_amp[s0, f1]
    if code == S0_RAISE:
        return rai0_idx[s0, f1], rai0_amp[s0, f1]
    w = low0_idx[s0, f1]
    if w < 0:
        return -1, 0.0
    amp = low0_amp[s0, f1]
    s0p = rai0_idx[w, f2]
    return s0p, amp * rai0_amp[w, f2]


@njit(cache=True, parallel=True, fastmath=True)
def apply_impurity_chain(
    psi,
    out,
    inner_len,
    t0_dim,
    low0_idx,
    low0_amp,
    rai0_idx,
    rai0_amp,
    kpart,
    kval,
    mpart,
    mval,
    a_sel,
    a_flav,
    a_code,
    a_f1,
    a_f2,
    a_coeff,
    b_sel,
    b_flav,
    b_code,
    b_f1,
    b_f2,
    b_coeff,
    b_ptr,
    b_lout,
    b_lsrc,
    b_wamp,
):
    """out = H_eff @ psi over super-rows (m, s0) with inner blocks of inner_len.

    Category B inner maps arrive packed: entries b_ptr[t]..b_ptr[t+1] of the
    (b_lout, b_lsrc, b_wamp) arrays hold the valid inner transitions of term t.
    """
    n_super = 4 * t0_dim
    n_a = a_sel.shape[0]
    n_b = b_sel.shape[0]
    for u in prange(n_super):
        m = u // t0_dim
        s0 = u - m * t0_dim
        ob = u * inner_len
        for l in range(inner_len):
            out[ob + l] = 0.0
        for t in range(n_a):
            sel = a_sel[t]
            if sel == SEL_COMMUTE:
                mp = kpart[a_flav[t], m]
                if mp < 0:
                    continue
                c = a_coeff[t] * kval[a_flav[t], m]
            elif sel == SEL_ANTICOMMUTE:
                mp = mpart[a_flav[t], m]
                if mp < 0:
                    continue
                c = a_coeff[t] * mval[a_flav[t], m]
            else:
                mp = m
                c = a_coeff[t]
            s0p, f = _resolve_site0(
                a_code[t], s0, a_f1[t], a_f2[t], low0_idx, low0_amp, rai0_idx, rai0_amp
            )
            if s0p < 0:
                continue
            vb = (mp * t0_dim + s0p) * inner_len
            cf = c * f
            for l in range(inner_len):
                out[ob + l] += cf * psi[vb + l]
        for t in range(n_b):
            sel = b_sel[t]
            if sel == SEL_COMMUTE:
                mp = kpart[b_flav[t], m]
                if mp < 0:
                    continue
                c = b_coeff[t] * kval[b_flav[t], m]
            elif sel == SEL_ANTICOMMUTE:
                mp = mpart[b_flav[t], m]
                if mp < 0:
                    continue
                c = b_coeff[t] * mval[b_flav[t], m]
            else:
                mp = m
                c = b_coeff[t]
            s0p, f = _resolve_site0(
                b_code[t], s0, b_f1[t], b_f2[t], low0_idx, low0_amp, rai0_idx, rai0_amp
            )
            if s0p < 0:
                continue
            vb = (mp * t0_dim + s0p) * inner_len
            cf = c * f
            for e in range(b_ptr[t], b_ptr[t + 1]):
                out[ob + b_lout[e]] += cf * b_wamp[e] * psi[vb + b_lsrc[e]]


@njit(cache=True, parallel=True, fastmath=True)
def stage_axpy(out, x, c, y):
    """out = x + c * y, elementwise."""
    for i in prange(x.shape[0]):
        out[i] = x[i] + c * y[i]


@njit(cache=True, parallel=True, fastmath=True)
def accum_axpy(acc, c, y):
    """acc += c * y, elementwise."""
    for i in prange(acc.shape[0]):
        acc[i] += c * y[i]


@njit(cache=True, parallel=True, fastmath=True)
def sq_norm(x) -> float:
    total = 0.0
    for i in prange(x.shape[0]):
        v = x[i]
        total += v.real * v.real + v.imag * v.imag
    return total


@njit(cache=True, parallel=True)
def apply_star_hamiltonian(psi, out, diag, masks, halfj, flip_bit0, c_x, c_yu, c_yd):
    """Full central-spin-model action on bit-encoded states, batched columns.

    ``psi``/``out`` have shape (dim, ncols); bit 0 encodes the central spin.
    ``masks[i]`` is the xor mask of flip-flop pair i with amplitude
    ``halfj[i]``; the transverse field enters via bit-0 flips with amplitude
    c_x plus c_yu / c_yd on the up/down rows.
    """
    dim, ncols = psi.shape
    n = masks.shape[0]
    for s in prange(dim):
        b0 = s & 1
        for c in range(ncols):
            out[s, c] = diag[s] * psi[s, c]
        for i in range(n):
            mask = masks[i]
            # flip-flop only connects opposite central/bath spins
            if ((s >> np.int64(i + 1)) & 1) != b0:
                t = s ^ mask
                jv = halfj[i]
                for c in range(ncols):
                    out[s, c] += jv * psi[t, c]
        if flip_bit0:
            t = s ^ 1
            amp = c_x + (c_yu if b0 == 1 else c_yd)
            for c in range(ncols):
                out[s, c] += amp * psi[t, c]
