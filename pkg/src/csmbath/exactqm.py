"""Exact quantum reference for small baths.

The full Hamiltonian H = sum_i J_i S_0 . S_i - h . S_0 acts on bit-encoded
product states (bit 0 is the central spin, bit i the i-th bath spin).  The
infinite-temperature autocorrelation

    S(t) = (1/d) Tr(e^{iHt} S_0^z e^{-iHt} S_0^z)

is evaluated either by an exhaustive sum over basis states (small d) or by
averaging over normalized random complex Gaussian vectors.  For each vector
the pair (e^{-iHt} |r>, e^{-iHt} S_0^z |r>) is propagated with the shared
Runge-Kutta stepper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .couplings import CouplingSet
from .errors import CapacityError, NumericError, ParameterError
from .propagate import rk4_step
from .series import TimeSeries

DEFAULT_MAX_SPINS = 20
FULL_TRACE_MAX_DIM = 2**14
DEFAULT_R_STOCHASTIC = 100
_COLUMN_BATCH = 128


@dataclass
class TraceEstimate:
    n_vectors: int
    values: np.ndarray
    stderr: np.ndarray


class FullHilbertOperator:
    """Matrix-free action of the star Hamiltonian on the 2^(N+1) space."""

    def __init__(self, cs: CouplingSet, h=(0.0, 0.0, 0.0), max_spins: int = DEFAULT_MAX_SPINS):
        j = cs.require_couplings()
        n = len(j)
        if n > max_spins:
            raise CapacityError(f"bath of {n} spins exceeds the cap of {max_spins}")
        self.n_spins = n + 1
        self.dimension = 1 << (n + 1)
        self.couplings = cs
        self.h = np.asarray(h, dtype=float)
        states = np.arange(self.dimension, dtype=np.int64)
        z0 = ((states & 1) - 0.5)
        diag = np.zeros(self.dimension)
        for i in range(n):
            zi = (((states >> (i + 1)) & 1) - 0.5)
            diag += j[i] * z0 * zi
        diag -= self.h[2] * z0
        self.diag = diag
        self.z_half = z0  # eigenvalues of S_0^z
        self.masks = np.array([(1 << (i + 1)) | 1 for i in range(n)], dtype=np.int64)
        self.halfj = 0.5 * j.astype(float)
        hx, hy = self.h[0], self.h[1]
        self.flip_bit0 = bool(hx != 0.0 or hy != 0.0)
        self.c_x = complex(-0.5 * hx)
        # <s|S_0^y|s^1> = +i/2 on bit0=0 rows, -i/2 on bit0=1 rows
        self.c_yd = complex(-hy * 0.5j)
        self.c_yu = complex(hy * 0.5j)

    def apply(self, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        squeeze = psi.ndim == 1
        mat = psi.reshape(self.dimension, -1)
        if out is None:
            out = np.empty_like(psi)
        kernels.apply_star_hamiltonian(
            mat,
            out.reshape(self.dimension, -1),
            self.diag,
            self.masks,
            self.halfj,
            self.flip_bit0,
            self.c_x,
            self.c_yu,
            self.c_yd,
        )
        return out if not squeeze or out.ndim == 1 else out.reshape(-1)

    def apply_s0z(self, psi: np.ndarray) -> np.ndarray:
        if psi.ndim == 1:
            return self.z_half * psi
        return self.z_half[:, None] * psi


def build_full_hamiltonian(cs: CouplingSet, h=(0.0, 0.0, 0.0), max_spins: int = DEFAULT_MAX_SPINS) -> FullHilbertOperator:
    return FullHilbertOperator(cs, h, max_spins)


def _propagate_columns(op, cols, dt, n_steps, stride, collect):
    """March a block of columns, invoking collect(k) at each sample index."""
    stage = np.empty_like(cols)
    g = np.empty_like(cols)
    acc = np.empty_like(cols)
    collect(0, cols)
    psi = cols
    for step in range(1, n_steps + 1):
        psi, acc = rk4_step(op.apply, psi, dt, stage, g, acc)
        if step % stride == 0:
            if not np.isfinite(psi[0, 0]):
                raise NumericError(f"non-finite amplitudes at step {step}")
            collect(step // stride, psi)
    return psi


def infinite_T_autocorrelation(
    op: FullHilbertOperator,
    dt: float,
    t_max: float,
    stride: int = 10,
    n_vectors: int | None = None,
    seed: int = 0,
    mode: str = "auto",
    dtype=np.complex128,
) -> TimeSeries:
    """Infinite-temperature S(t) by full trace or stochastic estimation.

    mode "auto" picks the exhaustive basis sum when the space is small
    enough and the random-vector average otherwise.
    """
    if mode not in ("auto", "full", "stochastic"):
        raise ParameterError(f"unknown trace mode {mode}")
    if mode == "auto":
        mode = "full" if op.dimension <= FULL_TRACE_MAX_DIM else "stochastic"
    n_steps = int(round(t_max / dt))
    if n_steps < 1 or stride < 1:
        raise ParameterError("bad time grid")
    n_out = n_steps // stride + 1
    times = dt * stride * np.arange(n_out)
    d = op.dimension
    zh = op.z_half

    if mode == "full":
        total = np.zeros(n_out, dtype=complex)
        drift = np.zeros(n_out)
        norm0 = None
        for start in range(0, d, _COLUMN_BATCH):
            width = min(_COLUMN_BATCH, d - start)
            cols = np.zeros((d, width), dtype=dtype)
            cols[start + np.arange(width), np.arange(width)] = 1.0

            def collect(k, psi, start=start, width=width):
                zsign = 2.0 * zh[start : start + width]  # +-1
                total[k] += np.einsum("s,sc,sc,c->", zh, psi.conj(), psi, zsign)
                norms = np.sqrt(np.einsum("sc,sc->c", psi.real, psi.real)
                                + np.einsum("sc,sc->c", psi.imag, psi.imag))
                drift[k] = max(drift[k], float(np.abs(norms - 1.0).max()))

            _propagate_columns(op, cols, dt, n_steps, stride, collect)
        values = 0.5 * total / d  # one factor 1/2 folded into zsign
        return TimeSeries(
            times=times,
            values=values,
            norm_drift=drift,
            stderr=np.zeros(n_out),
            meta={"engine": "exact", "trace_mode": "full", "dimension": str(d)},
        )

    r = DEFAULT_R_STOCHASTIC if n_vectors is None else int(n_vectors)
    if r < 1:
        raise ParameterError("need at least one random vector")
    per_vec = np.zeros((r, n_out), dtype=complex)
    drift = np.zeros(n_out)
    seq = np.random.SeedSequence(seed)
    children = seq.spawn(r)
    batch = max(1, _COLUMN_BATCH // 2)
    for start in range(0, r, batch):
        width = min(batch, r - start)
        cols = np.empty((d, 2 * width), dtype=dtype)
        for v in range(width):
            rng = np.random.Generator(np.random.Philox(children[start + v]))
            vec = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            vec /= np.linalg.norm(vec)
            cols[:, 2 * v] = vec
            cols[:, 2 * v + 1] = zh * vec

        def collect(k, psi, start=start, width=width):
            phi = psi[:, 0::2]
            zpsi = psi[:, 1::2]
            vals = np.einsum("s,sc,sc->c", zh, phi.conj(), zpsi)
            per_vec[start : start + width, k] = vals
            norms2 = np.einsum("sc,sc->c", psi.real, psi.real) + np.einsum(
                "sc,sc->c", psi.imag, psi.imag
            )
            # reference norms: 1 for e^{-iHt} r, exactly 1/4 for e^{-iHt} z r
            ref = np.empty(2 * width)
            ref[0::2] = 1.0
            ref[1::2] = 0.25
            drift[k] = max(drift[k], float(np.abs(np.sqrt(norms2 / ref) - 1.0).max()))

        _propagate_columns(op, cols, dt, n_steps, stride, collect)
    est = trace_estimate(per_vec)
    return TimeSeries(
        times=times,
        values=est.values,
        norm_drift=drift,
        stderr=est.stderr,
        meta={
            "engine": "exact",
            "trace_mode": "stochastic",
            "dimension": str(d),
            "n_vectors": str(est.n_vectors),
        },
    )


def trace_estimate(per_vector: np.ndarray) -> TraceEstimate:
    """Mean and standard error over the random-vector axis."""
    r = per_vector.shape[0]
    values = per_vector.mean(axis=0)
    if r > 1:
        var = per_vector.real.var(axis=0, ddof=1) + per_vector.imag.var(axis=0, ddof=1)
        stderr = np.sqrt(var / r)
    else:
        stderr = np.full(per_vector.shape[1], np.nan)
    return TraceEstimate(n_vectors=r, values=values, stderr=stderr)
