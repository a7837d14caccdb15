"""Classical ensemble simulation of the central spin model.

Each sample draws a bath configuration with independent Gaussian components
of variance 1/4 (the infinite-temperature second moment of a spin-1/2) and
integrates the precession equations

    ds0/dt = (B - h) x s0,      B = sum_i J_i S_i,
    dS_i/dt = J_i s0 x S_i,

with the same fourth-order Runge-Kutta stepper as the quantum engines.  The
central spin starts at (0, 0, 1/2) for every sample; the flow is linear in
s0, so fixing it instead of sampling it changes nothing but the variance.
The frozen mode keeps the bath static, which reproduces the closed-form
static-bath curve up to Monte Carlo error.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .couplings import CouplingSet
from .errors import ParameterError
from .series import TimeSeries

_CHUNK = 4096  # fixed accumulation chunk; keeps results thread-count independent


class ClassicalMode(enum.Enum):
    DYNAMIC = "dynamic"
    FROZEN = "frozen"


@dataclass
class ClassicalState:
    s0: np.ndarray
    bath: np.ndarray
    couplings: CouplingSet


@dataclass
class EnsembleConfig:
    samples: int
    seed: int = 0
    dt: float = 0.01
    t_max: float = 50.0
    stride: int = 10
    mode: ClassicalMode = ClassicalMode.DYNAMIC
    h_central: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.samples < 1:
            raise ParameterError("need at least one sample")
        self.h_central = np.asarray(self.h_central, dtype=float)


def sample_initial(cs: CouplingSet, rng: np.random.Generator) -> ClassicalState:
    """Draw one bath configuration; the central spin is fixed at (0,0,1/2)."""
    j = cs.require_couplings()
    bath = 0.5 * rng.standard_normal((len(j), 3))
    return ClassicalState(s0=np.array([0.0, 0.0, 0.5]), bath=bath, couplings=cs)


def classical_rhs(state: ClassicalState, h_central=np.zeros(3), frozen: bool = False):
    """Time derivatives (ds0, dbath) of the precession equations."""
    j = state.couplings.require_couplings()
    b = j @ state.bath
    ds0 = np.cross(b - h_central, state.s0)
    if frozen:
        dbath = np.zeros_like(state.bath)
    else:
        dbath = j[:, None] * np.cross(state.s0, state.bath)
    return ds0, dbath


@njit(cache=True, parallel=True)
def _evolve_chunk(bath0, jc, hx, hy, hz, dt, n_steps, stride, frozen, z_out, len_out):
    """Integrate one chunk of samples; records s0_z and the worst length drift."""
    n_samp, n_bath = bath0.shape[0], bath0.shape[1]
    n_out = n_steps // stride + 1
    for s in prange(n_samp):
        s0 = np.empty(3)
        s0[0] = 0.0
        s0[1] = 0.0
        s0[2] = 0.5
        bath = bath0[s].copy()
        k_b = np.empty((4, n_bath, 3))
        k_s = np.empty((4, 3))
        st_b = np.empty((n_bath, 3))
        st_s = np.empty(3)
        z_out[s, 0] = s0[2]
        len_out[s, 0] = 0.0
        worst = 0.0
        for step in range(1, n_steps + 1):
            for stage in range(4):
                if stage == 0:
                    cs0, cb = s0, bath
                else:
                    w = 0.5 * dt if stage < 3 else dt
                    for q in range(3):
                        st_s[q] = s0[q] + w * k_s[stage - 1, q]
                    if not frozen:
                        for i in range(n_bath):
                            for q in range(3):
                                st_b[i, q] = bath[i, q] + w * k_b[stage - 1, i, q]
                        cb = st_b
                    else:
                        cb = bath
                    cs0 = st_s
                bx = 0.0
                by = 0.0
                bz = 0.0
                for i in range(n_bath):
                    bx += jc[i] * cb[i, 0]
                    by += jc[i] * cb[i, 1]
                    bz += jc[i] * cb[i, 2]
                ex = bx - hx
                ey = by - hy
                ez = bz - hz
                k_s[stage, 0] = ey * cs0[2] - ez * cs0[1]
                k_s[stage, 1] = ez * cs0[0] - ex * cs0[2]
                k_s[stage, 2] = ex * cs0[1] - ey * cs0[0]
                if not frozen:
                    for i in range(n_bath):
                        k_b[stage, i, 0] = jc[i] * (cs0[1] * cb[i, 2] - cs0[2] * cb[i, 1])
                        k_b[stage, i, 1] = jc[i] * (cs0[2] * cb[i, 0] - cs0[0] * cb[i, 2])
                        k_b[stage, i, 2] = jc[i] * (cs0[0] * cb[i, 1] - cs0[1] * cb[i, 0])
            for q in range(3):
                s0[q] += dt / 6.0 * (k_s[0, q] + 2.0 * k_s[1, q] + 2.0 * k_s[2, q] + k_s[3, q])
            if not frozen:
                for i in range(n_bath):
                    for q in range(3):
                        bath[i, q] += dt / 6.0 * (
                            k_b[0, i, q] + 2.0 * k_b[1, i, q] + 2.0 * k_b[2, i, q] + k_b[3, i, q]
                        )
            if step % stride == 0:
                k = step // stride
                z_out[s, k] = s0[2]
                drift = abs(
                    2.0 * math.sqrt(s0[0] * s0[0] + s0[1] * s0[1] + s0[2] * s0[2]) - 1.0
                )
                if drift > worst:
                    worst = drift
                len_out[s, k] = worst
    return n_out


def simulate_autocorrelation(cfg: EnsembleConfig, cs: CouplingSet) -> TimeSeries:
    """Ensemble-averaged S(t) = <s0_z(0) s0_z(t)> with per-sample-time errors."""
    j = cs.require_couplings()
    n_steps = int(round(cfg.t_max / cfg.dt))
    n_out = n_steps // cfg.stride + 1
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    frozen = cfg.mode is ClassicalMode.FROZEN
    hx, hy, hz = cfg.h_central
    sum_z = np.zeros(n_out)
    sum_z2 = np.zeros(n_out)
    worst_len = np.zeros(n_out)
    done = 0
    while done < cfg.samples:
        n = min(_CHUNK, cfg.samples - done)
        bath0 = 0.5 * rng.standard_normal((n, len(j), 3))
        z_out = np.empty((n, n_out))
        len_out = np.empty((n, n_out))
        _evolve_chunk(
            bath0, j, hx, hy, hz, cfg.dt, n_steps, cfg.stride, frozen, z_out, len_out
        )
        sum_z += z_out.sum(axis=0)
        sum_z2 += (z_out * z_out).sum(axis=0)
        worst_len = np.maximum(worst_len, len_out.max(axis=0))
        done += n
    n = cfg.samples
    mean_z = sum_z / n
    # S = 0.5 * z; unbiased variance of the per-sample values 0.5 * z
    var_s = 0.25 * (sum_z2 / n - mean_z**2) * (n / max(n - 1, 1))
    stderr = np.sqrt(np.maximum(var_s, 0.0) / n)
    times = cfg.dt * cfg.stride * np.arange(n_out)
    return TimeSeries(
        times=times,
        values=0.5 * mean_z + 0j,
        norm_drift=worst_len,
        stderr=stderr,
        meta={"engine": "classical", "mode": cfg.mode.value, "samples": str(n)},
    )
