"""Fourth-order Runge-Kutta propagation of the operator ket.

The evolution solves d|psi>/dt = -i H |psi| from the seed ket |3; vacuum>
and samples the autocorrelation S(t) = 1/4 <seed|psi(t)> on a fixed output
grid.  The norm of the ket is tracked at every sample as an integration
diagnostic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericError, ParameterError
from .series import TimeSeries


@dataclass
class KetVector:
    amplitudes: np.ndarray

    def norm(self) -> float:
        return math.sqrt(kernels.sq_norm(self.amplitudes))


def seed_ket(dimension: int, seed_id: int, dtype=np.complex128) -> KetVector:
    amps = np.zeros(dimension, dtype=dtype)
    amps[seed_id] = 1.0
    return KetVector(amps)


def rk4_step(apply_h, psi, dt, stage, g, acc):
    """One classic RK4 step of d psi/dt = -i H psi; returns (psi', recycled).

    ``apply_h(x, out)`` must write H x into ``out``.  The three scratch
    arrays must match ``psi`` in shape and dtype; the returned pair reuses
    them, so callers just swap.
    """
    c6 = -1j * dt / 6.0
    c3 = -1j * dt / 3.0
    c2 = -1j * dt / 2.0
    flat_psi = psi.reshape(-1)
    flat_stage = stage.reshape(-1)
    flat_g = g.reshape(-1)
    flat_acc = acc.reshape(-1)
    apply_h(psi, g)
    kernels.stage_axpy(flat_acc, flat_psi, c6, flat_g)
    kernels.stage_axpy(flat_stage, flat_psi, c2, flat_g)
    apply_h(stage, g)
    kernels.accum_axpy(flat_acc, c3, flat_g)
    kernels.stage_axpy(flat_stage, flat_psi, c2, flat_g)
    apply_h(stage, g)
    kernels.accum_axpy(flat_acc, c3, flat_g)
    kernels.stage_axpy(flat_stage, flat_psi, -1j * dt, flat_g)
    apply_h(stage, g)
    kernels.accum_axpy(flat_acc, c6, flat_g)
    return acc, psi


def rk4_evolve(h, psi0, dt: float, t_max: float, stride: int, scale_hint: float | None = None):
    """Yield (t_k, psi) at t_k = k * stride * dt, starting with t = 0.

    ``h`` is anything with ``dimension`` and ``apply``; the yielded array is
    a live buffer, valid until the next iteration step.
    """
    if dt <= 0 or t_max <= 0 or stride < 1:
        raise ParameterError("dt, t_max must be positive and stride >= 1")
    if scale_hint is not None and dt * scale_hint > 0.5:
        warnings.warn(
            f"dt={dt} is coarse for the estimated dynamical scale {scale_hint:.3g}; "
            "expect integration error",
            stacklevel=2,
        )
    psi = psi0.amplitudes if isinstance(psi0, KetVector) else psi0
    psi = psi.copy()
    stage = np.empty_like(psi)
    g = np.empty_like(psi)
    acc = np.empty_like(psi)
    n_steps = int(round(t_max / dt))
    yield 0.0, psi
    apply_h = h.apply
    for step in range(1, n_steps + 1):
        psi, acc = rk4_step(apply_h, psi, dt, stage, g, acc)
        if step % stride == 0:
            if not np.isfinite(psi[0]) or not math.isfinite(kernels.sq_norm(psi)):
                raise NumericError(f"non-finite amplitudes at step {step} (t={step * dt:g})")
            yield step * dt, psi


def autocorrelation(run, seed_id: int, meta: dict | None = None) -> TimeSeries:
    """Collect S(t) = 1/4 <seed|psi(t)> and the norm drift from a trajectory."""
    times, values, drift = [], [], []
    for t, psi in run:
        times.append(t)
        values.append(0.25 * complex(psi[seed_id]))
        drift.append(abs(math.sqrt(kernels.sq_norm(psi)) - 1.0))
    return TimeSeries(
        times=np.array(times),
        values=np.array(values),
        norm_drift=np.array(drift),
        meta=meta or {},
    )


def detect_revival(series: TimeSeries, reference: TimeSeries, eps: float = 0.01):
    """First time where the two curves differ by more than ``eps``.

    Returns None when the threshold is never exceeded within the common
    range.  Both series must live on the same grid.
    """
    if len(series) != len(reference) or not np.allclose(
        series.times, reference.times, atol=1e-9, rtol=0.0
    ):
        raise ParameterError("series must share a common time grid")
    dev = np.abs(series.values - reference.values)
    idx = np.nonzero(dev > eps)[0]
    if len(idx) == 0:
        return None
    return float(series.times[idx[0]])
