import math

import numpy as np
import pytest

from csmbath.couplings import CouplingSet, build_coupling_set
from csmbath.errors import CapacityError
from csmbath.exactqm import (
    build_full_hamiltonian,
    infinite_T_autocorrelation,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
SY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
SZ = np.array([[1, 0], [0, -1]], dtype=complex) / 2
ID = np.eye(2, dtype=complex)


def explicit_set(values):
    j = np.asarray(values, dtype=float)
    return CouplingSet(
        gamma=0.3, n_bath=len(j), prefactor=1.0, j_q=float(np.sqrt(np.sum(j * j))),
        n_eff=1.0, couplings=j,
    )


def kron_chain(ops):
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(op, out)
    return out


def dense_hamiltonian(j, h):
    """Independent construction: bit i of the state index is spin i.

    Local basis ordered (down, up) so that index bit 1 means spin up,
    matching the engine's encoding; S_y and S_z change sign under the swap.
    """
    n = len(j)
    dim = 2 ** (n + 1)
    ham = np.zeros((dim, dim), dtype=complex)
    spin = {"x": SX, "y": -SY, "z": -SZ}
    for i in range(n):
        for ax in "xyz":
            ops = [ID] * (n + 1)
            ops[0] = spin[ax]
            ops[i + 1] = spin[ax]
            ham += j[i] * kron_chain(ops)
    for hv, ax in zip(h, "xyz"):
        if hv:
            ops = [ID] * (n + 1)
            ops[0] = spin[ax]
            ham -= hv * kron_chain(ops)
    return ham


def op_dense(op):
    eye = np.eye(op.dimension, dtype=complex)
    return op.apply(eye.copy())


class TestHamiltonian:
    def test_two_spin_spectrum(self):
        op = build_full_hamiltonian(explicit_set([1.0]))
        evals = np.linalg.eigvalsh(op_dense(op))
        assert evals == pytest.approx([-0.75, 0.25, 0.25, 0.25])

    def test_matches_kron_construction(self):
        j = [0.8, 0.6]
        h = (0.3, -0.7, 0.45)
        op = build_full_hamiltonian(explicit_set(j), h=h)
        dense = dense_hamiltonian(j, h)
        assert np.abs(op_dense(op) - dense).max() < 1e-14

    def test_longitudinal_field_conserves_total_z(self):
        op = build_full_hamiltonian(explicit_set([0.8, 0.6]), h=(0, 0, 0.9))
        ham = op_dense(op)
        states = np.arange(op.dimension)
        ztot = np.array(
            [sum(((s >> k) & 1) - 0.5 for k in range(3)) for s in states]
        )
        comm = ham * (ztot[None, :] - ztot[:, None])
        assert np.abs(comm).max() < 1e-15

    def test_hermitian_with_transverse_field(self):
        op = build_full_hamiltonian(explicit_set([0.8, 0.6]), h=(0.5, 0.3, 0.0))
        ham = op_dense(op)
        assert np.abs(ham - ham.conj().T).max() < 1e-14

    def test_capacity_cap(self):
        cs = build_coupling_set(0.01, 25)
        with pytest.raises(CapacityError):
            build_full_hamiltonian(cs)


class TestAutocorrelation:
    def test_single_pair_closed_form(self):
        # singlet-triplet splitting J gives S(t) = 1/8 + 1/8 cos(J t)
        op = build_full_hamiltonian(explicit_set([1.0]))
        ts = infinite_T_autocorrelation(op, dt=0.005, t_max=10.0, stride=20, mode="full")
        expect = 0.125 + 0.125 * np.cos(ts.times)
        assert np.abs(ts.values.real - expect).max() < 1e-6
        assert np.abs(ts.values.imag).max() < 1e-12
        assert ts.values[0] == pytest.approx(0.25, abs=1e-14)

    def test_full_trace_against_spectral_sum(self):
        # independent oracle: exact eigen-decomposition of the dense matrix
        j = [0.9, math.sqrt(1 - 0.81)]
        op = build_full_hamiltonian(explicit_set(j))
        ham = dense_hamiltonian(j, (0, 0, 0))
        evals, vecs = np.linalg.eigh(ham)
        z0 = np.diag([(s & 1) - 0.5 for s in range(8)]).astype(complex)
        zrot = vecs.conj().T @ z0 @ vecs
        ts = infinite_T_autocorrelation(op, dt=0.002, t_max=4.0, stride=100, mode="full")
        for t, val in zip(ts.times, ts.values):
            # S(t) = (1/d) sum_ab exp(i (E_a - E_b) t) |<a|Z|b>|^2
            phase = np.exp(1j * (evals[:, None] - evals[None, :]) * t)
            exact = np.sum(phase * np.abs(zrot) ** 2) / 8.0
            assert val.real == pytest.approx(exact.real, abs=1e-8)
            assert abs(exact.imag) < 1e-12

    def test_stochastic_matches_full(self):
        cs = build_coupling_set(1 / 6, 6)
        op = build_full_hamiltonian(cs)
        full = infinite_T_autocorrelation(op, dt=0.02, t_max=8.0, stride=25, mode="full")
        sto = infinite_T_autocorrelation(
            op, dt=0.02, t_max=8.0, stride=25, mode="stochastic", n_vectors=200, seed=3
        )
        dev = np.abs(sto.values.real - full.values.real)
        assert np.all(dev[1:] <= 3.0 * sto.stderr[1:] + 1e-6)
        assert dev.max() < 0.01
        # infinite-temperature autocorrelation is real; the estimator noise is not
        assert np.all(np.abs(sto.values.imag[1:]) <= 3.0 * sto.stderr[1:] + 1e-6)

    def test_stochastic_initial_value_exact(self):
        cs = build_coupling_set(1 / 6, 6)
        op = build_full_hamiltonian(cs)
        sto = infinite_T_autocorrelation(
            op, dt=0.05, t_max=0.5, stride=10, mode="stochastic", n_vectors=5, seed=1
        )
        assert sto.values[0] == pytest.approx(0.25, abs=1e-12)
        assert sto.stderr[0] == pytest.approx(0.0, abs=1e-14)

    def test_stderr_scaling_with_vectors(self):
        cs = build_coupling_set(1 / 5, 5)
        op = build_full_hamiltonian(cs)
        errs = {}
        for r in (8, 32):
            ts = infinite_T_autocorrelation(
                op, dt=0.05, t_max=4.0, stride=20, mode="stochastic", n_vectors=r, seed=5
            )
            errs[r] = np.median(ts.stderr[1:])
        assert errs[8] / errs[32] == pytest.approx(2.0, rel=0.5)

    def test_norm_drift_tracked(self):
        cs = build_coupling_set(1 / 6, 6)
        op = build_full_hamiltonian(cs)
        ts = infinite_T_autocorrelation(op, dt=0.02, t_max=10.0, stride=50, mode="full")
        assert ts.norm_drift.max() < 1e-8
