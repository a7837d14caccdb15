import math

import numpy as np
import pytest

from csmbath.couplings import (
    CoeffMode,
    LanczosChain,
    build_coupling_set,
    diagonalize_chain,
    lanczos_analytic,
    lanczos_exact,
)
from csmbath.errors import ParameterError
from csmbath.heff import (
    HamiltonianParams,
    MatrixFreeOperator,
    Representation,
    assemble_central,
    assemble_chain,
    assemble_nuclear_zeeman,
    assemble_total,
    assemble_zeeman,
    hermiticity_defect,
    impurity_matrices,
    spectral_radius_estimate,
)
from csmbath.opbasis import BasisState, TruncationSpec, enumerate_basis

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = [np.eye(2, dtype=complex), SX, SY, SZ]


def levi(a, b, c):
    return round((a - b) * (b - c) * (c - a) / 2)


def params_for(gamma=1 / 18, n=18, caps=(3, 2), **kw):
    cs = build_coupling_set(gamma, n)
    chain = lanczos_exact(cs, len(caps))
    return HamiltonianParams(chain=chain, trunc=TruncationSpec(caps), **kw)


class TestImpurityMatrices:
    def test_against_pauli_traces(self):
        # recompute the defining products directly: <n|M_k|m> and <n|K_k|m>
        im = impurity_matrices()
        for k in range(1, 4):
            for n in range(4):
                for m in range(4):
                    anti = 0.25 * np.trace(
                        PAULI[n].conj().T @ (PAULI[k] @ PAULI[m] + PAULI[m] @ PAULI[k])
                    )
                    comm = 0.25 * np.trace(
                        PAULI[n].conj().T @ (PAULI[k] @ PAULI[m] - PAULI[m] @ PAULI[k])
                    )
                    assert im.m_mats[k - 1, n, m] == pytest.approx(anti.real, abs=1e-15)
                    assert abs(anti.imag) < 1e-15
                    assert im.k_mats[k - 1, n, m] == pytest.approx(comm, abs=1e-15)

    def test_m_structure(self):
        im = impurity_matrices()
        for k in range(3):
            mk = im.m_mats[k]
            assert np.array_equal(mk, mk.T)
            assert np.sum(mk != 0) == 2
            assert mk[0, k + 1] == 1.0 and mk[k + 1, 0] == 1.0
        assert im.m_mats[0][2, 3] == 0.0

    def test_k_structure(self):
        im = impurity_matrices()
        for k in range(3):
            kk = im.k_mats[k]
            assert np.max(np.abs(kk - kk.conj().T)) < 1e-15
            assert np.all(kk[0, :] == 0) and np.all(kk[:, 0] == 0)
            assert np.all(np.diag(kk) == 0)
            nz = kk[kk != 0]
            assert np.allclose(np.abs(nz), 1.0)
            assert np.allclose(nz.real, 0.0)
        # sign convention of the defining product (not of the hard-coded table)
        assert im.k_mats[0][2, 3] == pytest.approx(-1j)
        # cyclic structure: K_k[n, m] = i * levi(n, k, m) on {1,2,3}
        for k in range(3):
            for n in range(1, 4):
                for m in range(1, 4):
                    assert im.k_mats[k][n, m] == pytest.approx(
                        1j * levi(n - 1, k, m - 1)
                    )


class TestCentralTerm:
    def test_one_boson_elements(self):
        # <m';1_a|H_CS|3;0> = 1/2 K_a[m',3]: only (a=x,m'=2) and (a=y,m'=1)
        params = params_for(caps=(2,))
        basis = enumerate_basis(params.trunc)
        h = assemble_central(params, basis).matrix.toarray()
        im = impurity_matrices()
        seed = basis.id_of(BasisState(3, (0, 0, 0)))
        for a in range(3):
            occ = [0, 0, 0]
            occ[a] = 1
            for mp in range(4):
                row = basis.id_of(BasisState(mp, tuple(occ)))
                assert h[row, seed] == pytest.approx(0.5 * im.k_mats[a][mp, 3])
        col = h[:, seed]
        assert np.count_nonzero(col) == 2
        assert h[basis.id_of(BasisState(2, (1, 0, 0))), seed] == pytest.approx(-0.5j)
        assert h[basis.id_of(BasisState(1, (0, 1, 0))), seed] == pytest.approx(0.5j)

    def test_identity_impurity_column_vanishes(self):
        params = params_for(caps=(2,))
        basis = enumerate_basis(params.trunc)
        h = assemble_central(params, basis).matrix.toarray()
        for ident in range(basis.size):
            if basis.state_of(ident).m == 0:
                assert np.all(h[:, ident] == 0)
                assert np.all(h[ident, :] == 0)

    def test_diagonal_representation_single_site_identical(self):
        params = params_for(caps=(3,))
        basis = enumerate_basis(params.trunc)
        a = assemble_central(params, basis).matrix
        params_d = params_for(
            caps=(3,),
            representation=Representation.DIAGONAL,
            eig=diagonalize_chain(params.chain),
        )
        b = assemble_central(params_d, basis).matrix
        assert abs(a - b).max() == 0.0


class TestChainTerm:
    def test_boson_number_conservation(self):
        params = params_for(caps=(3, 2))
        basis = enumerate_basis(params.trunc)
        h = assemble_chain(params, basis).matrix.tocoo()
        for r, c in zip(h.row, h.col):
            assert sum(basis.state_of(r).occ) == sum(basis.state_of(c).occ)

    def test_one_boson_block_formula(self):
        # <m';1_d|H_ch|m;1_a> = (i/2) alpha_1 levi(a,b,d) M_b[m',m]
        params = params_for(caps=(2,))
        basis = enumerate_basis(params.trunc)
        h = assemble_chain(params, basis).matrix.toarray()
        im = impurity_matrices()
        a1 = params.chain.alphas[0]
        for a in range(3):
            for d in range(3):
                occ_a, occ_d = [0, 0, 0], [0, 0, 0]
                occ_a[a], occ_d[d] = 1, 1
                for m in range(4):
                    for mp in range(4):
                        expect = 0.0j
                        for b in range(3):
                            expect += 0.5j * a1 * levi(a, b, d) * im.m_mats[b][mp, m]
                        got = h[
                            basis.id_of(BasisState(mp, tuple(occ_d))),
                            basis.id_of(BasisState(m, tuple(occ_a))),
                        ]
                        assert got == pytest.approx(expect, abs=1e-15)

    def test_hermitian(self):
        params = params_for(caps=(4, 3, 2))
        basis = enumerate_basis(params.trunc)
        assert hermiticity_defect(assemble_chain(params, basis)) < 1e-15

    def test_scale_separation(self):
        # chain entries carry the sqrt(gamma) coefficients, the head does not
        gamma = 1e-4
        chain = lanczos_analytic(gamma, 2)
        params = HamiltonianParams(chain=chain, trunc=TruncationSpec((2, 2)))
        basis = enumerate_basis(params.trunc)
        hch = np.abs(assemble_chain(params, basis).matrix.toarray()).max()
        hcs = np.abs(assemble_central(params, basis).matrix.toarray()).max()
        assert hch < 2.0 * math.sqrt(gamma)
        assert 0.4 < hcs < 0.8


class TestFieldTerms:
    def test_zeeman_blocks(self):
        params = params_for(caps=(2,), h_central=np.array([10.0, 0.0, 0.0]))
        basis = enumerate_basis(params.trunc)
        h = assemble_zeeman(params, basis).matrix.toarray()
        im = impurity_matrices()
        # every occupation block equals -10 K_1
        for occ in [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]:
            ids = [basis.id_of(BasisState(m, occ)) for m in range(4)]
            block = h[np.ix_(ids, ids)]
            assert np.allclose(block, -10.0 * im.k_mats[0])

    def test_zero_field_empty(self):
        params = params_for(caps=(2,))
        basis = enumerate_basis(params.trunc)
        assert assemble_zeeman(params, basis).nnz() == 0

    def test_z_field_support(self):
        params = params_for(caps=(2,), h_central=np.array([0.0, 0.0, 1.0]))
        basis = enumerate_basis(params.trunc)
        h = assemble_zeeman(params, basis).matrix.tocoo()
        for r, c, v in zip(h.row, h.col, h.data):
            assert {basis.state_of(r).m, basis.state_of(c).m} == {1, 2}
            assert abs(v) == pytest.approx(1.0)
            assert v.real == 0.0

    def test_nuclear_zeeman(self):
        z = 1 / 800
        params = params_for(
            caps=(2, 2), h_central=np.array([3.0, 0.0, 0.0]),
            enable_nuclear_zeeman=True, z_nuclear=z,
        )
        basis = enumerate_basis(params.trunc)
        op = assemble_nuclear_zeeman(params, basis)
        assert hermiticity_defect(op) < 1e-16
        h = op.matrix.toarray()
        # couples 1_y <-> 1_z one-boson states with magnitude z*h, impurity kept
        iy = basis.id_of(BasisState(0, (0, 1, 0, 0, 0, 0)))
        iz = basis.id_of(BasisState(0, (0, 0, 1, 0, 0, 0)))
        assert abs(h[iz, iy]) == pytest.approx(z * 3.0)
        coo = op.matrix.tocoo()
        for r, c in zip(coo.row, coo.col):
            assert basis.state_of(r).m == basis.state_of(c).m
            assert sum(basis.state_of(r).occ) == sum(basis.state_of(c).occ)

    def test_disabled_nuclear_raises(self):
        params = params_for(caps=(2,))
        basis = enumerate_basis(params.trunc)
        with pytest.raises(ParameterError):
            assemble_nuclear_zeeman(params, basis)

    def test_zero_z_factor_empty(self):
        params = params_for(
            caps=(2,), h_central=np.array([3.0, 0.0, 0.0]),
            enable_nuclear_zeeman=True, z_nuclear=0.0,
        )
        basis = enumerate_basis(params.trunc)
        assert assemble_nuclear_zeeman(params, basis).nnz() == 0


class TestTotalAndKernel:
    def test_total_is_sum_of_parts(self):
        params = params_for(
            caps=(3, 2), h_central=np.array([1.0, -0.5, 0.25]),
            enable_nuclear_zeeman=True,
        )
        basis = enumerate_basis(params.trunc)
        total = assemble_total(params, basis).matrix
        parts = (
            assemble_central(params, basis).matrix
            + assemble_chain(params, basis).matrix
            + assemble_zeeman(params, basis).matrix
            + assemble_nuclear_zeeman(params, basis).matrix
        )
        assert abs(total - parts).max() < 1e-15

    def test_central_only_params(self):
        params = params_for(caps=(3, 2), enable_chain=False)
        basis = enumerate_basis(params.trunc)
        total = assemble_total(params, basis).matrix
        central = assemble_central(params, basis).matrix
        assert abs(total - central).max() == 0.0

    @pytest.mark.parametrize(
        "caps,h,nuclear,rep",
        [
            ((4, 3, 2), (0, 0, 0), False, "chain"),
            ((3, 2), (1.5, -0.3, 0.7), True, "chain"),
            ((3, 3), (0, 0, 2.0), False, "diagonal"),
            ((5,), (0.5, 0.5, 0.5), True, "diagonal"),
        ],
    )
    def test_matrix_free_matches_assembled(self, caps, h, nuclear, rep):
        cs = build_coupling_set(0.25, 12)
        chain = lanczos_exact(cs, len(caps))
        params = HamiltonianParams(
            chain=chain,
            trunc=TruncationSpec(caps),
            eig=diagonalize_chain(chain) if rep == "diagonal" else None,
            h_central=np.array(h, dtype=float),
            enable_nuclear_zeeman=nuclear,
            representation=Representation(rep),
        )
        basis = enumerate_basis(params.trunc)
        dense = assemble_total(params, basis)
        op = MatrixFreeOperator(params, basis)
        rng = np.random.default_rng(3)
        x = rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size)
        assert np.abs(dense.apply(x) - op.apply(x)).max() < 1e-12
        y32 = op.apply(x.astype(np.complex64))
        assert y32.dtype == np.complex64
        assert np.abs(y32 - dense.apply(x)).max() < 2e-5

    def test_hermiticity_all_terms(self):
        params = params_for(
            caps=(4, 3, 2), h_central=np.array([0.7, 0.1, -0.4]),
            enable_nuclear_zeeman=True,
        )
        basis = enumerate_basis(params.trunc)
        for builder in (
            assemble_central,
            assemble_chain,
            assemble_zeeman,
            assemble_nuclear_zeeman,
            assemble_total,
        ):
            assert hermiticity_defect(builder(params, basis)) < 1e-14

    def test_spectral_radius_grows_like_sqrt_cap(self):
        rhos = []
        for cap in (25, 100):
            params = params_for(caps=(cap,), enable_chain=False)
            basis = enumerate_basis(params.trunc)
            rhos.append(spectral_radius_estimate(MatrixFreeOperator(params, basis)))
        assert rhos[1] / rhos[0] == pytest.approx(2.0, rel=0.15)

    def test_reachable_closure_matches_graph_search(self):
        from scipy.sparse.csgraph import breadth_first_order

        from csmbath.heff import reachable_ids, restrict_operator
        from csmbath.opbasis import seed_state

        params = params_for(caps=(3, 2), h_central=np.array([0.5, 0.0, 0.0]))
        basis = enumerate_basis(params.trunc)
        op = assemble_total(params, basis)
        seed = seed_state(basis)
        keep = reachable_ids(op, seed)
        # independent oracle: scipy graph search on the same pattern
        order = breadth_first_order(
            abs(op.matrix), seed, directed=False, return_predecessors=False
        )
        assert set(keep.tolist()) == set(order.tolist())
        sub, position = restrict_operator(op, keep)
        assert sub.dimension == len(keep)
        assert position[seed] >= 0

    def test_head_only_closure_drops_identity_impurity(self):
        from csmbath.heff import reachable_ids
        from csmbath.opbasis import seed_state

        params = params_for(caps=(4,), enable_chain=False)
        basis = enumerate_basis(params.trunc)
        keep = reachable_ids(assemble_central(params, basis), seed_state(basis))
        # the head term never populates the identity impurity index
        assert all(basis.state_of(int(i)).m != 0 for i in keep)
        assert len(keep) < basis.size

    def test_filtered_evolution_is_exact(self):
        from csmbath.heff import reachable_ids, restrict_operator
        from csmbath.opbasis import seed_state
        from csmbath.propagate import autocorrelation, rk4_evolve, seed_ket

        params = params_for(caps=(3, 2), h_central=np.array([0.0, 0.7, 0.0]))
        basis = enumerate_basis(params.trunc)
        op = assemble_total(params, basis)
        seed = seed_state(basis)
        full = autocorrelation(
            rk4_evolve(op, seed_ket(op.dimension, seed), 0.01, 2.0, 20), seed
        )
        keep = reachable_ids(op, seed)
        sub, position = restrict_operator(op, keep)
        seed_sub = int(position[seed])
        filt = autocorrelation(
            rk4_evolve(sub, seed_ket(sub.dimension, seed_sub), 0.01, 2.0, 20), seed_sub
        )
        assert np.abs(full.values - filt.values).max() < 1e-14

    def test_diagonal_needs_eigenbasis(self):
        cs = build_coupling_set(0.25, 12)
        chain = lanczos_exact(cs, 2)
        with pytest.raises(ParameterError):
            HamiltonianParams(
                chain=chain, trunc=TruncationSpec((2, 2)),
                representation=Representation.DIAGONAL,
            )

    def test_site_count_mismatch(self):
        cs = build_coupling_set(0.25, 12)
        with pytest.raises(ParameterError):
            HamiltonianParams(chain=lanczos_exact(cs, 2), trunc=TruncationSpec((2,)))
