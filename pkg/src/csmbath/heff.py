"""Effective Hamiltonian on the impurity-times-boson basis.

Terms:
  central   1/2 sum_a K_a (a_{1,a} + adag_{1,a})   (head of the chain; in the
            diagonalized representation the head couples to every mode with
            the eigenvector head weights)
  chain     (i/2) sum eps_{a b d} M_b T_{jk} adag_{j,d} a_{k,a} with T the
            symmetric chain matrix (tridiagonal, or diagonal after the
            orthogonal mode mixing)
  zeeman    -sum_b h_b K_b
  nuclear   -i z sum eps_{a b d} h_b adag_{j,d} a_{j,a}

The anticommutation/commutation matrices M_k and K_k are generated from the
Pauli algebra through the normalized trace product rather than hard-coded;
K follows the sign convention of the defining scalar product.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import kernels
from .couplings import ChainEigenbasis, LanczosChain
from .errors import ParameterError
from .opbasis import Basis, TruncationSpec, site_tables

DEFAULT_Z_NUCLEAR = 1.0 / 800.0


class Representation(enum.Enum):
    CHAIN = "chain"
    DIAGONAL = "diagonal"


_PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


def _levi(a: int, b: int, c: int) -> int:
    return round((a - b) * (b - c) * (c - a) / 2)


@dataclass(frozen=True)
class ImpurityMatrices:
    """4x4 anticommutation (M) and commutation (K) matrices, one per flavor."""

    m_mats: np.ndarray  # (3, 4, 4) real
    k_mats: np.ndarray  # (3, 4, 4) complex


@lru_cache(maxsize=1)
def impurity_matrices() -> ImpurityMatrices:
    def trace_product(a, b):
        return np.trace(a.conj().T @ b) / 2.0

    m_mats = np.zeros((3, 4, 4))
    k_mats = np.zeros((3, 4, 4), dtype=complex)
    for k in range(1, 4):
        for n in range(4):
            for m in range(4):
                anti = _PAULI[k] @ _PAULI[m] + _PAULI[m] @ _PAULI[k]
                comm = _PAULI[k] @ _PAULI[m] - _PAULI[m] @ _PAULI[k]
                m_mats[k - 1, n, m] = (0.5 * trace_product(_PAULI[n], anti)).real
                k_mats[k - 1, n, m] = 0.5 * trace_product(_PAULI[n], comm)
    return ImpurityMatrices(m_mats=m_mats, k_mats=k_mats)


@dataclass
class HamiltonianParams:
    """Everything needed to assemble the effective Hamiltonian on a basis."""

    chain: LanczosChain
    trunc: TruncationSpec
    eig: ChainEigenbasis | None = None
    h_central: np.ndarray = field(default_factory=lambda: np.zeros(3))
    z_nuclear: float = DEFAULT_Z_NUCLEAR
    enable_nuclear_zeeman: bool = False
    enable_central: bool = True
    enable_chain: bool = True
    representation: Representation = Representation.CHAIN

    def __post_init__(self):
        self.h_central = np.asarray(self.h_central, dtype=float)
        if self.h_central.shape != (3,):
            raise ParameterError("h_central must be a 3-vector")
        if self.trunc.n_tr != self.chain.n_tr:
            raise ParameterError(
                f"truncation has {self.trunc.n_tr} sites but the chain has {self.chain.n_tr}"
            )
        if self.representation is Representation.DIAGONAL and self.eig is None:
            raise ParameterError("diagonal representation needs the chain eigenbasis")


class _Tables:
    """Flat numeric tables consumed by both the assembler and the kernel."""

    def __init__(self, params: HamiltonianParams):
        imp = impurity_matrices()
        n_tr = params.trunc.n_tr
        # unique-partner form of K and M: per (flavor, row) the column index
        self.kpart = np.full((3, 4), -1, dtype=np.int64)
        self.kval = np.zeros((3, 4), dtype=complex)
        self.mpart = np.full((3, 4), -1, dtype=np.int64)
        self.mval = np.zeros((3, 4))
        for b in range(3):
            for row in range(4):
                cols = np.nonzero(imp.k_mats[b, row])[0]
                if len(cols):
                    self.kpart[b, row] = cols[0]
                    self.kval[b, row] = imp.k_mats[b, row, cols[0]]
                cols = np.nonzero(imp.m_mats[b, row])[0]
                if len(cols):
                    self.mpart[b, row] = cols[0]
                    self.mval[b, row] = imp.m_mats[b, row, cols[0]]
        # Levi-Civita pairs (alpha, delta, sign) for each beta
        self.pair_tab = np.zeros((3, 2, 3), dtype=np.int64)
        for b in range(3):
            p = 0
            for a in range(3):
                for d in range(3):
                    sg = _levi(a, b, d)
                    if sg != 0:
                        self.pair_tab[b, p] = (a, d, sg)
                        p += 1
        # head weights and chain matrix entries per representation
        if params.representation is Representation.CHAIN:
            head = np.zeros(n_tr)
            head[0] = 1.0
            tmat = params.chain.tridiagonal()
        else:
            head = np.asarray(params.eig.head_weights, dtype=float)
            tmat = np.diag(params.eig.energies)
        if params.enable_central:
            sites = np.nonzero(head)[0].astype(np.int64)
            self.head_sites = sites
            self.head_w = head[sites]
        else:
            self.head_sites = np.zeros(0, dtype=np.int64)
            self.head_w = np.zeros(0)
        if params.enable_chain:
            jj, kk = np.nonzero(tmat)
            self.cterm_sites = np.stack([jj, kk], axis=1).astype(np.int64)
            self.cterm_val = tmat[jj, kk]
        else:
            self.cterm_sites = np.zeros((0, 2), dtype=np.int64)
            self.cterm_val = np.zeros(0)
        self.hvec = params.h_central.copy()
        if params.enable_nuclear_zeeman:
            self.nz_coeff = params.z_nuclear * params.h_central
        else:
            self.nz_coeff = np.zeros(3)


def _basis_layout(basis: Basis):
    """Concatenated per-site move tables plus offsets into them."""
    offs = np.zeros(basis.n_tr, dtype=np.int64)
    low_idx, low_amp, rai_idx, rai_amp = [], [], [], []
    pos = 0
    for j, cap in enumerate(basis.trunc.n_max):
        offs[j] = pos
        _, li, la, ri, ra = site_tables(cap)
        low_idx.append(li)
        low_amp.append(la)
        rai_idx.append(ri)
        rai_amp.append(ra)
        pos += li.shape[0]
    return (
        offs,
        np.concatenate(low_idx),
        np.concatenate(low_amp),
        np.concatenate(rai_idx),
        np.concatenate(rai_amp),
    )


@dataclass
class SparseOperator:
    """Row-compressed complex operator over a basis."""

    dimension: int
    matrix: sp.csr_matrix

    def apply(self, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        res = self.matrix.dot(psi)
        if out is not None:
            out[:] = res
            return out
        return res

    def nnz(self) -> int:
        return self.matrix.nnz


class _KernelTerms:
    """Term tables in the (impurity, head site, inner block) factorization.

    Category A terms act as the identity on the inner sites; category B
    terms carry a precomputed (target, amplitude) map over the inner index.
    """

    def __init__(self, params: HamiltonianParams, basis: Basis):
        t = _Tables(params)
        self.kpart, self.kval = t.kpart, t.kval
        self.mpart, self.mval = t.mpart, t.mval
        _, self.low0_idx, self.low0_amp, self.rai0_idx, self.rai0_amp = site_tables(
            basis.trunc.n_max[0]
        )
        self.t0_dim = int(basis.site_dims[0])
        self.inner_len = basis.impurity_stride // self.t0_dim
        self._inner_strides = basis.site_strides[1:]
        self._inner_caps = basis.trunc.n_max[1:]
        cat_a: list = []
        cat_b: list = []

        def add(sel, flav, code, f1, f2, coeff, moves=None):
            if moves is None:
                cat_a.append((sel, flav, code, f1, f2, coeff))
                return
            tgt, amp = self._inner_map(moves)
            if np.any(tgt >= 0):
                cat_b.append((sel, flav, code, f1, f2, coeff, tgt, amp))

        for hs, j in enumerate(t.head_sites):
            w = 0.5 * t.head_w[hs]
            for a in range(3):
                if j == 0:
                    add(kernels.SEL_COMMUTE, a, kernels.S0_LOWER, a, 0, w)
                    add(kernels.SEL_COMMUTE, a, kernels.S0_RAISE, a, 0, w)
                else:
                    add(kernels.SEL_COMMUTE, a, kernels.S0_IDENTITY, 0, 0, w,
                        moves=[(j, a, "lower")])
                    add(kernels.SEL_COMMUTE, a, kernels.S0_IDENTITY, 0, 0, w,
                        moves=[(j, a, "raise")])
        for b in range(3):
            if t.hvec[b] != 0.0:
                add(kernels.SEL_COMMUTE, b, kernels.S0_IDENTITY, 0, 0, -t.hvec[b])
        for ct in range(len(t.cterm_val)):
            j, k = (int(v) for v in t.cterm_sites[ct])
            tv = t.cterm_val[ct]
            for b in range(3):
                for p in range(2):
                    a, d, sg = (int(v) for v in t.pair_tab[b, p])
                    coeff = 0.5j * tv * sg
                    if j == 0 and k == 0:
                        add(kernels.SEL_ANTICOMMUTE, b, kernels.S0_LOWER_RAISE, d, a, coeff)
                    elif j == 0:
                        add(kernels.SEL_ANTICOMMUTE, b, kernels.S0_LOWER, d, 0, coeff,
                            moves=[(k, a, "raise")])
                    elif k == 0:
                        add(kernels.SEL_ANTICOMMUTE, b, kernels.S0_RAISE, a, 0, coeff,
                            moves=[(j, d, "lower")])
                    else:
                        add(kernels.SEL_ANTICOMMUTE, b, kernels.S0_IDENTITY, 0, 0, coeff,
                            moves=[(j, d, "lower"), (k, a, "raise")])
        for b in range(3):
            if t.nz_coeff[b] != 0.0:
                for p in range(2):
                    a, d, sg = (int(v) for v in t.pair_tab[b, p])
                    coeff = -1j * t.nz_coeff[b] * sg
                    for j in range(basis.n_tr):
                        if j == 0:
                            add(kernels.SEL_IDENTITY, 0, kernels.S0_LOWER_RAISE, d, a, coeff)
                        else:
                            add(kernels.SEL_IDENTITY, 0, kernels.S0_IDENTITY, 0, 0, coeff,
                                moves=[(j, d, "lower"), (j, a, "raise")])

        def pack(rows):
            return {
                "sel": np.array([r[0] for r in rows], dtype=np.int8),
                "flav": np.array([r[1] for r in rows], dtype=np.int8),
                "code": np.array([r[2] for r in rows], dtype=np.int8),
                "f1": np.array([r[3] for r in rows], dtype=np.int8),
                "f2": np.array([r[4] for r in rows], dtype=np.int8),
                "coeff": np.array([r[5] for r in rows], dtype=complex),
            }

        self.cat_a = pack(cat_a)
        self.cat_b = pack(cat_b)
        # pack the inner maps: only valid transitions, term t owning the
        # slice b_ptr[t]:b_ptr[t+1]
        ptr = [0]
        louts, lsrcs, wamps = [], [], []
        for row in cat_b:
            tgt, amp = row[6], row[7]
            valid = np.nonzero(tgt >= 0)[0]
            louts.append(valid.astype(np.int64))
            lsrcs.append(tgt[valid])
            wamps.append(amp[valid])
            ptr.append(ptr[-1] + len(valid))
        self.cat_b["ptr"] = np.array(ptr, dtype=np.int64)
        self.cat_b["lout"] = (
            np.concatenate(louts) if louts else np.zeros(0, dtype=np.int64)
        )
        self.cat_b["lsrc"] = (
            np.concatenate(lsrcs) if lsrcs else np.zeros(0, dtype=np.int64)
        )
        self.cat_b["wamp"] = np.concatenate(wamps) if wamps else np.zeros(0)

    def _inner_map(self, moves):
        """Compose boson moves on the tail sites into an inner-index map."""
        length = int(self.inner_len)
        tgt = np.full(length, -1, dtype=np.int64)
        amp = np.zeros(length)
        n_inner = len(self._inner_caps)
        tables = [site_tables(c) for c in self._inner_caps]
        for l in range(length):
            locs = []
            r = l
            for j in range(n_inner):
                q, r = divmod(r, int(self._inner_strides[j]))
                locs.append(q)
            a = 1.0
            ok = True
            for site, flavor, kind in moves:
                tab = tables[site - 1]
                idx_tab, amp_tab = (tab[1], tab[2]) if kind == "lower" else (tab[3], tab[4])
                new = idx_tab[locs[site - 1], flavor]
                if new < 0:
                    ok = False
                    break
                a *= amp_tab[locs[site - 1], flavor]
                locs[site - 1] = new
            if ok:
                tgt[l] = sum(int(self._inner_strides[j]) * locs[j] for j in range(n_inner))
                amp[l] = a
        return tgt, amp


class MatrixFreeOperator:
    """Kernel-backed operator for bases too large to store explicitly."""

    def __init__(self, params: HamiltonianParams, basis: Basis):
        self.dimension = basis.size
        self._k = _KernelTerms(params, basis)
        self._by_dtype = {}

    def _tables(self, dtype):
        """Numeric tables cast to the working precision of the state vector."""
        if dtype in self._by_dtype:
            return self._by_dtype[dtype]
        k = self._k
        if dtype == np.complex64:
            cdt, fdt = np.complex64, np.float32
        else:
            cdt, fdt = np.complex128, np.float64
        tabs = (
            np.int64(k.inner_len),
            np.int64(k.t0_dim),
            k.low0_idx,
            k.low0_amp.astype(fdt),
            k.rai0_idx,
            k.rai0_amp.astype(fdt),
            k.kpart,
            k.kval.astype(cdt),
            k.mpart,
            k.mval.astype(fdt),
            k.cat_a["sel"],
            k.cat_a["flav"],
            k.cat_a["code"],
            k.cat_a["f1"],
            k.cat_a["f2"],
            k.cat_a["coeff"].astype(cdt),
            k.cat_b["sel"],
            k.cat_b["flav"],
            k.cat_b["code"],
            k.cat_b["f1"],
            k.cat_b["f2"],
            k.cat_b["coeff"].astype(cdt),
            k.cat_b["ptr"],
            k.cat_b["lout"],
            k.cat_b["lsrc"],
            k.cat_b["wamp"].astype(fdt),
        )
        self._by_dtype[dtype] = tabs
        return tabs

    def apply(self, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.empty_like(psi)
        kernels.apply_impurity_chain(psi, out, *self._tables(psi.dtype))
        return out


def _assemble(params: HamiltonianParams, basis: Basis, include) -> SparseOperator:
    """Explicit COO assembly; intended for bases small enough to store.

    ``include`` selects term families: subset of {"central", "chain",
    "zeeman", "nuclear"}.
    """
    t = _Tables(params)
    offs, low_idx, low_amp, rai_idx, rai_amp = _basis_layout(basis)
    strides = basis.site_strides
    imp_stride = basis.impurity_stride
    dim = basis.size
    n_tr = basis.n_tr
    rows, cols, vals = [], [], []

    def emit(i, col, val):
        rows.append(i)
        cols.append(col)
        vals.append(val)

    for i in range(dim):
        m, rest = divmod(i, imp_stride)
        base = rest
        s_loc = []
        r = rest
        for j in range(n_tr):
            q, r = divmod(r, int(strides[j]))
            s_loc.append(q)
        if "central" in include:
            for a in range(3):
                mp = t.kpart[a, m]
                if mp < 0:
                    continue
                kv = 0.5 * t.kval[a, m]
                for hs, j in enumerate(t.head_sites):
                    w = t.head_w[hs]
                    row = offs[j] + s_loc[j]
                    lo = low_idx[row, a]
                    if lo >= 0:
                        emit(i, mp * imp_stride + base + (lo - s_loc[j]) * strides[j], kv * w * low_amp[row, a])
                    hi = rai_idx[row, a]
                    if hi >= 0:
                        emit(i, mp * imp_stride + base + (hi - s_loc[j]) * strides[j], kv * w * rai_amp[row, a])
        if "zeeman" in include:
            for b in range(3):
                if t.hvec[b] != 0.0:
                    mp = t.kpart[b, m]
                    if mp >= 0:
                        emit(i, mp * imp_stride + base, -t.hvec[b] * t.kval[b, m])
        if "chain" in include:
            for ct in range(len(t.cterm_val)):
                j, k = t.cterm_sites[ct]
                tv = t.cterm_val[ct]
                row_j = offs[j] + s_loc[j]
                for b in range(3):
                    mp = t.mpart[b, m]
                    if mp < 0:
                        continue
                    coeff = 0.5j * tv * t.mval[b, m]
                    for p in range(2):
                        a, d, sg = t.pair_tab[b, p]
                        lo = low_idx[row_j, d]
                        if lo < 0:
                            continue
                        amp = low_amp[row_j, d]
                        if k == j:
                            hi = rai_idx[offs[j] + lo, a]
                            if hi < 0:
                                continue
                            col = mp * imp_stride + base + (hi - s_loc[j]) * strides[j]
                            amp *= rai_amp[offs[j] + lo, a]
                        else:
                            hi = rai_idx[offs[k] + s_loc[k], a]
                            if hi < 0:
                                continue
                            col = (
                                mp * imp_stride
                                + base
                                + (lo - s_loc[j]) * strides[j]
                                + (hi - s_loc[k]) * strides[k]
                            )
                            amp *= rai_amp[offs[k] + s_loc[k], a]
                        emit(i, col, coeff * sg * amp)
        if "nuclear" in include:
            for b in range(3):
                if t.nz_coeff[b] != 0.0:
                    coeff = -1j * t.nz_coeff[b]
                    for p in range(2):
                        a, d, sg = t.pair_tab[b, p]
                        for j in range(n_tr):
                            row_j = offs[j] + s_loc[j]
                            lo = low_idx[row_j, d]
                            if lo < 0:
                                continue
                            hi = rai_idx[offs[j] + lo, a]
                            if hi < 0:
                                continue
                            col = m * imp_stride + base + (hi - s_loc[j]) * strides[j]
                            emit(i, col, coeff * sg * low_amp[row_j, d] * rai_amp[offs[j] + lo, a])
    mat = sp.csr_matrix(
        (np.array(vals, dtype=complex), (rows, cols)), shape=(dim, dim)
    )
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return SparseOperator(dimension=dim, matrix=mat)


def assemble_central(params: HamiltonianParams, basis: Basis) -> SparseOperator:
    return _assemble(params, basis, {"central"})


def assemble_chain(params: HamiltonianParams, basis: Basis) -> SparseOperator:
    return _assemble(params, basis, {"chain"})


def assemble_zeeman(params: HamiltonianParams, basis: Basis) -> SparseOperator:
    return _assemble(params, basis, {"zeeman"})


def assemble_nuclear_zeeman(params: HamiltonianParams, basis: Basis) -> SparseOperator:
    if not params.enable_nuclear_zeeman:
        raise ParameterError("nuclear term is disabled in these parameters")
    return _assemble(params, basis, {"nuclear"})


def assemble_total(params: HamiltonianParams, basis: Basis) -> SparseOperator:
    include = set()
    if params.enable_central:
        include.add("central")
    if params.enable_chain:
        include.add("chain")
    if np.any(params.h_central != 0):
        include.add("zeeman")
    if params.enable_nuclear_zeeman:
        include.add("nuclear")
    return _assemble(params, basis, include)


def hermiticity_defect(op: SparseOperator) -> float:
    """Largest entrywise magnitude of H minus its adjoint."""
    diff = op.matrix - op.matrix.conjugate().transpose()
    if diff.nnz == 0:
        return 0.0
    return float(np.abs(diff.data).max())


def reachable_ids(op: SparseOperator, seed_id: int) -> np.ndarray:
    """Breadth-first closure of the seed under the operator's sparsity pattern.

    States outside the closure can never acquire amplitude, so restricting
    to it is exact.  Returns the sorted member ids.
    """
    mat = op.matrix
    seen = np.zeros(op.dimension, dtype=bool)
    seen[seed_id] = True
    frontier = [seed_id]
    while frontier:
        nxt = []
        for row in frontier:
            for col in mat.indices[mat.indptr[row] : mat.indptr[row + 1]]:
                if not seen[col]:
                    seen[col] = True
                    nxt.append(int(col))
        frontier = nxt
    return np.nonzero(seen)[0]


def restrict_operator(op: SparseOperator, keep: np.ndarray):
    """Restriction of the operator to a closed id subset.

    Returns the restricted operator and a map from old ids to positions in
    ``keep`` (-1 outside).  Exact when ``keep`` is closed under the sparsity
    pattern, e.g. produced by reachable_ids.
    """
    sub = op.matrix[keep][:, keep].tocsr()
    position = np.full(op.dimension, -1, dtype=np.int64)
    position[keep] = np.arange(len(keep))
    return SparseOperator(dimension=len(keep), matrix=sub), position


def spectral_radius_estimate(op, n_iter: int = 30, seed: int = 7) -> float:
    """Power-iteration bound used for integrator step-size checks."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.dimension) + 1j * rng.standard_normal(op.dimension)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(n_iter):
        w = op.apply(v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam
