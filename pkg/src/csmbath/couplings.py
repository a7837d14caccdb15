"""Hyperfine coupling sets and their orthogonal-polynomial chain coefficients.

The couplings decay exponentially, ``J_i = C exp(-i*gamma)``, and are
normalized so that the quadratic scale ``j_q = sqrt(sum J_i^2)`` equals 1
exactly.  The three-term recursion coefficients of the polynomials that are
orthonormal on the coupling multiset define a real symmetric tridiagonal
matrix; its eigenbasis provides an alternative "star" representation of the
boson chain.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ChainBreakdownError, NumericError, ParameterError, UnsupportedModeError

INFINITE = math.inf

_BREAKDOWN_EPS = 1e-14


class CoeffMode(enum.Enum):
    EXACT = "exact"
    ANALYTIC = "analytic"


@dataclass(frozen=True)
class CouplingSet:
    """Normalized exponential coupling family and its derived scales.

    For a finite bath the ``couplings`` array holds the individual values and
    ``n_eff`` is the ratio (sum J)^2 / sum J^2.  For an infinite bath only the
    gamma-derived quantities are populated and ``n_eff`` is the asymptotic
    value 2/gamma.
    """

    gamma: float
    n_bath: float            # positive integer or INFINITE
    prefactor: float
    j_q: float
    n_eff: float
    couplings: np.ndarray | None = field(default=None, repr=False)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.n_bath)

    def require_couplings(self) -> np.ndarray:
        if self.couplings is None:
            raise UnsupportedModeError(
                "operation needs explicit couplings; the bath is infinite"
            )
        return self.couplings


@dataclass(frozen=True)
class LanczosChain:
    """Recursion coefficients alpha_1..alpha_n, beta_1..beta_{n-1}.

    The boundary coefficients beta_0 and beta_n are zero by convention and
    are not stored.
    """

    n_tr: int
    alphas: np.ndarray
    betas: np.ndarray
    mode: CoeffMode

    def __post_init__(self):
        if self.n_tr < 1:
            raise ParameterError("n_tr must be positive")
        if len(self.alphas) != self.n_tr or len(self.betas) != self.n_tr - 1:
            raise ParameterError("coefficient lengths inconsistent with n_tr")
        if self.n_tr > 1 and np.min(self.betas) <= 0:
            raise ParameterError("all off-diagonal coefficients must be positive")

    def tridiagonal(self) -> np.ndarray:
        """Dense symmetric tridiagonal matrix holding the coefficients."""
        t = np.diag(self.alphas)
        for j in range(self.n_tr - 1):
            t[j, j + 1] = t[j + 1, j] = self.betas[j]
        return t


@dataclass(frozen=True)
class ChainEigenbasis:
    """Eigenvalues and orthogonal eigenvector matrix of the chain matrix.

    The eigenvector signs are fixed so every entry of the first row of
    ``q_matrix`` (the head weights) is non-negative.
    """

    energies: np.ndarray
    q_matrix: np.ndarray

    @property
    def head_weights(self) -> np.ndarray:
        return self.q_matrix[0]


def build_coupling_set(gamma: float, n_bath) -> CouplingSet:
    """Construct the normalized coupling set for decay parameter ``gamma``.

    ``n_bath`` is a positive integer or ``INFINITE``.  The prefactor is solved
    exactly from the normalization sum (not from the small-gamma limit), so
    ``j_q == 1`` holds to machine precision for any bath size.
    """
    if not (gamma > 0):
        raise ParameterError(f"gamma must be positive, got {gamma}")
    if n_bath == INFINITE:
        # geometric tail: sum_{i>=1} exp(-2 i gamma) = 1/(exp(2 gamma) - 1)
        prefactor = math.sqrt(math.expm1(2 * gamma))
        return CouplingSet(
            gamma=gamma,
            n_bath=INFINITE,
            prefactor=prefactor,
            j_q=1.0,
            n_eff=2.0 / gamma,
        )
    n = int(n_bath)
    if n < 1 or n != n_bath:
        raise ParameterError(f"n_bath must be a positive integer or INFINITE, got {n_bath}")
    raw = np.exp(-gamma * np.arange(1, n + 1))
    prefactor = 1.0 / math.sqrt(float(np.sum(raw * raw)))
    j = prefactor * raw
    n_eff = float(np.sum(j)) ** 2  # sum of squares is 1 by construction
    return CouplingSet(
        gamma=gamma,
        n_bath=n,
        prefactor=prefactor,
        j_q=1.0,
        n_eff=n_eff,
        couplings=j,
    )


def _orthopoly_values(points: np.ndarray, upto: int):
    """Values of the orthonormal polynomials p_1..p_upto on the points.

    Stieltjes three-term recursion with p_0 = 0 and p_1(x) = x (p_1 is
    normalized because the points have unit square sum).  Returns the value
    table of shape (upto, n_points) plus the recursion coefficients.
    """
    n = len(points)
    if upto > n:
        raise ParameterError(f"chain length {upto} exceeds bath size {n}")
    vals = np.zeros((upto, n))
    alphas = np.zeros(upto)
    betas = np.zeros(max(upto - 1, 0))
    p_prev = np.zeros(n)
    p = points.copy()
    for j in range(upto):
        vals[j] = p
        alphas[j] = float(np.sum(points * p * p))
        if j == upto - 1:
            break
        r = points * p - alphas[j] * p - (betas[j - 1] if j > 0 else 0.0) * p_prev
        b = math.sqrt(float(np.sum(r * r)))
        if b < _BREAKDOWN_EPS:
            raise ChainBreakdownError(achieved=j + 1, requested=upto)
        betas[j] = b
        p_prev, p = p, r / b
    return vals, alphas, betas


def lanczos_exact(cs: CouplingSet, n_tr: int) -> LanczosChain:
    """Recursion coefficients computed from the actual (finite) coupling set."""
    points = cs.require_couplings()
    if n_tr < 1:
        raise ParameterError("n_tr must be positive")
    _, alphas, betas = _orthopoly_values(points, n_tr)
    return LanczosChain(n_tr=n_tr, alphas=alphas, betas=betas, mode=CoeffMode.EXACT)


def lanczos_analytic(gamma: float, n_tr: int) -> LanczosChain:
    """Small-gamma closed-form coefficients for the exponential family.

    alpha_j = 4j^2/(4j^2-1) * sqrt(gamma/2),
    beta_j  = sqrt(j(j+1))/(2j+1) * sqrt(gamma/2).
    """
    if not (gamma > 0):
        raise ParameterError(f"gamma must be positive, got {gamma}")
    if n_tr < 1:
        raise ParameterError("n_tr must be positive")
    scale = math.sqrt(gamma / 2.0)
    j = np.arange(1, n_tr + 1, dtype=float)
    alphas = 4 * j * j / (4 * j * j - 1) * scale
    jb = j[:-1]
    betas = np.sqrt(jb * (jb + 1)) / (2 * jb + 1) * scale
    return LanczosChain(n_tr=n_tr, alphas=alphas, betas=betas, mode=CoeffMode.ANALYTIC)


def orthonormality_gram(cs: CouplingSet, n_tr: int) -> np.ndarray:
    """Gram matrix (p_j|p_k) of the exact-mode polynomials; identity if sound."""
    vals, _, _ = _orthopoly_values(cs.require_couplings(), n_tr)
    return vals @ vals.T


def pair_overlap_sum(cs: CouplingSet, m: int, l: int) -> float:
    """Sum over couplings of p_m^2 * p_l^2.

    Squared-norm proxy for the residual commutator of two polynomial-weighted
    bath fields; scales like 1/n_eff for the exponential family.  Indices are
    1-based to match the recursion (p_1(x) = x).
    """
    if m < 1 or l < 1:
        raise ParameterError("polynomial indices are 1-based")
    vals, _, _ = _orthopoly_values(cs.require_couplings(), max(m, l))
    return float(np.sum(vals[m - 1] ** 2 * vals[l - 1] ** 2))


def diagonalize_chain(lc: LanczosChain) -> ChainEigenbasis:
    """Eigen-decomposition of the chain matrix with non-negative head weights."""
    if lc.n_tr == 1:
        return ChainEigenbasis(energies=lc.alphas.copy(), q_matrix=np.array([[1.0]]))
    try:
        energies, q = eigh_tridiagonal(lc.alphas, lc.betas)
    except Exception as exc:  # pragma: no cover - LAPACK failure is an internal fault
        raise NumericError("tridiagonal eigensolver failed") from exc
    # sign freedom: make every head weight non-negative
    signs = np.where(q[0] < 0, -1.0, 1.0)
    return ChainEigenbasis(energies=energies, q_matrix=q * signs)
