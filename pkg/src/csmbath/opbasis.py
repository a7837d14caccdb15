"""Truncated operator basis: impurity index times bosonic occupations.

A basis state is ``|m; n>`` with impurity index ``m in {0,1,2,3}`` and a
flat occupation tuple ``n = (n_{0,x}, n_{0,y}, n_{0,z}, n_{1,x}, ...)`` over
``n_tr`` chain sites and three flavors.  Admission rule: the total occupation
at every site stays strictly below that site's cap,

    n_{j,x} + n_{j,y} + n_{j,z} < n_max(j).

Enumeration is a plain product: impurity index major, then site occupations
in lexicographic order site by site.  Ids are dense and the id<->state maps
are arithmetic, so no state list is ever materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .errors import CapacityError, ParameterError

N_FLAVORS = 3
DEFAULT_MAX_STATES = 400_000_000
_CACHE_FORMAT = "csmbath-basis-v1"
_ORDERING_TAG = "impurity-major/site-lex"


@dataclass(frozen=True)
class TruncationSpec:
    """Per-site caps on the total boson occupation."""

    n_max: tuple[int, ...]

    def __post_init__(self):
        if len(self.n_max) == 0:
            raise ParameterError("need at least one chain site")
        if any(int(c) != c or c < 1 for c in self.n_max):
            raise ParameterError(f"all caps must be integers >= 1, got {self.n_max}")
        object.__setattr__(self, "n_max", tuple(int(c) for c in self.n_max))

    @property
    def n_tr(self) -> int:
        return len(self.n_max)


@dataclass(frozen=True)
class BasisState:
    m: int
    occ: tuple[int, ...]


def site_state_count(cap: int) -> int:
    """Number of flavor triples with total occupation below ``cap``."""
    return math.comb(cap + 2, 3)


def predicted_size(trunc: TruncationSpec) -> int:
    size = 4
    for cap in trunc.n_max:
        size *= site_state_count(cap)
    return size


@lru_cache(maxsize=None)
def site_tables(cap: int):
    """Occupation triples below ``cap`` plus lowering/raising lookup tables.

    Returns (occs, lower_idx, lower_amp, raise_idx, raise_amp); the index
    tables hold -1 where the move annihilates the state or would break the
    cap, and the amplitudes are sqrt(n) / sqrt(n+1).
    """
    occs = np.array(
        [t for t in product(range(cap), repeat=N_FLAVORS) if sum(t) < cap],
        dtype=np.int32,
    ).reshape(-1, N_FLAVORS)
    index = {tuple(t): i for i, t in enumerate(occs.tolist())}
    t_dim = len(occs)
    lower_idx = np.full((t_dim, N_FLAVORS), -1, dtype=np.int64)
    lower_amp = np.zeros((t_dim, N_FLAVORS))
    raise_idx = np.full((t_dim, N_FLAVORS), -1, dtype=np.int64)
    raise_amp = np.zeros((t_dim, N_FLAVORS))
    for i, t in enumerate(occs.tolist()):
        for a in range(N_FLAVORS):
            if t[a] > 0:
                down = list(t)
                down[a] -= 1
                lower_idx[i, a] = index[tuple(down)]
                lower_amp[i, a] = math.sqrt(t[a])
            if sum(t) + 1 < cap:
                up = list(t)
                up[a] += 1
                raise_idx[i, a] = index[tuple(up)]
                raise_amp[i, a] = math.sqrt(t[a] + 1)
    return occs, lower_idx, lower_amp, raise_idx, raise_amp


class Basis:
    """Indexed enumeration of the truncated product basis."""

    def __init__(self, trunc: TruncationSpec, max_states: int = DEFAULT_MAX_STATES):
        self.trunc = trunc
        size = predicted_size(trunc)
        if size > max_states:
            raise CapacityError(
                f"basis would hold {size} states, exceeding the budget of {max_states}"
            )
        self.site_dims = np.array([site_state_count(c) for c in trunc.n_max], dtype=np.int64)
        self.site_occs = [site_tables(c)[0] for c in trunc.n_max]
        self._site_index = [
            {tuple(t): i for i, t in enumerate(occs.tolist())} for occs in self.site_occs
        ]
        # strides: site n_tr-1 runs fastest, impurity index is most significant
        strides = np.ones(trunc.n_tr, dtype=np.int64)
        for j in range(trunc.n_tr - 2, -1, -1):
            strides[j] = strides[j + 1] * self.site_dims[j + 1]
        self.site_strides = strides
        self.impurity_stride = int(strides[0] * self.site_dims[0])
        self.size = size

    @property
    def n_tr(self) -> int:
        return self.trunc.n_tr

    def id_of(self, state: BasisState) -> int:
        if state.m not in (0, 1, 2, 3):
            raise ParameterError(f"impurity index out of range: {state.m}")
        if len(state.occ) != N_FLAVORS * self.n_tr:
            raise ParameterError("occupation tuple has the wrong length")
        ident = state.m * self.impurity_stride
        for j in range(self.n_tr):
            triple = tuple(state.occ[N_FLAVORS * j : N_FLAVORS * (j + 1)])
            local = self._site_index[j].get(triple)
            if local is None:
                raise ParameterError(f"occupation {triple} violates the cap at site {j}")
            ident += int(self.site_strides[j]) * local
        return ident

    def state_of(self, ident: int) -> BasisState:
        if not 0 <= ident < self.size:
            raise ParameterError(f"id out of range: {ident}")
        m, rest = divmod(ident, self.impurity_stride)
        occ = []
        for j in range(self.n_tr):
            local, rest = divmod(rest, int(self.site_strides[j]))
            occ.extend(self.site_occs[j][local].tolist())
        return BasisState(m=int(m), occ=tuple(occ))

    def __len__(self) -> int:
        return self.size

    def __iter__(self):
        for ident in range(self.size):
            yield self.state_of(ident)

    def states(self):
        return list(self)


def enumerate_basis(trunc: TruncationSpec, max_states: int = DEFAULT_MAX_STATES) -> Basis:
    """Build the full constrained product basis for the given truncation."""
    return Basis(trunc, max_states=max_states)


def seed_state(basis: Basis) -> int:
    """Id of the starting operator ket: impurity index 3, bosonic vacuum."""
    return basis.id_of(BasisState(m=3, occ=(0,) * (N_FLAVORS * basis.n_tr)))


def lower_occ(occ: tuple[int, ...], site: int, flavor: int):
    """Decrement one occupation; returns (occ', sqrt(n)) or None at vacuum."""
    n_sites = len(occ) // N_FLAVORS
    if not (0 <= site < n_sites) or not (0 <= flavor < N_FLAVORS):
        raise ParameterError(f"site/flavor out of range: ({site}, {flavor})")
    k = N_FLAVORS * site + flavor
    n = occ[k]
    if n == 0:
        return None
    out = list(occ)
    out[k] = n - 1
    return tuple(out), math.sqrt(n)


def raise_occ(occ: tuple[int, ...], site: int, flavor: int, trunc: TruncationSpec):
    """Increment one occupation; returns (occ', sqrt(n+1)) or None at the cap."""
    n_sites = len(occ) // N_FLAVORS
    if not (0 <= site < n_sites) or not (0 <= flavor < N_FLAVORS):
        raise ParameterError(f"site/flavor out of range: ({site}, {flavor})")
    total = sum(occ[N_FLAVORS * site : N_FLAVORS * (site + 1)])
    if total + 1 >= trunc.n_max[site]:
        return None
    k = N_FLAVORS * site + flavor
    out = list(occ)
    out[k] = occ[k] + 1
    return tuple(out), math.sqrt(occ[k] + 1)


def save_basis(basis: Basis, path) -> None:
    """Binary cache with a versioned header; rebuilds bit-exactly on load."""
    np.savez(
        path,
        format=np.array(_CACHE_FORMAT),
        ordering=np.array(_ORDERING_TAG),
        n_max=np.array(basis.trunc.n_max, dtype=np.int64),
        size=np.array(basis.size, dtype=np.int64),
    )


def load_basis(path) -> Basis:
    with np.load(path) as data:
        if str(data["format"]) != _CACHE_FORMAT or str(data["ordering"]) != _ORDERING_TAG:
            raise ParameterError(f"unrecognized basis cache header in {path}")
        trunc = TruncationSpec(tuple(int(c) for c in data["n_max"]))
        basis = Basis(trunc)
        if basis.size != int(data["size"]):
            raise ParameterError(f"basis cache {path} is inconsistent")
    return basis
