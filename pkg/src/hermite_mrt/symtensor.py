"""Fully symmetric tensors stored by their distinct components.

A rank-``n`` symmetric tensor in ``D`` dimensions has ``C(D+n-1, n)`` distinct
entries, indexed by nondecreasing index tuples.  :class:`SymTensor` keeps only
those entries, in the order produced by
``itertools.combinations_with_replacement``, along the *first* axis of its
data array.  Trailing axes are batch axes (lattice sites, random samples), the
same structure-of-arrays layout used for populations.

Products between symmetric tensors are always symmetrized with the
normalized symmetrizer (the mean over index permutations).  With that
convention ``D_n^k * sym(xi^(n-2k), delta^k)`` is the familiar sum over the
``D_n^k`` distinct index partitions.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial

import numpy as np

MAX_RANK = 8


def ncomp(rank: int, dim: int) -> int:
    return comb(dim + rank - 1, rank)


@lru_cache(maxsize=None)
def indices(rank: int, dim: int) -> tuple[tuple[int, ...], ...]:
    """Canonical (nondecreasing) index tuples of the distinct components."""
    return tuple(itertools.combinations_with_replacement(range(dim), rank))


@lru_cache(maxsize=None)
def _position(rank: int, dim: int) -> dict[tuple[int, ...], int]:
    return {idx: p for p, idx in enumerate(indices(rank, dim))}


def position(index, dim: int) -> int:
    """Storage slot of an arbitrary (unsorted) full index tuple."""
    key = tuple(sorted(int(i) for i in index))
    if any(i < 0 or i >= dim for i in key):
        raise IndexError(f"index {tuple(index)} out of range for dim={dim}")
    return _position(len(key), dim)[key]


@lru_cache(maxsize=None)
def multiplicity(rank: int, dim: int) -> np.ndarray:
    """Number of full-tensor entries represented by each distinct component."""
    out = []
    for idx in indices(rank, dim):
        m = factorial(rank)
        for v in set(idx):
            m //= factorial(idx.count(v))
        out.append(m)
    arr = np.array(out, dtype=float)
    arr.flags.writeable = False
    return arr


@lru_cache(maxsize=None)
def _outer_matrix(p: int, q: int, dim: int) -> np.ndarray:
    """``T[o, i*nq + j]``: weight of ``a_i b_j`` in component ``o`` of ``sym(a b)``."""
    n = p + q
    pos_p, pos_q = _position(p, dim), _position(q, dim)
    nq = ncomp(q, dim)
    subsets = list(itertools.combinations(range(n), p))
    T = np.zeros((ncomp(n, dim), ncomp(p, dim) * nq))
    for o, idx in enumerate(indices(n, dim)):
        for sub in subsets:
            i = pos_p[tuple(idx[j] for j in sub)]
            j = pos_q[tuple(idx[k] for k in range(n) if k not in sub)]
            T[o, i * nq + j] += 1.0 / len(subsets)
    T.flags.writeable = False
    return T


@lru_cache(maxsize=None)
def _trace_matrix(rank: int, dim: int) -> np.ndarray:
    pos = _position(rank, dim)
    T = np.zeros((ncomp(rank - 2, dim), ncomp(rank, dim)))
    for o, idx in enumerate(indices(rank - 2, dim)):
        for p in range(dim):
            T[o, pos[tuple(sorted(idx + (p, p)))]] += 1.0
    T.flags.writeable = False
    return T


@lru_cache(maxsize=None)
def _full_table(rank: int, dim: int) -> np.ndarray:
    pos = _position(rank, dim)
    table = np.empty((dim,) * rank, dtype=np.intp)
    for full in itertools.product(range(dim), repeat=rank):
        table[full] = pos[tuple(sorted(full))]
    return table


@lru_cache(maxsize=None)
def _power_table(rank: int, dim: int) -> np.ndarray:
    return np.array(indices(rank, dim), dtype=np.intp).reshape(ncomp(rank, dim), rank).T


def _pad(x: np.ndarray, ndim: int) -> np.ndarray:
    return x.reshape(x.shape + (1,) * (ndim - x.ndim)) if x.ndim < ndim else x


def apply_matrix(T: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Contract a component map with the leading axis of ``x``."""
    if x.ndim == 1:
        return T @ x
    return (T @ x.reshape(x.shape[0], -1)).reshape((T.shape[0],) + x.shape[1:])


def sym_outer_data(a: np.ndarray, p: int, b: np.ndarray, q: int, dim: int) -> np.ndarray:
    """Symmetrized outer product on raw component arrays (component axis first)."""
    nd = max(a.ndim, b.ndim)
    a, b = _pad(a, nd), _pad(b, nd)
    if p == 0 or q == 0:
        return a * b
    prod = a[:, None] * b[None, :]
    prod = prod.reshape((-1,) + prod.shape[2:])
    return apply_matrix(_outer_matrix(p, q, dim), prod)


def outer_power_data(u: np.ndarray, m: int) -> np.ndarray:
    """Components of the m-fold outer power of the vector(s) ``u`` (shape (D, ...))."""
    dim = u.shape[0]
    if m == 0:
        return np.ones((1,) + u.shape[1:])
    rows = _power_table(m, dim)
    out = u[rows[0]]
    for r in rows[1:]:
        out = out * u[r]
    return out


@lru_cache(maxsize=None)
def delta_power_data(k: int, dim: int) -> np.ndarray:
    """Components of sym(delta^k), a constant rank-2k tensor."""
    out = np.ones(1)
    delta = np.array([1.0 if i == j else 0.0 for i, j in indices(2, dim)])
    for j in range(k):
        out = sym_outer_data(out, 2 * j, delta, 2, dim)
    out = np.ascontiguousarray(out)
    out.flags.writeable = False
    return out


def trace_data(a: np.ndarray, rank: int, dim: int) -> np.ndarray:
    if rank < 2:
        raise ValueError("trace needs rank >= 2")
    return apply_matrix(_trace_matrix(rank, dim), a)


@dataclass(frozen=True, eq=False)
class SymTensor:
    """Fully symmetric tensor of a given rank and dimension.

    ``data`` has shape ``(ncomp(rank, dim),) + batch``.
    """

    rank: int
    dim: int
    data: np.ndarray

    def __post_init__(self):
        if not 0 <= self.rank <= MAX_RANK:
            raise ValueError(f"unsupported rank {self.rank}")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 0:
            data = data.reshape(1)
        if data.shape[0] != ncomp(self.rank, self.dim):
            raise ValueError(
                f"rank-{self.rank} tensor in {self.dim}D needs {ncomp(self.rank, self.dim)} "
                f"components, got leading axis {data.shape[0]}"
            )
        object.__setattr__(self, "data", data)

    # construction
    @classmethod
    def zeros(cls, rank, dim, batch=()):
        return cls(rank, dim, np.zeros((ncomp(rank, dim),) + tuple(batch)))

    @classmethod
    def scalar(cls, value, dim):
        return cls(0, dim, np.asarray(value, dtype=float)[None])

    @classmethod
    def vector(cls, value):
        value = np.asarray(value, dtype=float)
        return cls(1, value.shape[0], value)

    @classmethod
    def delta(cls, dim, power=1):
        """sym(delta^power), rank 2*power."""
        return cls(2 * power, dim, delta_power_data(power, dim))

    @classmethod
    def outer_power(cls, u, m):
        u = np.asarray(u, dtype=float)
        return cls(m, u.shape[0], outer_power_data(u, m))

    @classmethod
    def from_full(cls, full, rank=None, dim=None, symmetrize=False):
        """Build from a dense array whose first ``rank`` axes are tensor axes."""
        full = np.asarray(full, dtype=float)
        if rank is None:
            rank = full.ndim
        if dim is None:
            dim = full.shape[0] if rank else 1
        if symmetrize and rank > 1:
            rest = tuple(range(rank, full.ndim))
            perms = list(itertools.permutations(range(rank)))
            full = sum(np.transpose(full, p + rest) for p in perms) / len(perms)
        batch = full.shape[rank:]
        flat = full.reshape((-1,) + batch)
        strides = dim ** np.arange(rank - 1, -1, -1)
        picks = [int(np.dot(idx, strides)) for idx in indices(rank, dim)]
        return cls(rank, dim, flat[picks])

    # inspection
    @property
    def batch_shape(self):
        return self.data.shape[1:]

    def __getitem__(self, index):
        if not isinstance(index, tuple):
            index = (index,)
        if len(index) != self.rank:
            raise IndexError(f"need {self.rank} indices, got {len(index)}")
        return self.data[position(index, self.dim)]

    def full(self) -> np.ndarray:
        """Dense form with the tensor axes first."""
        if self.rank == 0:
            return self.data[0]
        return self.data[_full_table(self.rank, self.dim)]

    def __repr__(self):
        return f"SymTensor(rank={self.rank}, dim={self.dim}, batch={self.batch_shape})"

    # algebra
    def _check(self, other):
        if not isinstance(other, SymTensor):
            return NotImplemented
        if (other.rank, other.dim) != (self.rank, self.dim):
            raise ValueError(
                f"shape mismatch: rank {self.rank}/{other.rank}, dim {self.dim}/{other.dim}"
            )
        return other

    def _pair(self, other):
        nd = max(self.data.ndim, other.data.ndim)
        return _pad(self.data, nd), _pad(other.data, nd)

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        a, b = self._pair(other)
        return SymTensor(self.rank, self.dim, a + b)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        a, b = self._pair(other)
        return SymTensor(self.rank, self.dim, a - b)

    def __neg__(self):
        return SymTensor(self.rank, self.dim, -self.data)

    def __mul__(self, c):
        if isinstance(c, SymTensor):
            return NotImplemented
        c = np.asarray(c, dtype=float)
        data = _pad(self.data, c.ndim + 1)
        return SymTensor(self.rank, self.dim, data * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        c = np.asarray(c, dtype=float)
        data = _pad(self.data, c.ndim + 1)
        return SymTensor(self.rank, self.dim, data / c)

    def sym(self, other: SymTensor) -> SymTensor:
        """Symmetrized outer product ``sym(self (x) other)``."""
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        data = sym_outer_data(self.data, self.rank, other.data, other.rank, self.dim)
        return SymTensor(self.rank + other.rank, self.dim, data)

    def trace(self) -> SymTensor:
        """Contraction over one index pair (any pair, by symmetry)."""
        return SymTensor(self.rank - 2, self.dim, trace_data(self.data, self.rank, self.dim))

    def contract(self, other: SymTensor) -> np.ndarray:
        """Full contraction ``self : other`` over all indices."""
        self._check(other)
        a, b = self._pair(other)
        w = _pad(multiplicity(self.rank, self.dim), a.ndim)
        return (a * b * w).sum(axis=0)

    def norm(self) -> np.ndarray:
        return np.sqrt(self.contract(self))

    def allclose(self, other, atol=1e-12, rtol=0.0) -> bool:
        self._check(other)
        return bool(np.allclose(self.data, other.data, atol=atol, rtol=rtol))

    def rotate(self, R) -> SymTensor:
        """Apply an orthogonal (or any linear) map to every index."""
        R = np.asarray(R, dtype=float)
        full = self.full()
        for ax in range(self.rank):
            full = np.moveaxis(np.tensordot(R, full, axes=([1], [ax])), 0, ax)
        return SymTensor.from_full(full, self.rank, self.dim)


def sym_product(*tensors: SymTensor) -> SymTensor:
    out = tensors[0]
    for t in tensors[1:]:
        out = out.sym(t)
    return out
