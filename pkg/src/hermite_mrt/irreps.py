"""Traceless (irreducible) decomposition of symmetric rank-2, 3 and 4 tensors.

Parts are ordered as the terms of the decomposition:

* rank 2: ``(a', a_pp)``
* rank 3: ``(a', a_ppi)``
* rank 4: ``(a', a''_ppij, a_ppqq)`` with ``a''`` the traceless part of ``a_ppij``

Only primed parts are traceless; trailing parts are the traces that get
redistributed isotropically on reassembly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .symtensor import SymTensor

PART_RANKS = {2: (2, 0), 3: (3, 1), 4: (4, 2, 0)}


@dataclass(frozen=True, eq=False)
class IrrepParts:
    rank: int
    parts: tuple

    def __post_init__(self):
        if self.rank not in PART_RANKS:
            raise ValueError(f"unsupported rank {self.rank}")
        parts = tuple(self.parts)
        expected = PART_RANKS[self.rank]
        if tuple(p.rank for p in parts) != expected:
            raise ValueError(
                f"rank-{self.rank} parts must have ranks {expected}, "
                f"got {tuple(p.rank for p in parts)}"
            )
        if len({p.dim for p in parts}) != 1:
            raise ValueError("parts disagree on dimension")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self):
        return self.parts[0].dim

    def __getitem__(self, k):
        return self.parts[k]

    def __len__(self):
        return len(self.parts)


def _iso2(scalar: SymTensor, dim) -> SymTensor:
    return SymTensor.delta(dim) * scalar.data[0]


def _iso3(vec: SymTensor, dim) -> SymTensor:
    return vec.sym(SymTensor.delta(dim)) * (3.0 / (dim + 2))


def _iso4(dev2: SymTensor, scalar: SymTensor, dim) -> SymTensor:
    # 6 sym(a'' delta) / (D+4) + 3 s sym(delta delta) / (D (D+2))
    t = dev2.sym(SymTensor.delta(dim)) * (6.0 / (dim + 4))
    return t + SymTensor.delta(dim, 2) * (scalar.data[0] * 3.0 / (dim * (dim + 2)))


def decompose(a: SymTensor) -> IrrepParts:
    D = a.dim
    if a.rank == 2:
        tr = a.trace()
        return IrrepParts(2, (a - _iso2(tr, D) / D, tr))
    if a.rank == 3:
        v = a.trace()
        return IrrepParts(3, (a - _iso3(v, D), v))
    if a.rank == 4:
        t = a.trace()
        s = t.trace()
        dev2 = t - _iso2(s, D) / D
        return IrrepParts(4, (a - _iso4(dev2, s, D), dev2, s))
    raise ValueError(f"cannot decompose rank {a.rank}")


def reassemble(parts: IrrepParts) -> SymTensor:
    D = parts.dim
    if parts.rank == 2:
        prime, tr = parts.parts
        return prime + _iso2(tr, D) / D
    if parts.rank == 3:
        prime, v = parts.parts
        return prime + _iso3(v, D)
    prime, dev2, s = parts.parts
    return prime + _iso4(dev2, s, D)


def relax_parts(parts: IrrepParts, taus) -> IrrepParts:
    """Scale part ``k`` by ``-1/taus[k]``."""
    taus = tuple(float(t) for t in taus)
    if len(taus) != len(parts):
        raise ValueError(f"need {len(parts)} relaxation times, got {len(taus)}")
    if any(not t > 0 for t in taus):
        raise ValueError(f"relaxation times must be positive: {taus}")
    return IrrepParts(parts.rank, tuple(p * (-1.0 / t) for p, t in zip(parts.parts, taus)))


def scale_parts(parts: IrrepParts, factors) -> IrrepParts:
    """Multiply each part by its own factor (no sign or positivity convention)."""
    factors = tuple(factors)
    if len(factors) != len(parts):
        raise ValueError(f"need {len(parts)} factors, got {len(factors)}")
    return IrrepParts(parts.rank, tuple(p * f for p, f in zip(parts.parts, factors)))


def max_trace_defect(parts: IrrepParts) -> float:
    """Largest contraction of any traceless part (primed parts and ``a''``)."""
    checks = [parts[0]] + ([parts[1]] if parts.rank == 4 else [])
    return max(float(np.max(np.abs(p.trace().data))) for p in checks)
