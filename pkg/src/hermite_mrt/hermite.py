"""Hermite tensor polynomials and the binomial transforms between frames.

All polynomials use the unit-variance weight
``omega(xi) = (2 pi)^(-D/2) exp(-xi^2/2)``.  Coefficients ``a^(n)`` live in
the laboratory frame; ``d^(n)`` are the coefficients of the same
distribution expanded in ``v = (xi - u)/sqrt(theta)``.

Every function accepts batched arguments: vectors with shape ``(D, ...)`` and
scalars with shape ``(...)``; the batch shape is carried into the returned
:class:`~hermite_mrt.symtensor.SymTensor`.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from .symtensor import SymTensor

MAX_ORDER = 4


class UnsupportedOrderError(ValueError):
    """Raised for Hermite orders above :data:`MAX_ORDER`."""


def _check_order(n):
    if n < 0 or n > MAX_ORDER:
        raise UnsupportedOrderError(f"Hermite order {n} not supported (0..{MAX_ORDER})")


def dnk(n: int, k: int) -> int:
    """``n! / ((n-2k)! 2^k k!)``: the number of ways to pick ``k`` index pairs out of ``n``."""
    if n < 0 or k < 0 or 2 * k > n:
        raise ValueError(f"D_n^k undefined for n={n}, k={k}")
    return factorial(n) // (factorial(n - 2 * k) * 2**k * factorial(k))


def _as_vec(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    return x


def _broadcast_vecs(x, y):
    x, y = _as_vec(x), _as_vec(y)
    nd = max(x.ndim, y.ndim)
    x = x.reshape(x.shape + (1,) * (nd - x.ndim))
    y = y.reshape(y.shape + (1,) * (nd - y.ndim))
    return np.broadcast_arrays(x, y)


def _power_delta_series(n, u, coeff):
    """sum_k coeff(k) * D_n^k * sym(u^(n-2k), delta^k)."""
    dim = u.shape[0]
    out = None
    for k in range(n // 2 + 1):
        term = SymTensor.outer_power(u, n - 2 * k)
        if k:
            term = term.sym(SymTensor.delta(dim, k))
        term = term * (dnk(n, k) * coeff(k))
        out = term if out is None else out + term
    return out


def hermite_eval(n: int, xi) -> SymTensor:
    """Rank-``n`` Hermite tensor polynomial ``H^(n)(xi)``."""
    _check_order(n)
    xi = _as_vec(xi)
    return _power_delta_series(n, xi, lambda k: (-1.0) ** k)


def a_poly(m: int, u, theta) -> SymTensor:
    """``A_m(u, theta) = sum_k D_m^k (1-theta)^k sym(u^(m-2k) delta^k)``."""
    _check_order(m)
    u = _as_vec(u)
    one_minus = 1.0 - np.asarray(theta, dtype=float)
    return _power_delta_series(m, u, lambda k: one_minus**k)


def shift_hermite(n: int, xi, u) -> SymTensor:
    """``H^(n)(xi + u)`` assembled from ``H^(k)(xi)`` and powers of ``u``."""
    _check_order(n)
    xi, u = _broadcast_vecs(xi, u)
    out = None
    for k in range(n + 1):
        term = hermite_eval(k, xi).sym(SymTensor.outer_power(u, n - k)) * comb(n, k)
        out = term if out is None else out + term
    return out


def scale_hermite(n: int, xi, alpha) -> SymTensor:
    """``H^(n)(alpha xi)`` expressed through ``H^(n-2m)(xi)``."""
    _check_order(n)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha == 0):
        raise ValueError("scale factor must be nonzero")
    xi = _as_vec(xi)
    dim = xi.shape[0]
    shrink = 1.0 - alpha**-2.0
    out = None
    for m in range(n // 2 + 1):
        term = hermite_eval(n - 2 * m, xi)
        if m:
            term = term.sym(SymTensor.delta(dim, m))
        term = term * (dnk(n, m) * shrink**m)
        out = term if out is None else out + term
    return out * alpha**n


def moving_frame_hermite(n: int, xi, u, theta) -> SymTensor:
    """``H^(n)((xi - u)/sqrt(theta))`` from laboratory-frame polynomials."""
    _check_order(n)
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0):
        raise ValueError("theta must be positive")
    xi, u = _broadcast_vecs(xi, u)
    out = None
    for k in range(n + 1):
        term = hermite_eval(k, xi).sym(a_poly(n - k, u, theta)) * ((-1) ** (n - k) * comb(n, k))
        out = term if out is None else out + term
    return out * theta ** (-n / 2)


@dataclass(frozen=True, eq=False)
class CoeffSet:
    """Hermite coefficients of orders ``0..max_order``; slot ``n`` holds a rank-``n`` tensor."""

    dim: int
    tensors: tuple

    def __post_init__(self):
        tensors = tuple(self.tensors)
        for n, t in enumerate(tensors):
            if t.rank != n or t.dim != self.dim:
                raise ValueError(f"slot {n} holds rank {t.rank}, dim {t.dim}")
        if not tensors or len(tensors) - 1 > MAX_ORDER:
            raise UnsupportedOrderError(f"max order must be within 0..{MAX_ORDER}")
        object.__setattr__(self, "tensors", tensors)

    @property
    def max_order(self) -> int:
        return len(self.tensors) - 1

    @classmethod
    def zeros(cls, dim, max_order, batch=()):
        return cls(dim, tuple(SymTensor.zeros(n, dim, batch) for n in range(max_order + 1)))

    def __getitem__(self, n) -> SymTensor:
        return self.tensors[n]

    def __len__(self):
        return len(self.tensors)

    def __iter__(self):
        return iter(self.tensors)

    def replace(self, n, tensor) -> CoeffSet:
        ts = list(self.tensors)
        ts[n] = tensor
        return CoeffSet(self.dim, tuple(ts))

    def __add__(self, other):
        return CoeffSet(self.dim, tuple(a + b for a, b in zip(self, other, strict=True)))

    def __sub__(self, other):
        return CoeffSet(self.dim, tuple(a - b for a, b in zip(self, other, strict=True)))

    def __mul__(self, c):
        return CoeffSet(self.dim, tuple(t * c for t in self))

    __rmul__ = __mul__

    def allclose(self, other, atol=1e-12, rtol=0.0) -> bool:
        return len(self) == len(other) and all(
            a.allclose(b, atol=atol, rtol=rtol) for a, b in zip(self, other)
        )


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(~(theta > 0)):
        raise ValueError("theta must be positive")
    return theta


def central_from_raw(a: CoeffSet, u, theta) -> CoeffSet:
    """Laboratory coefficients ``a^(n)`` to co-moving, temperature-scaled ``d^(n)``.

    ``d^(n) = theta^(-(D+n)/2) sum_k (-1)^(n-k) C(n,k) sym(a^(k) A_(n-k)(u, theta))``
    """
    theta = _check_theta(theta)
    u = _as_vec(u)
    D = a.dim
    polys = [a_poly(m, u, theta) for m in range(a.max_order + 1)]
    out = []
    for n in range(a.max_order + 1):
        acc = None
        for k in range(n + 1):
            term = a[k].sym(polys[n - k]) * ((-1) ** (n - k) * comb(n, k))
            acc = term if acc is None else acc + term
        out.append(acc * theta ** (-(D + n) / 2))
    return CoeffSet(D, tuple(out))


def raw_from_central(d: CoeffSet, u, theta) -> CoeffSet:
    """Exact inverse of :func:`central_from_raw`, solved order by order."""
    theta = _check_theta(theta)
    u = _as_vec(u)
    D = d.dim
    polys = [a_poly(m, u, theta) for m in range(d.max_order + 1)]
    out = []
    for n in range(d.max_order + 1):
        acc = d[n] * theta ** ((D + n) / 2)
        for k in range(n):
            acc = acc - out[k].sym(polys[n - k]) * ((-1) ** (n - k) * comb(n, k))
        out.append(acc)
    return CoeffSet(D, tuple(out))


def raw_from_central_collision(d_omega: CoeffSet, u, theta, atol=1e-12) -> CoeffSet:
    """Back-transform a collision increment whose orders 0 and 1 vanish.

    With ``a^(0) = a^(1) = 0`` the inverse reduces to
    ``a^(2) = theta^((D+2)/2) d^(2)``,
    ``a^(3) = theta^((D+3)/2) d^(3) + 3 sym(u a^(2))``,
    ``a^(4) = theta^((D+4)/2) d^(4) + 4 sym(u a^(3)) - 6 sym([uu + (1-theta) delta] a^(2))``.
    """
    scale = max(1.0, max(float(np.max(np.abs(t.data))) for t in d_omega))
    for n in (0, 1):
        if n <= d_omega.max_order and np.any(np.abs(d_omega[n].data) > atol * scale):
            raise ValueError(f"collision coefficients must vanish at order {n}")
    zeroed = d_omega
    for n in (0, 1):
        if n <= d_omega.max_order:
            zeroed = zeroed.replace(n, d_omega[n] * 0.0)
    return raw_from_central(zeroed, u, theta)


def equilibrium_raw_coeffs(rho, u, theta, n: int) -> SymTensor:
    """Order-``n`` laboratory coefficient of the Maxwell-Boltzmann distribution.

    ``a^(n) = rho sum_k D_n^k (theta-1)^k sym(u^(n-2k) delta^k)``
    """
    _check_order(n)
    u = _as_vec(u)
    excess = np.asarray(theta, dtype=float) - 1.0
    return _power_delta_series(n, u, lambda k: excess**k) * np.asarray(rho, dtype=float)


def equilibrium_coeffs(rho, u, theta, max_order: int) -> CoeffSet:
    u = _as_vec(u)
    return CoeffSet(
        u.shape[0], tuple(equilibrium_raw_coeffs(rho, u, theta, n) for n in range(max_order + 1))
    )
