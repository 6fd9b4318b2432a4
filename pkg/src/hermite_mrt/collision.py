"""BGK and Hermite multiple-relaxation-time collision operators.

Populations carry the velocity index first, ``f.shape == (d, *batch)``;
every operator here is a pure per-site map, vectorized over the batch axes.

The MRT pipeline per site:

1. ``rho, u, theta`` and laboratory coefficients ``a^(n)`` of ``f``;
2. non-equilibrium part ``a1^(n) = a^(n) - a_eq^(n)``;
3. co-moving coefficients ``d1^(n)`` by the binomial transform;
4. split each ``d1^(n)`` into irreducible parts and scale part ``k`` by ``-1/tau_nk``;
5. transform the increment back to the laboratory frame;
6. rebuild ``f`` from ``a^(n) + a_omega^(n)`` (this also trims everything outside
   the Hermite span of order ``N``).

Relaxation times enter the explicit update as ``1/tau``; transport
coefficients then follow ``tau - 1/2`` (e.g. ``nu = theta0 (tau21 - 1/2)``).
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .hermite import CoeffSet, central_from_raw, equilibrium_coeffs, raw_from_central
from .irreps import IrrepParts, decompose, reassemble, scale_parts
from .symtensor import SymTensor
from .velset import VelocitySet, coeffs_from_populations, populations_from_coeffs

STABILITY_EPS = 1e-6


class CollisionError(FloatingPointError):
    """A site reached a non-physical state (non-positive density or temperature)."""

    def __init__(self, message, site=None):
        super().__init__(message)
        self.site = site


@dataclass(frozen=True)
class RelaxationSpec:
    """Relaxation times in time steps; the four higher-order rates default to ``tau32``."""

    tau21: float
    tau22: float
    tau32: float
    tau31: float | None = None
    tau41: float | None = None
    tau42: float | None = None
    tau43: float | None = None

    def __post_init__(self):
        for name in ("tau31", "tau41", "tau42", "tau43"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, self.tau32)
        for f in fields(self):
            value = float(getattr(self, f.name))
            if not value > 0:
                raise ValueError(f"{f.name} must be positive, got {value}")
            object.__setattr__(self, f.name, value)

    @classmethod
    def bgk(cls, tau):
        return cls(tau, tau, tau, tau, tau, tau, tau)

    def for_rank(self, n: int) -> tuple[float, ...]:
        return {
            2: (self.tau21, self.tau22),
            3: (self.tau31, self.tau32),
            4: (self.tau41, self.tau42, self.tau43),
        }[n]

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def check_stable(self, eps=STABILITY_EPS):
        """Reject rates with ``tau < 1/2 + eps`` (negative transport coefficients)."""
        bad = {k: v for k, v in self.as_dict().items() if v < 0.5 + eps}
        if bad:
            raise ValueError(f"relaxation times below 1/2 + {eps:g}: {bad}")
        return self


@dataclass(frozen=True, eq=False)
class MacroState:
    rho: np.ndarray
    u: np.ndarray
    theta: np.ndarray


def _first_bad(mask):
    idx = np.argwhere(mask)
    return tuple(int(i) for i in idx[0]) if len(idx) else None


def check_state(rho, theta):
    bad = ~(rho > 0)
    if np.any(bad):
        site = _first_bad(bad)
        raise CollisionError(f"non-positive density at site {site}", site)
    bad = ~(theta > 0)
    if np.any(bad):
        site = _first_bad(bad)
        raise CollisionError(f"non-positive temperature at site {site}", site)


def macro_from_populations(f, vset: VelocitySet, S: int = 0, eint=None) -> MacroState:
    """Density, velocity and total temperature.

    ``(D+S) rho theta = sum_i f_i |xi_i - u|^2 + 2 eint`` where ``eint`` is the
    internal energy per site (required when ``S > 0``).
    """
    f = np.asarray(f, dtype=float)
    xi = vset.xi
    rho = f.sum(axis=0)
    if np.any(~(rho > 0)):
        site = _first_bad(~(rho > 0))
        raise CollisionError(f"non-positive density at site {site}", site)
    u = np.tensordot(xi, f, axes=(0, 0)) / rho
    e2 = np.tensordot((xi**2).sum(axis=1), f, axes=(0, 0)) - rho * (u**2).sum(axis=0)
    if S:
        if eint is None:
            raise ValueError("internal energy required when S > 0")
        e2 = e2 + 2.0 * np.asarray(eint, dtype=float)
    theta = e2 / ((vset.dim + S) * rho)
    check_state(rho, theta)
    return MacroState(rho, u, theta)


def equilibrium_populations(m: MacroState, vset: VelocitySet, N: int = 4) -> np.ndarray:
    """Maxwell-Boltzmann equilibrium truncated at Hermite order ``N``."""
    vset.check_order(N)
    return populations_from_coeffs(equilibrium_coeffs(m.rho, m.u, m.theta, N), vset)


def bgk_collide(f, m: MacroState, vset: VelocitySet, tau: float, N: int = 4) -> np.ndarray:
    """``f - (f - f_eq)/tau``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    f = np.asarray(f, dtype=float)
    return f - (f - equilibrium_populations(m, vset, N)) / tau


def _moments(f, vset, N, theta=None):
    a = coeffs_from_populations(f, vset, N)
    rho = a[0].data[0]
    if np.any(~(rho > 0)):
        site = _first_bad(~(rho > 0))
        raise CollisionError(f"non-positive density at site {site}", site)
    u = a[1].data / rho
    if theta is None:
        D = vset.dim
        theta = (a[2].trace().data[0] + D * rho - rho * (u**2).sum(0)) / (D * rho)
    check_state(rho, theta)
    return a, MacroState(rho, u, np.asarray(theta, dtype=float))


def _noneq(a: CoeffSet, m: MacroState) -> CoeffSet:
    eq = equilibrium_coeffs(m.rho, m.u, m.theta, a.max_order)
    a1 = a - eq
    # orders 0 and 1 vanish identically; clear the round-off
    return a1.replace(0, a1[0] * 0.0).replace(1, a1[1] * 0.0)


def _relax_central(d1: CoeffSet, spec: RelaxationSpec) -> CoeffSet:
    out = [d1[0] * 0.0, d1[1] * 0.0]
    for n in range(2, d1.max_order + 1):
        factors = [-1.0 / t for t in spec.for_rank(n)]
        out.append(reassemble(scale_parts(decompose(d1[n]), factors)))
    return CoeffSet(d1.dim, tuple(out))


def mrt_increment(f, vset: VelocitySet, spec: RelaxationSpec, N: int = 4, theta=None):
    """Return ``(a, a_omega, macro)``: coefficients of ``f``, the collision increment, and state.

    ``theta`` overrides the temperature used for the equilibrium and the frame
    scaling (the total temperature when internal degrees of freedom exist).
    """
    if N < 2:
        raise ValueError("MRT collision needs N >= 2")
    vset.check_order(N)
    a, m = _moments(f, vset, N, theta)
    d1 = central_from_raw(_noneq(a, m), m.u, m.theta)
    d_omega = _relax_central(d1, spec)
    a_omega = raw_from_central(d_omega, m.u, m.theta)
    return a, a_omega, m


def restore_invariants(f_in, f_out, vset: VelocitySet, energy: bool = True) -> np.ndarray:
    """Return ``f_out`` corrected so mass, momentum (and energy) equal those of ``f_in``.

    Rounded quadrature weights satisfy the Gaussian moments only to the last
    bit, which biases every reconstruction the same way; the deficit is put
    back along ``w_i (1, xi_i, |xi_i|^2 - D)``, whose moments are exact up to
    that same rounding, leaving unbiased round-off.
    """
    xi, w, D = vset.xi, vset.weights, vset.dim
    e = 0.5 * (xi**2).sum(axis=1)
    diff = np.asarray(f_in) - np.asarray(f_out)
    d_rho = diff.sum(axis=0)
    d_j = np.tensordot(xi, diff, axes=(0, 0))
    shape = (vset.count,) + (1,) * (diff.ndim - 1)
    corr = d_rho[None] + np.tensordot(xi, d_j, axes=(1, 0))
    if energy:
        d_e = np.tensordot(e, diff, axes=(0, 0))
        corr = corr + ((d_e - 0.5 * D * d_rho) / D)[None] * (2 * e - D).reshape(shape)
    return f_out + w.reshape(shape) * corr


def mrt_collide(f, vset: VelocitySet, spec: RelaxationSpec, N: int = 4, theta=None) -> np.ndarray:
    """Post-collision populations of the Hermite MRT operator.

    Mass and momentum are restored to round-off after reconstruction, and so is
    translational energy unless ``theta`` overrides the temperature.
    """
    a, a_omega, _ = mrt_increment(f, vset, spec, N, theta)
    out = populations_from_coeffs(a + a_omega, vset)
    return restore_invariants(f, out, vset, energy=theta is None)


def irreducible_moments(f, vset: VelocitySet, N: int = 4, theta=None) -> dict:
    """Irreducible parts of the co-moving coefficients ``d^(n)`` of ``f``, keyed ``(n, k)``.

    ``k`` counts from 1 in the order of :func:`~hermite_mrt.irreps.decompose`.
    """
    vset.check_order(N)
    a, m = _moments(f, vset, N, theta)
    d = central_from_raw(a, m.u, m.theta)
    table = {}
    for n in range(2, N + 1):
        for k, part in enumerate(decompose(d[n]).parts, start=1):
            table[(n, k)] = part
    return table


def pressure_heatflux(f, vset: VelocitySet, m: MacroState):
    """Pressure tensor ``sum f c c`` and energy flux ``1/2 sum f c^2 c`` with ``c = xi - u``.

    The energy flux is only faithful on sets of degree 6 or more.
    """
    f = np.asarray(f, dtype=float)
    xi = vset.xi.reshape((vset.count, vset.dim) + (1,) * (f.ndim - 1))
    c = xi - np.asarray(m.u)[None]
    P = np.einsum("i...,ia...,ib...->ab...", f, c, c)
    q = 0.5 * np.einsum("i...,i...,ia...->a...", f, (c**2).sum(1), c)
    return SymTensor.from_full(P, 2, vset.dim), q


__all__ = [
    "RelaxationSpec",
    "MacroState",
    "CollisionError",
    "IrrepParts",
    "macro_from_populations",
    "equilibrium_populations",
    "bgk_collide",
    "mrt_increment",
    "mrt_collide",
    "restore_invariants",
    "irreducible_moments",
    "pressure_heatflux",
]
