"""Periodic-grid driver: state, streaming, time stepping, checkpoints.

Populations are stored structure-of-arrays, ``f.shape == (d, *dims)``, so
streaming is one bulk periodic shift per velocity.  With internal degrees of
freedom (``S > 0``) a second array ``g`` of the same shape carries the
internal energy and streams with the same lattice vectors.

Internal-energy exchange.  The total temperature ``theta`` follows from
``(D+S) rho theta = sum_i f_i |xi_i - u|^2 + 2 sum_i g_i``.  ``f`` is collided
by the MRT operator against the equilibrium at the total ``theta``, so the
trace of its second-order nonequilibrium moment (translational minus
equipartition energy) relaxes with ``tau22``.  ``g`` is updated as

    g' = g - (g - g_star)/tau32 - (g_star - g_eq)/tau22,
    g_star = (E_int/rho) f_eq,   g_eq = (S theta/2) f_eq,

which relaxes the internal energy flux with ``tau32`` and returns exactly the
energy ``f`` gives up, so total energy is conserved per site.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .collision import (
    CollisionError,
    MacroState,
    RelaxationSpec,
    check_state,
    equilibrium_populations,
    macro_from_populations,
    mrt_collide,
    mrt_increment,
    restore_invariants,
)
from .velset import VelocitySet, populations_from_coeffs

CHECKPOINT_MAGIC = b"HMRTCKP1"


@dataclass(frozen=True)
class GasSpec:
    D: int = 2
    S: int = 0

    def __post_init__(self):
        if self.D < 1:
            raise ValueError("D must be positive")
        if self.S < 0:
            raise ValueError("S must be nonnegative")

    @property
    def gamma(self) -> float:
        return 1.0 + 2.0 / (self.D + self.S)


@dataclass(eq=False)
class LatticeState:
    vset: VelocitySet
    f: np.ndarray
    g: np.ndarray | None = None
    time: int = 0

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        if self.f.shape[0] != self.vset.count or self.f.ndim != self.vset.dim + 1:
            raise ValueError(
                f"populations must have shape ({self.vset.count}, *dims) with {self.vset.dim} grid axes"
            )
        if self.g is not None:
            self.g = np.asarray(self.g, dtype=float)
            if self.g.shape != self.f.shape:
                raise ValueError("g must match the shape of f")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.f.shape[1:]

    def copy(self) -> LatticeState:
        return LatticeState(
            self.vset, self.f.copy(), None if self.g is None else self.g.copy(), self.time
        )


def _shift(a, cvecs):
    out = np.empty_like(a)
    axes = tuple(range(a.ndim - 1))
    for i, c in enumerate(cvecs):
        out[i] = np.roll(a[i], tuple(int(x) for x in c), axis=axes)
    return out


def stream(state: LatticeState) -> LatticeState:
    """Move population ``i`` from cell ``x`` to ``(x + c_i) mod dims``."""
    c = state.vset.cvecs
    g = None if state.g is None else _shift(state.g, c)
    return replace(state, f=_shift(state.f, c), g=g)


def _site_error(err: CollisionError, state: LatticeState):
    raise CollisionError(f"step {state.time}: {err}", err.site) from err


def internal_energy_exchange(f, g, vset: VelocitySet, spec: RelaxationSpec, gas: GasSpec, N: int = 4):
    """Collide ``f`` and ``g`` together; returns ``(f', g')``.

    See the module docstring for the update.  Raises :class:`CollisionError`
    if any site has negative internal energy.
    """
    if gas.S <= 0:
        raise ValueError("internal energy exchange needs S > 0")
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    eint = g.sum(axis=0)
    bad = eint < 0
    if np.any(bad):
        site = tuple(int(i) for i in np.argwhere(bad)[0])
        raise CollisionError(f"negative internal energy at site {site}", site)
    m = macro_from_populations(f, vset, gas.S, eint)
    a, a_omega, m = mrt_increment(f, vset, spec, N, theta=m.theta)
    f_out = restore_invariants(f, populations_from_coeffs(a + a_omega, vset), vset, energy=False)
    feq = equilibrium_populations(m, vset, N)
    g_star = feq * (eint / m.rho)
    g_eq = feq * (0.5 * gas.S * m.theta)
    g_out = g - (g - g_star) / spec.tau32 - (g_star - g_eq) / spec.tau22
    # total energy to round-off: the residual goes to g along the weights
    e = 0.5 * (vset.xi**2).sum(axis=1)
    d_e = np.tensordot(e, f - f_out, axes=(0, 0)) + (g - g_out).sum(axis=0)
    g_out = g_out + vset.weights.reshape((-1,) + (1,) * (g.ndim - 1)) * d_e[None]
    return f_out, g_out


def collide(state: LatticeState, spec: RelaxationSpec, gas: GasSpec, N: int = 4) -> LatticeState:
    vset = state.vset
    try:
        if gas.S:
            if state.g is None:
                raise ValueError("state has no internal-energy populations but S > 0")
            f, g = internal_energy_exchange(state.f, state.g, vset, spec, gas, N)
        else:
            f, g = mrt_collide(state.f, vset, spec, N), None
    except CollisionError as err:
        _site_error(err, state)
    return replace(state, f=f, g=g)


def step(state: LatticeState, spec: RelaxationSpec, gas: GasSpec, N: int = 4) -> LatticeState:
    """One collide-and-stream update; returns a new state one step later."""
    out = stream(collide(state, spec, gas, N))
    out.time = state.time + 1
    return out


def run(state, spec, gas, N=4, steps=1, callback=None) -> LatticeState:
    """Advance ``steps`` steps; ``callback(state)`` sees every state including the first."""
    if callback is not None:
        callback(state)
    for _ in range(steps):
        state = step(state, spec, gas, N)
        if callback is not None:
            callback(state)
    return state


def macro_fields(state: LatticeState, gas: GasSpec) -> MacroState:
    """Density, velocity ``(D, *dims)`` and total temperature on the grid."""
    eint = None if state.g is None else state.g.sum(axis=0)
    return macro_from_populations(state.f, state.vset, gas.S, eint)


def equilibrium_state(vset: VelocitySet, rho, u, theta, gas: GasSpec, N: int = 4, time=0):
    """State at local equilibrium with the given fields (``u`` has shape ``(D, *dims)``)."""
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    check_state(rho, theta)
    m = MacroState(rho, np.asarray(u, dtype=float), theta)
    feq = equilibrium_populations(m, vset, N)
    g = feq * (0.5 * gas.S * theta) if gas.S else None
    return LatticeState(vset, feq, g, time)


def conserved_totals(state: LatticeState) -> dict:
    """Global mass, momentum and total energy (translational plus internal)."""
    xi = state.vset.xi
    axes = tuple(range(1, state.f.ndim))
    per_pop = state.f.sum(axis=axes)
    out = {
        "mass": float(per_pop.sum()),
        "momentum": [float(x) for x in xi.T @ per_pop],
        "energy": float(0.5 * ((xi**2).sum(axis=1) @ per_pop)),
    }
    if state.g is not None:
        out["energy"] += float(state.g.sum())
    return out


# --- checkpoints -------------------------------------------------------------


def save_checkpoint(path, state: LatticeState, N: int, S: int):
    """Header: magic, ndim, dims, d, N, S, step (little-endian int64); body: f then g as <f8."""
    header = [state.f.ndim - 1, *state.dims, state.vset.count, N, S, state.time]
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack(f"<{len(header)}q", *header))
        fh.write(np.ascontiguousarray(state.f, dtype="<f8").tobytes())
        if S:
            fh.write(np.ascontiguousarray(state.g, dtype="<f8").tobytes())


@dataclass
class Checkpoint:
    state: LatticeState
    N: int
    S: int
    meta: dict = field(default_factory=dict)


def load_checkpoint(path, vset: VelocitySet) -> Checkpoint:
    raw = Path(path).read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    pos = 8
    (ndim,) = struct.unpack_from("<q", raw, pos)
    pos += 8
    vals = struct.unpack_from(f"<{ndim + 4}q", raw, pos)
    pos += 8 * (ndim + 4)
    dims, (d, N, S, time) = tuple(vals[:ndim]), vals[ndim:]
    if d != vset.count:
        raise ValueError(f"{path}: checkpoint has {d} populations, {vset.name} has {vset.count}")
    size = d * int(np.prod(dims))
    expected = pos + 8 * size * (2 if S else 1)
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    f = np.frombuffer(raw, "<f8", size, pos).reshape((d, *dims)).astype(float)
    g = None
    if S:
        g = np.frombuffer(raw, "<f8", size, pos + 8 * size).reshape((d, *dims)).astype(float)
    return Checkpoint(LatticeState(vset, f, g, time), N, S, {"dims": dims})


__all__ = [
    "GasSpec",
    "LatticeState",
    "stream",
    "collide",
    "step",
    "run",
    "internal_energy_exchange",
    "macro_fields",
    "equilibrium_state",
    "conserved_totals",
    "save_checkpoint",
    "load_checkpoint",
    "Checkpoint",
]
