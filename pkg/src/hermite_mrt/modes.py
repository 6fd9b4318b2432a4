"""Linear hydrodynamic mode experiments.

A small plane-wave perturbation ``exp(omega t + i k.(x - u0 t))`` is put on a
uniform base state, the Fourier amplitudes of ``(rho, u_par, u_perp, theta)``
are recorded every step, and complex frequencies are fitted and compared
with the Navier-Stokes-Fourier dispersion relations.

Units: one step is one time unit, cells are ``r`` apart, so ``k = 2 pi m / (L r)``
and all frequencies are per step.  Amplitudes are normalized by the base
state: ``rho/rho0``, ``u/sqrt(theta0)``, ``theta/theta0``.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import hankel
from scipy.optimize import brentq

from .collision import RelaxationSpec
from .solver import GasSpec, LatticeState, equilibrium_state, macro_fields, step
from .velset import VelocitySet, builtin

MODE_KINDS = ("shear", "thermal", "acoustic", "all")
MODE_NAMES = ("v", "t", "+", "-")
MAX_AMPLITUDE = 1e-3
DEFAULT_AMPLITUDE = 1e-5
CHANNELS = ("rho", "u_par", "u_perp", "theta")


# --- theory ------------------------------------------------------------------


@dataclass(frozen=True)
class Transport:
    nu: float
    nu_b: float
    kappa: float
    gamma: float
    negative: bool = False


def transport_from_relaxation(spec: RelaxationSpec, theta0: float, gas: GasSpec) -> Transport:
    """Shear and bulk viscosity, thermal diffusivity and heat-capacity ratio."""
    D, S = gas.D, gas.S
    nu = theta0 * (spec.tau21 - 0.5)
    nu_b = 2.0 * S * theta0 / (D * (D + S)) * (spec.tau22 - 0.5)
    kappa = theta0 * (spec.tau32 - 0.5)
    negative = nu < 0 or nu_b < 0 or kappa < 0
    if negative:
        warnings.warn("relaxation times below 1/2 give negative transport coefficients", stacklevel=2)
    return Transport(nu, nu_b, kappa, gas.gamma, negative)


def theoretical_dispersion(nu, nu_b, kappa, gamma, D, k, theta0=1.0) -> dict:
    """Viscous, thermal and acoustic frequencies, truncated after the ``1/Pe^2`` terms."""
    if kappa == 0:
        raise ZeroDivisionError("Peclet number undefined for zero thermal diffusivity")
    if nu <= 0 or k <= 0:
        raise ValueError("need nu > 0 and k > 0")
    cs = math.sqrt(gamma * theta0)
    pe2 = (cs / (kappa * k)) ** 2
    pr = nu / kappa
    lam = 1.0 - (2.0 - 2.0 / D + nu_b / nu) * pr
    alpha = 0.5 * (gamma - 1.0) * kappa + (D - 1.0) / D * nu + 0.5 * nu_b
    w_t = -kappa * k**2 * (1.0 + (gamma - 1.0) * lam / pe2)
    re = -alpha * k**2 * (1.0 - (gamma - 1.0) * lam / ((gamma - lam) * pe2))
    im = cs * k * (1.0 - ((gamma + lam) ** 2 - 4.0 * lam) / (8.0 * pe2))
    return {"v": complex(-nu * k**2), "t": complex(w_t), "+": complex(re, im), "-": complex(re, -im)}


def exact_dispersion(nu, nu_b, kappa, gamma, D, k, theta0=1.0) -> dict:
    """Roots of the full linearized Navier-Stokes-Fourier eigenproblem (no Pe expansion).

    State ``(rho/rho0, u_par, theta/theta0)``; longitudinal stress uses
    ``(2 - 2/D) nu + nu_b``, heat conduction ``gamma kappa`` in the temperature equation.
    """
    cv = 1.0 / (gamma - 1.0)
    nu_l = (2.0 - 2.0 / D) * nu + nu_b
    A = np.array(
        [
            [0.0, -1j * k, 0.0],
            [-1j * k * theta0, -nu_l * k**2, -1j * k * theta0],
            [0.0, -1j * k / cv, -gamma * kappa * k**2],
        ]
    )
    w = np.linalg.eigvals(A)
    order = np.argsort(np.abs(w.imag))
    t = w[order[0]]
    ac = w[order[1:]]
    plus = ac[np.argmax(ac.imag)]
    minus = ac[np.argmin(ac.imag)]
    return {"v": complex(-nu * k**2), "t": complex(t), "+": complex(plus), "-": complex(minus)}


def kappa_from_thermal(omega_t, nu, nu_b, gamma, D, k, theta0=1.0) -> float:
    """Invert the thermal-mode relation for the diffusivity ``kappa``."""
    target = -float(np.real(omega_t))

    def g(kap):
        return -theoretical_dispersion(nu, nu_b, kap, gamma, D, k, theta0)["t"].real - target

    guess = target / k**2
    return brentq(g, 0.5 * guess, 2.0 * guess)


def relative_error(measured, theoretical) -> float:
    return abs(measured - theoretical) / abs(theoretical)


# --- experiment configuration --------------------------------------------------


@dataclass
class ModeExperiment:
    grid: tuple = (100, 100)
    wave_index: tuple = (1, 0)
    kind: str = "shear"
    amplitude: float = DEFAULT_AMPLITUDE
    amplitudes: tuple | None = None
    base_flow: tuple = (0.0, 0.0)
    base_rho: float = 1.0
    base_theta: float = 1.0
    spec: RelaxationSpec = field(default_factory=lambda: RelaxationSpec(0.8, 0.8, 0.8))
    gas: GasSpec = field(default_factory=GasSpec)
    steps: int | None = None
    velset: str = "D2Q37"
    N: int = 4
    discard: int | None = None

    def __post_init__(self):
        self.grid = tuple(int(n) for n in self.grid)
        self.wave_index = tuple(int(m) for m in self.wave_index)
        self.base_flow = tuple(float(x) for x in self.base_flow)
        if self.kind not in MODE_KINDS:
            raise ValueError(f"kind must be one of {MODE_KINDS}, got {self.kind!r}")
        if len(self.grid) != self.gas.D or len(self.wave_index) != self.gas.D:
            raise ValueError("grid and wave index must have D entries")
        if len(self.base_flow) != self.gas.D:
            raise ValueError("base flow must have D entries")
        if not any(self.wave_index):
            raise ValueError("wave index must be nonzero")
        for m, n in zip(self.wave_index, self.grid):
            if 2 * abs(m) >= n:
                raise ValueError(f"wave index {self.wave_index} beyond Nyquist for grid {self.grid}")
        if abs(self.amplitude) > MAX_AMPLITUDE:
            raise ValueError(f"amplitude {self.amplitude} outside the linear regime (<= {MAX_AMPLITUDE})")
        if self.amplitudes is not None:
            self.amplitudes = tuple(float(a) for a in self.amplitudes)
            if len(self.amplitudes) != 4:
                raise ValueError("amplitudes are (rho, u_par, u_perp, theta)")
            if max(abs(a) for a in self.amplitudes) > MAX_AMPLITUDE:
                raise ValueError(f"amplitudes outside the linear regime (<= {MAX_AMPLITUDE})")

    @property
    def k_vector(self) -> np.ndarray:
        vset = builtin(self.velset) if isinstance(self.velset, str) else self.velset
        return 2 * np.pi * np.array(self.wave_index) / (np.array(self.grid) * vset.scale)

    def normalized_amplitudes(self) -> tuple:
        """``(rho/rho0, u_par/sqrt(theta0), u_perp/sqrt(theta0), theta/theta0)``."""
        if self.amplitudes is not None:
            return self.amplitudes
        a, g = self.amplitude, self.gas.gamma
        return {
            "shear": (0.0, 0.0, a, 0.0),
            # isobaric: rho theta uniform to first order
            "thermal": (-a, 0.0, 0.0, a),
            # right-running isentropic compression
            "acoustic": (a, a * math.sqrt(g), 0.0, (g - 1.0) * a),
            # density bump feeds thermal and both acoustic modes
            "all": (a, 0.0, a, 0.0),
        }[self.kind]

    def to_dict(self) -> dict:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d["velset"] = self.velset if isinstance(self.velset, str) else self.velset.name
        d["spec"] = self.spec.as_dict()
        d["gas"] = {"D": self.gas.D, "S": self.gas.S}
        for key in ("grid", "wave_index", "base_flow", "amplitudes"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


def _basis(k):
    khat = k / np.linalg.norm(k)
    if len(k) == 1:
        return khat, np.zeros(1)
    if len(k) == 2:
        return khat, np.array([-khat[1], khat[0]])
    e = np.zeros(len(k))
    e[np.argmin(np.abs(khat))] = 1.0
    perp = e - (e @ khat) * khat
    return khat, perp / np.linalg.norm(perp)


def _phase(grid, wave_index):
    """``k.x`` on the cell grid (in radians)."""
    ph = np.zeros(grid)
    for ax, (n, m) in enumerate(zip(grid, wave_index)):
        shape = [1] * len(grid)
        shape[ax] = n
        ph = ph + (2 * np.pi * m / n * np.arange(n)).reshape(shape)
    return ph


def resolve_velset(name_or_set) -> VelocitySet:
    return builtin(name_or_set) if isinstance(name_or_set, str) else name_or_set


def init_plane_wave(exp: ModeExperiment, vset: VelocitySet | None = None) -> LatticeState:
    """Local-equilibrium state carrying the configured cosine perturbation."""
    vset = resolve_velset(exp.velset if vset is None else vset)
    if vset.dim != exp.gas.D:
        raise ValueError(f"{vset.name} is {vset.dim}-dimensional, gas has D={exp.gas.D}")
    vset.check_order(exp.N)
    a_rho, a_par, a_perp, a_th = exp.normalized_amplitudes()
    khat, perp = _basis(exp.k_vector)
    wave = np.cos(_phase(exp.grid, exp.wave_index))
    s = math.sqrt(exp.base_theta)
    rho = exp.base_rho * (1.0 + a_rho * wave)
    theta = exp.base_theta * (1.0 + a_th * wave)
    du = (a_par * s) * khat + (a_perp * s) * perp
    u = np.array(exp.base_flow).reshape((-1,) + (1,) * len(exp.grid)) + du.reshape(
        (-1,) + (1,) * len(exp.grid)
    ) * wave
    return equilibrium_state(vset, rho, u, theta, exp.gas, exp.N)


def extract_amplitudes(
    state: LatticeState, wave_index, base_flow, gas: GasSpec, base_rho=1.0, base_theta=1.0
) -> np.ndarray:
    """Normalized Fourier amplitudes ``(rho, u_par, u_perp, theta)`` at ``wave_index``.

    A field ``A cos(k.x)`` yields ``A``; the Doppler phase ``exp(-i k.u0 t)`` is removed.
    """
    vset = state.vset
    grid = state.dims
    k = 2 * np.pi * np.array(wave_index) / (np.array(grid) * vset.scale)
    khat, perp = _basis(k)
    m = macro_fields(state, gas)
    kernel = np.exp(-1j * _phase(grid, wave_index)) * (2.0 / np.prod(grid))
    axes = tuple(range(len(grid)))
    u_hat = np.tensordot(m.u, kernel, axes=(tuple(a + 1 for a in axes), axes))
    s = math.sqrt(base_theta)
    amps = np.array(
        [
            np.sum(m.rho * kernel) / base_rho,
            (khat @ u_hat) / s,
            (perp @ u_hat) / s,
            np.sum(m.theta * kernel) / base_theta,
        ]
    )
    return amps * np.exp(1j * (k @ np.asarray(base_flow, dtype=float)) * state.time)


# --- frequency fitting -----------------------------------------------------------


@dataclass
class FitResult:
    omega: np.ndarray
    amplitudes: np.ndarray
    residual: float
    condition: float
    ill_conditioned: bool
    method: str


ILL_CONDITION = 1e10


def _loglinear(y, t):
    mag = np.abs(y)
    if np.any(mag == 0):
        return FitResult(np.array([np.nan + 0j]), np.array([[0j]]), np.inf, np.inf, True, "loglinear")
    phase = np.unwrap(np.angle(y))
    A = np.vstack([t, np.ones_like(t)]).T
    (re, c_re), *_ = np.linalg.lstsq(A, np.log(mag), rcond=None)
    (im, c_im), *_ = np.linalg.lstsq(A, phase, rcond=None)
    omega = complex(re, im)
    amp = np.exp(complex(c_re, c_im))
    model = amp * np.exp(omega * t)
    residual = float(np.linalg.norm(y - model) / np.linalg.norm(y))
    cond = float(np.linalg.cond(A))
    # aliasing: adjacent samples must not turn by more than a right angle
    bad = bool(np.any(np.abs(np.angle(y[1:] / y[:-1])) > np.pi / 2)) or not np.isfinite(residual)
    return FitResult(np.array([omega]), np.array([[amp]]), residual, cond, bad, "loglinear")


def _pencil(Y, t, M):
    """Multichannel matrix pencil on uniformly spaced samples ``t``."""
    C, n = Y.shape
    dt = t[1] - t[0]
    L = max(M, n // 3)
    H = np.vstack([hankel(y[: n - L], y[n - L - 1 :]) for y in Y])
    _, s, vh = np.linalg.svd(H, full_matrices=False)
    V = vh[:M].T
    z = np.linalg.eigvals(np.linalg.pinv(V[:-1]) @ V[1:])
    omega = np.log(z.astype(complex)) / dt
    vander = np.exp(np.outer(t - t[0], omega))
    amps, *_ = np.linalg.lstsq(vander, Y.T, rcond=None)
    model = vander @ amps
    residual = float(np.linalg.norm(Y.T - model) / max(np.linalg.norm(Y), 1e-300))
    cond = float(s[0] / s[M - 1]) if s[M - 1] > 0 else np.inf
    bad = cond > ILL_CONDITION or not np.all(np.isfinite(omega))
    amps = amps.T * np.exp(-omega * t[0])[:, None]
    return FitResult(omega, amps, residual, cond, bool(bad), "pencil")


def fit_frequencies(series, mode_count: int = 1, t=None, method: str = "auto") -> FitResult:
    """Fit ``sum_j A_j exp(omega_j t)`` to one or more channels sharing frequencies.

    ``series`` has shape ``(n,)`` or ``(channels, n)``; ``t`` defaults to ``0..n-1``
    and must be uniformly spaced.  One mode on one channel uses a log-linear
    least-squares fit; otherwise a matrix pencil.  Amplitudes are returned per
    channel at ``t = 0``.  ``ill_conditioned`` marks fits that should not be trusted.
    """
    Y = np.atleast_2d(np.asarray(series, dtype=complex))
    n = Y.shape[1]
    if n < 4 * mode_count + 4:
        raise ValueError(f"need at least {4 * mode_count + 4} samples for {mode_count} modes, got {n}")
    t = np.arange(n, dtype=float) if t is None else np.asarray(t, dtype=float)
    if t.shape != (n,) or not np.allclose(np.diff(t), t[1] - t[0]):
        raise ValueError("sample times must be uniformly spaced")
    if method == "auto":
        method = "loglinear" if mode_count == 1 and Y.shape[0] == 1 else "pencil"
    if method == "loglinear":
        if mode_count != 1 or Y.shape[0] != 1:
            raise ValueError("log-linear fit handles a single mode on a single channel")
        return _loglinear(Y[0], t)
    if method != "pencil":
        raise ValueError(f"unknown method {method!r}")
    return _pencil(Y, t, mode_count)


# --- running ---------------------------------------------------------------------------


@dataclass
class DispersionResult:
    measured: dict
    theoretical: dict
    rel_error: dict
    transport: Transport
    k: float
    fits: dict = field(default_factory=dict)
    series: np.ndarray | None = field(default=None, repr=False)
    times: np.ndarray | None = field(default=None, repr=False)

    def summary(self, exp: ModeExperiment | None = None) -> dict:
        def c(z):
            return None if z is None else [z.real, z.imag]

        out = {
            "k": self.k,
            "transport": asdict(self.transport),
            "measured": {m: c(self.measured.get(m)) for m in MODE_NAMES},
            "theoretical": {m: c(self.theoretical.get(m)) for m in MODE_NAMES},
            "rel_error": {m: self.rel_error.get(m) for m in MODE_NAMES},
            "fits": self.fits,
        }
        if exp is not None:
            out["config"] = exp.to_dict()
        return out


def default_discard(spec: RelaxationSpec, floor: int = 100) -> int:
    """Steps for kinetic (non-hydrodynamic) transients to fall below 1e-10.

    A kinetic moment with rate ``1/tau`` is multiplied by ``|1 - 1/tau|`` per step.
    """
    worst = max(abs(1.0 - 1.0 / t) for t in spec.as_dict().values())
    if worst <= 0:
        return floor
    return max(floor, int(math.ceil(math.log(1e-10) / math.log(worst))))


def default_steps(exp: ModeExperiment) -> int:
    return 1000 if exp.kind == "shear" else 2000


def _decimation(n, max_rate, target=400):
    stride = max(1, n // target)
    if max_rate > 0:
        stride = min(stride, max(1, int(math.pi / (2.0 * max_rate))))
    return stride


def _excited(amps, tol=1e-6):
    mags = np.abs(amps).max(axis=1)
    return mags > tol * mags.max()


def analyze_series(exp: ModeExperiment, times, series) -> DispersionResult:
    """Fit the recorded amplitude history and compare with theory."""
    vset = resolve_velset(exp.velset)
    tr = transport_from_relaxation(exp.spec, exp.base_theta, exp.gas)
    kvec = 2 * np.pi * np.array(exp.wave_index) / (np.array(exp.grid) * vset.scale)
    k = float(np.linalg.norm(kvec))
    theory = theoretical_dispersion(tr.nu, tr.nu_b, tr.kappa, tr.gamma, exp.gas.D, k, exp.base_theta)
    discard = default_discard(exp.spec) if exp.discard is None else exp.discard
    keep = times >= discard
    if keep.sum() < 20:
        raise ValueError(f"only {keep.sum()} samples left after discarding {discard} steps")
    t, y = times[keep], series[:, keep]
    a_rho, a_par, a_perp, a_th = exp.normalized_amplitudes()
    measured, fits = {}, {}
    if a_perp:
        stride = _decimation(len(t), 0.0)
        res = fit_frequencies(y[2, ::stride], 1, t[::stride])
        measured["v"] = complex(res.omega[0])
        fits["v"] = {"residual": res.residual, "condition": res.condition, "ill": res.ill_conditioned}
    if a_rho or a_par or a_th:
        cs_k = math.sqrt(tr.gamma * exp.base_theta) * k
        stride = _decimation(len(t), 1.5 * cs_k)
        Y = y[[0, 1, 3], ::stride]
        res = fit_frequencies(Y, 3, t[::stride])
        on = _excited(res.amplitudes)
        for w, ok in zip(res.omega, on):
            if not ok:
                continue
            if abs(w.imag) < 0.5 * cs_k:
                measured["t"] = complex(w)
            elif w.imag > 0:
                measured["+"] = complex(w)
            else:
                measured["-"] = complex(w)
        fits["longitudinal"] = {
            "residual": res.residual,
            "condition": res.condition,
            "ill": res.ill_conditioned,
            "stride": stride,
        }
    errors = {m: relative_error(measured[m], theory[m]) for m in measured}
    return DispersionResult(measured, theory, errors, tr, k, fits, series, times)


def run_mode_experiment(exp: ModeExperiment, csv_path=None, progress=None) -> DispersionResult:
    """Initialize, run, record amplitudes every step, fit, compare."""
    vset = resolve_velset(exp.velset)
    spec = exp.spec.check_stable()
    state = init_plane_wave(exp, vset)
    steps = default_steps(exp) if exp.steps is None else int(exp.steps)
    rows = np.empty((4, steps + 1), dtype=complex)
    for n in range(steps + 1):
        if n:
            try:
                state = step(state, spec, exp.gas, exp.N)
            except FloatingPointError as err:
                raise RuntimeError(f"simulation blew up at step {n}: {err}") from err
        rows[:, n] = extract_amplitudes(
            state, exp.wave_index, exp.base_flow, exp.gas, exp.base_rho, exp.base_theta
        )
        if not np.all(np.isfinite(rows[:, n])):
            raise RuntimeError(f"simulation blew up at step {n}: non-finite amplitudes")
        if progress is not None:
            progress(n, steps)
    times = np.arange(steps + 1, dtype=float)
    if csv_path is not None:
        write_amplitude_csv(csv_path, times, rows)
    return analyze_series(exp, times, rows)


def write_amplitude_csv(path, times, series):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step"] + [f"{c}_{p}" for c in CHANNELS for p in ("re", "im")])
        for n, t in enumerate(times):
            vals = []
            for c in range(4):
                vals += [f"{series[c, n].real:.17g}", f"{series[c, n].imag:.17g}"]
            w.writerow([int(t)] + vals)


def read_amplitude_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    times = data[:, 0]
    series = data[:, 1::2] + 1j * data[:, 2::2]
    return times, series.T


def write_summary(path, result: DispersionResult, exp: ModeExperiment | None = None):
    Path(path).write_text(json.dumps(result.summary(exp), indent=2))


__all__ = [
    "Transport",
    "transport_from_relaxation",
    "theoretical_dispersion",
    "exact_dispersion",
    "kappa_from_thermal",
    "relative_error",
    "ModeExperiment",
    "DispersionResult",
    "FitResult",
    "init_plane_wave",
    "extract_amplitudes",
    "fit_frequencies",
    "analyze_series",
    "run_mode_experiment",
    "write_amplitude_csv",
    "read_amplitude_csv",
    "write_summary",
]
