import itertools
import math

import numpy as np
import pytest

from hermite_mrt.hermite import CoeffSet, hermite_eval
from hermite_mrt.symtensor import SymTensor

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def random_symtensor(rng, rank, dim, batch=(), scale=1.0):
    full = rng.normal(size=(dim,) * rank + tuple(batch)) * scale
    return SymTensor.from_full(full, rank, dim, symmetrize=True)


def random_coeffs(rng, dim, max_order, scale=0.1, zero_low=False):
    ts = [random_symtensor(rng, n, dim, scale=scale) for n in range(max_order + 1)]
    if zero_low:
        ts[0] = ts[0] * 0.0
        ts[1] = ts[1] * 0.0
    return CoeffSet(dim, tuple(ts))


# --- oracles -------------------------------------------------------------------


def _fd_weights(order, npts, h):
    """Central finite-difference weights from the Taylor (Vandermonde) conditions."""
    offs = np.arange(npts) - npts // 2
    V = np.vander(offs * h, npts, increasing=True).T
    rhs = np.zeros(npts)
    rhs[order] = math.factorial(order)
    return offs * h, np.linalg.solve(V, rhs)


def rodrigues_fd(n, xi, h=0.1, npts=11):
    """``(-1)^n omega^{-1} d^n omega`` by tensor-product finite differences (full tensor)."""
    xi = np.asarray(xi, float)
    dim = len(xi)

    def omega(x):
        return math.exp(-0.5 * float(x @ x))

    out = np.zeros((dim,) * n)
    for idx in itertools.product(range(dim), repeat=n):
        counts = [idx.count(a) for a in range(dim)]
        axes = [a for a in range(dim) if counts[a]]
        stencils = [_fd_weights(counts[a], npts, h) for a in axes]
        total = 0.0
        for picks in itertools.product(*(range(npts) for _ in axes)):
            x = xi.copy()
            w = 1.0
            for a, (offs, wts), p in zip(axes, stencils, picks):
                x[a] += offs[p]
                w *= wts[p]
            total += w * omega(x)
        out[idx] = (-1) ** n * total / omega(xi)
    return out


def velocity_grid(dim, half_width=11.0, spacing=0.08):
    """Uniform grid and trapezoid weight for integrals against Gaussian-decaying integrands."""
    x = np.arange(-half_width, half_width + spacing / 2, spacing)
    mesh = np.stack(np.meshgrid(*([x] * dim), indexing="ij")).reshape(dim, -1)
    return mesh, spacing**dim


def omega_weight(xi):
    dim = xi.shape[0]
    return np.exp(-0.5 * (xi**2).sum(0)) / (2 * np.pi) ** (dim / 2)


def continuous_distribution(a: CoeffSet, xi):
    """``omega(xi) sum_n a^(n):H^(n)(xi)/n!`` on the points ``xi`` (shape (D, P))."""
    total = np.zeros(xi.shape[1])
    for n, t in enumerate(a):
        H = hermite_eval(n, xi)
        total += t.contract(H) / math.factorial(n) if n else t.data[0] * np.ones(xi.shape[1])
    return omega_weight(xi) * total


def direct_central(f, vset, u, theta, n):
    """``theta^{-D/2} sum_i f_i H^(n)((xi_i - u)/sqrt(theta))`` by direct summation."""
    xi = vset.xi.T
    v = (xi - np.asarray(u, float).reshape(-1, 1)) / np.sqrt(theta)
    H = hermite_eval(n, v)
    return SymTensor(n, vset.dim, (H.data @ f) * theta ** (-vset.dim / 2))
