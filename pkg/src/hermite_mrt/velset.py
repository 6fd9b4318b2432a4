"""Quadrature velocity sets and the population <-> Hermite coefficient map.

Abscissas are ``xi_i = r * c_i`` with integer lattice vectors ``c_i``.  With a
time step of one unit the grid spacing is ``r``, so streaming population ``i``
by ``c_i`` cells moves it exactly ``xi_i``.  All quantities are in the
unit-variance Hermite units of the weight function (reference temperature 1).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import mpmath
import numpy as np
from scipy.optimize import least_squares

from .hermite import CoeffSet, hermite_eval
from .symtensor import SymTensor, apply_matrix, multiplicity, ncomp


class InfeasibleQuadratureError(ValueError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class VelocitySet:
    name: str
    cvecs: np.ndarray
    weights: np.ndarray
    scale: float
    degree: int

    def __post_init__(self):
        c = np.asarray(self.cvecs)
        if c.ndim == 1:
            c = c[:, None]
        if not np.all(c == np.round(c)):
            raise ValueError("lattice vectors must be integer")
        c = c.astype(np.int64)
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (c.shape[0],):
            raise ValueError(f"{c.shape[0]} vectors but {w.shape} weights")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        c.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "cvecs", c)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "degree", int(self.degree))

    @property
    def dim(self) -> int:
        return self.cvecs.shape[1]

    @property
    def count(self) -> int:
        return self.cvecs.shape[0]

    @cached_property
    def xi(self) -> np.ndarray:
        return self.scale * self.cvecs

    @property
    def max_order(self) -> int:
        """Largest Hermite order the isomorphism supports (``2N <= Q``)."""
        return self.degree // 2

    def check_order(self, N):
        if N < 0 or 2 * N > self.degree:
            raise ValueError(
                f"order {N} needs quadrature degree {2 * N}; {self.name} has {self.degree}"
            )

    @lru_cache(maxsize=None)
    def hermite_table(self, n: int) -> np.ndarray:
        """``H^(n)(xi_i)`` components, shape ``(count, ncomp)``."""
        return hermite_eval(n, self.xi.T).data.T

    @lru_cache(maxsize=None)
    def moment_matrix(self, N: int) -> np.ndarray:
        """Stacked ``H^(n)(xi_i)`` for ``n = 0..N``; ``a = M.T @ f`` gives all coefficients."""
        return np.concatenate([self.hermite_table(n) for n in range(N + 1)], axis=1)

    @lru_cache(maxsize=None)
    def reconstruction_matrix(self, N: int) -> np.ndarray:
        """Matrix ``R`` with ``f_i = sum_c R[i, c] a_c`` (weights, multiplicities, 1/n!)."""
        blocks = []
        fact = 1.0
        for n in range(N + 1):
            if n:
                fact *= n
            blocks.append(
                self.weights[:, None] * self.hermite_table(n) * multiplicity(n, self.dim) / fact
            )
        return np.concatenate(blocks, axis=1)

    def order_slices(self, N: int) -> list[slice]:
        out, start = [], 0
        for n in range(N + 1):
            stop = start + ncomp(n, self.dim)
            out.append(slice(start, stop))
            start = stop
        return out

    def __repr__(self):
        return (
            f"VelocitySet({self.name}: D={self.dim}, d={self.count}, "
            f"Q={self.degree}, r={self.scale:.17g})"
        )


# --- quadrature checks -------------------------------------------------------


def _double_factorial(n):
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def gaussian_moment(alpha) -> float:
    """``int omega(xi) prod_j xi_j^alpha_j dxi``."""
    if any(a % 2 for a in alpha):
        return 0.0
    return float(np.prod([_double_factorial(a - 1) for a in alpha]))


def monomials(dim, max_degree):
    for deg in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), deg):
            alpha = [0] * dim
            for j in combo:
                alpha[j] += 1
            yield tuple(alpha)


@dataclass
class ValidationReport:
    degree: int
    max_defect: float
    first_failure: tuple | None = None
    failure_defect: float | None = None
    tol: float = 1e-12
    defects: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return self.first_failure is None


def validate(vset: VelocitySet, degree: int | None = None, tol: float = 1e-12) -> ValidationReport:
    """Compare quadrature sums of monomials against the Gaussian moments.

    The defect of a monomial is ``|sum_i w_i xi_i^alpha - M_alpha| / max(1, M_alpha)``;
    high even moments grow like double factorials, so the raw difference is
    scaled once it exceeds unity.
    """
    degree = vset.degree if degree is None else degree
    xi = vset.xi
    report = ValidationReport(degree=degree, max_defect=0.0, tol=tol)
    for alpha in monomials(vset.dim, degree):
        vals = vset.weights * np.prod(xi ** np.array(alpha), axis=1)
        exact = gaussian_moment(alpha)
        defect = abs(np.sum(np.sort(vals)) - exact) / max(1.0, exact)
        report.defects[alpha] = defect
        report.max_defect = max(report.max_defect, defect)
        if defect > tol and report.first_failure is None:
            report.first_failure = alpha
            report.failure_defect = defect
    return report


# --- weight derivation -------------------------------------------------------


def symmetric_closure(vectors) -> list[tuple[int, ...]]:
    """All images of the given vectors under axis permutations and sign flips."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.int64))
    out = set()
    for v in vectors:
        for perm in itertools.permutations(v.tolist()):
            for signs in itertools.product((1, -1), repeat=len(perm)):
                out.add(tuple(int(s * x) for s, x in zip(signs, perm)))
    return sorted(out, key=lambda t: (sum(x * x for x in t), tuple(-x for x in t)))


def _even_classes(dim, degree):
    # permutation classes of all-even exponent vectors
    out = []
    for deg in range(0, degree + 1, 2):
        seen = set()
        for alpha in monomials(dim, deg):
            if any(a % 2 for a in alpha):
                continue
            key = tuple(sorted(alpha, reverse=True))
            if key not in seen:
                seen.add(key)
                out.append(key)
    return out


def _polish(S, order, M, w, r, dps=40, iters=8):
    # Gauss-Newton in extended precision so the rounded weights carry no
    # systematic moment defect (double-precision LM stops near 1e-14)
    with mpmath.workdps(dps):
        Sm = mpmath.matrix([[mpmath.mpf(x) for x in row] for row in S])
        x = [mpmath.mpf(v) for v in w] + [mpmath.mpf(r)]
        G = len(w)
        for _ in range(iters):
            rr = x[G]
            F = mpmath.matrix(len(M), 1)
            J = mpmath.matrix(len(M), G + 1)
            for e in range(len(M)):
                p = int(order[e])
                acc = sum(Sm[e, g] * x[g] for g in range(G))
                F[e] = acc * rr**p / M[e] - 1
                for g in range(G):
                    J[e, g] = Sm[e, g] * rr**p / M[e]
                J[e, G] = acc * p * rr ** (p - 1) / M[e] if p else 0
            step = mpmath.lu_solve(J.T * J, -(J.T * F))
            x = [x[i] + step[i] for i in range(G + 1)]
        return np.array([float(v) for v in x[:G]]), float(x[G])


def derive_weights(groups, degree: int, r_range=(0.2, 4.0), tol=1e-10):
    """Find group weights and lattice scale that make the set exact to ``degree``.

    ``groups`` is a sequence of symmetry groups of integer vectors (a single
    representative per group is enough; each group is closed under the
    lattice symmetry).  Returns ``(group_weights, r)``.

    The moment conditions are linear in the weights for fixed ``r``; ``r`` is
    located by scanning the least-squares residual and refining jointly with
    Levenberg-Marquardt.
    """
    closed = [symmetric_closure(g) for g in groups]
    flat = [v for g in closed for v in g]
    if len(set(flat)) != len(flat):
        raise ValueError("groups overlap")
    dim = len(flat[0])
    classes = _even_classes(dim, degree)
    # S[e, g] = sum over group of the class monomial; exponents per equation
    S = np.array(
        [[sum(float(np.prod(np.array(v, float) ** np.array(cls))) for v in g) for g in closed]
         for cls in classes]
    )
    order = np.array([sum(cls) for cls in classes], dtype=float)
    M = np.array([gaussian_moment(cls) for cls in classes])
    G = len(closed)

    def linear(r):
        A = S * (r**order)[:, None] / M[:, None]
        w, *_ = np.linalg.lstsq(A, np.ones_like(M), rcond=None)
        return w, np.linalg.norm(A @ w - 1.0)

    def resid(x):
        w, r = x[:G], x[G]
        return (S * (r**order)[:, None]) @ w / M - 1.0

    def jac(x):
        w, r = x[:G], x[G]
        Jw = S * (r**order)[:, None] / M[:, None]
        Jr = (S * (order * r ** (order - 1))[:, None]) @ w / M
        return np.column_stack([Jw, Jr])

    grid = np.linspace(*r_range, 1500)
    res = np.array([linear(r)[1] for r in grid])
    starts = [grid[i] for i in range(1, len(grid) - 1) if res[i] <= res[i - 1] and res[i] <= res[i + 1]]
    starts.append(grid[np.argmin(res)])
    best = None
    for r0 in starts:
        w0, _ = linear(r0)
        fit = least_squares(
            resid, np.append(w0, r0), jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15
        )
        r = float(fit.x[G])
        if r <= 0:
            continue
        w, rn = linear(r)
        cand = (rn, r, w)
        if np.all(w > 0) and (best is None or rn < best[0] - 1e-14):
            best = cand
    if best is None or best[0] > tol:
        raise InfeasibleQuadratureError(
            f"no positive quadrature of degree {degree} for these groups",
            residual=None if best is None else best[0],
        )
    return _polish(S, order, M, best[2], best[1])


def derive_velocity_set(groups, degree: int, name: str | None = None) -> VelocitySet:
    weights, r = derive_weights(groups, degree)
    cvecs, w = [], []
    for g, wg in zip(groups, weights):
        for v in symmetric_closure(g):
            cvecs.append(v)
            w.append(wg)
    cvecs = np.array(cvecs)
    order = np.lexsort(tuple(cvecs[:, j] for j in reversed(range(cvecs.shape[1]))) + ((cvecs**2).sum(1),))
    dim = cvecs.shape[1]
    name = name or f"D{dim}Q{len(cvecs)}"
    return VelocitySet(name, cvecs[order], np.array(w)[order], r, degree)


# --- built-in sets -----------------------------------------------------------

D2Q37_GROUPS = ((0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2), (3, 0), (3, 1))


def _product_set(base: VelocitySet, dim: int, name: str) -> VelocitySet:
    cs, ws = [], []
    for combo in itertools.product(range(base.count), repeat=dim):
        cs.append([int(base.cvecs[i, 0]) for i in combo])
        ws.append(float(np.prod([base.weights[i] for i in combo])))
    return VelocitySet(name, np.array(cs), np.array(ws), base.scale, base.degree)


@lru_cache(maxsize=None)
def builtin(name: str) -> VelocitySet:
    key = name.upper()
    if key == "D1Q3":
        return VelocitySet("D1Q3", [[0], [1], [-1]], [2 / 3, 1 / 6, 1 / 6], np.sqrt(3.0), 5)
    if key == "D2Q9":
        return _product_set(builtin("D1Q3"), 2, "D2Q9")
    if key == "D2Q37":
        return derive_velocity_set(D2Q37_GROUPS, 9, name="D2Q37")
    raise KeyError(f"unknown velocity set {name!r}; built-ins: {', '.join(BUILTINS)}")


BUILTINS = ("D1Q3", "D2Q9", "D2Q37")


# --- file format -------------------------------------------------------------


def write_velocity_set(vset: VelocitySet, path) -> None:
    """Plain-text table: header ``D d Q r`` then one row per vector (components, weight)."""
    lines = [f"# velocity set {vset.name}", "# D d Q r"]
    lines.append(f"{vset.dim} {vset.count} {vset.degree} {vset.scale:.17g}")
    for c, w in zip(vset.cvecs, vset.weights):
        lines.append(" ".join(str(int(x)) for x in c) + f" {w:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_velocity_set(path, name: str | None = None) -> VelocitySet:
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows:
        raise ValueError(f"{path}: empty velocity-set file")
    try:
        D, d, Q = (int(x) for x in rows[0][:3])
        r = float(rows[0][3])
        body = rows[1:]
        if len(body) != d:
            raise ValueError(f"header declares {d} vectors, found {len(body)}")
        cvecs = [[int(x) for x in row[:D]] for row in body]
        weights = [float(row[D]) for row in body]
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}: malformed velocity-set file ({exc})") from exc
    return VelocitySet(name or Path(path).stem, cvecs, weights, r, Q)


# --- isomorphism -------------------------------------------------------------


def coeffs_from_populations(f, vset: VelocitySet, N: int) -> CoeffSet:
    """``a^(n) = sum_i f_i H^(n)(xi_i)`` for ``n <= N``.

    ``f`` has the population index first; any trailing axes become batch axes.
    """
    vset.check_order(N)
    f = np.asarray(f, dtype=float)
    if f.shape[0] != vset.count:
        raise ValueError(f"expected {vset.count} populations, got {f.shape[0]}")
    a = apply_matrix(vset.moment_matrix(N).T, f)
    return CoeffSet(
        vset.dim,
        tuple(SymTensor(n, vset.dim, a[s]) for n, s in enumerate(vset.order_slices(N))),
    )


def populations_from_coeffs(a: CoeffSet, vset: VelocitySet) -> np.ndarray:
    """``f_i = w_i sum_n a^(n) : H^(n)(xi_i) / n!``; population index first."""
    vset.check_order(a.max_order)
    if a.dim != vset.dim:
        raise ValueError("dimension mismatch")
    batch = np.broadcast_shapes(*(t.batch_shape for t in a))
    flat = np.concatenate([np.broadcast_to(t.data, t.data.shape[:1] + batch) for t in a], axis=0)
    return apply_matrix(vset.reconstruction_matrix(a.max_order), flat)


def hermite_project(f, vset: VelocitySet, N: int) -> np.ndarray:
    """Drop the part of ``f`` outside the span of Hermite polynomials up to order ``N``."""
    return populations_from_coeffs(coeffs_from_populations(f, vset, N), vset)


__all__ = [
    "VelocitySet",
    "ValidationReport",
    "InfeasibleQuadratureError",
    "validate",
    "derive_weights",
    "derive_velocity_set",
    "symmetric_closure",
    "gaussian_moment",
    "builtin",
    "BUILTINS",
    "read_velocity_set",
    "write_velocity_set",
    "coeffs_from_populations",
    "populations_from_coeffs",
    "hermite_project",
]
