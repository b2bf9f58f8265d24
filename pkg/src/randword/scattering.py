"""Scattering of a word insertion off a periodic background.

The composite potential is V(n) = V_per(n) for n <= 0, the inserted word
W(1..m) for 1 <= n <= m, and V_per(n - m) for n >= m + 1. The Jost solution
u_+ equals the Floquet solution phi_+ for n <= 1 and continues as
a phi_+(n - m + p) + b phi_-(n - m + p) for n >= m. Since
(phi(p+1), phi(p)) = rho v, the coefficients solve

    [rho_+ v_+ | rho_- v_-] (a, b)^t = M(W, z) v_+ .

In a gap the same construction is used with the contracting and expanding
branches rho_1, rho_2, giving (a_1, b_1) and (a_2, b_2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import ConditioningError, DegenerateInputError, DomainError, NumericError
from .floquet import (
    PeriodicBackground,
    band_structure,
    floquet_multipliers,
    monodromy,
    multipliers,
)
from .transfer import word_matrix
from .words import Word, as_word

EDGE_EXCLUSION = 1e-3
MAX_COND = 1e8
ROOT_TOL = 1e-7
GRID = 801


@dataclass(frozen=True)
class InsertionProblem:
    background: PeriodicBackground
    insertion: Word

    @classmethod
    def from_words(cls, w0, w1) -> "InsertionProblem":
        return cls(PeriodicBackground.from_word(w0), as_word(w1))

    @property
    def m(self) -> int:
        return len(self.insertion)

    def potential(self, n: int) -> float:
        if n <= 0:
            return self.background(n)
        if n <= self.m:
            return self.insertion[n - 1]
        return self.background(n - self.m)

    def is_unperturbed(self) -> bool:
        """V == V_per on all of Z (checked on one period past the insertion)."""
        return all(self.potential(n) == self.background(n) for n in range(1, self.m + self.background.period + 1))

    def require_perturbed(self):
        if self.is_unperturbed():
            raise DegenerateInputError("insertion reproduces the background (V = V_per)")


@dataclass(frozen=True)
class ScatterPoint:
    energy: complex
    a: complex
    b: complex
    residual: float  # | |a|^2 - |b|^2 - 1 |, meaningful on the real axis
    cond: float


@dataclass(frozen=True)
class GapScatterPoint:
    energy: complex
    a1: complex
    b1: complex
    a2: complex
    b2: complex
    cond: float

    @property
    def product(self) -> complex:
        return self.a1 * self.b1 * self.a2 * self.b2


def _solve(problem, z, v_in, first, second, rho_first, rho_second):
    u = word_matrix(problem.insertion, z) @ v_in
    basis = np.column_stack([rho_first * first, rho_second * second])
    cond = float(np.linalg.cond(basis))
    if not math.isfinite(cond) or cond > MAX_COND:
        raise ConditioningError(f"Floquet basis condition number {cond:.3g} at z = {z}")
    a, b = np.linalg.solve(basis, u)
    return complex(a), complex(b), cond


def band_coefficients(problem: InsertionProblem, z: complex) -> ScatterPoint:
    """a(z), b(z) for z in the strip over a stability interval."""
    fd = floquet_multipliers(problem.background, z, "band")
    vp, vm = fd.eigenvector("+"), fd.eigenvector("-")
    a, b, cond = _solve(problem, z, vp, vp, vm, fd.rho_plus, fd.rho_minus)
    return ScatterPoint(complex(z), a, b, abs(abs(a) ** 2 - abs(b) ** 2 - 1.0), cond)


def scattering_coefficients(problem: InsertionProblem, lam: float, edge_tol: float = EDGE_EXCLUSION,
                            bands=None) -> ScatterPoint:
    bands = bands or band_structure(problem.background)
    if bands.classify(lam, tol=edge_tol) != "band":
        raise DomainError(f"{lam} is not a band-interior energy (edge exclusion {edge_tol})")
    bands.interval_of(lam)
    return band_coefficients(problem, float(lam))


def minus_coefficients(problem: InsertionProblem, lam: float):
    """Coefficients of u_- in the basis (phi_-, phi_+); equal (conj a, conj b) on bands."""
    fd = floquet_multipliers(problem.background, lam, "band")
    vp, vm = fd.eigenvector("+"), fd.eigenvector("-")
    a, b, _ = _solve(problem, lam, vm, vm, vp, fd.rho_minus, fd.rho_plus)
    return a, b


def gap_coefficients(problem: InsertionProblem, z: complex) -> GapScatterPoint:
    """(a_1, b_1, a_2, b_2) on the split strip, with v_i = (1, c_i)."""
    fd = floquet_multipliers(problem.background, z, "gap")
    v1, v2 = fd.eigenvector("+"), fd.eigenvector("-")
    a1, b1, c1 = _solve(problem, z, v1, v1, v2, fd.rho_plus, fd.rho_minus)
    a2, b2, c2 = _solve(problem, z, v2, v2, v1, fd.rho_minus, fd.rho_plus)
    return GapScatterPoint(complex(z), a1, b1, a2, b2, max(c1, c2))


def _eigvec(g0, rho):
    """An eigenvector of g0 for rho without the (1, c) normalization."""
    A, B, C, D = g0[0, 0], g0[0, 1], g0[1, 0], g0[1, 1]
    v = np.array([B, rho - A])
    w = np.array([rho - D, C])
    return v if np.linalg.norm(v) >= np.linalg.norm(w) else w


def gap_product(problem: InsertionProblem, lam: float) -> float:
    """a_1 b_1 a_2 b_2 at a real gap energy.

    The product does not depend on how the Floquet eigenvectors are scaled,
    so it is evaluated in a basis that stays finite at Dirichlet eigenvalues.
    """
    bg = problem.background
    g0 = monodromy(bg, lam)
    r1, r2 = multipliers(bg, lam, "gap", g0)
    v1, v2 = _eigvec(g0, r1), _eigvec(g0, r2)
    M = word_matrix(problem.insertion, lam)
    basis = np.column_stack([r1 * v1, r2 * v2])
    a1, b1 = np.linalg.solve(basis, M @ v1)
    b2, a2 = np.linalg.solve(basis, M @ v2)
    return float((a1 * b1 * a2 * b2).real)


def _golden_min(f, x0, x1, x2, xtol=1e-12):
    res = minimize_scalar(f, bracket=(x0, x1, x2), method="golden", tol=xtol)
    return float(res.x)


def _local_minima(y):
    idx = []
    for i in range(1, len(y) - 1):
        if y[i] <= y[i - 1] and y[i] <= y[i + 1]:
            idx.append(i)
    return idx


def _dedupe(xs, tol=1e-9):
    out = []
    for x in sorted(xs):
        if not out or x - out[-1] > tol:
            out.append(x)
    return out


def find_b_roots(problem: InsertionProblem, interval, n_grid: int = GRID,
                 edge_tol: float = EDGE_EXCLUSION) -> list:
    """Zeros of b on a stability interval, located by minimizing |b|^2."""
    problem.require_perturbed()
    lo, hi = interval[0] + edge_tol, interval[1] - edge_tol
    if hi <= lo:
        return []
    grid = np.linspace(lo, hi, n_grid)

    def f(x):
        return abs(band_coefficients(problem, float(x)).b) ** 2

    vals = np.array([f(x) for x in grid])
    roots = []
    for i in _local_minima(vals):
        x = _golden_min(f, grid[i - 1], grid[i], grid[i + 1])
        x = min(max(x, lo), hi)
        if math.sqrt(f(x)) < ROOT_TOL:
            roots.append(x)
    return _dedupe(roots)


def _scan_range(gap, delta, span):
    lo, hi = gap
    if math.isinf(lo) and math.isinf(hi):
        raise DomainError("gap must have at least one finite end")
    if math.isinf(lo):
        return hi - span, hi - delta
    if math.isinf(hi):
        return lo + delta, lo + span
    return lo + delta, hi - delta


def find_gap_roots(problem: InsertionProblem, gap, n_grid: int = GRID, delta: float = EDGE_EXCLUSION,
                   span: float = 6.0) -> list:
    """Energies in a gap where a_1 b_1 a_2 b_2 vanishes.

    The product is real in a gap; sign changes are refined with Brent's
    method and touching zeros by golden-section search on |product|.
    """
    problem.require_perturbed()
    lo, hi = _scan_range(gap, delta, span)
    if hi <= lo:
        return []
    grid = np.linspace(lo, hi, n_grid)

    def f(x):
        return gap_product(problem, float(x))

    vals = []
    for x in grid:
        try:
            vals.append(f(x))
        except NumericError:
            vals.append(math.nan)
    vals = np.array(vals)
    roots = []
    for i in range(len(grid) - 1):
        y0, y1 = vals[i], vals[i + 1]
        if y0 == 0.0:
            roots.append(grid[i])
        elif np.isfinite(y0) and np.isfinite(y1) and y0 * y1 < 0:
            x = brentq(f, grid[i], grid[i + 1], xtol=1e-14, maxiter=200)
            if abs(f(x)) < ROOT_TOL:
                roots.append(x)
    absvals = np.abs(vals)
    for i in _local_minima(absvals):
        if not np.all(np.isfinite(absvals[i - 1:i + 2])):
            continue
        if vals[i - 1] * vals[i + 1] < 0:
            continue  # sign change, handled above
        x = _golden_min(lambda t: abs(f(t)), grid[i - 1], grid[i], grid[i + 1])
        x = min(max(x, lo), hi)
        if abs(f(x)) < ROOT_TOL:
            roots.append(x)
    return _dedupe(roots)
