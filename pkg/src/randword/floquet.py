"""Floquet theory for a p-periodic background potential.

Conventions: V_per(1..p) are the stored values, u_N(0) = u_D(1) = 1 and
u_N(1) = u_D(0) = 0, and the monodromy is

    g0(z) = [[u_D(p+1), u_N(p+1)], [u_D(p), u_N(p)]] = T(V(p), z) ... T(V(1), z).

Branches: on a band strip S the multiplier rho_plus is the one with
|rho_plus(lam + i eta)| < 1 for eta > 0. On the real axis this is the limit
from above, which works out to rho_plus = (D - i sgn(D') sqrt(4 - D^2)) / 2.
On the split strip S' (across a gap) rho_1 is the contracting root and rho_2
the expanding one; they are returned in the rho_plus / rho_minus slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from .errors import BranchPointError, ConvergenceError, DirichletEigenvalueError, DomainError
from .transfer import word_matrix
from .words import Word, as_word

EDGE_TOL = 1e-6
BRANCH_TOL = 1e-10
DIRICHLET_TOL = 1e-12
NEAR_AXIS = 1e-6


@dataclass(frozen=True)
class PeriodicBackground:
    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in np.atleast_1d(self.values))
        if not vals:
            raise DomainError("background needs period >= 1")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_word(cls, w) -> "PeriodicBackground":
        return cls(as_word(w).entries)

    @property
    def period(self) -> int:
        return len(self.values)

    def __call__(self, n: int) -> float:
        """V_per(n) for any integer n (V_per(1) is the first stored value)."""
        return self.values[(n - 1) % self.period]

    def as_word(self) -> Word:
        return Word(self.values)


def monodromy(bg: PeriodicBackground, z: complex) -> np.ndarray:
    return word_matrix(bg.values, z)


def monodromy_polys(bg: PeriodicBackground):
    """Entries of g0(z) as ascending coefficient arrays, built by exact
    multiplication of the degree-1 site-matrix polynomials."""
    a, b, c, d = [1.0], [0.0], [0.0], [1.0]
    for v in bg.values:
        e = [-v, 1.0]  # z - v
        a, b, c, d = (P.polysub(P.polymul(e, a), c), P.polysub(P.polymul(e, b), d), a, b)
    return [[P.polytrim(np.atleast_1d(x)) for x in row] for row in ((a, b), (c, d))]


@dataclass(frozen=True)
class DiscriminantPoly:
    """D(z) = Tr g0(z), coefficients in ascending degree."""

    coefficients: np.ndarray

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, z):
        return P.polyval(z, self.coefficients)

    def derivative(self, z):
        return P.polyval(z, P.polyder(self.coefficients))


def discriminant_poly(bg: PeriodicBackground) -> DiscriminantPoly:
    (a, _), (_, d) = monodromy_polys(bg)
    coef = P.polyadd(a, d)
    return DiscriminantPoly(np.asarray(coef, dtype=float))


def dirichlet_eigenvalues(bg: PeriodicBackground) -> np.ndarray:
    """Zeros of u_N(p+1, .): eigenvalues of the Jacobi matrix with diagonal
    V_per(2..p) and unit off-diagonals."""
    inner = np.array(bg.values[1:])
    if inner.size == 0:
        return np.array([])
    J = np.diag(inner) + np.diag(np.ones(inner.size - 1), 1) + np.diag(np.ones(inner.size - 1), -1)
    return np.linalg.eigvalsh(J)


@dataclass(frozen=True)
class BandStructure:
    discriminant: DiscriminantPoly
    edges: tuple  # all 2p roots of D^2 - 4, sorted, with multiplicity
    bands: tuple  # maximal closed intervals of the spectrum
    stability_intervals: tuple  # open intervals with |D| < 2
    degenerate_edges: tuple  # closed gaps: |D| touches 2 inside the spectrum
    gaps: tuple  # open complement of the bands, unbounded ends included

    def classify(self, lam: float, tol: float = EDGE_TOL) -> str:
        if min(abs(lam - e) for e in self.edges) <= tol:
            return "edge"
        return "band" if any(lo < lam < hi for lo, hi in self.bands) else "gap"

    def distance_to_edge(self, lam: float) -> float:
        return float(min(abs(lam - e) for e in self.edges))

    def interval_of(self, lam: float):
        for iv in self.stability_intervals:
            if iv[0] < lam < iv[1]:
                return iv
        raise DomainError(f"{lam} is not inside a stability interval")

    def gap_of(self, lam: float):
        for g in self.gaps:
            if g[0] < lam < g[1]:
                return g
        raise DomainError(f"{lam} is not inside a gap")

    def to_json(self) -> dict:
        D = self.discriminant
        return {
            "bands": [
                {"lower": lo, "upper": hi, "D_at_edges": [float(D(lo)), float(D(hi))]}
                for lo, hi in self.bands
            ],
            "degenerate_edges": list(self.degenerate_edges),
            "stability_intervals": [list(iv) for iv in self.stability_intervals],
            "discriminant_coefficients": [float(c) for c in D.coefficients],
        }


def _refine_simple(f, r, scale):
    h = 1e-7 * scale
    for _ in range(40):
        lo, hi = r - h, r + h
        if f(lo) * f(hi) <= 0:
            return brentq(f, lo, hi, xtol=1e-15, maxiter=200)
        h *= 2.0
    raise ConvergenceError(f"could not bracket band edge near {r} (residual {abs(f(r)):.3g})")


def band_structure(bg: PeriodicBackground) -> BandStructure:
    D = discriminant_poly(bg)
    p = bg.period
    scale = 2.0 + max(abs(v) for v in bg.values)
    dD = P.polyder(D.coefficients)
    edges = []
    for target in (2.0, -2.0):
        shifted = D.coefficients.copy()
        shifted[0] -= target
        raw = P.polyroots(shifted)
        if np.max(np.abs(raw.imag), initial=0.0) > 1e-4 * scale:
            raise ConvergenceError(f"non-real roots of D - {target:+g}: {raw}")
        roots = np.sort(raw.real)
        f = lambda x, s=shifted: P.polyval(x, s)
        i = 0
        while i < len(roots):
            if i + 1 < len(roots) and roots[i + 1] - roots[i] < 1e-5 * scale:
                # double root: |D| touches 2 at a critical point of D
                lo, hi = roots[i] - 1e-5 * scale, roots[i + 1] + 1e-5 * scale
                g = lambda x: P.polyval(x, dD)
                r = brentq(g, lo, hi, xtol=1e-15) if g(lo) * g(hi) < 0 else 0.5 * (roots[i] + roots[i + 1])
                edges += [r, r]
                i += 2
            else:
                edges.append(_refine_simple(f, roots[i], scale))
                i += 1
    edges = sorted(edges)
    if len(edges) != 2 * p:
        raise ConvergenceError(f"expected {2 * p} band edges, found {len(edges)}")
    for e in edges:
        if abs(abs(D(e)) - 2.0) > 1e-8:
            raise ConvergenceError(f"edge {e} has residual {abs(abs(D(e)) - 2.0):.3g}")

    intervals = [(edges[2 * i], edges[2 * i + 1]) for i in range(p)]
    degenerate = []
    merged = [list(intervals[0])]
    for lo, hi in intervals[1:]:
        if lo - merged[-1][1] <= 1e-9 * scale:
            degenerate.append(0.5 * (lo + merged[-1][1]))
            merged[-1][1] = hi
        else:
            merged.append([lo, hi])
    bands = tuple((float(lo), float(hi)) for lo, hi in merged)
    gaps = [(-math.inf, bands[0][0])]
    gaps += [(bands[i][1], bands[i + 1][0]) for i in range(len(bands) - 1)]
    gaps.append((bands[-1][1], math.inf))
    return BandStructure(
        discriminant=D,
        edges=tuple(float(e) for e in edges),
        bands=bands,
        stability_intervals=tuple((float(lo), float(hi)) for lo, hi in intervals if hi > lo),
        degenerate_edges=tuple(float(e) for e in degenerate),
        gaps=tuple(gaps),
    )


@dataclass(frozen=True)
class FloquetData:
    """Multipliers and eigenvector components at one point.

    For ``domain == "gap"`` the ``plus`` slots hold the contracting branch
    rho_1 and the ``minus`` slots the expanding branch rho_2.
    """

    z: complex
    rho_plus: complex
    rho_minus: complex
    c_plus: complex
    c_minus: complex
    domain: str

    def eigenvector(self, branch: str = "+") -> np.ndarray:
        c = self.c_plus if branch in ("+", 1, "1") else self.c_minus
        return np.array([1.0, c], dtype=complex)


def _roots(D):
    disc = D * D - 4.0
    if abs(disc) < BRANCH_TOL * max(1.0, abs(D) ** 2):
        raise BranchPointError(f"D(z) = {D:.12g} is a branch point (D^2 = 4)")
    s = np.sqrt(complex(disc))
    big = (D + s) / 2 if abs(D + s) >= abs(D - s) else (D - s) / 2
    return big, 1.0 / big


def multipliers(bg: PeriodicBackground, z: complex, domain: str = "band", g0=None):
    """(rho_plus, rho_minus) on S, or (rho_1, rho_2) on S'."""
    z = complex(z)
    g0 = monodromy(bg, z) if g0 is None else g0
    D = complex(g0[0, 0] + g0[1, 1])
    big, small = _roots(D)
    if domain == "gap":
        if abs(abs(big) - 1.0) < 1e-12:
            raise BranchPointError(f"|rho| = 1 at {z}: not in the split strip")
        return small, big
    if domain != "band":
        raise ValueError(f"unknown domain {domain!r}")
    eta = z.imag
    if abs(eta) > NEAR_AXIS:
        return (small, big) if eta > 0 else (big, small)
    # on (or very near) the real axis: limit from the upper half-plane
    Dr = D.real
    if not abs(Dr) < 2.0:
        raise DomainError(f"{z} is not over a stability interval (D = {Dr:.6g})")
    dD = discriminant_poly(bg).derivative(z).real
    sign = 1.0 if dD > 0 else -1.0
    root = np.sqrt(complex(4.0 - D * D))
    rp = (D - 1j * sign * root) / 2
    return rp, 1.0 / rp


def floquet_multipliers(bg: PeriodicBackground, z: complex, domain: str = "band") -> FloquetData:
    z = complex(z)
    g0 = monodromy(bg, z)
    rp, rm = multipliers(bg, z, domain, g0)
    A, B = g0[0, 0], g0[0, 1]
    if abs(B) < DIRICHLET_TOL:
        raise DirichletEigenvalueError(f"u_N(p+1, z) = {abs(B):.3g} at z = {z}")
    return FloquetData(z, rp, rm, (rp - A) / B, (rm - A) / B, domain)


def floquet_eigenvector(bg: PeriodicBackground, z: complex, branch: str = "+", domain: str = "band") -> np.ndarray:
    """v = (1, c)^t with g0 v = rho v."""
    fd = floquet_multipliers(bg, z, domain)
    v = fd.eigenvector(branch)
    rho = fd.rho_plus if branch in ("+", 1, "1") else fd.rho_minus
    g0 = monodromy(bg, z)
    res = np.linalg.norm(g0 @ v - rho * v)
    if res > 1e-8 * np.linalg.norm(v) * max(1.0, np.linalg.norm(g0)):
        raise BranchPointError(f"eigenvector residual {res:.3g} at z = {z}")
    return v


@dataclass(frozen=True)
class Solution:
    n: np.ndarray
    u: np.ndarray

    def __getitem__(self, k: int):
        return self.u[k - self.n[0]]


def solve_difference(V: Callable[[int], float], z: complex, init, n_min: int, n_max: int) -> Solution:
    """Solve u(n+1) + u(n-1) + V(n) u(n) = z u(n) from (u(1), u(0)) = init.

    Runs forward for n >= 1 and backward for n <= 0; n_min <= 0 < 1 <= n_max.
    """
    if n_min > 0 or n_max < 1:
        raise ValueError("range must contain 0 and 1")
    z = complex(z)
    u = np.zeros(n_max - n_min + 1, dtype=complex)
    off = -n_min
    u[1 + off], u[0 + off] = init
    for n in range(1, n_max):
        u[n + 1 + off] = (z - V(n)) * u[n + off] - u[n - 1 + off]
    for n in range(0, n_min, -1):
        u[n - 1 + off] = (z - V(n)) * u[n + off] - u[n + 1 + off]
    return Solution(np.arange(n_min, n_max + 1), u)


def wronskian(u: Solution, w: Solution) -> np.ndarray:
    """u(n+1) w(n) - w(n+1) u(n) along the common range."""
    return u.u[1:] * w.u[:-1] - w.u[1:] * u.u[:-1]


def floquet_solution(bg: PeriodicBackground, z: complex, branch: str, n_min: int, n_max: int,
                     domain: str = "band") -> Solution:
    v = floquet_eigenvector(bg, z, branch, domain)
    return solve_difference(bg, z, (v[0], v[1]), n_min, n_max)
