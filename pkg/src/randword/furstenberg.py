"""Group criteria for positivity of the Lyapunov exponent and the
candidate exceptional energy set.

Directions in P(R^2) are represented by angles in [0, pi).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from .errors import DegenerateInputError, DomainError, ModelDegenerateError, NumericError
from .floquet import PeriodicBackground, band_structure, floquet_multipliers, monodromy_polys
from .scattering import (
    EDGE_EXCLUSION,
    InsertionProblem,
    band_coefficients,
    find_b_roots,
    find_gap_roots,
    gap_product,
)
from .transfer import word_matrix
from .words import WordModel, as_word, make_rng, words_commute

TRACE_TOL = 1e-9
SCALAR_TOL = 1e-9
FIXED_POINT_TOL = 1e-8
ANGLE_TOL = 1e-7

CLASSES = ("band_edge", "D_root", "b_root", "gap_root", "commuting_elliptic")
THRESHOLDS = {
    "band_edge": 1e-8,
    "D_root": 1e-10,
    "b_root": 1e-7,
    "gap_root": 1e-7,
    "commuting_elliptic": 1e-8,
}


@dataclass(frozen=True)
class GeneratorSet:
    matrices: tuple
    energy: float

    def __post_init__(self):
        mats = tuple(np.real_if_close(np.asarray(g, dtype=complex)).astype(float) for g in self.matrices)
        for g in mats:
            if abs(np.linalg.det(g) - 1.0) > 1e-10 * max(1.0, np.abs(g).max() ** 2):
                raise DomainError(f"generator with det {np.linalg.det(g)} is not in SL(2,R)")
        object.__setattr__(self, "matrices", mats)

    @classmethod
    def at(cls, model: WordModel, lam: float) -> "GeneratorSet":
        return cls(tuple(word_matrix(w, lam) for w in model.support()), float(lam))

    @classmethod
    def of_words(cls, words, lam: float) -> "GeneratorSet":
        return cls(tuple(word_matrix(w, lam) for w in words), float(lam))


def is_scalar(g, tol=SCALAR_TOL) -> bool:
    eye = np.eye(2)
    return np.abs(g - eye).max() < tol or np.abs(g + eye).max() < tol


def classify_matrix(g) -> str:
    if is_scalar(g):
        return "scalar"
    t = abs(np.trace(g))
    if t > 2.0 + TRACE_TOL:
        return "hyperbolic"
    if t < 2.0 - TRACE_TOL:
        return "elliptic"
    return "parabolic"


def fixed_point(g) -> complex:
    """Fixed point in the upper half-plane of an elliptic Moebius map."""
    a, b, c, d = g.ravel()
    disc = complex((a - d) ** 2 + 4 * b * c)
    z = ((a - d) + np.sqrt(disc)) / (2 * c)
    return z if z.imag > 0 else ((a - d) - np.sqrt(disc)) / (2 * c)


@dataclass(frozen=True)
class CompactnessReport:
    noncompact: bool
    certificate: str
    heuristic: bool = False
    word: Optional[tuple] = None

    def __bool__(self):
        return self.noncompact


def _products(mats, max_len):
    n = len(mats)
    if n > 6:
        max_len = min(max_len, 2)
    for length in range(1, max_len + 1):
        for word in itertools.product(range(n), repeat=length):
            g = np.eye(2)
            for i in word:
                g = mats[i] @ g
            yield word, g


def check_noncompact(gens: GeneratorSet, probe_seed=0) -> CompactnessReport:
    mats = gens.matrices
    if not mats:
        raise DegenerateInputError("need at least one generator")
    for word, g in _products(mats, 4):
        if abs(np.trace(g)) > 2.0 + TRACE_TOL:
            return CompactnessReport(True, f"|trace| = {abs(np.trace(g)):.6g} > 2", False, word)
    nonscalar = [g for g in mats if not is_scalar(g)]
    if not nonscalar:
        return CompactnessReport(False, "all generators are +-I")
    kinds = [classify_matrix(g) for g in nonscalar]
    if all(k == "elliptic" for k in kinds):
        fps = [fixed_point(g) for g in nonscalar]
        spread = max(abs(p - q) for p in fps for q in fps)
        if spread > FIXED_POINT_TOL:
            return CompactnessReport(True, f"elliptic generators with distinct fixed points (spread {spread:.3g})")
        return CompactnessReport(False, f"elliptic generators share the fixed point {fps[0]:.6g}")
    # parabolic or tolerance-ambiguous: probe norm growth of random products
    rng = make_rng(probe_seed)
    growth = 0.0
    for _ in range(10):
        g = np.eye(2)
        for i in rng.integers(0, len(mats), size=1000):
            g = mats[i] @ g
        growth = max(growth, float(np.abs(g).sum(axis=1).max()))
    return CompactnessReport(growth > 100.0, f"norm-growth probe: max norm {growth:.3g} after 1000 factors", True)


def _angle(v) -> float:
    return float(math.atan2(v[1].real, v[0].real) % math.pi)


def _angle_dist(a, b) -> float:
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


def _act(g, theta) -> float:
    return _angle(g @ np.array([math.cos(theta), math.sin(theta)]))


def real_eigendirections(g) -> list:
    if is_scalar(g):
        return []
    A, B, C, D = g.ravel()
    tr = A + D
    disc = tr * tr - 4.0
    if disc < -TRACE_TOL:
        return []
    mus = [tr / 2.0] if disc <= TRACE_TOL else [(tr + math.sqrt(disc)) / 2, (tr - math.sqrt(disc)) / 2]
    out = []
    for mu in mus:
        v = np.array([B, mu - A])
        w = np.array([mu - D, C])
        out.append(_angle(v if np.linalg.norm(v) >= np.linalg.norm(w) else w))
    return out


@dataclass(frozen=True)
class IrreducibilityReport:
    irreducible: bool
    witness: Optional[tuple] = None
    heuristic: bool = False

    def __bool__(self):
        return self.irreducible


def _preserves(g, dirs) -> bool:
    images = [_act(g, d) for d in dirs]
    return all(min(_angle_dist(im, d) for d in dirs) < ANGLE_TOL for im in images)


def _distinct(mats, tol=1e-12):
    out = []
    for g in mats:
        if all(np.abs(g - h).max() > tol for h in out):
            out.append(g)
    return out


def check_strong_irreducibility(gens: GeneratorSet) -> IrreducibilityReport:
    """Search for an invariant set of one or two directions.

    Candidates are real eigendirections of the generators and of their
    pairwise products (including squares and quotients), which covers every
    invariant set of size <= 2 for two generators.
    """
    mats = _distinct(gens.matrices)
    nonscalar = [g for g in mats if not is_scalar(g)]
    if not nonscalar:
        return IrreducibilityReport(False, (0.0,))
    if len(mats) < 2:
        return IrreducibilityReport(False, tuple(real_eigendirections(nonscalar[0])) or None)
    cands = []
    for g in nonscalar:
        cands += real_eigendirections(g)
    for g, h in itertools.product(nonscalar, repeat=2):
        cands += real_eigendirections(g @ h)
        cands += real_eigendirections(g @ np.linalg.inv(h))
    uniq = []
    for c in cands:
        if all(_angle_dist(c, u) > ANGLE_TOL for u in uniq):
            uniq.append(c)
    heuristic = len(mats) > 2
    for d in uniq:
        if all(_preserves(g, [d]) for g in nonscalar):
            return IrreducibilityReport(False, (d,), heuristic)
    for d1, d2 in itertools.combinations(uniq, 2):
        if all(_preserves(g, [d1, d2]) for g in nonscalar):
            return IrreducibilityReport(False, (d1, d2), heuristic)
    return IrreducibilityReport(True, None, heuristic)


@dataclass(frozen=True)
class ConjugatedPair:
    rotation: np.ndarray
    s: np.ndarray
    omega: float
    a: complex
    b: complex


def conjugated_pair(problem: InsertionProblem, lam: float, edge_tol: float = EDGE_EXCLUSION) -> ConjugatedPair:
    """Rotation by omega (rho_+(lam) = e^{i omega}) and the real form of the
    scattering matrix [[a, conj b], [b, conj a]].

    omega is the argument of rho_+ on the branch fixed in ``floquet``; with
    that choice tr(rotation) = D(lam), tr(s) = 2 Re a, and
    tr(rotation @ s) = tr M(w1, lam).
    """
    bands = band_structure(problem.background)
    if bands.classify(lam, tol=edge_tol) != "band":
        raise DomainError(f"{lam} is within {edge_tol} of a band edge or outside the bands")
    fd = floquet_multipliers(problem.background, lam, "band")
    omega = float(np.angle(fd.rho_plus))
    sp = band_coefficients(problem, lam)
    a, b = sp.a, sp.b
    rot = np.array([[math.cos(omega), math.sin(omega)], [-math.sin(omega), math.cos(omega)]])
    s = np.array([[(a + b).real, (a + b).imag], [-(a - b).imag, (a - b).real]])
    return ConjugatedPair(rot, s, omega, a, b)


# -- exceptional set ---------------------------------------------------------

@dataclass(frozen=True)
class ExceptionalEntry:
    energy: float
    cls: str
    residual: float
    heuristic: bool = False
    also: tuple = ()

    def to_json(self) -> dict:
        out = {"energy": self.energy, "class": self.cls, "residual": self.residual, "heuristic": self.heuristic}
        if self.also:
            out["also"] = list(self.also)
        return out


@dataclass(frozen=True)
class ExceptionalSet:
    entries: tuple
    window: tuple
    scan_failures: tuple = field(default=())

    @property
    def energies(self) -> np.ndarray:
        return np.array([e.energy for e in self.entries])

    def distance(self, lam: float) -> float:
        if not self.entries:
            return math.inf
        return float(np.min(np.abs(self.energies - lam)))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def to_json(self) -> list:
        return [e.to_json() for e in self.entries]


def _poly_matmul(X, Y):
    return [[P.polyadd(P.polymul(X[i][0], Y[0][j]), P.polymul(X[i][1], Y[1][j])) for j in range(2)]
            for i in range(2)]


def _poly_inv(X):
    # unimodular, so the inverse is the adjugate
    return [[X[1][1], -X[0][1]], [-X[1][0], X[0][0]]]


def commutator_trace_poly(w0, w1) -> np.ndarray:
    """Coefficients of tr(g0 g1 g0^-1 g1^-1) - 2 as a polynomial in the energy.

    It vanishes exactly where the two word matrices share a (possibly
    complex) eigenvector: a common real direction, or commuting elliptic
    elements.
    """
    A = monodromy_polys(PeriodicBackground.from_word(w0))
    B = monodromy_polys(PeriodicBackground.from_word(w1))
    C = _poly_matmul(_poly_matmul(_poly_matmul(A, B), _poly_inv(A)), _poly_inv(B))
    k = P.polyadd(C[0][0], C[1][1])
    k = P.polysub(k, [2.0])
    return P.polytrim(k, tol=1e-12 * max(1.0, np.abs(k).max()))


def commutator_trace(w0, w1, lam: float) -> float:
    g0, g1 = word_matrix(w0, lam).real, word_matrix(w1, lam).real
    return float(np.trace(g0 @ g1 @ np.linalg.inv(g0) @ np.linalg.inv(g1)) - 2.0)


def _kappa_roots(w0, w1, lo, hi):
    coef = commutator_trace_poly(w0, w1)
    if len(coef) <= 1:
        return []
    raw = P.polyroots(coef)
    dcoef = P.polyder(coef)
    out = []
    scale = 1.0 + max(abs(lo), abs(hi))
    for r in raw:
        if abs(r.imag) > 1e-5 * scale or not lo - 1e-6 <= r.real <= hi + 1e-6:
            continue
        x = r.real
        f = lambda t: commutator_trace(w0, w1, t)
        h = 1e-4 * scale
        if f(x - h) * f(x + h) < 0:
            x = brentq(f, x - h, x + h, xtol=1e-15)
        else:
            # even-order zero: polish on the derivative
            df = lambda t: P.polyval(t, dcoef)
            if df(x - h) * df(x + h) < 0:
                x = brentq(df, x - h, x + h, xtol=1e-15)
        if lo <= x <= hi:
            out.append(x)
    return _dedupe_sorted(out)


def _dedupe_sorted(xs, tol=1e-9):
    out = []
    for x in sorted(xs):
        if not out or x - out[-1] > tol:
            out.append(x)
    return out


def group_fails(gens: GeneratorSet):
    nc = check_noncompact(gens)
    si = check_strong_irreducibility(gens)
    return (not nc.noncompact) or (not si.irreducible), nc.heuristic or si.heuristic


def _in(window, x):
    return window[0] <= x <= window[1]


def exceptional_set(model: WordModel, w0, w1, window, n_scan: int = 2001,
                    edge_tol: float = EDGE_EXCLUSION, gap_span: float = 6.0) -> ExceptionalSet:
    """Candidate finite set of energies where the group criteria may fail.

    The background is the periodic extension of ``w0`` and the perturbation
    is ``w1``. The result is a superset candidate, not a minimal set.
    """
    w0, w1 = as_word(w0), as_word(w1)
    if words_commute(w0, w1):
        raise ModelDegenerateError(f"{w0!r} and {w1!r} commute; (NC) fails for this pair")
    if model.is_atomic:
        supp = model.support()
        if w0 not in supp or w1 not in supp:
            raise DegenerateInputError("both words must lie in the support of the model")
    else:
        model.require_atomic("exceptional_set")
    window = (float(window[0]), float(window[1]))
    problem = InsertionProblem.from_words(w0, w1)
    problem.require_perturbed()
    bands = band_structure(problem.background)
    D = bands.discriminant
    found = []  # (energy, cls, residual, heuristic)

    for e in sorted(set(bands.edges)):
        if _in(window, e):
            found.append((e, "band_edge", abs(abs(D(e)) - 2.0), False))

    for lo, hi in bands.stability_intervals:
        if D(lo) * D(hi) < 0:
            r = brentq(lambda x: D(x), lo, hi, xtol=1e-15)
            if _in(window, r):
                found.append((r, "D_root", abs(D(r)), False))
        if hi < window[0] or lo > window[1]:
            continue
        for r in find_b_roots(problem, (lo, hi), edge_tol=edge_tol):
            if _in(window, r):
                found.append((r, "b_root", abs(band_coefficients(problem, r).b), False))

    for gap in bands.gaps:
        glo = gap[0] if math.isfinite(gap[0]) else gap[1] - gap_span
        ghi = gap[1] if math.isfinite(gap[1]) else gap[0] + gap_span
        if ghi < window[0] or glo > window[1]:
            continue
        for r in find_gap_roots(problem, gap, delta=edge_tol, span=gap_span):
            if _in(window, r):
                found.append((r, "gap_root", abs(gap_product(problem, r)), False))

    supp = model.support()
    pairs = list(itertools.combinations(supp, 2))
    for u, v in pairs:
        for r in _kappa_roots(u, v, *window):
            fails, heur = group_fails(GeneratorSet.at(model, r))
            if fails:
                found.append((r, "commuting_elliptic", abs(commutator_trace(u, v, r)), heur or len(supp) > 2))

    scan_failures = []
    for lam in np.linspace(window[0], window[1], n_scan):
        try:
            fails, heur = group_fails(GeneratorSet.at(model, lam))
        except NumericError:
            continue
        if fails:
            scan_failures.append(float(lam))
    for lam in scan_failures:
        if all(abs(lam - f[0]) > 1e-6 for f in found):
            found.append((lam, "commuting_elliptic", min(abs(commutator_trace(u, v, lam)) for u, v in pairs), True))

    order = {c: i for i, c in enumerate(CLASSES)}
    found.sort(key=lambda t: (t[0], order[t[1]]))
    entries = []
    for e, cls, res, heur in found:
        if entries and abs(e - entries[-1].energy) <= 1e-8:
            prev = entries[-1]
            if cls != prev.cls and cls not in prev.also:
                entries[-1] = ExceptionalEntry(prev.energy, prev.cls, prev.residual, prev.heuristic, prev.also + (cls,))
            continue
        entries.append(ExceptionalEntry(float(e), cls, float(res), bool(heur)))
    return ExceptionalSet(tuple(entries), window, tuple(scan_failures))


def recheck_residual(entry: ExceptionalEntry, model: WordModel, w0, w1) -> float:
    """Re-evaluate the evidence for one entry directly."""
    problem = InsertionProblem.from_words(w0, w1)
    lam = entry.energy
    if entry.cls == "band_edge":
        D = band_structure(problem.background).discriminant
        return abs(abs(D(lam)) - 2.0)
    if entry.cls == "D_root":
        return abs(band_structure(problem.background).discriminant(lam))
    if entry.cls == "b_root":
        return abs(band_coefficients(problem, lam).b)
    if entry.cls == "gap_root":
        return abs(gap_product(problem, lam))
    supp = model.support()
    return min(abs(commutator_trace(u, v, lam)) for u, v in itertools.combinations(supp, 2))
