"""The suspension shift over i.i.d. words, renewal sequences and empirical
mixing / measure-preservation experiments.

A point (omega, k) is a two-sided word sequence with the origin n = 0 at
position k (1-based) inside the zeroth word. T moves the origin one site
right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular, toeplitz

from .errors import ConfigError, DegenerateInputError, WindowError
from .words import Word, WordModel, as_word, make_rng

WEIGHT_TOL = 1e-12


# -- suspension points -------------------------------------------------------

@dataclass(frozen=True)
class OmegaPoint:
    """Words omega_{-W'} .. omega_{W''} stored left to right; ``origin``
    is the list position of omega_0."""

    words: tuple
    origin: int
    k: int

    def __post_init__(self):
        words = tuple(as_word(w) for w in self.words)
        object.__setattr__(self, "words", words)
        if not 0 <= self.origin < len(words):
            raise WindowError("origin outside the word window")
        if not 1 <= self.k <= len(words[self.origin]):
            raise ConfigError(f"offset k={self.k} outside 1..{len(words[self.origin])}")

    @property
    def zeroth(self) -> Word:
        return self.words[self.origin]

    def word(self, i: int) -> Word:
        j = self.origin + i
        if not 0 <= j < len(self.words):
            raise WindowError(f"word {i} outside the window")
        return self.words[j]

    def site_value(self, n: int) -> float:
        """V_(omega,k)(n); site 0 is the k-th entry of omega_0."""
        pos = self.k - 1 + n
        j = self.origin
        while pos < 0:
            j -= 1
            if j < 0:
                raise WindowError("site left of the window")
            pos += len(self.words[j])
        while pos >= len(self.words[j]):
            pos -= len(self.words[j])
            j += 1
            if j >= len(self.words):
                raise WindowError("site right of the window")
        return self.words[j][pos]


def shift_T(pt: OmegaPoint) -> OmegaPoint:
    if pt.k < len(pt.zeroth):
        return OmegaPoint(pt.words, pt.origin, pt.k + 1)
    if pt.origin + 1 >= len(pt.words):
        raise WindowError("no word to the right of the window")
    return OmegaPoint(pt.words, pt.origin + 1, 1)


def shift_T_inv(pt: OmegaPoint) -> OmegaPoint:
    if pt.k > 1:
        return OmegaPoint(pt.words, pt.origin, pt.k - 1)
    if pt.origin == 0:
        raise WindowError("no word to the left of the window")
    return OmegaPoint(pt.words, pt.origin - 1, len(pt.words[pt.origin - 1]))


def sample_point(model: WordModel, rng, left: int, right: int) -> OmegaPoint:
    """Draw (omega, k) from the suspension measure with ``left``/``right``
    extra words around omega_0."""
    rng = make_rng(rng)
    w0, k = model.draw_anchor(rng)
    idx_r = model.draw_indices(rng, right)
    idx_l = model.draw_indices(rng, left)
    atoms = [w for w, _ in model.atoms]
    words = [atoms[i] for i in idx_l[::-1]] + [w0] + [atoms[i] for i in idx_r]
    return OmegaPoint(tuple(words), left, k)


# -- renewal arithmetic ------------------------------------------------------

def _validate_weights(weights) -> np.ndarray:
    nu = np.asarray(weights, dtype=float)
    if nu.ndim != 1 or len(nu) == 0:
        raise ConfigError("length weights must be a nonempty list", path="weights")
    if np.any(nu < 0) or not np.all(np.isfinite(nu)):
        bad = int(np.argmax(~(nu >= 0)))
        raise ConfigError("length weights must be nonnegative", path=f"weights[{bad}]")
    if abs(nu.sum() - 1.0) > WEIGHT_TOL:
        raise ConfigError(f"length weights sum to {nu.sum()!r}, not 1", path="weights")
    return nu


def support_gcd(weights) -> int:
    nu = _validate_weights(weights)
    return reduce(math.gcd, (j + 1 for j in np.flatnonzero(nu > 0)))


def mean_length(weights) -> float:
    nu = _validate_weights(weights)
    return float(np.dot(np.arange(1, len(nu) + 1), nu))


@dataclass(frozen=True)
class RenewalSequence:
    values: np.ndarray  # A_0 .. A_L
    weights: np.ndarray  # nu_1 .. nu_m
    gcd: int

    @property
    def mean_length(self) -> float:
        return float(np.dot(np.arange(1, len(self.weights) + 1), self.weights))

    def cesaro(self) -> np.ndarray:
        return cesaro_mean(self.values[1:])


def renewal_sequence(weights, L: int) -> RenewalSequence:
    """A_l = sum_j nu_j A_{l-j}, A_0 = 1: the total weight of ordered
    compositions of l into word lengths."""
    nu = _validate_weights(weights)
    if L < 1:
        raise ConfigError("L must be >= 1", path="L")
    A = np.zeros(L + 1)
    A[0] = 1.0
    m = len(nu)
    for ell in range(1, L + 1):
        j = min(m, ell)
        A[ell] = np.dot(nu[:j], A[ell - 1::-1][:j])
    return RenewalSequence(A, nu, support_gcd(nu))


def generating_coefficients(weights, L: int) -> np.ndarray:
    """Taylor coefficients c_0..c_L of 1 + f/(1 - f), f(z) = sum_j nu_j z^j.

    Obtained by power-series division, i.e. a lower-triangular Toeplitz
    solve of (1 - f) * g = f. The constant 1 is added so that index 0 lines
    up with the convention A_0 = 1.
    """
    nu = _validate_weights(weights)
    f = np.zeros(L + 1)
    m = min(len(nu), L)
    f[1:m + 1] = nu[:m]
    den = -f.copy()
    den[0] += 1.0
    T = toeplitz(den, np.zeros(L + 1))
    g = solve_triangular(T, f, lower=True)
    g[0] += 1.0
    return g


def phi_at_one(weights) -> float:
    """Limit of A_l when the support lengths are coprime: 1 / <L>."""
    return 1.0 / mean_length(weights)


def rescaled_weights(weights):
    """(D, nu~) with nu~_i = nu_{iD}, D the gcd of the length support."""
    nu = _validate_weights(weights)
    D = support_gcd(nu)
    return D, nu[D - 1::D].copy()


def cesaro_mean(seq) -> np.ndarray:
    s = np.asarray(seq, dtype=float)
    if s.size == 0:
        raise ConfigError("cesaro_mean of an empty sequence")
    return np.cumsum(s) / np.arange(1, len(s) + 1)


# -- cylinders ---------------------------------------------------------------

@dataclass(frozen=True)
class Cylinder:
    """Constraints omega_i in ``words[i]`` on finitely many coordinates, an
    optional length for omega_0, and an optional origin offset k."""

    words: dict = field(default_factory=dict)
    k: Optional[int] = None
    length: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "words", {int(i): frozenset(as_word(w) for w in ws)
                                           for i, ws in dict(self.words).items()})

    def __hash__(self):
        return hash((tuple(sorted((i, tuple(sorted(map(tuple, ws)))) for i, ws in self.words.items())),
                     self.k, self.length))

    @property
    def span(self):
        idx = list(self.words) + [0]
        return min(idx), max(idx)

    def contains(self, pt: OmegaPoint) -> bool:
        if self.k is not None and pt.k != self.k:
            return False
        if self.length is not None and len(pt.zeroth) != self.length:
            return False
        return all(pt.word(i) in ws for i, ws in self.words.items())

    def _masks(self, model: WordModel):
        """Per-coordinate boolean masks over atom indices."""
        atoms = [w for w, _ in model.atoms]
        lens = np.array([len(w) for w in atoms])
        out = {}
        for i, ws in self.words.items():
            out[i] = np.array([w in ws for w in atoms])
        m0 = out.get(0, np.ones(len(atoms), bool))
        if self.length is not None:
            m0 = m0 & (lens == self.length)
        if self.k is not None:
            m0 = m0 & (lens >= self.k)
        out[0] = m0
        return out


def cylinder_probability(model: WordModel, cyl: Cylinder) -> float:
    """Exact suspension measure of a cylinder for an atomic model."""
    model.require_atomic("cylinder_probability")
    probs = np.array([p for _, p in model.atoms])
    lens = np.array([len(w) for w, _ in model.atoms])
    masks = cyl._masks(model)
    L = model.expected_length()
    p0 = probs * masks[0]
    base = float(p0.sum()) / L if cyl.k is not None else float(np.dot(p0, lens)) / L
    for i, m in masks.items():
        if i != 0:
            base *= float(probs[m].sum())
    return base


# -- vectorized orbit sampling -----------------------------------------------

@dataclass(frozen=True)
class _Orbits:
    idx: np.ndarray  # atom index per (trial, word); column `origin` is omega_0
    ends: np.ndarray  # cumulative lengths from the start of omega_0
    origin: int
    k: np.ndarray


def _sample_orbits(model: WordModel, rng, trials: int, left: int, right: int) -> _Orbits:
    model.require_atomic("orbit sampling")
    lens, _, _, probs = model._table()
    q = probs * lens
    i0 = rng.choice(len(probs), size=trials, p=q / q.sum())
    k = np.floor(rng.random(trials) * lens[i0]).astype(int) + 1
    idx = np.empty((trials, left + 1 + right), dtype=int)
    idx[:, left] = i0
    if right:
        idx[:, left + 1:] = rng.choice(len(probs), size=(trials, right), p=probs)
    if left:
        idx[:, :left] = rng.choice(len(probs), size=(trials, left), p=probs)
    ends = np.cumsum(lens[idx[:, left:]], axis=1)
    return _Orbits(idx, ends, left, k)


def _membership(model, cyl: Cylinder, orb: _Orbits, word_col: np.ndarray, k: np.ndarray) -> np.ndarray:
    masks = cyl._masks(model)
    rows = np.arange(len(k))
    ok = np.ones(len(k), bool) if cyl.k is None else (k == cyl.k)
    lens = model._table()[0]
    for i, m in masks.items():
        col = word_col + i
        ok &= m[orb.idx[rows, col]]
    if cyl.length is not None:
        ok &= lens[orb.idx[rows, word_col]] == cyl.length
    return ok


def _advance(orb: _Orbits, ell: int):
    """Word column and offset of T^ell applied to every trial."""
    pos = orb.k + ell  # 1-based position counted from the start of omega_0
    j = (orb.ends < pos[:, None]).sum(axis=1)
    start = np.where(j > 0, orb.ends[np.arange(len(pos)), np.maximum(j - 1, 0)], 0)
    return orb.origin + j, pos - start


@dataclass(frozen=True)
class MixingRow:
    ell: int
    empirical: float
    target: float
    stderr: float

    @property
    def z(self) -> float:
        return (self.empirical - self.target) / self.stderr if self.stderr > 0 else (
            0.0 if self.empirical == self.target else math.inf)


@dataclass(frozen=True)
class MixingTable:
    rows: tuple
    p_a: float
    p_b: float
    trials: int

    def within(self, n_sigma: float = 3.0, ells=None) -> bool:
        return all(abs(r.z) <= n_sigma for r in self.rows if ells is None or r.ell in ells)


def mixing_experiment(model: WordModel, cyl_a: Cylinder, cyl_b: Cylinder, ells, trials: int,
                      seed=None, min_trials: int = 10_000) -> MixingTable:
    """Empirical P(T^-l A intersect B) against P(A) P(B) for each l.

    The error bar is the binomial standard error of the empirical frequency.
    """
    if trials < min_trials:
        raise ConfigError(f"trials must be >= {min_trials}", path="trials")
    p_a, p_b = cylinder_probability(model, cyl_a), cylinder_probability(model, cyl_b)
    if p_a == 0 or p_b == 0:
        raise DegenerateInputError("cylinder of zero measure")
    ells = [int(e) for e in ells]
    rng = make_rng(seed)
    min_len = int(min(model._table()[0]))
    a_lo, a_hi = cyl_a.span
    b_lo, b_hi = cyl_b.span
    right = max(ells) // min_len + a_hi + b_hi + 2
    left = max(0, -a_lo, -b_lo)
    orb = _sample_orbits(model, rng, trials, left, right)
    in_b = _membership(model, cyl_b, orb, np.full(trials, orb.origin), orb.k)
    rows = []
    for ell in ells:
        col, kk = _advance(orb, ell)
        hit = in_b & _membership(model, cyl_a, orb, col, kk)
        p = float(hit.mean())
        se = math.sqrt(max(p * (1 - p), 1.0 / trials) / trials)
        target = p_a * p_b
        rows.append(MixingRow(ell, p, target, se))
    return MixingTable(tuple(rows), p_a, p_b, trials)


@dataclass(frozen=True)
class PreservationReport:
    exact: float
    preimage: float
    direct: float
    stderr: float

    @property
    def passed(self) -> bool:
        return abs(self.preimage - self.exact) <= 3.0 * self.stderr or self.preimage == self.exact


def check_measure_preserving(model: WordModel, cyl: Cylinder, trials: int, seed=None,
                             min_trials: int = 10_000) -> PreservationReport:
    """Frequency of T x in M against the exact measure of M."""
    if trials < min_trials:
        raise ConfigError(f"trials must be >= {min_trials}", path="trials")
    rng = make_rng(seed)
    lo, hi = cyl.span
    orb = _sample_orbits(model, rng, trials, max(0, -lo), hi + 2)
    col, kk = _advance(orb, 1)
    pre = _membership(model, cyl, orb, col, kk).mean()
    direct = _membership(model, cyl, orb, np.full(trials, orb.origin), orb.k).mean()
    exact = cylinder_probability(model, cyl)
    se = math.sqrt(exact * (1 - exact) / trials)
    return PreservationReport(exact, float(pre), float(direct), se)
