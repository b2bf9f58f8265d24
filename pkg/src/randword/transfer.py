"""Transfer matrices and Monte-Carlo Lyapunov exponents.

The site matrix T(a, z) = [[z - a, -1], [1, 0]] maps (u(n), u(n-1)) to
(u(n+1), u(n)) for u(n+1) + u(n-1) + a u(n) = z u(n). Word matrices are the
right-to-left products over a word's entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .words import WordModel, as_word, make_rng, sample_potential

RENORM_EVERY = 32
N_BATCHES = 50
ZERO_FLOOR = 1e-2


def site_matrix(a: float, z: complex) -> np.ndarray:
    return np.array([[z - a, -1.0], [1.0, 0.0]], dtype=complex)


def word_matrix(w, z: complex) -> np.ndarray:
    """M(w, z) = T(w(j), z) ... T(w(1), z)."""
    a, b, c, d = _word_product(np.asarray(as_word(w).entries), complex(z))
    return np.array([[a, b], [c, d]])


@numba.njit(cache=True)
def _word_product(values, z):
    a = 1.0 + 0j
    b = 0j
    c = 0j
    d = 1.0 + 0j
    for n in range(values.shape[0]):
        e = z - values[n]
        a, b, c, d = e * a - c, e * b - d, a, b
    return a, b, c, d


@numba.njit(cache=True)
def _cumulative_log_norms(values, z, checkpoints, renorm):
    """ln ||T(v_n)...T(v_1)|| at each checkpoint n (row-sum norm).

    The running product is rescaled to unit norm every ``renorm`` factors
    and at every checkpoint; the discarded scale is accumulated in log form.
    """
    a = 1.0 + 0j
    b = 0j
    c = 0j
    d = 1.0 + 0j
    acc = 0.0
    out = np.empty(checkpoints.shape[0])
    ci = 0
    since = 0
    ncp = checkpoints.shape[0]
    for n in range(values.shape[0]):
        e = z - values[n]
        a, b, c, d = e * a - c, e * b - d, a, b
        since += 1
        at_cp = ci < ncp and n + 1 == checkpoints[ci]
        if since >= renorm or at_cp:
            s = max(abs(a) + abs(b), abs(c) + abs(d))
            a /= s
            b /= s
            c /= s
            d /= s
            acc += math.log(s)
            since = 0
        while ci < ncp and n + 1 == checkpoints[ci]:
            out[ci] = acc
            ci += 1
    return out


def cumulative_log_norms(values, z, checkpoints, renorm_every=RENORM_EVERY) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=float)
    checkpoints = np.ascontiguousarray(checkpoints, dtype=np.int64)
    if np.any(np.diff(checkpoints) < 0) or (len(checkpoints) and checkpoints[-1] > len(values)):
        raise ValueError("checkpoints must be nondecreasing and inside the product")
    return _cumulative_log_norms(values, complex(z), checkpoints, int(renorm_every))


@dataclass(frozen=True)
class LyapunovEstimate:
    energy: complex
    value: float
    stderr: float
    steps: int
    kind: str  # "word" (gamma_0) or "site" (gamma)

    @property
    def is_zero(self) -> bool:
        return abs(self.value) < max(ZERO_FLOOR, 3.0 * self.stderr)


def _batch_estimate(cum_logs, step_counts, z, kind, steps):
    """Total rate plus batch-means error from cumulative log norms."""
    total = float(cum_logs[-1]) / steps
    incr = np.diff(np.concatenate([[0.0], cum_logs]))
    sizes = np.diff(np.concatenate([[0], step_counts]))
    rates = incr / sizes
    nb = len(rates)
    stderr = float(np.std(rates, ddof=1) / math.sqrt(nb)) if nb > 1 else math.inf
    return LyapunovEstimate(complex(z), total, stderr, int(steps), kind)


def _batch_edges(n, n_batches):
    nb = max(1, min(n_batches, n))
    return np.linspace(0, n, nb + 1).astype(np.int64)[1:]


def estimate_gamma0(model: WordModel, z: complex, n_words: int, seed=None,
                    n_batches: int = N_BATCHES, renorm_every: int = RENORM_EVERY) -> LyapunovEstimate:
    """Word-level exponent: (1/N) ln ||M(w_N, z) ... M(w_1, z)|| for i.i.d. nu-words."""
    if n_words < 1:
        raise ValueError("n_words must be >= 1")
    rng = make_rng(seed)
    values, lengths = model.draw_values(rng, n_words)
    ends = np.cumsum(lengths)
    word_cp = _batch_edges(n_words, n_batches)
    cum = cumulative_log_norms(values, z, ends[word_cp - 1], renorm_every)
    return _batch_estimate(cum, word_cp, z, "word", n_words)


def estimate_gamma(model: WordModel, z: complex, n_sites: int, seed=None,
                   n_batches: int = N_BATCHES, renorm_every: int = RENORM_EVERY,
                   offset: Optional[int] = None) -> LyapunovEstimate:
    """Site-level exponent along an anchored path V_(omega,k)(1..n)."""
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    pot = sample_potential(model, seed, (1, n_sites), offset=offset)
    cp = _batch_edges(n_sites, n_batches)
    cum = cumulative_log_norms(pot.values, z, cp, renorm_every)
    return _batch_estimate(cum, cp, z, "site", n_sites)


@dataclass(frozen=True)
class IdentityReport:
    gamma0: LyapunovEstimate
    gamma: LyapunovEstimate
    expected_length: float
    ratio: float
    deviation: float
    combined_stderr: float
    passed: bool
    vacuous: bool

    @property
    def precise(self) -> bool:
        """Both error bars below 5% of their values."""
        return (self.gamma0.stderr < 0.05 * abs(self.gamma0.value)
                and self.gamma.stderr < 0.05 * abs(self.gamma.value))


def _child_seeds(seed, n):
    if isinstance(seed, np.random.Generator):
        return [int(x) for x in seed.integers(0, 2**63 - 1, size=n)]
    return [make_rng(seed, i) for i in range(n)]


def verify_length_identity(model: WordModel, z: complex, budget: int, seed=None) -> IdentityReport:
    """Check gamma_0 = <L> gamma with independent word and site estimates.

    ``budget`` is the number of sites; the word estimate uses budget / <L> words
    so both see the same amount of potential.
    """
    L = model.expected_length()
    s0, s1 = _child_seeds(seed, 2)
    g0 = estimate_gamma0(model, z, max(1, int(round(budget / L))), s0)
    g = estimate_gamma(model, z, int(budget), s1)
    dev = g0.value - L * g.value
    comb = math.hypot(g0.stderr, L * g.stderr)
    vacuous = g0.is_zero and g.is_zero
    ratio = g0.value / g.value if g.value != 0 else math.nan
    passed = vacuous or abs(dev) <= 3.0 * comb
    return IdentityReport(g0, g, L, ratio, dev, comb, passed, vacuous)


@dataclass(frozen=True)
class GammaCurve:
    """Site Lyapunov exponent sampled on a real energy grid."""

    energies: np.ndarray
    values: np.ndarray
    stderr: np.ndarray

    def __call__(self, e):
        return np.interp(e, self.energies, self.values)


def gamma_curve(model: WordModel, energies, n_sites: int, seed=None, kind="site") -> GammaCurve:
    """Per-energy estimates, each with its own counter-derived stream."""
    energies = np.asarray(energies, dtype=float)
    vals = np.empty(len(energies))
    errs = np.empty(len(energies))
    for i, e in enumerate(energies):
        s = make_rng(seed, i) if not isinstance(seed, np.random.Generator) else seed
        if kind == "site":
            est = estimate_gamma(model, e, n_sites, s)
        else:
            est = estimate_gamma0(model, e, n_sites, s)
        vals[i], errs[i] = est.value, est.stderr
    return GammaCurve(energies, vals, errs)
