"""Words, word measures and sampling of anchored random potentials.

A potential is built by concatenating i.i.d. words drawn from a measure
``nu`` on finite real vectors. The origin n = 0 sits at position ``k`` of the
zeroth word, and the pair (length of the zeroth word, k) is drawn from the
size-biased law P(|w_0| = j, k) = nu_j / <L> for 1 <= k <= j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, UnsupportedModeError

WEIGHT_TOL = 1e-12

# (rng, n_words) -> (flat potential values, word lengths)
Sampler = Callable[[np.random.Generator, int], "tuple[np.ndarray, np.ndarray]"]


def make_rng(seed=None, *keys: int) -> np.random.Generator:
    """Generator for ``seed``, optionally split off by integer counters.

    Streams derived from the same root with different ``keys`` are
    independent, and do not depend on how work is later scheduled.
    """
    if isinstance(seed, np.random.Generator):
        if keys:
            raise TypeError("cannot split an existing Generator by keys")
        return seed
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(keys))
    else:
        ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class Word:
    entries: tuple

    def __post_init__(self):
        entries = tuple(float(x) for x in np.ravel(np.asarray(self.entries, dtype=float)))
        if len(entries) < 1:
            raise ConfigError("a word needs at least one entry")
        if not all(math.isfinite(x) for x in entries):
            raise ConfigError("word entries must be finite")
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __add__(self, other: "Word") -> "Word":
        return concat_words(self, other)

    def scaled(self, lam: float) -> "Word":
        return Word(tuple(lam * x for x in self.entries))

    def as_array(self) -> np.ndarray:
        return np.array(self.entries)

    def __repr__(self):
        return "Word(" + ", ".join(f"{x:g}" for x in self.entries) + ")"


def as_word(w) -> Word:
    return w if isinstance(w, Word) else Word(tuple(np.atleast_1d(w)))


def concat_words(w1: Word, w2: Word) -> Word:
    return Word(as_word(w1).entries + as_word(w2).entries)


def words_commute(w0: Word, w1: Word) -> bool:
    w0, w1 = as_word(w0), as_word(w1)
    return (w0 + w1) == (w1 + w0)


@dataclass(frozen=True)
class NcReport:
    holds: bool
    witness: Optional[tuple] = None


@dataclass(frozen=True)
class WordModel:
    """Probability measure on words of length <= ``max_length``.

    Atomic models list ``(Word, weight)`` pairs. A sampler-backed model
    (``sampler`` set, no atoms) supports Monte-Carlo work only and needs the
    length distribution ``length_probs`` for the anchor law.
    """

    atoms: tuple = ()
    max_length: Optional[int] = None
    bound: Optional[float] = None
    sampler: Optional[Sampler] = field(default=None, compare=False, repr=False)
    length_probs: Optional[tuple] = None
    sampler_tag: Optional[str] = None

    def __post_init__(self):
        atoms = tuple((as_word(w), float(p)) for w, p in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if self.sampler is None:
            self._validate_atomic(atoms)
        else:
            self._validate_sampler()

    def _validate_atomic(self, atoms):
        if not atoms:
            raise ConfigError("model needs at least one atom", path="atoms")
        for i, (w, p) in enumerate(atoms):
            if not (p >= 0.0) or not math.isfinite(p):
                raise ConfigError(f"weight must be nonnegative, got {p}", path=f"atoms[{i}].weight")
        total = sum(p for _, p in atoms)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ConfigError(f"weights sum to {total!r}, not 1", path="atoms")
        m = self.max_length if self.max_length is not None else max(len(w) for w, _ in atoms)
        k = self.bound
        if k is None:
            k = max(max(abs(x) for x in w) for w, _ in atoms) or 1.0
        if int(m) != m or m < 1:
            raise ConfigError("max_length must be a positive integer", path="max_length")
        if not k > 0:
            raise ConfigError("bound must be positive", path="bound")
        for i, (w, _) in enumerate(atoms):
            if len(w) > m:
                raise ConfigError(f"word length {len(w)} exceeds max_length {m}", path=f"atoms[{i}].word")
            if max(abs(x) for x in w) > k:
                raise ConfigError(f"entry exceeds bound {k}", path=f"atoms[{i}].word")
        object.__setattr__(self, "max_length", int(m))
        object.__setattr__(self, "bound", float(k))

    def _validate_sampler(self):
        if self.atoms:
            raise ConfigError("a sampler-backed model cannot also list atoms")
        if self.length_probs is None:
            raise ConfigError("sampler-backed model needs length_probs", path="length_probs")
        probs = tuple(float(p) for p in self.length_probs)
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > WEIGHT_TOL:
            raise ConfigError("length_probs must be nonnegative and sum to 1", path="length_probs")
        object.__setattr__(self, "length_probs", probs)
        object.__setattr__(self, "max_length", self.max_length or len(probs))
        if self.bound is None or not self.bound > 0:
            raise ConfigError("sampler-backed model needs a positive bound", path="bound")

    @property
    def is_atomic(self) -> bool:
        return self.sampler is None

    def require_atomic(self, what="this operation"):
        if not self.is_atomic:
            raise UnsupportedModeError(f"{what} needs an atomic word measure (got sampler {self.sampler_tag!r})")

    def support(self) -> list:
        self.require_atomic("support enumeration")
        return [w for w, p in self.atoms if p > 0]

    def length_weights(self) -> np.ndarray:
        """nu_j = nu(W_j) for j = 1..max_length."""
        if not self.is_atomic:
            out = np.zeros(self.max_length)
            out[: len(self.length_probs)] = self.length_probs
            return out
        out = np.zeros(self.max_length)
        for w, p in self.atoms:
            out[len(w) - 1] += p
        return out

    def expected_length(self) -> float:
        nu = self.length_weights()
        return float(np.dot(np.arange(1, len(nu) + 1), nu))

    # -- sampling ---------------------------------------------------------

    def _table(self):
        t = self.__dict__.get("_cached_table")
        if t is None:
            ws = [w for w, _ in self.atoms]
            lens = np.array([len(w) for w in ws])
            flat = np.concatenate([w.as_array() for w in ws])
            starts = np.concatenate([[0], np.cumsum(lens)[:-1]])
            probs = np.array([p for _, p in self.atoms])
            t = (lens, starts, flat, probs / probs.sum())
            object.__setattr__(self, "_cached_table", t)
        return t

    def draw_indices(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Indices into ``atoms`` of ``n`` i.i.d. nu-distributed words."""
        self.require_atomic("atom index sampling")
        lens, starts, flat, probs = self._table()
        return rng.choice(len(probs), size=n, p=probs)

    def draw_values(self, rng: np.random.Generator, n: int):
        """Concatenated values and lengths of ``n`` i.i.d. words."""
        if not self.is_atomic:
            values, lengths = self.sampler(rng, n)
            return np.asarray(values, dtype=float), np.asarray(lengths, dtype=int)
        idx = self.draw_indices(rng, n)
        return self.values_of(idx), self._table()[0][idx]

    def values_of(self, idx: np.ndarray) -> np.ndarray:
        lens, starts, flat, _ = self._table()
        ln = lens[idx]
        total = int(ln.sum())
        ends = np.cumsum(ln)
        pos = np.arange(total) - np.repeat(ends - ln, ln) + np.repeat(starts[idx], ln)
        return flat[pos]

    def draw_anchor(self, rng: np.random.Generator, offset: Optional[int] = None):
        """Zeroth word and the position k of the origin inside it.

        Without ``offset`` the pair is drawn from the size-biased law; with it,
        the law is conditioned on k = offset.
        """
        nu = self.length_weights()
        j_all = np.arange(1, len(nu) + 1)
        if offset is None:
            q = j_all * nu
        else:
            q = np.where(j_all >= offset, nu, 0.0)
            if q.sum() <= 0:
                raise ConfigError(f"no word of length >= offset {offset}")
        j = int(rng.choice(j_all, p=q / q.sum()))
        k = int(rng.integers(1, j + 1)) if offset is None else int(offset)
        if self.is_atomic:
            lens, starts, flat, probs = self._table()
            pj = np.where(lens == j, probs, 0.0)
            i = int(rng.choice(len(pj), p=pj / pj.sum()))
            return self.atoms[i][0], k
        while True:
            values, lengths = self.sampler(rng, 1)
            if int(lengths[0]) == j:
                return Word(tuple(values)), k


def check_nc(model: WordModel) -> NcReport:
    """Search the support for a pair of words whose two concatenations differ."""
    supp = model.support()
    for i in range(len(supp)):
        for j in range(i + 1, len(supp)):
            if not words_commute(supp[i], supp[j]):
                return NcReport(True, (supp[i], supp[j]))
    return NcReport(False, None)


def expected_length(model: WordModel) -> float:
    return model.expected_length()


@dataclass(frozen=True)
class PotentialWindow:
    """Potential values on the index range [n_min, n_min + len(values) - 1].

    ``boundaries`` holds the absolute index of the first site of every word
    that starts inside the window, so word- and site-level estimators can
    walk the same path.
    """

    n_min: int
    values: np.ndarray
    anchor_offset: int
    anchor_word: Word
    boundaries: np.ndarray

    @property
    def n_max(self) -> int:
        return self.n_min + len(self.values) - 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def __getitem__(self, n: int) -> float:
        if not self.n_min <= n <= self.n_max:
            raise IndexError(n)
        return float(self.values[n - self.n_min])

    def reversed(self) -> np.ndarray:
        return self.values[::-1].copy()


def sample_potential(model: WordModel, seed, window: Sequence[int], offset: Optional[int] = None) -> PotentialWindow:
    """Draw V_(omega,k)(n) for n in ``window`` = (n_min, n_max)."""
    n_min, n_max = int(window[0]), int(window[1])
    if n_max < n_min:
        raise ConfigError("empty window")
    rng = make_rng(seed)
    w0, k = model.draw_anchor(rng, offset)
    first, last = 1 - k, len(w0) - k
    L = model.expected_length()

    right_vals, right_lens = [np.array([])], [np.array([], dtype=int)]
    covered = last
    while covered < n_max:
        n = int((n_max - covered) / L) + 8
        v, ln = model.draw_values(rng, n)
        right_vals.append(v)
        right_lens.append(ln)
        covered += int(ln.sum())

    left_vals, left_lens = [], []
    reach = first
    while reach > n_min:
        n = int((reach - n_min) / L) + 8
        v, ln = model.draw_values(rng, n)
        # drawn words are omega_{-1}, omega_{-2}, ... so reverse word order
        ends = np.cumsum(ln)
        pieces = [v[e - l:e] for e, l in zip(ends, ln)]
        left_vals.append(np.concatenate(pieces[::-1]))
        left_lens.append(ln[::-1])
        reach -= int(ln.sum())

    left = np.concatenate(left_vals[::-1]) if left_vals else np.array([])
    left_ln = np.concatenate(left_lens[::-1]) if left_lens else np.array([], dtype=int)
    right = np.concatenate(right_vals)
    right_ln = np.concatenate(right_lens)

    values = np.concatenate([left, w0.as_array(), right])
    start = first - len(left)
    lengths = np.concatenate([left_ln, [len(w0)], right_ln]).astype(int)
    starts = start + np.concatenate([[0], np.cumsum(lengths)[:-1]])

    lo = n_min - start
    vals = values[lo:lo + (n_max - n_min + 1)]
    inside = starts[(starts >= n_min) & (starts <= n_max)]
    return PotentialWindow(n_min, vals.copy(), k, w0, inside)


# -- the five model families -------------------------------------------------

EXAMPLE_KINDS = {
    "anderson": "i.i.d. single-site values; params: values [, probs] or low/high for a uniform law",
    "single_site": "coupling constants times a fixed word; params: word, couplings [, probs]",
    "displacement": "bump f shifted inside length-ell words; params: f, ell [, probs]",
    "dimer": "words (lam, lam) and (-lam, -lam); params: lam [, p]",
    "polymer": "two arbitrary words; params: w0, w1 [, p]",
}


def _probs(probs, n, name="probs"):
    if probs is None:
        return [1.0 / n] * n
    probs = [float(p) for p in probs]
    if len(probs) != n:
        raise ConfigError(f"expected {n} probabilities, got {len(probs)}", path=name)
    return probs


def _uniform_sampler(low, high):
    def sampler(rng, n):
        return rng.uniform(low, high, size=n), np.ones(n, dtype=int)

    return sampler


def make_example(kind: str, **params) -> WordModel:
    try:
        builder = _BUILDERS[kind]
    except KeyError:
        raise ConfigError(f"unknown example kind {kind!r}; valid: {', '.join(EXAMPLE_KINDS)}", path="kind")
    try:
        return builder(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {kind}: {exc}", path="params") from None


def _anderson(values=None, probs=None, low=None, high=None):
    if values is None:
        if low is None or high is None or not high > low:
            raise ConfigError("uniform anderson needs low < high", path="params")
        bound = max(abs(low), abs(high)) or 1.0
        return WordModel(
            sampler=_uniform_sampler(float(low), float(high)),
            length_probs=(1.0,),
            max_length=1,
            bound=bound,
            sampler_tag=f"uniform[{low:g},{high:g}]",
        )
    values = list(values)
    p = _probs(probs, len(values))
    return WordModel(tuple((Word((v,)), q) for v, q in zip(values, p)), max_length=1)


def _single_site(word, couplings, probs=None):
    w = as_word(word)
    p = _probs(probs, len(couplings))
    return WordModel(tuple((w.scaled(c), q) for c, q in zip(couplings, p)))


def _displacement(f, ell, probs=None):
    f = list(f)
    m = len(f)
    if not 0 < m < ell:
        raise ConfigError(f"displacement needs 0 < len(f) < ell, got {m}, {ell}", path="params")
    shifts = ell - m + 1
    p = _probs(probs, shifts)
    atoms = []
    for d in range(shifts):
        w = [0.0] * ell
        w[d:d + m] = f
        atoms.append((Word(tuple(w)), p[d]))
    return WordModel(tuple(atoms))


def _dimer(lam, p=0.5):
    if not lam > 0:
        raise ConfigError("dimer needs lam > 0", path="params.lam")
    if not 0 <= p <= 1:
        raise ConfigError("dimer needs 0 <= p <= 1", path="params.p")
    return WordModel(((Word((lam, lam)), p), (Word((-lam, -lam)), 1.0 - p)))


def _polymer(w0, w1, p=0.5):
    return WordModel(((as_word(w0), p), (as_word(w1), 1.0 - p)))


_BUILDERS = {
    "anderson": _anderson,
    "single_site": _single_site,
    "displacement": _displacement,
    "dimer": _dimer,
    "polymer": _polymer,
}
