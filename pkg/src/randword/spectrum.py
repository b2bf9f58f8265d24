"""Finite-box diagonalization, eigenfunction decay, wave-packet moments,
integrated density of states and the Thouless formula.

Boxes are [1..N] with Dirichlet boundary: H is symmetric tridiagonal with
the potential on the diagonal and ones off it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal, eigvalsh_tridiagonal

from .errors import BoxTooSmallError, ConfigError, ConvergenceError, InsufficientDataError
from .transfer import GammaCurve
from .words import WordModel, make_rng, sample_potential

MAX_BOX = 10_000
EDGE_MARGIN = 0.1
EXCLUDE_RADIUS = 0.05
BLOCK = 10
MIN_BLOCKS = 20
BOUNDARY_WEIGHT = 1e-6
BOUNDARY_SITES = 10


@dataclass(frozen=True)
class FiniteBox:
    potential: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.potential, dtype=float)
        if v.ndim != 1 or len(v) < 1:
            raise ConfigError("potential must be a nonempty 1-d array")
        object.__setattr__(self, "potential", v)

    @property
    def size(self) -> int:
        return len(self.potential)

    @classmethod
    def sample(cls, model: WordModel, size: int, seed=None, offset: Optional[int] = None) -> "FiniteBox":
        return cls(sample_potential(model, seed, (1, size), offset=offset).values)

    @classmethod
    def free(cls, size: int) -> "FiniteBox":
        return cls(np.zeros(size))

    def matrix(self) -> np.ndarray:
        N = self.size
        return np.diag(self.potential) + np.eye(N, k=1) + np.eye(N, k=-1)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = self.potential[:, None] * psi if psi.ndim == 2 else self.potential * psi
        out = out.astype(np.result_type(psi, float))
        out[1:] += psi[:-1]
        out[:-1] += psi[1:]
        return out

    def reversed(self) -> "FiniteBox":
        return FiniteBox(self.potential[::-1])


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues ascending; eigenvectors are the columns of ``vectors``."""

    values: np.ndarray
    vectors: Optional[np.ndarray]
    box: FiniteBox

    def __len__(self):
        return len(self.values)

    def residuals(self) -> np.ndarray:
        r = self.box.apply(self.vectors) - self.vectors * self.values
        return np.linalg.norm(r, axis=0)


def _check_size(box):
    if box.size > MAX_BOX:
        raise ConfigError(f"box size {box.size} exceeds {MAX_BOX}")


def diagonalize(box: FiniteBox, select=None, vectors: bool = True) -> Spectrum:
    """Full (or energy-window) symmetric tridiagonal eigendecomposition.

    ``select`` = (lo, hi) restricts to eigenvalues in the half-open window.
    """
    _check_size(box)
    off = np.ones(box.size - 1)
    kw = {} if select is None else {"select": "v", "select_range": tuple(select)}
    try:
        if vectors:
            w, v = eigh_tridiagonal(box.potential, off, **kw)
        else:
            w, v = eigvalsh_tridiagonal(box.potential, off, **kw), None
    except LinAlgError as exc:
        raise ConvergenceError(f"tridiagonal eigensolver failed: {exc}") from exc
    return Spectrum(w, v, box)


# -- decay rates -------------------------------------------------------------

def _log_profile(potential, E):
    """log|u(n)|, n = 1..len, for u(0) = 0, u(1) = 1 at energy E.

    Recursing inward from a Dirichlet end follows the growing direction, so
    this reproduces the eigenfunction flank far below machine precision of
    the normalized eigenvector.
    """
    n = len(potential)
    out = np.empty(n)
    u_prev, u = 0.0, 1.0
    acc = 0.0
    for i in range(n):
        out[i] = acc + math.log(abs(u)) if u != 0.0 else -np.inf
        u_next = (E - potential[i]) * u - u_prev
        u_prev, u = u, u_next
        s = max(abs(u), abs(u_prev))
        if s > 1e100 or (s < 1e-100 and s > 0):
            u_prev, u = u_prev / s, u / s
            acc += math.log(s)
    return out


def _envelope_fit(logs, block=BLOCK):
    """Slope and R^2 of a line through per-block maxima of a log profile."""
    nb = len(logs) // block
    if nb < MIN_BLOCKS:
        return math.nan, math.nan
    env = logs[:nb * block].reshape(nb, block).max(axis=1)
    x = (np.arange(nb) + 0.5) * block
    ok = np.isfinite(env)
    x, env = x[ok], env[ok]
    if len(x) < MIN_BLOCKS:
        return math.nan, math.nan
    slope, icpt = np.polyfit(x, env, 1)
    fit = slope * x + icpt
    ss = float(np.sum((env - env.mean()) ** 2))
    r2 = 1.0 - float(np.sum((env - fit) ** 2)) / ss if ss > 0 else 1.0
    return float(slope), r2


@dataclass(frozen=True)
class EigenDecay:
    energy: float
    centroid: float
    left_rate: float
    right_rate: float
    r2: float

    @property
    def rate(self) -> float:
        return 0.5 * (self.left_rate + self.right_rate)


@dataclass(frozen=True)
class DecayBin:
    lo: float
    hi: float
    count: int
    median_rate: float
    gamma: float

    @property
    def rel_error(self) -> float:
        return abs(self.median_rate - self.gamma) / self.gamma if self.gamma > 0 else math.inf


@dataclass(frozen=True)
class DecayReport:
    eigen: tuple
    bins: tuple

    def max_rel_error(self) -> float:
        return max(b.rel_error for b in self.bins)

    def within(self, tol: float) -> bool:
        return all(b.rel_error <= tol for b in self.bins)

    def to_json(self) -> dict:
        return {
            "n_eigenfunctions": len(self.eigen),
            "bins": [{"lo": b.lo, "hi": b.hi, "count": b.count, "median_rate": b.median_rate,
                      "gamma": b.gamma} for b in self.bins],
        }


def eigen_decay(box: FiniteBox, spectrum: Spectrum, index: int) -> EigenDecay:
    E = float(spectrum.values[index])
    psi = spectrum.vectors[:, index]
    w = psi * psi
    centroid = float(np.dot(np.arange(1, box.size + 1), w))
    peak = int(np.argmax(np.abs(psi)))  # 0-based
    left = _log_profile(box.potential[:peak + 1], E)
    right = _log_profile(box.potential[peak:][::-1], E)
    lr, lq = _envelope_fit(left)
    rr, rq = _envelope_fit(right)
    return EigenDecay(E, centroid, lr, rr, float(np.nanmin([lq, rq])))


def decay_report(box: FiniteBox, spectrum: Spectrum, gamma: GammaCurve, excluded: Sequence[float] = (),
                 n_bins: int = 8, min_per_bin: int = 5, edge_margin: float = EDGE_MARGIN,
                 exclude_radius: float = EXCLUDE_RADIUS) -> DecayReport:
    """Fitted decay rates of bulk eigenfunctions, binned by energy.

    Eligible eigenpairs sit farther than ``exclude_radius`` from every
    excluded energy, farther than ``edge_margin`` from the extreme box
    eigenvalues, and have their mass centroid in the middle half of the box.
    """
    if spectrum.vectors is None:
        raise ConfigError("decay_report needs eigenvectors")
    N = box.size
    E = spectrum.values
    lo_edge, hi_edge = E[0] + edge_margin, E[-1] - edge_margin
    excl = np.asarray(list(excluded), dtype=float)
    rows = []
    for i, e in enumerate(E):
        if not lo_edge < e < hi_edge:
            continue
        if len(excl) and np.min(np.abs(excl - e)) <= exclude_radius:
            continue
        psi = spectrum.vectors[:, i]
        centroid = float(np.dot(np.arange(1, N + 1), psi * psi))
        if not N / 4 <= centroid <= 3 * N / 4:
            continue
        d = eigen_decay(box, spectrum, i)
        if math.isfinite(d.left_rate) and math.isfinite(d.right_rate):
            rows.append(d)
    if len(rows) < max(min_per_bin, 2):
        raise InsufficientDataError(f"only {len(rows)} eligible bulk eigenfunctions")
    energies = np.array([r.energy for r in rows])
    rates = np.array([r.rate for r in rows])
    edges = np.linspace(energies.min(), energies.max(), n_bins + 1)
    which = np.clip(np.searchsorted(edges, energies, side="right") - 1, 0, n_bins - 1)
    bins = []
    for b in range(n_bins):
        sel = which == b
        if sel.sum() < min_per_bin:
            continue
        g = float(np.median(gamma(energies[sel])))
        bins.append(DecayBin(float(edges[b]), float(edges[b + 1]), int(sel.sum()),
                             float(np.median(rates[sel])), g))
    if not bins:
        raise InsufficientDataError("no energy bin has enough eigenfunctions")
    return DecayReport(tuple(rows), tuple(bins))


# -- dynamics ----------------------------------------------------------------

@dataclass(frozen=True)
class MomentTrace:
    times: np.ndarray
    moments: np.ndarray
    p: float
    interval: tuple
    site: int
    initial_norm2: float
    norms: np.ndarray
    boundary_weight: float

    def slope(self, t_min: float, t_max: float) -> float:
        """Least-squares log-log slope over times in [t_min, t_max]."""
        sel = (self.times >= t_min) & (self.times <= t_max) & (self.times > 0) & (self.moments > 0)
        if sel.sum() < 2:
            raise InsufficientDataError("fewer than two positive samples in the fitting range")
        return float(np.polyfit(np.log(self.times[sel]), np.log(self.moments[sel]), 1)[0])

    def late_slope(self) -> float:
        t_max = float(self.times.max())
        return self.slope(t_max / 10.0, t_max)


def evolve_moments(box: FiniteBox, spectrum: Spectrum, site: int, p: float, interval, times,
                   boundary_sites: Optional[int] = None, check_boundary: bool = True) -> MomentTrace:
    """<|X - site|^p> for psi(t) = exp(-itH) P_I delta_site.

    ``site`` is 1-based. Propagation uses the spectral decomposition, so it
    is exact up to rounding at every time.
    """
    N = box.size
    if not 1 <= site <= N:
        raise ConfigError(f"site {site} outside the box [1, {N}]")
    lo, hi = interval
    sel = (spectrum.values >= lo) & (spectrum.values <= hi)
    E = spectrum.values[sel]
    V = spectrum.vectors[:, sel]
    c = V[site - 1, :]
    times = np.asarray(times, dtype=float)
    dist = np.abs(np.arange(1, N + 1) - site).astype(float) ** p
    nb = boundary_sites or min(BOUNDARY_SITES, N // 4 or 1)
    mask = np.zeros(N, bool)
    mask[:nb] = mask[-nb:] = True
    moments = np.empty(len(times))
    norms = np.empty(len(times))
    worst = 0.0
    for i, t in enumerate(times):
        psi = V @ (np.exp(-1j * E * t) * c)
        w = np.abs(psi) ** 2
        moments[i] = float(np.dot(dist, w))
        norms[i] = math.sqrt(float(w.sum()))
        worst = max(worst, float(w[mask].sum()))
    if check_boundary and worst >= BOUNDARY_WEIGHT:
        raise BoxTooSmallError(f"boundary weight {worst:.3g} >= {BOUNDARY_WEIGHT}; enlarge the box")
    return MomentTrace(times, moments, float(p), (float(lo), float(hi)), int(site),
                       float(np.dot(c, c)), norms, worst)


@dataclass(frozen=True)
class MomentSummary:
    """Disorder-averaged moments plus the empirical sup over time per sample."""

    times: np.ndarray
    mean: np.ndarray
    sup_per_sample: np.ndarray
    traces: tuple = field(repr=False, default=())

    def late_slope(self) -> float:
        t_max = float(self.times.max())
        sel = (self.times >= t_max / 10.0) & (self.mean > 0)
        return float(np.polyfit(np.log(self.times[sel]), np.log(self.mean[sel]), 1)[0])


def moment_experiment(model: WordModel, size: int, p: float, interval, times, n_samples: int,
                      seed=None) -> MomentSummary:
    """Average moment traces over disorder samples started at the box center."""
    traces = []
    for s in range(n_samples):
        box = FiniteBox.sample(model, size, make_rng(seed, s))
        spec = diagonalize(box, select=(interval[0] - 1e-12, interval[1]))
        traces.append(evolve_moments(box, spec, (size + 1) // 2, p, interval, times))
    mom = np.array([t.moments for t in traces])
    return MomentSummary(np.asarray(times, float), mom.mean(axis=0), mom.max(axis=1), tuple(traces))


# -- integrated density of states and the Thouless formula -------------------

@dataclass(frozen=True)
class IDSCurve:
    energies: np.ndarray
    values: np.ndarray
    per_sample: np.ndarray

    @property
    def std(self) -> np.ndarray:
        n = self.per_sample.shape[0]
        return self.per_sample.std(axis=0, ddof=1) if n > 1 else np.zeros_like(self.values)

    def __call__(self, e):
        return np.interp(e, self.energies, self.values)


def counting_function(eigenvalues, grid) -> np.ndarray:
    ev = np.sort(eigenvalues)
    return np.searchsorted(ev, grid, side="right") / len(ev)


def ids(model: WordModel, size: int, n_samples: int, seed=None, grid=None, n_grid: int = 2001,
        offset: Optional[int] = None) -> IDSCurve:
    """Disorder-averaged normalized eigenvalue counting function."""
    boxes = [FiniteBox.sample(model, size, make_rng(seed, s), offset=offset) for s in range(n_samples)]
    evs = [diagonalize(b, vectors=False).values for b in boxes]
    if grid is None:
        lo = min(e[0] for e in evs) - 0.5
        hi = max(e[-1] for e in evs) + 0.5
        grid = np.linspace(lo, hi, n_grid)
    grid = np.asarray(grid, dtype=float)
    per = np.array([counting_function(e, grid) for e in evs])
    return IDSCurve(grid, per.mean(axis=0), per)


def free_ids(E) -> np.ndarray:
    E = np.asarray(E, dtype=float)
    return 1.0 - np.arccos(np.clip(E / 2.0, -1.0, 1.0)) / math.pi


def _xlogx_minus_x(y):
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(y == 0.0, 0.0, y * np.log(np.abs(y)) - y)
    return out


def log_potential(curve: IDSCurve, E) -> np.ndarray:
    """Integral of ln|E - x| dN(x) for the piecewise-linear N through the grid.

    Each cell contributes its constant density times the exact integral of
    ln|E - x| across the cell, so the logarithmic singularity is harmless.
    """
    x, N = curve.energies, curve.values
    dens = np.diff(N) / np.diff(x)
    E = np.atleast_1d(np.asarray(E, dtype=float))
    out = np.empty(len(E))
    for i, e in enumerate(E):
        F = _xlogx_minus_x(x - e)
        out[i] = float(np.dot(dens, np.diff(F)))
    return out


@dataclass(frozen=True)
class ThoulessReport:
    energies: np.ndarray
    gamma: np.ndarray
    integral: np.ndarray

    @property
    def residuals(self) -> np.ndarray:
        return np.abs(self.gamma - self.integral)

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max())

    def to_json(self) -> dict:
        return {"energies": self.energies.tolist(), "gamma": self.gamma.tolist(),
                "integral": self.integral.tolist(), "max_residual": self.max_residual}


def thouless_check(gamma: GammaCurve, curve: IDSCurve, energies=None, tol: float = 1e-9) -> ThoulessReport:
    """Compare gamma(E) with the log-potential of the IDS at ``energies``
    (default: the gamma grid)."""
    energies = gamma.energies if energies is None else np.asarray(energies, dtype=float)
    if curve.values[0] > tol or curve.values[-1] < 1.0 - tol:
        raise ConfigError("IDS grid does not span the spectrum (needs N = 0 and N = 1 at its ends)")
    if energies.min() < gamma.energies.min() - tol or energies.max() > gamma.energies.max() + tol:
        raise ConfigError("test energies fall outside the gamma grid")
    return ThoulessReport(energies, np.asarray(gamma(energies), float), log_potential(curve, energies))
