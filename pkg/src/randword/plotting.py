"""Report figures, rendered off-screen next to the data files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def lyapunov_figure(path, energies, values, stderr, ylabel="gamma"):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.errorbar(energies, values, yerr=stderr, fmt=".-", ms=3, lw=0.8, capsize=0)
    ax.axhline(0.0, color="0.6", lw=0.5)
    ax.set_xlabel("E")
    ax.set_ylabel(ylabel)
    return _save(fig, path)


def discriminant_figure(path, grid, D, edges=(), marks=()):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(grid, D, lw=1.0)
    for y in (-2, 2):
        ax.axhline(y, color="0.6", lw=0.5, ls="--")
    for e in edges:
        ax.axvline(e, color="C1", lw=0.5)
    if len(marks):
        ax.plot(marks, np.zeros(len(marks)), "kx", ms=5)
    ax.set_ylim(-4, 4)
    ax.set_xlabel("E")
    ax.set_ylabel("D(E)")
    return _save(fig, path)


def scatter_figure(path, energies, abs_a, abs_b):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(energies, abs_a, ".", ms=2, label="|a|")
    ax.plot(energies, abs_b, ".", ms=2, label="|b|")
    ax.set_xlabel("E")
    ax.legend(frameon=False)
    return _save(fig, path)


def decay_figure(path, energies, rates, bin_centers, bin_medians, gamma_e, gamma_v):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(energies, rates, ".", ms=2, color="0.6", label="eigenfunction fits")
    ax.plot(bin_centers, bin_medians, "o", color="C3", label="bin median")
    ax.plot(gamma_e, gamma_v, "-", color="C0", lw=1.0, label="gamma(E)")
    ax.set_xlabel("E")
    ax.set_ylabel("decay rate")
    ax.legend(frameon=False)
    return _save(fig, path)


def moments_figure(path, times, moments, p):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog(times, moments, ".-", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel(f"<|X|^{p:g}>")
    return _save(fig, path)


def renewal_figure(path, ell, A, cesaro, limit):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(ell, A, ".", ms=4, label="A")
    ax.plot(ell, cesaro, "-", lw=1.0, label="Cesaro mean")
    ax.axhline(limit, color="0.5", lw=0.6, ls="--")
    ax.set_xlabel("l")
    ax.legend(frameon=False)
    return _save(fig, path)


def mixing_figure(path, ell, empirical, target, stderr):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.errorbar(ell, empirical, yerr=3 * np.asarray(stderr), fmt=".", ms=3, capsize=0)
    ax.plot(ell, target, "-", color="C3", lw=0.8)
    ax.set_xlabel("l")
    ax.set_ylabel("P(T^-l A and B)")
    return _save(fig, path)
