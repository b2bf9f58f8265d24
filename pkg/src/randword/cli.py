"""Command-line front end: ``randword <task> --config FILE [--seed N] [--out DIR]``.

Every task writes a CSV and a JSON file (plus a PNG figure unless
``--no-plot``) into the output directory. Data files start with the config
digest and the seed, and are byte-identical on reruns.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import ergodic, furstenberg, spectrum, transfer
from .config import TASKS, ExperimentConfig, parse_config, require_seed, with_overrides
from .errors import ConfigError, RandwordError
from .floquet import PeriodicBackground, band_structure
from .scattering import (
    InsertionProblem,
    band_coefficients,
    find_b_roots,
    find_gap_roots,
)
from .words import EXAMPLE_KINDS


def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


class Writer:
    def __init__(self, cfg: ExperimentConfig, out: Path, plot: bool):
        self.cfg = cfg
        self.out = out
        self.plot = plot
        self.files = []
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output directory is not writable: {exc.strerror}", path="out") from None

    @property
    def meta(self) -> dict:
        return {"task": self.cfg.task, "config_sha256": self.cfg.digest, "seed": self.cfg.seed}

    def csv(self, columns, rows):
        path = self.out / f"{self.cfg.task}.csv"
        m = self.meta
        lines = [f"# task={m['task']} config_sha256={m['config_sha256']} seed={m['seed']}", ",".join(columns)]
        lines += [",".join(_num(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n")
        self.files.append(path)

    def json(self, payload: dict):
        path = self.out / f"{self.cfg.task}.json"
        path.write_text(json.dumps({"meta": self.meta, **payload}, indent=2, sort_keys=True, default=_jsonable) + "\n")
        self.files.append(path)

    def figure(self, name, *args, **kw):
        if not self.plot:
            return
        from . import plotting

        path = self.out / f"{self.cfg.task}.png"
        getattr(plotting, name)(path, *args, **kw)
        self.files.append(path)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"not serializable: {type(x)}")


# -- task runners ------------------------------------------------------------

def run_lyapunov(cfg, w: Writer) -> str:
    p = cfg.params
    E = p["energies"]
    L = cfg.model.expected_length()
    rows, ok = [], 0
    for i, e in enumerate(E):
        rep = transfer.verify_length_identity(cfg.model, e, p["n_sites"], np.random.SeedSequence(cfg.seed, spawn_key=(i,)))
        rows.append([e, 0.0, rep.gamma0.value, rep.gamma0.stderr, rep.gamma.value, rep.gamma.stderr,
                     rep.ratio, rep.passed])
        ok += rep.passed
    w.csv(["energy_re", "energy_im", "gamma0", "gamma0_err", "gamma", "gamma_err", "ratio", "identity_ok"], rows)
    g = np.array([r[4] for r in rows])
    w.json({"n_sites": p["n_sites"], "expected_length": L, "identity_passed": ok, "energies": len(E)})
    w.figure("lyapunov_figure", E, g, [r[5] for r in rows])
    i = int(np.argmin(g))
    return (f"lyapunov: {len(E)} energies, min gamma {g[i]:.4g} at E={E[i]:.4g}, max {g.max():.4g}, "
            f"length identity {ok}/{len(E)}")


def run_bands(cfg, w: Writer) -> str:
    bg = PeriodicBackground(cfg.params["background"])
    bs = band_structure(bg)
    grid = cfg.params["grid"]
    if grid is None:
        lo, hi = min(bs.edges) - 1.0, max(bs.edges) + 1.0
        grid = np.linspace(lo, hi, 801)
    D = bs.discriminant(grid).real
    w.csv(["energy", "D"], zip(grid, D))
    w.json(bs.to_json())
    w.figure("discriminant_figure", grid, D, bs.edges)
    return f"bands: period {bg.period}, {len(bs.bands)} band(s), {len(bs.degenerate_edges)} closed gap(s)"


def run_scatter(cfg, w: Writer) -> str:
    p = cfg.params
    problem = InsertionProblem.from_words(p["background"], p["insertion"])
    problem.require_perturbed()
    bs = band_structure(problem.background)
    rows, b_roots, gap_roots = [], [], []
    tol = p["edge_tol"]
    for lo, hi in bs.stability_intervals:
        for e in np.linspace(lo + tol, hi - tol, p["points_per_band"]):
            sp = band_coefficients(problem, e)
            rows.append([e, sp.a.real, sp.a.imag, sp.b.real, sp.b.imag, sp.residual])
        b_roots += find_b_roots(problem, (lo, hi), edge_tol=tol)
    for gap in bs.gaps:
        gap_roots += find_gap_roots(problem, gap, delta=tol)
    w.csv(["energy", "re_a", "im_a", "re_b", "im_b", "unitarity_residual"], rows)
    max_res = max(r[5] for r in rows) if rows else math.nan
    w.json({"b_roots": b_roots, "gap_roots": gap_roots, "max_unitarity_residual": max_res,
            "stability_intervals": [list(iv) for iv in bs.stability_intervals]})
    arr = np.array(rows)
    if len(arr):
        w.figure("scatter_figure", arr[:, 0], np.hypot(arr[:, 1], arr[:, 2]), np.hypot(arr[:, 3], arr[:, 4]))
    return f"scatter: {len(rows)} band points, max | |a|^2-|b|^2-1 | = {max_res:.2e}, {len(b_roots)} b-root(s)"


def run_exceptional(cfg, w: Writer) -> str:
    p = cfg.params
    es = furstenberg.exceptional_set(cfg.model, p["w0"], p["w1"], p["window"], n_scan=p["n_scan"])
    w.csv(["energy", "class", "residual", "heuristic"],
          [[e.energy, e.cls, e.residual, e.heuristic] for e in es])
    w.json({"window": list(es.window), "entries": es.to_json(), "scan_failures": list(es.scan_failures)})
    bs = band_structure(PeriodicBackground.from_word(p["w0"]))
    grid = np.linspace(*p["window"], 1201)
    w.figure("discriminant_figure", grid, bs.discriminant(grid).real, bs.edges, es.energies)
    return f"exceptional: {len(es)} energies in [{es.window[0]:g}, {es.window[1]:g}]"


def run_localize(cfg, w: Writer) -> str:
    p = cfg.params
    box = spectrum.FiniteBox.sample(cfg.model, p["size"], np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    spec = spectrum.diagonalize(box)
    gamma = transfer.gamma_curve(cfg.model, p["energies"], p["n_sites"], np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
    rep = spectrum.decay_report(box, spec, gamma, p["excluded"], n_bins=p["n_bins"])
    w.csv(["energy", "centroid", "left_rate", "right_rate", "rate", "r2"],
          [[d.energy, d.centroid, d.left_rate, d.right_rate, d.rate, d.r2] for d in rep.eigen])
    payload = rep.to_json()
    payload["max_rel_error"] = rep.max_rel_error()
    w.json(payload)
    w.figure("decay_figure", [d.energy for d in rep.eigen], [d.rate for d in rep.eigen],
             [(b.lo + b.hi) / 2 for b in rep.bins], [b.median_rate for b in rep.bins],
             gamma.energies, gamma.values)
    return f"localize: {len(rep.eigen)} bulk eigenfunctions, {len(rep.bins)} bins, max relative error {rep.max_rel_error():.3f}"


def run_dynamics(cfg, w: Writer) -> str:
    p = cfg.params
    s = spectrum.moment_experiment(cfg.model, p["size"], p["p"], p["interval"], p["times"], p["samples"], cfg.seed)
    slope = s.late_slope()
    w.csv(["time", "mean_moment"], zip(s.times, s.mean))
    w.json({"p": p["p"], "interval": list(p["interval"]), "late_slope": slope,
            "sup_per_sample": s.sup_per_sample, "empirical_sup_mean": float(s.sup_per_sample.mean()),
            "max_boundary_weight": max(t.boundary_weight for t in s.traces),
            "note": "finite time horizon and finite disorder sample"})
    w.figure("moments_figure", s.times, s.mean, p["p"])
    return f"dynamics: late log-log slope {slope:.3f}, sample-mean sup {s.sup_per_sample.mean():.4g}"


def run_renewal(cfg, w: Writer) -> str:
    p = cfg.params
    weights = p["weights"] if p["weights"] is not None else cfg.model.length_weights().tolist()
    rs = ergodic.renewal_sequence(weights, p["L"])
    gen = ergodic.generating_coefficients(weights, p["L"])
    ces = np.concatenate([[rs.values[0]], rs.cesaro()])
    ell = np.arange(p["L"] + 1)
    w.csv(["ell", "A", "cesaro"], zip(ell, rs.values, ces))
    w.json({"weights": list(weights), "gcd": rs.gcd, "mean_length": rs.mean_length,
            "A_L": float(rs.values[-1]), "inverse_mean_length": 1.0 / rs.mean_length,
            "max_generating_mismatch": float(np.abs(rs.values - gen).max())})
    w.figure("renewal_figure", ell, rs.values, ces, 1.0 / rs.mean_length)
    return f"renewal: A_{p['L']} = {rs.values[-1]:.10f}, 1/<L> = {1.0 / rs.mean_length:.10f}, gcd {rs.gcd}"


def run_mixing(cfg, w: Writer) -> str:
    p = cfg.params
    ca, cb = ergodic.Cylinder(**p["cylinder_a"]), ergodic.Cylinder(**p["cylinder_b"])
    ells = [int(round(e)) for e in p["ells"]]
    tab = ergodic.mixing_experiment(cfg.model, ca, cb, ells, p["trials"], cfg.seed)
    w.csv(["ell", "empirical", "target", "stderr"], [[r.ell, r.empirical, r.target, r.stderr] for r in tab.rows])
    zmax = max(abs(r.z) for r in tab.rows)
    w.json({"p_a": tab.p_a, "p_b": tab.p_b, "trials": tab.trials, "max_abs_z": zmax})
    w.figure("mixing_figure", [r.ell for r in tab.rows], [r.empirical for r in tab.rows],
             [r.target for r in tab.rows], [r.stderr for r in tab.rows])
    return f"mixing: {len(tab.rows)} lags, max |z| = {zmax:.2f}"


RUNNERS = {
    "lyapunov": run_lyapunov,
    "bands": run_bands,
    "scatter": run_scatter,
    "exceptional": run_exceptional,
    "localize": run_localize,
    "dynamics": run_dynamics,
    "renewal": run_renewal,
    "mixing": run_mixing,
}


def run_experiment(cfg: ExperimentConfig, out=None, plot: bool = True):
    """Dispatch one configured task; returns (summary line, written files)."""
    require_seed(cfg)
    w = Writer(cfg, Path(out or cfg.out or "out"), plot)
    summary = RUNNERS[cfg.task](cfg, w)
    return summary, w.files


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="randword", description="Random word models: Lyapunov exponents, "
                                 "band structure, scattering, localization and renewal experiments.")
    ap.add_argument("task", nargs="?", choices=TASKS)
    ap.add_argument("--config", help="TOML experiment file")
    ap.add_argument("--seed", type=int, help="root seed (overrides the config)")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    ap.add_argument("--list-examples", action="store_true", help="list the built-in model constructors")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_examples:
        for kind, desc in EXAMPLE_KINDS.items():
            print(f"{kind:13s} {desc}")
        return 0
    try:
        if args.task is None or args.config is None:
            raise ConfigError("need a task and --config (or --list-examples)")
        cfg = parse_config(args.config)
        if cfg.task != args.task:
            raise ConfigError(f"config declares task {cfg.task!r} but {args.task!r} was requested", path="task.name")
        cfg = with_overrides(cfg, args.seed, args.out)
        summary, _ = run_experiment(cfg, plot=not args.no_plot)
    except RandwordError as exc:
        print(f"randword: error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
