"""TOML experiment configuration.

A config has a ``[model]`` table, a ``[task]`` table naming one task plus
its parameters, and optional top-level ``seed`` and ``out``::

    seed = 7

    [model]
    kind = "dimer"
    lam = 1.5

    [task]
    name = "lyapunov"
    energies = { start = -3.0, stop = 3.0, num = 61 }
    n_sites = 100000

A model may instead list atoms: ``[[model.atoms]]`` with ``word`` and
``weight``.
"""

from __future__ import annotations

import hashlib
import json
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, RandwordError
from .words import EXAMPLE_KINDS, WordModel, make_example

TASKS = ("lyapunov", "bands", "scatter", "exceptional", "localize", "dynamics", "renewal", "mixing")
STOCHASTIC = {"lyapunov", "localize", "dynamics", "mixing"}

_REQ = object()


def _grid(value, path):
    """A list of floats, or {start, stop, num[, log]}."""
    if isinstance(value, dict):
        try:
            start, stop, num = float(value["start"]), float(value["stop"]), int(value["num"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("grid needs numeric start, stop and num", path=path) from None
        if num < 1:
            raise ConfigError("num must be >= 1", path=f"{path}.num")
        if value.get("log", False):
            if start <= 0 or stop <= 0:
                raise ConfigError("log grid needs positive bounds", path=path)
            return np.geomspace(start, stop, num)
        return np.linspace(start, stop, num)
    if isinstance(value, list) and value and all(isinstance(x, (int, float)) for x in value):
        return np.asarray(value, dtype=float)
    raise ConfigError("expected a nonempty list of numbers or a {start, stop, num} table", path=path)


def _float(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", path=path)
    return float(v)


def _int(v, path):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {v!r}", path=path)
    return int(v)


def _posint(v, path):
    v = _int(v, path)
    if v < 1:
        raise ConfigError(f"expected a positive integer, got {v}", path=path)
    return v


def _word(v, path):
    if not isinstance(v, list) or not v:
        raise ConfigError("expected a nonempty list of numbers", path=path)
    return tuple(_float(x, f"{path}[{i}]") for i, x in enumerate(v))


def _pair(v, path):
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError("expected [low, high]", path=path)
    lo, hi = _float(v[0], f"{path}[0]"), _float(v[1], f"{path}[1]")
    if not lo < hi:
        raise ConfigError("expected low < high", path=path)
    return (lo, hi)


def _weights(v, path):
    if not isinstance(v, list) or not v:
        raise ConfigError("expected a nonempty list of weights", path=path)
    return [_float(x, f"{path}[{i}]") for i, x in enumerate(v)]


def _floats(v, path):
    if not isinstance(v, list):
        raise ConfigError("expected a list of numbers", path=path)
    return [_float(x, f"{path}[{i}]") for i, x in enumerate(v)]


def _cylinder(v, path):
    if not isinstance(v, dict):
        raise ConfigError("expected a table with words / k / length", path=path)
    unknown = set(v) - {"words", "k", "length"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", path=path)
    words = {}
    for key, ws in dict(v.get("words", {})).items():
        try:
            i = int(key)
        except ValueError:
            raise ConfigError("word coordinates must be integers", path=f"{path}.words.{key}") from None
        if not isinstance(ws, list) or not ws:
            raise ConfigError("expected a list of words", path=f"{path}.words.{key}")
        words[i] = [_word(w, f"{path}.words.{key}[{j}]") for j, w in enumerate(ws)]
    k = _posint(v["k"], f"{path}.k") if "k" in v else None
    length = _posint(v["length"], f"{path}.length") if "length" in v else None
    return {"words": words, "k": k, "length": length}


# name -> (converter, default)
SCHEMAS = {
    "lyapunov": {
        "energies": (_grid, _REQ),
        "n_sites": (_posint, 100_000),
    },
    "bands": {
        "background": (_word, _REQ),
        "grid": (_grid, None),
    },
    "scatter": {
        "background": (_word, _REQ),
        "insertion": (_word, _REQ),
        "points_per_band": (_posint, 200),
        "edge_tol": (_float, 1e-3),
    },
    "exceptional": {
        "w0": (_word, _REQ),
        "w1": (_word, _REQ),
        "window": (_pair, _REQ),
        "n_scan": (_posint, 2001),
    },
    "localize": {
        "size": (_posint, 2000),
        "energies": (_grid, _REQ),
        "n_sites": (_posint, 200_000),
        "excluded": (_floats, []),
        "n_bins": (_posint, 8),
    },
    "dynamics": {
        "size": (_posint, 4001),
        "p": (_float, 2.0),
        "interval": (_pair, _REQ),
        "times": (_grid, _REQ),
        "samples": (_posint, 4),
    },
    "renewal": {
        "weights": (_weights, None),
        "L": (_posint, 60),
    },
    "mixing": {
        "cylinder_a": (_cylinder, _REQ),
        "cylinder_b": (_cylinder, _REQ),
        "ells": (_grid, _REQ),
        "trials": (_posint, 100_000),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    model: Optional[WordModel]
    model_spec: dict
    params: dict
    seed: Optional[int]
    out: Optional[str]
    digest: str = field(default="")
    source: Optional[str] = None

    @property
    def stochastic(self) -> bool:
        return self.task in STOCHASTIC


def _line_of(text: Optional[str], path: Optional[str]) -> Optional[int]:
    """Best-effort line number for the last key of a dotted field path."""
    if not text or not path:
        return None
    lines = text.splitlines()
    start = 0
    # jump to the n-th [[table]] header for array-of-table paths
    m = re.match(r"^([\w.]+)\[(\d+)\]", path)
    if m:
        header = re.compile(rf"^\s*\[\[\s*{re.escape(m.group(1))}\s*\]\]")
        hits = [i for i, ln in enumerate(lines) if header.search(ln)]
        n = int(m.group(2))
        if n < len(hits):
            start = hits[n]
            if path == m.group(0):
                return start + 1
            path = path[m.end():].lstrip(".")
    key = re.split(r"[.\[]", path.split(".")[-1])[0]
    if not key:
        return None
    pat = re.compile(rf"^\s*(\[\[?)?\s*[\w.]*\b{re.escape(key)}\b")
    for i in range(start, len(lines)):
        if pat.search(lines[i]):
            return i + 1
    return None


def build_model(spec: dict) -> WordModel:
    if not isinstance(spec, dict):
        raise ConfigError("expected a [model] table", path="model")
    if "atoms" in spec:
        atoms = spec["atoms"]
        if not isinstance(atoms, list) or not atoms:
            raise ConfigError("expected a nonempty array of atoms", path="model.atoms")
        pairs = []
        for i, a in enumerate(atoms):
            if not isinstance(a, dict) or "word" not in a or "weight" not in a:
                raise ConfigError("each atom needs word and weight", path=f"model.atoms[{i}]")
            pairs.append((_word(a["word"], f"model.atoms[{i}].word"), _float(a["weight"], f"model.atoms[{i}].weight")))
        extra = {}
        if "max_length" in spec:
            extra["max_length"] = _posint(spec["max_length"], "model.max_length")
        if "bound" in spec:
            extra["bound"] = _float(spec["bound"], "model.bound")
        try:
            return WordModel(tuple(pairs), **extra)
        except ConfigError as exc:
            raise ConfigError(exc.message, path=f"model.{exc.path}" if exc.path else "model") from None
    if "example" in spec:
        ex = spec["example"]
        if not isinstance(ex, dict) or "kind" not in ex:
            raise ConfigError("example needs kind and params", path="model.example")
        kind, params = ex["kind"], dict(ex.get("params", {}))
    else:
        kind = spec.get("kind")
        params = {k: v for k, v in spec.items() if k != "kind"}
    if kind is None:
        raise ConfigError(f"need atoms, example or kind (one of {', '.join(EXAMPLE_KINDS)})", path="model")
    try:
        return make_example(kind, **params)
    except ConfigError as exc:
        raise ConfigError(exc.message, path=f"model.{exc.path}" if exc.path else "model") from None


def digest_of(data: dict) -> str:
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def config_from_dict(data: dict, text: Optional[str] = None, source: Optional[str] = None) -> ExperimentConfig:
    try:
        return _config_from_dict(data, text, source)
    except ConfigError as exc:
        if exc.line is None and text is not None:
            line = _line_of(text, exc.path)
            if line is not None:
                raise ConfigError(exc.message, path=exc.path, line=line) from None
        raise


def _config_from_dict(data, text, source):
    unknown = set(data) - {"seed", "out", "model", "task"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}", path=sorted(unknown)[0])
    task_tbl = data.get("task")
    if not isinstance(task_tbl, dict) or "name" not in task_tbl:
        raise ConfigError(f"need a [task] table with name (one of {', '.join(TASKS)})", path="task")
    name = task_tbl["name"]
    if name not in TASKS:
        raise ConfigError(f"unknown task {name!r}; valid tasks: {', '.join(TASKS)}", path="task.name")
    schema = SCHEMAS[name]
    extra = set(task_tbl) - set(schema) - {"name"}
    if extra:
        raise ConfigError(f"unknown parameters {sorted(extra)} for task {name}", path=f"task.{sorted(extra)[0]}")
    params = {}
    for key, (conv, default) in schema.items():
        if key in task_tbl:
            params[key] = conv(task_tbl[key], f"task.{key}")
        elif default is _REQ:
            raise ConfigError("missing required parameter", path=f"task.{key}")
        else:
            params[key] = default
    model_spec = data.get("model")
    needs_model = name not in ("bands", "scatter") and not (name == "renewal" and params["weights"] is not None)
    model = None
    if model_spec is not None:
        model = build_model(model_spec)
    elif needs_model:
        raise ConfigError("missing [model] table", path="model")
    seed = data.get("seed")
    if seed is not None:
        seed = _int(seed, "seed")
        if seed < 0:
            raise ConfigError("seed must be nonnegative", path="seed")
    out = data.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("expected a path string", path="out")
    return ExperimentConfig(name, model, model_spec or {}, params, seed, out, digest_of(data), source)


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=str(path)) from None
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"JSON syntax error: {exc.msg}", line=exc.lineno) from None
        if not isinstance(data, dict):
            raise ConfigError("top level must be an object")
        return config_from_dict(data, text, str(path))
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", line=int(m.group(1)) if m else None) from None
    return config_from_dict(data, text, str(path))


def with_overrides(cfg: ExperimentConfig, seed: Optional[int] = None, out: Optional[str] = None) -> ExperimentConfig:
    from dataclasses import replace

    if seed is not None and seed < 0:
        raise ConfigError("seed must be nonnegative", path="--seed")
    return replace(cfg, seed=cfg.seed if seed is None else seed, out=cfg.out if out is None else out)


def require_seed(cfg: ExperimentConfig):
    if cfg.stochastic and cfg.seed is None:
        raise ConfigError(f"task {cfg.task} is stochastic; a seed is mandatory", path="seed")


__all__ = ["ExperimentConfig", "TASKS", "parse_config", "config_from_dict", "build_model", "RandwordError"]
