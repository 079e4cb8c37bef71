"""Run configuration: INI file sections mirroring module options, overridable by flags."""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .multiindex import layer_dim
from .nonextension import BoundaryMapSpec, Sampling
from .paths import PathOptions
from .polynomial import Polynomial


@dataclass(frozen=True)
class RunConfig:
    n: int = 1
    k: int = 1
    Ls: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0)
    f0: str | None = None  # polynomial files; None selects the canonical pair
    f1: str | None = None
    seed: int = 0
    out: str | None = None
    format: str = "csv"
    lam: float = 1.0
    L_max: int = 10
    points_per_edge: int = 5
    cross_pairs: int = 10_000
    grid_N: int = 64
    stokes_Ns: tuple[int, ...] = (8, 16, 32, 64)
    fv_r: tuple[float, ...] = (0.0, 1.0, 2.0, 4.0, 8.0, 16.0)
    paths: PathOptions = field(default_factory=PathOptions)
    sampling: Sampling = field(default_factory=Sampling)

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ValueError("n and k must be at least 1")
        # raises OverflowError when the top layer does not fit in 64 bits
        layer_dim(self.n, self.k)
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        if (self.f0 is None) != (self.f1 is None):
            raise ValueError("give both f0 and f1 or neither")

    def boundary_spec(self) -> BoundaryMapSpec:
        if self.f0 is None:
            return BoundaryMapSpec.canonical(self.n, self.k)
        return BoundaryMapSpec(self.n, self.k, load_polynomial(self.f0), load_polynomial(self.f1))

    def with_overrides(self, **kw) -> RunConfig:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def load_polynomial(source: str) -> Polynomial:
    """Read ``{"n": n, "terms": [[exponents, coefficient], ...]}`` from a path or inline JSON."""
    text = source if source.lstrip().startswith("{") else Path(source).read_text()
    data = json.loads(text)
    return Polynomial.from_terms(int(data["n"]), [(tuple(e), c) for e, c in data["terms"]])


def dump_polynomial(p: Polynomial) -> str:
    return json.dumps({"n": p.n, "terms": p.to_terms()})


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.replace(",", " ").split())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.replace(",", " ").split())


_RUN_KEYS = {
    "n": int,
    "k": int,
    "Ls": _floats,
    "f0": str,
    "f1": str,
    "seed": int,
    "out": str,
    "format": str,
    "lam": float,
    "L_max": int,
    "points_per_edge": int,
    "cross_pairs": int,
    "grid_N": int,
    "stokes_Ns": _ints,
    "fv_r": _floats,
}


def _section(cls, section) -> dict:
    out = {}
    for f in fields(cls):
        if f.name in section:
            raw = section[f.name]
            if f.type in ("int", int):
                out[f.name] = int(raw)
            elif f.type in ("float", float):
                out[f.name] = float(raw)
            elif "tuple" in str(f.type):
                out[f.name] = _floats(raw)
            else:
                out[f.name] = raw
    return out


def load_config(path: str) -> RunConfig:
    """Parse an INI file with sections ``[run]``, ``[paths]`` and ``[sampling]``."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    if not parser.read(path):
        raise FileNotFoundError(path)
    kw = {}
    if parser.has_section("run"):
        for key, raw in parser["run"].items():
            if key not in _RUN_KEYS:
                raise KeyError(f"unknown [run] key {key!r}")
            kw[key] = _RUN_KEYS[key](raw)
    if parser.has_section("paths"):
        kw["paths"] = PathOptions(**_section(PathOptions, parser["paths"]))
    if parser.has_section("sampling"):
        kw["sampling"] = Sampling(**_section(Sampling, parser["sampling"]))
    return RunConfig(**kw)
