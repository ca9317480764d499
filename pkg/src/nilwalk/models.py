"""Model files: JSON description of algebra, graph, realization, test function and run settings.

Structure-constant and coordinate indices in model files are 1-based, matching
the usual a_1, ..., a_D naming; everything inside the library is 0-based.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any

from .errors import AlgebraError, ConfigError, ValidationError
from .nilgroup import StratifiedAlgebra
from .polyalg import Polynomial, as_fraction, parse_polynomial
from .quotient_graph import Edge, QuotientGraph, SpectralData, spectral_data, validate
from .realization import (Realization, asymptotic_direction, is_centered, make_realization,
                          solve_modified_harmonic)
from .quotient_graph import invariant_measure

DEFAULT_RUN = {"t": "1", "n": "16..1024", "N": 3, "seed": 20240601, "C": "8", "b": "2", "lambda": "1",
               "box": "1"}


@dataclass
class Model:
    name: str
    algebra: StratifiedAlgebra
    graph: QuotientGraph
    realization: Realization
    harmonic: Realization
    is_harmonic: bool
    m: list[Fraction]
    function: Polynomial | None
    run: dict[str, Any] = field(default_factory=dict)
    source: str = ""

    @property
    def x(self) -> str:
        return self.run.get("x", self.graph.vertices[0])

    @cached_property
    def direction(self) -> tuple[Fraction, ...]:
        return asymptotic_direction(self.algebra, self.graph, self.m, self.harmonic)

    @property
    def centered(self) -> bool:
        return is_centered(self.direction)

    @cached_property
    def spectral(self) -> SpectralData:
        return spectral_data(self.graph)

    def parse_function(self, text: str) -> Polynomial:
        return parse_polynomial(text, self.algebra.dim)

    def with_realization(self, realization: Realization, harmonic: bool) -> "Model":
        return Model(self.name, self.algebra, self.graph, realization, self.harmonic, harmonic, self.m,
                     self.function, dict(self.run), self.source)


def bundled_models() -> list[str]:
    root = resources.files("nilwalk") / "models"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_model_path(name_or_path: str | Path) -> Path | Any:
    path = Path(name_or_path)
    if path.exists():
        return path
    stem = path.name[:-5] if path.name.endswith(".json") else path.name
    candidate = resources.files("nilwalk") / "models" / f"{stem}.json"
    if candidate.is_file():
        return candidate
    raise ConfigError(f"model file {name_or_path!r} not found (bundled: {', '.join(bundled_models())})")


def load_model(name_or_path: str | Path) -> Model:
    path = resolve_model_path(name_or_path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return model_from_dict(data, source=str(path))


def _rational(value, where: str) -> Fraction:
    try:
        return as_fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: expected a rational like \"p/q\", got {value!r}") from exc


def _require(block: dict, key: str, where: str):
    if not isinstance(block, dict) or key not in block:
        raise ConfigError(f"{where}: missing field {key!r}")
    return block[key]


def model_from_dict(data: dict, source: str = "<dict>") -> Model:
    name = data.get("name", Path(source).stem)
    alg = _algebra_from(data)
    graph = _graph_from(data)
    m = invariant_measure(graph)
    real_block = _require(data, "realization", "model")
    holonomies = _require(real_block, "holonomies", "realization")
    hol = {}
    for eid, vec in holonomies.items():
        if not isinstance(vec, list):
            raise ConfigError(f"realization.holonomies.{eid}: expected a list of rationals")
        hol[eid] = [_rational(c, f"realization.holonomies.{eid}[{k}]") for k, c in enumerate(vec)]
    higher = {v: [_rational(c, f"realization.higher_layers.{v}[{k}]") for k, c in enumerate(vec)]
              for v, vec in real_block.get("higher_layers", {}).items()}
    anchor = real_block.get("anchor", graph.vertices[0])
    if anchor not in graph.index:
        raise ConfigError(f"realization.anchor: unknown vertex {anchor!r}")
    try:
        harmonic = solve_modified_harmonic(alg, graph, m, hol, anchor, higher or None)
        if real_block.get("harmonic", True):
            realization, is_harm = harmonic, True
        else:
            positions = {v: [_rational(c, f"realization.positions.{v}[{k}]") for k, c in enumerate(vec)]
                         for v, vec in _require(real_block, "positions", "realization").items()}
            realization, is_harm = make_realization(alg, graph, hol, positions), False
    except ValidationError as exc:
        raise ValidationError([f"realization: {d}" for d in exc.diagnostics]) from exc
    function = None
    if "function" in data and data["function"] is not None:
        function = _function_from(data["function"], alg.dim)
    run = dict(DEFAULT_RUN)
    run.update(data.get("run", {}))
    if "x" in run and run["x"] not in graph.index:
        raise ConfigError(f"run.x: unknown vertex {run['x']!r}")
    return Model(name, alg, graph, realization, harmonic, is_harm, m, function, run, source)


def _algebra_from(data: dict) -> StratifiedAlgebra:
    block = _require(data, "algebra", "model")
    dims = _require(block, "layer_dims", "algebra")
    step = block.get("step", len(dims))
    if step != len(dims):
        raise ConfigError(f"algebra.step = {step} but layer_dims has {len(dims)} entries")
    if step > 3:
        raise AlgebraError(f"unsupported step {step}: only step <= 3 is implemented")
    consts = []
    for n, entry in enumerate(block.get("structure_constants", [])):
        if not (isinstance(entry, list) and len(entry) == 4):
            raise ConfigError(f"algebra.structure_constants[{n}]: expected [i, j, k, \"p/q\"]")
        i, j, k, c = entry
        consts.append((int(i) - 1, int(j) - 1, int(k) - 1, _rational(c, f"algebra.structure_constants[{n}][3]")))
    return StratifiedAlgebra(dims, consts, name=block.get("name", ""))


def _graph_from(data: dict) -> QuotientGraph:
    block = _require(data, "graph", "model")
    vertices = _require(block, "vertices", "graph")
    edges = []
    for n, rec in enumerate(_require(block, "edges", "graph")):
        where = f"graph.edges[{n}]"
        edges.append(Edge(str(_require(rec, "id", where)), str(_require(rec, "origin", where)),
                          str(_require(rec, "terminus", where)), str(_require(rec, "inverse_id", where)),
                          _rational(_require(rec, "p", where), f"{where}.p")))
    graph = QuotientGraph(vertices, edges)
    problems = validate(graph)
    if problems:
        raise ValidationError([f"graph: {p}" for p in problems])
    return graph


def _function_from(block, dim: int) -> Polynomial:
    if isinstance(block, str):
        return parse_polynomial(block, dim)
    terms = {}
    for n, entry in enumerate(block):
        if not (isinstance(entry, list) and len(entry) == 2 and len(entry[0]) == dim):
            raise ConfigError(f"function[{n}]: expected [[exponents...], \"p/q\"] with {dim} exponents")
        key = tuple(int(e) for e in entry[0])
        terms[key] = terms.get(key, 0) + _rational(entry[1], f"function[{n}][1]")
    return Polynomial((("x", dim),), terms)


def parse_n_range(spec) -> list[int]:
    """"16..4096" -> powers of two from 16 to 4096; "3,5,8" -> explicit list."""
    if isinstance(spec, (list, tuple)):
        return [int(v) for v in spec]
    spec = str(spec).strip()
    if ".." in spec:
        lo, hi = (int(v) for v in spec.split(".."))
        if lo < 1 or hi < lo:
            raise ConfigError(f"bad range {spec!r}")
        out, n = [], 1
        while n <= hi:
            if n >= lo:
                out.append(n)
            n *= 2
        return out
    return [int(v) for v in spec.split(",") if v]
