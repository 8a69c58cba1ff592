"""JSON graph-spec files.

A spec is a JSON object with a ``kind`` and coefficient entries::

    {"kind": "birth_death", "b": {"family": "power", "exponent": 2, "offset": 1},
     "mu": 1, "potential": [0, -1, -2], "perturbation": {"family": "power", "exponent": 2}}
    {"kind": "explicit", "edges": [[0, 1, 2.0], [1, 2, 0.5]], "mu": [1, 1, 1]}
    {"kind": "lattice", "dim": 2, "b": 1, "mu": 1, "potential": {"family": "const", "value": 0.5}}

Coefficients are numbers (constant), arrays indexed by vertex number, or a
family object:

``const``          ``value``
``power``          ``scale * (n + offset) ** exponent``
``geometric``      ``scale * ratio ** n``
``factorial-like`` ``f(0) = start``, ``f(n+1) = f(n) * (a * (n + 1) + c)``

On lattices the vertex number is the l1 distance to the origin.  Optional
keys: ``perturbation`` (non-negative extra potential), ``n_vertices``
(finite birth-death chain), ``name``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

from .errors import NonPositiveWeight, SpecError
from .graph import FiniteGraph, Potential, WeightedGraph, ball_exhaustion, make_birth_death, make_lattice

__all__ = ["GraphSpec", "load_spec", "parse_spec", "coefficient"]

KINDS = ("birth_death", "explicit", "lattice")


def _number(value, label):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"{label} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise SpecError(f"{label} must be finite")
    return float(value)


def coefficient(entry, label: str):
    """Turn a spec coefficient into a function of a non-negative integer."""
    if isinstance(entry, (int, float)) and not isinstance(entry, bool):
        value = _number(entry, label)
        return lambda n: value
    if isinstance(entry, list):
        values = [_number(v, f"{label}[{i}]") for i, v in enumerate(entry)]

        def lookup(n):
            if n >= len(values):
                raise SpecError(f"{label} has {len(values)} entries; index {n} requested")
            return values[n]

        return lookup
    if not isinstance(entry, dict) or "family" not in entry:
        raise SpecError(f"{label} must be a number, an array or a family object")
    fam = entry["family"]
    params = {k: v for k, v in entry.items() if k != "family"}

    def get(key, default=None):
        if key not in params:
            if default is None:
                raise SpecError(f"{label}: family {fam!r} needs {key!r}")
            return default
        return _number(params[key], f"{label}.{key}")

    if fam == "const":
        value = get("value")
        return lambda n: value
    if fam == "power":
        scale, exponent, offset = get("scale", 1.0), get("exponent"), get("offset", 0.0)
        return lambda n: scale * (n + offset) ** exponent
    if fam == "geometric":
        scale, ratio = get("scale", 1.0), get("ratio")
        return lambda n: scale * ratio**n
    if fam == "factorial-like":
        start, a, c = get("start", 1.0), get("a", 1.0), get("c", 0.0)

        @lru_cache(maxsize=None)
        def fact(n):
            value = start
            for m in range(n):
                value *= a * (m + 1) + c
            return value

        return fact
    raise SpecError(f"{label}: unknown family {fam!r}")


@dataclass
class GraphSpec:
    kind: str
    graph: WeightedGraph
    potential: Potential
    perturbation: Potential
    raw: dict = field(repr=False)

    def section(self, size: int | None = None, radius: int | None = None, root=None) -> tuple:
        """Vertex set for a command: the first ``size`` vertices or a ball."""
        if size is not None and radius is not None:
            raise SpecError("give either a size or a radius, not both")
        g = self.graph
        if size is not None:
            if size < 1:
                raise SpecError("size must be positive")
            if self.kind == "lattice":
                raise SpecError("lattice sections are balls; use a radius")
            if g.is_finite and size > g.n_vertices:
                raise SpecError(f"size {size} exceeds the {g.n_vertices} graph vertices")
            return tuple(range(size)) if self.kind == "birth_death" else tuple(g.sorted_vertices(range(size)))
        if radius is not None:
            if root is None:
                root = (0,) * self.raw["dim"] if self.kind == "lattice" else 0
            return ball_exhaustion(g, root, [radius]).subsets[0]
        if g.is_finite:
            return tuple(g.sorted_vertices(g.vertices()))
        raise SpecError("infinite graphs need a size or a radius")


def parse_spec(obj) -> GraphSpec:
    """Build a :class:`GraphSpec` from decoded JSON."""
    if not isinstance(obj, dict):
        raise SpecError("spec must be a JSON object")
    kind = obj.get("kind")
    if kind not in KINDS:
        raise SpecError(f"kind must be one of {KINDS}, got {kind!r}")
    name = obj.get("name", kind)
    if kind == "birth_death":
        for key in ("b", "mu"):
            if key not in obj:
                raise SpecError(f"birth_death spec needs {key!r}")
        n_vertices = obj.get("n_vertices")
        if n_vertices is not None and (not isinstance(n_vertices, int) or n_vertices < 2):
            raise SpecError("n_vertices must be an integer >= 2")
        try:
            graph = make_birth_death(coefficient(obj["b"], "b"), coefficient(obj["mu"], "mu"), n_vertices, name=name)
        except NonPositiveWeight as exc:
            raise SpecError(str(exc)) from exc
        index = int
    elif kind == "explicit":
        edges = obj.get("edges", obj.get("b"))
        mu = obj.get("mu")
        if not isinstance(edges, list) or not isinstance(mu, list):
            raise SpecError("explicit spec needs an edge list and a mu array")
        triples = []
        for e in edges:
            if not isinstance(e, list) or len(e) != 3 or not all(isinstance(v, int) and not isinstance(v, bool) for v in e[:2]):
                raise SpecError(f"edge entries are [x, y, weight] with integer x, y; got {e!r}")
            triples.append((e[0], e[1], _number(e[2], "edge weight")))
        mu_vals = [_number(m, "mu") for m in mu]
        try:
            graph = FiniteGraph.from_edges(triples, mu_vals, name=name)
        except (ValueError, IndexError) as exc:
            raise SpecError(str(exc)) from exc
        index = int
    else:
        dim = obj.get("dim")
        if not isinstance(dim, int) or dim < 1:
            raise SpecError("lattice spec needs an integer dim >= 1")
        b = _number(obj.get("b", 1.0), "b")
        mu = _number(obj.get("mu", 1.0), "mu")
        if b <= 0 or mu <= 0:
            raise SpecError("lattice b and mu must be positive")
        graph = make_lattice(dim, b, mu)
        index = lambda x: sum(abs(c) for c in x)  # noqa: E731

    def potential(key, label):
        if key not in obj:
            return Potential.zero()
        fn = coefficient(obj[key], key)
        return Potential(lambda x: fn(index(x)), label)

    return GraphSpec(kind, graph, potential("potential", "V"), potential("perturbation", "V2"), obj)


def load_spec(path) -> GraphSpec:
    """Read and parse a JSON spec file; every failure surfaces as :class:`SpecError`."""
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read spec {path}: {exc}") from exc
    return parse_spec(obj)
