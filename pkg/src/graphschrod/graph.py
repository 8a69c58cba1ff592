"""Weighted graphs ``(X, b, mu)`` described by coefficient oracles.

A graph is a countable vertex set with a symmetric edge weight ``b``, a
strictly positive vertex measure ``mu`` and a degree oracle
``deg(x) = sum_y b(x, y)``.  Infinite graphs (chains, lattices, stars with
infinitely many leaves) are represented lazily; every numerical routine in
the package works on finite vertex subsets of them.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Iterator, Sequence

import numpy as np
from scipy import sparse

from .errors import NonPositiveWeight, NotLocallyFinite, UnboundedTail

Vertex = Hashable

__all__ = [
    "WeightedGraph",
    "FiniteGraph",
    "Potential",
    "Exhaustion",
    "ValidationReport",
    "validate_graph",
    "check_fc",
    "connected_components",
    "make_birth_death",
    "make_chain",
    "make_path",
    "make_star",
    "make_infinite_star",
    "make_lattice",
    "ball_exhaustion",
]


class WeightedGraph:
    """Weighted graph given by oracles.

    Parameters
    ----------
    weight : callable
        ``weight(x, y)`` returns ``b(x, y) >= 0``.
    measure : callable
        ``measure(x)`` returns ``mu(x) > 0``.
    neighbors : callable
        ``neighbors(x)`` returns an iterable over the support of
        ``b(x, .)``.  It may be an infinite iterator at vertices where
        ``finite_support(x)`` is false.
    degree : callable, optional
        ``degree(x)`` returns ``sum_y b(x, y)`` over the whole vertex set.
        When omitted it is summed over the neighbor list, which then must be
        finite.
    vertices : callable, optional
        Returns an iterator over all vertices in enumeration order.
    n_vertices : int, optional
        Number of vertices; ``None`` for an infinite vertex set.
    finite_support : bool or callable
        Whether the neighbor list of a vertex is finite.
    order_key : callable, optional
        Sort key fixing the enumeration order of vertex subsets.
    """

    def __init__(
        self,
        weight: Callable[[Vertex, Vertex], float],
        measure: Callable[[Vertex], float],
        neighbors: Callable[[Vertex], Iterable[Vertex]],
        degree: Callable[[Vertex], float] | None = None,
        vertices: Callable[[], Iterator[Vertex]] | None = None,
        *,
        n_vertices: int | None = None,
        finite_support: bool | Callable[[Vertex], bool] = True,
        order_key: Callable[[Vertex], object] | None = None,
        name: str = "graph",
    ):
        self._weight = weight
        self._measure = measure
        self._neighbors = neighbors
        self._degree = degree
        self._vertices = vertices
        self.n_vertices = n_vertices
        self._finite_support = finite_support
        self._order_key = order_key
        self.name = name

    def __repr__(self):
        size = "inf" if self.n_vertices is None else self.n_vertices
        return f"{type(self).__name__}(name={self.name!r}, n_vertices={size})"

    # -- oracles ---------------------------------------------------------
    def b(self, x: Vertex, y: Vertex) -> float:
        return float(self._weight(x, y))

    def mu(self, x: Vertex) -> float:
        return float(self._measure(x))

    def deg(self, x: Vertex) -> float:
        if self._degree is not None:
            return float(self._degree(x))
        return math.fsum(self.b(x, y) for y in self.neighbor_list(x))

    def neighbors(self, x: Vertex) -> Iterable[Vertex]:
        return self._neighbors(x)

    def has_finite_support(self, x: Vertex) -> bool:
        if callable(self._finite_support):
            return bool(self._finite_support(x))
        return bool(self._finite_support)

    @property
    def locally_finite(self) -> bool:
        return self._finite_support is True

    def neighbor_list(self, x: Vertex) -> list:
        if not self.has_finite_support(x):
            raise NotLocallyFinite(f"vertex {x!r} has infinitely many neighbors")
        return list(self._neighbors(x))

    def vertices(self) -> Iterator[Vertex]:
        if self._vertices is None:
            raise NotImplementedError(f"{self.name}: no vertex enumeration")
        return iter(self._vertices())

    @property
    def is_finite(self) -> bool:
        return self.n_vertices is not None

    def order_key(self, x: Vertex):
        return x if self._order_key is None else self._order_key(x)

    def sorted_vertices(self, S: Iterable[Vertex]) -> tuple:
        """Deduplicate ``S`` and sort it in enumeration order."""
        return tuple(sorted(set(S), key=self.order_key))

    # -- constructors ------------------------------------------------------
    @classmethod
    def from_weight_dict(cls, weights: dict, measure: dict, name: str = "raw"):
        """Build a graph directly from ``{(x, y): b}`` without symmetrizing.

        Meant for inspecting arbitrary coefficient data with
        :func:`validate_graph`; no axiom is enforced here.
        """
        adj: dict = {x: {} for x in measure}
        for (x, y), w in weights.items():
            adj.setdefault(x, {})[y] = float(w)
            adj.setdefault(y, {})
        order = {x: i for i, x in enumerate(adj)}
        return cls(
            weight=lambda x, y: adj.get(x, {}).get(y, 0.0),
            measure=lambda x: measure[x],
            neighbors=lambda x: [y for y, w in adj.get(x, {}).items() if w != 0.0],
            vertices=lambda: iter(adj),
            n_vertices=len(adj),
            order_key=order.__getitem__,
            name=name,
        )


class FiniteGraph(WeightedGraph):
    """Finite graph stored as a symmetric sparse adjacency matrix.

    Vertex ``ids[i]`` corresponds to row ``i``.  Array-valued vertex
    functions on a finite graph are indexed in the same order.
    """

    def __init__(self, adjacency, mu, ids: Sequence[Vertex] | None = None, name: str = "finite"):
        adj = sparse.csr_matrix(adjacency, dtype=float)
        adj.eliminate_zeros()
        adj.sort_indices()
        mu = np.asarray(mu, dtype=float)
        n = adj.shape[0]
        if adj.shape != (n, n) or mu.shape != (n,):
            raise ValueError("adjacency must be square and match the measure length")
        self.adjacency = adj
        self.mu_array = mu
        self.ids = tuple(range(n)) if ids is None else tuple(ids)
        self.index = {x: i for i, x in enumerate(self.ids)}
        self.deg_array = np.array(
            [math.fsum(adj.data[adj.indptr[i]:adj.indptr[i + 1]]) for i in range(n)]
        )
        self._rows = None
        super().__init__(
            weight=self._weight_lookup,
            measure=lambda x: self.mu_array[self.index[x]],
            neighbors=lambda x: [self.ids[j] for j in self._row(self.index[x])[0]],
            degree=lambda x: self.deg_array[self.index[x]],
            vertices=lambda: iter(self.ids),
            n_vertices=n,
            order_key=self.index.__getitem__,
            name=name,
        )

    @property
    def edges(self):
        """Arrays ``(i, j, w)`` over unordered edges with ``i < j``."""
        if getattr(self, "_edges", None) is None:
            coo = sparse.triu(self.adjacency, k=1).tocoo()
            self._edges = (coo.row, coo.col, coo.data)
        return self._edges

    def _row(self, i):
        a = self.adjacency
        sl = slice(a.indptr[i], a.indptr[i + 1])
        return a.indices[sl], a.data[sl]

    def _weight_lookup(self, x, y):
        if self._rows is None:
            self._rows = [dict(zip(*self._row(i))) for i in range(self.n_vertices)]
        return self._rows[self.index[x]].get(self.index[y], 0.0)

    @classmethod
    def from_edges(cls, edges, mu, ids=None, name: str = "explicit"):
        """Build from an undirected edge list ``[(i, j, w), ...]`` of indices.

        Each unordered pair may appear once, or twice with the same weight.
        """
        n = len(mu)
        seen: dict = {}
        for i, j, w in edges:
            i, j, w = int(i), int(j), float(w)
            if not (0 <= i < n and 0 <= j < n):
                raise IndexError(f"edge ({i}, {j}) outside 0..{n - 1}")
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if w < 0:
                raise NonPositiveWeight(f"negative weight on edge ({i}, {j})")
            key = (min(i, j), max(i, j))
            if key in seen and seen[key] != w:
                raise ValueError(f"asymmetric duplicate edge {key}: {seen[key]} vs {w}")
            seen[key] = w
        if np.any(np.asarray(mu, dtype=float) <= 0):
            raise NonPositiveWeight("vertex measure must be strictly positive")
        rows = [k[0] for k in seen] + [k[1] for k in seen]
        cols = [k[1] for k in seen] + [k[0] for k in seen]
        vals = list(seen.values()) * 2
        adj = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n))
        return cls(adj, mu, ids=ids, name=name)


def _as_sequence(seq, label: str) -> Callable[[int], float]:
    if callable(seq):
        return seq
    if np.isscalar(seq):
        value = float(seq)
        return lambda n: value
    values = [float(v) for v in seq]

    def lookup(n):
        if n < 0 or n >= len(values):
            raise IndexError(f"{label} is not defined at index {n}")
        return values[n]

    return lookup


@dataclass(frozen=True)
class Potential:
    """Real-valued function on vertices."""

    fn: Callable[[Vertex], float]
    name: str = "V"

    def __call__(self, x: Vertex) -> float:
        return float(self.fn(x))

    def values(self, S: Iterable[Vertex]) -> np.ndarray:
        return np.array([self(x) for x in S], dtype=float)

    @property
    def plus(self) -> "Potential":
        return Potential(lambda x: max(self(x), 0.0), f"{self.name}+")

    @property
    def minus(self) -> "Potential":
        return Potential(lambda x: max(-self(x), 0.0), f"{self.name}-")

    def __add__(self, other: "Potential") -> "Potential":
        return Potential(lambda x: self(x) + other(x), f"{self.name}+{other.name}")

    def shift(self, c: float) -> "Potential":
        return Potential(lambda x: self(x) + c, f"{self.name}{c:+g}")

    @classmethod
    def zero(cls) -> "Potential":
        return cls(lambda x: 0.0, "0")

    @classmethod
    def constant(cls, c: float) -> "Potential":
        c = float(c)
        return cls(lambda x: c, f"{c:g}")

    @classmethod
    def from_sequence(cls, seq, name: str = "V") -> "Potential":
        """Potential on integer vertices ``n -> seq[n]`` (or ``seq(n)``)."""
        return cls(_as_sequence(seq, name), name)

    @classmethod
    def from_mapping(cls, values: dict, default: float = 0.0, name: str = "V") -> "Potential":
        return cls(lambda x: values.get(x, default), name)

    @classmethod
    def from_array(cls, graph: FiniteGraph, values, name: str = "V") -> "Potential":
        arr = np.asarray(values, dtype=float)
        return cls(lambda x: arr[graph.index[x]], name)


@dataclass(frozen=True)
class Exhaustion:
    """Increasing finite vertex subsets ``S_1 ⊂ S_2 ⊂ ...``."""

    subsets: tuple
    root: Vertex
    radii: tuple

    def __len__(self):
        return len(self.subsets)

    def __iter__(self):
        return iter(self.subsets)


@dataclass
class ValidationReport:
    sample_size: int
    asymmetric_pairs: list = field(default_factory=list)
    loops: list = field(default_factory=list)
    negative_weights: list = field(default_factory=list)
    degree_excess: list = field(default_factory=list)
    nonpositive_measure: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (
            self.asymmetric_pairs
            or self.loops
            or self.negative_weights
            or self.degree_excess
            or self.nonpositive_measure
        )

    def violations(self) -> list[tuple[str, object]]:
        out = []
        for kind in ("asymmetric_pairs", "loops", "negative_weights", "degree_excess", "nonpositive_measure"):
            out.extend((kind, item) for item in getattr(self, kind))
        return out


def validate_graph(g: WeightedGraph, sample: Iterable[Vertex], max_neighbors: int = 10_000) -> ValidationReport:
    """Check the standing graph axioms on a finite vertex sample.

    Symmetry is checked on every pair inside the sample and on every listed
    neighbor of a sample vertex.  For vertices with infinite support only the
    first ``max_neighbors`` neighbors are inspected.
    """
    sample = list(dict.fromkeys(sample))
    if not sample:
        raise ValueError("sample must be nonempty")
    report = ValidationReport(sample_size=len(sample))
    checked = set()

    def check_pair(x, y):
        key = frozenset((x, y))
        if key in checked:
            return
        checked.add(key)
        bxy, byx = g.b(x, y), g.b(y, x)
        if bxy != byx:
            report.asymmetric_pairs.append((x, y, bxy, byx))
        if bxy < 0 or byx < 0:
            report.negative_weights.append((x, y))

    for x in sample:
        if g.b(x, x) != 0:
            report.loops.append(x)
        mux = g.mu(x)
        if not mux > 0:
            report.nonpositive_measure.append(x)
        nbrs = itertools.islice(g.neighbors(x), max_neighbors)
        listed = []
        for y in nbrs:
            if y == x:
                continue
            listed.append(g.b(x, y))
            check_pair(x, y)
        degx = g.deg(x)
        if math.fsum(listed) > degx + 1e-12 * (1.0 + abs(degx)):
            report.degree_excess.append((x, math.fsum(listed), degx))
    for x, y in itertools.combinations(sample, 2):
        check_pair(x, y)
    return report


def check_fc(g: WeightedGraph, x: Vertex, tail_bound=None, n_terms: int = 100_000) -> float:
    """Squared norm of ``y -> b(x, y) / mu(y)`` in ``l^2(mu)``.

    That is ``sum_y b(x, y)**2 / mu(y)``; the finiteness condition holds at
    ``x`` iff the result is finite.  For infinite supports the first
    ``n_terms`` terms are summed and ``tail_bound`` (a number, or a callable
    ``m -> bound on the remaining tail``) is added, so the result is an
    upper bound.  ``math.inf`` certifies failure.
    """
    if g.has_finite_support(x):
        return math.fsum(g.b(x, y) ** 2 / g.mu(y) for y in g.neighbor_list(x))
    if tail_bound is None:
        raise UnboundedTail(f"vertex {x!r} has infinite support; supply tail_bound")
    head = math.fsum(g.b(x, y) ** 2 / g.mu(y) for y in itertools.islice(g.neighbors(x), n_terms))
    tail = tail_bound(n_terms) if callable(tail_bound) else float(tail_bound)
    return head + tail


def connected_components(g: WeightedGraph, S: Iterable[Vertex]) -> list[list]:
    """Partition ``S`` by the edges ``b(x, y) > 0`` that stay inside ``S``."""
    verts = g.sorted_vertices(S)
    if not verts:
        return []
    parent = {x: x for x in verts}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[ry] = rx

    members = set(verts)
    for x in verts:
        if g.has_finite_support(x):
            for y in g.neighbor_list(x):
                if y in members and g.b(x, y) > 0:
                    union(x, y)
        else:
            for y in verts:
                if y != x and g.b(x, y) > 0:
                    union(x, y)
    groups: dict = {}
    for x in verts:
        groups.setdefault(find(x), []).append(x)
    return sorted(groups.values(), key=lambda c: g.order_key(c[0]))


def ball_exhaustion(
    g: WeightedGraph, root: Vertex, radii: Sequence[int], vertex_cap: int = 1_000_000
) -> Exhaustion:
    """Combinatorial balls around ``root`` for each radius."""
    radii = tuple(int(r) for r in radii)
    if any(r < 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be non-negative and strictly increasing")
    dist = {root: 0}
    frontier = deque([root])
    rmax = radii[-1] if radii else 0
    while frontier:
        x = frontier.popleft()
        if dist[x] >= rmax:
            continue
        for y in g.neighbors(x):
            if y in dist or g.b(x, y) <= 0:
                continue
            dist[y] = dist[x] + 1
            if len(dist) > vertex_cap:
                raise NotLocallyFinite(f"ball around {root!r} exceeds {vertex_cap} vertices")
            frontier.append(y)
    subsets = tuple(g.sorted_vertices(x for x, d in dist.items() if d <= r) for r in radii)
    return Exhaustion(subsets=subsets, root=root, radii=radii)


# -- generator families ------------------------------------------------------


def make_birth_death(b_seq, mu_seq, n_vertices: int | None = None, name: str = "birth_death") -> WeightedGraph:
    """Birth-death chain on ``{0, 1, 2, ...}`` with ``b(n, n+1) = b_seq(n)``.

    ``b_seq`` and ``mu_seq`` may be callables, scalars or sequences.  With
    ``n_vertices=None`` the chain is infinite and sequences are read lazily;
    otherwise it is the finite chain ``{0, ..., n_vertices - 1}``.
    Non-positive values raise :class:`NonPositiveWeight` when read.
    """
    b_raw = _as_sequence(b_seq, "b_seq")
    mu_raw = _as_sequence(mu_seq, "mu_seq")

    def bn(n):
        v = float(b_raw(n))
        if not v > 0:
            raise NonPositiveWeight(f"b_seq({n}) = {v} is not positive")
        return v

    def mun(n):
        v = float(mu_raw(n))
        if not v > 0:
            raise NonPositiveWeight(f"mu_seq({n}) = {v} is not positive")
        return v

    N = n_vertices
    if N is not None:
        for n in range(N - 1):
            bn(n)
        for n in range(N):
            mun(n)

    def inside(n):
        return isinstance(n, (int, np.integer)) and n >= 0 and (N is None or n < N)

    def weight(x, y):
        if not (inside(x) and inside(y)) or abs(x - y) != 1:
            return 0.0
        return bn(min(x, y))

    def neighbors(x):
        out = [x - 1] if x > 0 else []
        if N is None or x + 1 < N:
            out.append(x + 1)
        return out

    def degree(x):
        return math.fsum(weight(x, y) for y in neighbors(x))

    return WeightedGraph(
        weight=weight,
        measure=mun,
        neighbors=neighbors,
        degree=degree,
        vertices=(lambda: iter(range(N))) if N is not None else (lambda: itertools.count()),
        n_vertices=N,
        name=name,
    )


def make_chain(weight: float = 1.0, measure: float = 1.0) -> WeightedGraph:
    """Infinite half-line chain with constant coefficients."""
    return make_birth_death(weight, measure, name="chain")


def make_path(n: int, weight: float = 1.0, measure: float = 1.0) -> FiniteGraph:
    """Finite path ``P_n`` on vertices ``0..n-1``."""
    mu = np.broadcast_to(np.asarray(measure, dtype=float), (n,)).copy()
    return FiniteGraph.from_edges([(i, i + 1, weight) for i in range(n - 1)], mu, name=f"P{n}")


def make_star(n_leaves: int, weight: float = 1.0, measure: float = 1.0) -> FiniteGraph:
    """Star with center ``0`` and leaves ``1..n_leaves``."""
    mu = np.full(n_leaves + 1, float(measure))
    return FiniteGraph.from_edges([(0, i, weight) for i in range(1, n_leaves + 1)], mu, name=f"star{n_leaves}")


def make_infinite_star(
    leaf_weight: Callable[[int], float],
    center_degree: float,
    leaf_measure: Callable[[int], float] | float = 1.0,
    center_measure: float = 1.0,
) -> WeightedGraph:
    """Star with center ``"c"`` and leaves ``("leaf", n)``, ``n >= 1``.

    The center has infinitely many neighbors, so its degree must be given in
    closed form.  Leaves are only adjacent to the center.
    """
    lm = _as_sequence(leaf_measure, "leaf_measure")

    def weight(x, y):
        if x == "c" and isinstance(y, tuple):
            return float(leaf_weight(y[1]))
        if y == "c" and isinstance(x, tuple):
            return float(leaf_weight(x[1]))
        return 0.0

    def neighbors(x):
        if x == "c":
            return (("leaf", n) for n in itertools.count(1))
        return ["c"]

    def vertices():
        return itertools.chain(["c"], (("leaf", n) for n in itertools.count(1)))

    return WeightedGraph(
        weight=weight,
        measure=lambda x: center_measure if x == "c" else float(lm(x[1])),
        neighbors=neighbors,
        degree=lambda x: float(center_degree) if x == "c" else float(leaf_weight(x[1])),
        vertices=vertices,
        finite_support=lambda x: x != "c",
        order_key=lambda x: 0 if x == "c" else x[1],
        name="infinite_star",
    )


def make_lattice(dim: int, weight: float = 1.0, measure: float = 1.0) -> WeightedGraph:
    """Integer lattice ``Z^dim`` with nearest-neighbor edges; vertices are tuples."""
    weight = float(weight)
    measure = float(measure)
    units = [tuple(int(i == j) for j in range(dim)) for i in range(dim)]

    def neighbors(x):
        out = []
        for e in units:
            out.append(tuple(a - b for a, b in zip(x, e)))
            out.append(tuple(a + b for a, b in zip(x, e)))
        return out

    def wfn(x, y):
        return weight if sum(abs(a - b) for a, b in zip(x, y)) == 1 else 0.0

    def vertices():
        for r in itertools.count():
            shell = [p for p in itertools.product(range(-r, r + 1), repeat=dim) if sum(map(abs, p)) == r]
            yield from sorted(shell)

    return WeightedGraph(
        weight=wfn,
        measure=lambda x: measure,
        neighbors=neighbors,
        degree=lambda x: 2 * dim * weight,
        vertices=vertices,
        order_key=lambda x: (sum(map(abs, x)), x),
        name=f"Z{dim}",
    )
