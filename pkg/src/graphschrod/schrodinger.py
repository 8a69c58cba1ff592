"""The formal Schrödinger operator ``L_V`` and its Dirichlet sections.

``L_V f(x) = (1/mu(x)) sum_y b(x, y) (f(x) - f(y)) + V(x) f(x)``.

A Dirichlet section over a finite vertex set ``S`` is the compression of
``L_V`` to functions supported in ``S``; its diagonal keeps the full degree
``deg(x)`` so that edges leaving ``S`` still cost energy.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Mapping
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable

import numpy as np
from scipy import sparse

from .errors import DomainViolation, MissingDegree, NegativeInput, NotAnEigenvector
from .graph import FiniteGraph, Potential, Vertex, WeightedGraph

__all__ = [
    "FiniteSection",
    "KatoReport",
    "vertex_function",
    "apply_formal",
    "in_domain_F",
    "truncate_negative_part",
    "truncate_above",
    "dirichlet_section",
    "kato_inequality_check",
]


def vertex_function(g: WeightedGraph, f):
    """Normalize a vertex function to ``(evaluate, support)``.

    ``f`` may be a mapping (finitely supported, missing vertices are 0), an
    array indexed like ``g.ids`` for a :class:`FiniteGraph`, or a callable.
    ``support`` is ``None`` when it is not known to be finite.
    """
    if isinstance(f, Mapping):
        return (lambda x: f.get(x, 0.0)), [x for x, v in f.items() if v != 0]
    if isinstance(f, (np.ndarray, list, tuple)):
        if not isinstance(g, FiniteGraph):
            raise TypeError("array-valued functions need a FiniteGraph")
        arr = np.asarray(f)
        return (lambda x: arr[g.index[x]]), [g.ids[i] for i in np.flatnonzero(arr)]
    if callable(f):
        return f, None
    raise TypeError(f"cannot interpret {type(f).__name__} as a vertex function")


def _csum(values: Iterable[complex]) -> complex:
    re, im = [], []
    for v in values:
        re.append(v.real)
        im.append(v.imag)
    s = complex(math.fsum(re), math.fsum(im))
    return s if s.imag else s.real


def in_domain_F(g: WeightedGraph, f, x: Vertex, tail_bound=None, n_terms: int = 100_000):
    """Whether ``sum_y b(x, y) |f(y)|`` converges.

    Returns ``True``, ``False`` or ``None`` (unknown).  Finitely supported
    ``f`` and vertices with finite neighbor lists are decided directly.  On
    an infinite neighbor list a general ``f`` needs ``tail_bound``: a number
    or callable ``m -> bound`` on the sum beyond the first ``m`` terms.
    """
    value, support = vertex_function(g, f)
    if support is not None:
        s = math.fsum(g.b(x, y) * abs(value(y)) for y in support)
        return math.isfinite(s)
    if g.has_finite_support(x):
        return math.isfinite(math.fsum(g.b(x, y) * abs(value(y)) for y in g.neighbor_list(x)))
    if tail_bound is None:
        return None
    head = math.fsum(g.b(x, y) * abs(value(y)) for y in itertools.islice(g.neighbors(x), n_terms))
    tail = tail_bound(n_terms) if callable(tail_bound) else float(tail_bound)
    return math.isfinite(head) and math.isfinite(tail)


def apply_formal(g: WeightedGraph, V: Potential, f, x: Vertex, tail_bound=None, n_terms: int = 100_000):
    """Evaluate ``L_V f`` at the vertex ``x``.

    For a general ``f`` on an infinite neighbor list, the first ``n_terms``
    terms are summed after ``tail_bound`` certifies convergence.
    """
    ok = in_domain_F(g, f, x, tail_bound=tail_bound, n_terms=n_terms)
    if not ok:
        raise DomainViolation(f"sum_y b({x!r}, y)|f(y)| not certified finite")
    value, support = vertex_function(g, f)
    if support is not None:
        coupling = _csum(g.b(x, y) * value(y) for y in support if y != x)
    elif g.has_finite_support(x):
        coupling = _csum(g.b(x, y) * value(y) for y in g.neighbor_list(x))
    else:
        coupling = _csum(g.b(x, y) * value(y) for y in itertools.islice(g.neighbors(x), n_terms))
    mux = g.mu(x)
    return (g.deg(x) / mux + V(x)) * value(x) - coupling / mux


def truncate_negative_part(V: Potential, k: float) -> Potential:
    """``V+ - min(V-, k)``: the negative part of ``V`` cut off at depth ``k``."""
    if not k >= 1:
        raise ValueError(f"truncation level must be >= 1, got {k}")
    k = float(k)

    def fn(x):
        v = V(x)
        return max(v, 0.0) - min(max(-v, 0.0), k)

    return Potential(fn, f"{V.name}^({k:g})")


def truncate_above(W: Potential, k: float, check_on: Iterable[Vertex] | None = None) -> Potential:
    """``min(W, k)`` for a non-negative ``W``.

    Negative values raise :class:`NegativeInput` when evaluated, or eagerly
    on ``check_on``.
    """
    if not k >= 1:
        raise ValueError(f"truncation level must be >= 1, got {k}")
    k = float(k)

    def fn(x):
        w = W(x)
        if w < 0:
            raise NegativeInput(f"{W.name}({x!r}) = {w} < 0")
        return min(w, k)

    out = Potential(fn, f"min({W.name},{k:g})")
    if check_on is not None:
        for x in check_on:
            out(x)
    return out


@dataclass(frozen=True, eq=False)
class FiniteSection:
    """Dirichlet compression of ``L_V`` to a finite vertex set.

    ``B`` is the symmetrized matrix ``D^{1/2} A D^{-1/2}`` with
    ``D = diag(mu)``: off-diagonal ``-b(x, y)/sqrt(mu(x) mu(y))`` and
    diagonal ``deg(x)/mu(x) + V(x)``.  Vectors handed to section methods are
    ordinary vertex values in section order unless a name says ``sym``.
    """

    vertices: tuple
    mu: np.ndarray
    degree: np.ndarray
    potential: np.ndarray
    B: sparse.csr_matrix
    interior: np.ndarray
    name: str = "section"

    @property
    def n(self) -> int:
        return len(self.vertices)

    @cached_property
    def index(self) -> dict:
        return {x: i for i, x in enumerate(self.vertices)}

    @cached_property
    def sqrt_mu(self) -> np.ndarray:
        return np.sqrt(self.mu)

    @property
    def diag(self) -> np.ndarray:
        return self.B.diagonal()

    @cached_property
    def dense(self) -> np.ndarray:
        return self.B.toarray()

    def action_matrix(self) -> sparse.csr_matrix:
        """The un-symmetrized action ``A = D^{-1/2} B D^{1/2}``."""
        return sparse.diags(1.0 / self.sqrt_mu) @ self.B @ sparse.diags(self.sqrt_mu)

    def to_sym(self, f):
        f = np.asarray(f)
        return f * (self.sqrt_mu if f.ndim == 1 else self.sqrt_mu[:, None])

    def from_sym(self, g):
        g = np.asarray(g)
        return g / (self.sqrt_mu if g.ndim == 1 else self.sqrt_mu[:, None])

    def apply(self, f) -> np.ndarray:
        return self.from_sym(self.B @ self.to_sym(f))

    def inner(self, f, h) -> complex:
        """``(f, h) = sum mu f conj(h)``."""
        return np.sum(self.mu * np.asarray(f) * np.conj(h))

    def norm(self, f) -> float:
        return float(np.sqrt(np.sum(self.mu * np.abs(np.asarray(f)) ** 2)))

    def quadratic(self, f) -> float:
        """``(A f, f)`` in ``l^2(mu)``."""
        s = self.to_sym(f)
        return float(np.real(np.vdot(s, self.B @ s)))

    def with_added_potential(self, w, name: str | None = None) -> "FiniteSection":
        """Section of ``V + w``, built by adding ``diag(w)`` to ``B``."""
        w = np.broadcast_to(np.asarray(w, dtype=float), (self.n,))
        B = (self.B + sparse.diags(w)).tocsr()
        B.sort_indices()
        return FiniteSection(
            vertices=self.vertices,
            mu=self.mu,
            degree=self.degree,
            potential=self.potential + w,
            B=B,
            interior=self.interior,
            name=name or self.name,
        )

    def shifted(self, c: float) -> "FiniteSection":
        return self.with_added_potential(float(c))

    def to_coo_text(self) -> str:
        """``row col value`` lines of ``B``, row-major, exact float repr."""
        coo = self.B.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return "".join(f"{coo.row[i]} {coo.col[i]} {float(coo.data[i])!r}\n" for i in order)


def _finite_graph_section(g: FiniteGraph, pot: np.ndarray, verts: tuple, name: str) -> FiniteSection:
    idx = np.array([g.index[x] for x in verts], dtype=np.intp)
    sub = g.adjacency[idx][:, idx].tocoo()
    mu = g.mu_array[idx]
    deg = g.deg_array[idx]
    off = -sub.data / np.sqrt(mu[sub.row] * mu[sub.col])
    n = len(verts)
    B = sparse.coo_matrix(
        (np.concatenate([off, deg / mu + pot]), (np.concatenate([sub.row, np.arange(n)]), np.concatenate([sub.col, np.arange(n)]))),
        shape=(n, n),
    ).tocsr()
    B.sort_indices()
    full = np.diff(g.adjacency.indptr)[idx]
    inside = np.bincount(sub.row, minlength=n)
    return FiniteSection(verts, mu, deg, pot, B, full == inside, name)


def dirichlet_section(g: WeightedGraph, V: Potential, S: Iterable[Vertex], name: str | None = None) -> FiniteSection:
    """Assemble the Dirichlet section of ``L_V`` over ``S``."""
    verts = g.sorted_vertices(S)
    if not verts:
        raise ValueError("section vertex set is empty")
    name = name or f"{g.name}|{V.name}|n={len(verts)}"
    pot = V.values(verts)
    if isinstance(g, FiniteGraph):
        return _finite_graph_section(g, pot, verts, name)

    n = len(verts)
    index = {x: i for i, x in enumerate(verts)}
    mu = np.array([g.mu(x) for x in verts])
    deg = np.empty(n)
    for i, x in enumerate(verts):
        try:
            d = g.deg(x)
        except Exception as exc:
            raise MissingDegree(f"degree unavailable at {x!r}") from exc
        if d is None or not math.isfinite(d):
            raise MissingDegree(f"degree unavailable at {x!r}")
        deg[i] = d
    rows, cols, vals = [], [], []
    interior = np.zeros(n, dtype=bool)
    for i, x in enumerate(verts):
        if g.has_finite_support(x):
            nbrs = g.neighbor_list(x)
            interior[i] = all(y in index for y in nbrs)
            pairs = (index[y] for y in nbrs if y in index)
        else:
            pairs = (j for j in range(n) if j != i and g.b(x, verts[j]) > 0)
        for j in pairs:
            if j <= i:
                continue
            w = -g.b(x, verts[j]) / math.sqrt(mu[i] * mu[j])
            rows += [i, j]
            cols += [j, i]
            vals += [w, w]
    rows += list(range(n))
    cols += list(range(n))
    vals += list(deg / mu + pot)
    B = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    B.sort_indices()
    return FiniteSection(verts, mu, deg, pot, B, interior, name)


@dataclass
class KatoReport:
    worst_margin: float
    passed: bool
    n_interior: int
    residual: float
    scale: float


def kato_inequality_check(
    g: WeightedGraph,
    W: Potential,
    W0: Potential,
    f,
    beta: float,
    S: Iterable[Vertex],
    tol: float = 1e-9,
) -> KatoReport:
    """Check ``L_{W0}|f| <= beta |f|`` at the interior vertices of ``S``.

    ``f`` must be an eigenvector of the section of ``L_W`` over ``S`` with
    eigenvalue ``beta`` (relative residual at most ``tol``) and ``W >= W0``
    on ``S``.  The margin ``beta|f| - L_{W0}|f|`` must stay above
    ``-tol * max|f|``.
    """
    sec = dirichlet_section(g, W, S)
    sec0 = dirichlet_section(g, W0, S)
    if np.any(sec.potential < sec0.potential):
        raise NegativeInput("W >= W0 fails on the section")
    f = np.asarray(f)
    fnorm = sec.norm(f)
    residual = sec.norm(sec.apply(f) - beta * f)
    if residual > tol * fnorm:
        raise NotAnEigenvector(f"residual {residual:.3e} exceeds {tol:g} * {fnorm:.3e}")
    absf = np.abs(f)
    margins = beta * absf - np.real(sec0.apply(absf))
    scale = float(absf.max()) if absf.size else 0.0
    inner = margins[sec.interior]
    worst = float(inner.min()) if inner.size else math.inf
    return KatoReport(
        worst_margin=worst,
        passed=bool(worst >= -tol * scale) if inner.size else True,
        n_interior=int(sec.interior.sum()),
        residual=float(residual),
        scale=scale,
    )
