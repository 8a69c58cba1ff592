"""Pairings, energy forms and the discrete Green's formula.

For finitely supported ``f, h`` the form

    Q_W(f, h) = 1/2 sum_{x,y} b(x,y) (f(x)-f(y)) conj(h(x)-h(y))
                + sum_x mu(x) W(x) f(x) conj(h(x))

is computed from ``b`` on the support plus the degree oracle, so vertices
with infinitely many neighbors are handled exactly.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .errors import DomainViolation, NoConvergence, NotLowerBounded
from .graph import FiniteGraph, Potential, WeightedGraph
from .reports import to_csv
from .schrodinger import FiniteSection, apply_formal, vertex_function

__all__ = [
    "FormValue",
    "FormNorm",
    "GreensTerms",
    "EnergyCheck",
    "pairing_a",
    "form_Q",
    "form_Q_quadratic",
    "greens_identity_terms",
    "greens_identity_residual",
    "form_norm_eval",
    "finite_energy_check",
    "form_values_csv",
]


@dataclass(frozen=True)
class FormValue:
    energy_part: complex
    potential_part: complex

    @property
    def total(self):
        return self.energy_part + self.potential_part


@dataclass(frozen=True)
class FormNorm:
    lambda0: float
    beta: float
    value: float


@dataclass(frozen=True)
class GreensTerms:
    lhs: complex
    rhs: complex
    flip: complex | None
    residual: float

    @property
    def scale(self) -> float:
        return abs(self.lhs) + abs(self.rhs)


@dataclass(frozen=True)
class EnergyCheck:
    finite: bool | None
    value: float | None


def _csum(values) -> complex:
    values = list(values)
    return complex(math.fsum(v.real for v in values), math.fsum(complex(v).imag for v in values))


def _real_if_possible(z):
    z = complex(z)
    return z.real if z.imag == 0 else z


def pairing_a(u, w, mu):
    """Anti-duality pairing ``sum_x mu(x) u(x) conj(w(x))``.

    ``w`` must be finitely supported: a mapping, or an array aligned with
    ``u`` and ``mu``.  ``u`` and ``mu`` may be callables when ``w`` is a
    mapping.
    """
    if isinstance(w, Mapping):
        uf = (lambda x: u.get(x, 0.0)) if isinstance(u, Mapping) else u
        mf = mu.__getitem__ if isinstance(mu, Mapping) else mu
        return _real_if_possible(_csum(mf(x) * uf(x) * np.conj(v) for x, v in w.items()))
    u, w, mu = np.asarray(u), np.asarray(w), np.asarray(mu, dtype=float)
    return _real_if_possible(np.sum(mu * u * np.conj(w)))


def _form_finite_graph(g: FiniteGraph, W, f, h):
    i, j, w = g.edges
    f = np.asarray(f)
    h = np.asarray(h)
    energy = np.sum(w * (f[i] - f[j]) * np.conj(h[i] - h[j]))
    pot = W if isinstance(W, np.ndarray) else W.values(g.ids)
    potential = np.sum(g.mu_array * pot * f * np.conj(h))
    return energy, potential


def form_Q(g: WeightedGraph, W, f, h) -> FormValue:
    """Sesquilinear form ``Q_W(f, h)`` for finitely supported ``f, h``."""
    if isinstance(g, FiniteGraph) and not isinstance(f, Mapping):
        e, p = _form_finite_graph(g, W, f, h)
        return FormValue(_real_if_possible(e), _real_if_possible(p))
    if isinstance(W, np.ndarray):
        W = Potential.from_array(g, W)
    fv, fs = vertex_function(g, f)
    hv, hs = vertex_function(g, h)
    if fs is None or hs is None:
        raise DomainViolation("form_Q needs finitely supported functions")
    S = g.sorted_vertices(list(fs) + list(hs))
    fa = np.array([fv(x) for x in S], dtype=complex)
    ha = np.array([hv(x) for x in S], dtype=complex)
    bS = np.array([[g.b(x, y) if x != y else 0.0 for y in S] for x in S]) if S else np.zeros((0, 0))
    deg = np.array([g.deg(x) for x in S])
    outside = deg - bS.sum(axis=1) if S else deg
    diff_f = fa[:, None] - fa[None, :]
    diff_h = ha[:, None] - ha[None, :]
    energy = np.sum(outside * fa * np.conj(ha)) + 0.5 * np.sum(bS * diff_f * np.conj(diff_h))
    mu = np.array([g.mu(x) for x in S])
    potential = np.sum(mu * W.values(S) * fa * np.conj(ha))
    return FormValue(_real_if_possible(energy), _real_if_possible(potential))


def form_Q_quadratic(g: WeightedGraph, W, f) -> FormValue:
    """Quadratic form ``Q^c_W(f) = Q_W(f, f)``; both parts are real."""
    val = form_Q(g, W, f, f)
    return FormValue(float(np.real(val.energy_part)), float(np.real(val.potential_part)))


def _greens_finite_graph(g: FiniteGraph, W, f, u) -> GreensTerms:
    f = np.asarray(f, dtype=complex)
    u = np.asarray(u, dtype=complex)
    pot = W if isinstance(W, np.ndarray) else W.values(g.ids)
    mu = g.mu_array
    mu_Lf = g.deg_array * f - g.adjacency @ f + mu * pot * f
    lhs = np.sum(mu_Lf * np.conj(u))
    i, j, w = g.edges
    rhs = np.sum(w * (f[i] - f[j]) * np.conj(u[i] - u[j])) + np.sum(mu * pot * f * np.conj(u))
    mu_Lu = g.deg_array * u - g.adjacency @ u + mu * pot * u
    flip = np.sum(f * np.conj(mu_Lu))
    residual = max(abs(lhs - rhs), abs(lhs - flip))
    return GreensTerms(complex(lhs), complex(rhs), complex(flip), float(residual))


def greens_identity_terms(g: WeightedGraph, W, f, u, tail_bound=None) -> GreensTerms:
    """Both sides of Green's formula for ``f`` in the domain and ``u`` finitely supported.

    ``lhs = (L_W f, u)_a`` and ``rhs`` is the energy-plus-potential
    expression.  When ``f`` is also finitely supported, ``flip`` is
    ``sum mu f conj(L_W u)``.  ``residual`` is the largest discrepancy.
    """
    if isinstance(g, FiniteGraph) and not isinstance(f, Mapping) and not isinstance(u, Mapping):
        return _greens_finite_graph(g, W, f, u)
    if isinstance(W, np.ndarray):
        W = Potential.from_array(g, W)
    fv, fs = vertex_function(g, f)
    uv, us = vertex_function(g, u)
    if us is None:
        raise DomainViolation("u must be finitely supported")
    T = g.sorted_vertices(us)
    Tset = set(T)
    lhs = _csum(g.mu(x) * apply_formal(g, W, f, x, tail_bound=tail_bound) * np.conj(uv(x)) for x in T)

    terms = []
    for a, x in enumerate(T):
        for y in T[a + 1:]:
            bxy = g.b(x, y)
            if bxy:
                terms.append(bxy * (fv(x) - fv(y)) * np.conj(uv(x) - uv(y)))
        # edges leaving T: sum_{y not in T} b(x,y) (f(x) - f(y)) conj(u(x))
        inside = math.fsum(g.b(x, y) for y in T if y != x)
        if fs is not None:
            far = _csum(g.b(x, y) * fv(y) for y in fs if y not in Tset)
        elif g.has_finite_support(x):
            far = _csum(g.b(x, y) * fv(y) for y in g.neighbor_list(x) if y not in Tset)
        else:
            raise DomainViolation(f"cannot sum f over the infinite neighborhood of {x!r}")
        terms.append(((g.deg(x) - inside) * fv(x) - far) * np.conj(uv(x)))
        terms.append(g.mu(x) * W(x) * fv(x) * np.conj(uv(x)))
    rhs = _csum(terms)

    flip = None
    residual = abs(lhs - rhs)
    if fs is not None:
        flip = _csum(g.mu(x) * fv(x) * np.conj(apply_formal(g, W, u, x)) for x in g.sorted_vertices(fs))
        residual = max(residual, abs(lhs - flip))
    return GreensTerms(complex(lhs), complex(rhs), None if flip is None else complex(flip), float(residual))


def greens_identity_residual(g: WeightedGraph, W, f, u, tail_bound=None) -> float:
    return greens_identity_terms(g, W, f, u, tail_bound=tail_bound).residual


def form_norm_eval(section: FiniteSection, u, beta: float = 1.0, lam0: float | None = None, tol: float = 1e-10) -> FormNorm:
    """Form norm ``sqrt(h(u) + (beta - lambda0) ||u||^2)`` on a section.

    ``lambda0`` is the smallest eigenvalue of the section (computed when not
    supplied); it stands in for the infimum of the form.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if lam0 is None:
        from .solvers import lambda0

        try:
            lam0 = lambda0(section)
        except NoConvergence as exc:
            raise NotLowerBounded(str(exc)) from exc
    u = np.asarray(u)
    sq = section.quadratic(u) + (beta - lam0) * section.norm(u) ** 2
    if sq < -tol * max(1.0, section.norm(u) ** 2):
        raise NotLowerBounded(f"form norm squared {sq:.3e} < 0; lambda0 too large")
    return FormNorm(lambda0=float(lam0), beta=float(beta), value=math.sqrt(max(sq, 0.0)))


def finite_energy_check(g: WeightedGraph, W, f) -> EnergyCheck:
    """Whether ``f`` has finite energy, with the energy sum when computable.

    The value is ``sum_{x,y} b|f(x)-f(y)|^2 + sum_x mu |W| |f|^2``.
    Functions that are not finitely supported on an infinite graph give
    ``finite=None``.
    """
    if isinstance(g, FiniteGraph) and not isinstance(f, Mapping) and not callable(f):
        absW = np.abs(W if isinstance(W, np.ndarray) else W.values(g.ids))
        e, p = _form_finite_graph(g, absW, f, f)
        return EnergyCheck(True, float(2 * np.real(e) + np.real(p)))
    _, support = vertex_function(g, f)
    if support is None:
        if g.is_finite:
            f = {x: f(x) for x in g.vertices()}
        else:
            return EnergyCheck(None, None)
    absW = Potential(lambda x: abs(W(x)), "|W|")
    val = form_Q_quadratic(g, absW, f)
    value = 2 * val.energy_part + val.potential_part
    return EnergyCheck(math.isfinite(value), value)


def form_values_csv(rows) -> str:
    """CSV for ``(graph_id, W_id, vector_id, FormValue)`` tuples."""
    header = ["graph_id", "W_id", "vector_id", "energy_part", "potential_part", "total"]
    return to_csv(
        header,
        ([gid, wid, vid, np.real(v.energy_part), np.real(v.potential_part), np.real(v.total)] for gid, wid, vid, v in rows),
    )
