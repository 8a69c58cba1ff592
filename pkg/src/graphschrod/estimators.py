"""Estimator-style wrapper around the shifted resolvent of a section."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .graph import Potential, WeightedGraph
from .schrodinger import dirichlet_section
from .solvers import ShiftedOperator, lambda0

__all__ = ["SchrodingerResolvent", "check_vertex_functions"]


def check_vertex_functions(X, n_vertices: int) -> np.ndarray:
    """Validate a batch of vertex functions, one per row."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != n_vertices:
        raise ValueError(f"expected {n_vertices} columns (one per vertex), got {X.shape[1]}")
    return X


class SchrodingerResolvent(TransformerMixin, BaseEstimator):
    """Apply ``(A + alpha)^{-1}`` of a Dirichlet section to vertex functions.

    Parameters
    ----------
    graph : WeightedGraph
        Graph carrying weights, measure and degree.
    potential : Potential, optional
        Potential ``V``; zero when omitted.
    vertices : iterable, optional
        Section vertex set.  Required for infinite graphs.
    alpha : float, optional
        Spectral shift.  Defaults to ``1 + max(0, -lambda0)``.
    tol : float
        Relative residual tolerance of the solves.

    Attributes
    ----------
    section_ : FiniteSection
    lambda0_ : float
    alpha_ : float
    n_features_in_ : int
    """

    def __init__(self, graph: WeightedGraph, potential: Potential | None = None, vertices=None, alpha=None, tol=1e-10):
        self.graph = graph
        self.potential = potential
        self.vertices = vertices
        self.alpha = alpha
        self.tol = tol

    def fit(self, X=None, y=None):
        V = self.potential if self.potential is not None else Potential.zero()
        S = self.vertices if self.vertices is not None else list(self.graph.vertices())
        self.section_ = dirichlet_section(self.graph, V, S)
        self.lambda0_ = lambda0(self.section_)
        self.alpha_ = float(self.alpha) if self.alpha is not None else 1.0 + max(0.0, -self.lambda0_)
        self._op = ShiftedOperator(self.section_, self.alpha_, lam0=self.lambda0_, tol=self.tol)
        self.n_features_in_ = self.section_.n
        if X is not None:
            check_vertex_functions(X, self.n_features_in_)
        return self

    def transform(self, X):
        """Rows of ``X`` mapped through the resolvent."""
        check_is_fitted(self, "section_")
        X = check_vertex_functions(X, self.n_features_in_)
        return self._op(X.T).T

    def inverse_transform(self, X):
        """Rows of ``X`` mapped through ``A + alpha``."""
        check_is_fitted(self, "section_")
        X = check_vertex_functions(X, self.n_features_in_)
        return (self.section_.apply(X.T) + self.alpha_ * X.T).T
