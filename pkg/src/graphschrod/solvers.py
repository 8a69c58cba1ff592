"""Shifted solves, bottom-of-spectrum estimates and resolvent diagnostics.

All solves run on the symmetrized matrix ``B`` of a section.  A vector
``u`` in ``l^2(mu)`` corresponds to ``sqrt(mu) * u`` in Euclidean
coordinates, so ``mu``-weighted norms of residuals equal Euclidean norms of
the symmetrized residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import sparse
from scipy.sparse import linalg as spla

from .errors import IndexMismatch, MonotonicityViolation, NegativeInput, NoConvergence, ShiftTooSmall
from .reports import to_csv
from .schrodinger import FiniteSection

__all__ = [
    "DENSE_MAX",
    "EigenEstimate",
    "ResolventResult",
    "ShiftedOperator",
    "PositivityReport",
    "DominationReport",
    "ConvergenceRow",
    "ConvergenceReport",
    "lambda0",
    "resolvent_apply",
    "positivity_check",
    "domination_check",
    "src_monitor",
    "operator_function",
]

DENSE_MAX = 2000
SHIFT_MARGIN = 1e-8


@dataclass(frozen=True)
class EigenEstimate:
    value: float
    vector: np.ndarray  # vertex values, unit norm in l^2(mu)
    residual: float


@dataclass(frozen=True)
class ResolventResult:
    solution: np.ndarray
    alpha: float
    residual: float
    iterations: int


def _norm_bound(B) -> float:
    return float(abs(B).sum(axis=1).max()) if B.shape[0] else 0.0


def lambda0(section: FiniteSection, tol: float = 1e-8, return_certificate: bool = False):
    """Smallest eigenvalue of the section.

    Dense ``eigh`` for ``n <= DENSE_MAX``; above that, shift-invert Lanczos
    around a Gershgorin lower bound.  The eigenpair must satisfy
    ``||B v - lambda v|| <= tol * max(1, ||B||_inf)``.
    """
    B = section.B
    n = section.n
    scale = max(1.0, _norm_bound(B))
    if n <= DENSE_MAX:
        w, V = sla.eigh(section.dense, subset_by_index=[0, 0])
        lam, v = float(w[0]), V[:, 0]
    else:
        diag = B.diagonal()
        radius = np.asarray(abs(B).sum(axis=1)).ravel() - np.abs(diag)
        sigma = float(np.min(diag - radius)) - 1.0
        try:
            w, V = spla.eigsh(B.tocsc(), k=1, sigma=sigma, which="LM", tol=tol * 1e-2)
        except spla.ArpackNoConvergence as exc:
            raise NoConvergence(f"lambda0: {exc}") from exc
        lam, v = float(w[0]), V[:, 0]
    residual = float(np.linalg.norm(B @ v - lam * v))
    if residual > tol * scale:
        raise NoConvergence(f"lambda0 residual {residual:.3e} exceeds {tol * scale:.3e}")
    if not return_certificate:
        return lam
    f = section.from_sym(v)
    return EigenEstimate(lam, f / section.norm(f), residual)


class ShiftedOperator:
    """Factorized ``A + alpha`` on a section, for repeated resolvent solves."""

    def __init__(
        self,
        section: FiniteSection,
        alpha: float,
        lam0: float | None = None,
        tol: float = 1e-10,
        margin: float = SHIFT_MARGIN,
    ):
        if lam0 is None:
            lam0 = lambda0(section)
        if not alpha > -lam0 + margin:
            raise ShiftTooSmall(f"alpha={alpha} must exceed -lambda0 + {margin:g} = {-lam0 + margin:.6g}")
        self.section = section
        self.alpha = float(alpha)
        self.lam0 = float(lam0)
        self.tol = tol
        n = section.n
        self.shifted = (section.B + self.alpha * sparse.identity(n, format="csr")).tocsr()
        self._op_norm = _norm_bound(self.shifted)
        self._chol = None
        if n <= DENSE_MAX:
            self._chol = sla.cho_factor(section.dense + self.alpha * np.eye(n), lower=True)
        else:
            self._precond = spla.LinearOperator(
                (n, n), matvec=lambda x, d=1.0 / self.shifted.diagonal(): d * x.ravel(), dtype=float
            )

    def _solve_sym(self, rhs: np.ndarray):
        if self._chol is not None:
            return sla.cho_solve(self._chol, rhs), 0
        cols = rhs.reshape(rhs.shape[0], -1)
        out = np.empty_like(cols, dtype=np.result_type(cols, float))
        total = 0
        for c in range(cols.shape[1]):
            count = [0]

            def cb(_):
                count[0] += 1

            parts = []
            for part in (cols[:, c].real, cols[:, c].imag) if np.iscomplexobj(cols) else (cols[:, c],):
                x, info = spla.cg(self.shifted, part, rtol=self.tol * 0.1, atol=0.0, M=self._precond, maxiter=10 * len(part), callback=cb)
                if info != 0:
                    raise NoConvergence(f"conjugate gradient stopped with info={info}")
                parts.append(x)
            out[:, c] = parts[0] if len(parts) == 1 else parts[0] + 1j * parts[1]
            total += count[0]
        return out.reshape(rhs.shape), total

    def solve(self, v) -> ResolventResult:
        """``(A + alpha)^{-1} v``; ``v`` may hold several columns.

        Raises :class:`NoConvergence` when the normwise backward error
        ``||r|| / (||A + alpha|| ||y|| + ||v||)`` exceeds ``tol``.
        """
        sec = self.section
        v = np.asarray(v)
        rhs = sec.to_sym(v)
        if not np.any(rhs):
            return ResolventResult(np.zeros_like(v, dtype=np.result_type(v, float)), self.alpha, 0.0, 0)
        y, iters = self._solve_sym(rhs)
        res = self.shifted @ y - rhs
        r_norm = np.linalg.norm(res, axis=0)
        # normwise backward error, so ill-conditioned shifts are judged fairly
        denom = self._op_norm * np.linalg.norm(y, axis=0) + np.linalg.norm(rhs, axis=0)
        ratio = float(np.max(r_norm / np.where(denom > 0, denom, 1.0)))
        if ratio > self.tol:
            raise NoConvergence(f"resolvent residual {ratio:.3e} exceeds {self.tol:g}")
        return ResolventResult(sec.from_sym(y), self.alpha, float(np.max(r_norm)), iters)

    def __call__(self, v) -> np.ndarray:
        return self.solve(v).solution


def resolvent_apply(section: FiniteSection, alpha: float, v, tol: float = 1e-10, lam0: float | None = None) -> ResolventResult:
    """Solve ``(A + alpha) u = v`` on a section."""
    return ShiftedOperator(section, alpha, lam0=lam0, tol=tol).solve(v)


@dataclass
class PositivityReport:
    worst_margin: float
    passed: bool
    trials: int
    alpha: float
    min_entries: np.ndarray = field(repr=False)


def positivity_check(
    section: FiniteSection,
    alpha: float,
    trials: int = 100,
    tol: float = 1e-12,
    seed: int = 42,
    vectors=None,
    lam0: float | None = None,
) -> PositivityReport:
    """Resolvent of random non-negative vectors must stay non-negative.

    Each trial vector has uniform entries in ``[0, 1)`` on a random half of
    the vertices and zeros elsewhere, so sign leaks off the support show up.
    """
    op = ShiftedOperator(section, alpha, lam0=lam0)
    if vectors is None:
        rng = np.random.default_rng(seed)
        vectors = rng.random((section.n, trials)) * (rng.random((section.n, trials)) < 0.5)
    vectors = np.asarray(vectors, dtype=float).reshape(section.n, -1)
    if np.any(vectors < 0):
        raise NegativeInput("positivity trials need non-negative vectors")
    sol = op(vectors)
    mins = sol.min(axis=0) if sol.size else np.zeros(0)
    worst = float(mins.min()) if mins.size else 0.0
    return PositivityReport(worst, worst >= -tol, vectors.shape[1], float(alpha), mins)


@dataclass
class DominationReport:
    worst_margin: float
    passed: bool
    lhs: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)


def _same_index(a: FiniteSection, b: FiniteSection):
    if a.vertices != b.vertices or not np.array_equal(a.mu, b.mu):
        raise IndexMismatch(f"sections {a.name!r} and {b.name!r} do not share an index map")


def domination_check(
    section_low: FiniteSection,
    section_high: FiniteSection,
    r: float,
    u,
    tol: float = 1e-12,
    lam0_low: float | None = None,
) -> DominationReport:
    """``|(A_high/r + 1)^{-1} u| <= (A_low/r + 1)^{-1} |u|`` entrywise.

    ``section_high`` must be ``section_low`` plus a non-negative potential.
    """
    _same_index(section_low, section_high)
    if np.any(section_high.potential - section_low.potential < 0):
        raise NegativeInput("section_high must carry the larger potential")
    u = np.asarray(u)
    lo = ShiftedOperator(section_low, r, lam0=lam0_low)
    hi = ShiftedOperator(section_high, r, lam0=lam0_low)
    lhs = np.abs(r * hi(u))
    rhs = r * lo(np.abs(u))
    margin = float(np.min(rhs - lhs)) if u.size else 0.0
    return DominationReport(margin, margin >= -tol, lhs, rhs)


@dataclass(frozen=True)
class ConvergenceRow:
    k_or_r: float
    alpha: float
    vector_id: int
    l2_error: float
    form_error: float
    section_size: int


CONVERGENCE_HEADER = ["k_or_r", "alpha", "vector_id", "l2_error", "form_error", "section_size"]


@dataclass
class ConvergenceReport:
    rows: list
    monotone_flag: bool
    converged: bool
    tol: float
    direction: str = "above"
    meta: dict = field(default_factory=dict)

    def errors(self, vector_id: int = 0, column: str = "l2_error") -> np.ndarray:
        return np.array([getattr(r, column) for r in self.rows if r.vector_id == vector_id])

    def to_csv(self) -> str:
        return to_csv(CONVERGENCE_HEADER, ([getattr(r, h) for h in CONVERGENCE_HEADER] for r in self.rows))


def _is_nonincreasing(errors, slack: float = 1e-12) -> bool:
    errors = np.asarray(errors)
    if errors.size < 2:
        return True
    return bool(np.all(np.diff(errors) <= slack * max(1.0, float(errors[0]))))


def src_monitor(
    sections,
    limit: FiniteSection,
    alpha: float,
    test_vectors,
    tol: float = 1e-10,
    labels=None,
    n_samples: int = 8,
    seed: int = 42,
) -> ConvergenceReport:
    """Tabulate ``||(A_k + alpha)^{-1} v - (A + alpha)^{-1} v||`` along a family.

    The family must approach the limit monotonically in form sense.  Random
    samples decide the direction: ``"above"`` when ``(A_k u, u) >= (A u, u)``
    for all samples and members (the decreasing-forms setting), ``"below"``
    for the opposite inequality.  Mixed signs raise
    :class:`MonotonicityViolation`.
    """
    sections = list(sections)
    labels = list(range(1, len(sections) + 1)) if labels is None else list(labels)
    if len(labels) != len(sections):
        raise ValueError("labels and sections differ in length")
    rng = np.random.default_rng(seed)
    samples = [rng.standard_normal(limit.n) for _ in range(n_samples)]
    test_vectors = [np.asarray(v) for v in test_vectors]
    samples += [np.real(v) for v in test_vectors]
    above = below = True
    for sec in sections:
        _same_index(sec, limit)
        for z in samples:
            d = sec.quadratic(z) - limit.quadratic(z)
            slack = tol * max(1.0, abs(limit.quadratic(z)))
            above &= d >= -slack
            below &= d <= slack
    if not (above or below):
        raise MonotonicityViolation("sampled forms are not monotone toward the limit")
    direction = "above" if above else "below"

    lam_limit = lambda0(limit)
    limit_op = ShiftedOperator(limit, alpha, lam0=lam_limit)
    targets = [limit_op(v) for v in test_vectors]

    def form_norm(w):
        return math.sqrt(max(limit.quadratic(w) + (1.0 - lam_limit) * limit.norm(w) ** 2, 0.0))

    rows = []
    for label, sec in zip(labels, sections):
        op = ShiftedOperator(sec, alpha, lam0=lam_limit if direction == "above" else None)
        for vid, (v, t) in enumerate(zip(test_vectors, targets)):
            d = op(v) - t
            rows.append(ConvergenceRow(label, float(alpha), vid, limit.norm(d), form_norm(d), limit.n))
    per_vector = [[r.l2_error for r in rows if r.vector_id == vid] for vid in range(len(test_vectors))]
    monotone = all(_is_nonincreasing(e) for e in per_vector)
    converged = all(e[-1] <= tol for e in per_vector if e)
    return ConvergenceReport(rows, monotone, converged, tol, direction, {"labels": labels})


def operator_function(section: FiniteSection, fn) -> np.ndarray:
    """Dense ``fn(A)`` by spectral calculus, in vertex coordinates.

    Limited to ``n <= DENSE_MAX``.
    """
    if section.n > DENSE_MAX:
        raise ValueError(f"operator_function is dense-only (n <= {DENSE_MAX})")
    w, V = np.linalg.eigh(section.dense)
    M = (V * fn(w)) @ V.T
    s = section.sqrt_mu
    return M / s[:, None] * s[None, :]
